//! A tracker living in another process, speaking the length-prefixed JSON
//! protocol on stdin/stdout or on a TCP port.
//!
//! It keeps a constant-velocity guess from its last two inputs. Try:
//!
//! ```text
//! cargo build --example wire_peer
//! slopetrack evaluate --dataset DIR --backend "extern:target/debug/examples/wire_peer" --out OUT
//! cargo run --example wire_peer -- --listen 127.0.0.1:7878   # then --backend extern:tcp:127.0.0.1:7878
//! ```

use std::net::TcpListener;

use slopetrack::geometry::{clip_to_frame, BBox};
use slopetrack::metrics::Prediction;
use slopetrack::protocol::wire::{serve_backend, Duplex, Transport};
use slopetrack::protocol::{BackendError, FrameContext, TrackerBackend};

#[derive(Default)]
struct Drift {
    last: Option<(usize, BBox)>,
}

impl TrackerBackend for Drift {
    fn name(&self) -> String {
        "drift".into()
    }

    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.last = Some((ctx.t, bbox));
        Ok(())
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        let (t0, b) = self.last.ok_or(BackendError::NotInitialized)?;
        // decays with the time since the last box it was handed
        let confidence = 1.0 / (1.0 + 0.05 * (ctx.t - t0) as f64);
        Ok(Prediction { bbox: Some(clip_to_frame(&b, ctx.dims)), confidence })
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().collect();
    match args.iter().position(|a| a == "--listen") {
        Some(i) => {
            let listener = TcpListener::bind(args.get(i + 1).ok_or("--listen needs HOST:PORT")?)?;
            eprintln!("listening on {}", listener.local_addr()?);
            for stream in listener.incoming() {
                let mut conn: Box<dyn Transport> = Box::new(stream?);
                if let Err(e) = serve_backend(&mut Drift::default(), conn.as_mut()) {
                    eprintln!("session ended: {e}");
                }
            }
        }
        None => {
            let mut conn = Duplex { reader: std::io::stdin(), writer: std::io::stdout() };
            serve_backend(&mut Drift::default(), &mut conn)?;
        }
    }
    Ok(())
}
