//! Length-prefixed JSON session with a tracker running in another process.
//!
//! Every message is a 4-byte big-endian payload length followed by a UTF-8
//! JSON object. The host sends requests tagged by `cmd` (`init`, `update`,
//! `reinit`, `set_ref`, `shutdown`) and reads exactly one response per
//! request: `{"ok": true}`, `{"x", "y", "w", "h", "conf"}`,
//! `{"absent": true}` or `{"error": "..."}`.

use std::io::{self, Read, Write};
use std::net::TcpStream;
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{BackendError, FrameContext, TrackerBackend};
use crate::geometry::{BBox, FrameDims};
use crate::metrics::Prediction;

/// Largest accepted payload.
pub const MAX_MESSAGE_LEN: usize = 16 << 20;

pub fn write_message(w: &mut dyn Write, payload: &[u8]) -> io::Result<()> {
    let len = u32::try_from(payload.len())
        .ok()
        .filter(|&l| l as usize <= MAX_MESSAGE_LEN)
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "message too large"))?;
    // one write per message so small frames are not held back by Nagle
    let mut buf = Vec::with_capacity(4 + payload.len());
    buf.extend_from_slice(&len.to_be_bytes());
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one message; `None` when the stream ends cleanly between messages.
pub fn read_message(r: &mut dyn Read) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_MESSAGE_LEN {
        return Err(io::Error::new(io::ErrorKind::InvalidData, format!("message of {len} bytes exceeds limit")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(Some(buf))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WireBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl From<BBox> for WireBox {
    fn from(b: BBox) -> Self {
        Self { x: b.x, y: b.y, w: b.w, h: b.h }
    }
}

impl From<WireBox> for BBox {
    fn from(b: WireBox) -> Self {
        BBox::new(b.x, b.y, b.w, b.h)
    }
}

/// Frame fields shared by the frame-bearing requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireFrame {
    pub t: usize,
    pub width: f64,
    pub height: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
}

impl From<&FrameContext> for WireFrame {
    fn from(c: &FrameContext) -> Self {
        Self {
            t: c.t,
            width: c.dims.width,
            height: c.dims.height,
            timestamp: Some(c.timestamp),
            frames: Some(c.frames),
            image: c.image_path.as_ref().map(|p| p.display().to_string()),
        }
    }
}

impl WireFrame {
    fn context(&self) -> Result<FrameContext, String> {
        let dims = FrameDims::new(self.width, self.height).map_err(|e| e.to_string())?;
        Ok(FrameContext {
            t: self.t,
            dims,
            timestamp: self.timestamp.unwrap_or(0.0),
            frames: self.frames.unwrap_or(0),
            image_path: self.image.as_ref().map(Into::into),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Init {
        #[serde(flatten)]
        frame: WireFrame,
        #[serde(rename = "box")]
        bbox: WireBox,
    },
    Update {
        #[serde(flatten)]
        frame: WireFrame,
    },
    Reinit {
        #[serde(flatten)]
        frame: WireFrame,
        #[serde(rename = "box")]
        bbox: WireBox,
    },
    SetRef {
        #[serde(rename = "box")]
        bbox: WireBox,
    },
    Shutdown,
}

impl Request {
    pub fn encode(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("requests are plain data")
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        serde_json::from_slice(bytes).map_err(|e| format!("malformed request: {e}"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Response {
    Ack,
    Box { bbox: BBox, conf: f64 },
    Absent { conf: f64 },
    Error(String),
}

impl Response {
    pub fn encode(&self) -> Vec<u8> {
        let v = match self {
            Response::Ack => json!({ "ok": true }),
            Response::Box { bbox, conf } => json!({ "x": bbox.x, "y": bbox.y, "w": bbox.w, "h": bbox.h, "conf": conf }),
            Response::Absent { conf } => json!({ "absent": true, "conf": conf }),
            Response::Error(msg) => json!({ "error": msg }),
        };
        serde_json::to_vec(&v).expect("responses are plain data")
    }

    /// Parses and validates a response; confidences must lie in `[0, 1]`.
    pub fn decode(bytes: &[u8]) -> Result<Self, String> {
        let v: Value = serde_json::from_slice(bytes).map_err(|e| format!("malformed response: {e}"))?;
        let obj = v.as_object().ok_or("response is not a JSON object")?;
        let conf = |required: bool| -> Result<f64, String> {
            match obj.get("conf") {
                None if !required => Ok(0.0),
                None => Err("response lacks conf".into()),
                Some(c) => {
                    let c = c.as_f64().ok_or("conf is not a number")?;
                    if (0.0..=1.0).contains(&c) {
                        Ok(c)
                    } else {
                        Err(format!("confidence {c} outside [0, 1]"))
                    }
                }
            }
        };
        if let Some(e) = obj.get("error") {
            return Ok(Response::Error(e.as_str().map_or_else(|| e.to_string(), str::to_string)));
        }
        if obj.get("ok") == Some(&Value::Bool(true)) {
            return Ok(Response::Ack);
        }
        if obj.get("absent") == Some(&Value::Bool(true)) {
            return Ok(Response::Absent { conf: conf(false)? });
        }
        let field = |k: &str| obj.get(k).and_then(Value::as_f64).ok_or_else(|| format!("response lacks numeric {k}"));
        if obj.contains_key("x") {
            let bbox = BBox::new(field("x")?, field("y")?, field("w")?, field("h")?);
            bbox.validate().map_err(|e| e.to_string())?;
            return Ok(Response::Box { bbox, conf: conf(true)? });
        }
        Err(format!("unrecognized response {v}"))
    }
}

/// Byte stream carrying a session.
pub trait Transport: Read + Write + Send {}

impl<T: Read + Write + Send> Transport for T {}

/// Joins a read half and a write half into one transport.
pub struct Duplex<R, W> {
    pub reader: R,
    pub writer: W,
}

impl<R: Read, W> Read for Duplex<R, W> {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.reader.read(buf)
    }
}

impl<R, W: Write> Write for Duplex<R, W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.writer.write(buf)
    }
    fn flush(&mut self) -> io::Result<()> {
        self.writer.flush()
    }
}

/// A tracker living behind the wire protocol: a spawned process speaking on
/// its stdin/stdout, a TCP peer, or any other transport.
///
/// Any protocol violation or peer error marks the backend failed; every later
/// call then fails without touching the transport.
pub struct ExternBackend {
    name: String,
    conn: Option<Box<dyn Transport>>,
    child: Option<Child>,
    failed: Option<String>,
    reference_capable: bool,
    search_area_factor: f64,
}

impl ExternBackend {
    pub fn over(name: impl Into<String>, conn: Box<dyn Transport>) -> Self {
        Self {
            name: name.into(),
            conn: Some(conn),
            child: None,
            failed: None,
            reference_capable: true,
            search_area_factor: 5.0,
        }
    }

    /// Spawns `command` (whitespace-separated program and arguments).
    pub fn spawn(command: &str) -> Result<Self, BackendError> {
        let mut parts = command.split_whitespace();
        let program = parts.next().ok_or_else(|| BackendError::Config("empty extern command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin: ChildStdin = child.stdin.take().expect("piped stdin");
        let stdout: ChildStdout = child.stdout.take().expect("piped stdout");
        let mut me = Self::over(format!("extern:{command}"), Box::new(Duplex { reader: stdout, writer: stdin }));
        me.child = Some(child);
        Ok(me)
    }

    pub fn connect(addr: &str) -> Result<Self, BackendError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Self::over(format!("extern:tcp:{addr}"), Box::new(stream)))
    }

    pub fn with_reference_capability(mut self, capable: bool) -> Self {
        self.reference_capable = capable;
        self
    }

    pub fn with_search_area_factor(mut self, factor: f64) -> Self {
        self.search_area_factor = factor;
        self
    }

    pub fn failure(&self) -> Option<&str> {
        self.failed.as_deref()
    }

    fn fail(&mut self, err: BackendError) -> BackendError {
        self.failed = Some(err.to_string());
        err
    }

    fn call(&mut self, req: &Request) -> Result<Response, BackendError> {
        if let Some(why) = &self.failed {
            return Err(BackendError::PeerFailed(format!("backend already failed: {why}")));
        }
        let conn = self.conn.as_mut().ok_or_else(|| BackendError::PeerFailed("session closed".into()))?;
        let sent = write_message(conn, &req.encode());
        let reply = sent.and_then(|_| read_message(conn));
        match reply {
            Err(e) => Err(self.fail(BackendError::PeerFailed(format!("transport error: {e}")))),
            Ok(None) => Err(self.fail(BackendError::PeerFailed("peer closed the session".into()))),
            Ok(Some(bytes)) => match Response::decode(&bytes) {
                Ok(Response::Error(msg)) => Err(self.fail(BackendError::PeerFailed(msg))),
                Ok(r) => Ok(r),
                Err(msg) => Err(self.fail(BackendError::Protocol(msg))),
            },
        }
    }

    fn expect_ack(&mut self, req: &Request) -> Result<(), BackendError> {
        match self.call(req)? {
            Response::Ack => Ok(()),
            other => Err(self.fail(BackendError::Protocol(format!("expected acknowledgement, got {other:?}")))),
        }
    }

    /// Ends the session politely and reaps a spawned peer.
    pub fn shutdown(&mut self) -> Result<(), BackendError> {
        let result = if self.failed.is_none() && self.conn.is_some() { self.expect_ack(&Request::Shutdown) } else { Ok(()) };
        self.conn = None;
        if let Some(mut child) = self.child.take() {
            let deadline = Instant::now() + Duration::from_secs(2);
            loop {
                match child.try_wait()? {
                    Some(_) => break,
                    None if Instant::now() >= deadline => {
                        let _ = child.kill();
                        let _ = child.wait();
                        break;
                    }
                    None => std::thread::sleep(Duration::from_millis(5)),
                }
            }
        }
        result
    }
}

impl Drop for ExternBackend {
    fn drop(&mut self) {
        let _ = self.shutdown();
    }
}

impl TrackerBackend for ExternBackend {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn init(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.expect_ack(&Request::Init { frame: ctx.into(), bbox: bbox.into() })
    }

    fn update(&mut self, ctx: &FrameContext) -> Result<Prediction, BackendError> {
        match self.call(&Request::Update { frame: ctx.into() })? {
            Response::Box { bbox, conf } => Ok(Prediction { bbox: Some(bbox), confidence: conf }),
            Response::Absent { conf } => Ok(Prediction { bbox: None, confidence: conf }),
            other => Err(self.fail(BackendError::Protocol(format!("expected a prediction, got {other:?}")))),
        }
    }

    fn reinit(&mut self, ctx: &FrameContext, bbox: BBox) -> Result<(), BackendError> {
        self.expect_ack(&Request::Reinit { frame: ctx.into(), bbox: bbox.into() })
    }

    fn supports_reference_box(&self) -> bool {
        self.reference_capable
    }

    fn set_reference_box(&mut self, bbox: BBox) -> Result<(), BackendError> {
        if !self.reference_capable {
            return Err(BackendError::Unsupported("set_reference_box"));
        }
        self.expect_ack(&Request::SetRef { bbox: bbox.into() })
    }

    fn search_area_factor(&self) -> f64 {
        self.search_area_factor
    }
}

/// Serves `backend` over a session until the host sends `shutdown` or closes
/// the stream. A malformed request gets an error response and ends the
/// session.
pub fn serve_backend(backend: &mut dyn TrackerBackend, conn: &mut dyn Transport) -> Result<(), BackendError> {
    loop {
        let Some(bytes) = read_message(conn)? else {
            return Ok(());
        };
        let req = match Request::decode(&bytes) {
            Ok(r) => r,
            Err(msg) => {
                write_message(conn, &Response::Error(msg.clone()).encode())?;
                return Err(BackendError::Protocol(msg));
            }
        };
        let reply = match req {
            Request::Shutdown => {
                write_message(conn, &Response::Ack.encode())?;
                return Ok(());
            }
            Request::Init { frame, bbox } => {
                frame.context().map_err(BackendError::Config).and_then(|c| backend.init(&c, bbox.into())).map(|_| Response::Ack)
            }
            Request::Reinit { frame, bbox } => {
                frame.context().map_err(BackendError::Config).and_then(|c| backend.reinit(&c, bbox.into())).map(|_| Response::Ack)
            }
            Request::SetRef { bbox } => backend.set_reference_box(bbox.into()).map(|_| Response::Ack),
            Request::Update { frame } => frame.context().map_err(BackendError::Config).and_then(|c| backend.update(&c)).and_then(|p| {
                if !(0.0..=1.0).contains(&p.confidence) {
                    return Err(BackendError::Protocol(format!("confidence {} outside [0, 1]", p.confidence)));
                }
                Ok(match p.bbox {
                    Some(bbox) => Response::Box { bbox, conf: p.confidence },
                    None => Response::Absent { conf: p.confidence },
                })
            }),
        };
        let reply = reply.unwrap_or_else(|e| match e {
            BackendError::NotInitialized => Response::Error("not initialized".into()),
            other => Response::Error(other.to_string()),
        });
        write_message(conn, &reply.encode())?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn framing_round_trip() {
        let mut buf = Vec::new();
        write_message(&mut buf, b"{\"ok\":true}").unwrap();
        assert_eq!(&buf[..4], &[0, 0, 0, 11]);
        let mut r = &buf[..];
        assert_eq!(read_message(&mut r).unwrap().unwrap(), b"{\"ok\":true}");
        assert!(read_message(&mut r).unwrap().is_none());
        let mut truncated = &buf[..6];
        assert!(read_message(&mut truncated).is_err());
    }

    #[test]
    fn request_shapes() {
        let frame = WireFrame { t: 3, width: 1280.0, height: 720.0, timestamp: None, frames: None, image: None };
        let up = String::from_utf8(Request::Update { frame: frame.clone() }.encode()).unwrap();
        assert_eq!(up, r#"{"cmd":"update","t":3,"width":1280.0,"height":720.0}"#);
        let set = String::from_utf8(Request::SetRef { bbox: BBox::new(1.0, 2.0, 3.0, 4.0).into() }.encode()).unwrap();
        assert_eq!(set, r#"{"cmd":"set_ref","box":{"x":1.0,"y":2.0,"w":3.0,"h":4.0}}"#);
        let init = Request::Init { frame, bbox: BBox::new(1.0, 2.0, 3.0, 4.0).into() };
        assert_eq!(Request::decode(&init.encode()).unwrap(), init);
        assert_eq!(Request::decode(br#"{"cmd":"shutdown"}"#).unwrap(), Request::Shutdown);
        assert!(Request::decode(br#"{"cmd":"dance"}"#).is_err());
    }

    #[test]
    fn response_validation() {
        assert_eq!(Response::decode(br#"{"ok":true}"#).unwrap(), Response::Ack);
        assert_eq!(
            Response::decode(br#"{"x":1,"y":2,"w":3,"h":4,"conf":0.5}"#).unwrap(),
            Response::Box { bbox: BBox::new(1.0, 2.0, 3.0, 4.0), conf: 0.5 }
        );
        assert_eq!(Response::decode(br#"{"absent":true}"#).unwrap(), Response::Absent { conf: 0.0 });
        assert!(Response::decode(br#"{"x":1,"y":2,"w":3,"h":4,"conf":1.3}"#).unwrap_err().contains("outside"));
        assert!(Response::decode(br#"{"x":1,"y":2,"w":-3,"h":4,"conf":0.3}"#).is_err());
        assert!(Response::decode(br#"{"cmd":"init"}"#).is_err());
        assert!(Response::decode(b"[1]").is_err());
        for r in [Response::Ack, Response::Absent { conf: 0.25 }, Response::Error("boom".into())] {
            assert_eq!(Response::decode(&r.encode()).unwrap(), r);
        }
    }
}
