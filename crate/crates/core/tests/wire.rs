use std::io::{Read, Write};
use std::net::TcpListener;
use std::thread;

use slopetrack::geometry::BBox;
use slopetrack::protocol::wire::{read_message, serve_backend, write_message, Duplex, Request, Response, Transport};
use slopetrack::protocol::{run_ope, BackendError, ExternBackend, FrameContext, InitPolicy, OpeError, TrackerBackend};
use slopetrack::simgen::{gen_detections, gen_mc_sequence, NoiseConfig, OracleBackend, SimConfig};
use slopetrack::sort::{SortBackend, SortConfig};

fn video(seed: u64) -> slopetrack::datamodel::MCVideo {
    gen_mc_sequence(&SimConfig { id: "w".into(), frames: 80, cuts: vec![40], occlusions: vec![(20, 5)], seed, ..Default::default() })
        .unwrap()
}

/// Host and peer ends of an in-process pipe pair.
fn pipe_pair() -> (Box<dyn Transport>, Box<dyn Transport>) {
    let (host_r, peer_w) = std::io::pipe().unwrap();
    let (peer_r, host_w) = std::io::pipe().unwrap();
    (Box::new(Duplex { reader: host_r, writer: host_w }), Box::new(Duplex { reader: peer_r, writer: peer_w }))
}

fn serve_in_thread(mut backend: impl TrackerBackend + 'static, mut conn: Box<dyn Transport>) -> thread::JoinHandle<Result<(), BackendError>> {
    thread::spawn(move || serve_backend(&mut backend, conn.as_mut()))
}

#[test]
fn oracle_over_pipes_matches_in_process() {
    let v = video(1);
    let direct = run_ope(&mut OracleBackend::new(&v, 4.0, 9).unwrap(), &v, &InitPolicy::GroundTruth).unwrap();

    let (host, peer) = pipe_pair();
    let server = serve_in_thread(OracleBackend::new(&v, 4.0, 9).unwrap(), peer);
    let mut ext = ExternBackend::over("pipe", host);
    let remote = run_ope(&mut ext, &v, &InitPolicy::GroundTruth).unwrap();
    ext.shutdown().unwrap();
    server.join().unwrap().unwrap();

    assert_eq!(remote.trace, direct.trace);
}

#[test]
fn sort_over_tcp_matches_in_process() {
    let v = video(2);
    let dets = gen_detections(&v, &NoiseConfig { seed: 5, ..Default::default() }).unwrap();
    let direct = run_ope(&mut SortBackend::new(dets.clone(), SortConfig::default()).unwrap(), &v, &InitPolicy::GroundTruth).unwrap();

    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let backend = SortBackend::new(dets, SortConfig::default()).unwrap();
    let server = thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut backend = backend;
        let mut conn: Box<dyn Transport> = Box::new(stream);
        serve_backend(&mut backend, conn.as_mut())
    });
    let mut ext = ExternBackend::connect(&addr).unwrap();
    let remote = run_ope(&mut ext, &v, &InitPolicy::GroundTruth).unwrap();
    drop(ext);
    server.join().unwrap().unwrap();
    assert_eq!(remote.trace, direct.trace);
}

/// Peer that acknowledges everything and answers updates with `reply` until
/// `updates` of them were served, then hangs up.
fn scripted_peer(mut conn: Box<dyn Transport>, reply: &'static str, updates: usize) -> thread::JoinHandle<Vec<String>> {
    thread::spawn(move || {
        let mut seen = Vec::new();
        let mut served = 0;
        while let Ok(Some(bytes)) = read_message(conn.as_mut()) {
            let text = String::from_utf8(bytes).unwrap();
            let is_update = text.contains("\"update\"");
            seen.push(text);
            if is_update {
                if served == updates {
                    break;
                }
                served += 1;
                write_message(conn.as_mut(), reply.as_bytes()).unwrap();
            } else {
                write_message(conn.as_mut(), br#"{"ok":true}"#).unwrap();
            }
        }
        seen
    })
}

#[test]
fn out_of_range_confidence_is_a_protocol_error() {
    let v = video(3);
    let (host, peer) = pipe_pair();
    let peer = scripted_peer(peer, r#"{"x":1,"y":2,"w":30,"h":60,"conf":1.3}"#, usize::MAX);
    let mut ext = ExternBackend::over("bad-conf", host);
    let err = run_ope(&mut ext, &v, &InitPolicy::GroundTruth).unwrap_err();
    match &err {
        OpeError::Backend { frame, source } => {
            assert_eq!(*frame, 1);
            assert!(matches!(source, BackendError::Protocol(_)), "{source}");
        }
        other => panic!("unexpected {other}"),
    }
    assert!(ext.failure().is_some());
    // later calls fail without touching the transport
    let ctx = FrameContext::for_video(&v, 2);
    assert!(ext.update(&ctx).unwrap_err().is_peer_failure());
    drop(ext);
    let seen = peer.join().unwrap();
    assert_eq!(seen.len(), 2, "{seen:?}");
}

#[test]
fn peer_hanging_up_fails_the_run() {
    let v = video(4);
    let (host, peer) = pipe_pair();
    let peer = scripted_peer(peer, r#"{"absent":true,"conf":0.1}"#, 5);
    let mut ext = ExternBackend::over("hangup", host);
    let err = run_ope(&mut ext, &v, &InitPolicy::GroundTruth).unwrap_err();
    match err {
        OpeError::Backend { frame, source } => {
            assert_eq!(frame, 6);
            assert!(matches!(source, BackendError::PeerFailed(_)));
        }
        other => panic!("unexpected {other}"),
    }
    drop(ext);
    peer.join().unwrap();
}

#[test]
fn echoing_process_violates_the_protocol() {
    // `cat` sends every request back, which is not a valid response
    let v = video(5);
    let mut ext = ExternBackend::spawn("cat").unwrap();
    let err = run_ope(&mut ext, &v, &InitPolicy::GroundTruth).unwrap_err();
    match err {
        OpeError::Backend { frame: 0, source: BackendError::Protocol(_) } => {}
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn missing_program_is_reported() {
    assert!(ExternBackend::spawn("/nonexistent/tracker-peer").is_err());
    assert!(ExternBackend::spawn("   ").is_err());
}

#[test]
fn request_bytes_on_the_wire() {
    let v = video(6);
    let (host, mut peer) = pipe_pair();
    let reader = thread::spawn(move || {
        let mut len = [0u8; 4];
        peer.read_exact(&mut len).unwrap();
        let n = u32::from_be_bytes(len) as usize;
        let mut body = vec![0u8; n];
        peer.read_exact(&mut body).unwrap();
        write_message(peer.as_mut(), br#"{"ok":true}"#).unwrap();
        let _ = read_message(peer.as_mut()); // shutdown
        let _ = write_message(peer.as_mut(), br#"{"ok":true}"#);
        body
    });
    let mut ext = ExternBackend::over("raw", host);
    let ctx = FrameContext::for_video(&v, 0);
    ext.init(&ctx, BBox::new(10.0, 20.0, 30.0, 60.0)).unwrap();
    ext.shutdown().unwrap();
    let body: serde_json::Value = serde_json::from_slice(&reader.join().unwrap()).unwrap();
    assert_eq!(body["cmd"], "init");
    assert_eq!(body["t"], 0);
    assert_eq!(body["width"], 1280.0);
    assert_eq!(body["height"], 720.0);
    assert_eq!(body["box"], serde_json::json!({"x": 10.0, "y": 20.0, "w": 30.0, "h": 60.0}));
}

#[test]
fn server_rejects_malformed_requests() {
    let v = video(7);
    let (mut host, peer) = pipe_pair();
    let server = serve_in_thread(OracleBackend::perfect(&v), peer);
    write_message(host.as_mut(), br#"{"cmd":"teleport"}"#).unwrap();
    let reply = Response::decode(&read_message(host.as_mut()).unwrap().unwrap()).unwrap();
    assert!(matches!(reply, Response::Error(_)));
    assert!(matches!(server.join().unwrap(), Err(BackendError::Protocol(_))));
}

#[test]
fn server_reports_update_before_init() {
    let v = video(8);
    let (mut host, peer) = pipe_pair();
    let server = serve_in_thread(OracleBackend::perfect(&v), peer);
    let ctx = FrameContext::for_video(&v, 1);
    write_message(host.as_mut(), &Request::Update { frame: (&ctx).into() }.encode()).unwrap();
    let reply = Response::decode(&read_message(host.as_mut()).unwrap().unwrap()).unwrap();
    assert_eq!(reply, Response::Error("not initialized".into()));
    write_message(host.as_mut(), &Request::Shutdown.encode()).unwrap();
    assert_eq!(Response::decode(&read_message(host.as_mut()).unwrap().unwrap()).unwrap(), Response::Ack);
    server.join().unwrap().unwrap();
}

#[test]
fn oversized_frames_are_refused() {
    let mut bytes = (u32::MAX).to_be_bytes().to_vec();
    bytes.extend_from_slice(b"{}");
    assert!(read_message(&mut bytes.as_slice()).is_err());
    let mut truncated: &[u8] = &[0, 0, 0, 9, b'{'];
    assert!(read_message(&mut truncated).is_err());
    let mut empty: &[u8] = &[];
    assert!(read_message(&mut empty).unwrap().is_none());
    let mut sink = Vec::new();
    write_message(&mut sink, b"{}").unwrap();
    assert_eq!(sink, [0, 0, 0, 2, b'{', b'}']);
    sink.flush().unwrap();
}
