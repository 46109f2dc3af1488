use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use safer_core::world::WorldModel;
use safer_core::SaferConfig;
use safer_harness::scenario::builtin;
use safer_harness::MethodId;
use safer_teleop::{start_teleop, Bridge, BridgeOptions, ServerMessage, TeleopConfig, TelemetryFrame};

type Ws = WebSocketStream<MaybeTlsStream<TcpStream>>;

async fn next_message(ws: &mut Ws) -> ServerMessage {
    loop {
        let msg = tokio::time::timeout(Duration::from_secs(10), ws.next())
            .await
            .expect("no message within 10 s")
            .expect("socket closed")
            .unwrap();
        if let Message::Text(t) = msg {
            return serde_json::from_str(t.as_str()).unwrap();
        }
    }
}

async fn next_frame(ws: &mut Ws) -> TelemetryFrame {
    loop {
        if let ServerMessage::Frame(f) = next_message(ws).await {
            return *f;
        }
    }
}

async fn next_error(ws: &mut Ws) -> String {
    loop {
        if let ServerMessage::Error { msg } = next_message(ws).await {
            return msg;
        }
    }
}

async fn get(addr: std::net::SocketAddr, path: &str) -> (String, String) {
    let mut s = TcpStream::connect(addr).await.unwrap();
    let req = format!("GET {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n");
    s.write_all(req.as_bytes()).await.unwrap();
    let mut raw = String::new();
    s.read_to_string(&mut raw).await.unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    (head.lines().next().unwrap().to_string(), body.to_string())
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn operators_drive_and_observe_over_the_socket() {
    let bridge = Bridge::new(
        builtin("open_corridor").unwrap(),
        SaferConfig::default(),
        MethodId::Aeb,
        None,
        4,
        BridgeOptions::default(),
    )
    .unwrap();
    let v_max = bridge.config().limits.v_max;
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let handle = start_teleop(
        listener,
        bridge,
        TeleopConfig {
            rate_hz: 50.0,
            ..TeleopConfig::default()
        },
    )
    .await
    .unwrap();
    let url = format!("ws://{}/ws", handle.addr);
    let (mut driver, _) = connect_async(&url).await.unwrap();
    let (mut watcher, _) = connect_async(&url).await.unwrap();

    let idle = next_frame(&mut driver).await;
    assert_eq!(idle.method, MethodId::Aeb);
    assert_eq!(idle.upstream.v, 0.0);

    driver
        .send(Message::text(r#"{"type":"cmd","throttle":2.0,"turn":0.0,"ts":1.5}"#))
        .await
        .unwrap();
    let mut moving = None;
    for _ in 0..50 {
        let f = next_frame(&mut watcher).await;
        if f.upstream.v == v_max {
            moving = Some(f);
            break;
        }
    }
    let moving = moving.expect("command never reached the gate");
    assert_eq!(moving.stage, safer_core::gate::GateStage::Maintain);

    driver.send(Message::text(r#"{"type":"set_method","method":"safer"}"#)).await.unwrap();
    assert!(next_error(&mut driver).await.contains("checkpoint"));
    driver.send(Message::text(r#"{"type":"warp","to":9}"#)).await.unwrap();
    assert!(next_error(&mut driver).await.contains("bad message"));
    driver
        .send(Message::text(r#"{"type":"cmd","throttle":"fast","turn":0.0}"#))
        .await
        .unwrap();
    next_error(&mut driver).await;

    driver.send(Message::text(r#"{"type":"set_method","method":"dwa"}"#)).await.unwrap();
    let mut switched = false;
    for _ in 0..50 {
        if next_frame(&mut watcher).await.method == MethodId::Dwa {
            switched = true;
            break;
        }
    }
    assert!(switched);

    let (status, body) = get(handle.addr, "/world").await;
    assert!(status.contains("200"), "{status}");
    let world = WorldModel::from_json(&body).unwrap();
    assert_eq!(&world, &builtin("open_corridor").unwrap().world);
    let (status, _) = get(handle.addr, "/nowhere").await;
    assert!(status.contains("404"), "{status}");

    drop(driver);
    drop(watcher);
    let (result, tape) = handle.shutdown().await.unwrap();
    assert!(result.metrics.distance > 0.0);
    assert_eq!(tape.method, MethodId::Aeb);
    let cmd = tape.events.iter().find_map(|e| e.input.command).unwrap();
    assert_eq!((cmd.throttle, cmd.ts), (1.0, 1.5));
    assert!(tape.events.iter().any(|e| e.input.method == Some(MethodId::Dwa)));
}

#[tokio::test]
async fn rejects_a_non_positive_rate() {
    let bridge = Bridge::new(
        builtin("open_corridor").unwrap(),
        SaferConfig::default(),
        MethodId::NoSafety,
        None,
        1,
        BridgeOptions::default(),
    )
    .unwrap();
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let cfg = TeleopConfig {
        rate_hz: 0.0,
        ..TeleopConfig::default()
    };
    assert!(start_teleop(listener, bridge, cfg).await.is_err());
}
