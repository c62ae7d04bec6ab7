use std::path::Path;
use std::time::{Duration, Instant};

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio::sync::oneshot;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};

use demomix_core::env2d::WorldConfig;
use demomix_core::keys::KeySet;
use demomix_core::replay::{load_buffer, ReplayBuffer, Source};
use demomix_demoserve::{ClientMessage, ControlCmd, DemoServer, ServeConfig, ServeSummary, StateFrame};

type Client = WebSocketStream<MaybeTlsStream<TcpStream>>;

struct Running {
    url: String,
    stop: Option<oneshot::Sender<()>>,
    done: tokio::task::JoinHandle<ServeSummary>,
}

async fn start(out: &Path, tick_rate: f64, target: usize) -> Running {
    let cfg = ServeConfig { env: WorldConfig::default(), seed: 3, out: out.to_path_buf(), target, tick_rate };
    let server = DemoServer::bind("127.0.0.1:0", cfg).await.unwrap();
    let url = format!("ws://{}", server.local_addr().unwrap());
    let (tx, rx) = oneshot::channel::<()>();
    let done = tokio::spawn(async move {
        server
            .run(async {
                let _ = rx.await;
            })
            .await
            .unwrap()
    });
    Running { url, stop: Some(tx), done }
}

async fn connect(url: &str) -> Client {
    connect_async(url).await.unwrap().0
}

async fn send(c: &mut Client, msg: ClientMessage) {
    c.send(Message::Text(msg.to_json().into())).await.unwrap();
}

async fn next_frame(c: &mut Client) -> StateFrame {
    loop {
        match tokio::time::timeout(Duration::from_secs(5), c.next()).await.expect("frame within 5 s") {
            Some(Ok(Message::Text(t))) => return serde_json::from_str(t.as_str()).unwrap(),
            Some(Ok(_)) => continue,
            other => panic!("connection ended: {other:?}"),
        }
    }
}

/// Reads frames for `d`, returning the last one seen.
async fn drain_for(c: &mut Client, d: Duration) -> Option<StateFrame> {
    let end = Instant::now() + d;
    let mut last = None;
    while let Ok(Some(Ok(msg))) = tokio::time::timeout_at(end.into(), c.next()).await {
        if let Message::Text(t) = msg {
            last = Some(serde_json::from_str(t.as_str()).unwrap());
        }
    }
    last
}

fn audit(buf: &ReplayBuffer<f64>) {
    for e in buf.iter() {
        assert_eq!(e.source, Source::Demonstration);
        assert!(e.action.is_binary());
        let recomputed = -e.next_obs.goal_offset().norm();
        assert!((e.reward - recomputed).abs() <= 1e-12);
    }
}

#[tokio::test]
async fn thirty_second_session_at_twenty_hertz() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("demos.dmrb");
    let mut server = start(&out, 20.0, 100_000).await;
    let mut client = connect(&server.url).await;
    let first = next_frame(&mut client).await;
    assert_eq!(first.recorded, 0);
    assert_eq!(first.obstacles.len(), 9);

    let started = Instant::now();
    let mut last = first;
    for second in 0..30u8 {
        send(&mut client, ClientMessage::keys(KeySet::from_bits(second % 16))).await;
        if let Some(f) = drain_for(&mut client, Duration::from_secs(1)).await {
            last = f;
        }
    }
    send(&mut client, ClientMessage::Control { cmd: ControlCmd::Finish }).await;
    let summary = server.done.await.unwrap();
    let elapsed = started.elapsed().as_secs_f64();
    server.stop.take();

    let buf: ReplayBuffer<f64> = load_buffer(&out).unwrap();
    assert_eq!(buf.len(), summary.recorded);
    assert!(last.recorded as usize <= summary.recorded);
    let expected = 20.0 * elapsed;
    assert!(
        (buf.len() as f64) > 0.95 * expected && (buf.len() as f64) <= expected + 2.0,
        "{} experiences in {elapsed:.2} s",
        buf.len()
    );
    audit(&buf);
    assert!(!dir.path().join("demos.dmrb.tmp").exists());
}

#[tokio::test]
async fn disconnect_pauses_recording() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.dmrb");
    let mut server = start(&out, 100.0, 100_000).await;

    let mut client = connect(&server.url).await;
    send(&mut client, ClientMessage::keys(KeySet { right: true, ..KeySet::NONE })).await;
    let seen = drain_for(&mut client, Duration::from_millis(500)).await.unwrap();
    client.close(None).await.unwrap();
    drop(client);

    tokio::time::sleep(Duration::from_millis(1500)).await;
    let mut again = connect(&server.url).await;
    let resumed = next_frame(&mut again).await;
    assert!(
        resumed.recorded <= seen.recorded + 5,
        "recorded grew from {} to {} while unpiloted",
        seen.recorded,
        resumed.recorded
    );
    drop(again);
    tokio::time::sleep(Duration::from_millis(300)).await;
    server.stop.take().unwrap().send(()).unwrap();
    let summary = server.done.await.unwrap();
    assert!(summary.recorded < 100, "{} recorded in 0.5 s piloted", summary.recorded);
    audit(&load_buffer(&out).unwrap());
}

#[tokio::test]
async fn second_pilot_is_turned_away_and_bad_messages_are_ignored() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.dmrb");
    let mut server = start(&out, 50.0, 100_000).await;
    let mut pilot = connect(&server.url).await;
    next_frame(&mut pilot).await;

    let mut intruder = connect(&server.url).await;
    let closed = loop {
        match tokio::time::timeout(Duration::from_secs(5), intruder.next()).await.unwrap() {
            Some(Ok(Message::Close(frame))) => break frame,
            Some(Ok(Message::Text(_))) => panic!("second client received frames"),
            Some(Ok(_)) => continue,
            other => panic!("{other:?}"),
        }
    };
    assert!(closed.unwrap().reason.contains("already connected"));

    pilot.send(Message::Text("{\"type\":\"keys\"}".into())).await.unwrap();
    pilot.send(Message::Text("garbage".into())).await.unwrap();
    let before = next_frame(&mut pilot).await;
    send(&mut pilot, ClientMessage::Control { cmd: ControlCmd::Reset }).await;
    let mut after = next_frame(&mut pilot).await;
    while after.episode == before.episode {
        after = next_frame(&mut pilot).await;
    }
    assert!(after.episode > before.episode);
    assert!(after.recorded >= before.recorded);

    server.stop.take().unwrap().send(()).unwrap();
    let summary = server.done.await.unwrap();
    assert!(summary.episodes >= 1);
    assert!(out.exists());
}

#[tokio::test]
async fn stops_and_flushes_at_target() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.dmrb");
    let server = start(&out, 200.0, 25).await;
    let mut client = connect(&server.url).await;
    send(&mut client, ClientMessage::keys(KeySet { up: true, ..KeySet::NONE })).await;
    let summary = server.done.await.unwrap();
    assert_eq!(summary.recorded, 25);
    let buf: ReplayBuffer<f64> = load_buffer(&out).unwrap();
    assert_eq!(buf.len(), 25);
    audit(&buf);
}
