use std::net::SocketAddr;
use std::sync::Arc;

use reqwest::blocking::Client;
use smartchair::ingest::{self, SensorSample, StreamStore, TelemetryBatch, TelemetryStream};
use smartchair::synth::{self, ReplayError};

fn sample(t: f64) -> SensorSample {
    SensorSample {
        t,
        acc: [0.01 * t, -0.02, 9.81],
        gyro: [0.5, -0.25, t.sin()],
        mag: [20.0, 5.0, -40.0],
    }
}

fn stream(id: &str, n: usize) -> TelemetryStream {
    TelemetryStream::new(id, (0..n).map(|i| sample(i as f64 / 100.0)).collect())
}

fn server() -> (tempfile::TempDir, Arc<StreamStore>, ingest::ServerHandle) {
    let dir = tempfile::tempdir().unwrap();
    let store = Arc::new(StreamStore::open(dir.path()).unwrap());
    let handle = ingest::spawn_server(store.clone(), SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    (dir, store, handle)
}

fn post(client: &Client, url: &str, body: String) -> (u16, serde_json::Value) {
    let resp = client
        .post(format!("{url}/v1/telemetry"))
        .header("content-type", "application/json")
        .body(body)
        .send()
        .unwrap();
    let status = resp.status().as_u16();
    (status, resp.json().unwrap())
}

fn batch(id: &str, seq: u64, ts: &[f64]) -> TelemetryBatch {
    TelemetryBatch {
        player_id: id.into(),
        device_id: "chair-a".into(),
        seq,
        samples: ts.iter().map(|&t| sample(t)).collect(),
    }
}

#[test]
fn status_codes() {
    let (_dir, _store, srv) = server();
    let client = Client::new();
    let url = srv.url();
    assert_eq!(
        client.get(format!("{url}/v1/health")).send().unwrap().status().as_u16(),
        200
    );

    let (status, ack) = post(&client, &url, ingest::to_json(&batch("p1", 0, &[0.0, 0.01])));
    assert_eq!(
        (status, ack["accepted"].as_u64(), ack["duplicate"].as_bool()),
        (200, Some(2), Some(false))
    );
    let (status, ack) = post(&client, &url, ingest::to_json(&batch("p1", 0, &[0.0, 0.01])));
    assert_eq!(
        (status, ack["accepted"].as_u64(), ack["duplicate"].as_bool()),
        (200, Some(0), Some(true))
    );

    let (status, body) = post(&client, &url, "{not json".into());
    assert_eq!(status, 400);
    assert!(body["error"].as_str().unwrap().contains("malformed"));
    let (status, _) = post(&client, &url, ingest::to_json(&batch("p1", 1, &[0.02, 0.02])));
    assert_eq!(status, 400);
    let (status, _) = post(&client, &url, ingest::to_json(&batch("p1", 2, &[0.005])));
    assert_eq!(status, 409);
    srv.shutdown();
}

#[test]
fn replay_posts_one_second_batches() {
    let (_dir, store, srv) = server();
    let client = Client::new();
    let s = stream("p7", 1000);
    let summary = synth::replay_stream(&client, &srv.url(), &s, 0).unwrap();
    assert_eq!((summary.batches, summary.accepted, summary.duplicates), (10, 1000, 0));
    assert_eq!(store.load_stream("p7").unwrap().samples, s.samples);

    let again = synth::replay_stream(&client, &srv.url(), &s, 0).unwrap();
    assert_eq!((again.batches, again.accepted, again.duplicates), (10, 0, 10));
    assert_eq!(store.load_stream("p7").unwrap().samples, s.samples);
}

#[test]
fn resume_after_partial_replay() {
    let (_dir, store, srv) = server();
    let client = Client::new();
    let s = stream("p3", 1000);
    let head = TelemetryStream::new("p3", s.samples[..400].to_vec());
    synth::replay_stream(&client, &srv.url(), &head, 0).unwrap();
    let rest = synth::replay_stream(&client, &srv.url(), &s, 4).unwrap();
    assert_eq!((rest.batches, rest.accepted), (6, 600));
    assert_eq!(store.load_stream("p3").unwrap().samples, s.samples);
}

#[test]
fn unreachable_server_is_a_transport_error() {
    let (_dir, _store, srv) = server();
    let url = srv.url();
    srv.shutdown();
    let err = synth::replay_stream(&Client::new(), &url, &stream("p1", 300), 0).unwrap_err();
    match err {
        ReplayError::Transport {
            resume_seq, accepted, ..
        } => assert_eq!((resume_seq, accepted), (0, 0)),
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn store_survives_restart() {
    let dir = tempfile::tempdir().unwrap();
    let s = stream("p9", 500);
    {
        let store = Arc::new(StreamStore::open(dir.path()).unwrap());
        let srv = ingest::spawn_server(store, SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
        synth::replay_stream(&Client::new(), &srv.url(), &s, 0).unwrap();
        srv.shutdown();
    }
    let store = Arc::new(StreamStore::open(dir.path()).unwrap());
    assert_eq!(store.load_stream("p9").unwrap().samples, s.samples);
    let srv = ingest::spawn_server(store, SocketAddr::from(([127, 0, 0, 1], 0))).unwrap();
    let again = synth::replay_stream(&Client::new(), &srv.url(), &s, 0).unwrap();
    assert_eq!((again.accepted, again.duplicates), (0, 5));
}
