//! Starts the ingestion server on an ephemeral port, replays one synthetic
//! player over HTTP twice and reads the stream back from the store.

use std::net::SocketAddr;
use std::sync::Arc;

use smartchair::ingest::{self, StreamStore};
use smartchair::synth::{self, CohortConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("smartchair-ingest-{}", std::process::id()));
    let store = Arc::new(StreamStore::open(&dir)?);
    let server = ingest::spawn_server(store.clone(), SocketAddr::from(([127, 0, 0, 1], 0)))?;
    println!("listening on {}", server.url());

    let config = CohortConfig {
        duration: 180.0,
        durations: Vec::new(),
        ..CohortConfig::default()
    };
    let player = synth::generate_player(&config, 0)?;
    let client = reqwest::blocking::Client::new();
    let first = synth::replay_stream(&client, &server.url(), &player.stream, 0)?;
    let second = synth::replay_stream(&client, &server.url(), &player.stream, 0)?;
    println!("first replay:  {first:?}");
    println!("second replay: {second:?}");

    let loaded = store.load_stream(&player.meta.player_id)?;
    println!(
        "{}: {} samples stored, identical to source: {}",
        loaded.player_id,
        loaded.samples.len(),
        loaded.samples == player.stream.samples
    );
    server.shutdown();
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
