//! Parses a game event log, finds shootouts and cuts a synthetic stream
//! into 180-second sessions.

use smartchair::gamelog::{self, EventKind, SegmentParams};
use smartchair::synth::{self, CohortConfig};

const LOG: &str = "\
# t,kind
1.0,shot
2.5,shot
4.0,shot
4.2,kill
9.0,shot
11.9,shot
13.0,death
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let events = gamelog::parse_event_log(LOG)?;
    for s in gamelog::shootouts_from_events(&events) {
        println!("shootout {:.1}..{:.1} s, {} shots", s.start, s.end, s.shot_count);
    }
    println!("KDR {:.2}", gamelog::session_kdr(&events));

    let config = CohortConfig {
        duration: 600.0,
        durations: Vec::new(),
        ..CohortConfig::default()
    };
    let player = synth::generate_player(&config, 0)?;
    for s in player.sessions(&SegmentParams::default()) {
        println!(
            "{}  [{:>5.0}, {:>5.0})  samples {:>5}  kills {:>2}  deaths {:>2}  shootouts {:>2}  KDR {:.2}",
            s.id(),
            s.start,
            s.end(),
            s.samples.len(),
            s.count(EventKind::Kill),
            s.count(EventKind::Death),
            s.shootouts.len(),
            s.kdr
        );
    }
    Ok(())
}
