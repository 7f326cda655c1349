//! Generates the default 19-player cohort and writes telemetry, event logs
//! and player metadata to a directory (first argument, default
//! `out/cohort`).

use smartchair::gamelog::SegmentParams;
use smartchair::synth::{self, CohortConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "out/cohort".into());
    let cohort = synth::generate_cohort(&CohortConfig::default())?;
    for p in &cohort.players {
        println!(
            "{}  high skill {:<5}  {:>6} samples  {:>4} events  {:>3} sessions",
            p.meta.player_id,
            p.meta.exp_gt_1000h,
            p.stream.samples.len(),
            p.events.len(),
            p.sessions(&SegmentParams::default()).len()
        );
    }
    synth::write_cohort(&cohort, dir.as_ref())?;
    println!("wrote {dir}");
    Ok(())
}
