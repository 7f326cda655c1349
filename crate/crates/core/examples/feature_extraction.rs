//! Extracts the 31 behavioral features from one high-skill and one
//! low-skill synthetic session.

use smartchair::features::{self, FeatureParams};
use smartchair::gamelog::SegmentParams;
use smartchair::synth::{self, CohortConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let config = CohortConfig {
        duration: 180.0,
        durations: Vec::new(),
        ..CohortConfig::default()
    };
    let params = FeatureParams::default();
    let high = synth::generate_player(&config, 0)?;
    let low = synth::generate_player(&config, config.n_high)?;
    let a = features::extract_features(&high.sessions(&SegmentParams::default())[0], &params)?;
    let b = features::extract_features(&low.sessions(&SegmentParams::default())[0], &params)?;

    println!(
        "{:<28} {:>10} {:>10}",
        "feature", high.meta.player_id, low.meta.player_id
    );
    for (name, (x, y)) in features::feature_names().iter().zip(a.values.iter().zip(&b.values)) {
        println!("{name:<28} {x:>10.4} {y:>10.4}");
    }
    println!("imputed: {:?} / {:?}", a.meta.imputed, b.meta.imputed);
    Ok(())
}
