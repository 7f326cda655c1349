use proptest::prelude::*;
use smartchair::gamelog::{self, EventKind, GameEvent, PlayerMeta, SegmentParams};
use smartchair::ingest::{SensorSample, TelemetryStream};

fn shot_times() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..6.0, 0..60).prop_map(|gaps| {
        gaps.iter()
            .scan(0.0, |t, g| {
                *t += g;
                Some(*t)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn shootouts_are_maximal_runs(shots in shot_times()) {
        let found = gamelog::detect_shootouts(&shots, 3, 3.0);
        for s in &found {
            let inside: Vec<f64> = shots.iter().copied().filter(|&t| t >= s.start && t <= s.end).collect();
            prop_assert_eq!(inside.len(), s.shot_count);
            prop_assert!(s.shot_count >= 3);
            prop_assert!(inside.windows(2).all(|w| w[1] - w[0] < 3.0));
            if let Some(prev) = shots.iter().rev().find(|&&t| t < s.start) {
                prop_assert!(s.start - prev >= 3.0);
            }
            if let Some(next) = shots.iter().find(|&&t| t > s.end) {
                prop_assert!(next - s.end >= 3.0);
            }
        }
        for pair in found.windows(2) {
            prop_assert!(pair[1].start - pair[0].end >= 3.0);
        }
    }

    #[test]
    fn kdr_is_bounded(kills in 0usize..30, deaths in 0usize..30) {
        let events: Vec<GameEvent> = (0..kills)
            .map(|i| GameEvent { t: i as f64, kind: EventKind::Kill })
            .chain((0..deaths).map(|i| GameEvent { t: i as f64 + 0.5, kind: EventKind::Death }))
            .collect();
        let kdr = gamelog::session_kdr(&events);
        prop_assert!((0.0..=gamelog::KDR_BOUND).contains(&kdr));
    }

    #[test]
    fn sessions_tile_the_stream(seconds in 1usize..2000, n_shots in 0usize..80) {
        let samples: Vec<SensorSample> = (0..seconds * 10)
            .map(|i| SensorSample { t: i as f64 * 0.1, acc: [0.0, 0.0, 9.81], gyro: [0.0; 3], mag: [0.0; 3] })
            .collect();
        let mut stream = TelemetryStream::new("p", samples);
        stream.nominal_rate = 10.0;
        let events: Vec<GameEvent> = (0..n_shots)
            .map(|i| GameEvent { t: i as f64 * 25.0, kind: EventKind::Shot })
            .collect();
        let shootouts = gamelog::shootouts_from_events(&events);
        let meta = PlayerMeta { player_id: "p".into(), exp_gt_1000h: true, age: 30.0, gender: 0 };
        let sessions = gamelog::segment_sessions(&stream, &events, &shootouts, &meta, &SegmentParams::default());
        prop_assert!(sessions.len() <= gamelog::MAX_SESSIONS);
        prop_assert_eq!(sessions.len(), (seconds / 180).min(10));
        for (i, s) in sessions.iter().enumerate() {
            prop_assert_eq!(s.index, i);
            prop_assert_eq!(s.start, i as f64 * 180.0);
            prop_assert!(s.samples.iter().all(|x| x.t >= s.start && x.t < s.end()));
            prop_assert!(s.events.iter().all(|e| e.t >= s.start && e.t < s.end()));
        }
        for pair in sessions.windows(2) {
            prop_assert!(pair[0].end() <= pair[1].start);
        }
    }
}
