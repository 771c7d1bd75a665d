use proptest::prelude::*;
use terrain_energy::telemetry::{
    read_segments_csv, segment_trajectory, segment_trajectory_with, write_segments_csv,
    SegmentOptions, TelemetryLog, TelemetrySample,
};

/// A wandering log: per-step heading, speed and power drawn from `steps`.
fn wander(steps: &[(f64, f64, f64)], gap_at: Option<usize>) -> TelemetryLog {
    let mut t = 0.0;
    let (mut x, mut y) = (0.0, 0.0);
    let mut samples = Vec::with_capacity(steps.len() + 1);
    samples.push(TelemetrySample {
        t,
        x,
        y,
        z: 0.0,
        voltage: 28.8,
        current: 1.0,
    });
    for (k, &(heading, speed, power)) in steps.iter().enumerate() {
        t += if gap_at == Some(k) { 2.0 } else { 0.1 };
        x += heading.sin() * speed * 0.1;
        y += heading.cos() * speed * 0.1;
        samples.push(TelemetrySample {
            t,
            x,
            y,
            z: 0.01 * x,
            voltage: 28.8,
            current: power / 28.8,
        });
    }
    TelemetryLog::new(samples).unwrap()
}

fn steps() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    prop::collection::vec((0.0f64..0.6, 0.0f64..1.5, 0.0f64..200.0), 20..300)
}

proptest! {
    #[test]
    fn energy_is_additive_over_interior_points(s in steps(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let log = wander(&s, None);
        let (lo, hi) = log.time_span().unwrap();
        let mut ts = [lo + a * (hi - lo), lo + b * (hi - lo), lo + c * (hi - lo)];
        ts.sort_by(f64::total_cmp);
        prop_assume!(ts[0] < ts[1] && ts[1] < ts[2]);
        let whole = log.integrate_energy(ts[0], ts[2]).unwrap();
        let parts = log.integrate_energy(ts[0], ts[1]).unwrap() + log.integrate_energy(ts[1], ts[2]).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-9 * whole.abs().max(1e-12));
    }

    #[test]
    fn energy_is_non_negative(s in steps(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let log = wander(&s, None);
        let (lo, hi) = log.time_span().unwrap();
        let (t0, t1) = (lo + a.min(b) * (hi - lo), lo + a.max(b) * (hi - lo));
        prop_assume!(t0 < t1);
        prop_assert!(log.integrate_energy(t0, t1).unwrap() >= 0.0);
    }

    #[test]
    fn segments_are_unit_chords_and_partition_time(s in steps(), gap in prop::option::of(0usize..20)) {
        let log = wander(&s, gap);
        let segs = segment_trajectory_with(&log, &SegmentOptions::default()).unwrap();
        let total: f64 = segs.iter().map(|g| g.segment.length_h).sum();
        prop_assert!(total <= log.horizontal_length() + 1e-9);
        for g in &segs {
            prop_assert!((g.segment.length_h - 1.0).abs() <= 1e-9);
            prop_assert!(g.t_start < g.t_end);
        }
        for w in segs.windows(2) {
            prop_assert!(w[1].t_start >= w[0].t_end);
            // contiguous unless a gap restarted the chord in between
            let restarted = gap.map(|k| {
                let tg = log.samples()[k + 1].t;
                w[0].t_end <= tg && tg <= w[1].t_start
            });
            if restarted != Some(true) {
                prop_assert_eq!(w[1].t_start, w[0].t_end);
            }
        }
    }

    #[test]
    fn segment_energy_matches_integral(s in steps()) {
        let log = wander(&s, None);
        for g in segment_trajectory_with(&log, &SegmentOptions::default()).unwrap() {
            let e = log.integrate_energy(g.t_start, g.t_end).unwrap();
            prop_assert_eq!(g.segment.energy_j, e);
        }
    }
}

#[test]
fn log_csv_round_trip() {
    let log = wander(&[(0.3, 1.0, 50.0); 40], None);
    let mut buf = Vec::new();
    log.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("t_s,x_m,y_m,z_m,voltage_v,current_a"));
    let back = TelemetryLog::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.samples(), log.samples());
}

#[test]
fn segment_csv_round_trip() {
    let log = wander(&[(1.2, 1.0, 80.0); 60], None);
    let segs = segment_trajectory(&log, 1.0).unwrap();
    assert!(!segs.is_empty());
    let mut buf = Vec::new();
    write_segments_csv(&segs, &mut buf).unwrap();
    let back = read_segments_csv(buf.as_slice()).unwrap();
    assert_eq!(back.len(), segs.len());
    for (a, b) in back.iter().zip(&segs) {
        assert_eq!(a.p, b.p);
        assert_eq!(a.q, b.q);
        assert_eq!(a.energy_j, b.energy_j);
    }
}

#[test]
fn malformed_csv_is_rejected() {
    let text = "t_s,x_m,y_m,z_m,voltage_v,current_a\n0,0,0,0,28.8,1\n0.1,0,0,0,abc,1\n";
    assert!(TelemetryLog::read_csv(text.as_bytes()).is_err());
    let shuffled = "x_m,t_s,y_m,z_m,voltage_v,current_a\n0,0,0,0,28.8,1\n";
    assert!(TelemetryLog::read_csv(shuffled.as_bytes()).is_err());
}
