use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use terrain_energy::geom::Point2;
use terrain_energy::learned::{
    fine_tune, mean_shift_calibrate, sidecar_path, train, Dataset, ModelConfig, Network,
    PatchRegressor, TrainConfig, TrainMode,
};
use terrain_energy::patch::{extract_patch, HeightPatch};
use terrain_energy::terrain::Heightmap;

/// Ramps of varying grade with a bump; the target is a smooth function of
/// the two.
fn toy_data(count: usize, n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut patches = Vec::new();
    let mut targets = Vec::new();
    for _ in 0..count {
        let grade = rng.random_range(0.0..0.08);
        let bump = rng.random_range(0.0..0.03);
        let values = (0..n * n)
            .map(|k| {
                let (i, j) = ((k / n) as f64, (k % n) as f64);
                let w = (n as f64 - 1.0 - i) / (n as f64 - 1.0);
                grade * w + bump * (j * 0.9).sin().abs()
            })
            .collect();
        patches.push(HeightPatch::from_values(n, 1.0, values).unwrap());
        targets.push(1.0 + 20.0 * grade + 15.0 * bump);
    }
    Dataset::new(patches, targets).unwrap()
}

fn central_differences(net: &Network<f64>, x: &[Vec<f64>], y: &[f64], h: f64) -> Vec<f64> {
    (0..net.param_count())
        .map(|k| {
            let mut plus = net.params().to_vec();
            let mut minus = plus.clone();
            plus[k] += h;
            minus[k] -= h;
            let lp = Network::from_params(net.config(), plus).unwrap().loss(x, y);
            let lm = Network::from_params(net.config(), minus)
                .unwrap()
                .loss(x, y);
            (lp - lm) / (2.0 * h)
        })
        .collect()
}

fn relative_distance(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    diff / norm(a).max(norm(b)).max(1e-12)
}

#[test]
fn analytic_gradients_match_finite_differences() {
    let cfg = ModelConfig::tiny();
    let n_in = cfg.input_n * cfg.input_n;
    let (mut accepted, mut draw) = (0, 0u64);
    while accepted < 100 {
        draw += 1;
        let mut rng = ChaCha8Rng::seed_from_u64(draw);
        let base = Network::<f64>::init(&cfg, draw).unwrap();
        let params = base
            .params()
            .iter()
            .map(|p| p + rng.random_range(-0.1..0.1))
            .collect();
        let net = Network::from_params(&cfg, params).unwrap();
        let x: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n_in).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let numeric = central_differences(&net, &x, &y, 1e-4);
        // skip draws whose stencil straddles a ReLU kink
        if relative_distance(&numeric, &central_differences(&net, &x, &y, 5e-5)) > 1e-5 {
            continue;
        }
        accepted += 1;
        let (_, analytic) = net.loss_and_gradient(&x, &y);
        let err = relative_distance(&analytic, &numeric);
        assert!(err <= 1e-4, "draw {draw}: relative error {err:.3e}");
    }
    assert!(draw < 120, "too many kinked draws: {draw}");
}

#[test]
fn gradient_of_loss_matches_reported_loss() {
    let cfg = ModelConfig::tiny();
    let net = Network::<f64>::init(&cfg, 3).unwrap();
    let x = vec![vec![0.5; 64], vec![0.25; 64]];
    let y = vec![0.3, -0.2];
    let (loss, grad) = net.loss_and_gradient(&x, &y);
    assert_eq!(loss, net.loss(&x, &y));
    assert_eq!(grad.len(), net.param_count());
}

#[test]
fn smoothed_training_loss_does_not_increase() {
    let data = toy_data(64, 8, 1);
    let (_, report) = train(&data, &ModelConfig::tiny(), &TrainConfig::new(120, 4)).unwrap();
    let smooth: Vec<f64> = report
        .loss_trace
        .windows(5)
        .map(|w| w.iter().sum::<f64>() / 5.0)
        .collect();
    for (k, w) in smooth.windows(2).enumerate() {
        assert!(
            w[1] <= w[0] * (1.0 + 1e-9),
            "smoothed loss rose at epoch {k}: {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(report.final_loss().unwrap() < report.loss_trace[0]);
}

#[test]
fn overfits_ten_pairs() {
    let data = toy_data(10, 32, 2);
    // one pair per step, so 500 epochs are 5000 updates
    let cfg = TrainConfig {
        batch_size: 1,
        ..TrainConfig::new(500, 5)
    };
    let (_, report) = train(&data, &ModelConfig::default(), &cfg).unwrap();
    let first = report.loss_trace[0];
    let last = report.final_loss().unwrap();
    assert!(last < 0.01 * first, "epoch-1 loss {first}, final {last}");
}

#[test]
fn same_seed_trains_identically() {
    let data = toy_data(40, 8, 3);
    let cfg = TrainConfig::new(6, 11);
    let (a, ra) = train(&data, &ModelConfig::tiny(), &cfg).unwrap();
    let (b, rb) = train(&data, &ModelConfig::tiny(), &cfg).unwrap();
    assert_eq!(a.network().params(), b.network().params());
    assert_eq!(ra.loss_trace, rb.loss_trace);
    let (c, _) = train(&data, &ModelConfig::tiny(), &TrainConfig::new(6, 12)).unwrap();
    assert_ne!(a.network().params(), c.network().params());
}

#[test]
fn save_load_predicts_bit_identically() {
    let data = toy_data(20, 8, 4);
    let cfg = TrainConfig::new(3, 1);
    let (model, report) = train(&data, &ModelConfig::tiny(), &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.bin");
    model.save(&path, Some(&cfg), Some(&report)).unwrap();
    assert!(sidecar_path(&path).exists());
    let back = PatchRegressor::load(&path).unwrap();
    assert_eq!(back.network().params(), model.network().params());
    assert_eq!(back.target_scaling(), model.target_scaling());
    for p in data.patches() {
        assert_eq!(
            back.predict(p).unwrap().to_bits(),
            model.predict(p).unwrap().to_bits()
        );
    }
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sidecar_path(&path)).unwrap()).unwrap();
    assert_eq!(sidecar["param_count"], model.network().param_count());
}

#[test]
fn head_only_freezes_convolutions() {
    let data = toy_data(20, 8, 6);
    let cfg = TrainConfig {
        mode: TrainMode::HeadOnly,
        ..TrainConfig::new(3, 2)
    };
    let (model, _) = train(&data, &ModelConfig::tiny(), &cfg).unwrap();
    let fresh = PatchRegressor::untrained(&ModelConfig::tiny(), 2).unwrap();
    let hs = fresh.network().head_start();
    assert_eq!(
        &model.network().params()[..hs],
        &fresh.network().params()[..hs]
    );
}

#[test]
fn fine_tuning_moves_every_layer_and_reduces_error() {
    let source = toy_data(60, 8, 7);
    let (model, _) = train(&source, &ModelConfig::tiny(), &TrainConfig::new(150, 3)).unwrap();
    // same shapes, different response
    let shifted = Dataset::new(
        source.patches().to_vec(),
        source.targets().iter().map(|t| 1.5 * t).collect(),
    )
    .unwrap();
    let err = |m: &PatchRegressor| {
        let p = m.predict_many(shifted.patches()).unwrap();
        p.iter()
            .zip(shifted.targets())
            .map(|(a, b)| (a - b).abs() / b)
            .sum::<f64>()
            / p.len() as f64
    };
    let (tuned, _) = fine_tune(&model, &shifted, &TrainConfig::new(60, 1)).unwrap();
    assert!(err(&tuned) < err(&model));
    let hs = model.network().head_start();
    assert_ne!(
        &tuned.network().params()[..hs],
        &model.network().params()[..hs]
    );
}

#[test]
fn default_architecture_has_three_convs_and_a_512_256_head() {
    let net = Network::<f32>::init(&ModelConfig::default(), 0).unwrap();
    // 3x3 kernels: 1→8, 8→16, 16→32 with biases; dense 32→512→256→1
    let conv = (9 * 8 + 8) + (9 * 8 * 16 + 16) + (9 * 16 * 32 + 32);
    let dense = (32 * 512 + 512) + (512 * 256 + 256) + (256 + 1);
    assert_eq!(net.head_start(), conv);
    assert_eq!(net.param_count(), conv + dense);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mean_shift_keeps_ranks(values in prop::collection::hash_set(-1000i32..1000, 1..50), target in -50.0f64..50.0) {
        let preds: Vec<f64> = values.into_iter().map(|v| v as f64 * 0.01).collect();
        let shifted = mean_shift_calibrate(&preds, target).unwrap();
        let rank = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            idx
        };
        prop_assert_eq!(rank(&preds), rank(&shifted));
        let mean = shifted.iter().sum::<f64>() / shifted.len() as f64;
        prop_assert!((mean - target).abs() <= 1e-9 * (1.0 + target.abs()));
    }

    #[test]
    fn predictions_ignore_terrain_altitude(
        x in 2.0f64..6.0,
        y in 2.0f64..6.0,
        heading in 0.0f64..std::f64::consts::TAU,
        lift in (-512i32..512).prop_map(|k| k as f64 * 0.25),
    ) {
        let hm = Heightmap::from_fn(64, 64, 0.125, Point2::default(), |x, y| {
            (0.1 * (1.3 * x).sin() * (0.7 * y).cos()) as f32 as f64
        })
        .unwrap();
        let model = PatchRegressor::untrained(&ModelConfig::tiny(), 9).unwrap();
        let p = Point2::new(x, y);
        let a = model.predict(&extract_patch(&hm, p, heading, 1.0, 8).unwrap()).unwrap();
        let b = model.predict(&extract_patch(&hm.offset(lift), p, heading, 1.0, 8).unwrap()).unwrap();
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }
}
