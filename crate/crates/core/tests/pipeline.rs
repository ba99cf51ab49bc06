use entropy_conformal::data::{generate_synthetic, SynthSpec, TrainConfig};
use entropy_conformal::metrics::{run_trials, Method, TrialConfig};
use entropy_conformal::temperature::{run_pipeline_with_training, PipelineConfig};
use entropy_conformal::{RandomSource, ScoreSpec, TemperatureGrid};

fn config(seed: u64) -> TrialConfig {
    TrialConfig {
        dataset: "synthetic".into(),
        trials: 3,
        alphas: vec![0.05, 0.1],
        methods: vec![
            Method::EntropyReweighted { base: ScoreSpec::aps() },
            Method::Baseline(ScoreSpec::aps()),
            Method::Baseline(ScoreSpec::thr()),
        ],
        fractions: (0.5, 0.25, 0.25),
        grid: TemperatureGrid::log_spaced(0.1, 10.0, 11).unwrap(),
        seed,
    }
}

#[test]
fn run_trials_cardinality_order_and_determinism() {
    let mut spec = SynthSpec::new(5, 1600, 12);
    spec.overconfidence = 2.0;
    let pool = generate_synthetic(&spec).unwrap().table.labeled();
    let a = run_trials(&pool, &config(1)).unwrap();
    assert_eq!(a.rows.len(), 3 * 2 * 3);
    assert_eq!(a.sweeps.len(), 3 * 2);
    let keys: Vec<(String, f64, usize)> = a.rows.iter().map(|r| (r.score.clone(), r.alpha, r.trial)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2)));
    assert_eq!(keys, sorted);
    for r in &a.rows {
        assert!((0.0..=1.0).contains(&r.coverage));
        assert!((0.0..=5.0).contains(&r.avg_size));
        assert_eq!(r.t_star.is_some(), r.score == "er");
    }

    let b = run_trials(&pool, &config(1)).unwrap();
    let c = run_trials(&pool, &config(2)).unwrap();
    let cov = |o: &entropy_conformal::metrics::TrialOutput| o.rows.iter().map(|r| r.coverage).collect::<Vec<_>>();
    assert_eq!(cov(&a), cov(&b));
    assert_ne!(cov(&a), cov(&c));
}

#[test]
fn baseline_coverage_holds_across_trials() {
    let pool = generate_synthetic(&SynthSpec::new(6, 4000, 13)).unwrap().table.labeled();
    let mut cfg = config(3);
    cfg.trials = 20;
    let out = run_trials(&pool, &cfg).unwrap();
    for alpha in [0.05, 0.1] {
        for score in ["aps", "thr", "er"] {
            let cov: Vec<f64> = out
                .rows
                .iter()
                .filter(|r| r.score == score && r.alpha == alpha)
                .map(|r| r.coverage)
                .collect();
            let mean = cov.iter().sum::<f64>() / cov.len() as f64;
            assert!(mean >= 1.0 - alpha - 0.015, "{score} at {alpha}: {mean}");
        }
    }
}

#[test]
fn training_pipeline_end_to_end() {
    let data = generate_synthetic(&SynthSpec::new(3, 1500, 14)).unwrap();
    let (labeled_x, unlabeled_x) = data.features.split_at(1200);
    let labels = &data.labels[..1200];
    let mut cfg = PipelineConfig::new(0.1);
    cfg.grid = TemperatureGrid::log_spaced(0.2, 5.0, 7).unwrap();
    let train = TrainConfig { epochs: 100, learning_rate: 0.5 };
    let rng = RandomSource::new(4);
    let out = run_pipeline_with_training(labeled_x, labels, unlabeled_x, 3, &train, &cfg, &rng).unwrap();
    assert_eq!(out.split.sizes(), (600, 300, 300));
    assert_eq!(out.sets.len(), 300);
    assert!(cfg.grid.values().contains(&out.sweep.t_star));
    let covered = out
        .sets
        .iter()
        .zip(&data.labels[1200..])
        .filter(|(s, y)| s.contains(**y))
        .count() as f64
        / 300.0;
    assert!(covered > 0.82, "holdout coverage {covered}");
    let again = run_pipeline_with_training(labeled_x, labels, unlabeled_x, 3, &train, &cfg, &rng).unwrap();
    assert_eq!(out.sets, again.sets);
}
