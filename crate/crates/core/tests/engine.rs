use proptest::prelude::*;
use sgd_compress::engine::{
    checkpoint_from_bytes, checkpoint_to_bytes, injectivity_sweep, measure_local_progress,
    preimages, reverse_epoch, reverse_step, run, run_epoch, traces_to_csv, EngineError,
    EpochPermutation, RunConfig,
};
use sgd_compress::model::{generate_dataset, Dataset, Family, GeneratorSpec, Model, ModelKind};
use sgd_compress::numerics::{FixedScalar, FixedVector, Grid};
use sgd_compress::Rational;

const LOGISTIC: ModelKind = ModelKind::Logistic { bias: false };

fn config(family: Family, n: usize, p: usize, b: usize, alpha_raw: i64, scale: u32) -> RunConfig {
    RunConfig {
        data: GeneratorSpec {
            family,
            n,
            p,
            seed: 5,
        },
        kind: LOGISTIC,
        batch: b,
        alpha: FixedScalar::from_raw(alpha_raw),
        epsilon: Rational::new(1, 100),
        beta_prime: Rational::new(1, 2),
        seed: 9,
        max_epochs: 6,
        grid: Grid::new(scale, 64).unwrap(),
    }
}

fn setup(cfg: &RunConfig) -> (Dataset, Model) {
    let data = generate_dataset(&cfg.data, cfg.grid).unwrap();
    let init = Model::initial(cfg.kind, cfg.data.p, cfg.grid, cfg.seed);
    (data, init)
}

fn gaussians() -> Family {
    Family::TwoGaussians {
        sigma: 0.6,
        margin: 0.3,
    }
}

/// Accuracy on a subset, straight from a checkpoint.
fn acc_of(model: &Model, data: &Dataset, w: &FixedVector, ids: &[u32]) -> Option<Rational> {
    if ids.is_empty() {
        return None;
    }
    let m = model.with_weights(w.clone()).unwrap();
    Some(m.accuracy(data.select(ids).unwrap()).unwrap())
}

#[test]
fn zero_step_size_leaves_weights_alone() {
    let cfg = config(gaussians(), 32, 2, 4, 0, 16);
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init.clone()).unwrap();
    assert_eq!(res.traces.len(), cfg.max_epochs);
    for t in &res.traces {
        assert!(t.checkpoints.iter().all(|w| w == init.weights()));
        assert_eq!(measure_local_progress(t).unwrap(), Rational::from_integer(0));
    }
}

#[test]
fn one_batch_epochs_have_two_checkpoints() {
    let mut cfg = config(gaussians(), 16, 2, 16, 1 << 12, 16);
    cfg.max_epochs = 2;
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init).unwrap();
    let t = &res.traces[0];
    assert_eq!(t.checkpoints.len(), 2);
    assert!(t.stat(1).lambda_prime.is_none());
    assert_eq!(t.stat(1).lambda_doubleprime, Some(t.stat(1).lambda));
    assert!(t.stat(2).lambda_doubleprime.is_none());
    assert_eq!(t.stat(2).lambda_prime, Some(t.stat(2).lambda));
}

#[test]
fn separable_run_terminates_accurately() {
    let mut cfg = config(Family::Separable { margin: 0.2 }, 64, 2, 8, 1 << 16, 16);
    cfg.max_epochs = 50;
    let (data, init) = setup(&cfg);
    let bound = cfg.validate(&data).unwrap();
    assert!(bound.analytic && bound.alpha_l < 1.0);
    let res = run(&cfg, &data, init).unwrap();
    assert!(res.terminated);
    let acc = res.final_model.accuracy(data.elements()).unwrap();
    assert!(acc >= Rational::from_integer(1) - cfg.epsilon);
    let last = res.traces.last().unwrap();
    if let Some(j) = last.terminated_at {
        assert!(last.stat(j).lambda >= Rational::from_integer(1) - cfg.epsilon);
        assert_eq!(last.checkpoints.len(), j);
    }
}

#[test]
fn runs_are_deterministic() {
    let cfg = config(gaussians(), 64, 3, 8, 1 << 13, 16);
    let (data, init) = setup(&cfg);
    let a = run(&cfg, &data, init.clone()).unwrap();
    let b = run(&cfg, &data, init).unwrap();
    assert_eq!(a.traces, b.traces);
    assert_eq!(a.final_model, b.final_model);
    assert_eq!(traces_to_csv(&a.traces), traces_to_csv(&b.traces));
}

/// Every statistic recomputed from the stored checkpoint by evaluating the
/// model on the relevant id sets.
#[test]
fn statistics_match_direct_evaluation() {
    let cfg = config(gaussians(), 32, 2, 4, 1 << 13, 16);
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init.clone()).unwrap();
    for t in res.completed() {
        let m = t.steps();
        let all: Vec<u32> = (0..t.n as u32).collect();
        for j in 1..=m + 1 {
            let w = t.checkpoint(j);
            let seen = &t.permutation.order[..(j - 1) * t.b];
            let unseen = &t.permutation.order[(j - 1) * t.b..];
            let s = t.stat(j);
            assert_eq!(Some(s.lambda), acc_of(&init, &data, w, &all));
            assert_eq!(s.lambda_prime, acc_of(&init, &data, w, seen));
            assert_eq!(s.lambda_doubleprime, acc_of(&init, &data, w, unseen));
            if j >= 2 {
                assert_eq!(s.phi, acc_of(&init, &data, w, t.batch(j - 1)));
            }
            if j <= m {
                assert_eq!(s.batch_acc_before, acc_of(&init, &data, w, t.batch(j)));
                let next = init
                    .with_weights(w.clone())
                    .unwrap()
                    .step(&data.select(t.batch(j)).unwrap(), cfg.alpha)
                    .unwrap();
                assert_eq!(next.weights(), t.checkpoint(j + 1));
            }
        }
    }
}

/// `β̂` recomputed in floating point from the per-id correctness bitmaps.
#[test]
fn local_progress_matches_float_oracle() {
    let cfg = config(gaussians(), 64, 2, 8, 1 << 14, 16);
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init).unwrap();
    let mut seen = 0;
    for t in res.completed() {
        let mut sum = 0.0;
        for j in 1..=t.steps() {
            let batch = t.batch(j);
            let before = batch.iter().filter(|&&id| t.correct_at(j)[id as usize]).count();
            let after = batch.iter().filter(|&&id| t.correct_at(j + 1)[id as usize]).count();
            sum += (after as f64 - before as f64) / t.b as f64;
        }
        let oracle = sum * t.b as f64 / t.n as f64;
        let beta = measure_local_progress(t).unwrap();
        let got = *beta.numer() as f64 / *beta.denom() as f64;
        assert!((got - oracle).abs() < 1e-12);
        seen += 1;
    }
    assert!(seen > 0);
}

#[test]
fn terminated_epoch_has_no_local_progress() {
    let mut cfg = config(Family::Separable { margin: 0.2 }, 64, 2, 8, 1 << 16, 16);
    cfg.max_epochs = 50;
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init).unwrap();
    let last = res.traces.last().unwrap();
    if last.terminated_at.is_some() {
        assert!(matches!(measure_local_progress(last), Err(EngineError::Incomplete(_))));
    }
}

#[test]
fn permutation_regenerates_from_its_words() {
    for n in [1usize, 2, 32, 257] {
        let p = EpochPermutation::draw(77, 3, n);
        assert!(p.is_valid_for(n));
        assert_eq!(p.source_bits(), 64 * p.source_words.len());
        let q = EpochPermutation::regenerate(3, n, &p.source_words).unwrap();
        assert_eq!(p, q);
        if !p.source_words.is_empty() {
            let short = &p.source_words[..p.source_words.len() - 1];
            assert!(EpochPermutation::regenerate(3, n, short).is_err());
            let mut long = p.source_words.clone();
            long.push(0);
            assert!(EpochPermutation::regenerate(3, n, &long).is_err());
        }
    }
    assert_ne!(
        EpochPermutation::draw(77, 1, 64).order,
        EpochPermutation::draw(77, 2, 64).order
    );
}

#[test]
fn bad_shapes_are_rejected() {
    let cfg = config(gaussians(), 30, 2, 4, 1, 16);
    assert!(matches!(cfg.check_shape(), Err(EngineError::Config(_))));
    let mut cfg = config(gaussians(), 32, 2, 4, 1, 16);
    cfg.batch = 1;
    assert!(cfg.check_shape().is_err());
    let mut cfg = config(gaussians(), 32, 2, 4, 1, 16);
    cfg.epsilon = Rational::new(3, 2);
    assert!(cfg.check_shape().is_err());
    // α = 64 is far beyond 1/L.
    let cfg = config(gaussians(), 32, 2, 4, 64 << 16, 16);
    let (data, _) = setup(&cfg);
    assert!(matches!(cfg.validate(&data), Err(EngineError::Config(_))));
    let (data, init) = setup(&config(gaussians(), 32, 2, 4, 1, 16));
    let bogus = EpochPermutation {
        epoch: 1,
        order: vec![0; 32],
        source_words: vec![],
    };
    assert!(run_epoch(&init, &data, &bogus, &config(gaussians(), 32, 2, 4, 1, 16)).is_err());
}

#[test]
fn leaving_the_grid_reports_the_step() {
    // With the clip radius at 1, unit steps push the weights off the grid.
    let mut cfg = config(Family::RandomLabels, 16, 2, 2, 1 << 6, 6);
    cfg.grid = Grid::new(6, 1).unwrap();
    cfg.epsilon = Rational::from_integer(0);
    cfg.max_epochs = 100;
    let (data, init) = setup(&cfg);
    match run(&cfg, &data, init) {
        Err(EngineError::Step { epoch, j, .. }) => {
            assert!(epoch >= 1 && (1..=8).contains(&j));
        }
        other => panic!("expected a step error, got {other:?}"),
    }
}

#[test]
fn csv_has_one_row_per_checkpoint() {
    let cfg = config(gaussians(), 32, 2, 4, 1 << 13, 16);
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init).unwrap();
    let csv = traces_to_csv(&res.traces);
    let rows: usize = res.traces.iter().map(|t| t.stats.len()).sum();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "epoch,j,lambda,lambda_prime,lambda_doubleprime,phi,batch_acc_before,terminated"
    );
    assert_eq!(lines.count(), rows);
    let first = csv.lines().nth(1).unwrap();
    let fields: Vec<&str> = first.split(',').collect();
    assert_eq!(fields.len(), 8);
    assert_eq!(fields[0], "1");
    assert_eq!(fields[1], "1");
    assert_eq!(fields[3], "");
}

#[test]
fn checkpoints_round_trip_through_files() {
    let cfg = config(gaussians(), 32, 2, 4, 1 << 13, 16);
    let (data, init) = setup(&cfg);
    let res = run(&cfg, &data, init).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.bin");
    let w = res.final_model.weights();
    std::fs::write(&path, checkpoint_to_bytes(w, 16)).unwrap();
    let (back, s) = checkpoint_from_bytes(&std::fs::read(&path).unwrap()).unwrap();
    assert_eq!((&back, s), (w, 16));
}

/// One-dimensional setup at `s = 6` where reverse search is cheap.
fn tiny(alpha_raw: i64) -> (RunConfig, Dataset, Model) {
    let mut cfg = config(
        Family::TwoGaussians {
            sigma: 0.5,
            margin: 0.5,
        },
        32,
        1,
        4,
        alpha_raw,
        6,
    );
    cfg.max_epochs = 4;
    let (data, init) = setup(&cfg);
    (cfg, data, init)
}

/// The true predecessor is always among the preimages the search returns.
#[test]
fn reverse_search_contains_the_predecessor() {
    for alpha_raw in [1, 4, 16, 64] {
        let (cfg, data, init) = tiny(alpha_raw);
        let res = run(&cfg, &data, init.clone()).unwrap();
        for t in res.completed() {
            for j in 1..=t.steps() {
                let batch = data.select(t.batch(j)).unwrap();
                let found = preimages(&init, t.checkpoint(j + 1), &batch, cfg.alpha).unwrap();
                assert!(found.contains(t.checkpoint(j)), "alpha raw {alpha_raw}, step {j}");
                for w in &found {
                    let m = init.with_weights(w.clone()).unwrap();
                    assert_eq!(m.step(&batch, cfg.alpha).unwrap().weights(), t.checkpoint(j + 1));
                }
            }
        }
    }
}

#[test]
fn zero_step_is_reversed_exactly() {
    let (cfg, data, init) = tiny(0);
    let res = run(&cfg, &data, init.clone()).unwrap();
    let t = &res.traces[0];
    let batches: Vec<Vec<u32>> = (1..=t.steps()).map(|j| t.batch(j).to_vec()).collect();
    let back = reverse_epoch(&init, &data, t.final_checkpoint(), &batches, cfg.alpha).unwrap();
    assert!(back.iter().all(|w| w == init.weights()));
}

#[test]
fn small_steps_reverse_a_whole_epoch() {
    let (cfg, data, init) = tiny(1);
    let res = run(&cfg, &data, init.clone()).unwrap();
    let mut reversed = 0;
    for t in res.completed() {
        let batches: Vec<Vec<u32>> = (1..=t.steps()).map(|j| t.batch(j).to_vec()).collect();
        match reverse_epoch(&init, &data, t.final_checkpoint(), &batches, cfg.alpha) {
            Ok(back) => {
                let mut expect: Vec<FixedVector> = t.checkpoints[..t.steps()].to_vec();
                expect.reverse();
                assert_eq!(back, expect);
                reversed += 1;
            }
            Err(EngineError::Reverse { source, .. }) => {
                assert!(matches!(*source, EngineError::MultiplePreimages { .. }))
            }
            Err(e) => panic!("{e}"),
        }
    }
    assert!(reversed > 0);
}

/// Exhaustive d = 1 sweep against per-image preimage searches.
#[test]
fn sweep_agrees_with_preimage_search() {
    let (cfg, data, init) = tiny(16);
    let batch = data.select(&[0, 5, 9, 30]).unwrap();
    let report = injectivity_sweep(&init, &batch, cfg.alpha, -300, 300).unwrap();
    assert_eq!(report.points + report.saturated, 601);
    assert!(report.points - report.distinct_images >= report.colliding_images);
    for group in &report.examples {
        let m = init.with_weights(group[0].clone()).unwrap();
        let image = m.step(&batch, cfg.alpha).unwrap();
        let found = preimages(&init, image.weights(), &batch, cfg.alpha).unwrap();
        for w in group {
            assert!(found.contains(w));
        }
        assert!(matches!(
            reverse_step(&init, image.weights(), &batch, cfg.alpha),
            Err(EngineError::MultiplePreimages { .. })
        ));
    }
    // In one dimension a collision needs neighbours whose updates differ by
    // exactly one grid step.
    if !report.injective() {
        assert!(report.max_neighbour_update_change >= 1);
        for group in &report.examples {
            let raw: Vec<i64> = group.iter().map(|w| w.get(0).raw()).collect();
            assert!(raw.windows(2).all(|p| p[1] == p[0] + 1));
        }
    }
}

#[test]
fn two_dimensional_sweep_is_consistent() {
    let mut cfg = config(gaussians(), 16, 2, 4, 4, 6);
    cfg.max_epochs = 1;
    let (data, init) = setup(&cfg);
    let batch = data.select(&[1, 2, 3, 4]).unwrap();
    let report = injectivity_sweep(&init, &batch, cfg.alpha, -40, 40).unwrap();
    assert_eq!(report.points + report.saturated, 81 * 81);
    assert!(report.distinct_images <= report.points);
    for group in &report.examples {
        assert!(group.len() >= 2);
        let m = init.with_weights(group[0].clone()).unwrap();
        let image = m.step(&batch, cfg.alpha).unwrap();
        for w in &group[1..] {
            let other = init.with_weights(w.clone()).unwrap();
            assert_eq!(other.step(&batch, cfg.alpha).unwrap(), image);
        }
    }
}

#[test]
fn large_searches_are_refused() {
    let mut cfg = config(gaussians(), 16, 4, 4, 1 << 10, 16);
    cfg.kind = ModelKind::Hidden { width: 3 };
    let (data, init) = setup(&cfg);
    let batch = data.select(&[0, 1, 2, 3]).unwrap();
    assert!(matches!(
        preimages(&init, init.weights(), &batch, cfg.alpha),
        Err(EngineError::Infeasible(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// `λ·n = λ′·|seen| + λ″·|unseen|` at every interior checkpoint.
    #[test]
    fn accuracy_splits_over_seen_and_unseen(seed in 0u64..1000, b in prop::sample::select(vec![2usize, 4, 8])) {
        let mut cfg = config(gaussians(), 32, 2, b, 1 << 13, 16);
        cfg.seed = seed;
        cfg.max_epochs = 2;
        let (data, init) = setup(&cfg);
        let res = run(&cfg, &data, init).unwrap();
        for t in &res.traces {
            for s in &t.stats {
                if let (Some(l1), Some(l2)) = (s.lambda_prime, s.lambda_doubleprime) {
                    let seen = ((s.j - 1) * b) as i64;
                    let total = s.lambda * 32;
                    prop_assert_eq!(total, l1 * seen + l2 * (32 - seen));
                }
            }
            prop_assert!(t.checkpoints.len() <= t.steps() + 1);
            prop_assert_eq!(t.checkpoints.len(), t.correct.len());
        }
    }
}
