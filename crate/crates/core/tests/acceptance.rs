//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use sgd_compress::codec::{binomial_width, conditional_widths, header_width, perm_width};
use sgd_compress::engine::{injectivity_sweep, preimages, EpochPermutation, EpochTrace};
use sgd_compress::epoch_codec::{
    check_eps_beta_ceiling, decode_epoch, encode_case1, CeilingVerdict, EpochContext, Mode, SideInfo,
};
use sgd_compress::harness::{
    default_checks, run_experiment, run_inequality_suite, run_replication, set_code_sweep,
    verify_hoeffding, ExperimentSpec, FLOAT_TOLERANCE,
};
use sgd_compress::model::{generate_dataset, Dataset, Element, Model, ModelKind};
use sgd_compress::numerics::{FixedScalar, FixedVector, Grid};
use sgd_compress::Rational;

const ROUND_TRIP_BUDGET: Duration = Duration::from_secs(300);
const STRICT_BUDGET: Duration = Duration::from_secs(600);
const MIN_ROUND_TRIP_RUNS: usize = 50;
const INJECTIVITY_BATCHES: u64 = 20;
const SET_CODE_INSTANCES: u64 = 1000;
const STIRLING_TOLERANCE: f64 = 0.1;
const HOEFFDING_TRIALS: u64 = 1_000_000;
/// Perfect split: savings of at least this fraction of n bits.
const SPLIT_SAVINGS_FRACTION: f64 = 0.9;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn spec(text: &str) -> ExperimentSpec {
    ExperimentSpec::from_text(text).expect("acceptance spec")
}

/// Accounting round trips over a grid of sizes, families and seeds.
fn round_trip() -> Outcome {
    let start = Instant::now();
    let families = ["gaussians:0.6:0.3", "separable:0.05", "random"];
    let mut runs = 0;
    let mut epochs = 0;
    let mut failures = Vec::new();
    for n in [32, 64, 256] {
        for b in [4, 8, 16] {
            for seed in 0..6u64 {
                let family = families[(seed % 3) as usize];
                let text = format!(
                    "family={family}\nn={n}\nbatch={b}\np=2\nalpha=1/8\nseed={}\ndata_seed={}\nmax_epochs=3\n",
                    1000 + seed * 7 + n as u64,
                    seed
                );
                // run_replication decodes every epoch and compares it with the
                // recorded permutation.
                match run_replication(&spec(&text), 0) {
                    Ok(rep) => epochs += rep.codes.len(),
                    Err(e) => failures.push(format!("n={n} b={b} seed={seed}: {e}")),
                }
                runs += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && runs >= MIN_ROUND_TRIP_RUNS && epochs > 0 && elapsed < ROUND_TRIP_BUDGET,
        format!("{runs} runs, {epochs} epochs, {} failures, {elapsed:.1?} {}", failures.len(), failures.join("; ")),
    )
}

/// Strict decoding from the data, the end model and the bit streams alone.
fn strict_decode() -> Outcome {
    let start = Instant::now();
    let mut epochs = 0;
    let mut hints = 0;
    let mut failures = Vec::new();
    for seed in 0..8u64 {
        let text = format!(
            "mode=strict\nfamily=gaussians:0.5:0.5\nn=32\nbatch=4\np=1\nscale=6\nclip=8\nalpha=1/16\nseed={}\ndata_seed={}\nmax_epochs=4\n",
            seed + 1,
            seed + 40
        );
        // In strict mode run_replication reverses the whole run from the last
        // checkpoint and checks both the orders and the recovered start.
        match run_replication(&spec(&text), 0) {
            Ok(rep) => {
                epochs += rep.codes.len();
                hints += rep.report.summary.hint_bits;
            }
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures.is_empty() && epochs > 0 && elapsed < STRICT_BUDGET,
        format!("{epochs} epochs over 8 runs, {hints} preimage-index bits, {elapsed:.1?} {}", failures.join("; ")),
    )
}

/// Injectivity of the step map over the whole d = 1, s = 6 grid, checked by
/// counting colliding images and, separately, by reverse search.
fn injectivity() -> Outcome {
    let cfg = spec("family=gaussians:0.5:0.5\nn=32\nbatch=4\np=1\nscale=6\nclip=8\nalpha=1/16\nseed=1\ndata_seed=40\n").run;
    let data = generate_dataset(&cfg.data, cfg.grid).unwrap();
    let bound = cfg.validate(&data).unwrap();
    let model = Model::initial(cfg.kind, 1, cfg.grid, 0);
    let max = cfg.grid.max_raw();
    let (mut colliding, mut multi, mut points, mut worst_jump) = (0u64, 0u64, 0u64, 0i64);
    for k in 0..INJECTIVITY_BATCHES {
        let perm = EpochPermutation::draw(17, k as usize + 1, cfg.n());
        let batch = data.select(perm.batch(cfg.batch, 1)).unwrap();
        let report = injectivity_sweep(&model, &batch, cfg.alpha, -max, max).unwrap();
        colliding += report.colliding_images;
        points += report.points;
        worst_jump = worst_jump.max(report.max_neighbour_update_change);
        let mut images = std::collections::BTreeSet::new();
        for raw in -max..=max {
            let w = model.with_weights(FixedVector::from_raw([raw])).unwrap();
            if let Ok(next) = w.step(&batch, cfg.alpha) {
                images.insert(next.weights().get(0).raw());
            }
        }
        for image in images {
            let found = preimages(&model, &FixedVector::from_raw([image]), &batch, cfg.alpha).unwrap();
            multi += (found.len() != 1) as u64;
        }
    }
    outcome(
        colliding == 0 && multi == 0,
        format!(
            "alpha*L = {:.4}, {points} points over {INJECTIVITY_BATCHES} batches: {colliding} colliding images, \
             {multi} images without a unique preimage, max neighbour update change {worst_jump} grid steps",
            bound.alpha_l
        ),
    )
}

fn set_code() -> Outcome {
    let row = set_code_sweep(SET_CODE_INSTANCES, 4096, 2024);
    outcome(
        row.checked == SET_CODE_INSTANCES && row.pass(),
        format!("{} instances, worst excess {:e} bits", row.checked, row.worst),
    )
}

fn inequalities() -> Outcome {
    let rows: Vec<_> = run_inequality_suite()
        .into_iter()
        .filter(|r| r.name != "set_code_bound")
        .collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for r in &rows {
        let tol = if r.name == "stirling" { STIRLING_TOLERANCE } else { FLOAT_TOLERANCE.min(r.tolerance) };
        let ok = r.checked > 0 && r.worst <= tol;
        pass &= ok;
        parts.push(format!("{} {}/{} worst {:e}", r.name, r.checked, r.checked + r.skipped, r.worst));
    }
    let names: Vec<_> = rows.iter().map(|r| r.name).collect();
    for needed in ["entropy_upper", "split_entropy", "pinsker", "stirling"] {
        pass &= names.contains(&needed);
    }
    outcome(pass, parts.join(", "))
}

fn hoeffding() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for c in default_checks(HOEFFDING_TRIALS, 99) {
        let r = verify_hoeffding(&c).unwrap();
        pass &= r.verdict == Some(true) && r.check.trials == HOEFFDING_TRIALS;
        parts.push(format!(
            "k={} delta={}: {:.6} <= {:.6} + 3*{:.6}",
            c.k, c.delta, r.empirical, r.bound, r.sigma
        ));
    }
    outcome(pass, parts.join(", "))
}

fn positive_line(labels: &[bool]) -> (Dataset, Model) {
    let grid = Grid::new(8, 4).unwrap();
    let elements = labels
        .iter()
        .enumerate()
        .map(|(i, &label)| Element {
            id: i as u32,
            label,
            features: FixedVector::from_raw([1 + (i as i64 % 200)]),
        })
        .collect();
    let data = Dataset::new(elements, grid, 1, "line".into()).unwrap();
    let kind = ModelKind::Logistic { bias: false };
    let model = Model::new(kind, 1, grid, FixedVector::from_raw([grid.one_raw()])).unwrap();
    (data, model)
}

/// `⌈log2 k!⌉` from a float sum, independent of the big-integer factorial.
fn float_perm_width(k: usize) -> u64 {
    (2..=k).map(|i| (i as f64).log2()).sum::<f64>().ceil() as u64
}

/// `⌈log2 C(m, k)⌉` from a float sum.
fn float_binomial_width(m: u64, k: u64) -> u64 {
    ((m - k + 1..=m).map(|i| (i as f64).log2()).sum::<f64>() - (1..=k).map(|i| (i as f64).log2()).sum::<f64>())
        .ceil() as u64
}

/// A perfect split at n = 256, and batches that are fully correct inside a
/// pool that is 90% correct.
fn linear_savings() -> Outcome {
    let (n, b, j) = (256usize, 8usize, 17usize);
    let perm = EpochPermutation::draw(77, 1, n);
    // The first half of the order is exactly the positive class.
    let mut labels = vec![false; n];
    for &id in &perm.order[..n / 2] {
        labels[id as usize] = true;
    }
    let (data, model) = positive_line(&labels);
    let trace = EpochTrace::from_checkpoints(&model, &data, &perm, b, vec![model.weights().clone(); n / b + 1]).unwrap();
    let ctx = EpochContext {
        data: &data,
        model: &model,
        alpha: FixedScalar::from_raw(0),
    };
    let (code, _) = encode_case1(&trace, &ctx, j, Mode::Accounting).unwrap();
    let decoded = decode_epoch(&code, &ctx, SideInfo::Accounting { checkpoints: &trace.checkpoints }).unwrap();
    // Tag, split position, |A₁| header, an empty rank, two half permutations.
    let target = 1 + (n / b).next_power_of_two().trailing_zeros() as u64 + header_width(n / 2) as u64 + 2 * float_perm_width(n / 2);
    let measured = code.measured_bits();
    let baseline = perm_width(n);
    let split_savings = baseline as i64 - measured as i64;
    let split_ok = decoded.order == perm.order
        && measured == target
        && baseline == float_perm_width(n)
        && split_savings as f64 >= SPLIT_SAVINGS_FRACTION * n as f64;

    // Pools hold 90% correct elements; each batch is entirely correct.
    let (pn, pb) = (200u64, 20u64);
    let mut batch_ok = true;
    let mut savings = Vec::new();
    let mut inclusive = Vec::new();
    for pool in (2 * pb..=pn - pb).rev().step_by(pb as usize) {
        let ones = pool * 9 / 10;
        let b_ids: Vec<u32> = (0..pool as u32).collect();
        let a_ids: Vec<u32> = (0..pb as u32).collect();
        let w = conditional_widths(&a_ids, &b_ids, |x| (x as u64) < ones).unwrap();
        let plain = binomial_width(pool, pb).unwrap();
        let expected_payload = float_binomial_width(ones, pb);
        batch_ok &= plain == float_binomial_width(pool, pb) && w.payload == expected_payload && w.payload < plain;
        savings.push(plain as i64 - w.payload as i64);
        inclusive.push(plain as i64 - w.total() as i64);
    }
    outcome(
        split_ok && batch_ok,
        format!(
            "split: {measured} vs {baseline} bits, savings {split_savings} >= {:.1}; batches (pool 180..40): \
             payload savings {savings:?}, with header {inclusive:?}",
            SPLIT_SAVINGS_FRACTION * n as f64
        ),
    )
}

/// A separable logistic run with progress in every epoch and no batch
/// shortfalls, checked end to end.
fn end_to_end() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(
        "family=separable:0.2\nn=128\np=128\nbatch=32\nalpha=1/16\nepsilon=1/100\nbeta_prime=1/2\nseed=1\ndata_seed=1\nmax_epochs=50\n",
    );
    s.out_dir = dir.path().to_path_buf();
    let out = run_experiment(&s).unwrap();
    let rep = &out.replications[0];
    let rows = &rep.report.rows;
    let sum = &rep.report.summary;
    let progress = !rows.is_empty() && rows.iter().all(|r| r.beta_hat > Rational::from_integer(0));
    let no_shortfall = rows.iter().all(|r| r.batch_shortfalls == 0);
    let below = sum.total_measured < sum.baseline_total;
    let bounds = rows.iter().all(|r| r.case_bound_holds);
    let (mut checked, mut ceiling_ok) = (0, true);
    let one = Rational::from_integer(1);
    for t in rep.result.completed() {
        let min_lambda = t.stats.iter().map(|st| st.lambda).min().unwrap();
        for eps in [s.run.epsilon, one - min_lambda] {
            if let CeilingVerdict::Checked { holds, .. } = check_eps_beta_ceiling(t, eps) {
                checked += 1;
                ceiling_ok &= holds;
            }
        }
    }
    outcome(
        progress && no_shortfall && below && bounds && ceiling_ok && checked > 0,
        format!(
            "{} epochs, measured {} < {} baseline: {below}, beta_hat > 0 everywhere: {progress}, no shortfalls: \
             {no_shortfall}, case bounds: {bounds}, ceiling checks {checked} all hold: {ceiling_ok}",
            rows.len(),
            sum.total_measured,
            sum.baseline_total
        ),
    )
}

fn tree(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().display().to_string(), fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// Re-running the written manifest reproduces every file.
fn determinism() -> Outcome {
    let mut files = 0;
    let mut pass = true;
    for text in [
        "replications=3\nmax_epochs=5\nsuites=hoeffding\nhoeffding_trials=20000\n",
        "mode=strict\nfamily=gaussians:0.5:0.5\nn=32\nbatch=4\np=1\nscale=6\nclip=8\nalpha=1/16\nmax_epochs=3\nreplications=2\n",
    ] {
        let dir = tempfile::tempdir().unwrap();
        let mut s = spec(text);
        s.out_dir = dir.path().to_path_buf();
        run_experiment(&s).unwrap();
        let first = tree(dir.path());
        let manifest = fs::read_to_string(dir.path().join("manifest.txt")).unwrap();
        run_experiment(&ExperimentSpec::from_text(&manifest).unwrap()).unwrap();
        pass &= tree(dir.path()) == first;
        files += first.len();
    }
    outcome(pass, format!("{files} files compared byte for byte after re-running 2 manifests"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("accounting round trip", round_trip),
        ("strict constructive decode", strict_decode),
        ("grid-level injectivity", injectivity),
        ("conditional set-code bound", set_code),
        ("entropy inequality suite", inequalities),
        ("without-replacement tail bound", hoeffding),
        ("linear savings scenarios", linear_savings),
        ("end-to-end separable accounting", end_to_end),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = check();
        failed += !o.pass as usize;
        println!(
            "{} {}. {name} [{:.1?}]: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            start.elapsed(),
            o.detail
        );
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
