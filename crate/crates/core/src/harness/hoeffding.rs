//! Monte Carlo check of the lower-tail bound for means of samples drawn
//! without replacement.

use rayon::prelude::*;

use super::HarnessError;
use crate::rng::{bounded, StreamRng};

/// Verdicts need at least this many trials.
pub const MIN_TRIALS: u64 = 10_000;

/// Trials are split into this many independently seeded chunks.
const CHUNKS: u64 = 256;

/// A fixed binary population of `population` elements, `ones` of them 1,
/// sampled `k` at a time.
#[derive(Clone, Debug, PartialEq)]
pub struct HoeffdingCheck {
    pub population: usize,
    pub ones: usize,
    pub k: usize,
    /// Deviation below the population mean, in mean units.
    pub delta: f64,
    pub trials: u64,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoeffdingResult {
    pub check: HoeffdingCheck,
    pub mu: f64,
    /// Largest count of ones that still lies in the tail.
    pub threshold: Option<u64>,
    /// Trials whose sample mean was at most `μ − δ`.
    pub hits: u64,
    pub empirical: f64,
    /// `e^{−2kδ²}`.
    pub bound: f64,
    /// Binomial standard deviation of a frequency with mean `bound`.
    pub sigma: f64,
    /// `empirical ≤ bound + 3σ`; `None` below [`MIN_TRIALS`].
    pub verdict: Option<bool>,
}

impl HoeffdingResult {
    pub fn to_csv(&self) -> String {
        let c = &self.check;
        format!(
            "{},{},{},{},{},{},{},{:.9},{:.9},{:.9},{}",
            c.population,
            c.ones,
            c.k,
            c.delta,
            c.trials,
            c.seed,
            self.hits,
            self.empirical,
            self.bound,
            self.sigma,
            self.verdict.map(|v| if v { "pass" } else { "fail" }).unwrap_or("insufficient"),
        )
    }
}

pub const HOEFFDING_HEADER: &str = "population,ones,k,delta,trials,seed,hits,empirical,bound,sigma,verdict";

/// The default sweep: `μ = ½` over 1024 elements, `k ∈ {64, 256}`,
/// `δ ∈ {0.1, 0.2}`.
pub fn default_checks(trials: u64, seed: u64) -> Vec<HoeffdingCheck> {
    let mut out = Vec::new();
    for k in [64, 256] {
        for delta in [0.1, 0.2] {
            out.push(HoeffdingCheck {
                population: 1024,
                ones: 512,
                k,
                delta,
                trials,
                seed,
            });
        }
    }
    out
}

/// Ones in one sample of `k` drawn sequentially without replacement.
fn draw(rng: &mut StreamRng, population: usize, ones: usize, k: usize) -> u64 {
    let (mut left, mut left_ones, mut hits) = (population as u64, ones as u64, 0);
    for _ in 0..k {
        if bounded(rng, left).expect("unbounded stream") < left_ones {
            left_ones -= 1;
            hits += 1;
        }
        left -= 1;
    }
    hits
}

pub fn verify_hoeffding(check: &HoeffdingCheck) -> Result<HoeffdingResult, HarnessError> {
    let c = check;
    if c.population == 0 || c.ones > c.population || c.k == 0 || c.k > c.population {
        return Err(HarnessError::Config(format!(
            "need 0 < k ≤ population and ones ≤ population, got k={} ones={} population={}",
            c.k, c.ones, c.population
        )));
    }
    let mu = c.ones as f64 / c.population as f64;
    if !(0.0..=mu).contains(&c.delta) {
        return Err(HarnessError::Config(format!("delta {} outside [0, μ = {mu}]", c.delta)));
    }
    if c.trials == 0 {
        return Err(HarnessError::Config("at least one trial is needed".into()));
    }
    // ones/k ≤ μ − δ  ⟺  ones ≤ k(μ − δ); a small allowance absorbs rounding
    // when k(μ − δ) is an integer.
    let edge = c.k as f64 * (mu - c.delta);
    let threshold = (edge >= -1e-9).then(|| (edge + 1e-9).floor().max(0.0) as u64);
    let hits: u64 = match threshold {
        None => 0,
        Some(t) => (0..CHUNKS)
            .into_par_iter()
            .map(|chunk| {
                let count = c.trials / CHUNKS + (chunk < c.trials % CHUNKS) as u64;
                let mut rng = StreamRng::new(c.seed, chunk);
                (0..count)
                    .filter(|_| draw(&mut rng, c.population, c.ones, c.k) <= t)
                    .count() as u64
            })
            .sum(),
    };
    let empirical = hits as f64 / c.trials as f64;
    let bound = (-2.0 * c.k as f64 * c.delta * c.delta).exp();
    let sigma = (bound * (1.0 - bound) / c.trials as f64).sqrt();
    Ok(HoeffdingResult {
        check: c.clone(),
        mu,
        threshold,
        hits,
        empirical,
        bound,
        sigma,
        verdict: (c.trials >= MIN_TRIALS).then_some(empirical <= bound + 3.0 * sigma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check(ones: usize, k: usize, delta: f64, trials: u64) -> HoeffdingCheck {
        HoeffdingCheck {
            population: 200,
            ones,
            k,
            delta,
            trials,
            seed: 1,
        }
    }

    #[test]
    fn zero_deviation_has_bound_one() {
        let r = verify_hoeffding(&check(100, 20, 0.0, 20_000)).unwrap();
        assert_eq!(r.bound, 1.0);
        assert_eq!(r.verdict, Some(true));
        assert!(r.empirical > 0.4);
    }

    #[test]
    fn all_ones_never_falls_short() {
        let r = verify_hoeffding(&check(200, 50, 0.5, 10_000)).unwrap();
        assert_eq!(r.hits, 0);
        assert_eq!(r.verdict, Some(true));
    }

    #[test]
    fn sampling_the_whole_population_is_deterministic() {
        // k = N: the sample mean is exactly μ.
        let r = verify_hoeffding(&check(60, 200, 0.0, 1000)).unwrap();
        assert_eq!(r.hits, 1000);
        assert_eq!(r.verdict, None);
        let r = verify_hoeffding(&check(60, 200, 0.01, 1000)).unwrap();
        assert_eq!(r.hits, 0);
    }

    #[test]
    fn matches_the_exact_hypergeometric_tail() {
        // Population 20 with 10 ones, k = 5, tail {ones ≤ 1}:
        // (C(10,0)C(10,5) + C(10,1)C(10,4)) / C(20,5) = (252 + 2100) / 15504.
        let c = HoeffdingCheck {
            population: 20,
            ones: 10,
            k: 5,
            delta: 0.3,
            trials: 400_000,
            seed: 7,
        };
        let r = verify_hoeffding(&c).unwrap();
        assert_eq!(r.threshold, Some(1));
        let exact = 2352.0 / 15504.0;
        let sd = (exact * (1.0 - exact) / 400_000.0f64).sqrt();
        assert!((r.empirical - exact).abs() < 5.0 * sd, "{} vs {exact}", r.empirical);
    }

    #[test]
    fn rejects_bad_ranges() {
        assert!(verify_hoeffding(&check(100, 20, 0.6, 100)).is_err());
        assert!(verify_hoeffding(&check(100, 20, -0.1, 100)).is_err());
        assert!(verify_hoeffding(&check(100, 300, 0.1, 100)).is_err());
        assert!(verify_hoeffding(&check(300, 20, 0.1, 100)).is_err());
    }
}
