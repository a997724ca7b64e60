//! Binary entropy, Bernoulli KL divergence and the inequalities the set
//! codes lean on. Everything is in bits.
//!
//! The functions are generic over the float type so the sweeps can be run at
//! `f32` to see how much of the slack is rounding. The `0·log 0 = 0`
//! convention is applied everywhere.

use num_traits::Float;

use super::NumericsError;

fn cast<F: Float>(v: f64) -> F {
    F::from(v).expect("float constant representable")
}

fn check_prob<F: Float>(what: &'static str, p: F) -> Result<(), NumericsError> {
    if p.is_nan() || p < F::zero() || p > F::one() {
        return Err(NumericsError::Domain {
            what,
            value: p.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(())
}

/// `x · log2(x / y)` with `0 · log 0 = 0`.
fn xlog2_ratio<F: Float>(x: F, y: F) -> F {
    if x == F::zero() {
        F::zero()
    } else {
        x * (x / y).log2()
    }
}

/// `h(p) = −p log2 p − (1−p) log2(1−p)`.
pub fn binary_entropy<F: Float>(p: F) -> Result<F, NumericsError> {
    check_prob("p", p)?;
    let q = F::one() - p;
    Ok(-(xlog2_ratio(p, F::one()) + xlog2_ratio(q, F::one())))
}

/// `D_KL(p ‖ q)` between Bernoulli(p) and Bernoulli(q), in bits.
///
/// Infinite divergences (`q ∈ {0,1}` with `p ≠ q`) are domain errors.
pub fn kl_bernoulli<F: Float>(p: F, q: F) -> Result<F, NumericsError> {
    check_prob("p", p)?;
    check_prob("q", q)?;
    let one = F::one();
    if (q == F::zero() && p != F::zero()) || (q == one && p != one) {
        return Err(NumericsError::InfiniteDivergence {
            p: p.to_f64().unwrap_or(f64::NAN),
            q: q.to_f64().unwrap_or(f64::NAN),
        });
    }
    let d = xlog2_ratio(p, q) + xlog2_ratio(one - p, one - q);
    // Tiny negative values are rounding noise around p == q.
    Ok(d.max(F::zero()))
}

/// Finite list of probabilities used for inequality sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbGrid<F> {
    points: Vec<F>,
}

impl<F: Float> ProbGrid<F> {
    pub fn new(points: Vec<F>) -> Result<Self, NumericsError> {
        if points.is_empty() {
            return Err(NumericsError::EmptyGrid);
        }
        for &p in &points {
            check_prob("grid point", p)?;
        }
        Ok(ProbGrid { points })
    }

    /// `{k/steps : k = 1..=steps}`, the uniform grid on `(0, 1]`.
    pub fn uniform_open_closed(steps: u32) -> Self {
        let pts = (1..=steps)
            .map(|k| cast::<F>(k as f64 / steps as f64))
            .collect();
        ProbGrid { points: pts }
    }

    /// `{k/(steps−1) : k = 0..steps}`, the closed grid on `[0, 1]`.
    pub fn uniform_closed(steps: u32) -> Self {
        assert!(steps >= 2);
        let pts = (0..steps)
            .map(|k| cast::<F>(k as f64 / (steps - 1) as f64))
            .collect();
        ProbGrid { points: pts }
    }

    /// `{(k+1)/(steps+1) : k = 0..steps}`, strictly inside `(0, 1)`.
    pub fn uniform_open(steps: u32) -> Self {
        let pts = (0..steps)
            .map(|k| cast::<F>((k + 1) as f64 / (steps + 1) as f64))
            .collect();
        ProbGrid { points: pts }
    }

    pub fn points(&self) -> &[F] {
        &self.points
    }
}

/// Largest value of `h(p) − p·log2(e/p)` over the grid. Non-positive up to
/// rounding when the entropy upper bound holds.
pub fn verify_entropy_upper<F: Float>(grid: &ProbGrid<F>) -> F {
    let log2e = cast::<F>(std::f64::consts::LOG2_E);
    grid.points
        .iter()
        .map(|&p| {
            let h = binary_entropy(p).expect("grid points are probabilities");
            let bound = if p == F::zero() {
                F::zero()
            } else {
                p * (log2e - p.log2())
            };
            h - bound
        })
        .fold(F::neg_infinity(), F::max)
}

/// Slack of the split-entropy inequality
///
/// `q·h(pγ/q) + (1−q)·h((1−p)γ/(1−q)) ≤ h(γ) − γ·D_KL(p‖q)`,
///
/// returned as right-hand side minus left-hand side.
pub fn verify_split_entropy<F: Float>(p: F, gamma: F, q: F) -> Result<F, NumericsError> {
    check_prob("p", p)?;
    check_prob("gamma", gamma)?;
    check_prob("q", q)?;
    let one = F::one();
    let zero = F::zero();
    let left_mass = p * gamma;
    let right_mass = (one - p) * gamma;
    if left_mass > q || right_mass > one - q {
        return Err(NumericsError::Precondition(format!(
            "need pγ ≤ q and (1−p)γ ≤ 1−q, got p={:?} γ={:?} q={:?}",
            p.to_f64(),
            gamma.to_f64(),
            q.to_f64()
        )));
    }
    // The `x = 0` weight kills the entropy term regardless of its argument.
    let weighted = |w: F, mass: F| -> Result<F, NumericsError> {
        if w == zero {
            Ok(zero)
        } else {
            Ok(w * binary_entropy((mass / w).min(one))?)
        }
    };
    let lhs = weighted(q, left_mass)? + weighted(one - q, right_mass)?;
    let div = if gamma == zero {
        zero
    } else {
        kl_bernoulli(p, q)?
    };
    let rhs = binary_entropy(gamma)? - gamma * div;
    Ok(rhs - lhs)
}

/// `D_KL(p‖q) − 2(p−q)²/ln 2`: Pinsker's inequality in bits. Non-negative
/// when the inequality holds.
pub fn pinsker_slack<F: Float>(p: F, q: F) -> Result<F, NumericsError> {
    let d = kl_bernoulli(p, q)?;
    let two = cast::<F>(2.0);
    let ln2 = cast::<F>(std::f64::consts::LN_2);
    let diff = p - q;
    Ok(d - two * diff * diff / ln2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5f64).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0f64).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0f64).unwrap(), 0.0);
        // Independent evaluation of the defining formula.
        let oracle = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln()) / 2f64.ln();
        let h = binary_entropy(0.25f64).unwrap();
        assert!((h - oracle).abs() < 1e-15);
        assert!((h - 0.811_278_124_459_132_9).abs() < 1e-12);
        assert!(binary_entropy(1.5f64).is_err());
        assert!(binary_entropy(-0.1f64).is_err());
        assert!(binary_entropy(f64::NAN).is_err());
    }

    #[test]
    fn entropy_generic_over_f32() {
        let h = binary_entropy(0.25f32).unwrap();
        assert!((h - 0.811_278_1).abs() < 1e-6);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_bernoulli(0.5f64, 0.5).unwrap(), 0.0);
        assert!((kl_bernoulli(1.0f64, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let d = kl_bernoulli(0.3f64, 0.6).unwrap();
        let oracle = 0.3 * (0.3f64 / 0.6).log2() + 0.7 * (0.7f64 / 0.4).log2();
        assert!((d - oracle).abs() < 1e-15);
        assert!(d >= 0.18);
        assert!(kl_bernoulli(0.3f64, 0.0).is_err());
        assert!(kl_bernoulli(0.3f64, 1.0).is_err());
        assert_eq!(kl_bernoulli(0.0f64, 0.0).unwrap(), 0.0);
        assert_eq!(kl_bernoulli(1.0f64, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn entropy_upper_examples() {
        let g = ProbGrid::new((1..10).map(|k| k as f64 / 10.0).collect()).unwrap();
        assert!(verify_entropy_upper(&g) <= 1e-12);
        let one = ProbGrid::new(vec![1.0f64]).unwrap();
        let v = verify_entropy_upper(&one);
        assert!((v + std::f64::consts::LOG2_E).abs() < 1e-15);
        let half = ProbGrid::new(vec![0.5f64]).unwrap();
        let v = verify_entropy_upper(&half);
        // 1 − 0.5·log2(2e)
        assert!((v - (1.0 - 0.5 * (2.0 * std::f64::consts::E).log2())).abs() < 1e-15);
        assert!(ProbGrid::<f64>::new(vec![]).is_err());
        assert!(ProbGrid::new(vec![1.2f64]).is_err());
    }

    #[test]
    fn split_entropy_examples() {
        for &g in &[0.0, 0.1, 0.5, 0.9, 1.0] {
            let s = verify_split_entropy(0.4f64, g, 0.4).unwrap();
            assert!(s.abs() < 1e-12, "gamma {g}: slack {s}");
        }
        assert!(verify_split_entropy(0.5f64, 0.5, 0.5).unwrap().abs() < 1e-15);
        let s = verify_split_entropy(0.3f64, 0.4, 0.5).unwrap();
        assert!(s >= 0.0);
        // pγ > q violates the domain.
        assert!(matches!(
            verify_split_entropy(0.9f64, 0.9, 0.1),
            Err(NumericsError::Precondition(_))
        ));
    }

    #[test]
    fn pinsker_in_bits() {
        for &(p, q) in &[(0.3, 0.6), (0.0, 0.5), (1.0, 0.01), (0.5, 0.5)] {
            assert!(pinsker_slack(p, q).unwrap() >= -1e-12);
        }
    }
}
