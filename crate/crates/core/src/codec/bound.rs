//! Closed-form size bound for the conditional set code.

use num_traits::Float;

use super::CodecError;
use crate::numerics::binary_entropy;

/// `m·h(γ) − 2γm(κ_B − κ_A)²` bits, without the logarithmic header term.
///
/// Requires `γ, κ_A, κ_B ∈ [0, 1]`, `γ·κ_A ≤ κ_B` and `γ·(1 − κ_A) ≤ 1 − κ_B`,
/// which is exactly when `A₁` and `A₀` fit inside `B₁` and `B₀`.
pub fn theoretical_set_bound<F: Float>(
    m: u64,
    gamma: F,
    kappa_b: F,
    kappa_a: F,
) -> Result<F, CodecError> {
    let zero = F::zero();
    let one = F::one();
    let unit = |v: F| v >= zero && v <= one;
    if !unit(gamma) || !unit(kappa_b) || !unit(kappa_a) {
        return Err(CodecError::Domain(format!(
            "set bound needs γ, κ in [0,1], got γ={:?} κ_B={:?} κ_A={:?}",
            gamma.to_f64(),
            kappa_b.to_f64(),
            kappa_a.to_f64()
        )));
    }
    if gamma * kappa_a > kappa_b || gamma * (one - kappa_a) > one - kappa_b {
        return Err(CodecError::Domain(format!(
            "set bound needs γκ_A ≤ κ_B and γ(1−κ_A) ≤ 1−κ_B, got γ={:?} κ_B={:?} κ_A={:?}",
            gamma.to_f64(),
            kappa_b.to_f64(),
            kappa_a.to_f64()
        )));
    }
    let m = F::from(m).expect("m representable");
    let h = binary_entropy(gamma).map_err(|e| CodecError::Domain(e.to_string()))?;
    let d = kappa_b - kappa_a;
    Ok(m * h - (one + one) * gamma * m * d * d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let h = |p: f64| -p * p.log2() - (1.0 - p) * (1.0 - p).log2();
        let v = theoretical_set_bound(1000, 0.1f64, 0.9, 0.5).unwrap();
        assert!((v - (1000.0 * h(0.1) - 32.0)).abs() < 1e-9);
        assert!((v - 437.0).abs() < 0.1);
        let same = theoretical_set_bound(300, 0.2f64, 0.4, 0.4).unwrap();
        assert!((same - 300.0 * h(0.2)).abs() < 1e-9);
        assert_eq!(theoretical_set_bound(50, 0.0f64, 0.3, 0.7).unwrap(), 0.0);
        let f32v = theoretical_set_bound(1000, 0.1f32, 0.9, 0.5).unwrap();
        assert!((f32v - 437.0).abs() < 0.5);
    }

    #[test]
    fn domain_errors() {
        assert!(theoretical_set_bound(10, 1.5f64, 0.5, 0.5).is_err());
        assert!(theoretical_set_bound(10, 0.5f64, 0.1, 0.9).is_err());
        assert!(theoretical_set_bound(10, f64::NAN, 0.5, 0.5).is_err());
    }
}
