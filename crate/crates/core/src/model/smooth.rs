//! Empirical and analytic smoothness constants.

use super::dataset::Dataset;
use super::network::{Model, ModelKind};
use super::sigmoid::max_slope;
use super::ModelError;
use crate::numerics::{Dyadic, FixedVector};
use crate::rng::{bounded, StreamRng};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SmoothnessEstimate {
    /// Largest observed `‖∇f_x(W₁) − ∇f_x(W₂)‖ / ‖W₁ − W₂‖`.
    pub l_empirical: f64,
    /// Largest observed `‖∇f_x(W)‖`.
    pub g_empirical: f64,
    /// Guaranteed Lipschitz constant of the per-element gradient, when known.
    pub l_analytic: Option<f64>,
    /// Guaranteed gradient norm bound.
    pub g_analytic: f64,
}

fn norm(v: &[Dyadic]) -> f64 {
    v.iter().map(|g| g.to_f64().powi(2)).sum::<f64>().sqrt()
}

/// Analytic `L` for logistic models: the steepest table segment times the
/// largest squared augmented feature norm. Hidden layers have a
/// discontinuous table derivative, so no constant is claimed.
pub fn analytic_smoothness(kind: ModelKind, data: &Dataset) -> Option<f64> {
    match kind {
        ModelKind::Logistic { bias } => {
            let one = data.grid().one_raw() as f64;
            let max_x2 = data
                .elements()
                .iter()
                .map(|x| x.features.raw().map(|r| (r as f64 / one).powi(2)).sum::<f64>())
                .fold(0.0, f64::max);
            Some(max_slope() * (max_x2 + bias as u8 as f64))
        }
        ModelKind::Hidden { .. } => None,
    }
}

/// Sample `samples` (element, W₁, W₂) triples. `W₁` is uniform on the grid
/// inside `[−4, 4]^d` and `W₂` differs from it by at most ¼ per coordinate.
pub fn estimate_smoothness(
    model: &Model,
    data: &Dataset,
    samples: usize,
    seed: u64,
) -> Result<SmoothnessEstimate, ModelError> {
    let grid = model.grid();
    let d = model.d();
    let box_raw = (4 * grid.one_raw()).min(grid.max_raw());
    let near = (grid.one_raw() / 4).max(1);
    let mut rng = StreamRng::new(seed, 0x736d_6f6f);
    let mut draw = |half: i64| bounded(&mut rng, 2 * half as u64 + 1).expect("infinite") as i64 - half;
    let mut l_emp = 0.0f64;
    let mut g_emp = 0.0f64;
    for _ in 0..samples {
        let x = &data.elements()[(draw(i64::MAX / 4).unsigned_abs() % data.len() as u64) as usize];
        let w1: Vec<i64> = (0..d).map(|_| draw(box_raw)).collect();
        let mut w2: Vec<i64> = w1
            .iter()
            .map(|&w| (w + draw(near)).clamp(-grid.max_raw(), grid.max_raw()))
            .collect();
        if w2 == w1 {
            w2[0] = if w1[0] < grid.max_raw() { w1[0] + 1 } else { w1[0] - 1 };
        }
        let m1 = model.with_weights(FixedVector::from_raw(w1.clone()))?;
        let m2 = model.with_weights(FixedVector::from_raw(w2.clone()))?;
        let g1 = m1.element_gradient(x)?;
        let g2 = m2.element_gradient(x)?;
        let diff: Vec<Dyadic> = g1.iter().zip(&g2).map(|(a, b)| a.sub(b)).collect();
        let dw = w1
            .iter()
            .zip(&w2)
            .map(|(a, b)| ((a - b) as f64 / grid.one_raw() as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        l_emp = l_emp.max(norm(&diff) / dw);
        g_emp = g_emp.max(norm(&g1)).max(norm(&g2));
    }
    let all: Vec<_> = data.elements().iter().collect();
    Ok(SmoothnessEstimate {
        l_empirical: l_emp,
        g_empirical: g_emp,
        l_analytic: analytic_smoothness(model.kind(), data),
        g_analytic: model.gradient_bound(&all),
    })
}
