//! Undoing gradient steps by search, and grid-level injectivity checks.

use std::collections::HashMap;

use rayon::prelude::*;

use super::EngineError;
use crate::model::{Dataset, Element, Model};
use crate::numerics::{FixedScalar, FixedVector};

/// Largest number of candidate points a reverse search will examine.
pub const MAX_CANDIDATES: u64 = 50_000_000;

/// Radius in raw units of the ball that must contain the predecessor:
/// `α·G` for the batch plus the `√d/2` worst-case rounding of the step.
pub fn search_radius(model: &Model, batch: &[&Element], alpha: FixedScalar) -> i64 {
    let g = model.gradient_bound(batch);
    let d = model.d() as f64;
    (alpha.raw() as f64 * g + 0.5 * d.sqrt()).ceil() as i64 + 1
}

fn forward(model: &Model, w: &[i64], batch: &[&Element], alpha: FixedScalar) -> Option<Vec<i64>> {
    let m = model.with_weights(FixedVector::from_raw(w.iter().copied())).ok()?;
    m.step(batch, alpha).ok().map(|next| next.weights().to_raw_vec())
}

/// Visit every offset with `‖Δ‖² ≤ budget` for coordinates `k..`, in
/// lexicographic order.
fn walk_ball(
    point: &mut Vec<i64>,
    k: usize,
    budget: i64,
    center: &[i64],
    visit: &mut dyn FnMut(&[i64]),
) {
    if k == center.len() {
        visit(point);
        return;
    }
    let r = (budget as f64).sqrt().floor() as i64;
    for delta in -r..=r {
        let rest = budget - delta * delta;
        if rest < 0 {
            continue;
        }
        point[k] = center[k] + delta;
        walk_ball(point, k + 1, rest, center, visit);
    }
}

/// Every grid point `W` near `w_next` with `W − round(α·∇f_B(W)) = w_next`, in
/// lexicographic order of raw mantissas.
pub fn preimages(
    model: &Model,
    w_next: &FixedVector,
    batch: &[&Element],
    alpha: FixedScalar,
) -> Result<Vec<FixedVector>, EngineError> {
    let rho = search_radius(model, batch, alpha);
    let d = model.d() as u32;
    let bound = (2 * rho as u64 + 1).checked_pow(d).unwrap_or(u64::MAX);
    if bound > MAX_CANDIDATES {
        return Err(EngineError::Infeasible(format!(
            "reverse search over a radius-{rho} ball in {d} dimensions (up to {bound} points)"
        )));
    }
    let center = w_next.to_raw_vec();
    let target = center.clone();
    let max_raw = model.grid().max_raw();
    let budget = rho * rho;
    let hits: Vec<Vec<FixedVector>> = (-rho..=rho)
        .into_par_iter()
        .map(|delta| {
            let mut found = Vec::new();
            let rest = budget - delta * delta;
            let mut point = center.clone();
            point[0] = center[0] + delta;
            let mut visit = |w: &[i64]| {
                if w.iter().any(|v| v.abs() > max_raw) {
                    return;
                }
                if forward(model, w, batch, alpha).as_deref() == Some(&target[..]) {
                    found.push(FixedVector::from_raw(w.iter().copied()));
                }
            };
            walk_ball(&mut point, 1, rest, &center, &mut visit);
            found
        })
        .collect();
    Ok(hits.into_iter().flatten().collect())
}

/// The unique predecessor of `w_next` under a step on `batch`.
pub fn reverse_step(
    model: &Model,
    w_next: &FixedVector,
    batch: &[&Element],
    alpha: FixedScalar,
) -> Result<FixedVector, EngineError> {
    let mut found = preimages(model, w_next, batch, alpha)?;
    match found.len() {
        0 => Err(EngineError::NoPreimage {
            image: w_next.to_string(),
        }),
        1 => Ok(found.pop().expect("one")),
        _ => Err(EngineError::MultiplePreimages {
            image: w_next.to_string(),
            preimages: found.iter().map(|w| w.to_string()).collect(),
        }),
    }
}

/// Walk back through an epoch: given `W_{i,n/b+1}` and the batches in forward
/// order, return `W_{i,n/b}, …, W_{i,1}`.
pub fn reverse_epoch(
    model: &Model,
    data: &Dataset,
    w_final: &FixedVector,
    batches: &[Vec<u32>],
    alpha: FixedScalar,
) -> Result<Vec<FixedVector>, EngineError> {
    let mut out = Vec::with_capacity(batches.len());
    let mut w = w_final.clone();
    for (idx, ids) in batches.iter().enumerate().rev() {
        let batch = data.select(ids)?;
        w = reverse_step(model, &w, &batch, alpha).map_err(|e| EngineError::Reverse {
            j: idx + 1,
            source: Box::new(e),
        })?;
        out.push(w.clone());
    }
    Ok(out)
}

/// Result of applying one step map to every point of a grid box.
#[derive(Clone, Debug, PartialEq)]
pub struct InjectivityReport {
    /// Points whose step stayed on the grid.
    pub points: u64,
    /// Points whose step left the grid.
    pub saturated: u64,
    pub distinct_images: u64,
    /// Images reached from two or more points.
    pub colliding_images: u64,
    /// A few colliding preimage groups, lexicographically first.
    pub examples: Vec<Vec<FixedVector>>,
    /// Largest `‖u(W+e_k) − u(W)‖` over axis neighbours, in grid steps,
    /// where `u` is the rounded update. Injectivity needs this below 1.
    pub max_neighbour_update_change: i64,
}

impl InjectivityReport {
    pub fn injective(&self) -> bool {
        self.colliding_images == 0
    }
}

/// Apply the step on `batch` to every grid point with raw coordinates in
/// `[lo, hi]` and count collisions.
pub fn injectivity_sweep(
    model: &Model,
    batch: &[&Element],
    alpha: FixedScalar,
    lo: i64,
    hi: i64,
) -> Result<InjectivityReport, EngineError> {
    let d = model.d() as u32;
    let side = (hi - lo + 1).max(0) as u64;
    let total = side.checked_pow(d).unwrap_or(u64::MAX);
    if total > MAX_CANDIDATES {
        return Err(EngineError::Infeasible(format!("sweep of {total} points")));
    }
    let decode = |mut idx: u64| -> Vec<i64> {
        let mut w = vec![0i64; d as usize];
        for k in (0..d as usize).rev() {
            w[k] = lo + (idx % side) as i64;
            idx /= side;
        }
        w
    };
    let updates: Vec<Option<Vec<i64>>> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let w = decode(idx);
            forward(model, &w, batch, alpha)
                .map(|next| w.iter().zip(&next).map(|(a, b)| a - b).collect())
        })
        .collect();
    let mut images: HashMap<Vec<i64>, Vec<u64>> = HashMap::new();
    let mut saturated = 0u64;
    let mut points = 0u64;
    let mut max_change = 0i64;
    for (idx, u) in updates.iter().enumerate() {
        let Some(u) = u else {
            saturated += 1;
            continue;
        };
        points += 1;
        let w = decode(idx as u64);
        let image: Vec<i64> = w.iter().zip(u).map(|(a, b)| a - b).collect();
        images.entry(image).or_default().push(idx as u64);
        let mut stride = 1u64;
        for k in (0..d as usize).rev() {
            if w[k] < hi {
                if let Some(v) = &updates[idx + stride as usize] {
                    let change = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<i64>();
                    max_change = max_change.max((change as f64).sqrt().ceil() as i64);
                }
            }
            stride *= side;
        }
    }
    let mut groups: Vec<Vec<u64>> = images.values().filter(|v| v.len() > 1).cloned().collect();
    groups.sort();
    let colliding = groups.len() as u64;
    let examples = groups
        .iter()
        .take(5)
        .map(|g| g.iter().map(|&i| FixedVector::from_raw(decode(i))).collect())
        .collect();
    Ok(InjectivityReport {
        points,
        saturated,
        distinct_images: images.len() as u64,
        colliding_images: colliding,
        examples,
        max_neighbour_update_change: max_change,
    })
}
