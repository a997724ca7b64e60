//! Classifiers on the grid: gradients in exact dyadic arithmetic, rounded once.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use super::dataset::{Dataset, Element};
use super::sigmoid::{max_slope, sigmoid, sigmoid_slope};
use super::ModelError;
use crate::numerics::{Dyadic, FixedScalar, FixedVector, Grid};
use crate::rng::{bounded, StreamRng};
use crate::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    /// `σ(w·x (+ b))` with log loss.
    Logistic { bias: bool },
    /// One hidden layer of `width` table-sigmoid units feeding a sigmoid
    /// output, with log loss. Parameters are laid out as the `width × p`
    /// input matrix row by row, the `width` hidden biases, the `width` output
    /// weights, then the output bias.
    Hidden { width: usize },
}

impl ModelKind {
    /// Parameter count for feature dimension `p`.
    pub fn dim(&self, p: usize) -> usize {
        match *self {
            ModelKind::Logistic { bias } => p + bias as usize,
            ModelKind::Hidden { width } => width * (p + 2) + 1,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            ModelKind::Logistic { bias: false } => "logistic".into(),
            ModelKind::Logistic { bias: true } => "logistic+bias".into(),
            ModelKind::Hidden { width } => format!("hidden:{width}"),
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logistic" => Ok(ModelKind::Logistic { bias: false }),
            "logistic+bias" => Ok(ModelKind::Logistic { bias: true }),
            _ => {
                let width = s
                    .strip_prefix("hidden:")
                    .and_then(|w| w.parse::<usize>().ok())
                    .filter(|&w| w > 0)
                    .ok_or_else(|| ModelError::Config(format!("unknown model kind {s:?}")))?;
                Ok(ModelKind::Hidden { width })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model {
    kind: ModelKind,
    p: usize,
    grid: Grid,
    weights: FixedVector,
}

impl Model {
    pub fn new(
        kind: ModelKind,
        p: usize,
        grid: Grid,
        weights: FixedVector,
    ) -> Result<Self, ModelError> {
        if weights.len() != kind.dim(p) {
            return Err(ModelError::Config(format!(
                "{} with p={p} needs {} weights, got {}",
                kind.name(),
                kind.dim(p),
                weights.len()
            )));
        }
        if !weights.raw().all(|r| grid.contains(r)) {
            return Err(ModelError::Saturation("initial weights off the grid".into()));
        }
        Ok(Model {
            kind,
            p,
            grid,
            weights,
        })
    }

    /// Starting point: zeros for logistic models; for hidden layers, weights
    /// uniform on the grid in `[−½, ½]` from `seed` with zero biases.
    pub fn initial(kind: ModelKind, p: usize, grid: Grid, seed: u64) -> Self {
        let d = kind.dim(p);
        let raw = match kind {
            ModelKind::Logistic { .. } => vec![0; d],
            ModelKind::Hidden { width } => {
                let mut rng = StreamRng::new(seed, 0x696e_6974);
                let half = grid.one_raw() / 2;
                let mut draw = || bounded(&mut rng, 2 * half as u64 + 1).expect("infinite") as i64 - half;
                let mut raw = Vec::with_capacity(d);
                raw.extend((0..width * p).map(|_| draw()));
                raw.extend(std::iter::repeat_n(0, width));
                raw.extend((0..width).map(|_| draw()));
                raw.push(0);
                raw
            }
        };
        Model::new(kind, p, grid, FixedVector::from_raw(raw)).expect("valid by construction")
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.weights.len()
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn weights(&self) -> &FixedVector {
        &self.weights
    }

    /// Same architecture, different weights.
    pub fn with_weights(&self, weights: FixedVector) -> Result<Self, ModelError> {
        Model::new(self.kind, self.p, self.grid, weights)
    }

    fn check_features(&self, x: &Element) -> Result<(), ModelError> {
        if x.features.len() != self.p {
            return Err(ModelError::Config(format!(
                "element {} has {} features, model expects {}",
                x.id,
                x.features.len(),
                self.p
            )));
        }
        Ok(())
    }

    fn raw(&self, i: usize) -> i64 {
        self.weights.get(i).raw()
    }

    /// Linear score of a logistic model as an exact mantissa at scale `2s`.
    fn logistic_score(&self, x: &Element, bias: bool) -> i128 {
        let s = self.grid.scale();
        let mut z: i128 = x
            .features
            .raw()
            .enumerate()
            .map(|(i, r)| self.raw(i) as i128 * r as i128)
            .sum();
        if bias {
            z += (self.raw(self.p) as i128) << s;
        }
        z
    }

    /// Hidden pre-activations (scale `2s`) and activations.
    fn hidden_forward(&self, x: &Element, width: usize) -> (Vec<Dyadic>, Vec<Dyadic>) {
        let s = self.grid.scale();
        let p = self.p;
        let mut pre = Vec::with_capacity(width);
        let mut act = Vec::with_capacity(width);
        for k in 0..width {
            let mut a: i128 = x
                .features
                .raw()
                .enumerate()
                .map(|(j, r)| self.raw(k * p + j) as i128 * r as i128)
                .sum();
            a += (self.raw(width * p + k) as i128) << s;
            let a = Dyadic::new(a, 2 * s);
            act.push(sigmoid(&a));
            pre.push(a);
        }
        (pre, act)
    }

    fn hidden_output(&self, act: &[Dyadic], width: usize) -> Dyadic {
        let s = self.grid.scale();
        let base = width * (self.p + 1);
        let mut z = Dyadic::new(self.raw(base + width), s);
        for (k, h) in act.iter().enumerate() {
            z = z.add(&h.mul(&Dyadic::new(self.raw(base + k), s)));
        }
        z
    }

    /// Output score, exact.
    pub fn score(&self, x: &Element) -> Result<Dyadic, ModelError> {
        self.check_features(x)?;
        Ok(match self.kind {
            ModelKind::Logistic { bias } => {
                Dyadic::new(self.logistic_score(x, bias), 2 * self.grid.scale())
            }
            ModelKind::Hidden { width } => {
                let (_, act) = self.hidden_forward(x, width);
                self.hidden_output(&act, width)
            }
        })
    }

    /// Predicted label: 1 iff the score is ≥ 0.
    pub fn predict(&self, x: &Element) -> Result<bool, ModelError> {
        self.check_features(x)?;
        Ok(match self.kind {
            ModelKind::Logistic { bias } => self.logistic_score(x, bias) >= 0,
            ModelKind::Hidden { .. } => {
                self.score(x)?.signum() != std::cmp::Ordering::Less
            }
        })
    }

    /// `acc(W, x)`.
    pub fn correct(&self, x: &Element) -> Result<bool, ModelError> {
        Ok(self.predict(x)? == x.label)
    }

    /// `acc(W, A)` as an exact fraction.
    pub fn accuracy<'a>(
        &self,
        subset: impl IntoIterator<Item = &'a Element>,
    ) -> Result<Rational, ModelError> {
        let mut total = 0i64;
        let mut hits = 0i64;
        for x in subset {
            total += 1;
            hits += self.correct(x)? as i64;
        }
        if total == 0 {
            return Err(ModelError::EmptySubset);
        }
        Ok(Rational::new(hits, total))
    }

    /// `acc(W, x)` for every element, indexed by id.
    pub fn correctness(&self, data: &Dataset) -> Result<Vec<bool>, ModelError> {
        data.elements().iter().map(|x| self.correct(x)).collect()
    }

    /// Exact gradient of the single-element loss.
    pub fn element_gradient(&self, x: &Element) -> Result<Vec<Dyadic>, ModelError> {
        self.check_features(x)?;
        let s = self.grid.scale();
        let y = Dyadic::from_int(x.label as i64);
        let feats: Vec<Dyadic> = x.features.raw().map(|r| Dyadic::new(r, s)).collect();
        Ok(match self.kind {
            ModelKind::Logistic { bias } => {
                let z = Dyadic::new(self.logistic_score(x, bias), 2 * s);
                let delta = sigmoid(&z).sub(&y);
                let mut g: Vec<Dyadic> = feats.iter().map(|f| delta.mul(f)).collect();
                if bias {
                    g.push(delta);
                }
                g
            }
            ModelKind::Hidden { width } => {
                let p = self.p;
                let (pre, act) = self.hidden_forward(x, width);
                let z = self.hidden_output(&act, width);
                let delta = sigmoid(&z).sub(&y);
                let base = width * (p + 1);
                let mut g = vec![Dyadic::zero(); self.d()];
                for k in 0..width {
                    let u = Dyadic::new(self.raw(base + k), s);
                    let back = delta.mul(&u).mul(&sigmoid_slope(&pre[k]));
                    for j in 0..p {
                        g[k * p + j] = back.mul(&feats[j]);
                    }
                    g[width * p + k] = back;
                    g[base + k] = delta.mul(&act[k]);
                }
                g[base + width] = delta;
                g
            }
        })
    }

    /// `Σ_{x∈A} ∇f_x(W)`, summed in ascending id order. Also returns `|A|`.
    pub fn batch_gradient_sum(&self, batch: &[&Element]) -> Result<(Vec<Dyadic>, u64), ModelError> {
        if batch.is_empty() {
            return Err(ModelError::EmptySubset);
        }
        let mut sorted: Vec<&Element> = batch.to_vec();
        sorted.sort_by_key(|x| x.id);
        let mut sum = vec![Dyadic::zero(); self.d()];
        for x in sorted {
            for (acc, g) in sum.iter_mut().zip(self.element_gradient(x)?) {
                *acc = acc.add(&g);
            }
        }
        Ok((sum, batch.len() as u64))
    }

    /// `∇̃f_A(W)`: the exact batch-mean gradient rounded to the grid.
    pub fn loss_gradient(&self, batch: &[&Element]) -> Result<FixedVector, ModelError> {
        let (sum, count) = self.batch_gradient_sum(batch)?;
        let s = self.grid.scale();
        let raw = sum
            .iter()
            .map(|g| self.to_grid(g.round_div_to_scale(count, s)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FixedVector::from_raw(raw))
    }

    /// `round(α·∇f_A(W))` on the grid, with a single rounding.
    pub fn step_delta(&self, batch: &[&Element], alpha: FixedScalar) -> Result<FixedVector, ModelError> {
        let (sum, count) = self.batch_gradient_sum(batch)?;
        let raw = sum
            .iter()
            .map(|g| self.to_grid(g.mul_int(alpha.raw()).round_div_to_scale(count, 0)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FixedVector::from_raw(raw))
    }

    /// One gradient step `W − round(α·∇f_A(W))`.
    pub fn step(&self, batch: &[&Element], alpha: FixedScalar) -> Result<Model, ModelError> {
        let delta = self.step_delta(batch, alpha)?;
        let raw = self
            .weights
            .raw()
            .zip(delta.raw())
            .map(|(w, g)| self.to_grid(BigInt::from(w) - BigInt::from(g)))
            .collect::<Result<Vec<_>, _>>()?;
        self.with_weights(FixedVector::from_raw(raw))
    }

    fn to_grid(&self, v: BigInt) -> Result<i64, ModelError> {
        match v.to_i64() {
            Some(r) if self.grid.contains(r) => Ok(r),
            _ => Err(ModelError::Saturation(format!(
                "value {v} outside ±{} at scale {}",
                self.grid.max_raw(),
                self.grid.scale()
            ))),
        }
    }

    /// A bound on `‖∇f_A(W)‖` valid for every `W` on the grid.
    ///
    /// For logistic models `|σ̃ − y| ≤ 1`, so the bound is the largest
    /// augmented feature norm in the batch. For hidden layers every output
    /// weight is at most the clip radius `R` and `σ̃' ≤ ¼`.
    pub fn gradient_bound(&self, batch: &[&Element]) -> f64 {
        let one = self.grid.one_raw() as f64;
        let norm2 = |x: &Element| x.features.raw().map(|r| (r as f64 / one).powi(2)).sum::<f64>();
        let max_x2 = batch.iter().map(|x| norm2(x)).fold(0.0, f64::max);
        match self.kind {
            ModelKind::Logistic { bias } => (max_x2 + bias as u8 as f64).sqrt(),
            ModelKind::Hidden { width } => {
                let r = self.grid.clip() as f64 * max_slope();
                (1.0 + width as f64 + width as f64 * r * r * (max_x2 + 1.0)).sqrt()
            }
        }
    }
}

/// Memoized `acc(W, •)` for one model snapshot.
pub struct AccuracyOracle<'a> {
    model: Model,
    data: &'a Dataset,
    memo: Vec<OnceLock<bool>>,
}

impl<'a> AccuracyOracle<'a> {
    pub fn new(model: Model, data: &'a Dataset) -> Self {
        let memo = (0..data.len()).map(|_| OnceLock::new()).collect();
        AccuracyOracle { model, data, memo }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn get(&self, id: u32) -> Result<bool, ModelError> {
        let slot = self.memo.get(id as usize).ok_or(ModelError::UnknownId(id))?;
        if let Some(&v) = slot.get() {
            return Ok(v);
        }
        let x = self.data.get(id).ok_or(ModelError::UnknownId(id))?;
        let v = self.model.correct(x)?;
        Ok(*slot.get_or_init(|| v))
    }
}
