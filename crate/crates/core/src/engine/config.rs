use super::EngineError;
use crate::model::{
    analytic_smoothness, estimate_smoothness, Dataset, GeneratorSpec, Model, ModelKind,
};
use crate::numerics::{FixedScalar, Grid};
use crate::Rational;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub data: GeneratorSpec,
    pub kind: ModelKind,
    /// Batch size `b`.
    pub batch: usize,
    /// Step size on the grid.
    pub alpha: FixedScalar,
    /// Target error `ε`; the run stops once `acc(W, X) ≥ 1 − ε`.
    pub epsilon: Rational,
    /// Local progress constant `β′`; the selector uses `β = β′ε`.
    pub beta_prime: Rational,
    /// Seed for shuffles and model initialisation.
    pub seed: u64,
    pub max_epochs: usize,
    pub grid: Grid,
}

/// Smoothness figures a configuration was validated against.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepBound {
    /// `L` used for the `α·L < 1` check.
    pub l: f64,
    /// Whether `l` is a guaranteed constant or a sampled estimate.
    pub analytic: bool,
    /// `α·L`.
    pub alpha_l: f64,
}

impl RunConfig {
    pub fn n(&self) -> usize {
        self.data.n
    }

    pub fn d(&self) -> usize {
        self.kind.dim(self.data.p)
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.n() / self.batch
    }

    /// `β = β′·ε`.
    pub fn beta(&self) -> Rational {
        self.beta_prime * self.epsilon
    }

    pub fn alpha_f64(&self) -> f64 {
        self.grid.to_f64(self.alpha)
    }

    /// Shape checks that need no data.
    pub fn check_shape(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if self.batch < 2 {
            return bad(format!("batch size {} must be at least 2", self.batch));
        }
        if self.n() == 0 || !self.n().is_multiple_of(self.batch) {
            return bad(format!("batch size {} must divide n = {}", self.batch, self.n()));
        }
        if self.alpha.raw() < 0 || !self.grid.contains(self.alpha.raw()) {
            return bad(format!("step size raw {} must be a non-negative grid value", self.alpha.raw()));
        }
        let zero = Rational::from_integer(0);
        let one = Rational::from_integer(1);
        if self.epsilon < zero || self.epsilon > one {
            return bad(format!("epsilon {} outside [0, 1]", self.epsilon));
        }
        if self.beta_prime < zero {
            return bad(format!("beta' {} is negative", self.beta_prime));
        }
        if self.data.n > u32::MAX as usize {
            return bad("n too large".into());
        }
        Ok(())
    }

    /// Full validation, including `α·L < 1`. Logistic models use the
    /// guaranteed constant; hidden-layer models only have a sampled one.
    pub fn validate(&self, data: &Dataset) -> Result<StepBound, EngineError> {
        self.check_shape()?;
        if data.len() != self.n() || data.p() != self.data.p {
            return Err(EngineError::Config(format!(
                "dataset has n={}, p={} but the config says n={}, p={}",
                data.len(),
                data.p(),
                self.n(),
                self.data.p
            )));
        }
        let (l, analytic) = match analytic_smoothness(self.kind, data) {
            Some(l) => (l, true),
            None => {
                let m = Model::initial(self.kind, data.p(), self.grid, self.seed);
                let est = estimate_smoothness(&m, data, 1000, self.seed)?;
                (est.l_empirical, false)
            }
        };
        let alpha_l = self.alpha_f64() * l;
        if alpha_l >= 1.0 {
            return Err(EngineError::Config(format!(
                "alpha·L = {alpha_l} must be below 1 (alpha = {}, L = {l})",
                self.alpha_f64()
            )));
        }
        Ok(StepBound {
            l,
            analytic,
            alpha_l,
        })
    }
}

/// Parse `"a/b"`, an integer, or a finite decimal like `"0.125"` exactly.
pub fn parse_rational(s: &str) -> Result<Rational, EngineError> {
    let s = s.trim();
    let bad = || EngineError::Config(format!("cannot parse {s:?} as a fraction"));
    if let Some((a, b)) = s.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Rational::new(a, b));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return Err(bad());
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 15 {
        return Err(bad());
    }
    let den = 10i64.pow(frac.len() as u32);
    let int_v: i64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    let num = int_v
        .checked_mul(den)
        .and_then(|v| v.checked_add(frac_v))
        .ok_or_else(bad)?;
    Ok(Rational::new(if neg { -num } else { num }, den))
}

/// Write a fraction as `a/b` in lowest terms.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}
