//! Experiment configuration as flat `key=value` text.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::HarnessError;
use crate::engine::{format_rational, parse_rational, RunConfig};
use crate::epoch_codec::Mode;
use crate::model::{Family, GeneratorSpec, ModelKind};
use crate::numerics::{FixedScalar, Grid};
use crate::Rational;

/// Which verification suites to run alongside the experiment.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Suites {
    pub hoeffding: bool,
    pub inequalities: bool,
}

impl Suites {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let mut out = Suites::default();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "none" => {}
                "hoeffding" => out.hoeffding = true,
                "inequalities" => out.inequalities = true,
                "all" => {
                    out.hoeffding = true;
                    out.inequalities = true;
                }
                _ => return Err(HarnessError::Config(format!("unknown suite {part:?}"))),
            }
        }
        Ok(out)
    }

    pub fn name(&self) -> &'static str {
        match (self.hoeffding, self.inequalities) {
            (false, false) => "none",
            (true, false) => "hoeffding",
            (false, true) => "inequalities",
            (true, true) => "all",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub run: RunConfig,
    pub replications: usize,
    pub mode: Mode,
    pub out_dir: PathBuf,
    pub suites: Suites,
    /// Trials per configuration of the Hoeffding suite.
    pub hoeffding_trials: u64,
}

/// Keys in manifest order.
pub const KEYS: [&str; 18] = [
    "family",
    "n",
    "p",
    "data_seed",
    "model",
    "batch",
    "alpha",
    "epsilon",
    "beta_prime",
    "seed",
    "max_epochs",
    "scale",
    "clip",
    "replications",
    "mode",
    "out",
    "suites",
    "hoeffding_trials",
];

impl Default for ExperimentSpec {
    /// Separable logistic regression in 8 dimensions that reaches `1 − ε`
    /// after about a dozen epochs.
    fn default() -> Self {
        ExperimentSpec {
            run: RunConfig {
                data: GeneratorSpec {
                    family: Family::Separable { margin: 0.05 },
                    n: 64,
                    p: 8,
                    seed: 3,
                },
                kind: ModelKind::Logistic { bias: false },
                batch: 8,
                alpha: FixedScalar::from_raw(1 << 14),
                epsilon: Rational::new(1, 100),
                beta_prime: Rational::new(1, 2),
                seed: 3,
                max_epochs: 50,
                grid: Grid::new(16, 64).expect("valid grid"),
            },
            replications: 1,
            mode: Mode::Accounting,
            out_dir: PathBuf::from("out"),
            suites: Suites::default(),
            hoeffding_trials: 1_000_000,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, HarnessError> {
    v.trim()
        .parse()
        .map_err(|_| HarnessError::Config(format!("{key}: cannot parse {v:?}")))
}

impl ExperimentSpec {
    /// Step size as a fraction.
    pub fn alpha(&self) -> Rational {
        Rational::new(self.run.alpha.raw(), 1i64 << self.run.grid.scale())
    }

    /// Set one key. `alpha` must be a grid value at the current `scale`, so
    /// set `scale` first when both change.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), HarnessError> {
        let v = value.trim();
        let r = &mut self.run;
        match key {
            "family" => r.data.family = v.parse::<Family>()?,
            "n" => r.data.n = num(key, v)?,
            "p" => r.data.p = num(key, v)?,
            "data_seed" => r.data.seed = num(key, v)?,
            "model" => r.kind = v.parse::<ModelKind>()?,
            "batch" => r.batch = num(key, v)?,
            "alpha" => {
                let a = parse_rational(v)?;
                let scaled = a * Rational::from_integer(1i64 << r.grid.scale());
                if !scaled.is_integer() {
                    return Err(HarnessError::Config(format!(
                        "alpha {v} is not a multiple of 2^-{}",
                        r.grid.scale()
                    )));
                }
                r.alpha = FixedScalar::from_raw(scaled.to_integer());
            }
            "epsilon" => r.epsilon = parse_rational(v)?,
            "beta_prime" => r.beta_prime = parse_rational(v)?,
            "seed" => r.seed = num(key, v)?,
            "max_epochs" => r.max_epochs = num(key, v)?,
            "scale" | "clip" => {
                let alpha = Rational::new(r.alpha.raw(), 1i64 << r.grid.scale());
                let (scale, clip) = if key == "scale" {
                    (num(key, v)?, r.grid.clip())
                } else {
                    (r.grid.scale(), num(key, v)?)
                };
                r.grid = Grid::new(scale, clip).map_err(|e| HarnessError::Config(e.to_string()))?;
                // Keep α when it is still on the grid, otherwise demand a new one.
                let scaled = alpha * Rational::from_integer(1i64 << scale);
                r.alpha = FixedScalar::from_raw(if scaled.is_integer() { scaled.to_integer() } else { -1 });
            }
            "replications" => self.replications = num(key, v)?,
            "mode" => self.mode = v.parse()?,
            "out" => self.out_dir = PathBuf::from(v),
            "suites" => self.suites = Suites::parse(v)?,
            "hoeffding_trials" => self.hoeffding_trials = num(key, v)?,
            _ => return Err(HarnessError::Config(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply `key=value` lines; blank lines and `#` comments are ignored.
    /// `scale` is applied before `alpha` whatever the line order.
    pub fn apply_text(&mut self, text: &str) -> Result<(), HarnessError> {
        let mut pairs = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| HarnessError::Config(format!("line {}: expected key=value", no + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        self.apply_pairs(&pairs)
    }

    pub fn apply_pairs(&mut self, pairs: &[(String, String)]) -> Result<(), HarnessError> {
        let rank = |k: &str| match k {
            "scale" => 0,
            "alpha" => 2,
            _ => 1,
        };
        let mut sorted: Vec<&(String, String)> = pairs.iter().collect();
        sorted.sort_by_key(|(k, _)| rank(k));
        for (k, v) in sorted {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self, HarnessError> {
        let mut spec = ExperimentSpec::default();
        spec.apply_text(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Every key, one per line, in a form `from_text` reads back.
    pub fn to_manifest(&self) -> String {
        let r = &self.run;
        let mut out = String::new();
        let values = [
            r.data.family.to_string(),
            r.data.n.to_string(),
            r.data.p.to_string(),
            r.data.seed.to_string(),
            r.kind.name(),
            r.batch.to_string(),
            format_rational(&self.alpha()),
            format_rational(&r.epsilon),
            format_rational(&r.beta_prime),
            r.seed.to_string(),
            r.max_epochs.to_string(),
            r.grid.scale().to_string(),
            r.grid.clip().to_string(),
            self.replications.to_string(),
            self.mode.name().to_string(),
            self.out_dir.display().to_string(),
            self.suites.name().to_string(),
            self.hoeffding_trials.to_string(),
        ];
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(out, "{k}={v}").expect("string");
        }
        out
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.run.alpha.raw() < 0 {
            return bad(format!(
                "alpha is not a grid value at scale {}; set it again",
                self.run.grid.scale()
            ));
        }
        self.run.check_shape()?;
        if self.mode == Mode::Strict {
            let (n, d, s) = (self.run.n(), self.run.d(), self.run.grid.scale());
            if n > 64 || d > 2 || s > 8 {
                return bad(format!("strict mode needs n ≤ 64, d ≤ 2, s ≤ 8 (got n={n}, d={d}, s={s})"));
            }
        }
        Ok(())
    }

    /// The run configuration of replication `r`: both seeds shifted by `r`.
    pub fn replication(&self, r: usize) -> RunConfig {
        let mut cfg = self.run.clone();
        cfg.seed = cfg.seed.wrapping_add(r as u64);
        cfg.data.seed = cfg.data.seed.wrapping_add(r as u64);
        cfg
    }
}
