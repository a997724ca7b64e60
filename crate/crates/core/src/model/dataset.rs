//! Synthetic binary datasets on the fixed-point grid, and their text format.

use std::fmt::Write as _;
use std::str::FromStr;

use super::ModelError;
use crate::numerics::{FixedVector, Grid, Saturation};
use crate::rng::{gaussian, uniform, StreamRng, WordSource};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Element {
    pub id: u32,
    pub label: bool,
    pub features: FixedVector,
}

/// Named generator families.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// Uniform points in `[−1, 1]^p`, labelled by a random hyperplane through
    /// the origin, keeping only points at distance ≥ `margin` from it.
    Separable { margin: f64 },
    /// Two classes centred at `±margin·u` for a random unit `u`, with
    /// isotropic noise of standard deviation `sigma`.
    TwoGaussians { sigma: f64, margin: f64 },
    /// Uniform points with independent fair-coin labels.
    RandomLabels,
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::Separable { .. } => "separable",
            Family::TwoGaussians { .. } => "gaussians",
            Family::RandomLabels => "random",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn describe(&self) -> String {
        match self.family {
            Family::Separable { margin } => format!(
                "separable(n={}, p={}, margin={margin}, seed={})",
                self.n, self.p, self.seed
            ),
            Family::TwoGaussians { sigma, margin } => format!(
                "gaussians(n={}, p={}, sigma={sigma}, margin={margin}, seed={})",
                self.n, self.p, self.seed
            ),
            Family::RandomLabels => {
                format!("random(n={}, p={}, seed={})", self.n, self.p, self.seed)
            }
        }
    }
}

/// The form accepted by `from_str`, with every parameter spelled out.
impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Family::Separable { margin } => write!(f, "separable:{margin}"),
            Family::TwoGaussians { sigma, margin } => write!(f, "gaussians:{sigma}:{margin}"),
            Family::RandomLabels => write!(f, "random"),
        }
    }
}

impl FromStr for Family {
    type Err = ModelError;

    /// `separable`, `separable:0.1`, `gaussians:0.3`, `gaussians:0.3:0.5`,
    /// `random`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or("");
        let nums: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| ModelError::Config(format!("bad number {p:?} in family {s:?}")))
            })
            .collect::<Result<_, _>>()?;
        let fam = match (name, nums.as_slice()) {
            ("separable", []) => Family::Separable { margin: 0.1 },
            ("separable", [m]) => Family::Separable { margin: *m },
            ("gaussians", [sigma]) => Family::TwoGaussians {
                sigma: *sigma,
                margin: 0.5,
            },
            ("gaussians", [sigma, m]) => Family::TwoGaussians {
                sigma: *sigma,
                margin: *m,
            },
            ("random", []) => Family::RandomLabels,
            _ => return Err(ModelError::UnknownFamily(s.to_string())),
        };
        Ok(fam)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    elements: Vec<Element>,
    grid: Grid,
    p: usize,
    description: String,
}

impl Dataset {
    /// Build from elements whose ids are exactly `0..n` in order.
    pub fn new(
        elements: Vec<Element>,
        grid: Grid,
        p: usize,
        description: String,
    ) -> Result<Self, ModelError> {
        if elements.is_empty() {
            return Err(ModelError::Config("dataset is empty".into()));
        }
        for (i, e) in elements.iter().enumerate() {
            if e.id as usize != i {
                return Err(ModelError::Config(format!(
                    "element at position {i} has id {}",
                    e.id
                )));
            }
            if e.features.len() != p {
                return Err(ModelError::Config(format!(
                    "element {} has {} features, expected {p}",
                    e.id,
                    e.features.len()
                )));
            }
            if !e.features.raw().all(|r| grid.contains(r)) {
                return Err(ModelError::Config(format!("element {} is off the grid", e.id)));
            }
        }
        Ok(Dataset {
            elements,
            grid,
            p,
            description,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn get(&self, id: u32) -> Option<&Element> {
        self.elements.get(id as usize)
    }

    /// Elements for a list of ids.
    pub fn select(&self, ids: &[u32]) -> Result<Vec<&Element>, ModelError> {
        ids.iter()
            .map(|&id| self.get(id).ok_or(ModelError::UnknownId(id)))
            .collect()
    }

    pub fn ids(&self) -> Vec<u32> {
        (0..self.len() as u32).collect()
    }

    /// Text form: a header `n=<n> p=<p> s=<s>`, then `id<TAB>label<TAB>f1,f2,…`
    /// with raw mantissas.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} p={} s={}\n", self.len(), self.p, self.grid.scale());
        for e in &self.elements {
            let feats: Vec<String> = e.features.raw().map(|r| r.to_string()).collect();
            writeln!(out, "{}\t{}\t{}", e.id, e.label as u8, feats.join(",")).expect("string");
        }
        out
    }

    /// Parse the text form. The clip radius is not part of the format.
    pub fn from_text(text: &str, clip: i64) -> Result<Self, ModelError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| ModelError::Format("missing header".into()))?;
        let mut n = None;
        let mut p = None;
        let mut s = None;
        for field in header.split_whitespace() {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| ModelError::Format(format!("bad header field {field:?}")))?;
            let v: u64 = v
                .parse()
                .map_err(|_| ModelError::Format(format!("bad header value {field:?}")))?;
            match k {
                "n" => n = Some(v as usize),
                "p" => p = Some(v as usize),
                "s" => s = Some(v as u32),
                _ => return Err(ModelError::Format(format!("unknown header key {k:?}"))),
            }
        }
        let (n, p, s) = match (n, p, s) {
            (Some(n), Some(p), Some(s)) => (n, p, s),
            _ => return Err(ModelError::Format("header needs n, p and s".into())),
        };
        let grid = Grid::new(s, clip).map_err(|e| ModelError::Config(e.to_string()))?;
        let mut elements = Vec::with_capacity(n);
        for (lineno, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || ModelError::Format(format!("line {}: {line:?}", lineno + 2));
            let mut cols = line.split('\t');
            let id: u32 = cols.next().and_then(|c| c.parse().ok()).ok_or_else(bad)?;
            let label = match cols.next() {
                Some("0") => false,
                Some("1") => true,
                _ => return Err(bad()),
            };
            let feats = cols.next().ok_or_else(bad)?;
            let raw: Vec<i64> = if feats.is_empty() {
                Vec::new()
            } else {
                feats
                    .split(',')
                    .map(|f| f.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            };
            if cols.next().is_some() {
                return Err(bad());
            }
            elements.push(Element {
                id,
                label,
                features: FixedVector::from_raw(raw),
            });
        }
        if elements.len() != n {
            return Err(ModelError::Format(format!(
                "header says {n} elements, found {}",
                elements.len()
            )));
        }
        Dataset::new(elements, grid, p, "loaded".into())
    }
}

fn unit_vector(rng: &mut StreamRng, p: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| gaussian(rng).expect("infinite")).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-3 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn quantize(grid: Grid, v: &[f64]) -> Result<FixedVector, ModelError> {
    let mut sat = Saturation::default();
    let q = FixedVector::from_raw(v.iter().map(|&x| grid.from_f64(x, &mut sat).raw()));
    if sat.raised() {
        return Err(ModelError::Saturation("generated features exceed the clip radius".into()));
    }
    Ok(q)
}

/// Deterministic dataset for a spec.
pub fn generate_dataset(spec: &GeneratorSpec, grid: Grid) -> Result<Dataset, ModelError> {
    if spec.n == 0 || spec.p == 0 {
        return Err(ModelError::Config("need n ≥ 1 and p ≥ 1".into()));
    }
    if spec.n > u32::MAX as usize {
        return Err(ModelError::Config("n too large".into()));
    }
    let mut rng = StreamRng::new(spec.seed, 0x6461_7461);
    let unif = |rng: &mut StreamRng| 2.0 * uniform(rng).expect("infinite") - 1.0;
    let mut elements = Vec::with_capacity(spec.n);
    match spec.family {
        Family::Separable { margin } => {
            if !(0.0..1.0).contains(&margin) {
                return Err(ModelError::Config(format!("margin {margin} outside [0, 1)")));
            }
            let w = unit_vector(&mut rng, spec.p);
            let mut tries = 0u64;
            while elements.len() < spec.n {
                tries += 1;
                if tries > 1000 * spec.n as u64 + 10_000 {
                    return Err(ModelError::Config(format!(
                        "margin {margin} too large to fill the dataset"
                    )));
                }
                let x: Vec<f64> = (0..spec.p).map(|_| unif(&mut rng)).collect();
                let q = quantize(grid, &x)?;
                // Margin is measured on the quantized point.
                let m: f64 = q.raw().zip(&w).map(|(r, wi)| r as f64 * wi).sum::<f64>()
                    / grid.one_raw() as f64;
                if m.abs() < margin || m == 0.0 {
                    continue;
                }
                elements.push(Element {
                    id: elements.len() as u32,
                    label: m > 0.0,
                    features: q,
                });
            }
        }
        Family::TwoGaussians { sigma, margin } => {
            if sigma < 0.0 || !sigma.is_finite() || margin <= 0.0 {
                return Err(ModelError::Config(format!(
                    "gaussians need sigma ≥ 0 and margin > 0, got {sigma}, {margin}"
                )));
            }
            let u = unit_vector(&mut rng, spec.p);
            for id in 0..spec.n {
                let label = rng.next_word().expect("infinite") >> 63 == 1;
                let sign = if label { 1.0 } else { -1.0 };
                let x: Vec<f64> = u
                    .iter()
                    .map(|ui| {
                        let noise = if sigma == 0.0 {
                            0.0
                        } else {
                            sigma * gaussian(&mut rng).expect("infinite")
                        };
                        sign * margin * ui + noise
                    })
                    .collect();
                elements.push(Element {
                    id: id as u32,
                    label,
                    features: quantize(grid, &x)?,
                });
            }
        }
        Family::RandomLabels => {
            for id in 0..spec.n {
                let x: Vec<f64> = (0..spec.p).map(|_| unif(&mut rng)).collect();
                let label = rng.next_word().expect("infinite") >> 63 == 1;
                elements.push(Element {
                    id: id as u32,
                    label,
                    features: quantize(grid, &x)?,
                });
            }
        }
    }
    Dataset::new(elements, grid, spec.p, spec.describe())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        Grid::new(16, 64).unwrap()
    }

    #[test]
    fn deterministic() {
        let spec = GeneratorSpec {
            family: Family::RandomLabels,
            n: 64,
            p: 3,
            seed: 1,
        };
        assert_eq!(
            generate_dataset(&spec, grid()).unwrap(),
            generate_dataset(&spec, grid()).unwrap()
        );
        let other = GeneratorSpec { seed: 2, ..spec };
        assert_ne!(
            generate_dataset(&spec, grid()).unwrap().elements(),
            generate_dataset(&other, grid()).unwrap().elements()
        );
    }

    #[test]
    fn text_round_trip() {
        let spec = GeneratorSpec {
            family: Family::TwoGaussians {
                sigma: 0.3,
                margin: 0.5,
            },
            n: 20,
            p: 2,
            seed: 4,
        };
        let d = generate_dataset(&spec, grid()).unwrap();
        let text = d.to_text();
        assert!(text.starts_with("n=20 p=2 s=16\n"));
        let back = Dataset::from_text(&text, 64).unwrap();
        assert_eq!(back.elements(), d.elements());
        assert!(Dataset::from_text("n=2 p=1 s=16\n0\t1\t5\n", 64).is_err());
        assert!(Dataset::from_text("n=1 p=1 s=16\n0\t2\t5\n", 64).is_err());
    }

    #[test]
    fn family_names_parse() {
        assert_eq!(
            "separable:0.2".parse::<Family>().unwrap(),
            Family::Separable { margin: 0.2 }
        );
        assert_eq!("random".parse::<Family>().unwrap(), Family::RandomLabels);
        assert!("spiral".parse::<Family>().is_err());
        assert!("gaussians".parse::<Family>().is_err());
    }

    #[test]
    fn inconsistent_parameters() {
        let spec = GeneratorSpec {
            family: Family::Separable { margin: 1.5 },
            n: 4,
            p: 1,
            seed: 0,
        };
        assert!(generate_dataset(&spec, grid()).is_err());
        let spec = GeneratorSpec {
            family: Family::RandomLabels,
            n: 0,
            p: 1,
            seed: 0,
        };
        assert!(generate_dataset(&spec, grid()).is_err());
    }
}
