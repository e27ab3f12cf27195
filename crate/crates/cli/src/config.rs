use std::path::PathBuf;

use lrisp::geometry::{norm, Direction};
use lrisp::potential::{fixtures, Mode, PotentialModel};
use lrisp::reconstruct::PipelineConfig;
use lrisp::symbol::{Cap, OracleConfig, PerturbationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Model given by fixture name (`"p3"`), by name and mode, or as a full document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Name(String),
    Fixture { fixture: String, mode: Mode },
    Doc(PotentialModel),
}

impl ModelSpec {
    pub fn build(&self) -> Result<PotentialModel, CliError> {
        let named =
            |name: &str, mode| fixtures::by_name(name, mode).ok_or_else(|| CliError::config(format!("unknown fixture {name:?} (p1, p2, p3, zero)")));
        match self {
            ModelSpec::Name(n) => named(n, Mode::Cutoff),
            ModelSpec::Fixture { fixture, mode } => named(fixture, *mode),
            ModelSpec::Doc(m) => Ok(m.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub omega: Vec<f64>,
    pub y: Vec<f64>,
}

/// `count` points with `ω` uniform on the sphere and `|y|` log-uniform in `[r_min, r_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomGrid {
    pub count: usize,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForwardGrid {
    pub points: Vec<GridPoint>,
    pub random: Option<RandomGrid>,
}

impl Default for ForwardGrid {
    fn default() -> Self {
        ForwardGrid {
            points: vec![],
            random: Some(RandomGrid {
                count: 10,
                r_min: 1.0,
                r_max: 100.0,
            }),
        }
    }
}

impl ForwardGrid {
    pub fn expand(&self, dim: usize, seed: u64) -> Result<Vec<GridPoint>, CliError> {
        let mut out = self.points.clone();
        if let Some(r) = self.random {
            if !(r.r_min > 0.0 && r.r_max >= r.r_min) {
                return Err(CliError::config("random grid needs 0 < r_min <= r_max"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unit = |rng: &mut ChaCha8Rng| loop {
                let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let n = norm(&v);
                if n > 0.1 && n <= 1.0 {
                    return v.into_iter().map(|c| c / n).collect::<Vec<f64>>();
                }
            };
            for _ in 0..r.count {
                let omega = unit(&mut rng);
                let dir = loop {
                    let v = lrisp::geometry::reject(&unit(&mut rng), &omega);
                    if norm(&v) > 0.1 {
                        break v;
                    }
                };
                let radius = r.r_min * (r.r_max / r.r_min).powf(rng.gen::<f64>());
                let n = norm(&dir);
                out.push(GridPoint {
                    omega,
                    y: dir.iter().map(|c| radius * c / n).collect(),
                });
            }
        }
        for p in &out {
            if p.omega.len() != dim || p.y.len() != dim {
                return Err(CliError::config(format!("grid point {p:?} is not in R^{dim}")));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Quadrature tolerance of forward tables.
    pub phase: f64,
    /// Largest acceptable relative error of a roundtrip.
    pub roundtrip: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            phase: 1e-10,
            roundtrip: 0.02,
        }
    }
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSpec,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "PerturbationSpec::none")]
    pub perturbation: PerturbationSpec,
    #[serde(default)]
    pub gauge: bool,
    #[serde(default)]
    pub cap: Option<Cap>,
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub targets: Vec<Vec<f64>>,
    #[serde(default)]
    pub forward: ForwardGrid,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Overrides the perturbation seed and seeds the random forward grid.
    #[serde(default)]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| CliError::config(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let model = self.model.build()?;
        if !(self.lambda > 0.0) {
            return Err(CliError::config("lambda must be positive"));
        }
        self.pipeline.validate().map_err(CliError::config)?;
        for x in &self.targets {
            if x.len() != model.dim() {
                return Err(CliError::config(format!("target {x:?} is not in R^{}", model.dim())));
            }
            if norm(x) == 0.0 {
                return Err(CliError::config("target x = 0 is not allowed"));
            }
        }
        if let Some(c) = &self.cap {
            Cap::new(Direction::normalize(c.omega0.as_slice()).map_err(CliError::config)?, c.radius).map_err(CliError::config)?;
        }
        if !(self.tolerances.phase > 0.0 && self.tolerances.roundtrip > 0.0) {
            return Err(CliError::config("tolerances must be positive"));
        }
        self.oracle_config().build(&model).map_err(CliError::config)?;
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.perturbation.seed)
    }

    pub fn oracle_config(&self) -> OracleConfig {
        OracleConfig {
            lambda: self.lambda,
            perturbation: PerturbationSpec {
                seed: self.seed(),
                ..self.perturbation
            },
            gauge: self.gauge,
            cap: self.cap.clone(),
        }
    }
}
