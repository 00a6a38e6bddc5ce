//! Experiment configuration: structured `key = value` text with dotted
//! sections (TOML), parsed into a normalized struct whose canonical JSON
//! serialization is hashed for reproducibility manifests. Whitespace and
//! comments never affect the hash; any semantically meaningful key does.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{build_custom, BuiltinSpec, DriftField};
use crate::flow::{IntegratorSpec, Scheme};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub lyapunov: Option<LyapunovConfig>,
    #[serde(default)]
    pub gibbs: Option<GibbsConfig>,
    #[serde(default)]
    pub sync: Option<SyncConfig>,
    #[serde(default)]
    pub diam: Option<DiamConfig>,
    #[serde(default)]
    pub pullback: Option<PullbackConfig>,
    #[serde(default)]
    pub cluster: Option<ClusterConfig>,
    #[serde(default)]
    pub check: Option<CheckConfig>,
    #[serde(default)]
    pub control: Option<ControlConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub kind: String,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub params: FieldParams,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldParams {
    /// Polynomial coefficients of g for the radial kind: g(s) = sum c_i s^i.
    #[serde(default)]
    pub g_coeffs: Option<Vec<f64>>,
    /// Row-major matrix A for the linear kind.
    #[serde(default)]
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Per-coordinate drift expressions for the custom kind.
    #[serde(default)]
    pub expr: Option<Vec<String>>,
    /// Declared one-sided Lipschitz constant override.
    #[serde(default)]
    pub one_sided_lambda: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub seed: u64,
    pub delta: f64,
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    /// Optional model-time window [t_min, t_max]; derived from the run
    /// span when absent.
    #[serde(default)]
    pub window: Option<[f64; 2]>,
}

fn default_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: Option<f64>,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::TamedEuler,
            dt: None,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub t0: f64,
    pub t1: f64,
    /// Initial points (list of coordinate lists).
    pub x0: Vec<Vec<f64>>,
    /// Seed-sweep size; per-member seeds derive from noise.seed by the
    /// documented mix.
    pub seeds: usize,
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            t0: 0.0,
            t1: 10.0,
            x0: vec![vec![0.0]],
            seeds: 1,
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct LyapunovConfig {
    pub k: usize,
    pub burn_in: f64,
    pub qr_every: usize,
    pub delta0: f64,
    pub renorm_threshold: f64,
    /// Also run the two-point cross-estimator.
    pub twopoint: bool,
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            k: 1,
            burn_in: -1.0, // negative: default to T/10
            qr_every: 10,
            delta0: 1e-8,
            renorm_threshold: 10.0,
            twopoint: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    #[serde(rename = "box")]
    pub box_: Option<[f64; 2]>,
    pub points_per_axis: Option<usize>,
    pub tail_tol: Option<f64>,
    pub ball_radii: Vec<f64>,
    /// Extra intensities for the ball-mass table (noise.sigma always runs).
    pub sigmas: Vec<f64>,
    /// Max grid points per axis in the emitted density CSV.
    pub plot_points: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            box_: None,
            points_per_axis: None,
            tail_tol: None,
            ball_radii: vec![1.0, 2.0],
            sigmas: Vec::new(),
            plot_points: 257,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SyncConfig {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub n_seeds: usize,
    pub epsilon: f64,
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DiamConfig {
    pub center: Vec<f64>,
    pub radius: f64,
    pub mesh_n: usize,
    pub n_seeds: usize,
    pub epsilon: f64,
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PullbackConfig {
    pub times: Vec<f64>,
    /// Explicit initial points, or none to use `n_init` spread points.
    #[serde(default)]
    pub init: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_n_init")]
    pub n_init: usize,
    /// Box half-width for auto-generated starts (ignored on the circle,
    /// where angles are equally spaced).
    #[serde(default = "default_init_radius")]
    pub init_radius: f64,
    /// Draw the starts from the Gibbs measure instead of a mesh
    /// (gradient-type fields only).
    #[serde(default)]
    pub init_from_gibbs: bool,
}

fn default_n_init() -> usize {
    100
}

fn default_init_radius() -> f64 {
    2.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ClusterConfig {
    /// CSV of points (header x1..xd) to cluster, e.g. a pullback cloud.
    pub input: String,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub circle: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    pub kind: String,
    #[serde(default, rename = "box")]
    pub box_: Option<[f64; 2]>,
    #[serde(default)]
    pub n_pairs: Option<usize>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub z_candidates: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub v: Option<Vec<f64>>,
    #[serde(default)]
    pub z_grid: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    pub mode: String,
    #[serde(default)]
    pub x: Option<Vec<f64>>,
    #[serde(default)]
    pub z: Option<Vec<f64>>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub c_estimate: Option<f64>,
    #[serde(default = "default_mesh_n")]
    pub mesh_n: usize,
}

fn default_mesh_n() -> usize {
    32
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
            key: "config".into(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.noise.delta > 0.0) {
            return Err(Error::Config {
                key: "noise.delta".into(),
                message: format!("delta must be positive, got {}", self.noise.delta),
            });
        }
        if self.noise.sigma < 0.0 {
            return Err(Error::Config {
                key: "noise.sigma".into(),
                message: "sigma must be nonnegative".into(),
            });
        }
        if self.run.t1 < self.run.t0 {
            return Err(Error::Config {
                key: "run.t1".into(),
                message: format!("t1 = {} earlier than t0 = {}", self.run.t1, self.run.t0),
            });
        }
        Ok(())
    }

    /// Build the drift field described by the `[field]` block.
    pub fn build_field(&self) -> Result<DriftField> {
        let f = &self.field;
        let dim = f.dim;
        let spec = match f.kind.as_str() {
            "ou" => BuiltinSpec::Ou { dim: dim_or(dim, "field.dim")? },
            "double_well" => BuiltinSpec::DoubleWell { dim: dim_or(dim, "field.dim")? },
            "v_e" => {
                check_fixed_dim(dim, 2, "v_e")?;
                BuiltinSpec::VE
            }
            "v_s" => {
                check_fixed_dim(dim, 2, "v_s")?;
                BuiltinSpec::VS
            }
            "circle_stratonovich" => {
                check_fixed_dim(dim, 1, "circle_stratonovich")?;
                BuiltinSpec::CircleStratonovich
            }
            "radial_polynomial" => BuiltinSpec::RadialPolynomial {
                dim: dim_or(dim, "field.dim")?,
                g_coeffs: f.params.g_coeffs.clone().ok_or_else(|| Error::Config {
                    key: "field.params.g_coeffs".into(),
                    message: "radial_polynomial needs g_coeffs".into(),
                })?,
            },
            "linear" => {
                let rows = f.params.matrix.clone().ok_or_else(|| Error::Config {
                    key: "field.params.matrix".into(),
                    message: "linear needs a matrix".into(),
                })?;
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Error::Config {
                        key: "field.params.matrix".into(),
                        message: "matrix must be square".into(),
                    });
                }
                let mut a = DMatrix::zeros(n, n);
                for (i, row) in rows.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        a[(i, j)] = *v;
                    }
                }
                BuiltinSpec::Linear { matrix: a }
            }
            "custom" => {
                let exprs = f.params.expr.clone().ok_or_else(|| Error::Config {
                    key: "field.params.expr".into(),
                    message: "custom needs expr".into(),
                })?;
                let d = dim.unwrap_or(exprs.len());
                let mut field = build_custom(d, &exprs)?;
                if let Some(l) = f.params.one_sided_lambda {
                    field = field.with_declared_one_sided(l);
                }
                return Ok(field);
            }
            other => return Err(Error::UnknownKind(other.to_string())),
        };
        let mut field = spec.build()?;
        if let Some(l) = f.params.one_sided_lambda {
            field = field.with_declared_one_sided(l);
        }
        Ok(field)
    }

    /// Integrator spec with dt defaulting to the noise delta.
    pub fn integrator_spec(&self) -> IntegratorSpec {
        IntegratorSpec {
            scheme: self.integrator.scheme,
            dt: self.integrator.dt.unwrap_or(self.noise.delta),
            newton_tol: self.integrator.newton_tol,
            newton_max_iter: self.integrator.newton_max_iter,
        }
    }

    pub fn x0_points(&self, dim: usize) -> Result<Vec<DVector<f64>>> {
        self.run
            .x0
            .iter()
            .map(|p| {
                if p.len() != dim {
                    return Err(Error::Config {
                        key: "run.x0".into(),
                        message: format!("point has {} coordinates, field dim is {dim}", p.len()),
                    });
                }
                Ok(DVector::from_vec(p.clone()))
            })
            .collect()
    }

    /// Canonical hash over the parsed (normalized) configuration. Worker
    /// count is an execution detail, not semantics, and is excluded: the
    /// same experiment at any parallelism hashes identically.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.run.workers = 0;
        let canon = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(canon.as_bytes());
        let mut out = String::with_capacity(64);
        for b in digest {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }
}

fn dim_or(dim: Option<usize>, key: &str) -> Result<usize> {
    dim.ok_or_else(|| Error::Config {
        key: key.into(),
        message: "dimension required for this kind".into(),
    })
}

fn check_fixed_dim(dim: Option<usize>, fixed: usize, kind: &str) -> Result<()> {
    match dim {
        None => Ok(()),
        Some(d) if d == fixed => Ok(()),
        Some(d) => Err(Error::Config {
            key: "field.dim".into(),
            message: format!("{kind} is fixed to dimension {fixed}, got {d}"),
        }),
    }
}
