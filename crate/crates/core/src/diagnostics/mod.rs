//! Synchronization metrics and constructive checkers for the sufficient
//! conditions: two-point distance statistics, ball-diameter decay, pullback
//! ensembles approximating the statistical equilibrium, cluster counts,
//! one-sided-Lipschitz / monotonicity checkers, and explicit control-path
//! witnesses.
//!
//! Convergence-in-probability statements are reported as per-checkpoint
//! exceedance probabilities with Wilson confidence intervals; the limits
//! themselves are not finitely certifiable and are never claimed.

mod cluster;
mod conditions;
mod control;

pub use cluster::{cluster_count, default_linkage_epsilon, ClusterReport, Metric};
pub use conditions::{
    check_eventual_monotone, check_monotone_on_large_sets, check_one_sided_lipschitz,
    gradient_direction_search, ConditionKind, ConditionReport, Verdict,
};
pub use control::{
    contraction_witness, estimate_contraction_constant, swift_control, ContractionReport,
    SwiftControlReport,
};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::flow::{self, IntegratorSpec};
use crate::noise::{derive_member_seed, WienerPath};
use crate::sampling::ball_mesh;
use crate::stats::{quantile, wilson_interval, WilsonInterval};

/// Distance between states, arc-length on the circle geometry.
pub fn state_distance(field: &DriftField, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    if field.is_circle() {
        Metric::CircleArc.distance(a, b)
    } else {
        (a - b).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuantileSummary {
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub min: f64,
}

impl QuantileSummary {
    fn from_sorted(sorted: &[f64]) -> Self {
        QuantileSummary {
            q05: quantile(sorted, 0.05),
            q25: quantile(sorted, 0.25),
            q50: quantile(sorted, 0.50),
            q75: quantile(sorted, 0.75),
            q95: quantile(sorted, 0.95),
            max: *sorted.last().unwrap(),
            min: sorted[0],
        }
    }
}

/// Ensemble distance statistics per checkpoint.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SyncReport {
    pub checkpoints: Vec<f64>,
    pub distance_quantiles: Vec<QuantileSummary>,
    /// P[d > epsilon] per checkpoint, with Wilson 95% interval.
    pub exceed_prob: Vec<WilsonInterval>,
    pub ensemble_size: usize,
    pub epsilon: f64,
    /// Explosion flags across all members and seeds; reported, never
    /// silently dropped (exploded members freeze and stay in the stats).
    pub explosion_count: usize,
    pub config_hash: Option<String>,
}

impl SyncReport {
    pub fn fraction_below_epsilon_final(&self) -> f64 {
        1.0 - self.exceed_prob.last().expect("nonempty checkpoints").estimate
    }

    fn from_distances(
        checkpoints: &[f64],
        per_seed: &[Vec<f64>],
        epsilon: f64,
        explosion_count: usize,
    ) -> Self {
        let n = per_seed.len();
        let mut distance_quantiles = Vec::with_capacity(checkpoints.len());
        let mut exceed = Vec::with_capacity(checkpoints.len());
        for ci in 0..checkpoints.len() {
            let mut ds: Vec<f64> = per_seed.iter().map(|row| row[ci]).collect();
            ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
            distance_quantiles.push(QuantileSummary::from_sorted(&ds));
            let over = ds.iter().filter(|d| **d > epsilon).count();
            exceed.push(wilson_interval(over, n));
        }
        SyncReport {
            checkpoints: checkpoints.to_vec(),
            distance_quantiles,
            exceed_prob: exceed,
            ensemble_size: n,
            epsilon,
            explosion_count,
            config_hash: None,
        }
    }
}

fn validate_checkpoints(checkpoints: &[f64], t_total: f64, dt: f64) -> Result<Vec<i64>> {
    if checkpoints.is_empty() {
        return Err(Error::Config {
            key: "checkpoints".into(),
            message: "need at least one checkpoint".into(),
        });
    }
    let mut steps = Vec::with_capacity(checkpoints.len());
    let mut last = -1i64;
    for &t in checkpoints {
        if t < 0.0 || t > t_total + 1e-9 {
            return Err(Error::Config {
                key: "checkpoints".into(),
                message: format!("checkpoint {t} outside [0, {t_total}]"),
            });
        }
        let k = (t / dt).round() as i64;
        if ((t - k as f64 * dt).abs()) > 1e-9 * dt.max(t.abs()) {
            return Err(Error::GridAlignment { t, delta: dt });
        }
        if k <= last {
            return Err(Error::Config {
                key: "checkpoints".into(),
                message: "checkpoints must be strictly increasing".into(),
            });
        }
        steps.push(k);
        last = k;
    }
    Ok(steps)
}

/// Evolve a set of members under one shared path, capturing states at the
/// checkpoint steps. Returns (per-member per-checkpoint states, explosions).
fn evolve_members_checkpointed(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    members: &[DVector<f64>],
    t_total: f64,
    checkpoint_steps: &[i64],
) -> Result<(Vec<Vec<DVector<f64>>>, usize)> {
    let mut rows = Vec::with_capacity(members.len());
    let mut explosions = 0;
    for x0 in members {
        let mut row = Vec::with_capacity(checkpoint_steps.len());
        if checkpoint_steps.first() == Some(&0) {
            row.push(x0.clone());
        }
        let want: Vec<i64> = checkpoint_steps.to_vec();
        let (_, explosion) =
            flow::evolve_observe(field, ispec, sigma, path, x0, 0.0, t_total, |step, _t, x| {
                if want.binary_search(&(step as i64)).is_ok() {
                    row.push(x.clone());
                }
            })?;
        if explosion.is_some() {
            explosions += 1;
        }
        debug_assert_eq!(row.len(), checkpoint_steps.len());
        rows.push(row);
    }
    Ok((rows, explosions))
}

/// Two starts driven by the same noise, across an ensemble of seeds:
/// per-checkpoint distance quantiles and exceedance probabilities.
#[allow(clippy::too_many_arguments)]
pub fn two_point_sync(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    x: &DVector<f64>,
    y: &DVector<f64>,
    t_total: f64,
    n_seeds: usize,
    base_seed: u64,
    checkpoints: &[f64],
    epsilon: f64,
) -> Result<SyncReport> {
    if n_seeds < 30 {
        return Err(Error::Config {
            key: "sync.n_seeds".into(),
            message: format!("need >= 30 seeds for interval validity, got {n_seeds}"),
        });
    }
    let steps = validate_checkpoints(checkpoints, t_total, ispec.dt)?;
    let n_steps = (t_total / ispec.dt).round() as i64;
    let results: Vec<Result<(Vec<f64>, usize)>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = derive_member_seed(base_seed, i as u64);
            let path = WienerPath::sample(seed, field.noise_dim(), ispec.dt, (0, n_steps))?;
            let (rows, expl) = evolve_members_checkpointed(
                field,
                ispec,
                sigma,
                &path,
                &[x.clone(), y.clone()],
                t_total,
                &steps,
            )?;
            let dists = (0..steps.len())
                .map(|ci| state_distance(field, &rows[0][ci], &rows[1][ci]))
                .collect();
            Ok((dists, expl))
        })
        .collect();
    let mut per_seed = Vec::with_capacity(n_seeds);
    let mut explosions = 0;
    for r in results {
        let (d, e) = r?;
        per_seed.push(d);
        explosions += e;
    }
    Ok(SyncReport::from_distances(checkpoints, &per_seed, epsilon, explosions))
}

/// Diameter of the image of a ball mesh under the flow, per checkpoint per
/// seed. The mesh covers the sphere and interior of B(center, radius) by
/// the documented low-discrepancy rule in [`crate::sampling::ball_mesh`].
#[allow(clippy::too_many_arguments)]
pub fn ball_diameter(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    center: &DVector<f64>,
    radius: f64,
    mesh_n: usize,
    t_total: f64,
    n_seeds: usize,
    base_seed: u64,
    checkpoints: &[f64],
    epsilon: f64,
) -> Result<SyncReport> {
    if mesh_n == 0 {
        return Err(Error::Config {
            key: "diam.mesh_n".into(),
            message: "mesh must be nonempty".into(),
        });
    }
    let steps = validate_checkpoints(checkpoints, t_total, ispec.dt)?;
    let n_steps = (t_total / ispec.dt).round() as i64;
    let mesh = ball_mesh(center, radius, mesh_n, base_seed);
    let results: Vec<Result<(Vec<f64>, usize)>> = (0..n_seeds)
        .into_par_iter()
        .map(|i| {
            let seed = derive_member_seed(base_seed, i as u64);
            let path = WienerPath::sample(seed, field.noise_dim(), ispec.dt, (0, n_steps))?;
            let (rows, expl) =
                evolve_members_checkpointed(field, ispec, sigma, &path, &mesh, t_total, &steps)?;
            let diams = (0..steps.len())
                .map(|ci| {
                    let mut max_d: f64 = 0.0;
                    for a in 0..mesh.len() {
                        for b in (a + 1)..mesh.len() {
                            max_d = max_d.max(state_distance(field, &rows[a][ci], &rows[b][ci]));
                        }
                    }
                    max_d
                })
                .collect();
            Ok((diams, expl))
        })
        .collect();
    let mut per_seed = Vec::with_capacity(n_seeds);
    let mut explosions = 0;
    for r in results {
        let (d, e) = r?;
        per_seed.push(d);
        explosions += e;
    }
    Ok(SyncReport::from_distances(checkpoints, &per_seed, epsilon, explosions))
}

/// Endpoints φ_t(θ_{-t}ω, x) for one fixed ω, every initial point, every t:
/// the empirical approximation of the statistical equilibrium μ_ω.
#[derive(Debug, Clone)]
pub struct PullbackEnsemble {
    pub times: Vec<f64>,
    /// clouds[ti][member]
    pub clouds: Vec<Vec<DVector<f64>>>,
    pub explosion_count: usize,
}

pub fn pullback_ensemble(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    seed: u64,
    init: &[DVector<f64>],
    t_list: &[f64],
) -> Result<PullbackEnsemble> {
    if init.is_empty() || t_list.is_empty() {
        return Err(Error::Config {
            key: "pullback".into(),
            message: "need at least one initial point and one time".into(),
        });
    }
    let dt = ispec.dt;
    let max_t = t_list.iter().cloned().fold(0.0f64, f64::max);
    let k_back = (max_t / dt).round() as i64;
    let path = WienerPath::sample(seed, field.noise_dim(), dt, (-k_back, 1))?;
    let per_member: Vec<Result<Vec<(DVector<f64>, bool)>>> = init
        .par_iter()
        .map(|x0| {
            t_list
                .iter()
                .map(|&t| {
                    let end = flow::pullback_evolve(field, ispec, sigma, &path, x0, t)?;
                    Ok((end.state, end.explosion.is_some()))
                })
                .collect()
        })
        .collect();
    let mut clouds = vec![Vec::with_capacity(init.len()); t_list.len()];
    let mut explosions = 0;
    for row in per_member {
        let row = row?;
        for (ti, (state, exploded)) in row.into_iter().enumerate() {
            if exploded {
                explosions += 1;
            }
            clouds[ti].push(state);
        }
    }
    Ok(PullbackEnsemble {
        times: t_list.to_vec(),
        clouds,
        explosion_count: explosions,
    })
}
