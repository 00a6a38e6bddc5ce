//! Numerical cocycle φ_t(ω, x): SDE integrators sharing one noise path
//! across initial conditions, the variational (tangent) flow, and pullback
//! evaluation.
//!
//! The integrator step equals the noise grid step (no sub-stepping), which
//! keeps the discrete cocycle identity
//! φ_{t+s}(ω, x) = φ_t(θ_s ω, φ_s(ω, x)) exact to the bit: both sides apply
//! the identical float operations to bitwise-identical increments.
//!
//! Schemes: plain Euler-Maruyama, tamed Euler (drift increment divided by
//! 1 + dt|b|, the default for superlinearly growing drifts like the double
//! well), and a split-step implicit scheme (drift substep solved by Newton)
//! for stiffness studies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::noise::WienerPath;

/// States whose norm exceeds this are frozen and flagged as exploded.
pub const EXPLOSION_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    EulerMaruyama,
    TamedEuler,
    SplitStepImplicit,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::TamedEuler => "tamed_euler",
            Scheme::SplitStepImplicit => "split_step_implicit",
        };
        write!(f, "{s}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorSpec {
    pub scheme: Scheme,
    pub dt: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
}

impl IntegratorSpec {
    pub fn new(scheme: Scheme, dt: f64) -> Self {
        IntegratorSpec {
            scheme,
            dt,
            newton_tol: 1e-12,
            newton_max_iter: 50,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Config {
                key: "integrator.dt".into(),
                message: format!("dt must be positive, got {}", self.dt),
            });
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::Config {
                key: "integrator.newton_tol".into(),
                message: "newton_tol must be positive".into(),
            });
        }
        Ok(())
    }

    fn check_matches(&self, path: &WienerPath) -> Result<()> {
        self.validate()?;
        if (self.dt - path.delta()).abs() > 1e-12 * path.delta() {
            return Err(Error::Config {
                key: "integrator.dt".into(),
                message: format!(
                    "dt = {} must equal the noise delta = {} (sub-stepping is not supported)",
                    self.dt,
                    path.delta()
                ),
            });
        }
        Ok(())
    }
}

impl Default for IntegratorSpec {
    fn default() -> Self {
        IntegratorSpec::new(Scheme::TamedEuler, 1e-3)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ExplosionEvent {
    pub step: usize,
    pub t: f64,
}

/// A simulated path of the state, with provenance.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// (seed, origin_offset) of the driving path.
    pub path_id: (u64, i64),
    pub explosion: Option<ExplosionEvent>,
}

impl Trajectory {
    pub fn end(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory has at least the initial state")
    }
}

/// Endpoint of one ensemble member.
#[derive(Debug, Clone)]
pub struct Endpoint {
    pub state: DVector<f64>,
    pub explosion: Option<ExplosionEvent>,
}

fn check_state(field: &DriftField, x: &DVector<f64>) -> Result<()> {
    if x.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: x.len() });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericRange("non-finite initial state".into()));
    }
    Ok(())
}

/// Solve y = x + dt b(y) by Newton's method using the field Jacobian.
fn implicit_drift_solve(
    field: &DriftField,
    spec: &IntegratorSpec,
    x: &DVector<f64>,
    step_idx: usize,
) -> Result<DVector<f64>> {
    let dt = spec.dt;
    let d = field.dim();
    let mut y = x.clone();
    let mut residual = f64::INFINITY;
    for _it in 0..spec.newton_max_iter {
        let f = &y - field.drift_raw(&y) * dt - x;
        residual = f.norm();
        if residual <= spec.newton_tol {
            return Ok(y);
        }
        if !residual.is_finite() {
            break;
        }
        let j = DMatrix::identity(d, d) - field.eval_jacobian(&y)? * dt;
        let delta = j
            .lu()
            .solve(&(-&f))
            .ok_or_else(|| Error::NewtonDiverged {
                step: step_idx,
                iters: spec.newton_max_iter,
                residual,
            })?;
        y += delta;
    }
    Err(Error::NewtonDiverged {
        step: step_idx,
        iters: spec.newton_max_iter,
        residual,
    })
}

/// Drift part of one step (everything except the noise increment).
fn drift_update(
    field: &DriftField,
    spec: &IntegratorSpec,
    x: &DVector<f64>,
    step_idx: usize,
) -> Result<DVector<f64>> {
    let dt = spec.dt;
    match spec.scheme {
        Scheme::EulerMaruyama => Ok(x + field.drift_raw(x) * dt),
        Scheme::TamedEuler => {
            let b = field.drift_raw(x);
            let tame = 1.0 + dt * b.norm();
            Ok(x + b * (dt / tame))
        }
        Scheme::SplitStepImplicit => implicit_drift_solve(field, spec, x, step_idx),
    }
}

/// One integrator step x -> x'. For circle fields the Itô-corrected drift
/// and the state-dependent diffusion row are applied and the angle wraps
/// into [0, 2π).
pub fn step(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    x: &DVector<f64>,
    dw: &DVector<f64>,
) -> Result<DVector<f64>> {
    spec.validate()?;
    check_state(field, x)?;
    step_inner(field, spec, sigma, x, dw, 0)
}

fn step_inner(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    x: &DVector<f64>,
    dw: &DVector<f64>,
    step_idx: usize,
) -> Result<DVector<f64>> {
    if let Some(circle) = field.circle_diffusion() {
        if dw.len() != circle.noise_dim() {
            return Err(Error::DimensionMismatch { expected: circle.noise_dim(), got: dw.len() });
        }
        let alpha = x[0];
        // Itô form: base drift plus sigma² · (Stratonovich correction).
        let drift = field.drift_raw(x)[0] + sigma * sigma * circle.ito_correction(alpha);
        let mut noise = 0.0;
        for k in 0..circle.noise_dim() {
            noise += circle.sigma(k, alpha) * dw[k];
        }
        let next = alpha + spec.dt * drift + sigma * noise;
        return Ok(DVector::from_vec(vec![next.rem_euclid(std::f64::consts::TAU)]));
    }
    if dw.len() != field.dim() {
        return Err(Error::DimensionMismatch { expected: field.dim(), got: dw.len() });
    }
    let y = drift_update(field, spec, x, step_idx)?;
    Ok(y + dw * sigma)
}

/// Core loop shared by all evolution entry points. `observe` is called as
/// observe(step_count, t, state) after every step; step_count starts at 1.
pub(crate) fn evolve_observe(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
    mut observe: impl FnMut(usize, f64, &DVector<f64>),
) -> Result<(DVector<f64>, Option<ExplosionEvent>)> {
    spec.check_matches(path)?;
    check_state(field, x0)?;
    if path.dim() != field.noise_dim() {
        return Err(Error::DimensionMismatch { expected: field.noise_dim(), got: path.dim() });
    }
    let k0 = path.index_of(t0)?;
    let k1 = path.index_of(t1)?;
    if k1 < k0 {
        return Err(Error::InvalidWindow(format!("t1 = {t1} earlier than t0 = {t0}")));
    }
    let (w_min, w_max) = path.window();
    if k0 < w_min || k1 > w_max {
        return Err(Error::WindowViolation {
            index: if k0 < w_min { k0 } else { k1 },
            k_min: w_min,
            k_max: w_max,
        });
    }
    let delta = path.delta();
    let mut x = x0.clone();
    let mut explosion = None;
    for (count, k) in (k0..k1).enumerate() {
        let t_next = t0 + (count as f64 + 1.0) * delta;
        if explosion.is_none() {
            let dw = path.increment_unchecked(k);
            match step_inner(field, spec, sigma, &x, &dw, count) {
                Ok(next) => {
                    if next.iter().any(|v| !v.is_finite()) || next.norm() > EXPLOSION_NORM {
                        explosion = Some(ExplosionEvent { step: count + 1, t: t_next });
                        // State freezes at its last finite value.
                    } else {
                        x = next;
                    }
                }
                Err(Error::NewtonDiverged { .. }) | Err(Error::NumericRange(_)) => {
                    explosion = Some(ExplosionEvent { step: count + 1, t: t_next });
                }
                Err(e) => return Err(e),
            }
        }
        observe(count + 1, t_next, &x);
    }
    Ok((x, explosion))
}

/// Integrate from t0 to t1 recording every grid state.
pub fn evolve(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
) -> Result<Trajectory> {
    let mut times = vec![t0];
    let mut states = vec![x0.clone()];
    let (_, explosion) = evolve_observe(field, spec, sigma, path, x0, t0, t1, |_, t, x| {
        times.push(t);
        states.push(x.clone());
    })?;
    Ok(Trajectory {
        times,
        states,
        path_id: path.path_id(),
        explosion,
    })
}

/// Endpoint-only variant of [`evolve`].
pub fn evolve_endpoint(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0: &DVector<f64>,
    t0: f64,
    t1: f64,
) -> Result<Endpoint> {
    let (state, explosion) = evolve_observe(field, spec, sigma, path, x0, t0, t1, |_, _, _| {})?;
    Ok(Endpoint { state, explosion })
}

/// Drive every member of `x0s` with the identical path (the synchronization
/// mechanism). Equals member-wise [`evolve`].
pub fn evolve_ensemble(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0s: &[DVector<f64>],
    t0: f64,
    t1: f64,
) -> Result<Vec<Endpoint>> {
    x0s.iter()
        .map(|x0| evolve_endpoint(field, spec, sigma, path, x0, t0, t1))
        .collect()
}

/// φ_t(θ_{-t} ω, x0): start t in the past under the shifted noise and flow
/// back to time 0.
pub fn pullback_evolve(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0: &DVector<f64>,
    t: f64,
) -> Result<Endpoint> {
    let shifted = path.shift(-t)?;
    evolve_endpoint(field, spec, sigma, &shifted, x0, 0.0, t)
}

/// Orthonormal frame evolved by the variational flow, with running sums of
/// log R_ii from the QR re-orthonormalizations.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    frame: DMatrix<f64>,
    log_r: Vec<f64>,
}

impl TangentFrame {
    /// Identity-aligned initial frame with k columns.
    pub fn identity(dim: usize, k: usize) -> Result<Self> {
        if k == 0 || k > dim {
            return Err(Error::DimensionMismatch { expected: dim, got: k });
        }
        Ok(TangentFrame {
            frame: DMatrix::identity(dim, dim).columns(0, k).into(),
            log_r: vec![0.0; k],
        })
    }

    pub fn k(&self) -> usize {
        self.frame.ncols()
    }

    pub fn columns(&self) -> &DMatrix<f64> {
        &self.frame
    }

    pub fn log_r_accumulators(&self) -> &[f64] {
        &self.log_r
    }

    pub fn reset_accumulators(&mut self) {
        self.log_r.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Apply the one-step map Jacobian to every column.
    fn push(&mut self, m: &DMatrix<f64>) {
        self.frame = m * &self.frame;
    }

    /// Apply the inverse of `m` (split-step update) to every column.
    fn push_solve(&mut self, m: DMatrix<f64>, step: usize) -> Result<()> {
        let lu = m.lu();
        let solved = lu
            .solve(&self.frame)
            .ok_or(Error::QrBreakdown { step })?;
        self.frame = solved;
        Ok(())
    }

    /// Re-orthonormalize; returns the log R_ii of this QR step (also added
    /// to the running accumulators).
    pub fn qr_normalize(&mut self, step: usize) -> Result<Vec<f64>> {
        let qr = self.frame.clone().qr();
        let mut q: DMatrix<f64> = qr.q();
        let r = qr.r();
        let k = self.k();
        let mut logs = Vec::with_capacity(k);
        for i in 0..k {
            let rii = r[(i, i)];
            if rii == 0.0 || !rii.is_finite() {
                return Err(Error::QrBreakdown { step });
            }
            if rii < 0.0 {
                // Fix signs so the diagonal is positive.
                for row in 0..q.nrows() {
                    q[(row, i)] = -q[(row, i)];
                }
            }
            let lr = rii.abs().ln();
            self.log_r[i] += lr;
            logs.push(lr);
        }
        self.frame = q;
        Ok(logs)
    }

    /// Max deviation from orthonormality, for invariant checks.
    pub fn orthonormality_defect(&self) -> f64 {
        let gram = self.frame.transpose() * &self.frame;
        (gram - DMatrix::identity(self.k(), self.k())).amax()
    }
}

/// Jacobian of the one-step state map (noise is additive, so only the drift
/// part contributes).
fn step_map_jacobian(
    field: &DriftField,
    spec: &IntegratorSpec,
    x_before: &DVector<f64>,
    y_split: Option<&DVector<f64>>,
) -> Result<DMatrix<f64>> {
    let dt = spec.dt;
    let d = field.dim();
    match spec.scheme {
        Scheme::EulerMaruyama => Ok(DMatrix::identity(d, d) + field.eval_jacobian(x_before)? * dt),
        Scheme::TamedEuler => {
            let b = field.drift_raw(x_before);
            let j = field.eval_jacobian(x_before)?;
            let n = b.norm();
            let tame = 1.0 + dt * n;
            let mut m = DMatrix::identity(d, d) + &j * (dt / tame);
            if n > 1e-300 {
                let bbj = (&b * b.transpose()) * &j;
                m -= bbj * (dt * dt / (n * tame * tame));
            }
            Ok(m)
        }
        Scheme::SplitStepImplicit => {
            let y = y_split.expect("split-step tangent update requires the drift substep solution");
            Ok(DMatrix::identity(d, d) - field.eval_jacobian(y)? * dt)
        }
    }
}

/// One state+frame step. Returns the new state; the frame is updated with
/// the Jacobian of the discrete one-step map.
pub(crate) fn step_with_frame(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    x: &DVector<f64>,
    dw: &DVector<f64>,
    frame: &mut TangentFrame,
    step_idx: usize,
) -> Result<DVector<f64>> {
    if field.is_circle() {
        return Err(Error::Unsupported(
            "tangent flow is not defined for circle (state-dependent diffusion) fields".into(),
        ));
    }
    match spec.scheme {
        Scheme::SplitStepImplicit => {
            let y = implicit_drift_solve(field, spec, x, step_idx)?;
            let m = step_map_jacobian(field, spec, x, Some(&y))?;
            frame.push_solve(m, step_idx)?;
            Ok(y + dw * sigma)
        }
        _ => {
            let m = step_map_jacobian(field, spec, x, None)?;
            frame.push(&m);
            step_inner(field, spec, sigma, x, dw, step_idx)
        }
    }
}

/// Co-integrate the state and a k-frame from t0 to t1, re-orthonormalizing
/// every `qr_every` steps (and at the final step). Explosions abort with an
/// error: Lyapunov accumulation on a frozen state would be meaningless.
pub fn tangent_evolve(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    path: &WienerPath,
    x0: &DVector<f64>,
    k: usize,
    t0: f64,
    t1: f64,
    qr_every: usize,
) -> Result<(Trajectory, TangentFrame)> {
    spec.check_matches(path)?;
    check_state(field, x0)?;
    let qr_every = qr_every.max(1);
    let k0 = path.index_of(t0)?;
    let k1 = path.index_of(t1)?;
    let (w_min, w_max) = path.window();
    if k0 < w_min || k1 > w_max {
        return Err(Error::WindowViolation {
            index: if k0 < w_min { k0 } else { k1 },
            k_min: w_min,
            k_max: w_max,
        });
    }
    let mut frame = TangentFrame::identity(field.dim(), k)?;
    let mut x = x0.clone();
    let mut times = vec![t0];
    let mut states = vec![x0.clone()];
    let n_steps = (k1 - k0) as usize;
    for (count, kk) in (k0..k1).enumerate() {
        let dw = path.increment_unchecked(kk);
        x = step_with_frame(field, spec, sigma, &x, &dw, &mut frame, count)?;
        if x.iter().any(|v| !v.is_finite()) || x.norm() > EXPLOSION_NORM {
            return Err(Error::Explosion {
                step: count + 1,
                t: t0 + (count as f64 + 1.0) * path.delta(),
                threshold: EXPLOSION_NORM,
            });
        }
        if (count + 1) % qr_every == 0 || count + 1 == n_steps {
            frame.qr_normalize(count)?;
        }
        times.push(t0 + (count as f64 + 1.0) * path.delta());
        states.push(x.clone());
    }
    Ok((
        Trajectory {
            times,
            states,
            path_id: path.path_id(),
            explosion: None,
        },
        frame,
    ))
}

/// Integrate the controlled ODE dx = b(x)dt + sigma dF with prescribed
/// control increments in place of Brownian ones. Used by the constructive
/// swift-transitivity and contraction witnesses.
pub fn evolve_controlled(
    field: &DriftField,
    spec: &IntegratorSpec,
    sigma: f64,
    x0: &DVector<f64>,
    increments: &[DVector<f64>],
) -> Result<DVector<f64>> {
    spec.validate()?;
    check_state(field, x0)?;
    let mut x = x0.clone();
    for (idx, df) in increments.iter().enumerate() {
        x = step_inner(field, spec, sigma, &x, df, idx)?;
        if x.iter().any(|v| !v.is_finite()) || x.norm() > EXPLOSION_NORM {
            return Err(Error::Explosion {
                step: idx + 1,
                t: (idx as f64 + 1.0) * spec.dt,
                threshold: EXPLOSION_NORM,
            });
        }
    }
    Ok(x)
}
