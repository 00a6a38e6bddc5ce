//! Constructive control-path witnesses.
//!
//! Swift transitivity: the straight-line steering ψ(t) = x + (t/t₀)z is
//! realized by the control f(t) = σ⁻¹(ψ(t) − x − ∫₀ᵗ b(ψ(s))ds); driving
//! the ODE with f's increments in place of noise carries x to x + z, and a
//! whole ball of starts B(x, r) lands within δ of its translate. The
//! admissible horizon is T₀ = min{(δ∧1)/(4B), 1} with
//! B = sup_{|v| ≤ r + |z| + 1} |b(x + v)|.
//!
//! Contraction on large sets: the freezing control ω⁰(t) = −t b(z)/σ pins z
//! and lets strict monotonicity shrink B(z, R); after T₀ with
//! e^{−c T₀} ≤ 1/9 the mesh diameter ratio must be ≤ 1/4.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::flow::{self, IntegratorSpec};
use crate::sampling::{ball_mesh, jitter};

#[derive(Debug, Clone, serde::Serialize)]
pub struct SwiftControlReport {
    /// Control values f(t_k) on the grid (flattened per step).
    pub control: Vec<Vec<f64>>,
    /// |φ^f_{t0}(x) − (x + z)| for the steering center.
    pub residual: f64,
    /// Sampled estimate of B = sup |b| over the safety ball.
    pub b_sup: f64,
    /// Admissible horizon T₀ implied by b_sup.
    pub t_max: f64,
    /// Distance |φ^f_{t0}(x') − (x' + z)| for every mesh start in B(x, r).
    pub mesh_distances: Vec<f64>,
    /// Whether every mesh start landed inside B(x' + z, δ).
    pub all_landed: bool,
    pub delta: f64,
}

/// Sampled sup of |b| over the closed ball B(center, radius), with local
/// refinement around the maximizer.
fn estimate_drift_sup(
    field: &DriftField,
    center: &DVector<f64>,
    radius: f64,
    seed: u64,
) -> Result<f64> {
    let mesh = ball_mesh(center, radius, 4096, seed);
    let mut best_x = center.clone();
    let mut best = field.eval_drift(center)?.norm();
    for p in &mesh {
        let n = field.eval_drift(p)?.norm();
        if n > best {
            best = n;
            best_x = p.clone();
        }
    }
    for round in 0..8 {
        let scale = radius * 0.5f64.powi(round + 1);
        for i in 0..128i64 {
            let mut p = jitter(&best_x, scale, seed ^ (round as u64 + 1), i);
            let d = &p - center;
            let n = d.norm();
            if n > radius {
                p = center + d * (radius / n);
            }
            let v = field.eval_drift(&p)?.norm();
            if v > best {
                best = v;
                best_x = p;
            }
        }
    }
    Ok(best)
}

/// Build and verify the swift-transitivity steering control from x towards
/// x + z over horizon t0 (which must respect the admissible bound and be a
/// whole number of integrator steps).
#[allow(clippy::too_many_arguments)]
pub fn swift_control(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    x: &DVector<f64>,
    r: f64,
    z: &DVector<f64>,
    t0: f64,
    delta: f64,
    mesh_n: usize,
    seed: u64,
) -> Result<SwiftControlReport> {
    if !(sigma > 0.0) {
        return Err(Error::Config {
            key: "noise.sigma".into(),
            message: "swift control needs sigma > 0".into(),
        });
    }
    if !(r >= 0.0) || !(delta > 0.0) || !(t0 > 0.0) {
        return Err(Error::Config {
            key: "control".into(),
            message: "need r >= 0, delta > 0, t0 > 0".into(),
        });
    }
    let dt = ispec.dt;
    let n_steps = (t0 / dt).round() as usize;
    if n_steps == 0 || (t0 - n_steps as f64 * dt).abs() > 1e-9 * dt {
        return Err(Error::GridAlignment { t: t0, delta: dt });
    }
    let safety_radius = r + z.norm() + 1.0;
    let b_sup = estimate_drift_sup(field, x, safety_radius, seed)?;
    let t_max = (delta.min(1.0) / (4.0 * b_sup)).min(1.0);
    if t0 > t_max {
        return Err(Error::ControlHorizon { t0, t_max });
    }

    // psi(t_k) = x + (k/n) z; f = (psi - x - cumulative trapezoid of
    // b(psi)) / sigma.
    let psi: Vec<DVector<f64>> =
        (0..=n_steps).map(|k| x + z * (k as f64 / n_steps as f64)).collect();
    let drift_on_path: Vec<DVector<f64>> = psi
        .iter()
        .map(|p| field.eval_drift(p))
        .collect::<Result<_>>()?;
    let mut f_values = Vec::with_capacity(n_steps + 1);
    let mut integral = DVector::zeros(x.len());
    f_values.push(DVector::zeros(x.len()));
    for k in 0..n_steps {
        integral += (&drift_on_path[k] + &drift_on_path[k + 1]) * (0.5 * dt);
        f_values.push((&psi[k + 1] - x - &integral) / sigma);
    }
    let increments: Vec<DVector<f64>> =
        (0..n_steps).map(|k| &f_values[k + 1] - &f_values[k]).collect();

    let target = x + z;
    let end = flow::evolve_controlled(field, ispec, sigma, x, &increments)?;
    let residual = (&end - &target).norm();

    let mesh = ball_mesh(x, r, mesh_n, seed);
    let mut mesh_distances = Vec::with_capacity(mesh.len());
    let mut all_landed = true;
    for start in &mesh {
        let end = flow::evolve_controlled(field, ispec, sigma, start, &increments)?;
        let dist = (&end - (start + z)).norm();
        if dist > delta {
            all_landed = false;
        }
        mesh_distances.push(dist);
    }

    Ok(SwiftControlReport {
        control: f_values.iter().map(|f| f.iter().copied().collect()).collect(),
        residual,
        b_sup,
        t_max,
        mesh_distances,
        all_landed,
        delta,
    })
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ContractionReport {
    /// Horizon actually integrated (ln 9 / c, rounded up to the grid).
    pub t0: f64,
    /// max pairwise endpoint distance / (2R).
    pub ratio: f64,
    /// ratio <= 1/4. A failure is reported, not asserted: the usual cause
    /// is an optimistic c_estimate.
    pub passed: bool,
    pub mesh_size: usize,
}

/// Drive a sphere+interior mesh of B(z, R) with the freezing control
/// ω⁰(t) = −t b(z)/σ and measure the achieved diameter ratio.
#[allow(clippy::too_many_arguments)]
pub fn contraction_witness(
    field: &DriftField,
    ispec: &IntegratorSpec,
    sigma: f64,
    z: &DVector<f64>,
    radius: f64,
    c_estimate: f64,
    mesh_n: usize,
    seed: u64,
) -> Result<ContractionReport> {
    if !(sigma > 0.0) {
        return Err(Error::Config {
            key: "noise.sigma".into(),
            message: "contraction witness needs sigma > 0".into(),
        });
    }
    if !(c_estimate > 0.0) || !(radius > 0.0) {
        return Err(Error::Config {
            key: "control.c_estimate".into(),
            message: "need c_estimate > 0 and R > 0".into(),
        });
    }
    let dt = ispec.dt;
    let t_target = 9.0f64.ln() / c_estimate;
    let n_steps = (t_target / dt).ceil().max(1.0) as usize;
    let t0 = n_steps as f64 * dt;
    // Constant increments freeze z: sigma * df cancels dt * b(z).
    let df = field.eval_drift(z)? * (-dt / sigma);
    let increments = vec![df; n_steps];
    let mesh = ball_mesh(z, radius, mesh_n, seed);
    let endpoints: Vec<DVector<f64>> = mesh
        .iter()
        .map(|start| flow::evolve_controlled(field, ispec, sigma, start, &increments))
        .collect::<Result<_>>()?;
    let mut max_d: f64 = 0.0;
    for a in 0..endpoints.len() {
        for b in (a + 1)..endpoints.len() {
            max_d = max_d.max((&endpoints[a] - &endpoints[b]).norm());
        }
    }
    let ratio = max_d / (2.0 * radius);
    Ok(ContractionReport {
        t0,
        ratio,
        passed: ratio <= 0.25,
        mesh_size: mesh.len(),
    })
}

/// Sampled strict-monotonicity constant on B(z, 2R) restricted to pairs
/// with |x − y| >= R/9: c = −max quotient. The natural input for
/// [`contraction_witness`].
pub fn estimate_contraction_constant(
    field: &DriftField,
    z: &DVector<f64>,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<f64> {
    use crate::sampling::ball_point_stream;
    let min_sep = radius / 9.0;
    let mut worst = f64::NEG_INFINITY;
    for k in 0..n_pairs as u64 {
        let x = ball_point_stream(k, z, 2.0 * radius, 0, seed);
        let y = ball_point_stream(k, z, 2.0 * radius, 1, seed);
        let sep = (&x - &y).norm();
        if sep < min_sep {
            continue;
        }
        let q = (field.eval_drift(&x)? - field.eval_drift(&y)?).dot(&(&x - &y)) / (sep * sep);
        worst = worst.max(q);
    }
    if !worst.is_finite() {
        return Err(Error::Config {
            key: "control.n_pairs".into(),
            message: "no admissible pairs for the contraction constant".into(),
        });
    }
    if worst >= 0.0 {
        return Err(Error::NumericRange(format!(
            "drift is not strictly monotone on B(z, 2R): max quotient {worst:.3e}"
        )));
    }
    Ok(-worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_custom, BuiltinSpec};
    use crate::flow::Scheme;

    fn em(dt: f64) -> IntegratorSpec {
        IntegratorSpec::new(Scheme::EulerMaruyama, dt)
    }

    #[test]
    fn zero_drift_exact_steering() {
        // b = 0: f(t) = (t/t0) z / sigma and the residual is zero up to
        // rounding, at every dt.
        let f = build_custom(2, &["0".into(), "0".into()]).unwrap();
        let z = DVector::from_vec(vec![1.0, -0.5]);
        let x = DVector::from_vec(vec![0.2, 0.1]);
        let mut last = f64::INFINITY;
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let t0 = 0.2;
            let rep = swift_control(&f, &em(dt), 1.0, &x, 0.05, &z, t0, 0.1, 8, 3).unwrap();
            assert!(rep.residual <= 5.0 * dt, "residual {} at dt {dt}", rep.residual);
            assert!(rep.residual <= last + 1e-15);
            assert!(rep.all_landed);
            last = rep.residual;
        }
    }

    #[test]
    fn ou_steering_residual_first_order() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let x = DVector::from_vec(vec![0.0, 0.0]);
        let z = DVector::from_vec(vec![1.0, 0.0]);
        let dt = 1e-3;
        // B over the ball |v| <= 2: sup |b| = 2, so T0 = min(0.1/8, 1).
        let t0 = 0.01;
        let rep = swift_control(&f, &em(dt), 1.0, &x, 0.05, &z, t0, 0.1, 8, 3).unwrap();
        assert!(rep.residual < 5.0 * dt, "residual {}", rep.residual);
        assert!(rep.all_landed);
        // sup |b| over B(0, r + |z| + 1) = B(0, 2.05) is 2.05 for b = -x.
        assert!((rep.b_sup - 2.05).abs() < 0.01, "b_sup {}", rep.b_sup);
    }

    #[test]
    fn horizon_violation_rejected() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let x = DVector::zeros(2);
        let z = DVector::from_vec(vec![1.0, 0.0]);
        let r = swift_control(&f, &em(1e-3), 1.0, &x, 0.05, &z, 0.5, 0.1, 8, 3);
        assert!(matches!(r, Err(Error::ControlHorizon { .. })));
    }

    #[test]
    fn double_well_witness_ball_translation() {
        // The acceptance-criterion configuration: x = (-1, 0), z = (2, 0),
        // r = 0.1, delta = 0.1, 32 mesh starts.
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let x = DVector::from_vec(vec![-1.0, 0.0]);
        let z = DVector::from_vec(vec![2.0, 0.0]);
        let dt = 1e-5;
        let t0 = 32.0 * dt;
        let rep = swift_control(&f, &em(dt), 1.0, &x, 0.1, &z, t0, 0.1, 32, 9).unwrap();
        assert!(rep.all_landed, "distances {:?}", rep.mesh_distances);
        assert!(rep.residual < 0.01, "residual {}", rep.residual);
    }

    #[test]
    fn contraction_ou_center() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let z = DVector::zeros(2);
        // Exact linear contraction: c = 1, T0 = ln 9, ratio = 1/9.
        let rep = contraction_witness(&f, &em(1e-3), 1.0, &z, 1.0, 1.0, 16, 3).unwrap();
        assert!(rep.passed);
        assert!((rep.ratio - 1.0 / 9.0).abs() < 0.01, "ratio {}", rep.ratio);
    }

    #[test]
    fn contraction_single_point_ratio_zero() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let z = DVector::zeros(2);
        let rep = contraction_witness(&f, &em(1e-3), 1.0, &z, 1.0, 1.0, 1, 3).unwrap();
        assert_eq!(rep.ratio, 0.0);
    }

    #[test]
    fn contraction_double_well_far_center() {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let z = DVector::from_vec(vec![4.0, 0.0]);
        let c = estimate_contraction_constant(&f, &z, 1.0, 4000, 5).unwrap();
        assert!(c > 0.0);
        let rep = contraction_witness(&f, &em(1e-3), 1.0, &z, 1.0, c, 24, 5).unwrap();
        assert!(rep.passed, "ratio {} at c {c}", rep.ratio);
        assert!(rep.ratio <= 0.25);
    }

    #[test]
    fn contraction_constant_rejects_non_monotone_region() {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        // B(0, 2R) straddles the unit ball: quotient positive somewhere.
        let z = DVector::zeros(2);
        assert!(estimate_contraction_constant(&f, &z, 1.0, 4000, 5).is_err());
    }
}
