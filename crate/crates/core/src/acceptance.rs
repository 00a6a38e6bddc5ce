//! The verification suite behind the `paper-suite` subcommand and the
//! acceptance integration tests: thirteen criteria covering estimator
//! exactness on solvable cases, the ergodic upper bound on the top
//! exponent, synchronization statistics for the double well, the circle
//! example's two-atom equilibrium, constructive control witnesses, and
//! bitwise reproducibility. Every tolerance is pinned here.

use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::diagnostics::{
    self, cluster_count, contraction_witness, estimate_contraction_constant, swift_control,
    Metric,
};
use crate::error::Result;
use crate::field::{BuiltinSpec, DriftField};
use crate::flow::{self, IntegratorSpec, Scheme};
use crate::lyapunov;
use crate::measure;
use crate::noise::{derive_member_seed, standard_normal, WienerPath};
use crate::runner::{self, Command};

#[derive(Debug, Clone, serde::Serialize)]
pub struct CriterionResult {
    pub id: String,
    pub description: String,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "{} {:<4} {} ({:.1}s) - {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.description,
            self.seconds,
            self.details
        )
    }
}

fn criterion(
    id: &str,
    description: &str,
    f: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let (passed, details) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id: id.to_string(),
        description: description.to_string(),
        passed,
        details,
        seconds: start.elapsed().as_secs_f64(),
    }
}

fn em(dt: f64) -> IntegratorSpec {
    IntegratorSpec::new(Scheme::EulerMaruyama, dt)
}

fn tamed(dt: f64) -> IntegratorSpec {
    IntegratorSpec::new(Scheme::TamedEuler, dt)
}

/// A1: OU exactness. Every exponent of b = −x within ±0.05 of −1 for
/// d ∈ {1, 3} at σ = 1, T = 200, dt = 1e−3, in under 60 s.
pub fn a1_ou_exactness() -> CriterionResult {
    criterion("A1", "OU spectrum exactness (d=1,3)", || {
        let start = Instant::now();
        let mut worst: f64 = 0.0;
        for dim in [1usize, 3] {
            let f = BuiltinSpec::Ou { dim }.build()?;
            let x0 = DVector::from_element(dim, 0.5);
            let s = lyapunov::spectrum_benettin(&f, &em(1e-3), 1.0, 4242, &x0, dim, 200.0, 20.0, 10)?;
            for l in &s.exponents {
                worst = worst.max((l - (-1.0)).abs());
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        Ok((
            worst <= 0.05 && elapsed < 60.0,
            format!("max |lambda + 1| = {worst:.4}, runtime {elapsed:.1}s (< 60s)"),
        ))
    })
}

/// A2: d = 1 identity. |λ_top(Benettin) − ∫b′dρ| ≤ 3 combined SE for the
/// double well at σ ∈ {0.5, 1, 2}; quadrature stable to 1e−6 under grid
/// doubling.
pub fn a2_one_d_identity() -> CriterionResult {
    criterion("A2", "1-d Benettin vs quadrature identity", || {
        let f = BuiltinSpec::DoubleWell { dim: 1 }.build()?;
        let x0 = DVector::from_vec(vec![1.0]);
        let mut details = Vec::new();
        let mut ok = true;
        for (i, sigma) in [0.5, 1.0, 2.0].into_iter().enumerate() {
            let g = measure::normalize(&f, sigma, None, None, None)?;
            let (oracle, refine) = lyapunov::gradient_1d_exponent(&f, &g)?;
            if refine > 1e-6 {
                ok = false;
                details.push(format!("refine err {refine:.2e} at sigma {sigma}"));
            }
            let s = lyapunov::spectrum_benettin(
                &f,
                &tamed(1e-3),
                sigma,
                9000 + i as u64,
                &x0,
                1,
                300.0,
                30.0,
                10,
            )?;
            let combined = (s.top_std_error().powi(2) + refine.powi(2)).sqrt();
            let dev = (s.top() - oracle).abs();
            if dev > 3.0 * combined {
                ok = false;
            }
            details.push(format!(
                "sigma {sigma}: benettin {:.4}+-{:.4} vs quad {:.4}",
                s.top(),
                s.top_std_error(),
                oracle
            ));
        }
        Ok((ok, details.join("; ")))
    })
}

/// A3: the ergodic inequality λ_top ≤ ∫λ⁺dρ + 3 SE for the double well
/// (d = 2) and V_E at σ ∈ {1, 3}.
pub fn a3_ergodic_inequality() -> CriterionResult {
    criterion("A3", "lambda_top <= int lambda_plus d rho + 3 SE", || {
        let cases: Vec<(DriftField, DVector<f64>)> = vec![
            (
                BuiltinSpec::DoubleWell { dim: 2 }.build()?,
                DVector::from_vec(vec![1.0, 0.0]),
            ),
            (BuiltinSpec::VE.build()?, DVector::from_vec(vec![0.0, 1.0])),
        ];
        let mut ok = true;
        let mut details = Vec::new();
        for (f, x0) in &cases {
            for sigma in [1.0, 3.0] {
                let g = measure::normalize(f, sigma, None, None, None)?;
                let (bound, _) = lyapunov::lambda_plus_bound(f, &g)?;
                let s =
                    lyapunov::spectrum_benettin(f, &tamed(1e-3), sigma, 777, x0, 1, 200.0, 20.0, 10)?;
                let pass = s.top() <= bound + 3.0 * s.top_std_error();
                if !pass {
                    ok = false;
                }
                details.push(format!(
                    "{} sigma {sigma}: top {:.3} <= bound {:.3} + 3x{:.3}",
                    f.name(),
                    s.top(),
                    bound,
                    s.top_std_error()
                ));
            }
        }
        Ok((ok, details.join("; ")))
    })
}

/// A4: radial sign. ∫λ⁺dρ < 0 for the double well in d ∈ {1, 2} at
/// σ ∈ {0.5, 1, 2, 4}.
pub fn a4_radial_sign() -> CriterionResult {
    criterion("A4", "radial double-well bound negative", || {
        let mut ok = true;
        let mut worst = f64::NEG_INFINITY;
        for dim in [1usize, 2] {
            let f = BuiltinSpec::DoubleWell { dim }.build()?;
            for sigma in [0.5, 1.0, 2.0, 4.0] {
                let g = measure::normalize(&f, sigma, None, None, None)?;
                let (b, _) = lyapunov::lambda_plus_bound(&f, &g)?;
                worst = worst.max(b);
                if b >= 0.0 {
                    ok = false;
                }
            }
        }
        Ok((ok, format!("max bound over the ladder = {worst:.4} (< 0)")))
    })
}

/// A5: synchronization of the planar double well at σ = 1 from antipodal
/// starts, with the σ = 0 control frozen at distance 2 exactly.
pub fn a5_synchronization() -> CriterionResult {
    criterion("A5", "double-well synchronization (200 seeds)", || {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build()?;
        let x = DVector::from_vec(vec![1.0, 0.0]);
        let y = DVector::from_vec(vec![-1.0, 0.0]);
        let checkpoints = [0.0, 50.0, 100.0];
        let stochastic = diagnostics::two_point_sync(
            &f,
            &tamed(1e-3),
            1.0,
            &x,
            &y,
            100.0,
            200,
            20_250_101,
            &checkpoints,
            0.05,
        )?;
        let p_exceed = stochastic.exceed_prob.last().unwrap().estimate;
        let control = diagnostics::two_point_sync(
            &f,
            &tamed(1e-3),
            0.0,
            &x,
            &y,
            100.0,
            200,
            20_250_101,
            &checkpoints,
            0.05,
        )?;
        let frozen = control
            .distance_quantiles
            .iter()
            .all(|q| q.min == 2.0 && q.max == 2.0);
        Ok((
            p_exceed <= 0.05 && frozen,
            format!("P[d > 0.05 at T=100] = {p_exceed:.3} (<= 0.05); sigma=0 distance == 2: {frozen}"),
        ))
    })
}

/// A6: perfect cocycle identity, bitwise, over 1000 randomized
/// (field, seed, split) cases.
pub fn a6_cocycle_bitwise() -> CriterionResult {
    criterion("A6", "cocycle identity bitwise (1000 cases)", || {
        let fields: Vec<DriftField> = vec![
            BuiltinSpec::Ou { dim: 2 }.build()?,
            BuiltinSpec::DoubleWell { dim: 2 }.build()?,
            BuiltinSpec::DoubleWell { dim: 1 }.build()?,
            BuiltinSpec::VE.build()?,
            BuiltinSpec::CircleStratonovich.build()?,
        ];
        let failures: usize = (0..1000u64)
            .into_par_iter()
            .map(|case| {
                let field = &fields[(case % fields.len() as u64) as usize];
                let seed = derive_member_seed(611, case);
                let dt = 1e-3;
                let total = 100 + (standard_normal(seed, 0, 0).abs() * 100.0) as i64;
                let split = 1 + (standard_normal(seed, 1, 0).abs() * 80.0) as i64 % (total - 1);
                let spec = tamed(dt);
                let path = WienerPath::sample(seed, field.noise_dim(), dt, (0, total)).unwrap();
                let dim = field.dim();
                let x0 = DVector::from_fn(dim, |i, _| {
                    0.5 * standard_normal(seed, 2, i as u32)
                });
                let s = split as f64 * dt;
                let t = (total - split) as f64 * dt;
                let whole =
                    flow::evolve_endpoint(field, &spec, 1.0, &path, &x0, 0.0, s + t).unwrap();
                let first = flow::evolve_endpoint(field, &spec, 1.0, &path, &x0, 0.0, s).unwrap();
                let second = flow::evolve_endpoint(
                    field,
                    &spec,
                    1.0,
                    &path.shift(s).unwrap(),
                    &first.state,
                    0.0,
                    t,
                )
                .unwrap();
                usize::from(whole.state != second.state)
            })
            .sum();
        Ok((failures == 0, format!("{failures} failures / 1000")))
    })
}

/// A7: noise shift algebra, bitwise, over 1000 randomized cases.
pub fn a7_shift_algebra_bitwise() -> CriterionResult {
    criterion("A7", "shift algebra bitwise (1000 cases)", || {
        let failures: usize = (0..1000u64)
            .into_par_iter()
            .map(|case| {
                let seed = derive_member_seed(712, case);
                let delta = 0.001;
                let m1 = (standard_normal(seed, 0, 0) * 100.0) as i64;
                let m2 = (standard_normal(seed, 1, 0) * 100.0) as i64;
                let p0 = WienerPath::sample(seed, 2, delta, (-600, 600)).unwrap();
                let p = p0.shift(m1 as f64 * delta).unwrap();
                let q = p.shift(m2 as f64 * delta).unwrap();
                // Group property.
                let via = p
                    .shift((m2 - 17) as f64 * delta)
                    .unwrap()
                    .shift(17.0 * delta)
                    .unwrap();
                let mut bad = via != q;
                // Determinism: a freshly sampled path agrees bitwise.
                let fresh = WienerPath::sample(seed, 2, delta, (-600, 600)).unwrap();
                for k in [-5i64, 0, 3] {
                    bad |= fresh.increment(k).unwrap() != p0.increment(k).unwrap();
                }
                // Shift/value identity.
                let s = m2 as f64 * delta;
                for j in [-3i64, 1, 7] {
                    let t = j as f64 * delta;
                    if let (Ok(lhs), Ok(a), Ok(b)) =
                        (q.value(t), p.value(t + s), p.value(s))
                    {
                        bad |= lhs != a - b;
                    }
                }
                usize::from(bad)
            })
            .sum();
        Ok((failures == 0, format!("{failures} failures / 1000")))
    })
}

/// A8: Gaussian closed forms for the Gibbs machinery in d = 1, 2.
pub fn a8_gaussian_closed_forms() -> CriterionResult {
    criterion("A8", "Gibbs Gaussian closed forms (1e-6)", || {
        let mut worst: f64 = 0.0;
        // V = |x|²/2 with sigma = sqrt(2): the standard normal.
        for dim in [1usize, 2] {
            let f = BuiltinSpec::Ou { dim }.build()?;
            let g = measure::normalize(&f, std::f64::consts::SQRT_2, None, None, None)?;
            let z_expect = std::f64::consts::TAU.powf(dim as f64 / 2.0);
            worst = worst.max(((g.z() - z_expect) / z_expect).abs());
            let (_, cov) = g.moments()?;
            for i in 0..dim {
                worst = worst.max((cov[(i, i)] - 1.0).abs());
            }
            let mass = g.ball_mass(1.0)?;
            let expect = if dim == 1 {
                0.682_689_492_137_086
            } else {
                1.0 - (-0.5f64).exp()
            };
            worst = worst.max((mass - expect).abs());
        }
        Ok((worst <= 1e-6, format!("max deviation {worst:.2e} (<= 1e-6)")))
    })
}

/// A9: the circle example's statistical equilibrium: pullback at t = 30
/// over 200 angles concentrates on two antipodal atoms in ≥ 95% of seeds.
pub fn a9_circle_two_atoms() -> CriterionResult {
    criterion("A9", "circle pullback forms two antipodal atoms", || {
        let f = BuiltinSpec::CircleStratonovich.build()?;
        let dt = 2e-3;
        let spec = em(dt);
        let init: Vec<DVector<f64>> = (0..200)
            .map(|i| DVector::from_vec(vec![std::f64::consts::TAU * i as f64 / 200.0]))
            .collect();
        let eps = diagnostics::default_linkage_epsilon(1.0, dt);
        let n_seeds = 100u64;
        let outcomes: Vec<(bool, bool)> = (0..n_seeds)
            .into_par_iter()
            .map(|i| {
                let seed = derive_member_seed(90_210, i);
                let ens =
                    diagnostics::pullback_ensemble(&f, &spec, 1.0, seed, &init, &[30.0]).unwrap();
                let rep = cluster_count(&ens.clouds[0], eps, Metric::CircleArc).unwrap();
                let two = rep.cluster_count == 2;
                let antipodal = two && {
                    let a = rep.cluster_centers[0][0];
                    let b = rep.cluster_centers[1][0];
                    let arc = Metric::CircleArc.distance(
                        &DVector::from_vec(vec![a]),
                        &DVector::from_vec(vec![b]),
                    );
                    (arc - std::f64::consts::PI).abs() <= 0.1
                };
                (two, antipodal)
            })
            .collect();
        let two_count = outcomes.iter().filter(|(two, _)| *two).count();
        let anti_count = outcomes.iter().filter(|(_, a)| *a).count();
        let ok = two_count * 100 >= 95 * n_seeds as usize && anti_count == two_count;
        Ok((
            ok,
            format!(
                "{two_count}/{n_seeds} seeds with 2 clusters (need >= 95), {anti_count} antipodal within 0.1 rad"
            ),
        ))
    })
}

/// A10: flattening. ρ^σ(B(0,2)) strictly decreasing across σ = 1, 2, 4, 8
/// for V_E and the planar double well.
pub fn a10_flattening() -> CriterionResult {
    criterion("A10", "ball mass strictly decreasing in sigma", || {
        let mut ok = true;
        let mut details = Vec::new();
        for spec in [BuiltinSpec::VE, BuiltinSpec::DoubleWell { dim: 2 }] {
            let f = spec.build()?;
            let mut masses = Vec::new();
            for sigma in [1.0, 2.0, 4.0, 8.0] {
                let g = measure::normalize(&f, sigma, None, None, None)?;
                masses.push(g.ball_mass(2.0)?);
            }
            let decreasing = masses.windows(2).all(|w| w[1] < w[0]);
            if !decreasing {
                ok = false;
            }
            details.push(format!(
                "{}: {}",
                f.name(),
                masses.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(" > ")
            ));
        }
        Ok((ok, details.join("; ")))
    })
}

/// A11: swift-transitivity witness for the double well, plus the O(dt)
/// residual scaling of the steering control on the zero field.
pub fn a11_swift_witness() -> CriterionResult {
    criterion("A11", "swift control witness", || {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build()?;
        let x = DVector::from_vec(vec![-1.0, 0.0]);
        let z = DVector::from_vec(vec![2.0, 0.0]);
        let dt = 1e-5;
        let t0 = 32.0 * dt;
        let rep = swift_control(&f, &em(dt), 1.0, &x, 0.1, &z, t0, 0.1, 32, 11)?;
        let witness_ok = rep.all_landed && rep.mesh_distances.len() == 32;

        // Zero drift: residual bounded by 5 dt and non-increasing under
        // halving.
        let zf = crate::field::build_custom(2, &["0".into(), "0".into()])?;
        let mut residuals = Vec::new();
        for dt in [1e-2, 5e-3, 2.5e-3] {
            let r = swift_control(
                &zf,
                &em(dt),
                1.0,
                &DVector::zeros(2),
                0.05,
                &DVector::from_vec(vec![1.0, -0.5]),
                0.2,
                0.1,
                8,
                3,
            )?;
            if r.residual > 5.0 * dt {
                return Ok((false, format!("zero-field residual {} at dt {dt}", r.residual)));
            }
            residuals.push(r.residual);
        }
        let scaling_ok = residuals[2] <= residuals[0] + 1e-12;
        Ok((
            witness_ok && scaling_ok,
            format!(
                "32/32 starts landed: {witness_ok}; zero-field residuals {:?}",
                residuals
            ),
        ))
    })
}

/// A12: contraction witness at z = (4,0), R = 1 for the double well.
pub fn a12_contraction_witness() -> CriterionResult {
    criterion("A12", "contraction witness ratio <= 1/4", || {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build()?;
        let z = DVector::from_vec(vec![4.0, 0.0]);
        let c = estimate_contraction_constant(&f, &z, 1.0, 20_000, 13)?;
        let rep = contraction_witness(&f, &em(1e-3), 1.0, &z, 1.0, c, 24, 13)?;
        Ok((
            rep.passed,
            format!("c = {c:.3}, T0 = {:.3}, ratio = {:.4} (<= 0.25)", rep.t0, rep.ratio),
        ))
    })
}

/// A13: determinism. A run re-executed from its manifest reproduces
/// bitwise-identical outputs, at a different worker count.
pub fn a13_manifest_determinism() -> CriterionResult {
    criterion("A13", "manifest rerun bitwise identical", || {
        let toml = r#"
            [field]
            kind = "double_well"
            dim = 2
            [noise]
            seed = 4711
            delta = 0.01
            sigma = 1.0
            [run]
            t1 = 2.0
            workers = 1
            [sync]
            x = [1.0, 0.0]
            y = [-1.0, 0.0]
            n_seeds = 32
            epsilon = 0.05
            checkpoints = [0.0, 1.0, 2.0]
        "#;
        let cfg = ExperimentConfig::from_toml(toml)?;
        let d1 = tempdir_in_target()?;
        let m1 = runner::run(&cfg, Command::Sync, &d1)?;
        // Rerun from the written manifest with a different worker count.
        let manifest = crate::manifest::RunManifest::load(&d1.join("manifest.json"))?;
        let mut cfg2 = manifest.config.clone();
        cfg2.run.workers = 4;
        let d2 = tempdir_in_target()?;
        let m2 = runner::run(&cfg2, Command::Sync, &d2)?;
        let same = m1.outputs.iter().map(|o| (&o.path, &o.sha256)).collect::<Vec<_>>()
            == m2.outputs.iter().map(|o| (&o.path, &o.sha256)).collect::<Vec<_>>();
        let _ = std::fs::remove_dir_all(&d1);
        let _ = std::fs::remove_dir_all(&d2);
        Ok((same, format!("digests identical across worker counts: {same}")))
    })
}

fn tempdir_in_target() -> Result<std::path::PathBuf> {
    let base = std::env::temp_dir().join(format!(
        "stosync-accept-{}-{}",
        std::process::id(),
        std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap()
            .as_nanos()
    ));
    std::fs::create_dir_all(&base)?;
    Ok(base)
}

/// Run the full suite. Criteria execute sequentially (each parallelizes
/// internally); results come back in ID order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        a1_ou_exactness(),
        a2_one_d_identity(),
        a3_ergodic_inequality(),
        a4_radial_sign(),
        a5_synchronization(),
        a6_cocycle_bitwise(),
        a7_shift_algebra_bitwise(),
        a8_gaussian_closed_forms(),
        a9_circle_two_atoms(),
        a10_flattening(),
        a11_swift_witness(),
        a12_contraction_witness(),
        a13_manifest_determinism(),
    ]
}
