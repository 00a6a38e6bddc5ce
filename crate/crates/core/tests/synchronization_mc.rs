//! Monte-Carlo integration checks of the synchronization machinery at
//! realistic horizons: ensemble collapse, ball-diameter decay, pullback
//! atom counts, and the noise-level monotonicity trend.

use nalgebra::DVector;
use rayon::prelude::*;

use stosync::diagnostics::{
    ball_diameter, cluster_count, pullback_ensemble, two_point_sync, Metric,
};
use stosync::field::BuiltinSpec;
use stosync::flow::{self, IntegratorSpec, Scheme};
use stosync::noise::{derive_member_seed, WienerPath};
use stosync::sampling::ball_mesh;

fn tamed(dt: f64) -> IntegratorSpec {
    IntegratorSpec::new(Scheme::TamedEuler, dt)
}

#[test]
fn unit_circle_ensemble_collapses() {
    // 8 starts on the unit circle, shared noise, T = 50: max pairwise
    // endpoint distance < 0.1 in at least 90% of 100 seeds.
    let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
    let dt = 1e-3;
    let spec = tamed(dt);
    let starts: Vec<DVector<f64>> = (0..8)
        .map(|i| {
            let th = std::f64::consts::TAU * i as f64 / 8.0;
            DVector::from_vec(vec![th.cos(), th.sin()])
        })
        .collect();
    let t1 = 50.0;
    let n_steps = (t1 / dt) as i64;
    let wins: usize = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_member_seed(8080, i);
            let path = WienerPath::sample(seed, 2, dt, (0, n_steps)).unwrap();
            let ends = flow::evolve_ensemble(&f, &spec, 1.0, &path, &starts, 0.0, t1).unwrap();
            let mut max_d: f64 = 0.0;
            for a in 0..ends.len() {
                for b in (a + 1)..ends.len() {
                    max_d = max_d.max((&ends[a].state - &ends[b].state).norm());
                }
            }
            usize::from(max_d < 0.1)
        })
        .sum();
    assert!(wins >= 90, "only {wins}/100 seeds collapsed below 0.1");
}

#[test]
fn ball_diameter_double_well_majority_contracts() {
    // B((0,0), 1.5), T = 100: at least half the seeds reach final diameter
    // below 0.05.
    let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
    let center = DVector::from_vec(vec![0.0, 0.0]);
    let report = ball_diameter(
        &f,
        &tamed(1e-3),
        1.0,
        &center,
        1.5,
        12,
        100.0,
        50,
        6006,
        &[0.0, 50.0, 100.0],
        0.05,
    )
    .unwrap();
    let frac = report.fraction_below_epsilon_final();
    assert!(frac >= 0.5, "fraction below 0.05 at T=100: {frac}");
    assert_eq!(report.explosion_count, 0);
}

#[test]
fn pullback_double_well_single_atom() {
    // Pullback at t = 50 collapses to one cluster in >= 90% of 100 seeds.
    let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
    let dt = 1e-3;
    let spec = tamed(dt);
    let init = ball_mesh(&DVector::zeros(2), 1.5, 16, 42);
    let eps = stosync::diagnostics::default_linkage_epsilon(1.0, dt);
    let wins: usize = (0..100u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_member_seed(515, i);
            let ens = pullback_ensemble(&f, &spec, 1.0, seed, &init, &[50.0]).unwrap();
            let rep = cluster_count(&ens.clouds[0], eps, Metric::Euclidean).unwrap();
            usize::from(rep.cluster_count == 1)
        })
        .sum();
    assert!(wins >= 90, "single atom in only {wins}/100 seeds");
}

#[test]
fn median_final_distance_monotone_in_sigma() {
    // Noise-induced stabilization: the median final two-point distance at
    // T = 100 is non-increasing across sigma in {0.5, 1, 2}.
    let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
    let x = DVector::from_vec(vec![1.0, 0.0]);
    let y = DVector::from_vec(vec![-1.0, 0.0]);
    let mut medians = Vec::new();
    for sigma in [0.5, 1.0, 2.0] {
        let r = two_point_sync(
            &f,
            &tamed(1e-3),
            sigma,
            &x,
            &y,
            100.0,
            200,
            777_000,
            &[0.0, 100.0],
            0.05,
        )
        .unwrap();
        medians.push(r.distance_quantiles[1].q50);
    }
    assert!(
        medians[0] >= medians[1] && medians[1] >= medians[2],
        "medians not non-increasing: {medians:?}"
    );
}

#[test]
fn vs_one_sided_estimate_reproducible_across_seeds() {
    // lambda-hat for V_S on [-4,4]^2 agrees across two independent
    // sampling seeds within 0.05 at 1e6 pairs.
    let f = BuiltinSpec::VS.build().unwrap();
    let a = stosync::diagnostics::check_one_sided_lipschitz(&f, -4.0, 4.0, 1_000_000, 1)
        .unwrap()
        .lambda_hat
        .unwrap();
    let b = stosync::diagnostics::check_one_sided_lipschitz(&f, -4.0, 4.0, 1_000_000, 999)
        .unwrap()
        .lambda_hat
        .unwrap();
    assert!(a.is_finite() && b.is_finite());
    assert!((a - b).abs() < 0.05, "estimates {a} vs {b}");
}

#[test]
fn stiff_schemes_never_explode_at_full_horizon() {
    // Tamed and split-step on the planar double well: no explosion flags
    // across 100 seeds at dt = 1e-3, T = 100. (Plain EM may explode at
    // this step size; that is why it is not the default.)
    let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
    let dt = 1e-3;
    let x0 = DVector::from_vec(vec![1.5, 0.0]);
    for scheme in [Scheme::TamedEuler, Scheme::SplitStepImplicit] {
        let spec = IntegratorSpec::new(scheme, dt);
        let explosions: usize = (0..100u64)
            .into_par_iter()
            .map(|i| {
                let seed = derive_member_seed(313, i);
                let path = WienerPath::sample(seed, 2, dt, (0, 100_000)).unwrap();
                let end = flow::evolve_endpoint(&f, &spec, 1.0, &path, &x0, 0.0, 100.0).unwrap();
                usize::from(end.explosion.is_some())
            })
            .sum();
        assert_eq!(explosions, 0, "{scheme:?} exploded on {explosions} seeds");
    }
}
