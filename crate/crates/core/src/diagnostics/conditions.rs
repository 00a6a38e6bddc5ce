//! Constructive checkers for the drift conditions: one-sided Lipschitz,
//! eventual strict monotonicity, monotonicity on large sets, and the
//! directional gradient inequality.
//!
//! Every checker samples the relevant one-sided quotient
//! (b(x) − b(y), x − y)/|x − y|² over low-discrepancy pairs, then runs
//! local refinement rounds around the running maximizer; the quotient's
//! supremum may sit on a low-dimensional set (radial pairs for the double
//! well), which plain sampling would miss.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::sampling::{annulus_point_stream, ball_point_stream, box_point, jitter};

const REFINE_ROUNDS: usize = 10;
const REFINE_SAMPLES: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    OneSidedLipschitz,
    EventualMonotone,
    MonotoneLargeSets,
    GradientDirection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    SatisfiedEmpirically,
    ViolatedWithWitness,
    Inconclusive,
}

/// Outcome of a condition check, with the witnesses that support it.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditionReport {
    pub kind: ConditionKind,
    pub verdict: Verdict,
    /// λ̂ (one-sided), λ̂₁ (eventual monotone), max quotient (large sets),
    /// or the directional inner product (gradient direction).
    pub lambda_hat: Option<f64>,
    pub witness_pair: Option<(Vec<f64>, Vec<f64>)>,
    pub witness_point: Option<Vec<f64>>,
    pub samples_used: usize,
}

fn quotient(field: &DriftField, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
    let diff = x - y;
    let d2 = diff.norm_squared();
    if d2 == 0.0 {
        return None;
    }
    let q = (field.drift_raw(x) - field.drift_raw(y)).dot(&diff) / d2;
    q.is_finite().then_some(q)
}

struct QuotientMax {
    value: f64,
    pair: (DVector<f64>, DVector<f64>),
    samples: usize,
}

/// Scan low-discrepancy pairs, then refine locally around the maximizer
/// with shrinking Gaussian clouds projected back into the region.
fn max_quotient(
    field: &DriftField,
    n_pairs: usize,
    seed: u64,
    sample_pair: impl Fn(u64) -> (DVector<f64>, DVector<f64>),
    project: impl Fn(DVector<f64>) -> DVector<f64>,
    region_scale: f64,
) -> Result<QuotientMax> {
    let mut best: Option<QuotientMax> = None;
    let mut samples = 0;
    for k in 0..n_pairs as u64 {
        let (x, y) = sample_pair(k);
        samples += 1;
        if let Some(q) = quotient(field, &x, &y) {
            if best.as_ref().is_none_or(|b| q > b.value) {
                best = Some(QuotientMax { value: q, pair: (x, y), samples: 0 });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Config {
        key: "check.n_pairs".into(),
        message: "no valid pairs sampled".into(),
    })?;
    for round in 0..REFINE_ROUNDS {
        let scale = region_scale * 0.5f64.powi(round as i32 + 1);
        let round_seed = seed ^ ((round as u64 + 1) << 32);
        for i in 0..REFINE_SAMPLES as i64 {
            let x = project(jitter(&best.pair.0, scale, round_seed, 2 * i));
            let y = project(jitter(&best.pair.1, scale, round_seed, 2 * i + 1));
            samples += 1;
            if let Some(q) = quotient(field, &x, &y) {
                if q > best.value {
                    best = QuotientMax { value: q, pair: (x, y), samples: 0 };
                }
            }
        }
    }
    best.samples = samples;
    Ok(best)
}

/// Estimate λ̂ = sup (b(x) − b(y), x − y)/|x − y|² over a box and compare
/// against the field's declared one-sided constant (when present).
pub fn check_one_sided_lipschitz(
    field: &DriftField,
    box_lo: f64,
    box_hi: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if n_pairs == 0 {
        return Err(Error::Config {
            key: "check.n_pairs".into(),
            message: "need at least one pair".into(),
        });
    }
    let dim = field.dim();
    let clamp = move |mut p: DVector<f64>| {
        for v in p.iter_mut() {
            *v = v.clamp(box_lo, box_hi);
        }
        p
    };
    let best = max_quotient(
        field,
        n_pairs,
        seed,
        |k| {
            (
                box_point(k, dim, box_lo, box_hi, 0),
                box_point(k, dim, box_lo, box_hi, dim),
            )
        },
        clamp,
        box_hi - box_lo,
    )?;
    let (verdict, witness_pair) = match field.one_sided_constant() {
        Some(declared) if best.value <= declared + 1e-9 => (Verdict::SatisfiedEmpirically, None),
        Some(_) => (
            Verdict::ViolatedWithWitness,
            Some((
                best.pair.0.iter().copied().collect(),
                best.pair.1.iter().copied().collect(),
            )),
        ),
        None => (Verdict::Inconclusive, None),
    };
    Ok(ConditionReport {
        kind: ConditionKind::OneSidedLipschitz,
        verdict,
        lambda_hat: Some(best.value),
        witness_pair,
        witness_point: None,
        samples_used: best.samples,
    })
}

/// Eventual strict monotonicity: λ̂₁ = −sup of the quotient over pairs with
/// |x|, |y| in (R, 4R]. Satisfied empirically iff λ̂₁ > 0.
pub fn check_eventual_monotone(
    field: &DriftField,
    radius: f64,
    n_pairs: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if !(radius > 0.0) {
        return Err(Error::Config {
            key: "check.R".into(),
            message: "annulus radius must be positive".into(),
        });
    }
    let dim = field.dim();
    let (r_lo, r_hi) = (radius, 4.0 * radius);
    let project = move |p: DVector<f64>| {
        let r = p.norm();
        if r <= r_lo {
            // Push just outside the inner sphere, preserving direction.
            if r == 0.0 {
                let mut q = DVector::zeros(p.len());
                q[0] = r_lo * (1.0 + 1e-9);
                q
            } else {
                &p * (r_lo * (1.0 + 1e-9) / r)
            }
        } else if r > r_hi {
            &p * (r_hi / r)
        } else {
            p
        }
    };
    let best = max_quotient(
        field,
        n_pairs,
        seed,
        |k| {
            (
                annulus_point_stream(k, dim, r_lo, r_hi, 0, seed),
                annulus_point_stream(k, dim, r_lo, r_hi, 1, seed),
            )
        },
        project,
        radius,
    )?;
    let lambda1 = -best.value;
    let (verdict, witness_pair) = if lambda1 > 0.0 {
        (Verdict::SatisfiedEmpirically, None)
    } else if best.value > 0.0 {
        (
            Verdict::ViolatedWithWitness,
            Some((
                best.pair.0.iter().copied().collect(),
                best.pair.1.iter().copied().collect(),
            )),
        )
    } else {
        // Max quotient exactly zero: not strictly monotone, no strict
        // violation either.
        (Verdict::Inconclusive, None)
    };
    Ok(ConditionReport {
        kind: ConditionKind::EventualMonotone,
        verdict,
        lambda_hat: Some(lambda1),
        witness_pair,
        witness_point: None,
    samples_used: best.samples,
    })
}

/// Search the candidate centers for a ball B(z, 3r) on which the drift is
/// strictly monotone (all sampled quotients negative). Returns the first
/// passing candidate, or Inconclusive when none passes.
pub fn check_monotone_on_large_sets(
    field: &DriftField,
    r: f64,
    z_candidates: &[DVector<f64>],
    n_pairs: usize,
    seed: u64,
) -> Result<ConditionReport> {
    if !(r > 0.0) || z_candidates.is_empty() {
        return Err(Error::Config {
            key: "check.monotone_large_sets".into(),
            message: "need a positive radius and at least one candidate center".into(),
        });
    }
    let ball_r = 3.0 * r;
    let mut samples_total = 0;
    for z in z_candidates {
        let zc = z.clone();
        let project = move |p: DVector<f64>| {
            let d = &p - &zc;
            let n = d.norm();
            if n > ball_r {
                &zc + d * (ball_r / n)
            } else {
                p
            }
        };
        let best = max_quotient(
            field,
            n_pairs,
            seed,
            |k| {
                (
                    ball_point_stream(k, z, ball_r, 0, seed),
                    ball_point_stream(k, z, ball_r, 1, seed),
                )
            },
            project,
            ball_r,
        )?;
        samples_total += best.samples;
        if best.value < 0.0 {
            return Ok(ConditionReport {
                kind: ConditionKind::MonotoneLargeSets,
                verdict: Verdict::SatisfiedEmpirically,
                lambda_hat: Some(best.value),
                witness_pair: None,
                witness_point: Some(z.iter().copied().collect()),
                samples_used: samples_total,
            });
        }
    }
    Ok(ConditionReport {
        kind: ConditionKind::MonotoneLargeSets,
        verdict: Verdict::Inconclusive,
        lambda_hat: None,
        witness_pair: None,
        witness_point: None,
        samples_used: samples_total,
    })
}

/// Find z in the grid with (b(z) − b(z − v), v) < 0.
pub fn gradient_direction_search(
    field: &DriftField,
    v: &DVector<f64>,
    z_grid: &[DVector<f64>],
) -> Result<ConditionReport> {
    if v.norm() == 0.0 {
        return Err(Error::Config {
            key: "check.v".into(),
            message: "direction v must be nonzero".into(),
        });
    }
    let mut samples = 0;
    for z in z_grid {
        samples += 1;
        let s = (field.eval_drift(z)? - field.eval_drift(&(z - v))?).dot(v);
        if s < 0.0 {
            return Ok(ConditionReport {
                kind: ConditionKind::GradientDirection,
                verdict: Verdict::SatisfiedEmpirically,
                lambda_hat: Some(s),
                witness_pair: None,
                witness_point: Some(z.iter().copied().collect()),
                samples_used: samples,
            });
        }
    }
    Ok(ConditionReport {
        kind: ConditionKind::GradientDirection,
        verdict: Verdict::Inconclusive,
        lambda_hat: None,
        witness_pair: None,
        witness_point: None,
        samples_used: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{build_custom, BuiltinSpec};

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    #[test]
    fn osl_ou_exact() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let r = check_one_sided_lipschitz(&f, -3.0, 3.0, 2000, 1).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        let l = r.lambda_hat.unwrap();
        assert!((l - (-1.0)).abs() < 1e-12, "lambda_hat {l}");
    }

    #[test]
    fn osl_double_well_peaks_at_origin() {
        // Pairs near 0 drive the quotient to b'(0) = 1.
        let f = BuiltinSpec::DoubleWell { dim: 1 }.build().unwrap();
        let r = check_one_sided_lipschitz(&f, -3.0, 3.0, 4000, 3).unwrap();
        let l = r.lambda_hat.unwrap();
        assert!(l > 0.95 && l <= 1.0 + 1e-9, "lambda_hat {l}");
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
    }

    #[test]
    fn osl_violation_carries_replayable_witness() {
        // A double-well copy with a too-small declared constant.
        let f = build_custom(1, &["x1 - x1^3".into()])
            .unwrap()
            .with_declared_one_sided(0.5);
        let r = check_one_sided_lipschitz(&f, -2.0, 2.0, 2000, 9).unwrap();
        assert_eq!(r.verdict, Verdict::ViolatedWithWitness);
        let (wx, wy) = r.witness_pair.unwrap();
        let q = f
            .one_sided_quotient(&DVector::from_vec(wx), &DVector::from_vec(wy))
            .unwrap();
        assert!(q > 0.5, "witness replays to {q}");
        assert!((q - r.lambda_hat.unwrap()).abs() < 1e-12);
    }

    #[test]
    fn eventual_monotone_ou() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let r = check_eventual_monotone(&f, 1.0, 2000, 5).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        assert!((r.lambda_hat.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn eventual_monotone_double_well_r2() {
        // Constrained maximization gives sup quotient = 1 - R² on the inner
        // sphere, so lambda_1 = R² - 1 = 3 at R = 2.
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let r = check_eventual_monotone(&f, 2.0, 4000, 5).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        let l1 = r.lambda_hat.unwrap();
        assert!((l1 - 3.0).abs() < 0.1, "lambda_1 {l1}");
    }

    #[test]
    fn eventual_monotone_double_well_small_r_violated() {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let r = check_eventual_monotone(&f, 0.5, 4000, 5).unwrap();
        assert_eq!(r.verdict, Verdict::ViolatedWithWitness);
        let (wx, wy) = r.witness_pair.unwrap();
        let q = f
            .one_sided_quotient(&DVector::from_vec(wx), &DVector::from_vec(wy))
            .unwrap();
        assert!(q > 0.0, "witness quotient {q}");
    }

    #[test]
    fn monotone_large_sets_ou_any_center() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let r =
            check_monotone_on_large_sets(&f, 1.0, &[v2(0.0, 0.0)], 1000, 3).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        assert_eq!(r.witness_point.unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn monotone_large_sets_double_well_needs_distant_center() {
        // B(z, 3) must clear the unit ball where b' > 0, so |z| = 3 fails
        // and |z| = 4.5 passes.
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let candidates = vec![v2(2.0, 0.0), v2(3.0, 0.0), v2(4.5, 0.0), v2(6.0, 0.0)];
        let r = check_monotone_on_large_sets(&f, 1.0, &candidates, 3000, 11).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        assert_eq!(r.witness_point.unwrap(), vec![4.5, 0.0]);
    }

    #[test]
    fn monotone_large_sets_constant_drift_inconclusive() {
        let f = build_custom(2, &["1.5".into(), "-0.5".into()]).unwrap();
        let r = check_monotone_on_large_sets(&f, 1.0, &[v2(0.0, 0.0)], 500, 1).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn gradient_direction_ou_everywhere() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let v = v2(0.3, -0.4);
        let r = gradient_direction_search(&f, &v, &[v2(1.0, 1.0)]).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        // (b(z) - b(z-v), v) = (-v, v) = -|v|².
        assert!((r.lambda_hat.unwrap() - (-0.25)).abs() < 1e-12);
    }

    #[test]
    fn gradient_direction_double_well_arithmetic() {
        // d=1, v=2, z=3: (b(3) - b(1)) * 2 = ((3-27) - 0) * 2 = -48.
        let f = BuiltinSpec::DoubleWell { dim: 1 }.build().unwrap();
        let v = DVector::from_vec(vec![2.0]);
        let grid = vec![DVector::from_vec(vec![3.0])];
        let r = gradient_direction_search(&f, &v, &grid).unwrap();
        assert_eq!(r.verdict, Verdict::SatisfiedEmpirically);
        assert_eq!(r.lambda_hat.unwrap(), -48.0);
    }

    #[test]
    fn gradient_direction_constant_drift_inconclusive() {
        let f = build_custom(1, &["2.0".into()]).unwrap();
        let v = DVector::from_vec(vec![1.0]);
        let r = gradient_direction_search(&f, &v, &[DVector::from_vec(vec![0.0])]).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }
}
