//! Two-sided, reproducible Wiener path store with an exact shift operator.
//!
//! Increments are generated counter-style: each increment is a pure function
//! of `(seed, global index, component)`, so shifting the path in time is an
//! index shift, not a re-simulation. Two paths with equal
//! `(seed, delta, origin_offset)` agree bitwise on overlapping windows.
//!
//! # Exact shift algebra
//!
//! Every increment is rounded to the nearest multiple of 2⁻²⁶ after the
//! Gaussian draw. Sums of such values stay exactly representable in f64 as
//! long as they remain below 2²⁷ in magnitude (guaranteed by the window-size
//! cap below), so partial sums are associative and the identities
//!
//! ```text
//! W(shift(p, s), t) = W(p, t + s) − W(p, s)          (bitwise)
//! shift(shift(p, s), u) = shift(p, s + u)            (bitwise)
//! ```
//!
//! hold exactly, not merely to rounding error. The quantum 2⁻²⁶ ≈ 1.5e-8 is
//! far below the standard deviation √Δ of any increment at practical step
//! sizes, so the statistics are unaffected at estimator scale.
//!
//! # Seed derivation for ensembles
//!
//! Per-member seeds are derived as
//! `member_seed = mix64(base_seed XOR GAMMA.wrapping_mul(index + 1))`
//! where `mix64` is the SplitMix64 finalizer and GAMMA = 0x9E3779B97F4A7C15.
//! This mapping is part of the reproducibility contract and must not change.

use nalgebra::DVector;

use crate::error::{Error, Result};

/// Increment quantum: all increments are integer multiples of this.
const QUANTUM: f64 = 1.0 / 67_108_864.0; // 2^-26
const QUANTUM_INV: f64 = 67_108_864.0;

/// Cap on the number of increments a single window may span, chosen so that
/// every partial sum stays below 2²⁷ in magnitude and f64 addition of the
/// quantized increments is exact. Box-Muller draws are bounded by
/// √(2·54·ln 2) < 9, so the bound is 2²⁷ / (9 √Δ).
pub fn max_window_len(delta: f64) -> i64 {
    let cap = (134_217_728.0 / (9.0 * delta.sqrt())).floor();
    (cap as i64).min(1 << 34)
}

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const GAMMA2: u64 = 0xBF58_476D_1CE4_E5B9;
const GAMMA3: u64 = 0x94D0_49BB_1331_11EB;

/// SplitMix64 finalizer: a full-avalanche 64-bit permutation.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the seed for ensemble member `index` from a base seed.
///
/// Documented contract: `mix64(base ^ GAMMA * (index + 1))`.
#[inline]
pub fn derive_member_seed(base: u64, index: u64) -> u64 {
    mix64(base ^ GAMMA.wrapping_mul(index.wrapping_add(1)))
}

/// Keyed counter hash: one u64 lane per (seed, index, component, lane).
#[inline]
fn keyed(seed: u64, index: i64, component: u32, lane: u32) -> u64 {
    let mut z = mix64(seed ^ GAMMA.wrapping_mul(index as u64));
    z = mix64(z ^ GAMMA2.wrapping_mul(u64::from(component).wrapping_add(1)));
    mix64(z ^ GAMMA3.wrapping_mul(u64::from(lane).wrapping_add(1)))
}

/// Map a u64 to the open interval (0, 1).
#[inline]
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0) // 2^-53
}

/// Standard normal deviate for (seed, index, component) via Box-Muller.
#[inline]
pub fn standard_normal(seed: u64, index: i64, component: u32) -> f64 {
    let u1 = unit_open(keyed(seed, index, component, 0));
    let u2 = unit_open(keyed(seed, index, component, 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[inline]
fn quantize(x: f64) -> f64 {
    (x * QUANTUM_INV).round() * QUANTUM
}

/// A two-sided discrete Brownian path on a fixed grid of step `delta`.
///
/// The window `[k_min, k_max]` indexes grid *points* (model times k·Δ);
/// increment k spans [kΔ, (k+1)Δ) and exists for k in `[k_min, k_max)`.
/// `W(0) = 0` exactly for every path.
#[derive(Debug, Clone, PartialEq)]
pub struct WienerPath {
    seed: u64,
    dim: usize,
    delta: f64,
    k_min: i64,
    k_max: i64,
    origin_offset: i64,
    sqrt_delta: f64,
}

impl WienerPath {
    /// Sample a fresh path. The window is given in grid indices and must
    /// contain 0.
    pub fn sample(seed: u64, dim: usize, delta: f64, window: (i64, i64)) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::InvalidWindow(format!("delta must be positive, got {delta}")));
        }
        if dim == 0 {
            return Err(Error::InvalidWindow("noise dimension must be >= 1".into()));
        }
        let (k_min, k_max) = window;
        if k_min > k_max {
            return Err(Error::InvalidWindow(format!("empty window [{k_min}, {k_max}]")));
        }
        if !(k_min <= 0 && 0 <= k_max) {
            return Err(Error::InvalidWindow(format!(
                "window [{k_min}, {k_max}] does not contain 0"
            )));
        }
        let cap = max_window_len(delta);
        if k_max - k_min > cap {
            return Err(Error::InvalidWindow(format!(
                "window spans {} increments, exceeding the exact-summation cap {cap} at delta {delta}",
                k_max - k_min
            )));
        }
        Ok(WienerPath {
            seed,
            dim,
            delta,
            k_min,
            k_max,
            origin_offset: 0,
            sqrt_delta: delta.sqrt(),
        })
    }

    /// Sample a path whose window covers the model-time span `[t_min, t_max]`.
    pub fn sample_covering(seed: u64, dim: usize, delta: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let k_min = (t_min / delta).floor() as i64;
        let k_max = (t_max / delta).ceil() as i64;
        Self::sample(seed, dim, delta, (k_min.min(0), k_max.max(0)))
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn origin_offset(&self) -> i64 {
        self.origin_offset
    }

    /// Window of valid grid-point indices, inclusive.
    pub fn window(&self) -> (i64, i64) {
        (self.k_min, self.k_max)
    }

    /// Provenance pair recorded by trajectories.
    pub fn path_id(&self) -> (u64, i64) {
        (self.seed, self.origin_offset)
    }

    /// Brownian increment W((k+1)Δ) − W(kΔ), component-wise.
    ///
    /// Pure in (seed, k + origin_offset, component); regenerated on demand.
    pub fn increment(&self, k: i64) -> Result<DVector<f64>> {
        if k < self.k_min || k >= self.k_max {
            return Err(Error::WindowViolation {
                index: k,
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        Ok(self.increment_unchecked(k))
    }

    #[inline]
    pub(crate) fn increment_unchecked(&self, k: i64) -> DVector<f64> {
        let global = k + self.origin_offset;
        DVector::from_fn(self.dim, |c, _| {
            quantize(standard_normal(self.seed, global, c as u32) * self.sqrt_delta)
        })
    }

    /// Grid index of a model time, or an alignment error.
    pub fn index_of(&self, t: f64) -> Result<i64> {
        let k = (t / self.delta).round();
        if (t - k * self.delta).abs() > 1e-9 * self.delta.max(t.abs()) {
            return Err(Error::GridAlignment { t, delta: self.delta });
        }
        Ok(k as i64)
    }

    /// W(t): signed sum of increments between 0 and t, ascending index order.
    pub fn value(&self, t: f64) -> Result<DVector<f64>> {
        let k = self.index_of(t)?;
        let (lo, hi) = (k.min(0), k.max(0));
        if lo < self.k_min || hi > self.k_max {
            return Err(Error::WindowViolation {
                index: k,
                k_min: self.k_min,
                k_max: self.k_max,
            });
        }
        let mut w = DVector::zeros(self.dim);
        for j in lo..hi {
            w += self.increment_unchecked(j);
        }
        if k < 0 {
            w = -w;
        }
        Ok(w)
    }

    /// Shift operator: returns the path of the time-translated noise,
    /// (θ_s ω)(t) = ω(t+s) − ω(s). `s` must be a whole number of steps.
    pub fn shift(&self, s: f64) -> Result<WienerPath> {
        let m = self.index_of(s)?;
        let mut out = self.clone();
        out.origin_offset += m;
        out.k_min -= m;
        out.k_max -= m;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn path(seed: u64) -> WienerPath {
        WienerPath::sample(seed, 2, 0.001, (-1000, 1000)).unwrap()
    }

    #[test]
    fn value_at_origin_is_zero() {
        let p = path(7);
        assert_eq!(p.value(0.0).unwrap(), DVector::from_vec(vec![0.0, 0.0]));
    }

    #[test]
    fn value_one_step_is_first_increment() {
        let p = path(7);
        assert_eq!(p.value(0.001).unwrap(), p.increment(0).unwrap());
        assert_eq!(p.value(-0.001).unwrap(), -p.increment(-1).unwrap());
    }

    #[test]
    fn same_seed_bitwise_equal() {
        let a = path(99);
        let b = WienerPath::sample(99, 2, 0.001, (-50, 2000)).unwrap();
        for k in -50..1000 {
            assert_eq!(a.increment(k).unwrap(), b.increment(k).unwrap());
        }
    }

    #[test]
    fn shift_zero_is_identity() {
        let p = path(3);
        assert_eq!(p.shift(0.0).unwrap(), p);
    }

    #[test]
    fn shift_group_property_bitwise() {
        let p = path(3);
        let a = p.shift(0.005).unwrap().shift(-0.012).unwrap();
        let b = p.shift(-0.007).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shift_value_identity_bitwise() {
        let p = path(11);
        let delta = p.delta();
        let q = p.shift(3.0 * delta).unwrap();
        let lhs = q.value(2.0 * delta).unwrap();
        let rhs = p.value(5.0 * delta).unwrap() - p.value(3.0 * delta).unwrap();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn window_must_contain_zero() {
        assert!(WienerPath::sample(1, 1, 0.1, (1, 10)).is_err());
        assert!(WienerPath::sample(1, 1, 0.1, (-10, -1)).is_err());
        assert!(WienerPath::sample(1, 1, 0.1, (5, -5)).is_err());
    }

    #[test]
    fn misaligned_shift_rejected() {
        let p = path(1);
        assert!(matches!(p.shift(0.0005), Err(Error::GridAlignment { .. })));
    }

    #[test]
    fn value_outside_window_rejected() {
        let p = path(1);
        assert!(p.value(1.0001e3 * 0.001).is_err());
    }

    #[test]
    fn increment_moments() {
        // Mean within 4 standard errors of 0, variance within 4 SE of delta.
        let delta = 0.001;
        let p = WienerPath::sample(2024, 1, delta, (0, 1)).unwrap();
        let n = 100_000;
        let draws: Vec<f64> = (0..n)
            .map(|i| {
                let q = WienerPath::sample(derive_member_seed(p.seed(), i), 1, delta, (0, 1)).unwrap();
                q.increment(0).unwrap()[0]
            })
            .collect();
        let nf = n as f64;
        let mean = draws.iter().sum::<f64>() / nf;
        let var = draws.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (nf - 1.0);
        let se_mean = (delta / nf).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean} vs SE {se_mean}");
        let se_var = delta * (2.0 / nf).sqrt();
        assert!((var - delta).abs() < 4.0 * se_var, "var {var} vs delta {delta}");
    }

    #[test]
    fn w1_variance_over_seeds() {
        // Variance of W(1) over 1e5 seeds within 1 +- 0.02.
        let n = 100_000u64;
        let delta = 0.01;
        let steps = (1.0 / delta) as i64;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for i in 0..n {
            let p = WienerPath::sample(derive_member_seed(555, i), 1, delta, (0, steps)).unwrap();
            let w = p.value(1.0).unwrap()[0];
            sum += w;
            sumsq += w * w;
        }
        let nf = n as f64;
        let var = (sumsq - sum * sum / nf) / (nf - 1.0);
        assert!((var - 1.0).abs() < 0.02, "variance of W(1) = {var}");
    }

    #[test]
    fn lag_one_correlation_near_zero() {
        let p = WienerPath::sample(77, 1, 1.0, (0, 100_001)).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|k| p.increment(k).unwrap()[0]).collect();
        let nf = n as f64;
        let mean = xs.iter().sum::<f64>() / nf;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / nf;
        let mut cov = 0.0;
        for i in 0..(n as usize - 1) {
            cov += (xs[i] - mean) * (xs[i + 1] - mean);
        }
        cov /= nf - 1.0;
        let corr = cov / var;
        let se = 1.0 / nf.sqrt();
        assert!(corr.abs() < 4.0 * se, "lag-1 correlation {corr}");
    }

    #[test]
    fn kolmogorov_smirnov_standard_normal() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let p = WienerPath::sample(4242, 1, 1.0, (0, 10_001)).unwrap();
        let n = 10_000usize;
        let mut xs: Vec<f64> = (0..n as i64).map(|k| p.increment(k).unwrap()[0]).collect();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let normal = Normal::new(0.0, 1.0).unwrap();
        let mut d: f64 = 0.0;
        for (i, &x) in xs.iter().enumerate() {
            let cdf = normal.cdf(x);
            let lo = i as f64 / n as f64;
            let hi = (i + 1) as f64 / n as f64;
            d = d.max((cdf - lo).abs()).max((hi - cdf).abs());
        }
        // Asymptotic critical value at significance 0.001: sqrt(ln(2/alpha)/2)/sqrt(n).
        let crit = (f64::ln(2.0 / 0.001) / 2.0).sqrt() / (n as f64).sqrt();
        assert!(d < crit, "KS statistic {d} exceeds critical {crit}");
    }

    proptest! {
        #[test]
        fn shift_algebra_exact(seed in any::<u64>(), m1 in -200i64..200, m2 in -200i64..200,
                               lo in -400i64..=0, hi in 0i64..400) {
            let delta = 0.001;
            let p = WienerPath::sample(seed, 2, delta, (lo - 500, hi + 500)).unwrap();
            // Pre-shift so the tested path has a nonzero origin offset.
            let p = p.shift(m1 as f64 * delta).unwrap();
            let s = m2 as f64 * delta;
            let q = p.shift(s).unwrap();
            // Group property.
            let r1 = p.shift((m2 - 37) as f64 * delta).unwrap().shift(37.0 * delta).unwrap();
            prop_assert_eq!(&r1, &q);
            // Value identity, bitwise (exact by increment quantization).
            for &j in &[-3i64, 0, 1, 5] {
                let t = j as f64 * delta;
                if q.value(t).is_ok() && p.value(t + s).is_ok() && p.value(s).is_ok() {
                    let lhs = q.value(t).unwrap();
                    let rhs = p.value(t + s).unwrap() - p.value(s).unwrap();
                    prop_assert_eq!(lhs, rhs);
                }
            }
        }

        #[test]
        fn value_difference_is_increment_sum(seed in any::<u64>(), a in -300i64..300, b in -300i64..300) {
            let delta = 0.25;
            let p = WienerPath::sample(seed, 1, delta, (-400, 400)).unwrap();
            let (s, t) = (a.min(b), a.max(b));
            let mut acc = DVector::zeros(1);
            for k in s..t {
                acc += p.increment(k).unwrap();
            }
            let diff = p.value(t as f64 * delta).unwrap() - p.value(s as f64 * delta).unwrap();
            prop_assert_eq!(diff, acc);
        }
    }
}
