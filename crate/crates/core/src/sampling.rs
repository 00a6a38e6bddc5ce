//! Deterministic low-discrepancy point sets: Halton sequences over boxes,
//! Vogel/Fibonacci meshes of balls and spheres, and annulus samplers for
//! the condition checkers. Everything is a pure function of its index
//! arguments, so parallel consumers stay reproducible.

use nalgebra::DVector;

use crate::noise::standard_normal;

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];
const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653; // pi (3 - sqrt 5)

/// Radical-inverse (van der Corput) value of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut inv = 0.0;
    let mut denom = 1.0;
    while index > 0 {
        denom *= base as f64;
        inv += (index % base) as f64 / denom;
        index /= base;
    }
    inv
}

/// k-th Halton point in [0,1)^dim (index offset 1 to skip the origin).
pub fn halton(index: u64, dim: usize, base_offset: usize) -> Vec<f64> {
    (0..dim)
        .map(|a| radical_inverse(index + 1, PRIMES[(base_offset + a) % PRIMES.len()]))
        .collect()
}

/// k-th low-discrepancy point of the box [lo, hi]^dim.
pub fn box_point(index: u64, dim: usize, lo: f64, hi: f64, base_offset: usize) -> DVector<f64> {
    let u = halton(index, dim, base_offset);
    DVector::from_fn(dim, |i, _| lo + (hi - lo) * u[i])
}

/// k-th unit direction: uniform angles (d = 2), Fibonacci sphere (d = 3),
/// normalized counter-RNG Gaussian for higher dimensions.
pub fn unit_direction(index: u64, n_total: u64, dim: usize, seed: u64) -> DVector<f64> {
    match dim {
        1 => DVector::from_vec(vec![if index % 2 == 0 { 1.0 } else { -1.0 }]),
        2 => {
            let th = index as f64 * GOLDEN_ANGLE;
            DVector::from_vec(vec![th.cos(), th.sin()])
        }
        3 => {
            // Fibonacci sphere.
            let n = n_total.max(1) as f64;
            let z = 1.0 - 2.0 * (index as f64 + 0.5) / n;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let th = index as f64 * GOLDEN_ANGLE;
            DVector::from_vec(vec![r * th.cos(), r * th.sin(), z])
        }
        d => {
            let mut v = DVector::from_fn(d, |i, _| {
                standard_normal(seed ^ 0x5EED_D1E5, index as i64, i as u32)
            });
            let n = v.norm();
            if n == 0.0 {
                v[0] = 1.0;
            } else {
                v /= n;
            }
            v
        }
    }
}

/// Mesh of `n` points covering the sphere and interior of B(center, radius).
///
/// Rule (documented for reproducibility): the first half of the points lies
/// on the boundary sphere (equally spaced golden-angle directions; for
/// d = 1 the two endpoints), the second half fills the interior with radii
/// r_i = radius * (u_i)^{1/d} from the van der Corput sequence, which is
/// volume-uniform.
pub fn ball_mesh(center: &DVector<f64>, radius: f64, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let dim = center.len();
    let mut pts = Vec::with_capacity(n);
    if n == 0 {
        return pts;
    }
    let n_boundary = (n / 2).max(1).min(n);
    for i in 0..n_boundary {
        let dir = unit_direction(i as u64, n_boundary as u64, dim, seed);
        pts.push(center + dir * radius);
    }
    let n_inner = n - n_boundary;
    for i in 0..n_inner {
        let dir = unit_direction((i + n_boundary) as u64, n as u64, dim, seed);
        let u = radical_inverse(i as u64 + 1, 2);
        let r = radius * u.powf(1.0 / dim as f64);
        pts.push(center + dir * r);
    }
    pts
}

/// k-th point of the annulus { r_lo < |x| <= r_hi }, volume-uniform in the
/// radius, low-discrepancy in the direction.
pub fn annulus_point(
    index: u64,
    n_total: u64,
    dim: usize,
    r_lo: f64,
    r_hi: f64,
    seed: u64,
) -> DVector<f64> {
    let dir = unit_direction(index, n_total, dim, seed);
    let u = radical_inverse(index + 1, 3);
    let d = dim as f64;
    let r = (r_lo.powf(d) + u * (r_hi.powf(d) - r_lo.powf(d))).powf(1.0 / d);
    dir * r
}

fn stream_bases(stream: usize) -> [u64; 3] {
    match stream % 2 {
        0 => [2, 3, 5],
        _ => [7, 11, 13],
    }
}

/// k-th low-discrepancy point of the closed ball B(center, radius), with
/// two independent streams so that pair sampling covers the product space.
pub fn ball_point_stream(
    index: u64,
    center: &DVector<f64>,
    radius: f64,
    stream: usize,
    seed: u64,
) -> DVector<f64> {
    let dim = center.len();
    let b = stream_bases(stream);
    match dim {
        1 => {
            let u = radical_inverse(index + 1, b[0]);
            center + DVector::from_vec(vec![radius * (2.0 * u - 1.0)])
        }
        2 => {
            let th = std::f64::consts::TAU * radical_inverse(index + 1, b[0]);
            let r = radius * radical_inverse(index + 1, b[1]).sqrt();
            center + DVector::from_vec(vec![r * th.cos(), r * th.sin()])
        }
        3 => {
            let z = 2.0 * radical_inverse(index + 1, b[0]) - 1.0;
            let th = std::f64::consts::TAU * radical_inverse(index + 1, b[1]);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let r = radius * radical_inverse(index + 1, b[2]).powf(1.0 / 3.0);
            center + DVector::from_vec(vec![r * rho * th.cos(), r * rho * th.sin(), r * z])
        }
        d => {
            let dir = unit_direction(index, u64::MAX, d, seed ^ (stream as u64).wrapping_mul(0xABCD));
            let r = radius * radical_inverse(index + 1, b[0]).powf(1.0 / d as f64);
            center + dir * r
        }
    }
}

/// k-th low-discrepancy point of the annulus { r_lo < |x| <= r_hi } with
/// independent streams (volume-uniform radius).
pub fn annulus_point_stream(
    index: u64,
    dim: usize,
    r_lo: f64,
    r_hi: f64,
    stream: usize,
    seed: u64,
) -> DVector<f64> {
    let b = stream_bases(stream);
    let d = dim as f64;
    let u = radical_inverse(index + 1, b[2 % b.len()]);
    let r = (r_lo.powf(d) + u * (r_hi.powf(d) - r_lo.powf(d))).powf(1.0 / d);
    let dir = match dim {
        1 => DVector::from_vec(vec![if radical_inverse(index + 1, b[0]) < 0.5 { -1.0 } else { 1.0 }]),
        2 => {
            let th = std::f64::consts::TAU * radical_inverse(index + 1, b[0]);
            DVector::from_vec(vec![th.cos(), th.sin()])
        }
        3 => {
            let z = 2.0 * radical_inverse(index + 1, b[0]) - 1.0;
            let th = std::f64::consts::TAU * radical_inverse(index + 1, b[1]);
            let rho = (1.0 - z * z).max(0.0).sqrt();
            DVector::from_vec(vec![rho * th.cos(), rho * th.sin(), z])
        }
        d_ => unit_direction(index, u64::MAX, d_, seed ^ (stream as u64).wrapping_mul(0x1234)),
    };
    dir * r
}

/// Gaussian jitter cloud around a point, for the local refinement rounds of
/// the condition checkers.
pub fn jitter(center: &DVector<f64>, scale: f64, seed: u64, index: i64) -> DVector<f64> {
    DVector::from_fn(center.len(), |i, _| {
        center[i] + scale * standard_normal(seed, index, i as u32)
    })
}
