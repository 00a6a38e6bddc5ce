//! Gibbs invariant measure ρ = Z_σ⁻¹ e^{−2V/σ²} dx of a gradient SDE:
//! normalization, expectations, ball masses, long-run sampling, and the
//! Monte-Carlo fallback for d > 3.
//!
//! Quadrature is tensor trapezoid on a box [a,b]^d. For the smooth,
//! super-polynomially decaying densities in scope the trapezoid rule is
//! spectrally accurate once the box captures the tails, so error control is
//! refinement-based: the normalization constant on N and 2N−1 points per
//! axis must agree to 1e−6 relative or normalization fails. Internally the
//! density is scaled by exp(−max log-density) to keep small-σ wells inside
//! f64 range.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DriftField;
use crate::flow::{self, IntegratorSpec};
use crate::noise::WienerPath;

/// Relative tail-mass tolerance: the box must capture all but this much.
pub const DEFAULT_TAIL_TOL: f64 = 1e-8;

/// Relative agreement required between the N and 2N−1 point normalizations.
pub const REFINE_TOL: f64 = 1e-6;

fn default_points_per_axis(dim: usize) -> usize {
    match dim {
        1 => 2049,
        2 => 513,
        _ => 65,
    }
}

/// Normalized Gibbs measure on a quadrature box.
#[derive(Debug, Clone)]
pub struct GibbsMeasure {
    field: DriftField,
    sigma: f64,
    /// Box [a, b]^d.
    box_lo: f64,
    box_hi: f64,
    /// Fine grid points per axis (odd, nested over the coarse grid).
    n_fine: usize,
    /// Z with the log offset factored out: Z = z_tilde · e^{log_offset}.
    z_tilde: f64,
    log_offset: f64,
    tail_mass_estimate: f64,
}

impl GibbsMeasure {
    pub fn field(&self) -> &DriftField {
        &self.field
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn quadrature_box(&self) -> (f64, f64) {
        (self.box_lo, self.box_hi)
    }

    pub fn grid_points_per_axis(&self) -> usize {
        self.n_fine
    }

    pub fn tail_mass_estimate(&self) -> f64 {
        self.tail_mass_estimate
    }

    /// Normalization constant Z_σ = ∫ e^{−2V/σ²} dx.
    pub fn z(&self) -> f64 {
        self.z_tilde * self.log_offset.exp()
    }

    pub fn log_z(&self) -> f64 {
        self.z_tilde.ln() + self.log_offset
    }

    fn log_unnormalized(&self, x: &DVector<f64>) -> f64 {
        let v = self.field.potential_raw(x);
        -2.0 * v / (self.sigma * self.sigma)
    }

    /// Normalized density ρ(x).
    pub fn density(&self, x: &DVector<f64>) -> Result<f64> {
        let v = self.field.potential(x)?;
        Ok(((-2.0 * v / (self.sigma * self.sigma)) - self.log_offset).exp() / self.z_tilde)
    }

    /// Expectation ∫ f dρ by tensor quadrature. Returns the value on the
    /// fine grid and the refinement error |E_fine − E_coarse|.
    pub fn expect(&self, f: impl Fn(&DVector<f64>) -> f64 + Sync) -> Result<(f64, f64)> {
        let dim = self.field.dim();
        let fine = self.grid_sums(self.n_fine, &f)?;
        let coarse_n = (self.n_fine + 1) / 2;
        let coarse = self.grid_sums(coarse_n, &f)?;
        let e_fine = fine[1] / fine[0];
        let e_coarse = coarse[1] / coarse[0];
        if !e_fine.is_finite() {
            return Err(Error::Quadrature(format!(
                "expectation non-finite on the {dim}-d grid"
            )));
        }
        Ok((e_fine, (e_fine - e_coarse).abs()))
    }

    /// [Σ w ρ̃, Σ w f ρ̃] over the n-point tensor grid.
    fn grid_sums(&self, n: usize, f: &(impl Fn(&DVector<f64>) -> f64 + Sync)) -> Result<[f64; 2]> {
        let dim = self.field.dim();
        let offset = self.log_offset;
        let sums = tensor_sums(self.box_lo, self.box_hi, n, dim, &|x: &DVector<f64>| {
            let rho = (self.log_unnormalized(x) - offset).exp();
            [rho, f(x) * rho]
        });
        if sums.iter().any(|s| !s.is_finite()) {
            return Err(Error::Quadrature("non-finite integrand on grid".into()));
        }
        Ok(sums)
    }

    /// ρ(B(0, R)) by smooth polar/spherical quadrature of the density.
    pub fn ball_mass(&self, radius: f64) -> Result<f64> {
        if !(radius > 0.0) {
            return Err(Error::Quadrature(format!("ball radius must be positive, got {radius}")));
        }
        let dens = |x: &DVector<f64>| ((self.log_unnormalized(x)) - self.log_offset).exp() / self.z_tilde;
        let mass = match self.field.dim() {
            1 => simpson(-radius, radius, 2049, |x| dens(&DVector::from_vec(vec![x]))),
            2 => {
                // Polar: ∫_0^R ∫_0^{2π} ρ(r cos, r sin) r dθ dr; smooth, so
                // composite Simpson converges fast.
                simpson(0.0, radius, 513, |r| {
                    r * simpson(0.0, std::f64::consts::TAU, 513, |th| {
                        dens(&DVector::from_vec(vec![r * th.cos(), r * th.sin()]))
                    })
                })
            }
            3 => simpson(0.0, radius, 129, |r| {
                r * r
                    * simpson(0.0, std::f64::consts::PI, 129, |phi| {
                        phi.sin()
                            * simpson(0.0, std::f64::consts::TAU, 129, |th| {
                                dens(&DVector::from_vec(vec![
                                    r * phi.sin() * th.cos(),
                                    r * phi.sin() * th.sin(),
                                    r * phi.cos(),
                                ]))
                            })
                    })
            }),
            d => {
                return Err(Error::Unsupported(format!(
                    "ball_mass tensor quadrature supports d <= 3, got {d}"
                )))
            }
        };
        Ok(mass)
    }

    /// Quadrature mean and covariance (diagnostic companions for sampling).
    pub fn moments(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let d = self.field.dim();
        let mut mean = DVector::zeros(d);
        for i in 0..d {
            mean[i] = self.expect(|x| x[i])?.0;
        }
        let mut cov = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in i..d {
                let c = self.expect(|x| (x[i] - mean[i]) * (x[j] - mean[j]))?.0;
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        Ok((mean, cov))
    }

    /// Subsample one long trajectory of the SDE. `burn_in` and `thin` are in
    /// model time and must be positive.
    pub fn sample(
        &self,
        ispec: &IntegratorSpec,
        n: usize,
        seed: u64,
        burn_in: f64,
        thin: f64,
    ) -> Result<Vec<DVector<f64>>> {
        // Start at the box center; the burn-in carries the state to
        // rho-typicality.
        let x0 = DVector::from_element(self.field.dim(), 0.5 * (self.box_lo + self.box_hi));
        sample_trajectory(&self.field, self.sigma, ispec, &x0, n, seed, burn_in, thin)
    }
}

/// Normalize the Gibbs measure of a gradient field on a box [a,b]^d.
///
/// `box_` fixes the box (errors if its tail estimate exceeds `tail_tol`);
/// `None` starts from [−5,5]^d and expands until the tail estimate passes.
/// `n` is the coarse points-per-axis count; the stored fine grid has 2n−1.
pub fn normalize(
    field: &DriftField,
    sigma: f64,
    box_: Option<(f64, f64)>,
    n: Option<usize>,
    tail_tol: Option<f64>,
) -> Result<GibbsMeasure> {
    if !field.is_gradient() {
        return Err(Error::NonGradient(field.name().to_string()));
    }
    if field.is_circle() {
        return Err(Error::Unsupported("Gibbs quadrature on the circle geometry".into()));
    }
    let dim = field.dim();
    if dim > 3 {
        return Err(Error::Unsupported(format!(
            "tensor quadrature supports d <= 3 (got {dim}); use mc_expect"
        )));
    }
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Config {
            key: "noise.sigma".into(),
            message: format!("sigma must be positive and finite, got {sigma}"),
        });
    }
    let tail_tol = tail_tol.unwrap_or(DEFAULT_TAIL_TOL);
    let n_coarse = n.unwrap_or_else(|| default_points_per_axis(dim)).max(9);
    let n_fine = 2 * n_coarse - 1;
    let auto = box_.is_none();
    let (mut lo, mut hi) = box_.unwrap_or((-5.0, 5.0));
    if !(lo < hi) {
        return Err(Error::Config {
            key: "gibbs.box".into(),
            message: format!("invalid box [{lo}, {hi}]"),
        });
    }

    let log_density = |x: &DVector<f64>| -2.0 * field.potential_raw(x) / (sigma * sigma);
    let mut attempts = 0;
    loop {
        attempts += 1;
        // Pass 1: max log-density over the fine grid (overflow guard).
        let m = tensor_max(lo, hi, n_fine, dim, &log_density);
        if !m.is_finite() {
            return Err(Error::Quadrature("log-density non-finite on grid".into()));
        }
        // Pass 2: normalization sums and boundary shells.
        let (z_fine, shell0, shell1) = shell_sums(field, sigma, lo, hi, n_fine, m);
        let (z_coarse, _, _) = shell_sums(field, sigma, lo, hi, n_coarse, m);
        if !z_fine.is_finite() || z_fine <= 0.0 {
            return Err(Error::Quadrature("normalization sum non-finite".into()));
        }

        // Geometric tail extrapolation from the outer two shells: if the
        // density is not decaying across them, e^{-2V/sigma^2} is treated as
        // non-integrable on any box (mirrors the L^1 hypothesis).
        let h = (hi - lo) / (n_fine - 1) as f64;
        let shell0 = shell0 * h.powi(dim as i32);
        let shell1 = shell1 * h.powi(dim as i32);
        let ratio = if shell1 > 0.0 { shell0 / shell1 } else { 0.0 };
        if ratio >= 1.0 - 1e-12 && shell0 > 0.0 {
            if attempts <= 4 && auto {
                // Could still be a too-small box around a flat region.
                hi *= 1.4;
                lo *= 1.4;
                continue;
            }
            return Err(Error::NonIntegrable(format!(
                "boundary density not decaying on [{lo:.3}, {hi:.3}]^{dim} (shell ratio {ratio:.3})"
            )));
        }
        let tail = if ratio > 0.0 {
            (shell0 * ratio / (1.0 - ratio) / z_fine).abs()
        } else {
            0.0
        };

        if tail > tail_tol {
            if auto && attempts < 24 {
                hi *= 1.4;
                lo *= 1.4;
                continue;
            }
            return Err(Error::Quadrature(format!(
                "tail mass estimate {tail:.3e} exceeds tolerance {tail_tol:.1e} on [{lo:.3}, {hi:.3}]^{dim}"
            )));
        }

        let rel = (z_fine - z_coarse).abs() / z_fine;
        if rel > REFINE_TOL {
            return Err(Error::Quadrature(format!(
                "normalization not converged: N vs 2N-1 relative difference {rel:.3e}"
            )));
        }

        return Ok(GibbsMeasure {
            field: field.clone(),
            sigma,
            box_lo: lo,
            box_hi: hi,
            n_fine,
            z_tilde: z_fine,
            log_offset: m,
            tail_mass_estimate: tail,
        });
    }
}

/// (Σ w ρ̃, Σ ρ̃ over the outermost grid layer, Σ ρ̃ over the next layer in)
/// on the n-point grid. The layer sums are unweighted so their ratio tracks
/// the density decay; multiply by h^d for a slab-mass estimate.
fn shell_sums(
    field: &DriftField,
    sigma: f64,
    lo: f64,
    hi: f64,
    n: usize,
    log_offset: f64,
) -> (f64, f64, f64) {
    let dim = field.dim();
    let h = (hi - lo) / (n - 1) as f64;
    let rows: Vec<[f64; 3]> = (0..n)
        .into_par_iter()
        .map(|j0| {
            let mut acc = [0.0f64; 3];
            let mut x = DVector::zeros(dim);
            let w0 = axis_weight(j0, n, h);
            x[0] = lo + j0 as f64 * h;
            match dim {
                1 => {
                    let raw = (-2.0 * field.potential_raw(&x) / (sigma * sigma) - log_offset).exp();
                    acc[0] += w0 * raw;
                    let layer = boundary_layer(&[j0], n);
                    if layer == 0 {
                        acc[1] += raw;
                    } else if layer == 1 {
                        acc[2] += raw;
                    }
                }
                2 => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        let w = w0 * axis_weight(j1, n, h);
                        let raw = (-2.0 * field.potential_raw(&x) / (sigma * sigma) - log_offset).exp();
                        acc[0] += w * raw;
                        let layer = boundary_layer(&[j0, j1], n);
                        if layer == 0 {
                            acc[1] += raw;
                        } else if layer == 1 {
                            acc[2] += raw;
                        }
                    }
                }
                _ => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        let w01 = w0 * axis_weight(j1, n, h);
                        for j2 in 0..n {
                            x[2] = lo + j2 as f64 * h;
                            let w = w01 * axis_weight(j2, n, h);
                            let raw = (-2.0 * field.potential_raw(&x) / (sigma * sigma) - log_offset)
                                .exp();
                            acc[0] += w * raw;
                            let layer = boundary_layer(&[j0, j1, j2], n);
                            if layer == 0 {
                                acc[1] += raw;
                            } else if layer == 1 {
                                acc[2] += raw;
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0f64; 3];
    for r in rows {
        for k in 0..3 {
            total[k] += r[k];
        }
    }
    (total[0], total[1], total[2])
}

/// 0 for the outermost grid layer, 1 for the next one in, 2 otherwise.
fn boundary_layer(idx: &[usize], n: usize) -> usize {
    let mut min_dist = usize::MAX;
    for &j in idx {
        min_dist = min_dist.min(j).min(n - 1 - j);
    }
    min_dist.min(2)
}

#[inline]
fn axis_weight(j: usize, n: usize, h: f64) -> f64 {
    if j == 0 || j == n - 1 {
        0.5 * h
    } else {
        h
    }
}

/// Ordered parallel tensor sum of K integrand components.
fn tensor_sums<const K: usize>(
    lo: f64,
    hi: f64,
    n: usize,
    dim: usize,
    g: &(impl Fn(&DVector<f64>) -> [f64; K] + Sync),
) -> [f64; K] {
    let h = (hi - lo) / (n - 1) as f64;
    let rows: Vec<[f64; K]> = (0..n)
        .into_par_iter()
        .map(|j0| {
            let mut acc = [0.0f64; K];
            let mut x = DVector::zeros(dim);
            let w0 = axis_weight(j0, n, h);
            x[0] = lo + j0 as f64 * h;
            match dim {
                1 => {
                    let vals = g(&x);
                    for k in 0..K {
                        acc[k] += w0 * vals[k];
                    }
                }
                2 => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        let w = w0 * axis_weight(j1, n, h);
                        let vals = g(&x);
                        for k in 0..K {
                            acc[k] += w * vals[k];
                        }
                    }
                }
                _ => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        let w01 = w0 * axis_weight(j1, n, h);
                        for j2 in 0..n {
                            x[2] = lo + j2 as f64 * h;
                            let w = w01 * axis_weight(j2, n, h);
                            let vals = g(&x);
                            for k in 0..K {
                                acc[k] += w * vals[k];
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    let mut total = [0.0f64; K];
    for r in rows {
        for k in 0..K {
            total[k] += r[k];
        }
    }
    total
}

fn tensor_max(lo: f64, hi: f64, n: usize, dim: usize, g: &(impl Fn(&DVector<f64>) -> f64 + Sync)) -> f64 {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n)
        .into_par_iter()
        .map(|j0| {
            let mut best = f64::NEG_INFINITY;
            let mut x = DVector::zeros(dim);
            x[0] = lo + j0 as f64 * h;
            match dim {
                1 => best = best.max(g(&x)),
                2 => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        best = best.max(g(&x));
                    }
                }
                _ => {
                    for j1 in 0..n {
                        x[1] = lo + j1 as f64 * h;
                        for j2 in 0..n {
                            x[2] = lo + j2 as f64 * h;
                            best = best.max(g(&x));
                        }
                    }
                }
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

/// Composite Simpson rule with an odd number of nodes.
fn simpson(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = if n % 2 == 0 { n + 1 } else { n };
    let h = (b - a) / (n - 1) as f64;
    let mut acc = f(a) + f(b);
    for j in 1..n - 1 {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    acc * h / 3.0
}

/// Long-run subsampled states of one trajectory (works in any dimension,
/// gradient or not; the ergodic sampler behind `mc_expect`).
#[allow(clippy::too_many_arguments)]
pub fn sample_trajectory(
    field: &DriftField,
    sigma: f64,
    ispec: &IntegratorSpec,
    x0: &DVector<f64>,
    n: usize,
    seed: u64,
    burn_in: f64,
    thin: f64,
) -> Result<Vec<DVector<f64>>> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if !(burn_in > 0.0) || !(thin > 0.0) {
        return Err(Error::Config {
            key: "sample.burn_in/thin".into(),
            message: "burn-in and thinning times must be positive".into(),
        });
    }
    let dt = ispec.dt;
    let burn_steps = (burn_in / dt).round().max(1.0) as i64;
    let thin_steps = (thin / dt).round().max(1.0) as i64;
    let total = burn_steps + thin_steps * n as i64;
    let path = WienerPath::sample(seed, field.noise_dim(), dt, (0, total))?;
    let mut out = Vec::with_capacity(n);
    let (_, explosion) = flow::evolve_observe(
        field,
        ispec,
        sigma,
        &path,
        x0,
        0.0,
        total as f64 * dt,
        |step, _t, x| {
            let s = step as i64;
            if s > burn_steps && (s - burn_steps) % thin_steps == 0 {
                out.push(x.clone());
            }
        },
    )?;
    if let Some(ev) = explosion {
        return Err(Error::Explosion {
            step: ev.step,
            t: ev.t,
            threshold: flow::EXPLOSION_NORM,
        });
    }
    Ok(out)
}

/// Monte-Carlo expectation of f under the invariant measure via long-run
/// sampling; the fallback for d > 3 where tensor quadrature is unavailable.
/// The standard error comes from 20 block averages, which absorbs the
/// residual autocorrelation of the thinned chain.
#[allow(clippy::too_many_arguments)]
pub fn mc_expect(
    field: &DriftField,
    sigma: f64,
    ispec: &IntegratorSpec,
    f: impl Fn(&DVector<f64>) -> f64,
    n: usize,
    seed: u64,
    burn_in: f64,
    thin: f64,
) -> Result<(f64, f64)> {
    if n < 20 {
        return Err(Error::Config {
            key: "mc.n".into(),
            message: "need at least 20 samples for block standard errors".into(),
        });
    }
    let x0 = DVector::zeros(field.dim());
    let points = sample_trajectory(field, sigma, ispec, &x0, n, seed, burn_in, thin)?;
    let vals: Vec<f64> = points.iter().map(|p| f(p)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("observable non-finite on samples".into()));
    }
    Ok(crate::stats::block_mean_se(&vals, 20))
}
