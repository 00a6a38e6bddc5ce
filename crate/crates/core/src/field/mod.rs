//! Drift fields b (and potentials V where applicable), their derivatives,
//! and the explicit example systems.
//!
//! A [`DriftField`] is immutable after construction and safely shareable
//! across workers; evaluation is pure. Analytic Jacobians/Hessians are
//! attached where available; otherwise central finite differences with step
//! [`FD_STEP`] are used.

mod builtins;
mod expr;

pub use builtins::BuiltinSpec;
pub use expr::{build_custom, Expr};

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Central finite-difference step for gradient/Jacobian fallbacks.
/// Balances truncation against roundoff at double precision for the smooth
/// polynomial/Gaussian fields in scope.
pub const FD_STEP: f64 = 1e-5;

pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;

/// State-dependent diffusion coefficients for the angular (circle) geometry.
///
/// The circle SDE is stated in Stratonovich form
/// dα = b(α) dt + Σ_k σ_k(α) ∘ dW^k; its Itô drift correction
/// ½ Σ_k σ_k(α) σ_k'(α) is evaluated numerically from the coefficient
/// closures (central differences, step [`FD_STEP`]) so that arbitrary circle
/// fields work, not only the built-in example where it vanishes.
#[derive(Clone)]
pub struct CircleDiffusion {
    sigmas: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl CircleDiffusion {
    pub fn new(sigmas: Vec<Arc<dyn Fn(f64) -> f64 + Send + Sync>>) -> Self {
        CircleDiffusion { sigmas }
    }

    /// Number of independent Wiener components driving the angle.
    pub fn noise_dim(&self) -> usize {
        self.sigmas.len()
    }

    pub fn sigma(&self, k: usize, alpha: f64) -> f64 {
        (self.sigmas[k])(alpha)
    }

    /// Stratonovich-to-Itô drift correction ½ Σ σ_k σ_k' at unit intensity.
    pub fn ito_correction(&self, alpha: f64) -> f64 {
        let h = FD_STEP;
        self.sigmas
            .iter()
            .map(|s| {
                let d = (s(alpha + h) - s(alpha - h)) / (2.0 * h);
                0.5 * s(alpha) * d
            })
            .sum()
    }
}

impl fmt::Debug for CircleDiffusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CircleDiffusion({} components)", self.sigmas.len())
    }
}

/// A vector field b on R^d with optional potential, analytic Jacobian and
/// Hessian, and an optional declared one-sided Lipschitz constant.
#[derive(Clone)]
pub struct DriftField {
    name: String,
    dim: usize,
    drift: VectorFn,
    jacobian: Option<MatrixFn>,
    potential: Option<ScalarFn>,
    hessian: Option<MatrixFn>,
    one_sided_constant: Option<f64>,
    circle: Option<CircleDiffusion>,
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("gradient", &self.potential.is_some())
            .field("one_sided_constant", &self.one_sided_constant)
            .field("circle", &self.circle.is_some())
            .finish()
    }
}

pub struct DriftFieldBuilder {
    field: DriftField,
}

impl DriftFieldBuilder {
    pub fn new(name: impl Into<String>, dim: usize, drift: VectorFn) -> Self {
        DriftFieldBuilder {
            field: DriftField {
                name: name.into(),
                dim,
                drift,
                jacobian: None,
                potential: None,
                hessian: None,
                one_sided_constant: None,
                circle: None,
            },
        }
    }

    pub fn jacobian(mut self, j: MatrixFn) -> Self {
        self.field.jacobian = Some(j);
        self
    }

    pub fn potential(mut self, v: ScalarFn) -> Self {
        self.field.potential = Some(v);
        self
    }

    pub fn hessian(mut self, h: MatrixFn) -> Self {
        self.field.hessian = Some(h);
        self
    }

    pub fn one_sided_constant(mut self, lambda: f64) -> Self {
        self.field.one_sided_constant = Some(lambda);
        self
    }

    pub fn circle(mut self, c: CircleDiffusion) -> Self {
        self.field.circle = Some(c);
        self
    }

    pub fn build(self) -> DriftField {
        self.field
    }
}

impl DriftField {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_gradient(&self) -> bool {
        self.potential.is_some()
    }

    pub fn is_circle(&self) -> bool {
        self.circle.is_some()
    }

    pub fn circle_diffusion(&self) -> Option<&CircleDiffusion> {
        self.circle.as_ref()
    }

    /// Number of Wiener components the flow consumes: d for additive-noise
    /// fields on R^d, the diffusion count for the circle geometry.
    pub fn noise_dim(&self) -> usize {
        match &self.circle {
            Some(c) => c.noise_dim(),
            None => self.dim,
        }
    }

    pub fn one_sided_constant(&self) -> Option<f64> {
        self.one_sided_constant
    }

    /// Override the declared one-sided Lipschitz constant (user-supplied
    /// bound for fields where no exact constant is known).
    pub fn with_declared_one_sided(mut self, lambda: f64) -> Self {
        self.one_sided_constant = Some(lambda);
        self
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericRange(format!(
                "non-finite input to field `{}`",
                self.name
            )));
        }
        Ok(())
    }

    /// b(x), with range checks on input and output.
    pub fn eval_drift(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_input(x)?;
        let b = (self.drift)(x);
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericRange(format!(
                "drift of `{}` overflowed at |x| = {:.3e}",
                self.name,
                x.norm()
            )));
        }
        Ok(b)
    }

    /// Unchecked drift evaluation for integrator hot loops. The flow layer
    /// monitors state norms itself.
    #[inline]
    pub(crate) fn drift_raw(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.drift)(x)
    }

    /// Unchecked potential evaluation for quadrature hot loops. Callers must
    /// have verified `is_gradient()`.
    #[inline]
    pub(crate) fn potential_raw(&self, x: &DVector<f64>) -> f64 {
        (self.potential.as_ref().expect("potential_raw on non-gradient field"))(x)
    }

    /// Db(x): analytic if attached, otherwise central differences with
    /// step [`FD_STEP`].
    pub fn eval_jacobian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        let j = match &self.jacobian {
            Some(jac) => jac(x),
            None => self.fd_jacobian(x),
        };
        if j.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericRange(format!(
                "Jacobian of `{}` non-finite at |x| = {:.3e}",
                self.name,
                x.norm()
            )));
        }
        Ok(j)
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }

    /// Central finite-difference Jacobian, exposed so the self-consistency
    /// check against the analytic path can be run on any field.
    pub fn fd_jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let d = self.dim;
        let mut j = DMatrix::zeros(d, d);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for col in 0..d {
            xp[col] = x[col] + FD_STEP;
            xm[col] = x[col] - FD_STEP;
            let bp = (self.drift)(&xp);
            let bm = (self.drift)(&xm);
            for row in 0..d {
                j[(row, col)] = (bp[row] - bm[row]) / (2.0 * FD_STEP);
            }
            xp[col] = x[col];
            xm[col] = x[col];
        }
        j
    }

    /// V(x) for gradient-type fields.
    pub fn potential(&self, x: &DVector<f64>) -> Result<f64> {
        self.check_input(x)?;
        match &self.potential {
            Some(v) => Ok(v(x)),
            None => Err(Error::NonGradient(self.name.clone())),
        }
    }

    /// D²V(x) for gradient-type fields with an attached Hessian.
    pub fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        self.check_input(x)?;
        match &self.hessian {
            Some(h) => Ok(h(x)),
            None => Err(Error::NonGradient(self.name.clone())),
        }
    }

    /// Gradient of V by central differences (test oracle for the
    /// drift = −∇V consistency checks).
    pub fn fd_potential_gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let v = match &self.potential {
            Some(v) => v,
            None => return Err(Error::NonGradient(self.name.clone())),
        };
        let mut g = DVector::zeros(self.dim);
        let mut xp = x.clone();
        let mut xm = x.clone();
        for i in 0..self.dim {
            xp[i] = x[i] + FD_STEP;
            xm[i] = x[i] - FD_STEP;
            g[i] = (v(&xp) - v(&xm)) / (2.0 * FD_STEP);
            xp[i] = x[i];
            xm[i] = x[i];
        }
        Ok(g)
    }

    fn symmetric_part_eigenvalues(&self, x: &DVector<f64>) -> Result<Vec<f64>> {
        let j = self.eval_jacobian(x)?;
        let sym = (&j + j.transpose()) * 0.5;
        let eig = sym
            .try_symmetric_eigen(1e-13, 200)
            .ok_or_else(|| Error::Eigen(format!("no convergence at x with |x| = {:.3e}", x.norm())))?;
        Ok(eig.eigenvalues.iter().copied().collect())
    }

    /// λ⁺(x) = max_{|r|=1} (Db(x)r, r): the largest eigenvalue of the
    /// symmetric part ½(Db + Dbᵀ).
    pub fn lambda_plus(&self, x: &DVector<f64>) -> Result<f64> {
        let ev = self.symmetric_part_eigenvalues(x)?;
        Ok(ev.iter().copied().fold(f64::NEG_INFINITY, f64::max))
    }

    /// λ⁻(x) = min_{|r|=1} (Db(x)r, r).
    pub fn lambda_minus(&self, x: &DVector<f64>) -> Result<f64> {
        let ev = self.symmetric_part_eigenvalues(x)?;
        Ok(ev.iter().copied().fold(f64::INFINITY, f64::min))
    }

    /// One-sided quotient (b(x) − b(y), x − y)/|x − y|².
    pub fn one_sided_quotient(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        let bx = self.eval_drift(x)?;
        let by = self.eval_drift(y)?;
        let diff = x - y;
        let denom = diff.norm_squared();
        if denom == 0.0 {
            return Err(Error::NumericRange("one-sided quotient of identical points".into()));
        }
        Ok((bx - by).dot(&diff) / denom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise;

    fn sample_point(dim: usize, seed: u64, idx: i64, scale: f64) -> DVector<f64> {
        DVector::from_fn(dim, |i, _| scale * noise::standard_normal(seed, idx, i as u32))
    }

    #[test]
    fn ou_drift_and_jacobian() {
        let f = BuiltinSpec::Ou { dim: 3 }.build().unwrap();
        let x = DVector::from_vec(vec![2.0, 0.0, -1.5]);
        assert_eq!(f.eval_drift(&x).unwrap(), -&x);
        let j = f.eval_jacobian(&x).unwrap();
        assert_eq!(j, -DMatrix::<f64>::identity(3, 3));
        assert_eq!(f.lambda_plus(&x).unwrap(), -1.0);
    }

    #[test]
    fn double_well_unit_sphere_fixed_points() {
        for dim in [1usize, 2, 3] {
            let f = BuiltinSpec::DoubleWell { dim }.build().unwrap();
            assert!(f.eval_drift(&DVector::zeros(dim)).unwrap().norm() == 0.0);
            for k in 0..50 {
                let mut x = sample_point(dim, 31, k, 1.0);
                if x.norm() == 0.0 {
                    continue;
                }
                x /= x.norm();
                assert!(
                    f.eval_drift(&x).unwrap().norm() < 1e-12,
                    "drift on unit sphere not ~0 in dim {dim}"
                );
            }
        }
    }

    #[test]
    fn double_well_drift_values() {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        let x = DVector::from_vec(vec![1.0, 0.0]);
        assert_eq!(f.eval_drift(&x).unwrap(), DVector::from_vec(vec![0.0, 0.0]));
        let x = DVector::from_vec(vec![2.0, 0.0]);
        assert_eq!(f.eval_drift(&x).unwrap(), DVector::from_vec(vec![-6.0, 0.0]));
    }

    #[test]
    fn double_well_1d_jacobian_at_origin() {
        let f = BuiltinSpec::DoubleWell { dim: 1 }.build().unwrap();
        let j = f.eval_jacobian(&DVector::from_vec(vec![0.0])).unwrap();
        assert_eq!(j[(0, 0)], 1.0);
        assert_eq!(f.lambda_plus(&DVector::from_vec(vec![0.0])).unwrap(), 1.0);
    }

    #[test]
    fn double_well_jacobian_formula() {
        let f = BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap();
        for k in 0..20 {
            let x = sample_point(2, 77, k, 2.0);
            let j = f.eval_jacobian(&x).unwrap();
            let expect = DMatrix::identity(2, 2) * (1.0 - x.norm_squared())
                - &x * x.transpose() * 2.0;
            assert!((j - expect).amax() < 1e-12);
        }
    }

    #[test]
    fn ve_potential_zero_at_origin() {
        let f = BuiltinSpec::VE.build().unwrap();
        assert_eq!(f.potential(&DVector::zeros(2)).unwrap(), 0.0);
    }

    #[test]
    fn vs_drift_matches_fd_gradient() {
        let f = BuiltinSpec::VS.build().unwrap();
        for k in 0..100 {
            let x = sample_point(2, 5150, k, 2.0);
            let b = f.eval_drift(&x).unwrap();
            let g = f.fd_potential_gradient(&x).unwrap();
            assert!((b + g).amax() < 1e-6, "drift != -grad V at {x}");
        }
    }

    #[test]
    fn ve_fd_jacobian_matches_analytic() {
        let f = BuiltinSpec::VE.build().unwrap();
        for k in 0..100 {
            let x = sample_point(2, 900, k, 2.0);
            let dev = (f.eval_jacobian(&x).unwrap() - f.fd_jacobian(&x)).amax();
            assert!(dev < 1e-5, "FD vs analytic deviation {dev} at {x}");
        }
    }

    #[test]
    fn gradient_consistency_all_gradient_builtins() {
        let fields = [
            BuiltinSpec::Ou { dim: 2 }.build().unwrap(),
            BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap(),
            BuiltinSpec::VE.build().unwrap(),
            BuiltinSpec::VS.build().unwrap(),
            BuiltinSpec::RadialPolynomial { dim: 2, g_coeffs: vec![0.0, 0.3, 0.05, 0.01] }
                .build()
                .unwrap(),
        ];
        for f in &fields {
            let mut worst: f64 = 0.0;
            for k in 0..1000 {
                let x = DVector::from_fn(f.dim(), |i, _| {
                    // Low-discrepancy-ish spread over [-3, 3]^d.
                    let u = (noise::standard_normal(123, k, i as u32) / 4.0).tanh();
                    3.0 * u
                });
                let b = f.eval_drift(&x).unwrap();
                let g = f.fd_potential_gradient(&x).unwrap();
                worst = worst.max((b + g).amax());
            }
            assert!(worst < 1e-4, "gradient consistency failed for {}: {worst}", f.name());
        }
    }

    #[test]
    fn jacobian_symmetry_for_gradient_builtins() {
        let fields = [
            BuiltinSpec::DoubleWell { dim: 3 }.build().unwrap(),
            BuiltinSpec::VE.build().unwrap(),
            BuiltinSpec::VS.build().unwrap(),
        ];
        for f in &fields {
            for k in 0..50 {
                let x = sample_point(f.dim(), 41, k, 2.0);
                let j = f.eval_jacobian(&x).unwrap();
                assert!((&j - j.transpose()).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn hessian_is_negated_jacobian_for_gradient_kinds() {
        let fields = [
            BuiltinSpec::DoubleWell { dim: 2 }.build().unwrap(),
            BuiltinSpec::VE.build().unwrap(),
        ];
        for f in &fields {
            for k in 0..20 {
                let x = sample_point(f.dim(), 87, k, 1.5);
                let j = f.eval_jacobian(&x).unwrap();
                let h = f.hessian(&x).unwrap();
                assert!((j + h).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn eigenvalue_ordering() {
        let fields = [
            BuiltinSpec::DoubleWell { dim: 3 }.build().unwrap(),
            BuiltinSpec::VS.build().unwrap(),
        ];
        for f in &fields {
            for k in 0..100 {
                let x = sample_point(f.dim(), 3131, k, 2.5);
                let lp = f.lambda_plus(&x).unwrap();
                let lm = f.lambda_minus(&x).unwrap();
                assert!(lm <= lp);
            }
        }
    }

    #[test]
    fn linear_field_spectrum() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-1.0, -2.0]));
        let f = BuiltinSpec::Linear { matrix: a }.build().unwrap();
        let x = sample_point(2, 1, 0, 1.0);
        assert!((f.lambda_plus(&x).unwrap() - (-1.0)).abs() < 1e-12);
        assert!((f.lambda_minus(&x).unwrap() - (-2.0)).abs() < 1e-12);
        // Symmetric matrix: gradient-type with V = -x'Ax/2.
        assert!(f.is_gradient());
    }

    #[test]
    fn circle_builtin_ito_correction_vanishes() {
        let f = BuiltinSpec::CircleStratonovich.build().unwrap();
        let c = f.circle_diffusion().unwrap();
        assert_eq!(c.noise_dim(), 2);
        for k in 0..50 {
            let alpha = noise::standard_normal(5, k, 0) * 2.0;
            assert!(c.ito_correction(alpha).abs() < 1e-8);
        }
    }

    #[test]
    fn custom_circle_correction_matches_hand_formula() {
        // sigma_1 = sin(alpha): correction = sin(alpha)cos(alpha)/2.
        let c = CircleDiffusion::new(vec![Arc::new(|a: f64| a.sin())]);
        for k in 0..20 {
            let alpha = noise::standard_normal(6, k, 0);
            let expect = 0.5 * alpha.sin() * alpha.cos();
            assert!((c.ito_correction(alpha) - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_input_rejected() {
        let f = BuiltinSpec::Ou { dim: 2 }.build().unwrap();
        let x = DVector::from_vec(vec![f64::NAN, 0.0]);
        assert!(matches!(f.eval_drift(&x), Err(Error::NumericRange(_))));
        let y = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            f.eval_drift(&y),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn drift_overflow_reported() {
        let f = BuiltinSpec::DoubleWell { dim: 1 }.build().unwrap();
        let x = DVector::from_vec(vec![1e200]);
        assert!(matches!(f.eval_drift(&x), Err(Error::NumericRange(_))));
    }
}
