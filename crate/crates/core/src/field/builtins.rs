//! Built-in example systems.
//!
//! The double-well V(x) = ¼|x|⁴ − ½|x|² (drift x − |x|²x), the
//! Gaussian-bump potentials V_E and V_S on R², radially symmetric polynomial
//! potentials V(x) = g(|x|²), linear fields b = Ax, and the angular SDE
//! dα = cos(2α)∘dW¹ + sin(2α)∘dW² on the circle.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{CircleDiffusion, DriftField, DriftFieldBuilder};
use crate::error::{Error, Result};

/// Specification of a built-in field.
#[derive(Debug, Clone, PartialEq)]
pub enum BuiltinSpec {
    /// Ornstein-Uhlenbeck drift b(x) = −x.
    Ou { dim: usize },
    /// Double well: b(x) = x − |x|²x = −∇(¼|x|⁴ − ½|x|²).
    DoubleWell { dim: usize },
    /// V_E(x) = (0.5 − 10 e^{−|x−p₁|²} − 10 e^{−|x−p₂|²})|x|² on R².
    VE,
    /// V_S(x) = (2 − 5 e^{−|x−p₃|²} − 6 e^{−|x−p₄|²} − 7 e^{−|x−p₅|²})|x|² on R².
    VS,
    /// Radially symmetric V(x) = g(|x|²) with polynomial g(s) = Σ cᵢ sⁱ.
    RadialPolynomial { dim: usize, g_coeffs: Vec<f64> },
    /// dα = cos(2α)∘dW¹ + sin(2α)∘dW² on [0, 2π) with wraparound.
    CircleStratonovich,
    /// Linear drift b(x) = Ax.
    Linear { matrix: DMatrix<f64> },
}

/// Fixed points of the V_E / V_S bump potentials.
pub const P1: [f64; 2] = [0.0, 1.0];
pub const P2: [f64; 2] = [0.0, -1.0];
pub const P3: [f64; 2] = [0.0, 2.0];
pub const P4: [f64; 2] = [2.0, -2.0];
pub const P5: [f64; 2] = [-2.0, -2.0];

impl BuiltinSpec {
    pub fn build(&self) -> Result<DriftField> {
        match self {
            BuiltinSpec::Ou { dim } => build_ou(*dim),
            BuiltinSpec::DoubleWell { dim } => build_double_well(*dim),
            BuiltinSpec::VE => Ok(build_bump("v_e", 0.5, vec![(-10.0, P1), (-10.0, P2)])),
            BuiltinSpec::VS => Ok(build_bump(
                "v_s",
                2.0,
                vec![(-5.0, P3), (-6.0, P4), (-7.0, P5)],
            )),
            BuiltinSpec::RadialPolynomial { dim, g_coeffs } => build_radial(*dim, g_coeffs),
            BuiltinSpec::CircleStratonovich => Ok(build_circle()),
            BuiltinSpec::Linear { matrix } => build_linear(matrix),
        }
    }
}

fn build_ou(dim: usize) -> Result<DriftField> {
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    let d = dim;
    Ok(DriftFieldBuilder::new("ou", dim, Arc::new(|x: &DVector<f64>| -x))
        .jacobian(Arc::new(move |_x| -DMatrix::<f64>::identity(d, d)))
        .potential(Arc::new(|x: &DVector<f64>| 0.5 * x.norm_squared()))
        .hessian(Arc::new(move |_x| DMatrix::<f64>::identity(d, d)))
        .one_sided_constant(-1.0)
        .build())
}

/// Polynomial g and its first two derivatives, by Horner evaluation.
#[derive(Clone)]
struct Poly {
    coeffs: Vec<f64>,
}

impl Poly {
    fn eval(&self, s: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * s + c)
    }

    fn deriv1(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * s + i as f64 * c)
    }

    fn deriv2(&self, s: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(2)
            .rev()
            .fold(0.0, |acc, (i, c)| acc * s + (i * (i - 1)) as f64 * c)
    }
}

fn radial_field(name: &str, dim: usize, g: Poly, one_sided: Option<f64>) -> DriftField {
    let d = dim;
    let g1 = g.clone();
    let g2 = g.clone();
    let g3 = g.clone();
    let mut builder = DriftFieldBuilder::new(
        name,
        dim,
        // b(x) = -2 g'(|x|²) x
        Arc::new(move |x: &DVector<f64>| x * (-2.0 * g1.deriv1(x.norm_squared()))),
    )
    .jacobian(Arc::new(move |x: &DVector<f64>| {
        let s = x.norm_squared();
        let mut j = x * x.transpose() * (-4.0 * g2.deriv2(s));
        let diag = -2.0 * g2.deriv1(s);
        for i in 0..d {
            j[(i, i)] += diag;
        }
        j
    }))
    .potential(Arc::new(move |x: &DVector<f64>| g3.eval(x.norm_squared())))
    .hessian({
        let g = g.clone();
        Arc::new(move |x: &DVector<f64>| {
            let s = x.norm_squared();
            let mut h = x * x.transpose() * (4.0 * g.deriv2(s));
            let diag = 2.0 * g.deriv1(s);
            for i in 0..d {
                h[(i, i)] += diag;
            }
            h
        })
    });
    if let Some(l) = one_sided {
        builder = builder.one_sided_constant(l);
    }
    builder.build()
}

fn build_double_well(dim: usize) -> Result<DriftField> {
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    // g(s) = s²/4 − s/2, so V = ¼|x|⁴ − ½|x|² and b = (1 − |x|²)x.
    // The one-sided constant is exact: sup_x λ⁺(x) = 1 at the origin.
    let g = Poly { coeffs: vec![0.0, -0.5, 0.25] };
    Ok(radial_field("double_well", dim, g, Some(1.0)))
}

fn build_radial(dim: usize, coeffs: &[f64]) -> Result<DriftField> {
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }
    if coeffs.is_empty() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::Config {
            key: "field.params.g_coeffs".into(),
            message: "radial g coefficients must be a nonempty list of finite numbers".into(),
        });
    }
    let g = Poly { coeffs: coeffs.to_vec() };
    Ok(radial_field("radial_polynomial", dim, g, None))
}

/// Gaussian-bump potential V(x) = (c₀ + Σ cᵢ e^{−|x−pᵢ|²}) |x|² on R².
///
/// Gradient and Hessian are analytic: with A(x) = c₀ + Σ cᵢ Eᵢ,
/// Eᵢ = e^{−|x−pᵢ|²},
///   ∇V  = |x|² ∇A + 2 A x,
///   D²V = |x|² D²A + 2(∇A xᵀ + x ∇Aᵀ) + 2 A I,
/// where ∇Eᵢ = −2(x−pᵢ)Eᵢ and D²Eᵢ = (4(x−pᵢ)(x−pᵢ)ᵀ − 2I)Eᵢ.
#[derive(Clone)]
struct BumpPotential {
    c0: f64,
    bumps: Vec<(f64, DVector<f64>)>,
}

impl BumpPotential {
    fn a(&self, x: &DVector<f64>) -> f64 {
        self.c0
            + self
                .bumps
                .iter()
                .map(|(c, p)| c * (-(x - p).norm_squared()).exp())
                .sum::<f64>()
    }

    fn grad_a(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for (c, p) in &self.bumps {
            let d = x - p;
            g += &d * (-2.0 * c * (-d.norm_squared()).exp());
        }
        g
    }

    fn hess_a(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let mut h = DMatrix::zeros(n, n);
        for (c, p) in &self.bumps {
            let d = x - p;
            let e = (-d.norm_squared()).exp();
            h += (&d * d.transpose() * 4.0 - DMatrix::identity(n, n) * 2.0) * (c * e);
        }
        h
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.a(x) * x.norm_squared()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.grad_a(x) * x.norm_squared() + x * (2.0 * self.a(x))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let ga = self.grad_a(x);
        self.hess_a(x) * x.norm_squared()
            + (&ga * x.transpose() + x * ga.transpose()) * 2.0
            + DMatrix::identity(n, n) * (2.0 * self.a(x))
    }
}

fn build_bump(name: &str, c0: f64, bumps: Vec<(f64, [f64; 2])>) -> DriftField {
    let bp = BumpPotential {
        c0,
        bumps: bumps
            .into_iter()
            .map(|(c, p)| (c, DVector::from_vec(p.to_vec())))
            .collect(),
    };
    let b1 = bp.clone();
    let b2 = bp.clone();
    let b3 = bp.clone();
    DriftFieldBuilder::new(name, 2, Arc::new(move |x: &DVector<f64>| -b1.gradient(x)))
        .jacobian(Arc::new(move |x: &DVector<f64>| -b2.hessian(x)))
        .potential(Arc::new(move |x: &DVector<f64>| b3.value(x)))
        .hessian(Arc::new(move |x: &DVector<f64>| bp.hessian(x)))
        .build()
}

fn build_circle() -> DriftField {
    let diffusion = CircleDiffusion::new(vec![
        Arc::new(|a: f64| (2.0 * a).cos()),
        Arc::new(|a: f64| (2.0 * a).sin()),
    ]);
    // The Stratonovich base drift is zero; the Itô correction is computed
    // from the diffusion closures by the flow at the active noise intensity.
    DriftFieldBuilder::new(
        "circle_stratonovich",
        1,
        Arc::new(|x: &DVector<f64>| DVector::zeros(x.len())),
    )
    .circle(diffusion)
    .build()
}

fn build_linear(a: &DMatrix<f64>) -> Result<DriftField> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Config {
            key: "field.params.matrix".into(),
            message: format!("matrix must be square and nonempty, got {}x{}", a.nrows(), a.ncols()),
        });
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericRange("linear field matrix has non-finite entries".into()));
    }
    let sym = (a + a.transpose()) * 0.5;
    let lambda = sym
        .clone()
        .try_symmetric_eigen(1e-13, 200)
        .ok_or_else(|| Error::Eigen("one-sided constant of linear field".into()))?
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let is_symmetric = (a - a.transpose()).amax() < 1e-12;
    let a1 = a.clone();
    let a2 = a.clone();
    let mut builder = DriftFieldBuilder::new(
        "linear",
        a.nrows(),
        Arc::new(move |x: &DVector<f64>| &a1 * x),
    )
    .jacobian(Arc::new(move |_x| a2.clone()))
    .one_sided_constant(lambda);
    if is_symmetric {
        // b = Ax = -grad V with V = -x'Ax/2.
        let av = a.clone();
        let ah = a.clone();
        builder = builder
            .potential(Arc::new(move |x: &DVector<f64>| -0.5 * (&av * x).dot(x)))
            .hessian(Arc::new(move |_x| -ah.clone()));
    }
    Ok(builder.build())
}
