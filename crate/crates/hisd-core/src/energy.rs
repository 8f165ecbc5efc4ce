//! Energy models: the interface `E`, `F = −∇E`, `J = −∇²E`, the linear/
//! nonlinear force splitting used by the semi-implicit stepper, a
//! Rosenbrock-type quartic test energy, a quadratic model with exact
//! stationary states, and central-difference oracles for derivative checks.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{Matrix, Vector};

/// Central-difference step for gradient checks.
pub const FD_GRADIENT_STEP: f64 = 1e-5;
/// Central-difference step for Hessian checks.
pub const FD_HESSIAN_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnergyError {
    #[error("matrix is not symmetric: max |A - Aᵀ| = {defect:.3e}")]
    NotSymmetric { defect: f64 },
}

/// An energy landscape `E` on `ℝ^d` together with its force `F(x) = −∇E(x)`
/// and negated Hessian `J(x) = −∇²E(x)`.
///
/// Evaluators must be pure and reentrant; a model may be shared across
/// threads.
pub trait EnergyModel: Sync {
    fn dimension(&self) -> usize;
    fn energy(&self, x: &Vector) -> f64;
    fn force(&self, x: &Vector) -> Vector;
    /// `J(x) = −∇²E(x)`; implementations must return a symmetric matrix.
    fn hessian_neg(&self, x: &Vector) -> Matrix;
}

/// Parameters of the Rosenbrock-type quartic energy
/// `E(x) = a(√3 x₂ − 3x₁²)² + b(√3 x₁ − 1)² + a(√3 x₃ − 3x₂²)² + b(√3 x₂ − 1)²`.
///
/// With `(a, b) = (−1, 5.5)` the normalized point `(1,1,1)/√3` is an index-1
/// saddle of `E` restricted to the unit sphere; with `(a, b) = (−0.5, 1.5)`
/// it is an index-2 saddle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RosenbrockParams {
    pub a: f64,
    pub b: f64,
}

impl RosenbrockParams {
    /// The index-1 parameter pair.
    pub const INDEX1: RosenbrockParams = RosenbrockParams { a: -1.0, b: 5.5 };
    /// The index-2 parameter pair.
    pub const INDEX2: RosenbrockParams = RosenbrockParams { a: -0.5, b: 1.5 };
}

/// The Rosenbrock-type test energy on `ℝ³`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rosenbrock {
    pub params: RosenbrockParams,
}

impl Rosenbrock {
    pub fn new(params: RosenbrockParams) -> Self {
        Rosenbrock { params }
    }
}

impl EnergyModel for Rosenbrock {
    fn dimension(&self) -> usize {
        3
    }

    fn energy(&self, x: &Vector) -> f64 {
        assert_eq!(x.len(), 3, "Rosenbrock energy is defined on ℝ³");
        let (a, b) = (self.params.a, self.params.b);
        let s3 = 3f64.sqrt();
        let u1 = s3 * x[1] - 3.0 * x[0] * x[0];
        let u2 = s3 * x[0] - 1.0;
        let u3 = s3 * x[2] - 3.0 * x[1] * x[1];
        let u4 = s3 * x[1] - 1.0;
        a * u1 * u1 + b * u2 * u2 + a * u3 * u3 + b * u4 * u4
    }

    fn force(&self, x: &Vector) -> Vector {
        assert_eq!(x.len(), 3, "Rosenbrock energy is defined on ℝ³");
        let (a, b) = (self.params.a, self.params.b);
        let s3 = 3f64.sqrt();
        let u1 = s3 * x[1] - 3.0 * x[0] * x[0];
        let u2 = s3 * x[0] - 1.0;
        let u3 = s3 * x[2] - 3.0 * x[1] * x[1];
        let u4 = s3 * x[1] - 1.0;
        let g1 = -12.0 * a * x[0] * u1 + 2.0 * s3 * b * u2;
        let g2 = 2.0 * s3 * a * u1 - 12.0 * a * x[1] * u3 + 2.0 * s3 * b * u4;
        let g3 = 2.0 * s3 * a * u3;
        Vector::from([-g1, -g2, -g3])
    }

    fn hessian_neg(&self, x: &Vector) -> Matrix {
        assert_eq!(x.len(), 3, "Rosenbrock energy is defined on ℝ³");
        let (a, b) = (self.params.a, self.params.b);
        let s3 = 3f64.sqrt();
        let u1 = s3 * x[1] - 3.0 * x[0] * x[0];
        let u3 = s3 * x[2] - 3.0 * x[1] * x[1];
        let h11 = -12.0 * a * u1 + 72.0 * a * x[0] * x[0] + 6.0 * b;
        let h12 = -12.0 * s3 * a * x[0];
        let h22 = 6.0 * a - 12.0 * a * u3 + 72.0 * a * x[1] * x[1] + 6.0 * b;
        let h23 = -12.0 * s3 * a * x[1];
        let h33 = 6.0 * a;
        // J = −∇²E, filled symmetrically
        Matrix::from_rows(&[
            vec![-h11, -h12, 0.0],
            vec![-h12, -h22, -h23],
            vec![0.0, -h23, -h33],
        ])
        .expect("3x3 rows")
    }
}

/// Quadratic model energy `E(x) = ½ xᵀAx` with `A` symmetric.
///
/// Satisfies the linear/nonlinear force splitting exactly with `L = −A` and
/// vanishing nonlinear part, which makes it the canonical fixed-point
/// fixture for the stepper.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticModel {
    a: Matrix,
    j: Matrix,
}

impl QuadraticModel {
    pub fn new(a: Matrix) -> Result<Self, EnergyError> {
        let defect = a.asymmetry();
        if defect > 1e-12 * a.max_abs().max(1.0) {
            return Err(EnergyError::NotSymmetric { defect });
        }
        // enforce bitwise symmetry so J v and Jᵀ v agree exactly
        let mut sym = a.clone();
        for i in 0..a.dim() {
            for j in (i + 1)..a.dim() {
                let avg = 0.5 * (a.get(i, j) + a.get(j, i));
                sym.set(i, j, avg);
                sym.set(j, i, avg);
            }
        }
        let j = sym.scale(-1.0);
        Ok(QuadraticModel { a: sym, j })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }
}

impl EnergyModel for QuadraticModel {
    fn dimension(&self) -> usize {
        self.a.dim()
    }

    fn energy(&self, x: &Vector) -> f64 {
        0.5 * x.dot(&self.a.mul_vec(x))
    }

    fn force(&self, x: &Vector) -> Vector {
        self.a.mul_vec(x).scale(-1.0)
    }

    fn hessian_neg(&self, _x: &Vector) -> Matrix {
        self.j.clone()
    }
}

/// The decomposition `F(x) = L x + N(x)` consumed by the semi-implicit
/// stepper: a fixed matrix `L` treated implicitly and the residual
/// `N(x) = F(x) − L x` treated explicitly.
///
/// The reconstruction `L x + N(x) = F(x)` holds by construction for every
/// choice of `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Splitting {
    linear: Matrix,
}

impl Splitting {
    /// `L = J(x_ref)`, the negated Hessian frozen at a reference point.
    pub fn hessian_at(model: &dyn EnergyModel, x_ref: &Vector) -> Self {
        Splitting {
            linear: model.hessian_neg(x_ref),
        }
    }

    /// The default choice `L = J(0)`.
    pub fn hessian_at_origin(model: &dyn EnergyModel) -> Self {
        Splitting::hessian_at(model, &Vector::zeros(model.dimension()))
    }

    /// `L = 0`: the position substep degenerates to a fully explicit update.
    pub fn explicit_only(dim: usize) -> Self {
        Splitting {
            linear: Matrix::zeros(dim),
        }
    }

    /// A user-supplied linear part.
    pub fn from_matrix(linear: Matrix) -> Self {
        Splitting { linear }
    }

    pub fn linear(&self) -> &Matrix {
        &self.linear
    }

    /// `N(x) = F(x) − L x`.
    pub fn nonlinear(&self, model: &dyn EnergyModel, x: &Vector) -> Vector {
        model.force(x).sub(&self.linear.mul_vec(x))
    }
}

/// Central-difference gradient `(E(x+h e_i) − E(x−h e_i)) / 2h`.
pub fn fd_gradient<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Vector {
    assert!(h > 0.0, "fd_gradient: step must be positive");
    let d = x.len();
    let mut g = Vector::zeros(d);
    for i in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(&xp) - f(&xm)) / (2.0 * h);
    }
    g
}

/// Nested central-difference Hessian; symmetric by construction.
pub fn fd_hessian<F: Fn(&Vector) -> f64>(f: F, x: &Vector, h: f64) -> Matrix {
    assert!(h > 0.0, "fd_hessian: step must be positive");
    let d = x.len();
    let mut m = Matrix::zeros(d);
    for i in 0..d {
        for j in i..d {
            let mut xpp = x.clone();
            let mut xpm = x.clone();
            let mut xmp = x.clone();
            let mut xmm = x.clone();
            xpp[i] += h;
            xpp[j] += h;
            xpm[i] += h;
            xpm[j] -= h;
            xmp[i] -= h;
            xmp[j] += h;
            xmm[i] -= h;
            xmm[j] -= h;
            let v = (f(&xpp) - f(&xpm) - f(&xmp) + f(&xmm)) / (4.0 * h * h);
            m.set(i, j, v);
            m.set(j, i, v);
        }
    }
    m
}
