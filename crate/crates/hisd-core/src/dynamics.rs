//! The sphere-constrained high-index saddle dynamics stepper.
//!
//! One step advances a position `x ∈ S^{d−1}` and `k` orthonormal tangent
//! directions `v₁…v_k`. The semi-implicit scheme solves a linear system for
//! the predicted position, retracts it onto the sphere, then solves one
//! linear system per direction — each system built from the directions
//! already committed at the *current* step — followed by vector transport
//! and Gram-Schmidt orthonormalization. An explicit baseline freezes every
//! right-hand side at the previous step and needs no solves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::energy::{EnergyModel, Splitting};
use crate::linalg::{relative_residual, LinalgError, Matrix, Vector};

/// Default tolerance for the on-sphere / tangency / orthonormality state
/// invariants.
pub const TOL_STATE: f64 = 1e-10;
/// Floor for the Gram-Schmidt normalization factor and the retraction norm.
pub const Y_MIN: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error(transparent)]
    Linear(#[from] LinalgError),
    #[error("step too large: ‖x̃‖ = {norm:.3e} fell below 1/2")]
    StepTooLarge { norm: f64 },
    #[error("cannot retract near-zero vector (norm {norm:.3e})")]
    ZeroVector { norm: f64 },
    #[error(
        "degenerate direction v{}: Gram-Schmidt factor Y = {y:.3e} below {y_min:.3e}",
        index + 1
    )]
    DegenerateDirection { index: usize, y: f64, y_min: f64 },
}

/// A violated state invariant; indices are 0-based, messages 1-based.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateDefect {
    #[error("state contains a non-finite entry")]
    NotFinite,
    #[error("direction v{} has dimension {found}, expected {expected}", index + 1)]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("‖x‖ = {norm:.17} is off the unit sphere (|‖x‖ − 1| > {tol:.1e})")]
    OffSphere { norm: f64, tol: f64 },
    #[error("v{}ᵀx = {dot:.3e} violates tangency (|v{}ᵀx| > {tol:.1e})", index + 1, index + 1)]
    NotTangent { index: usize, dot: f64, tol: f64 },
    #[error(
        "v{}ᵀv{} = {dot:.17} violates orthonormality (|v{}ᵀv{} − δ| > {tol:.1e})",
        i + 1, j + 1, i + 1, j + 1
    )]
    NotOrthonormal {
        i: usize,
        j: usize,
        dot: f64,
        tol: f64,
    },
}

/// Position on the unit sphere plus `k` orthonormal tangent directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleState {
    pub x: Vector,
    pub directions: Vec<Vector>,
    /// Simulation time.
    pub t: f64,
}

impl SaddleState {
    /// Builds a state and checks its invariants at the default tolerance.
    pub fn new(x: Vector, directions: Vec<Vector>) -> Result<Self, StateDefect> {
        let s = SaddleState {
            x,
            directions,
            t: 0.0,
        };
        s.validate(TOL_STATE)?;
        Ok(s)
    }

    /// Index of the target saddle.
    pub fn k(&self) -> usize {
        self.directions.len()
    }

    pub fn dimension(&self) -> usize {
        self.x.len()
    }

    /// Checks `‖x‖ = 1`, `vᵢᵀx = 0` and `vᵢᵀvⱼ = δᵢⱼ` within `tol`.
    pub fn validate(&self, tol: f64) -> Result<(), StateDefect> {
        if !self.x.is_finite() || self.directions.iter().any(|v| !v.is_finite()) {
            return Err(StateDefect::NotFinite);
        }
        let d = self.x.len();
        for (i, v) in self.directions.iter().enumerate() {
            if v.len() != d {
                return Err(StateDefect::DimensionMismatch {
                    index: i,
                    expected: d,
                    found: v.len(),
                });
            }
        }
        let norm = self.x.norm();
        if (norm - 1.0).abs() > tol {
            return Err(StateDefect::OffSphere { norm, tol });
        }
        for (i, v) in self.directions.iter().enumerate() {
            let dot = v.dot(&self.x);
            if dot.abs() > tol {
                return Err(StateDefect::NotTangent { index: i, dot, tol });
            }
        }
        for i in 0..self.directions.len() {
            for j in i..self.directions.len() {
                let dot = self.directions[i].dot(&self.directions[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot - target).abs() > tol {
                    return Err(StateDefect::NotOrthonormal { i, j, dot, tol });
                }
            }
        }
        Ok(())
    }
}

/// Per-direction intermediates of one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDiagnostics {
    /// Solution of the directional substep, before transport.
    pub v_tilde: Vector,
    /// After vector transport into the tangent space at the new position.
    pub v_hat: Vector,
    /// `|ṽᵀx_n|`; equals `‖v̂ − ṽ‖` when `‖x_n‖ = 1`.
    pub transport_defect: f64,
    /// `‖v − v̂‖`, the correction applied by Gram-Schmidt.
    pub gs_defect: f64,
    /// Gram-Schmidt normalization factor.
    pub y: f64,
}

/// Intermediates of one step, exposed for the second-order smallness probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Predicted position before retraction.
    pub x_tilde: Vector,
    /// `|‖x̃‖ − 1|`, which equals `‖x_n − x̃‖` after retraction.
    pub x_tilde_norm_defect: f64,
    pub directions: Vec<DirectionDiagnostics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    SemiImplicit,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative residual bound asserted on each linear solve.
    pub tol_solve: f64,
    /// State invariant tolerance.
    pub tol_state: f64,
    /// Floor for retraction norms and Gram-Schmidt factors.
    pub y_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_solve: crate::linalg::TOL_SOLVE,
            tol_state: TOL_STATE,
            y_min: Y_MIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    /// Step size τ.
    pub tau: f64,
    pub scheme: Scheme,
    pub splitting: Splitting,
    pub tolerances: Tolerances,
}

impl SchemeConfig {
    pub fn semi_implicit(tau: f64, splitting: Splitting) -> Self {
        assert!(tau > 0.0, "step size must be positive");
        SchemeConfig {
            tau,
            scheme: Scheme::SemiImplicit,
            splitting,
            tolerances: Tolerances::default(),
        }
    }

    pub fn explicit(tau: f64, dim: usize) -> Self {
        assert!(tau > 0.0, "step size must be positive");
        SchemeConfig {
            tau,
            scheme: Scheme::Explicit,
            splitting: Splitting::explicit_only(dim),
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_tau(mut self, tau: f64) -> Self {
        assert!(tau > 0.0, "step size must be positive");
        self.tau = tau;
        self
    }
}

/// Time derivatives of the continuous dynamics.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousRhs {
    pub dx: Vector,
    pub dv: Vec<Vector>,
}

/// Right-hand side of the continuous dynamics:
/// `dx = (I − xxᵀ − 2Σ vⱼvⱼᵀ) F(x)` and
/// `dvᵢ = (I − xxᵀ − vᵢvᵢᵀ − 2Σ_{j<i} vⱼvⱼᵀ) J(x) vᵢ + x vᵢᵀF(x)`,
/// with every projector applied as vector operations.
pub fn continuous_rhs(model: &dyn EnergyModel, s: &SaddleState) -> ContinuousRhs {
    let f = model.force(&s.x);
    let j = model.hessian_neg(&s.x);

    let mut dx = f.add_scaled(-s.x.dot(&f), &s.x);
    for v in &s.directions {
        dx = dx.add_scaled(-2.0 * v.dot(&f), v);
    }

    let mut dv = Vec::with_capacity(s.directions.len());
    for (i, vi) in s.directions.iter().enumerate() {
        let jv = j.mul_vec(vi);
        let mut dvi = jv.add_scaled(-s.x.dot(&jv), &s.x);
        dvi = dvi.add_scaled(-vi.dot(&jv), vi);
        for vj in &s.directions[..i] {
            dvi = dvi.add_scaled(-2.0 * vj.dot(&jv), vj);
        }
        dvi = dvi.add_scaled(vi.dot(&f), &s.x);
        dv.push(dvi);
    }
    ContinuousRhs { dx, dv }
}

/// Retraction onto the unit sphere: `x̃ / ‖x̃‖`.
pub fn retract(x_tilde: &Vector, y_min: f64) -> Result<Vector, StepError> {
    let norm = x_tilde.norm();
    if norm < y_min {
        return Err(StepError::ZeroVector { norm });
    }
    Ok(x_tilde.div(norm))
}

/// Vector transport into the tangent space at `x_n`: `v̂ = ṽ − (ṽᵀx_n) x_n`.
pub fn vector_transport(v_tilde: &Vector, x_n: &Vector) -> Vector {
    v_tilde.add_scaled(-v_tilde.dot(x_n), x_n)
}

/// Classical Gram-Schmidt of `v̂` against an orthonormal prior set.
///
/// Returns the unit vector and the normalization factor
/// `Y = ‖v̂ − Σⱼ (v̂ᵀvⱼ) vⱼ‖`, which for orthonormal priors also equals
/// `(‖v̂‖² − Σⱼ (v̂ᵀvⱼ)²)^{1/2}`.
pub fn gram_schmidt(
    v_hat: &Vector,
    prior: &[Vector],
    y_min: f64,
) -> Result<(Vector, f64), StepError> {
    let coeffs: Vec<f64> = prior.iter().map(|v| v_hat.dot(v)).collect();
    let mut w = v_hat.clone();
    for (c, v) in coeffs.iter().zip(prior) {
        w = w.add_scaled(-c, v);
    }
    let y = w.norm();
    if y < y_min {
        return Err(StepError::DegenerateDirection {
            index: prior.len(),
            y,
            y_min,
        });
    }
    debug_assert!(
        {
            let y_sq_alt = v_hat.dot(v_hat) - coeffs.iter().map(|c| c * c).sum::<f64>();
            (y * y - y_sq_alt).abs() <= 1e-10
        },
        "the two normalization-factor expressions disagree"
    );
    Ok((w.div(y), y))
}

/// Semi-implicit position substep.
///
/// Solves `M x̃ = r` with `M = I − τ (I − 2Σⱼ vⱼvⱼᵀ) L` and
/// `r = x + τ (I − 2Σⱼ vⱼvⱼᵀ) N(x) − τ x (xᵀF(x))`, all projector data at
/// the previous step, then retracts. Guards `‖x̃‖ ≥ 1/2`.
pub fn semi_implicit_x_substep(
    model: &dyn EnergyModel,
    splitting: &Splitting,
    state: &SaddleState,
    tau: f64,
    tol: &Tolerances,
) -> Result<(Vector, Vector), StepError> {
    let d = state.dimension();
    let force = model.force(&state.x);
    let nonlinear = splitting.nonlinear(model, &state.x);
    let linear = splitting.linear();

    let mut reflected_l = linear.clone();
    for v in &state.directions {
        let row = linear.transpose_mul_vec(v); // vᵀL
        reflected_l = reflected_l.add_outer_scaled(-2.0, v, &row);
    }
    let m = Matrix::identity(d).sub(&reflected_l.scale(tau));

    let mut projected_n = nonlinear.clone();
    for v in &state.directions {
        projected_n = projected_n.add_scaled(-2.0 * v.dot(&nonlinear), v);
    }
    let r = state
        .x
        .add(&projected_n.scale(tau))
        .add_scaled(-tau * state.x.dot(&force), &state.x);

    let x_tilde = m.solve(&r)?;
    debug_assert!(
        relative_residual(&m, &x_tilde, &r) <= tol.tol_solve,
        "position solve residual above tolerance"
    );
    let norm = x_tilde.norm();
    if norm < 0.5 {
        return Err(StepError::StepTooLarge { norm });
    }
    let x_n = retract(&x_tilde, tol.y_min)?;
    Ok((x_tilde, x_n))
}

/// Semi-implicit directional substep for the direction following `committed`.
///
/// Solves `Mᵢ ṽ = bᵢ` with
/// `Mᵢ = I − τ (I − x_nx_nᵀ − 2Σ_{j<i} vⱼvⱼᵀ) J(x_n) − τ x_n F(x_n)ᵀ` and
/// `bᵢ = v − τ v (vᵀ J(x_n) v)`. The projector uses the directions already
/// orthonormalized at the current step — this sequential coupling is the
/// defining feature of the scheme.
pub fn semi_implicit_v_substep(
    model: &dyn EnergyModel,
    v_prev: &Vector,
    x_n: &Vector,
    committed: &[Vector],
    tau: f64,
    tol: &Tolerances,
) -> Result<Vector, StepError> {
    let d = v_prev.len();
    let j = model.hessian_neg(x_n);
    let f = model.force(x_n);

    let mut projected_j = j.clone();
    let row_x = j.transpose_mul_vec(x_n); // x_nᵀJ
    projected_j = projected_j.add_outer_scaled(-1.0, x_n, &row_x);
    for v in committed {
        let row_v = j.transpose_mul_vec(v);
        projected_j = projected_j.add_outer_scaled(-2.0, v, &row_v);
    }
    let m = Matrix::identity(d)
        .sub(&projected_j.scale(tau))
        .add_outer_scaled(-tau, x_n, &f);

    let jv = j.mul_vec(v_prev);
    let b = v_prev.add_scaled(-tau * v_prev.dot(&jv), v_prev);

    let v_tilde = m.solve(&b)?;
    debug_assert!(
        relative_residual(&m, &v_tilde, &b) <= tol.tol_solve,
        "direction solve residual above tolerance"
    );
    Ok(v_tilde)
}

/// One full step with the scheme selected in `cfg`.
pub fn step(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    state: &SaddleState,
) -> Result<(SaddleState, StepDiagnostics), StepError> {
    match cfg.scheme {
        Scheme::SemiImplicit => semi_implicit_step(model, cfg, state),
        Scheme::Explicit => explicit_step(model, state, cfg.tau, &cfg.tolerances),
    }
}

/// One full semi-implicit step: position substep, retraction, then the
/// directional substeps solved sequentially, each followed by vector
/// transport and Gram-Schmidt against the directions committed so far.
pub fn semi_implicit_step(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    state: &SaddleState,
) -> Result<(SaddleState, StepDiagnostics), StepError> {
    let (x_tilde, x_n) = semi_implicit_x_substep(model, &cfg.splitting, state, cfg.tau, &cfg.tolerances)?;
    let x_tilde_norm_defect = (x_tilde.norm() - 1.0).abs();

    let mut committed: Vec<Vector> = Vec::with_capacity(state.k());
    let mut direction_diags = Vec::with_capacity(state.k());
    for v_prev in &state.directions {
        let v_tilde =
            semi_implicit_v_substep(model, v_prev, &x_n, &committed, cfg.tau, &cfg.tolerances)?;
        let v_hat = vector_transport(&v_tilde, &x_n);
        let transport_defect = v_tilde.dot(&x_n).abs();
        let (v_new, y) = gram_schmidt(&v_hat, &committed, cfg.tolerances.y_min)?;
        let gs_defect = v_new.sub(&v_hat).norm();
        direction_diags.push(DirectionDiagnostics {
            v_tilde,
            v_hat,
            transport_defect,
            gs_defect,
            y,
        });
        committed.push(v_new);
    }

    let next = SaddleState {
        x: x_n,
        directions: committed,
        t: state.t + cfg.tau,
    };
    debug_assert!(next.validate(cfg.tolerances.tol_state).is_ok());
    Ok((
        next,
        StepDiagnostics {
            x_tilde,
            x_tilde_norm_defect,
            directions: direction_diags,
        },
    ))
}

/// Explicit baseline: every right-hand side quantity is frozen at the
/// previous step, so the predictors are plain forward-Euler updates and no
/// linear systems are solved. Retraction, transport and Gram-Schmidt are
/// unchanged.
pub fn explicit_step(
    model: &dyn EnergyModel,
    state: &SaddleState,
    tau: f64,
    tol: &Tolerances,
) -> Result<(SaddleState, StepDiagnostics), StepError> {
    let rhs = continuous_rhs(model, state);
    let x_tilde = state.x.add(&rhs.dx.scale(tau));
    let norm = x_tilde.norm();
    if norm < 0.5 {
        return Err(StepError::StepTooLarge { norm });
    }
    let x_n = retract(&x_tilde, tol.y_min)?;
    let x_tilde_norm_defect = (norm - 1.0).abs();

    let mut committed: Vec<Vector> = Vec::with_capacity(state.k());
    let mut direction_diags = Vec::with_capacity(state.k());
    for (v_prev, dv) in state.directions.iter().zip(&rhs.dv) {
        let v_tilde = v_prev.add(&dv.scale(tau));
        let v_hat = vector_transport(&v_tilde, &x_n);
        let transport_defect = v_tilde.dot(&x_n).abs();
        let (v_new, y) = gram_schmidt(&v_hat, &committed, tol.y_min)?;
        let gs_defect = v_new.sub(&v_hat).norm();
        direction_diags.push(DirectionDiagnostics {
            v_tilde,
            v_hat,
            transport_defect,
            gs_defect,
            y,
        });
        committed.push(v_new);
    }

    let next = SaddleState {
        x: x_n,
        directions: committed,
        t: state.t + tau,
    };
    debug_assert!(next.validate(tol.tol_state).is_ok());
    Ok((
        next,
        StepDiagnostics {
            x_tilde,
            x_tilde_norm_defect,
            directions: direction_diags,
        },
    ))
}
