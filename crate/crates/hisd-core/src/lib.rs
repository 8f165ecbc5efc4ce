//! Sphere-constrained high-index saddle dynamics.
//!
//! A semi-implicit (IMEX) Euler discretization of the saddle dynamics for
//! index-k saddle points of an energy constrained to the unit sphere: the
//! position and each directional vector are advanced by small dense linear
//! solves, kept on the manifold by retraction, vector transport and
//! Gram-Schmidt orthonormalization. The [`harness`] module adds trajectory
//! running, fine-step reference solutions, convergence-rate studies and
//! second-order defect scaling probes; an explicit baseline scheme is
//! provided for cross-validation.

pub mod dynamics;
pub mod energy;
pub mod harness;
pub mod linalg;

pub use dynamics::{
    continuous_rhs, explicit_step, gram_schmidt, retract, semi_implicit_step,
    semi_implicit_v_substep, semi_implicit_x_substep, step, vector_transport, SaddleState, Scheme,
    SchemeConfig, StepDiagnostics, StepError, Tolerances,
};
pub use energy::{
    fd_gradient, fd_hessian, EnergyModel, QuadraticModel, Rosenbrock, RosenbrockParams, Splitting,
};
pub use harness::{
    convergence_rates, error_against_reference, reference_solution, rk4_cross_check,
    run_convergence_study, run_trajectory, scaling_probe, ConvergenceReport, ErrorSummary,
    ExperimentPreset, HarnessError, PresetName, ReferenceSolution, ScalingReport, Trajectory,
};
pub use linalg::{outer, LinalgError, Matrix, Vector};
