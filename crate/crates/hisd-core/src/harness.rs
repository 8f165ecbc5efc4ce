//! Trajectory runner, fine-step reference solutions, error and
//! convergence-rate computation, and the second-order defect scaling probes.
//!
//! All comparisons happen on exactly shared dyadic grid times — never by
//! interpolation — and every run is deterministic, so repeated studies are
//! bit-identical.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    continuous_rhs, gram_schmidt, retract, step, vector_transport, SaddleState, SchemeConfig,
    Scheme, StepDiagnostics, StepError,
};
use crate::energy::{EnergyModel, Rosenbrock, RosenbrockParams};
use crate::linalg::Vector;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("step {step} failed at t = {time}: {source}")]
    Step {
        step: usize,
        time: f64,
        source: StepError,
    },
}

/// A discrete trajectory: states at `t_n = n·τ` for `0 ≤ n ≤ N`, with the
/// per-step intermediates and an echo of the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SaddleState>,
    /// `diagnostics[n]` belongs to the step producing `states[n + 1]`.
    pub diagnostics: Vec<StepDiagnostics>,
    pub config: SchemeConfig,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.diagnostics.len()
    }

    pub fn final_state(&self) -> &SaddleState {
        self.states.last().expect("trajectory holds the initial state")
    }
}

/// Number of steps for a horizon that `tau` divides exactly.
pub fn steps_for(total_time: f64, tau: f64) -> Result<usize, HarnessError> {
    if !tau.is_finite() || tau <= 0.0 || !total_time.is_finite() || total_time <= 0.0 {
        return Err(HarnessError::InvalidGrid(format!(
            "need positive horizon and step size, got T = {total_time}, tau = {tau}"
        )));
    }
    let n = (total_time / tau).round();
    if n < 1.0 || (n * tau - total_time).abs() > 1e-9 * total_time.max(1.0) {
        return Err(HarnessError::InvalidGrid(format!(
            "step size {tau} does not divide the horizon {total_time}"
        )));
    }
    Ok(n as usize)
}

fn integer_ratio(coarse: f64, fine: f64, what: &str) -> Result<usize, HarnessError> {
    let ratio = coarse / fine;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > 1e-9 {
        return Err(HarnessError::GridMismatch(format!(
            "{what}: {coarse} is not an integer multiple of {fine}"
        )));
    }
    Ok(rounded as usize)
}

/// Runs `T/τ` steps from `s0`. Deterministic; failures carry the step index.
pub fn run_trajectory(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    s0: &SaddleState,
    total_time: f64,
) -> Result<Trajectory, HarnessError> {
    let n = steps_for(total_time, cfg.tau)?;
    let mut current = s0.clone();
    current.t = 0.0;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    let mut diagnostics = Vec::with_capacity(n);
    times.push(0.0);
    states.push(current.clone());
    for step_index in 1..=n {
        let (mut next, diag) = step(model, cfg, &current).map_err(|source| HarnessError::Step {
            step: step_index,
            time: current.t,
            source,
        })?;
        next.t = step_index as f64 * cfg.tau;
        times.push(next.t);
        states.push(next.clone());
        diagnostics.push(diag);
        current = next;
    }
    Ok(Trajectory {
        times,
        states,
        diagnostics,
        config: cfg.clone(),
    })
}

/// A fine-step trajectory retained only at multiples of `keep_tau`, standing
/// in for the unavailable exact solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    /// Integration step size.
    pub tau: f64,
    /// Spacing of the retained nodes.
    pub keep_tau: f64,
    /// `states[j]` is the state at `t = j·keep_tau`; `states[0] = s0`.
    pub states: Vec<SaddleState>,
}

/// Integrates at `cfg.tau` and keeps the nodes on the `keep_tau` grid.
///
/// The retained grid must nest into the integration grid, which holds for
/// dyadic step sizes.
pub fn reference_solution(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    s0: &SaddleState,
    total_time: f64,
    keep_tau: f64,
) -> Result<ReferenceSolution, HarnessError> {
    let stride = integer_ratio(keep_tau, cfg.tau, "reference retention grid")?;
    let n = steps_for(total_time, cfg.tau)?;
    if n % stride != 0 {
        return Err(HarnessError::InvalidGrid(format!(
            "retention spacing {keep_tau} does not divide the horizon {total_time}"
        )));
    }
    let mut current = s0.clone();
    current.t = 0.0;
    let mut states = Vec::with_capacity(n / stride + 1);
    states.push(current.clone());
    for step_index in 1..=n {
        let (mut next, _) = step(model, cfg, &current).map_err(|source| HarnessError::Step {
            step: step_index,
            time: current.t,
            source,
        })?;
        next.t = step_index as f64 * cfg.tau;
        if step_index % stride == 0 {
            states.push(next.clone());
        }
        current = next;
    }
    Ok(ReferenceSolution {
        tau: cfg.tau,
        keep_tau,
        states,
    })
}

/// Max-over-time errors of a coarse trajectory against a reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    /// `max_{n≥1} ‖x(t_n) − x_n‖`.
    pub err_x: f64,
    /// `max_{n≥1} ‖v_i(t_n) − v_{i,n}‖` per direction.
    pub err_v: Vec<f64>,
    /// Nodes at which a direction reversed sign against the reference.
    /// Flagged rather than silently aligned.
    pub sign_flips: usize,
}

/// Compares a trajectory against the reference at exactly shared grid times.
pub fn error_against_reference(
    traj: &Trajectory,
    reference: &ReferenceSolution,
) -> Result<ErrorSummary, HarnessError> {
    let stride = integer_ratio(traj.config.tau, reference.keep_tau, "coarse grid")?;
    let k = traj.states[0].k();
    if !reference.states.is_empty() && reference.states[0].k() != k {
        return Err(HarnessError::GridMismatch(format!(
            "saddle index differs: trajectory k = {k}, reference k = {}",
            reference.states[0].k()
        )));
    }
    let mut err_x = 0.0f64;
    let mut err_v = vec![0.0f64; k];
    let mut sign_flips = 0usize;
    for n in 1..traj.states.len() {
        let ref_index = n * stride;
        let Some(ref_state) = reference.states.get(ref_index) else {
            return Err(HarnessError::GridMismatch(format!(
                "reference does not reach t = {}",
                traj.times[n]
            )));
        };
        let state = &traj.states[n];
        err_x = err_x.max(state.x.sub(&ref_state.x).norm());
        for ((err, v), v_ref) in err_v
            .iter_mut()
            .zip(&state.directions)
            .zip(&ref_state.directions)
        {
            *err = err.max(v.sub(v_ref).norm());
            if v.dot(v_ref) < 0.0 {
                sign_flips += 1;
            }
        }
    }
    Ok(ErrorSummary {
        err_x,
        err_v,
        sign_flips,
    })
}

/// `CR_j = log₂(err_j / err_{j+1})` between adjacent step-size halvings.
///
/// A rate is undefined (`None`) when the pair is not an exact halving or an
/// error vanishes.
pub fn convergence_rates(taus: &[f64], errors: &[f64]) -> Vec<Option<f64>> {
    assert_eq!(taus.len(), errors.len());
    let mut rates = Vec::new();
    for j in 0..taus.len().saturating_sub(1) {
        let halving = (taus[j] / taus[j + 1] - 2.0).abs() <= 1e-12;
        if halving && errors[j] > 0.0 && errors[j + 1] > 0.0 {
            rates.push(Some((errors[j] / errors[j + 1]).log2()));
        } else {
            rates.push(None);
        }
    }
    rates
}

/// Per-τ max errors against the reference and the rates between halvings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub taus: Vec<f64>,
    pub err_x: Vec<f64>,
    /// `err_v[i][j]`: direction `i`, step size `taus[j]`.
    pub err_v: Vec<Vec<f64>>,
    pub rate_x: Vec<Option<f64>>,
    pub rate_v: Vec<Vec<Option<f64>>>,
    pub sign_flips: usize,
}

/// Runs the τ sweep against a fine reference and assembles the rate table.
///
/// The reference always integrates with the semi-implicit scheme at
/// `tau_ref`, whatever scheme the sweep itself uses. Sweep entries run
/// concurrently up to the `HISD_THREADS` cap; assembly is ordered by τ, so
/// the report does not depend on completion order.
pub fn run_convergence_study(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    s0: &SaddleState,
    total_time: f64,
    taus: &[f64],
    tau_ref: f64,
) -> Result<ConvergenceReport, HarnessError> {
    if taus.is_empty() {
        return Err(HarnessError::InvalidGrid("empty step-size list".into()));
    }
    let keep_tau = taus.iter().cloned().fold(f64::INFINITY, f64::min);
    for &tau in taus {
        steps_for(total_time, tau)?;
        integer_ratio(tau, keep_tau, "sweep grid")?;
        integer_ratio(tau, tau_ref, "reference grid")?;
    }

    let ref_cfg = SchemeConfig {
        tau: tau_ref,
        scheme: Scheme::SemiImplicit,
        splitting: cfg.splitting.clone(),
        tolerances: cfg.tolerances,
    };
    let reference = reference_solution(model, &ref_cfg, s0, total_time, keep_tau)?;

    let summaries = parallel_map(taus.len(), sweep_thread_cap(), |j| {
        let run_cfg = cfg.clone().with_tau(taus[j]);
        let traj = run_trajectory(model, &run_cfg, s0, total_time)?;
        error_against_reference(&traj, &reference)
    });

    let k = s0.k();
    let mut err_x = Vec::with_capacity(taus.len());
    let mut err_v: Vec<Vec<f64>> = vec![Vec::with_capacity(taus.len()); k];
    let mut sign_flips = 0;
    for summary in summaries {
        let summary = summary?;
        err_x.push(summary.err_x);
        for (column, value) in err_v.iter_mut().zip(&summary.err_v) {
            column.push(*value);
        }
        sign_flips += summary.sign_flips;
    }
    let rate_x = convergence_rates(taus, &err_x);
    let rate_v = err_v
        .iter()
        .map(|errs| convergence_rates(taus, errs))
        .collect();
    Ok(ConvergenceReport {
        taus: taus.to_vec(),
        err_x,
        err_v,
        rate_x,
        rate_v,
        sign_flips,
    })
}

/// Max-over-trajectory step defects per τ with fitted log-log slopes.
///
/// The three families are `‖x_n − x̃_n‖`, `|ṽᵀx_n|` and `‖v_n − v̂_n‖`; each
/// is expected to shrink quadratically in τ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub taus: Vec<f64>,
    pub x_defect: Vec<f64>,
    pub transport_defect: Vec<f64>,
    pub gs_defect: Vec<f64>,
    pub x_slope: Option<f64>,
    pub transport_slope: Option<f64>,
    pub gs_slope: Option<f64>,
}

/// Least-squares slope of `ln y` against `ln x`; `None` below the round-off
/// floor where the fit would be meaningless.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || ys.iter().any(|&y| y <= 1e-14) {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(&ly) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    (den > 0.0).then(|| num / den)
}

/// Runs one trajectory per τ and tabulates the maxima of the step defects.
pub fn scaling_probe(
    model: &dyn EnergyModel,
    cfg: &SchemeConfig,
    s0: &SaddleState,
    total_time: f64,
    taus: &[f64],
) -> Result<ScalingReport, HarnessError> {
    if taus.is_empty() {
        return Err(HarnessError::InvalidGrid("empty step-size list".into()));
    }
    let runs = parallel_map(taus.len(), sweep_thread_cap(), |j| {
        run_trajectory(model, &cfg.clone().with_tau(taus[j]), s0, total_time)
    });
    let mut x_defect = Vec::with_capacity(taus.len());
    let mut transport_defect = Vec::with_capacity(taus.len());
    let mut gs_defect = Vec::with_capacity(taus.len());
    for run in runs {
        let traj = run?;
        let mut mx = 0.0f64;
        let mut mt = 0.0f64;
        let mut mg = 0.0f64;
        for diag in &traj.diagnostics {
            mx = mx.max(diag.x_tilde_norm_defect);
            for dd in &diag.directions {
                mt = mt.max(dd.transport_defect);
                mg = mg.max(dd.gs_defect);
            }
        }
        x_defect.push(mx);
        transport_defect.push(mt);
        gs_defect.push(mg);
    }
    Ok(ScalingReport {
        x_slope: log_log_slope(taus, &x_defect),
        transport_slope: log_log_slope(taus, &transport_defect),
        gs_slope: log_log_slope(taus, &gs_defect),
        taus: taus.to_vec(),
        x_defect,
        transport_defect,
        gs_defect,
    })
}

/// Classic fourth-order Runge-Kutta on the continuous dynamics with
/// retraction, transport and Gram-Schmidt applied after each step.
///
/// An independent cross-check for the semi-implicit reference; not used in
/// the rate tables.
pub fn rk4_cross_check(
    model: &dyn EnergyModel,
    s0: &SaddleState,
    total_time: f64,
    tau: f64,
    y_min: f64,
) -> Result<ReferenceSolution, HarnessError> {
    let n = steps_for(total_time, tau)?;
    let shifted = |s: &SaddleState, c: f64, rhs: &crate::dynamics::ContinuousRhs| SaddleState {
        x: s.x.add_scaled(c, &rhs.dx),
        directions: s
            .directions
            .iter()
            .zip(&rhs.dv)
            .map(|(v, dv)| v.add_scaled(c, dv))
            .collect(),
        t: s.t,
    };
    let mut current = s0.clone();
    current.t = 0.0;
    let mut states = Vec::with_capacity(n + 1);
    states.push(current.clone());
    for step_index in 1..=n {
        let k1 = continuous_rhs(model, &current);
        let k2 = continuous_rhs(model, &shifted(&current, 0.5 * tau, &k1));
        let k3 = continuous_rhs(model, &shifted(&current, 0.5 * tau, &k2));
        let k4 = continuous_rhs(model, &shifted(&current, tau, &k3));
        let combine = |a: &Vector, b1: &Vector, b2: &Vector, b3: &Vector, b4: &Vector| {
            a.add_scaled(tau / 6.0, b1)
                .add_scaled(tau / 3.0, b2)
                .add_scaled(tau / 3.0, b3)
                .add_scaled(tau / 6.0, b4)
        };
        let x_raw = combine(&current.x, &k1.dx, &k2.dx, &k3.dx, &k4.dx);
        let x_new = retract(&x_raw, y_min).map_err(|source| HarnessError::Step {
            step: step_index,
            time: current.t,
            source,
        })?;
        let mut dirs = Vec::with_capacity(current.k());
        for (i, v) in current.directions.iter().enumerate() {
            let raw = combine(v, &k1.dv[i], &k2.dv[i], &k3.dv[i], &k4.dv[i]);
            let hat = vector_transport(&raw, &x_new);
            let (v_new, _) = gram_schmidt(&hat, &dirs, y_min).map_err(|source| {
                HarnessError::Step {
                    step: step_index,
                    time: current.t,
                    source,
                }
            })?;
            dirs.push(v_new);
        }
        current = SaddleState {
            x: x_new,
            directions: dirs,
            t: step_index as f64 * tau,
        };
        states.push(current.clone());
    }
    Ok(ReferenceSolution {
        tau,
        keep_tau: tau,
        states,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetName {
    A,
    B,
    C,
    D,
}

impl std::fmt::Display for PresetName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PresetName::A => write!(f, "a"),
            PresetName::B => write!(f, "b"),
            PresetName::C => write!(f, "c"),
            PresetName::D => write!(f, "d"),
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "a" | "A" => Ok(PresetName::A),
            "b" | "B" => Ok(PresetName::B),
            "c" | "C" => Ok(PresetName::C),
            "d" | "D" => Ok(PresetName::D),
            other => Err(format!("unknown preset {other:?}, expected a, b, c or d")),
        }
    }
}

/// One of the four benchmark experiments on the Rosenbrock-type energy:
/// (a), (b) search the index-1 saddle, (c), (d) the index-2 saddle, all
/// from exactly orthogonal raw initial data over the horizon `T = 10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPreset {
    pub name: PresetName,
    pub params: RosenbrockParams,
    pub x0_raw: Vector,
    pub directions_raw: Vec<Vector>,
    pub horizon: f64,
}

impl ExperimentPreset {
    pub fn by_name(name: PresetName) -> Self {
        let (params, x0_raw, directions_raw): (RosenbrockParams, Vector, Vec<Vector>) = match name
        {
            PresetName::A => (
                RosenbrockParams::INDEX1,
                Vector::from([0.8, 1.0, 1.0]),
                vec![Vector::from([1.0, -0.4, -0.4])],
            ),
            PresetName::B => (
                RosenbrockParams::INDEX1,
                Vector::from([1.0, 1.0, 1.4]),
                vec![Vector::from([-1.0, 1.0, 0.0])],
            ),
            PresetName::C => (
                RosenbrockParams::INDEX2,
                Vector::from([0.8, 1.0, 1.0]),
                vec![
                    Vector::from([1.0, -0.4, -0.4]),
                    Vector::from([0.0, 1.0, -1.0]),
                ],
            ),
            PresetName::D => (
                RosenbrockParams::INDEX2,
                Vector::from([1.0, 1.0, 1.4]),
                vec![
                    Vector::from([-1.0, 1.0, 0.0]),
                    Vector::from([-0.7, -0.7, 1.0]),
                ],
            ),
        };
        ExperimentPreset {
            name,
            params,
            x0_raw,
            directions_raw,
            horizon: 10.0,
        }
    }

    pub fn all() -> [ExperimentPreset; 4] {
        [
            ExperimentPreset::by_name(PresetName::A),
            ExperimentPreset::by_name(PresetName::B),
            ExperimentPreset::by_name(PresetName::C),
            ExperimentPreset::by_name(PresetName::D),
        ]
    }

    pub fn saddle_index(&self) -> usize {
        self.directions_raw.len()
    }

    pub fn model(&self) -> Rosenbrock {
        Rosenbrock::new(self.params)
    }

    /// Normalized initial data; orthonormal because the raw vectors are
    /// exactly orthogonal.
    pub fn initial_state(&self) -> SaddleState {
        let x0 = self.x0_raw.scale(1.0 / self.x0_raw.norm());
        let dirs = self
            .directions_raw
            .iter()
            .map(|v| v.scale(1.0 / v.norm()))
            .collect();
        SaddleState::new(x0, dirs).expect("preset initial data is orthonormal")
    }

    /// The saddle `(1,1,1)/√3` both parameter pairs share.
    pub fn target_saddle() -> Vector {
        let c = 1.0 / 3f64.sqrt();
        Vector::from([c, c, c])
    }
}

/// Sweep parallelism cap: `HISD_THREADS` when set, else the number of
/// available cores.
pub fn sweep_thread_cap() -> usize {
    std::env::var("HISD_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(std::num::NonZeroUsize::get)
                .unwrap_or(1)
        })
}

/// Evaluates `f(0..n)` on up to `cap` threads; results come back in index
/// order regardless of scheduling.
fn parallel_map<T, F>(n: usize, cap: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    if n == 0 {
        return Vec::new();
    }
    let chunk = n.div_ceil(cap.max(1));
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    std::thread::scope(|scope| {
        for (chunk_index, chunk_slots) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (offset, slot) in chunk_slots.iter_mut().enumerate() {
                    *slot = Some(f(chunk_index * chunk + offset));
                }
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| slot.expect("every index was computed"))
        .collect()
}
