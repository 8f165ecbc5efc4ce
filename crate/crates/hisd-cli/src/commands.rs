//! The three subcommands: single runs, convergence sweeps and invariant /
//! scaling checks.

use std::io::Write;
use std::path::Path;

use hisd_core::harness::log_log_slope;
use hisd_core::{
    run_convergence_study, run_trajectory, HarnessError, Trajectory,
};

use crate::config::{resolve, CommonArgs, FormatKind, ResolvedConfig};
use crate::error::{step_error_kind, CliError, NumericalRecord};
use crate::output::{
    config_echo, convergence_csv, convergence_table, tau_label, write_trajectory_jsonl,
    TrajectoryHeader,
};

fn write_output(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(content.as_bytes())?;
            lock.flush().map_err(CliError::from)
        }
    }
}

/// `hisd run`: one trajectory, serialized as JSON lines.
pub fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    if let Some(FormatKind::Csv) = cfg.format {
        return Err(CliError::Validation(
            "trajectories are emitted as jsonl; csv is for convergence tables".into(),
        ));
    }
    let tau = match cfg.taus.as_slice() {
        [tau] => *tau,
        _ => {
            return Err(CliError::Validation(format!(
                "run wants exactly one --tau, got {}",
                cfg.taus.len()
            )))
        }
    };
    let scheme_cfg = cfg.scheme_config(tau);
    let traj = run_trajectory(&cfg.energy, &scheme_cfg, &cfg.initial, cfg.horizon)?;
    let header = TrajectoryHeader {
        config: config_echo(&cfg, tau),
    };

    match &cfg.out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", path.display())))?;
            write_trajectory_jsonl(std::io::BufWriter::new(file), &header, &traj)?;
            eprintln!(
                "wrote {} records to {}",
                traj.states.len(),
                path.display()
            );
        }
        None => {
            let stdout = std::io::stdout();
            write_trajectory_jsonl(std::io::BufWriter::new(stdout.lock()), &header, &traj)?;
        }
    }
    Ok(())
}

/// `hisd converge`: τ sweep against the fine reference, CSV + display table.
pub fn cmd_converge(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    if let Some(FormatKind::Jsonl) = cfg.format {
        return Err(CliError::Validation(
            "convergence tables are emitted as csv".into(),
        ));
    }
    let base = cfg.scheme_config(cfg.taus[0]);
    let report = run_convergence_study(
        &cfg.energy,
        &base,
        &cfg.initial,
        cfg.horizon,
        &cfg.taus,
        cfg.tau_ref,
    )?;
    if report.sign_flips > 0 {
        eprintln!(
            "warning: {} node(s) reversed a direction sign against the reference; \
             errors are reported raw, without alignment",
            report.sign_flips
        );
    }
    let csv = convergence_csv(&report);
    match &cfg.out {
        Some(path) => {
            write_output(Some(path), &csv)?;
            println!("{} reference tau={}", describe(&cfg), tau_label(cfg.tau_ref));
            print!("{}", convergence_table(&report));
            println!("full-precision table: {}", path.display());
        }
        None => {
            // machine output on stdout, the rounded table on stderr
            write_output(None, &csv)?;
            eprintln!("{} reference tau={}", describe(&cfg), tau_label(cfg.tau_ref));
            eprint!("{}", convergence_table(&report));
        }
    }
    Ok(())
}

struct CheckOutcome {
    lines: Vec<String>,
    failed: bool,
}

impl CheckOutcome {
    fn new() -> Self {
        CheckOutcome {
            lines: Vec::new(),
            failed: false,
        }
    }

    fn record(&mut self, pass: bool, name: &str, detail: String) {
        self.lines
            .push(format!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" }));
        self.failed |= !pass;
    }
}

/// `hisd check`: constraint invariants over every run, the transport
/// identity, and the second-order defect slopes when the sweep allows.
pub fn cmd_check(args: &CommonArgs) -> Result<(), CliError> {
    let cfg = resolve(args)?;
    let mut outcome = CheckOutcome::new();

    let mut trajectories: Vec<(f64, Trajectory)> = Vec::new();
    for &tau in &cfg.taus {
        match run_trajectory(&cfg.energy, &cfg.scheme_config(tau), &cfg.initial, cfg.horizon) {
            Ok(traj) => trajectories.push((tau, traj)),
            Err(HarnessError::Step { step, time, source }) => {
                outcome.record(
                    false,
                    "step-guard",
                    format!(
                        "tau = {}: {} at step {step} (t = {time}): {source}",
                        tau_label(tau),
                        step_error_kind(&source)
                    ),
                );
            }
            Err(other) => return Err(other.into()),
        }
    }

    if !trajectories.is_empty() {
        let mut norm_defect = 0.0f64;
        let mut tangent_defect = 0.0f64;
        let mut ortho_defect = 0.0f64;
        let mut identity_defect = 0.0f64;
        let mut y_min_seen = f64::INFINITY;
        let mut has_directions = false;
        for (_, traj) in &trajectories {
            for state in &traj.states[1..] {
                norm_defect = norm_defect.max((state.x.norm() - 1.0).abs());
                for (i, v) in state.directions.iter().enumerate() {
                    tangent_defect = tangent_defect.max(v.dot(&state.x).abs());
                    for (j, w) in state.directions.iter().enumerate().skip(i) {
                        let target = if i == j { 1.0 } else { 0.0 };
                        ortho_defect = ortho_defect.max((v.dot(w) - target).abs());
                    }
                }
            }
            for diag in &traj.diagnostics {
                for dd in &diag.directions {
                    has_directions = true;
                    let direct = dd.v_hat.sub(&dd.v_tilde).norm();
                    identity_defect = identity_defect.max((direct - dd.transport_defect).abs());
                    y_min_seen = y_min_seen.min(dd.y);
                }
            }
        }
        outcome.record(
            norm_defect <= 1e-12,
            "sphere-norm",
            format!("max |‖x‖ − 1| = {norm_defect:.3e} (tol 1e-12)"),
        );
        if has_directions {
            outcome.record(
                tangent_defect <= 1e-10,
                "tangency",
                format!("max |vᵀx| = {tangent_defect:.3e} (tol 1e-10)"),
            );
            outcome.record(
                ortho_defect <= 1e-10,
                "orthonormality",
                format!("max |vᵀv − δ| = {ortho_defect:.3e} (tol 1e-10)"),
            );
            outcome.record(
                identity_defect <= 1e-14,
                "transport-identity",
                format!("max |‖v̂ − ṽ‖ − |ṽᵀx|| = {identity_defect:.3e} (tol 1e-14)"),
            );
            outcome.record(
                y_min_seen > 0.0,
                "normalization-factor",
                format!("min Y = {y_min_seen:.6}"),
            );
        }
    }

    // second-order defect slopes, when at least two runs survived
    if trajectories.len() >= 2 {
        let taus: Vec<f64> = trajectories.iter().map(|(tau, _)| *tau).collect();
        let collect = |pick: &dyn Fn(&Trajectory) -> f64| -> Vec<f64> {
            trajectories.iter().map(|(_, t)| pick(t)).collect()
        };
        let max_x = collect(&|t: &Trajectory| {
            t.diagnostics
                .iter()
                .map(|d| d.x_tilde_norm_defect)
                .fold(0.0, f64::max)
        });
        let max_tr = collect(&|t: &Trajectory| {
            t.diagnostics
                .iter()
                .flat_map(|d| d.directions.iter().map(|dd| dd.transport_defect))
                .fold(0.0, f64::max)
        });
        let max_gs = collect(&|t: &Trajectory| {
            t.diagnostics
                .iter()
                .flat_map(|d| d.directions.iter().map(|dd| dd.gs_defect))
                .fold(0.0, f64::max)
        });
        for (name, series) in [
            ("x-defect-slope", &max_x),
            ("transport-defect-slope", &max_tr),
            ("gs-defect-slope", &max_gs),
        ] {
            if series.iter().all(|&v| v <= 1e-13) {
                outcome.record(
                    true,
                    name,
                    format!(
                        "defects at round-off floor (max {:.3e}), slope n/a",
                        series.iter().cloned().fold(0.0, f64::max)
                    ),
                );
            } else {
                match log_log_slope(&taus, series) {
                    Some(slope) => outcome.record(
                        (slope - 2.0).abs() <= 0.2,
                        name,
                        format!("slope {slope:.3} (band 2 ± 0.2)"),
                    ),
                    None => outcome.record(
                        false,
                        name,
                        "slope undefined (a defect vanished mid-series)".into(),
                    ),
                }
            }
        }
    }

    let mut text = String::new();
    for line in &outcome.lines {
        text.push_str(line);
        text.push('\n');
    }
    let verdict = if outcome.failed { "FAIL" } else { "PASS" };
    text.push_str(&format!(
        "{verdict} ({} check(s), {} tau value(s), T = {})\n",
        outcome.lines.len(),
        cfg.taus.len(),
        cfg.horizon
    ));
    print!("{text}");
    if let Some(path) = &cfg.out {
        write_output(Some(path), &text)?;
    }

    if outcome.failed {
        Err(CliError::Numerical(NumericalRecord {
            error: "CheckFailed".into(),
            step: None,
            time: None,
            message: "one or more invariant checks failed".into(),
        }))
    } else {
        Ok(())
    }
}

/// Display summary printed before the converge table.
pub fn describe(cfg: &ResolvedConfig) -> String {
    let preset = cfg
        .preset
        .map(|p| format!("preset {p} "))
        .unwrap_or_default();
    format!(
        "{preset}{} k={} T={} scheme={:?} splitting={} taus={}",
        cfg.energy.describe(),
        cfg.initial.k(),
        cfg.horizon,
        cfg.scheme,
        cfg.splitting_mode.describe(),
        cfg.taus.iter().map(|t| tau_label(*t)).collect::<Vec<_>>().join(","),
    )
}
