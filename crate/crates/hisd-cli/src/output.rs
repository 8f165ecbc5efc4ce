//! Serializers: JSON-lines trajectories (full double precision, one record
//! per time node) and CSV rate tables mirroring the benchmark layout, plus
//! the 3-significant-digit display tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use hisd_core::dynamics::Scheme;
use hisd_core::{ConvergenceReport, SaddleState, StepDiagnostics, Tolerances, Trajectory};

use crate::config::ResolvedConfig;
use crate::error::CliError;

/// First line of a trajectory file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryHeader {
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub energy: String,
    pub scheme: Scheme,
    pub splitting: String,
    pub tau: f64,
    pub horizon: f64,
    pub k: usize,
    pub tolerances: Tolerances,
}

/// One time node: the state and, for nodes produced by a step, the
/// intermediates of that step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeRecord {
    pub step: usize,
    pub t: f64,
    pub state: SaddleState,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diag: Option<StepDiagnostics>,
}

pub fn config_echo(cfg: &ResolvedConfig, tau: f64) -> ConfigEcho {
    ConfigEcho {
        energy: cfg.energy.describe(),
        scheme: cfg.scheme,
        splitting: cfg.splitting_mode.describe().to_string(),
        tau,
        horizon: cfg.horizon,
        k: cfg.initial.k(),
        tolerances: Tolerances::default(),
    }
}

pub fn write_trajectory_jsonl<W: Write>(
    mut w: W,
    header: &TrajectoryHeader,
    traj: &Trajectory,
) -> Result<(), CliError> {
    let mut emit = |value: String| -> Result<(), CliError> {
        writeln!(w, "{value}").map_err(CliError::from)
    };
    emit(serde_json::to_string(header).expect("header serializes"))?;
    for (n, state) in traj.states.iter().enumerate() {
        let record = NodeRecord {
            step: n,
            t: traj.times[n],
            state: state.clone(),
            diag: if n == 0 {
                None
            } else {
                Some(traj.diagnostics[n - 1].clone())
            },
        };
        emit(serde_json::to_string(&record).expect("node record serializes"))?;
    }
    w.flush().map_err(CliError::from)
}

/// Parses a trajectory file back into its header and node records.
pub fn read_trajectory_jsonl(text: &str) -> Result<(TrajectoryHeader, Vec<NodeRecord>), CliError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header_line = lines
        .next()
        .ok_or_else(|| CliError::Validation("empty trajectory file".into()))?;
    let header: TrajectoryHeader = serde_json::from_str(header_line)
        .map_err(|e| CliError::Validation(format!("bad trajectory header: {e}")))?;
    let mut records = Vec::new();
    for line in lines {
        let record: NodeRecord = serde_json::from_str(line)
            .map_err(|e| CliError::Validation(format!("bad trajectory record: {e}")))?;
        records.push(record);
    }
    Ok((header, records))
}

/// 17 significant digits: round-trips every f64 exactly.
pub fn full(x: f64) -> String {
    format!("{x:.16e}")
}

/// 3 significant digits, the benchmark table style.
pub fn sig3(x: f64) -> String {
    format!("{x:.2E}")
}

/// Dyadic step sizes display as `2^-k`.
pub fn tau_label(tau: f64) -> String {
    let e = tau.log2();
    if e.fract() == 0.0 {
        format!("2^{}", e as i32)
    } else {
        format!("{tau}")
    }
}

fn rate_cell(rate: Option<&Option<f64>>, f: impl Fn(f64) -> String) -> String {
    match rate {
        Some(Some(r)) => f(*r),
        _ => String::new(),
    }
}

/// Full-precision CSV with the benchmark column layout:
/// `tau,err_x,CR,err_v1,CR,...`.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let k = report.err_v.len();
    let mut out = String::from("tau,err_x,CR");
    for i in 0..k {
        out.push_str(&format!(",err_v{},CR", i + 1));
    }
    out.push('\n');
    for (j, &tau) in report.taus.iter().enumerate() {
        out.push_str(&full(tau));
        out.push(',');
        out.push_str(&full(report.err_x[j]));
        out.push(',');
        // the first row has no rate; rate j-1 sits between rows j-1 and j
        out.push_str(&rate_cell(
            j.checked_sub(1).and_then(|p| report.rate_x.get(p)),
            full,
        ));
        for i in 0..k {
            out.push(',');
            out.push_str(&full(report.err_v[i][j]));
            out.push(',');
            out.push_str(&rate_cell(
                j.checked_sub(1).and_then(|p| report.rate_v[i].get(p)),
                full,
            ));
        }
        out.push('\n');
    }
    out
}

/// Human-readable rate table, rounded to 3 significant digits.
pub fn convergence_table(report: &ConvergenceReport) -> String {
    let k = report.err_v.len();
    let mut out = String::new();
    let mut header = format!("{:<8} {:>10} {:>6}", "tau", "err_x", "CR");
    for i in 0..k {
        header.push_str(&format!(" {:>10} {:>6}", format!("err_v{}", i + 1), "CR"));
    }
    out.push_str(&header);
    out.push('\n');
    for (j, &tau) in report.taus.iter().enumerate() {
        let rate2 = |r: Option<&Option<f64>>| rate_cell(r, |v| format!("{v:.2}"));
        let mut row = format!(
            "{:<8} {:>10} {:>6}",
            tau_label(tau),
            sig3(report.err_x[j]),
            rate2(j.checked_sub(1).and_then(|p| report.rate_x.get(p))),
        );
        for i in 0..k {
            row.push_str(&format!(
                " {:>10} {:>6}",
                sig3(report.err_v[i][j]),
                rate2(j.checked_sub(1).and_then(|p| report.rate_v[i].get(p))),
            ));
        }
        out.push_str(&row);
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_precision_round_trips() {
        for &x in &[
            1.0 / 3.0,
            2f64.powi(-13),
            6.02e23,
            -1.65e-2,
            f64::MIN_POSITIVE,
        ] {
            let text = full(x);
            let back: f64 = text.parse().unwrap();
            assert_eq!(back.to_bits(), x.to_bits(), "{text}");
        }
    }

    #[test]
    fn tau_labels() {
        assert_eq!(tau_label(2f64.powi(-6)), "2^-6");
        assert_eq!(tau_label(0.3), "0.3");
    }

    #[test]
    fn csv_layout_matches_benchmark_tables() {
        let report = ConvergenceReport {
            taus: vec![2f64.powi(-6), 2f64.powi(-7)],
            err_x: vec![1.65e-2, 8.29e-3],
            err_v: vec![vec![9.95e-2, 4.47e-2]],
            rate_x: vec![Some(0.99)],
            rate_v: vec![vec![Some(1.16)]],
            sign_flips: 0,
        };
        let csv = convergence_csv(&report);
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "tau,err_x,CR,err_v1,CR");
        let first = lines.next().unwrap();
        assert_eq!(first.split(',').count(), 5);
        assert_eq!(first.split(',').nth(2), Some(""));
        let second = lines.next().unwrap();
        assert_eq!(second.split(',').count(), 5);
        assert!(second.split(',').nth(2).unwrap().starts_with("9.89"));
        let table = convergence_table(&report);
        assert!(table.contains("2^-6"));
        assert!(table.contains("1.65E-2"));
    }
}
