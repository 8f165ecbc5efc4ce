//! Configuration assembly: CLI flags merged over an optional config file
//! (JSON or plain `key = value` lines), validated into a resolved run
//! description. Flags override file values.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use hisd_core::dynamics::Scheme;
use hisd_core::{
    EnergyModel, ExperimentPreset, Matrix, PresetName, QuadraticModel, Rosenbrock,
    RosenbrockParams, SaddleState, SchemeConfig, Splitting, Tolerances, Vector,
};

use crate::error::CliError;

/// Standard step-size sweep used when no `--tau` is given.
pub const DEFAULT_TAUS: [i32; 4] = [-6, -7, -8, -9];
/// Default reference step exponent.
pub const DEFAULT_TAU_REF: i32 = -13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EnergyKind {
    Rosenbrock,
    Quadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeKind {
    Semi,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplittingKind {
    /// L = 0: explicit position predictor.
    ExplicitX,
    /// L = J(0), the negated Hessian at the origin.
    Hessian0,
    /// L read from `--splitting-matrix` / the config file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatKind {
    Csv,
    Jsonl,
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Config file (JSON or `key = value` lines); flags override it.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Energy model.
    #[arg(long, value_enum)]
    pub energy: Option<EnergyKind>,

    /// Rosenbrock parameter a.
    #[arg(long)]
    pub a: Option<f64>,

    /// Rosenbrock parameter b.
    #[arg(long)]
    pub b: Option<f64>,

    /// Benchmark initial condition: a, b (index-1) or c, d (index-2).
    #[arg(long)]
    pub preset: Option<String>,

    /// Saddle index (number of directional vectors).
    #[arg(long)]
    pub k: Option<usize>,

    /// Time horizon T.
    #[arg(long = "T", id = "T")]
    pub horizon: Option<f64>,

    /// Step size, repeatable; accepts `2^-k` (parsed exactly) or a decimal.
    #[arg(long = "tau")]
    pub taus: Vec<String>,

    /// Reference step size for convergence studies.
    #[arg(long = "tau-ref")]
    pub tau_ref: Option<String>,

    /// Time-stepping scheme.
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,

    /// Linear/nonlinear force splitting for the position substep.
    #[arg(long, value_enum)]
    pub splitting: Option<SplittingKind>,

    /// JSON file holding the splitting matrix (for --splitting file).
    #[arg(long = "splitting-matrix", value_name = "PATH")]
    pub splitting_matrix: Option<PathBuf>,

    /// Output path; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,

    /// Output format.
    #[arg(long, value_enum)]
    pub format: Option<FormatKind>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum TauEntry {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

/// The config-file schema; every field optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    energy: Option<String>,
    a: Option<f64>,
    b: Option<f64>,
    matrix: Option<Vec<Vec<f64>>>,
    preset: Option<String>,
    k: Option<usize>,
    #[serde(rename = "T", alias = "horizon")]
    horizon: Option<f64>,
    tau: Option<OneOrMany<TauEntry>>,
    tau_ref: Option<TauEntry>,
    scheme: Option<String>,
    splitting: Option<String>,
    splitting_matrix: Option<Vec<Vec<f64>>>,
    x0: Option<Vec<f64>>,
    directions: Option<Vec<Vec<f64>>>,
    out: Option<String>,
    format: Option<String>,
}

/// Energy selection with its parameters baked in.
#[derive(Debug, Clone)]
pub enum EnergyChoice {
    Rosenbrock(Rosenbrock),
    Quadratic(QuadraticModel),
}

impl EnergyChoice {
    pub fn describe(&self) -> String {
        match self {
            EnergyChoice::Rosenbrock(m) => {
                format!("rosenbrock(a={}, b={})", m.params.a, m.params.b)
            }
            EnergyChoice::Quadratic(m) => format!("quadratic(d={})", m.dimension()),
        }
    }
}

impl EnergyModel for EnergyChoice {
    fn dimension(&self) -> usize {
        match self {
            EnergyChoice::Rosenbrock(m) => m.dimension(),
            EnergyChoice::Quadratic(m) => m.dimension(),
        }
    }
    fn energy(&self, x: &Vector) -> f64 {
        match self {
            EnergyChoice::Rosenbrock(m) => m.energy(x),
            EnergyChoice::Quadratic(m) => m.energy(x),
        }
    }
    fn force(&self, x: &Vector) -> Vector {
        match self {
            EnergyChoice::Rosenbrock(m) => m.force(x),
            EnergyChoice::Quadratic(m) => m.force(x),
        }
    }
    fn hessian_neg(&self, x: &Vector) -> Matrix {
        match self {
            EnergyChoice::Rosenbrock(m) => m.hessian_neg(x),
            EnergyChoice::Quadratic(m) => m.hessian_neg(x),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplittingMode {
    ExplicitX,
    Hessian0,
    File,
}

impl SplittingMode {
    pub fn describe(&self) -> &'static str {
        match self {
            SplittingMode::ExplicitX => "explicit-x",
            SplittingMode::Hessian0 => "hessian0",
            SplittingMode::File => "file",
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub energy: EnergyChoice,
    pub initial: SaddleState,
    pub preset: Option<PresetName>,
    pub horizon: f64,
    pub taus: Vec<f64>,
    pub tau_ref: f64,
    pub scheme: Scheme,
    pub splitting_mode: SplittingMode,
    pub splitting: Splitting,
    pub out: Option<PathBuf>,
    pub format: Option<FormatKind>,
}

impl ResolvedConfig {
    pub fn scheme_config(&self, tau: f64) -> SchemeConfig {
        SchemeConfig {
            tau,
            scheme: self.scheme,
            splitting: self.splitting.clone(),
            tolerances: Tolerances::default(),
        }
    }
}

pub fn parse_tau(s: &str) -> Result<f64, CliError> {
    let s = s.trim();
    if let Some(exp) = s.strip_prefix("2^") {
        let e: i32 = exp.parse().map_err(|_| {
            CliError::Validation(format!("cannot parse exponent in step size {s:?}"))
        })?;
        return Ok(2f64.powi(e));
    }
    let v: f64 = s
        .parse()
        .map_err(|_| CliError::Validation(format!("cannot parse step size {s:?}")))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::Validation(format!(
            "step size must be positive and finite, got {s}"
        )))
    }
}

fn tau_entry_value(entry: &TauEntry) -> Result<f64, CliError> {
    match entry {
        TauEntry::Num(v) if v.is_finite() && *v > 0.0 => Ok(*v),
        TauEntry::Num(v) => Err(CliError::Validation(format!(
            "step size must be positive and finite, got {v}"
        ))),
        TauEntry::Text(s) => parse_tau(s),
    }
}

fn load_file_config(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    } else {
        parse_key_value_config(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))
    }
}

fn parse_number_list(value: &str) -> Result<Vec<f64>, String> {
    value
        .split(',')
        .map(|part| {
            part.trim()
                .parse::<f64>()
                .map_err(|_| format!("cannot parse number {:?}", part.trim()))
        })
        .collect()
}

/// Rows separated by ';', entries by ','.
fn parse_matrix_text(value: &str) -> Result<Vec<Vec<f64>>, String> {
    value.split(';').map(parse_number_list).collect()
}

fn parse_key_value_config(text: &str) -> Result<FileConfig, String> {
    let mut cfg = FileConfig::default();
    let mut directions: Vec<(usize, Vec<f64>)> = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .or_else(|| line.split_once(':'))
            .ok_or_else(|| format!("line {}: expected key = value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let err = |msg: String| format!("line {}: {msg}", lineno + 1);
        match key {
            "energy" => cfg.energy = Some(value.to_string()),
            "a" => cfg.a = Some(value.parse().map_err(|_| err("bad number".into()))?),
            "b" => cfg.b = Some(value.parse().map_err(|_| err("bad number".into()))?),
            "preset" => cfg.preset = Some(value.to_string()),
            "k" => cfg.k = Some(value.parse().map_err(|_| err("bad integer".into()))?),
            "T" | "horizon" => {
                cfg.horizon = Some(value.parse().map_err(|_| err("bad number".into()))?)
            }
            "tau" => {
                cfg.tau = Some(OneOrMany::Many(
                    value
                        .split(',')
                        .map(|p| TauEntry::Text(p.trim().to_string()))
                        .collect(),
                ))
            }
            "tau_ref" => cfg.tau_ref = Some(TauEntry::Text(value.to_string())),
            "scheme" => cfg.scheme = Some(value.to_string()),
            "splitting" => cfg.splitting = Some(value.to_string()),
            "splitting_matrix" => {
                cfg.splitting_matrix = Some(parse_matrix_text(value).map_err(err)?)
            }
            "matrix" => cfg.matrix = Some(parse_matrix_text(value).map_err(err)?),
            "x0" => cfg.x0 = Some(parse_number_list(value).map_err(err)?),
            "out" => cfg.out = Some(value.to_string()),
            "format" => cfg.format = Some(value.to_string()),
            _ => {
                if let Some(rest) = key.strip_prefix('v') {
                    let index: usize = rest
                        .parse()
                        .map_err(|_| err(format!("unknown key {key:?}")))?;
                    if index == 0 {
                        return Err(err("direction indices start at v1".into()));
                    }
                    directions.push((index, parse_number_list(value).map_err(err)?));
                } else {
                    return Err(err(format!("unknown key {key:?}")));
                }
            }
        }
    }
    if !directions.is_empty() {
        directions.sort_by_key(|(i, _)| *i);
        for (expected, (given, _)) in directions.iter().enumerate() {
            if *given != expected + 1 {
                return Err(format!("direction keys must be v1..v{}", directions.len()));
            }
        }
        cfg.directions = Some(directions.into_iter().map(|(_, v)| v).collect());
    }
    Ok(cfg)
}

fn parse_enum_text<T: ValueEnum + Copy>(value: &str, what: &str) -> Result<T, CliError> {
    T::from_str(value, true)
        .map_err(|_| CliError::Validation(format!("unknown {what} {value:?}")))
}

fn matrix_from_rows(rows: &[Vec<f64>], what: &str) -> Result<Matrix, CliError> {
    let m = Matrix::from_rows(rows)
        .map_err(|e| CliError::Validation(format!("{what}: {e}")))?;
    if !m.is_finite() {
        return Err(CliError::Validation(format!(
            "{what}: entries must be finite"
        )));
    }
    Ok(m)
}

fn load_matrix_file(path: &Path) -> Result<Vec<Vec<f64>>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read matrix {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Validation(format!("matrix {}: {e}", path.display())))
}

fn normalized(v: &Vector, what: &str) -> Result<Vector, CliError> {
    if !v.is_finite() {
        return Err(CliError::Validation(format!("{what} must be finite")));
    }
    let n = v.norm();
    if n < 1e-12 {
        return Err(CliError::Validation(format!("{what} is numerically zero")));
    }
    Ok(v.div(n))
}

/// Merges flags over the config file and validates everything.
pub fn resolve(args: &CommonArgs) -> Result<ResolvedConfig, CliError> {
    let file = match &args.config {
        Some(path) => load_file_config(path)?,
        None => FileConfig::default(),
    };

    let preset_text = args.preset.clone().or(file.preset.clone());
    let preset_name = preset_text
        .map(|p| {
            p.parse::<PresetName>()
                .map_err(CliError::Validation)
        })
        .transpose()?;
    let preset = preset_name.map(ExperimentPreset::by_name);

    let energy_kind = match (&args.energy, &file.energy) {
        (Some(kind), _) => *kind,
        (None, Some(text)) => parse_enum_text::<EnergyKind>(text, "energy")?,
        (None, None) => EnergyKind::Rosenbrock,
    };
    if energy_kind == EnergyKind::Quadratic && preset.is_some() {
        return Err(CliError::Validation(
            "presets a–d are Rosenbrock experiments; drop --preset or use --energy rosenbrock"
                .into(),
        ));
    }

    // energy model
    let energy = match energy_kind {
        EnergyKind::Rosenbrock => {
            let defaults = preset
                .as_ref()
                .map(|p| p.params)
                .unwrap_or(RosenbrockParams::INDEX1);
            let params = RosenbrockParams {
                a: args.a.or(file.a).unwrap_or(defaults.a),
                b: args.b.or(file.b).unwrap_or(defaults.b),
            };
            if !params.a.is_finite() || !params.b.is_finite() {
                return Err(CliError::Validation("a and b must be finite".into()));
            }
            EnergyChoice::Rosenbrock(Rosenbrock::new(params))
        }
        EnergyKind::Quadratic => {
            let rows = match &file.matrix {
                Some(rows) => rows.clone(),
                None => vec![
                    vec![1.0, 0.0, 0.0],
                    vec![0.0, 2.0, 0.0],
                    vec![0.0, 0.0, 3.0],
                ],
            };
            let matrix = matrix_from_rows(&rows, "quadratic matrix")?;
            let model = QuadraticModel::new(matrix)
                .map_err(|e| CliError::Validation(format!("quadratic matrix: {e}")))?;
            EnergyChoice::Quadratic(model)
        }
    };
    let dim = energy.dimension();

    // initial data: explicit x0/directions beat the preset; the quadratic
    // model falls back to its canonical axis fixture
    let explicit_x0 = file.x0.as_ref().map(|v| Vector::new(v.clone()));
    let explicit_dirs = file
        .directions
        .as_ref()
        .map(|dirs| dirs.iter().map(|v| Vector::new(v.clone())).collect::<Vec<_>>());

    let (x0_raw, dirs_raw): (Vector, Vec<Vector>) = match (&explicit_x0, &preset) {
        (Some(x0), _) => (x0.clone(), explicit_dirs.clone().unwrap_or_default()),
        (None, Some(p)) => {
            if explicit_dirs.is_some() {
                return Err(CliError::Validation(
                    "directions given without x0; supply both or use the preset alone".into(),
                ));
            }
            (p.x0_raw.clone(), p.directions_raw.clone())
        }
        (None, None) => match energy_kind {
            EnergyKind::Quadratic => {
                let k = args.k.or(file.k).unwrap_or(1);
                if k + 1 > dim {
                    return Err(CliError::Validation(format!(
                        "k = {k} needs at least {} dimensions, model has {dim}",
                        k + 1
                    )));
                }
                let x0 = Vector::basis(dim, dim - 1);
                let dirs = (0..k).map(|i| Vector::basis(dim, i)).collect();
                (x0, dirs)
            }
            EnergyKind::Rosenbrock => {
                return Err(CliError::Validation(
                    "no initial data: pass --preset a|b|c|d or x0/v1/... in a config file".into(),
                ));
            }
        },
    };

    // saddle index: default is the number of supplied directions
    let k = args.k.or(file.k).unwrap_or(dirs_raw.len());
    if k > dirs_raw.len() {
        return Err(CliError::Validation(format!(
            "k = {k} but only {} direction(s) available",
            dirs_raw.len()
        )));
    }

    let x0 = normalized(&x0_raw, "x0")?;
    if x0.len() != dim {
        return Err(CliError::Validation(format!(
            "x0 has length {}, model dimension is {dim}",
            x0.len()
        )));
    }
    let mut directions = Vec::with_capacity(k);
    for (i, raw) in dirs_raw.iter().take(k).enumerate() {
        if raw.len() != dim {
            return Err(CliError::Validation(format!(
                "v{} has length {}, model dimension is {dim}",
                i + 1,
                raw.len()
            )));
        }
        directions.push(normalized(raw, &format!("v{}", i + 1))?);
    }
    let initial = SaddleState::new(x0, directions)
        .map_err(|defect| CliError::Validation(format!("initial data rejected: {defect}")))?;

    let horizon = args
        .horizon
        .or(file.horizon)
        .or(preset.as_ref().map(|p| p.horizon))
        .unwrap_or(10.0);
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(CliError::Validation(format!(
            "horizon T must be positive, got {horizon}"
        )));
    }

    let taus: Vec<f64> = if !args.taus.is_empty() {
        args.taus
            .iter()
            .map(|s| parse_tau(s))
            .collect::<Result<_, _>>()?
    } else if let Some(entries) = &file.tau {
        entries
            .clone()
            .into_vec()
            .iter()
            .map(tau_entry_value)
            .collect::<Result<_, _>>()?
    } else {
        DEFAULT_TAUS.iter().map(|&e| 2f64.powi(e)).collect()
    };

    let tau_ref = match (&args.tau_ref, &file.tau_ref) {
        (Some(s), _) => parse_tau(s)?,
        (None, Some(entry)) => tau_entry_value(entry)?,
        (None, None) => 2f64.powi(DEFAULT_TAU_REF),
    };

    let scheme = match (&args.scheme, &file.scheme) {
        (Some(SchemeKind::Semi), _) => Scheme::SemiImplicit,
        (Some(SchemeKind::Explicit), _) => Scheme::Explicit,
        (None, Some(text)) => match parse_enum_text::<SchemeKind>(text, "scheme")? {
            SchemeKind::Semi => Scheme::SemiImplicit,
            SchemeKind::Explicit => Scheme::Explicit,
        },
        (None, None) => Scheme::SemiImplicit,
    };

    let splitting_kind = match (&args.splitting, &file.splitting) {
        (Some(kind), _) => *kind,
        (None, Some(text)) => parse_enum_text::<SplittingKind>(text, "splitting")?,
        (None, None) => SplittingKind::ExplicitX,
    };
    let (splitting_mode, splitting) = match splitting_kind {
        SplittingKind::ExplicitX => (SplittingMode::ExplicitX, Splitting::explicit_only(dim)),
        SplittingKind::Hessian0 => (SplittingMode::Hessian0, Splitting::hessian_at_origin(&energy)),
        SplittingKind::File => {
            let rows = match (&args.splitting_matrix, &file.splitting_matrix) {
                (Some(path), _) => load_matrix_file(path)?,
                (None, Some(rows)) => rows.clone(),
                (None, None) => {
                    return Err(CliError::Validation(
                        "--splitting file needs --splitting-matrix or splitting_matrix in the config"
                            .into(),
                    ))
                }
            };
            let matrix = matrix_from_rows(&rows, "splitting matrix")?;
            if matrix.dim() != dim {
                return Err(CliError::Validation(format!(
                    "splitting matrix is {}×{0}, model dimension is {dim}",
                    matrix.dim()
                )));
            }
            (SplittingMode::File, Splitting::from_matrix(matrix))
        }
    };

    let out = args
        .out
        .clone()
        .or_else(|| file.out.as_ref().map(PathBuf::from));
    let format = match (&args.format, &file.format) {
        (Some(kind), _) => Some(*kind),
        (None, Some(text)) => Some(parse_enum_text::<FormatKind>(text, "format")?),
        (None, None) => None,
    };

    Ok(ResolvedConfig {
        energy,
        initial,
        preset: preset_name,
        horizon,
        taus,
        tau_ref,
        scheme,
        splitting_mode,
        splitting,
        out,
        format,
    })
}
