//! Command-line front end: argument parsing, run configuration, CSV and
//! manifest output.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{all_bounds, compare_bounds, decoupling_table, write_reports_csv, EngineOptions, Units, COMPARISON_TOL};
use crate::cgf::DEFAULT_TOL;
use crate::error::Error;
use crate::gaussian::{icimi_gaussian, imi_gaussian, strengthened_lower_check, GaussianCaseConfig};
use crate::info::DEFAULT_QUAD_TOL;
use crate::model::{
    true_gen_error, FiniteDistribution, FiniteProblem, GenMethod, LearningProblem, McParams, MC_BATCHES,
};
use crate::oracle::cd_check_sweep;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("invariant violation: {0}")]
    Violation(String),
}

impl CliError {
    /// 2 for configuration and input problems, 3 for numeric failures, 4 for
    /// invariant violations.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io { .. } | Self::Parse(_) => 2,
            Self::Core(Error::Domain(_) | Error::UnsupportedMethod(_)) => 2,
            Self::Core(Error::Numeric(_) | Error::Resource { .. }) => 3,
            Self::Core(Error::Invariant(_)) | Self::Violation(_) => 4,
        }
    }
}

fn config<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SubcommandKind {
    Gaussian,
    Discrete,
    CdCheck,
    Compare,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum UnitsArg {
    #[default]
    Nats,
    Bits,
}

impl From<UnitsArg> for Units {
    fn from(u: UnitsArg) -> Self {
        match u {
            UnitsArg::Nats => Units::Nats,
            UnitsArg::Bits => Units::Bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DiscreteFormat {
    /// One row per bound report.
    #[default]
    Reports,
    /// One row per approach with its decoupling choices.
    Table,
}

/// Everything a run depends on. Written into the manifest and accepted back
/// by `genbound rerun`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub subcommand: SubcommandKind,
    pub problem_file: Option<PathBuf>,
    pub n: Vec<usize>,
    pub sigma2: f64,
    pub mu: f64,
    pub mc_samples: usize,
    pub seed: Option<u64>,
    pub quad_tol: f64,
    /// Inversion tolerance for the engine, assertion tolerance for `cd-check`.
    pub tol: f64,
    pub output: Option<PathBuf>,
    pub units: UnitsArg,
    pub exact: bool,
    pub format: DiscreteFormat,
    pub strengthened_mc: Option<usize>,
    pub trials: u64,
    pub max_alphabet: usize,
    pub reproducer_dir: Option<PathBuf>,
    pub budget: u64,
}

impl RunConfig {
    pub fn new(subcommand: SubcommandKind) -> Self {
        Self {
            subcommand,
            problem_file: None,
            n: Vec::new(),
            sigma2: 1.0,
            mu: 0.0,
            mc_samples: 100_000,
            seed: None,
            quad_tol: DEFAULT_QUAD_TOL,
            tol: match subcommand {
                SubcommandKind::CdCheck => COMPARISON_TOL,
                _ => DEFAULT_TOL,
            },
            output: None,
            units: UnitsArg::Nats,
            exact: true,
            format: DiscreteFormat::Reports,
            strengthened_mc: None,
            trials: 1000,
            max_alphabet: 4,
            reproducer_dir: None,
            budget: 10_000_000,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return config(format!("tolerance must be positive, got {}", self.tol));
        }
        match self.subcommand {
            SubcommandKind::Gaussian => {
                if self.n.is_empty() {
                    return config("give --n or --n-sweep");
                }
                if let Some(&n) = self.n.iter().find(|&&n| n < 2) {
                    return config(format!("the Gaussian bounds need n >= 2, got {n}"));
                }
                if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
                    return config(format!("sigma2 must be positive, got {}", self.sigma2));
                }
                if !self.mu.is_finite() {
                    return config("mu must be finite");
                }
                if !(self.quad_tol > 0.0) {
                    return config("quadrature tolerance must be positive");
                }
                self.require_mc(self.mc_samples)?;
                if let Some(m) = self.strengthened_mc {
                    self.require_mc(m)?;
                    if let Some(&n) = self.n.iter().find(|&&n| n > 12) {
                        return config(format!("strengthened bounds enumerate 2^n hypotheses; n = {n} is above 12"));
                    }
                }
            }
            SubcommandKind::Discrete | SubcommandKind::Compare => {
                if self.problem_file.is_none() {
                    return config("give --problem");
                }
                if self.budget == 0 {
                    return config("budget must be positive");
                }
                if self.subcommand == SubcommandKind::Discrete && !self.exact {
                    self.require_mc(self.mc_samples)?;
                }
            }
            SubcommandKind::CdCheck => {
                if self.trials == 0 {
                    return config("trials must be positive");
                }
                if self.max_alphabet == 0 {
                    return config("max alphabet must be positive");
                }
                if self.seed.is_none() {
                    return config("cd-check draws random instances; --seed is required");
                }
            }
        }
        Ok(())
    }

    fn require_mc(&self, samples: usize) -> Result<(), CliError> {
        if self.seed.is_none() {
            return config("Monte Carlo runs need --seed");
        }
        if samples < MC_BATCHES {
            return config(format!("Monte Carlo needs at least {MC_BATCHES} draws, got {samples}"));
        }
        Ok(())
    }

    fn engine(&self) -> EngineOptions {
        EngineOptions {
            tol: self.tol,
            budget: self.budget as u128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub inversion: f64,
    pub quadrature: f64,
    pub comparison: f64,
}

/// Structured record of a run; deterministic given its config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub tolerances: Tolerances,
    pub mc_batches: usize,
    /// Formula behind each bound name appearing in the output.
    pub formulas: BTreeMap<String, String>,
    pub outputs: Vec<PathBuf>,
}

impl Manifest {
    pub fn for_config(config: &RunConfig, outputs: Vec<PathBuf>) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            tolerances: Tolerances {
                inversion: if config.subcommand == SubcommandKind::CdCheck { DEFAULT_TOL } else { config.tol },
                quadrature: config.quad_tol,
                comparison: COMPARISON_TOL,
            },
            mc_batches: MC_BATCHES,
            formulas: formulas(config.subcommand),
            outputs,
        }
    }
}

fn formulas(kind: SubcommandKind) -> BTreeMap<String, String> {
    let entries: &[(&str, &str)] = match kind {
        SubcommandKind::Gaussian => &[
            ("IMI", "sigma^2 sqrt(2 (n+1)^2 / n^2 ln(n / (n-1))), sub-Gaussian envelope at I(W; Z_i) = 0.5 ln(n / (n-1))"),
            ("ICIMI", "E over Z_i^+- of min(B_{z,n}(eta), exact mixture-CGF inversion), eta = I_{Z_i^+-}(W; R_i)"),
            ("true_error", "2 sigma^2 / n"),
            ("CMI_strengthened", "E[Psi*^-1_{E~|Z^+-}(n ln 2)] over sampled supersamples"),
            ("CIMI_strengthened", "(1/n) sum_i E[Psi*^-1_{E~_i|Z^+-}(ln 2)] over sampled supersamples"),
        ],
        SubcommandKind::Discrete | SubcommandKind::Compare => &[
            ("MI", "sqrt(2 sigma^2 I(W; Z_[n]) / n) (standard); exact-CGF inverse at I(W; Z_[n]) (conjugate)"),
            ("IMI", "(1/n) sum_i psi*^-1 of -l(W~, Z~) at I(W; Z_i)"),
            ("CMI", "sqrt((2/n) E[Delta^2] I(W; R_[n] | Z^+-)) (standard); (b-a) sqrt(2 I / n) (specialization)"),
            ("CIMI", "(1/n) sum_i E[sqrt(2 I_{Z^+-}(W; R_i))] or sqrt(2 I(W; R_i | Z^+-)), losses in [0, 1]"),
            ("ICIMI", "(1/n) sum_i E[Psi*^-1_{G~_i|Z_i^+-}(I_{Z_i^+-}(W; R_i))] or its averaged-CGF form"),
            ("ICIMI_bounded", "((b-a)/n) sum_i E[sqrt(2 I_{Z_i^+-}(W; R_i))] or sqrt(2 I(W; R_i | Z_i^+-))"),
            ("CMI_strengthened", "E[Psi*^-1_{E~|Z^+-}(I_{Z^+-}(W; R_[n]))]"),
            ("CIMI_strengthened", "(1/n) sum_i E[Psi*^-1_{E~_i|Z^+-}(I_{Z^+-}(W; R_i))]"),
        ],
        SubcommandKind::CdCheck => &[(
            "decoupling",
            "E[F] - E[F~] <= E[Psi*^-1_{F~|U}(I_U(X; Y))] <= psibar*^-1(I(X; Y | U)), and with -F",
        )],
    };
    entries.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

/// JSON description of a finite problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub n: usize,
    pub xi: Vec<f64>,
    /// `loss[w][z]`.
    pub loss: Vec<Vec<f64>>,
    /// One row per training vector (base-`|Z|` index, first sample most
    /// significant). Required unless `learner` is given.
    #[serde(default)]
    pub kernel: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub learner: Option<LearnerRule>,
    #[serde(default)]
    pub z_labels: Option<Vec<String>>,
    #[serde(default)]
    pub w_labels: Option<Vec<String>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerRule {
    /// Empirical risk minimization, uniform over tied minimizers.
    Erm,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<FiniteProblem, CliError> {
        let xi = FiniteDistribution::new(self.xi.clone())?;
        let mut p = match (&self.kernel, self.learner) {
            (Some(rows), None) => {
                let kernel = rows
                    .iter()
                    .map(|r| FiniteDistribution::new(r.clone()))
                    .collect::<crate::Result<Vec<_>>>()?;
                FiniteProblem::new(xi, self.loss.clone(), kernel, self.n)?
            }
            (None, Some(LearnerRule::Erm)) => {
                let loss = self.loss.clone();
                FiniteProblem::from_learner(xi, self.loss.clone(), self.n, |z| {
                    let risk: Vec<f64> = loss.iter().map(|row| z.iter().map(|&s| row[s]).sum()).collect();
                    let best = risk.iter().copied().fold(f64::INFINITY, f64::min);
                    let ties = risk.iter().filter(|&&r| r == best).count() as f64;
                    risk.iter().map(|&r| if r == best { 1.0 / ties } else { 0.0 }).collect()
                })?
            }
            (Some(_), Some(_)) => return config("give either kernel or learner, not both"),
            (None, None) => return config("problem needs a kernel or a learner"),
        };
        if let (Some(z), Some(w)) = (&self.z_labels, &self.w_labels) {
            p = p.with_labels(z.clone(), w.clone())?;
        }
        Ok(p)
    }
}

pub fn load_problem(path: &Path) -> Result<FiniteProblem, CliError> {
    let text = read(path)?;
    let spec: ProblemSpec =
        serde_json::from_str(&text).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    spec.build()
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(e: impl std::fmt::Display) -> CliError {
    CliError::Parse(format!("CSV: {e}"))
}

/// One row of the Gaussian sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianRow {
    pub n: usize,
    pub sigma2: f64,
    pub bound_name: String,
    pub value: f64,
    pub std_error: f64,
    pub scaled_value: f64,
    pub mc_samples: usize,
    pub seed: u64,
}

/// What a run produced: the main CSV, a console summary, and any violation
/// that should turn into exit code 4.
#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub csv: Vec<u8>,
    pub summary: String,
    pub violation: Option<String>,
    pub extra_files: Vec<(PathBuf, Vec<u8>)>,
}

pub fn gaussian_rows(cfg: &RunConfig) -> Result<Vec<GaussianRow>, CliError> {
    let seed = cfg.seed.ok_or_else(|| CliError::Config("Monte Carlo runs need --seed".into()))?;
    let mut rows = Vec::new();
    for &n in &cfg.n {
        let case = GaussianCaseConfig {
            sigma2: cfg.sigma2,
            mu: cfg.mu,
            n,
            mc_samples: cfg.mc_samples,
            seed,
            quad_tol: cfg.quad_tol,
        };
        case.validate()?;
        let scale = ((n - 1) as f64).sqrt() / cfg.sigma2;
        let row = |name: &str, value: f64, std_error: f64, mc: usize| GaussianRow {
            n,
            sigma2: cfg.sigma2,
            bound_name: name.to_string(),
            value,
            std_error,
            scaled_value: value * scale,
            mc_samples: mc,
            seed,
        };
        let (_, imi) = imi_gaussian(&case)?;
        rows.push(row("IMI", imi, 0.0, 0));
        let icimi = icimi_gaussian(&case)?;
        rows.push(row("ICIMI", icimi.value, icimi.std_error, cfg.mc_samples));
        rows.push(row("true_error", 2.0 * cfg.sigma2 / n as f64, 0.0, 0));
        if let Some(m) = cfg.strengthened_mc {
            let check = strengthened_lower_check(&case.with_mc(m, seed))?;
            rows.push(row("CMI_strengthened", check.cmi.mean, check.cmi.std_error, m));
            rows.push(row("CIMI_strengthened", check.cimi.mean, check.cimi.std_error, m));
        }
    }
    Ok(rows)
}

fn to_csv<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(csv_err)
}

const GAUSSIAN_HEADER: [&str; 8] = ["n", "sigma2", "bound_name", "value", "std_error", "scaled_value", "mc_samples", "seed"];

fn run_gaussian(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let rows = gaussian_rows(cfg)?;
    let mut summary = String::new();
    for r in &rows {
        summary.push_str(&format!(
            "n = {:>7}  {:<18} {:.6e} (se {:.1e}, scaled {:.4})\n",
            r.n, r.bound_name, r.value, r.std_error, r.scaled_value
        ));
    }
    Ok(RunOutcome {
        csv: to_csv(&rows, &GAUSSIAN_HEADER)?,
        summary,
        ..Default::default()
    })
}

#[derive(Serialize)]
struct TableCsvRow<'a> {
    n: usize,
    approach: &'a str,
    x: &'a str,
    y: &'a str,
    u: &'a str,
    f: &'a str,
    info_term: f64,
    general_bound: f64,
    special_case: Option<f64>,
    note: Option<&'a str>,
}

fn run_discrete(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = load_problem(cfg.problem_file.as_deref().expect("validated"))?;
    let opts = cfg.engine();
    let units: Units = cfg.units.into();
    let gen = if cfg.exact {
        true_gen_error(&LearningProblem::Finite(p.clone()), GenMethod::ExactEnumeration, None)?
    } else {
        true_gen_error(
            &LearningProblem::Finite(p.clone()),
            GenMethod::MonteCarlo,
            Some(McParams {
                samples: cfg.mc_samples,
                seed: cfg.seed.expect("validated"),
            }),
        )?
    };
    let table = decoupling_table(&p, &opts)?;
    let mut summary = format!("{table}");
    summary.push_str(&format!("true generalization error: {:.6e} (se {:.1e})\n", gen.value, gen.std_error));
    let csv = match cfg.format {
        DiscreteFormat::Reports => {
            let mut buf = Vec::new();
            write_reports_csv(&all_bounds(&p, &opts)?, units, &mut buf)?;
            buf
        }
        DiscreteFormat::Table => {
            let rows: Vec<TableCsvRow> = table
                .rows
                .iter()
                .map(|r| TableCsvRow {
                    n: table.n,
                    approach: r.approach.as_str(),
                    x: r.x,
                    y: r.y,
                    u: r.u,
                    f: r.f,
                    info_term: units.from_nats(r.info_term),
                    general_bound: r.general_bound,
                    special_case: r.special_case,
                    note: r.note.as_deref(),
                })
                .collect();
            let header = [
                "n",
                "approach",
                "x",
                "y",
                "u",
                "f",
                units.info_column(),
                "general_bound",
                "special_case",
                "note",
            ];
            to_csv(&rows, &header)?
        }
    };
    Ok(RunOutcome {
        csv,
        summary,
        ..Default::default()
    })
}

fn run_compare(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let p = load_problem(cfg.problem_file.as_deref().expect("validated"))?;
    let cmp = compare_bounds(&p, &cfg.engine())?;
    let csv = to_csv(&cmp.pairs, &["lhs_name", "rhs_name", "lhs", "rhs", "holds"])?;
    let bad = cmp.violations();
    let mut summary = format!(
        "{} comparisons ({}), {} violations\n",
        cmp.pairs.len(),
        if cmp.bounded_suite { "information terms and bounded-loss bounds" } else { "information terms only" },
        bad.len()
    );
    for v in &bad {
        summary.push_str(&format!("  {} = {} > {} = {}\n", v.lhs_name, v.lhs, v.rhs_name, v.rhs));
    }
    let violation = (!bad.is_empty()).then(|| format!("{} ordering violations", bad.len()));
    Ok(RunOutcome {
        csv,
        summary,
        violation,
        ..Default::default()
    })
}

#[derive(Serialize)]
struct CdRow {
    trial: u64,
    direction: &'static str,
    lhs: f64,
    mid: f64,
    rhs: f64,
    info: f64,
}

fn run_cd_check(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let seed = cfg.seed.expect("validated");
    let sweep = cd_check_sweep(cfg.trials, cfg.max_alphabet, seed, cfg.tol)?;
    let dir = cfg.reproducer_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let mut rows = Vec::new();
    let mut extra = Vec::new();
    for (inst, check) in &sweep.violations {
        for (direction, t) in [("plus", check.plus), ("minus", check.minus)] {
            rows.push(CdRow {
                trial: inst.trial,
                direction,
                lhs: t.lhs,
                mid: t.mid,
                rhs: t.rhs,
                info: t.info,
            });
        }
        let body = serde_json::to_vec_pretty(inst).map_err(|e| CliError::Parse(e.to_string()))?;
        extra.push((dir.join(format!("cd_violation_seed{seed}_trial{}.json", inst.trial)), body));
    }
    let summary = format!(
        "{} trials, {} violations at tolerance {:e}, largest slack {:.3e}\n",
        sweep.trials,
        sweep.violations.len(),
        cfg.tol,
        sweep.worst_slack
    );
    let violation = (!sweep.violations.is_empty()).then(|| format!("{} decoupling violations", sweep.violations.len()));
    Ok(RunOutcome {
        csv: to_csv(&rows, &["trial", "direction", "lhs", "mid", "rhs", "info"])?,
        summary,
        violation,
        extra_files: extra,
    })
}

/// Runs a validated configuration without touching the filesystem for output.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    match cfg.subcommand {
        SubcommandKind::Gaussian => run_gaussian(cfg),
        SubcommandKind::Discrete => run_discrete(cfg),
        SubcommandKind::Compare => run_compare(cfg),
        SubcommandKind::CdCheck => run_cd_check(cfg),
    }
}

/// Path of the manifest written next to `output`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// Executes `cfg`, writes the CSV (to `output` or stdout), the manifest and
/// any reproducer files. Returns the console summary.
pub fn run(cfg: &RunConfig) -> Result<String, CliError> {
    let outcome = execute(cfg)?;
    let mut outputs = Vec::new();
    match &cfg.output {
        Some(path) => {
            write_file(path, &outcome.csv)?;
            outputs.push(path.clone());
        }
        None => {
            std::io::stdout()
                .write_all(&outcome.csv)
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
        }
    }
    for (path, body) in &outcome.extra_files {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|source| CliError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        write_file(path, body)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &cfg.output {
        let manifest = Manifest::for_config(cfg, outputs);
        let body = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Parse(e.to_string()))?;
        write_file(&manifest_path(path), &body)?;
    }
    match outcome.violation {
        Some(v) => Err(CliError::Violation(format!("{v}\n{}", outcome.summary))),
        None => Ok(outcome.summary),
    }
}

pub fn load_manifest(path: &Path) -> Result<Manifest, CliError> {
    serde_json::from_str(&read(path)?).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))
}

/// Long-format plot table `n, series, y` from a Gaussian sweep CSV, with a
/// `<name>_scaled` series holding `value sqrt(n-1) / sigma^2`.
pub fn emit_plot_data(input: &[u8]) -> Result<Vec<u8>, CliError> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["n", "series", "y"]).map_err(csv_err)?;
    if !input.iter().all(|b| b.is_ascii_whitespace()) {
        let mut rdr = csv::Reader::from_reader(input);
        let headers = rdr.headers().map_err(csv_err)?.clone();
        if headers.iter().ne(GAUSSIAN_HEADER) {
            return Err(CliError::Parse(format!(
                "expected columns {}, found {}",
                GAUSSIAN_HEADER.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        for (k, rec) in rdr.deserialize::<GaussianRow>().enumerate() {
            let r = rec.map_err(|e| CliError::Parse(format!("row {}: {e}", k + 1)))?;
            out.write_record([r.n.to_string(), r.bound_name.clone(), r.value.to_string()])
                .map_err(csv_err)?;
            out.write_record([r.n.to_string(), format!("{}_scaled", r.bound_name), r.scaled_value.to_string()])
                .map_err(csv_err)?;
        }
    }
    out.into_inner().map_err(csv_err)
}

#[derive(Debug, Parser)]
#[command(name = "genbound", version, about = "Information-theoretic generalization bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Gaussian mean estimation: IMI, ICIMI and the true error over a sweep of n.
    Gaussian(GaussianArgs),
    /// Every bound of a finite problem given as JSON.
    Discrete(DiscreteArgs),
    /// Random check of the decoupling inequality against exact enumeration.
    CdCheck(CdCheckArgs),
    /// Information-term and bound orderings of a finite problem.
    Compare(CompareArgs),
    /// Long-format plot table from a Gaussian sweep CSV.
    PlotData(PlotArgs),
    /// Re-executes the configuration stored in a manifest.
    Rerun {
        manifest: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// CSV destination; a manifest is written next to it. Defaults to stdout.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = UnitsArg::Nats)]
    pub units: UnitsArg,
}

#[derive(Debug, Args)]
pub struct GaussianArgs {
    #[arg(long, conflicts_with = "n_sweep")]
    pub n: Option<usize>,
    /// Comma-separated list of sample sizes.
    #[arg(long, value_delimiter = ',')]
    pub n_sweep: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.0)]
    pub mu: f64,
    #[arg(long = "mc", default_value_t = 100_000)]
    pub mc_samples: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_QUAD_TOL)]
    pub quad_tol: f64,
    /// Also estimate the strengthened CMI/CIMI bounds with this many tables (n <= 12).
    #[arg(long)]
    pub strengthened_mc: Option<usize>,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct DiscreteArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Exact generalization error by enumeration (the default).
    #[arg(long, conflicts_with = "mc_samples")]
    pub exact: bool,
    /// Estimate the generalization error by Monte Carlo instead.
    #[arg(long = "mc")]
    pub mc_samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = DiscreteFormat::Reports)]
    pub format: DiscreteFormat,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u64,
    #[command(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CdCheckArgs {
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    #[arg(long, default_value_t = 4)]
    pub max_alphabet: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = COMPARISON_TOL)]
    pub tol: f64,
    /// Directory for reproducer files of violating instances.
    #[arg(long)]
    pub reproducer_dir: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, default_value_t = 10_000_000)]
    pub budget: u64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Gaussian sweep CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

impl GaussianArgs {
    pub fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(SubcommandKind::Gaussian);
        c.n = match self.n {
            Some(n) => vec![n],
            None => self.n_sweep,
        };
        c.sigma2 = self.sigma2;
        c.mu = self.mu;
        c.mc_samples = self.mc_samples;
        c.seed = self.seed;
        c.quad_tol = self.quad_tol;
        c.strengthened_mc = self.strengthened_mc;
        c.output = self.out.output;
        c.units = self.out.units;
        c
    }
}

impl DiscreteArgs {
    pub fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(SubcommandKind::Discrete);
        c.problem_file = Some(self.problem);
        c.exact = self.mc_samples.is_none();
        if let Some(m) = self.mc_samples {
            c.mc_samples = m;
        }
        c.seed = self.seed;
        c.format = self.format;
        c.tol = self.tol;
        c.budget = self.budget;
        c.output = self.out.output;
        c.units = self.out.units;
        c
    }
}

impl CdCheckArgs {
    pub fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(SubcommandKind::CdCheck);
        c.trials = self.trials;
        c.max_alphabet = self.max_alphabet;
        c.seed = self.seed;
        c.tol = self.tol;
        c.reproducer_dir = self.reproducer_dir;
        c.output = self.output;
        c
    }
}

impl CompareArgs {
    pub fn into_config(self) -> RunConfig {
        let mut c = RunConfig::new(SubcommandKind::Compare);
        c.problem_file = Some(self.problem);
        c.tol = self.tol;
        c.budget = self.budget;
        c.output = self.output;
        c
    }
}

fn run_plot(args: PlotArgs) -> Result<String, CliError> {
    let input = fs::read(&args.input).map_err(|source| CliError::Io {
        path: args.input.clone(),
        source,
    })?;
    let table = emit_plot_data(&input)?;
    match &args.output {
        Some(path) => write_file(path, &table)?,
        None => std::io::stdout()
            .write_all(&table)
            .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?,
    }
    Ok(String::new())
}

/// Dispatches a parsed command line.
pub fn dispatch(cli: Cli) -> Result<String, CliError> {
    match cli.command {
        Command::Gaussian(a) => run(&a.into_config()),
        Command::Discrete(a) => run(&a.into_config()),
        Command::CdCheck(a) => run(&a.into_config()),
        Command::Compare(a) => run(&a.into_config()),
        Command::PlotData(a) => run_plot(a),
        Command::Rerun { manifest } => run(&load_manifest(&manifest)?.config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::Core(Error::Numeric("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(Error::Resource { states: 2, budget: 1 }).exit_code(), 3);
        assert_eq!(CliError::Core(Error::Invariant("x".into())).exit_code(), 4);
        assert_eq!(CliError::Violation("x".into()).exit_code(), 4);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::new(SubcommandKind::Gaussian);
        c.n = vec![10];
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        c.seed = Some(1);
        assert!(c.validate().is_ok());
        c.n = vec![1];
        assert!(c.validate().is_err());
        c.n = vec![10];
        c.sigma2 = -1.0;
        assert!(c.validate().is_err());
        let d = RunConfig::new(SubcommandKind::Discrete);
        assert!(d.validate().is_err());
    }

    #[test]
    fn sweep_parser() {
        let cli = Cli::try_parse_from(["genbound", "gaussian", "--n-sweep", "10,100,1000", "--seed", "1"]).unwrap();
        let Command::Gaussian(a) = cli.command else { panic!("wrong subcommand") };
        assert_eq!(a.into_config().n, vec![10, 100, 1000]);
        assert!(Cli::try_parse_from(["genbound", "gaussian", "--n-sweep", "10,x"]).is_err());
        assert!(Cli::try_parse_from(["genbound", "gaussian", "--n", "3", "--n-sweep", "10"]).is_err());
    }

    #[test]
    fn erm_learner_spec() {
        let spec: ProblemSpec = serde_json::from_str(
            r#"{"n": 1, "xi": [0.5, 0.5], "loss": [[0.0, 1.0], [1.0, 0.0]], "learner": "erm"}"#,
        )
        .unwrap();
        let p = spec.build().unwrap();
        assert_eq!(p.kernel()[0].probs(), &[1.0, 0.0]);
        assert_eq!(p.kernel()[1].probs(), &[0.0, 1.0]);
        assert!((p.exact_gen_error() - 0.5).abs() < 1e-15);
    }
}
