//! Experiment harness: plain-text configs in, trace/summary/certificate CSVs
//! out, plus the `certify` and `rate` inspection verbs.
//!
//! A config is `key = value` lines with dotted section paths:
//!
//! ```text
//! graph.kind = regular          # regular | erdos_renyi
//! graph.n = 20
//! graph.d = 14                  # erdos_renyi uses graph.p instead
//! graph.seed = 1
//! data.source = synthetic       # synthetic | file
//! data.m = 4000
//! data.p = 10
//! data.seed = 42
//! objective.lambda = 0.05
//! algorithm.hb.variant = newton_hb
//! algorithm.hb.alpha = 0.15
//! algorithm.hb.beta = 0.5
//! stopping.grad_tol = 1e-10
//! stopping.max_rounds = 500
//! output_dir = out
//! ```
//!
//! Every algorithm in one experiment consumes the same weight matrix, data
//! partition, reference optimum and starting point, so round counts are
//! directly comparable. A diverging entry is recorded in the summary and
//! never aborts its siblings. All file outputs are byte-deterministic for a
//! fixed config; wall-clock timings appear only on stdout.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::algorithm::{
    init, run, AlgoConfig, AlgoError, RunStatus, RunTrace, StopRule, Variant,
};
use crate::data::{
    load_delimited, pca_fit_transform_opts, shuffle_partition, split, synthesize, DataError,
};
use crate::graph::{gen_erdos_renyi, gen_regular, metropolis_weights, ConsensusMatrix, GraphError};
use crate::linalg::Mat;
use crate::objective::{
    centralized_newton, GlobalObjective, LocalObjective, LogisticLocal, NewtonOptions,
    ObjectiveError,
};
use crate::theory::{
    contraction_matrix, find_epsilon, fit_log_linear_rate, stepsize_bounds, write_region_csv,
    AdmissibleRegion, FitOptions, ProblemConstants, TheoryError,
};
use crate::util::{derive_seed, fmt17, normal};

/// Environment variable that overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "NETNEWTON_OUTPUT_DIR";

const PARTITION_STREAM: u64 = 1_000_003;
const INIT_STREAM: u64 = 1_000_017;

#[derive(Debug)]
pub enum CliError {
    /// A config field is missing, malformed or out of domain.
    ConfigInvalid { field: String, message: String },
    Graph(GraphError),
    Data(DataError),
    Objective(ObjectiveError),
    Algo(AlgoError),
    Theory(TheoryError),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConfigInvalid { field, message } => write!(f, "config field `{field}`: {message}"),
            Self::Graph(e) => write!(f, "graph: {e}"),
            Self::Data(e) => write!(f, "data: {e}"),
            Self::Objective(e) => write!(f, "objective: {e}"),
            Self::Algo(e) => write!(f, "algorithm: {e}"),
            Self::Theory(e) => write!(f, "theory: {e}"),
            Self::Io(m) => write!(f, "io: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        Self::Graph(e)
    }
}
impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        Self::Data(e)
    }
}
impl From<ObjectiveError> for CliError {
    fn from(e: ObjectiveError) -> Self {
        Self::Objective(e)
    }
}
impl From<AlgoError> for CliError {
    fn from(e: AlgoError) -> Self {
        Self::Algo(e)
    }
}
impl From<TheoryError> for CliError {
    fn from(e: TheoryError) -> Self {
        Self::Theory(e)
    }
}

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphKind {
    Regular,
    ErdosRenyi,
}

#[derive(Debug, Clone)]
pub struct GraphConfig {
    pub kind: GraphKind,
    pub n: usize,
    pub degree: usize,
    pub edge_prob: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone)]
pub struct DataConfig {
    pub source: DataSource,
    pub m: usize,
    pub p: usize,
    pub seed: u64,
    pub separation: f64,
    pub path: Option<PathBuf>,
    pub label_column: usize,
    pub positive_label: String,
    pub k_pca: Option<usize>,
    pub standardize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Zeros,
    Gaussian,
}

#[derive(Debug, Clone)]
pub struct InitConfig {
    pub kind: InitKind,
    pub scale: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct AlgorithmEntry {
    pub name: String,
    pub cfg: AlgoConfig,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub graph: GraphConfig,
    pub data: DataConfig,
    pub lambda: f64,
    pub init: InitConfig,
    /// Sorted by name; the summary preserves this order.
    pub algorithms: Vec<AlgorithmEntry>,
    pub grad_tol: f64,
    pub max_rounds: usize,
    pub newton_tol: f64,
    pub output_dir: PathBuf,
}

fn invalid(field: &str, message: impl Into<String>) -> CliError {
    CliError::ConfigInvalid { field: field.into(), message: message.into() }
}

struct KeyMap(BTreeMap<String, String>);

impl KeyMap {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(invalid(
                    &format!("line {}", idx + 1),
                    format!("expected `key = value`, got {line:?}"),
                ));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if map.insert(key.clone(), value).is_some() {
                return Err(invalid(&key, "duplicate key"));
            }
        }
        Ok(Self(map))
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn req(&mut self, key: &str) -> Result<String, CliError> {
        self.take(key).ok_or_else(|| invalid(key, "missing"))
    }

    fn req_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, CliError> {
        let raw = self.req(key)?;
        raw.parse().map_err(|_| invalid(key, format!("cannot parse {raw:?}")))
    }

    fn opt_parse<T: std::str::FromStr>(&mut self, key: &str) -> Result<Option<T>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse()
                .map(Some)
                .map_err(|_| invalid(key, format!("cannot parse {raw:?}"))),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(e.to_string()))?;
        Self::parse_str(&text)
    }

    pub fn parse_str(text: &str) -> Result<Self, CliError> {
        let mut map = KeyMap::parse(text)?;

        let kind = match map.req("graph.kind")?.as_str() {
            "regular" => GraphKind::Regular,
            "erdos_renyi" => GraphKind::ErdosRenyi,
            other => return Err(invalid("graph.kind", format!("unknown kind {other:?}"))),
        };
        let n: usize = map.req_parse("graph.n")?;
        let degree: usize = map.opt_parse("graph.d")?.unwrap_or(0);
        let edge_prob: f64 = map.opt_parse("graph.p")?.unwrap_or(0.0);
        match kind {
            GraphKind::Regular if degree == 0 => {
                return Err(invalid("graph.d", "required for regular graphs"))
            }
            GraphKind::ErdosRenyi if !(edge_prob > 0.0) => {
                return Err(invalid("graph.p", "required for erdos_renyi graphs"))
            }
            _ => {}
        }
        let graph = GraphConfig { kind, n, degree, edge_prob, seed: map.req_parse("graph.seed")? };

        let source = match map.req("data.source")?.as_str() {
            "synthetic" => DataSource::Synthetic,
            "file" => DataSource::File,
            other => return Err(invalid("data.source", format!("unknown source {other:?}"))),
        };
        let path: Option<PathBuf> = map.take("data.path").map(PathBuf::from);
        if source == DataSource::File && path.is_none() {
            return Err(invalid("data.path", "required for file sources"));
        }
        let data = DataConfig {
            source,
            m: map.opt_parse("data.m")?.unwrap_or(4000),
            p: map.opt_parse("data.p")?.unwrap_or(10),
            seed: map.opt_parse("data.seed")?.unwrap_or(42),
            separation: map.opt_parse("data.separation")?.unwrap_or(2.0),
            path,
            label_column: map.opt_parse("data.label_column")?.unwrap_or(0),
            positive_label: map.take("data.positive_label").unwrap_or_else(|| "2".into()),
            k_pca: map.opt_parse("data.k_pca")?,
            standardize: map.opt_parse("data.standardize")?.unwrap_or(false),
        };

        let lambda: f64 = map.req_parse("objective.lambda")?;
        if !(lambda > 0.0) {
            return Err(invalid("objective.lambda", "must be positive"));
        }

        let init_kind = match map.take("init.kind").as_deref() {
            None | Some("zeros") => InitKind::Zeros,
            Some("gaussian") => InitKind::Gaussian,
            Some(other) => return Err(invalid("init.kind", format!("unknown kind {other:?}"))),
        };
        let init = InitConfig {
            kind: init_kind,
            scale: map.opt_parse("init.scale")?.unwrap_or(1.0),
            seed: map.opt_parse("init.seed")?.unwrap_or(0),
        };

        // algorithm.<name>.{variant, alpha, beta}
        let mut staging: BTreeMap<String, (Option<String>, Option<f64>, Option<f64>)> =
            BTreeMap::new();
        let algo_keys: Vec<String> =
            map.0.keys().filter(|k| k.starts_with("algorithm.")).cloned().collect();
        for key in algo_keys {
            let value = map.take(&key).unwrap();
            let rest = &key["algorithm.".len()..];
            let Some((name, field)) = rest.split_once('.') else {
                return Err(invalid(&key, "expected algorithm.<name>.<field>"));
            };
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(invalid(&key, "algorithm names must be [A-Za-z0-9_]+"));
            }
            let slot = staging.entry(name.to_string()).or_default();
            match field {
                "variant" => slot.0 = Some(value),
                "alpha" => {
                    slot.1 =
                        Some(value.parse().map_err(|_| invalid(&key, format!("cannot parse {value:?}")))?)
                }
                "beta" => {
                    slot.2 =
                        Some(value.parse().map_err(|_| invalid(&key, format!("cannot parse {value:?}")))?)
                }
                other => return Err(invalid(&key, format!("unknown field {other:?}"))),
            }
        }
        let mut algorithms = Vec::new();
        for (name, (variant, alpha, beta)) in staging {
            let field = |f: &str| format!("algorithm.{name}.{f}");
            let variant_raw = variant.ok_or_else(|| invalid(&field("variant"), "missing"))?;
            let variant = Variant::parse(&variant_raw)
                .ok_or_else(|| invalid(&field("variant"), format!("unknown variant {variant_raw:?}")))?;
            let alpha = alpha.ok_or_else(|| invalid(&field("alpha"), "missing"))?;
            let beta = beta.unwrap_or(0.0);
            let cfg = AlgoConfig::new(variant, alpha, beta)
                .map_err(|e| invalid(&field("alpha"), e.to_string()))?;
            algorithms.push(AlgorithmEntry { name, cfg });
        }
        if algorithms.is_empty() {
            return Err(invalid("algorithm", "at least one algorithm entry is required"));
        }

        let grad_tol: f64 = map.req_parse("stopping.grad_tol")?;
        if !(grad_tol > 0.0) {
            return Err(invalid("stopping.grad_tol", "must be positive"));
        }
        let max_rounds: usize = map.req_parse("stopping.max_rounds")?;
        let newton_tol: f64 = map.opt_parse("reference.newton_tol")?.unwrap_or(1e-12);
        let output_dir = PathBuf::from(map.take("output_dir").unwrap_or_else(|| "out".into()));

        if let Some((key, _)) = map.0.iter().next() {
            return Err(invalid(key, "unknown key"));
        }
        Ok(Self {
            graph,
            data,
            lambda,
            init,
            algorithms,
            grad_tol,
            max_rounds,
            newton_tol,
            output_dir,
        })
    }

    /// Apply the `NETNEWTON_OUTPUT_DIR` override when present.
    pub fn apply_env_override(&mut self) {
        if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
            if !dir.is_empty() {
                self.output_dir = PathBuf::from(dir);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Workbench: everything an experiment shares across algorithms
// ---------------------------------------------------------------------------

pub struct Workbench {
    pub weights: ConsensusMatrix,
    pub objective: GlobalObjective,
    pub constants: ProblemConstants,
    pub x0: Mat,
}

/// Build graph → weights → data → partition → per-agent objectives → x0.
pub fn build_workbench(cfg: &ExperimentConfig) -> Result<Workbench, CliError> {
    let topo = match cfg.graph.kind {
        GraphKind::Regular => gen_regular(cfg.graph.n, cfg.graph.degree, cfg.graph.seed)?,
        GraphKind::ErdosRenyi => gen_erdos_renyi(cfg.graph.n, cfg.graph.edge_prob, cfg.graph.seed)?,
    };
    let weights = metropolis_weights(&topo)?;

    let mut dataset = match cfg.data.source {
        DataSource::Synthetic => {
            synthesize(cfg.data.m, cfg.data.p, cfg.data.seed, cfg.data.separation)?
        }
        DataSource::File => load_delimited(
            cfg.data.path.as_ref().expect("validated at parse"),
            cfg.data.label_column,
            &cfg.data.positive_label,
        )?,
    };
    if let Some(k) = cfg.data.k_pca {
        dataset = pca_fit_transform_opts(&dataset, k, cfg.data.standardize)?.1;
    }

    let partition = shuffle_partition(&dataset, cfg.graph.n, derive_seed(cfg.data.seed, PARTITION_STREAM))?;
    let shards = split(&dataset, &partition);
    let locals: Vec<Box<dyn LocalObjective>> = shards
        .into_iter()
        .map(|s| {
            LogisticLocal::new(s.features, s.labels, cfg.lambda)
                .map(|l| Box::new(l) as Box<dyn LocalObjective>)
        })
        .collect::<Result<_, _>>()?;
    let objective = GlobalObjective::new(locals)?;
    let constants = ProblemConstants::measure(&objective, &weights)?;

    let dim = objective.dim();
    let x0 = match cfg.init.kind {
        InitKind::Zeros => Mat::zeros(cfg.graph.n, dim),
        InitKind::Gaussian => {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.init.seed, INIT_STREAM));
            Mat::from_fn(cfg.graph.n, dim, |_, _| cfg.init.scale * normal(&mut rng))
        }
    };
    Ok(Workbench { weights, objective, constants, x0 })
}

// ---------------------------------------------------------------------------
// run_experiment
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub name: String,
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
    /// First round with `‖∇f(x̄)‖ ≤ grad_tol`, or `max_rounds + 1`.
    pub rounds_to_tolerance: usize,
    /// `f(x̄) − f*` at the final recorded round.
    pub final_gap: f64,
    pub fitted_rate: Option<f64>,
    /// `ρ(M(α,β))` for Newton-direction variants.
    pub rho_m: Option<f64>,
    /// Whether `(α, β)` lies inside the certificate region (Newton variants).
    pub certified: Option<bool>,
    pub status: RunStatus,
    /// Wall time of the run in seconds; reported on stdout, never in files.
    pub wall_s: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub rows: Vec<SummaryRow>,
    pub f_star: f64,
    pub x_star: Vec<f64>,
    pub output_dir: PathBuf,
    pub any_diverged: bool,
}

/// Full experiment: shared setup, one run per configured algorithm, CSV
/// artifacts under `output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome, CliError> {
    let bench = build_workbench(cfg)?;
    let newton_opts = NewtonOptions { tol: cfg.newton_tol, ..Default::default() };
    let reference = centralized_newton(&bench.objective, &vec![0.0; bench.objective.dim()], &newton_opts)?;
    let stop = StopRule { grad_tol: cfg.grad_tol, max_rounds: cfg.max_rounds };
    let sentinel = cfg.max_rounds + 1;
    let region = find_epsilon(&bench.constants)
        .and_then(|cert| stepsize_bounds(&cert, &bench.constants))
        .ok();

    let runs: Vec<(SummaryRow, Option<RunTrace>)> = cfg
        .algorithms
        .par_iter()
        .map(|entry| {
            let outcome = init(&bench.objective, bench.x0.clone(), &entry.cfg).and_then(|mut state| {
                run(&mut state, &bench.weights, &entry.cfg, &bench.objective, &stop, Some(&reference.x))
            });
            let (trace, status) = match outcome {
                Ok(trace) => {
                    let status = trace.status;
                    (Some(trace), status)
                }
                Err(_) => (None, RunStatus::Diverged { round: 0 }),
            };
            let (rounds, final_gap, fitted_rate, wall_s) = match &trace {
                Some(t) => (
                    t.rounds_to_grad_tol(cfg.grad_tol).unwrap_or(sentinel),
                    t.records.last().map(|r| r.f_value - reference.f).unwrap_or(f64::NAN),
                    fit_log_linear_rate(&t.error_norms(), &FitOptions::default())
                        .ok()
                        .map(|f| f.rho_hat),
                    t.records.last().map(|r| r.elapsed).unwrap_or(0.0),
                ),
                None => (sentinel, f64::NAN, None, 0.0),
            };
            let (rho_m, certified) = if entry.cfg.variant.uses_hessian() {
                let cm = contraction_matrix(&bench.constants, entry.cfg.alpha, entry.cfg.beta);
                let inside = region.as_ref().map(|r| r.contains(entry.cfg.alpha, entry.cfg.beta));
                (Some(cm.rho), inside)
            } else {
                (None, None)
            };
            let row = SummaryRow {
                name: entry.name.clone(),
                variant: entry.cfg.variant,
                alpha: entry.cfg.alpha,
                beta: entry.cfg.beta,
                rounds_to_tolerance: rounds,
                final_gap,
                fitted_rate,
                rho_m,
                certified,
                status,
                wall_s,
            };
            (row, trace)
        })
        .collect();

    fs::create_dir_all(&cfg.output_dir).map_err(|e| CliError::Io(e.to_string()))?;
    for (row, trace) in &runs {
        if let Some(trace) = trace {
            trace.write_csv(&cfg.output_dir.join(format!("trace_{}.csv", row.name)))?;
        }
    }
    let rows: Vec<SummaryRow> = runs.into_iter().map(|(row, _)| row).collect();
    write_summary_csv(&rows, &cfg.output_dir.join("summary.csv"))?;
    if let Some(region) = &region {
        write_region_csv(
            &bench.constants,
            region,
            1.0 / bench.constants.q,
            1.0,
            50,
            &cfg.output_dir.join("certificate.csv"),
        )?;
    }

    let any_diverged = rows.iter().any(|r| matches!(r.status, RunStatus::Diverged { .. }));
    Ok(ExperimentOutcome {
        rows,
        f_star: reference.f,
        x_star: reference.x,
        output_dir: cfg.output_dir.clone(),
        any_diverged,
    })
}

fn write_summary_csv(rows: &[SummaryRow], path: &Path) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(|e| CliError::Io(e.to_string()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(
        out,
        "algorithm,variant,alpha,beta,rounds_to_tolerance,final_gap,fitted_rate,rho_m,certified,status"
    )
    .map_err(|e| CliError::Io(e.to_string()))?;
    for r in rows {
        let fitted = r.fitted_rate.map_or_else(|| "NaN".into(), fmt17);
        let rho = r.rho_m.map_or_else(|| "NaN".into(), fmt17);
        let certified = match r.certified {
            Some(true) => "1",
            Some(false) => "0",
            None => "NA",
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.name,
            r.variant.name(),
            fmt17(r.alpha),
            fmt17(r.beta),
            r.rounds_to_tolerance,
            fmt17(r.final_gap),
            fitted,
            rho,
            certified,
            r.status.label(),
        )
        .map_err(|e| CliError::Io(e.to_string()))?;
    }
    Ok(())
}

/// Human-readable comparison table (the one place wall time shows up).
pub fn format_summary_table(outcome: &ExperimentOutcome) -> String {
    let mut s = String::new();
    s.push_str(&format!("f* = {:.12e}\n", outcome.f_star));
    s.push_str(&format!(
        "{:<14} {:<13} {:>8} {:>6} {:>9} {:>12} {:>10} {:>10} {:>5} {:>11} {:>8}\n",
        "algorithm", "variant", "alpha", "beta", "rounds", "final_gap", "rate", "rho(M)", "cert", "status", "wall_s"
    ));
    for r in &outcome.rows {
        s.push_str(&format!(
            "{:<14} {:<13} {:>8.4} {:>6.3} {:>9} {:>12.3e} {:>10} {:>10} {:>5} {:>11} {:>8.2}\n",
            r.name,
            r.variant.name(),
            r.alpha,
            r.beta,
            r.rounds_to_tolerance,
            r.final_gap,
            r.fitted_rate.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            r.rho_m.map_or_else(|| "-".into(), |v| format!("{v:.4}")),
            match r.certified {
                Some(true) => "yes",
                Some(false) => "no",
                None => "-",
            },
            r.status.label(),
            r.wall_s,
        ));
    }
    s
}

// ---------------------------------------------------------------------------
// certify
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CertifyReport {
    pub constants: ProblemConstants,
    pub eps: [f64; 4],
    pub eps_tilde: f64,
    pub eps_bar: f64,
    pub alpha_terms: [f64; 4],
    pub beta_terms: [f64; 4],
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub certified: bool,
}

/// Measure the instance constants, build the certificate, and judge `(α, β)`.
pub fn certify(cfg: &ExperimentConfig, alpha: f64, beta: f64) -> Result<CertifyReport, CliError> {
    let bench = build_workbench(cfg)?;
    let cert = find_epsilon(&bench.constants)?;
    let region: AdmissibleRegion = stepsize_bounds(&cert, &bench.constants)?;
    let cm = contraction_matrix(&bench.constants, alpha, beta);
    Ok(CertifyReport {
        constants: bench.constants,
        eps: cert.eps,
        eps_tilde: cert.eps_tilde,
        eps_bar: cert.eps_bar,
        alpha_terms: region.alpha_terms(),
        beta_terms: region.beta_terms(alpha),
        alpha,
        beta,
        rho: cm.rho,
        certified: region.contains(alpha, beta),
    })
}

impl CertifyReport {
    pub fn render(&self) -> String {
        let c = &self.constants;
        let mut s = String::new();
        s.push_str(&format!(
            "constants: mu = {:.6e}, L = {:.6e}, Q = {:.4}, sigma = {:.6}, eta = {:.6}, n = {}\n",
            c.mu, c.lipschitz, c.q, c.sigma, c.eta, c.n
        ));
        s.push_str(&format!(
            "epsilon = ({:.6e}, {:.6e}, {:.6e}, {:.6e})\n",
            self.eps[0], self.eps[1], self.eps[2], self.eps[3]
        ));
        s.push_str(&format!("eps_tilde = {:.6e}, eps_bar = {:.6e}\n", self.eps_tilde, self.eps_bar));
        s.push_str(&format!(
            "alpha bounds: 1/Q = {:.6e}, consensus = {:.6e}, tracking = {:.6e}, momentum = {:.6e}\n",
            self.alpha_terms[0], self.alpha_terms[1], self.alpha_terms[2], self.alpha_terms[3]
        ));
        s.push_str(&format!(
            "beta bounds at alpha = {:.6}: {:.6e}, {:.6e}, {:.6e}, {:.6e}\n",
            self.alpha, self.beta_terms[0], self.beta_terms[1], self.beta_terms[2], self.beta_terms[3]
        ));
        s.push_str(&format!("rho(M(alpha, beta)) = {:.8}\n", self.rho));
        if self.certified {
            s.push_str(&format!("verdict: CERTIFIED — (alpha = {}, beta = {}) is inside the admissible region\n", self.alpha, self.beta));
        } else {
            s.push_str(&format!(
                "verdict: UNCERTIFIED — (alpha = {}, beta = {}) is outside the conservative region; \
                 this does not imply divergence\n",
                self.alpha, self.beta
            ));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// rate
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct RateReport {
    pub rho_hat: f64,
    pub r_squared: f64,
    pub window: (usize, usize),
    pub rounds: usize,
}

/// Fit the observed linear rate from a trace CSV.
pub fn rate_report(trace_path: &Path) -> Result<RateReport, CliError> {
    let records = RunTrace::read_csv(trace_path)?;
    let norms: Vec<f64> = records.iter().map(|r| r.error.norm()).collect();
    let above_floor = norms.iter().filter(|&&e| e > 1e-12).count();
    if above_floor < 30 {
        return Err(CliError::Theory(TheoryError::InsufficientTrace { needed: 30, got: above_floor }));
    }
    let fit = fit_log_linear_rate(&norms, &FitOptions::default())?;
    Ok(RateReport {
        rho_hat: fit.rho_hat,
        r_squared: fit.r_squared,
        window: fit.window,
        rounds: records.len(),
    })
}

impl RateReport {
    pub fn render(&self) -> String {
        format!(
            "rounds = {}, fit window = [{}, {}], rho_hat = {:.8}, R^2 = {:.6}\n",
            self.rounds, self.window.0, self.window.1, self.rho_hat, self.r_squared
        )
    }
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Parse a sweep grid file: one `variant alpha beta` triple per line.
pub fn parse_grid(text: &str) -> Result<Vec<AlgoConfig>, CliError> {
    let mut grid = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(invalid(
                &format!("grid line {}", idx + 1),
                "expected `variant alpha beta`",
            ));
        }
        let variant = Variant::parse(fields[0])
            .ok_or_else(|| invalid(&format!("grid line {}", idx + 1), "unknown variant"))?;
        let alpha: f64 = fields[1]
            .parse()
            .map_err(|_| invalid(&format!("grid line {}", idx + 1), "bad alpha"))?;
        let beta: f64 = fields[2]
            .parse()
            .map_err(|_| invalid(&format!("grid line {}", idx + 1), "bad beta"))?;
        grid.push(AlgoConfig::new(variant, alpha, beta).map_err(|e| {
            invalid(&format!("grid line {}", idx + 1), e.to_string())
        })?);
    }
    if grid.is_empty() {
        return Err(invalid("grid", "no entries"));
    }
    Ok(grid)
}

/// Run a sweep grid on the config's shared setup against its grad tolerance.
pub fn run_sweep(
    cfg: &ExperimentConfig,
    grid: &[AlgoConfig],
) -> Result<Vec<crate::algorithm::SweepEntry>, CliError> {
    let bench = build_workbench(cfg)?;
    let stop = StopRule { grad_tol: cfg.grad_tol, max_rounds: cfg.max_rounds };
    Ok(crate::algorithm::sweep(
        grid,
        &bench.weights,
        &bench.objective,
        &bench.x0,
        &stop,
        &crate::algorithm::SweepTarget::GradTol(cfg.grad_tol),
        None,
    ))
}

pub fn format_sweep_table(entries: &[crate::algorithm::SweepEntry], max_rounds: usize) -> String {
    let mut s = String::new();
    s.push_str(&format!("{:<14} {:>8} {:>6} {:>9} {:>11}\n", "variant", "alpha", "beta", "rounds", "status"));
    for e in entries {
        let rounds = if e.rounds > max_rounds {
            "-".to_string()
        } else {
            e.rounds.to_string()
        };
        s.push_str(&format!(
            "{:<14} {:>8.4} {:>6.3} {:>9} {:>11}\n",
            e.cfg.variant.name(),
            e.cfg.alpha,
            e.cfg.beta,
            rounds,
            e.status.label(),
        ));
    }
    s
}
