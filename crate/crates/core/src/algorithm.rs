//! Synchronous round engine for the accelerated Newton-type recursion and its
//! in-family baselines.
//!
//! One round of the full method:
//!
//! ```text
//! X(t+1) = W·X(t) − α·D(t) + β·V(t)
//! G(t+1) = ∇F(X(t+1)) − ∇F(X(t))
//! Y(t+1) = W·Y(t) + G(t+1)
//! V(t+1) = X(t+1) − X(t)
//! D(t+1) = rows [∇²f_i(x_i(t+1))]⁻¹ y_i(t+1)   (Newton variants)
//!        = Y(t+1)                               (gradient-tracking variants)
//! ```
//!
//! initialized with `Y(0) = G(0) = ∇F(X(0))` and `V(0) = 0` (that is,
//! `X(0) = X(−1)`). The tracker initialization is what makes the column means
//! of `Y` equal the column means of `∇F(X)` at every round, so the per-agent
//! descent directions consume an estimate of the *global* gradient.
//!
//! `∇F(X(t))` is cached between rounds: forming `G(t+1)` costs exactly one
//! fresh gradient evaluation per agent per round. Descent directions are
//! recomputed each round from the fresh `(x_i, y_i)` pair.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::graph::ConsensusMatrix;
use crate::linalg::{norm2, Mat};
use crate::objective::{GlobalObjective, ObjectiveError};
use crate::theory::{error_vector, ErrorVector};
use crate::util::fmt17;

/// A run is declared divergent once the global gradient norm passes this.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum AlgoError {
    /// Invalid algorithm parameters.
    InvalidConfig(String),
    /// Propagated per-agent failure (Hessian factorization, ...).
    Objective(ObjectiveError),
    Io(String),
    Parse { line: usize, message: String },
}

impl fmt::Display for AlgoError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            Self::Objective(e) => write!(f, "objective failure: {e}"),
            Self::Io(msg) => write!(f, "io error: {msg}"),
            Self::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
        }
    }
}

impl std::error::Error for AlgoError {}

impl From<ObjectiveError> for AlgoError {
    fn from(e: ObjectiveError) -> Self {
        Self::Objective(e)
    }
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Which recursion runs.
///
/// `Newton*` variants apply the local inverse-Hessian to the tracker;
/// `GradTrack*` variants use the tracker directly (identity direction).
/// The `Hb` suffix enables the heavy-ball momentum term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    NewtonHb,
    Newton,
    GradTrack,
    GradTrackHb,
}

impl Variant {
    pub fn uses_hessian(self) -> bool {
        matches!(self, Self::NewtonHb | Self::Newton)
    }

    pub fn momentum_free(self) -> bool {
        matches!(self, Self::Newton | Self::GradTrack)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::NewtonHb => "newton_hb",
            Self::Newton => "newton",
            Self::GradTrack => "grad_track",
            Self::GradTrackHb => "grad_track_hb",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "newton_hb" => Some(Self::NewtonHb),
            "newton" => Some(Self::Newton),
            "grad_track" => Some(Self::GradTrack),
            "grad_track_hb" => Some(Self::GradTrackHb),
            _ => None,
        }
    }
}

/// Step size, momentum coefficient and variant. Momentum-free variants force
/// `β = 0` at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlgoConfig {
    pub variant: Variant,
    pub alpha: f64,
    pub beta: f64,
}

impl AlgoConfig {
    pub fn new(variant: Variant, alpha: f64, beta: f64) -> Result<Self, AlgoError> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(AlgoError::InvalidConfig(format!("alpha must be positive, got {alpha}")));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(AlgoError::InvalidConfig(format!("beta must be nonnegative, got {beta}")));
        }
        let beta = if variant.momentum_free() { 0.0 } else { beta };
        Ok(Self { variant, alpha, beta })
    }
}

// ---------------------------------------------------------------------------
// Network state
// ---------------------------------------------------------------------------

/// Stacked iterates of all agents at one round.
///
/// Rows index agents, columns index the decision dimension. `grad` caches
/// `∇F(X(t))` so a round consumes exactly one fresh gradient pass.
#[derive(Debug, Clone)]
pub struct NetworkState {
    t: usize,
    x: Mat,
    x_prev: Mat,
    y: Mat,
    g: Mat,
    v: Mat,
    d: Mat,
    grad: Mat,
}

impl NetworkState {
    pub fn t(&self) -> usize {
        self.t
    }
    pub fn x(&self) -> &Mat {
        &self.x
    }
    pub fn x_prev(&self) -> &Mat {
        &self.x_prev
    }
    pub fn y(&self) -> &Mat {
        &self.y
    }
    pub fn g(&self) -> &Mat {
        &self.g
    }
    pub fn v(&self) -> &Mat {
        &self.v
    }
    pub fn d(&self) -> &Mat {
        &self.d
    }
    /// Cached `∇F(X(t))`.
    pub fn grad_stack(&self) -> &Mat {
        &self.grad
    }
    pub fn n(&self) -> usize {
        self.x.rows()
    }
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn all_finite(&self) -> bool {
        self.x.all_finite() && self.y.all_finite() && self.d.all_finite()
    }
}

/// Per-variant descent directions from fresh `(x_i, y_i)` rows.
fn directions(
    variant: Variant,
    obj: &GlobalObjective,
    x: &Mat,
    y: &Mat,
) -> Result<Mat, AlgoError> {
    if !variant.uses_hessian() {
        return Ok(y.clone());
    }
    let mut d = Mat::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let z = obj.local(i).hessian_solve(x.row(i), y.row(i))?;
        d.set_row(i, &z);
    }
    Ok(d)
}

/// Build round-0 state: `Y(0) = G(0) = ∇F(X(0))`, `V(0) = 0`.
pub fn init(obj: &GlobalObjective, x0: Mat, cfg: &AlgoConfig) -> Result<NetworkState, AlgoError> {
    assert_eq!(x0.rows(), obj.n_agents(), "x0 rows must match agent count");
    assert_eq!(x0.cols(), obj.dim(), "x0 cols must match dimension");
    if !x0.all_finite() {
        return Err(AlgoError::InvalidConfig("x0 has non-finite entries".into()));
    }
    let grad = obj.stack_gradient(&x0);
    let y = grad.clone();
    let g = grad.clone();
    let v = Mat::zeros(x0.rows(), x0.cols());
    let d = directions(cfg.variant, obj, &x0, &y)?;
    Ok(NetworkState { t: 0, x_prev: x0.clone(), x: x0, y, g, v, d, grad })
}

/// Advance one synchronous round in place.
pub fn step(
    state: &mut NetworkState,
    w: &ConsensusMatrix,
    cfg: &AlgoConfig,
    obj: &GlobalObjective,
) -> Result<(), AlgoError> {
    assert_eq!(w.n(), state.n(), "weight matrix size must match agent count");
    let mut x_next = w.w.matmul(&state.x);
    x_next.add_scaled(&state.d, -cfg.alpha);
    x_next.add_scaled(&state.v, cfg.beta);

    let grad_next = obj.stack_gradient(&x_next);
    let g_next = grad_next.sub(&state.grad);
    let mut y_next = w.w.matmul(&state.y);
    y_next.add_scaled(&g_next, 1.0);
    let v_next = x_next.sub(&state.x);
    let d_next = directions(cfg.variant, obj, &x_next, &y_next)?;

    state.x_prev = std::mem::replace(&mut state.x, x_next);
    state.y = y_next;
    state.g = g_next;
    state.v = v_next;
    state.d = d_next;
    state.grad = grad_next;
    state.t += 1;
    Ok(())
}

// ---------------------------------------------------------------------------
// Run traces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunStatus {
    /// Global gradient norm reached the tolerance.
    Converged,
    /// Round budget exhausted first.
    MaxRounds,
    /// Gradient norm passed the divergence guard or went non-finite.
    Diverged { round: usize },
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            Self::Converged => "converged".into(),
            Self::MaxRounds => "max_rounds".into(),
            Self::Diverged { round } => format!("diverged@{round}"),
        }
    }
}

/// One row per round: the error vector, the aggregate objective at the mean
/// iterate, and its gradient norm.
#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub round: usize,
    pub error: ErrorVector,
    pub f_value: f64,
    pub grad_norm: f64,
    /// Seconds since the run started; diagnostic only, never serialized.
    pub elapsed: f64,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
}

impl RunTrace {
    /// First round whose gradient norm is at or below `tol`.
    pub fn rounds_to_grad_tol(&self, tol: f64) -> Option<usize> {
        self.records.iter().find(|r| r.grad_norm <= tol).map(|r| r.round)
    }

    /// First round with `f(x̄) − f* ≤ gap`.
    pub fn rounds_to_gap(&self, f_star: f64, gap: f64) -> Option<usize> {
        self.records.iter().find(|r| r.f_value - f_star <= gap).map(|r| r.round)
    }

    /// Euclidean norms of the per-round error vectors (finite components).
    pub fn error_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.error.norm()).collect()
    }

    pub const CSV_HEADER: &'static str =
        "round,consensus_err,tracking_err,opt_err,momentum_norm,f_value,grad_norm";

    pub fn write_csv(&self, path: &Path) -> Result<(), AlgoError> {
        let file = fs::File::create(path).map_err(|e| AlgoError::Io(e.to_string()))?;
        let mut out = std::io::BufWriter::new(file);
        writeln!(out, "{}", Self::CSV_HEADER).map_err(|e| AlgoError::Io(e.to_string()))?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.round,
                fmt17(r.error.consensus),
                fmt17(r.error.tracking),
                fmt17(r.error.optimality),
                fmt17(r.error.momentum),
                fmt17(r.f_value),
                fmt17(r.grad_norm),
            )
            .map_err(|e| AlgoError::Io(e.to_string()))?;
        }
        Ok(())
    }

    /// Parse a trace CSV produced by [`RunTrace::write_csv`].
    pub fn read_csv(path: &Path) -> Result<Vec<TraceRecord>, AlgoError> {
        let text = fs::read_to_string(path).map_err(|e| AlgoError::Io(e.to_string()))?;
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim() == Self::CSV_HEADER => {}
            Some((_, header)) => {
                return Err(AlgoError::Parse {
                    line: 1,
                    message: format!("unexpected header: {header:?}"),
                })
            }
            None => return Err(AlgoError::Parse { line: 1, message: "empty file".into() }),
        }
        let mut records = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 7 {
                return Err(AlgoError::Parse {
                    line: idx + 1,
                    message: format!("expected 7 fields, got {}", fields.len()),
                });
            }
            let num = |k: usize| -> Result<f64, AlgoError> {
                fields[k].trim().parse().map_err(|_| AlgoError::Parse {
                    line: idx + 1,
                    message: format!("bad float {:?}", fields[k]),
                })
            };
            let round: usize = fields[0].trim().parse().map_err(|_| AlgoError::Parse {
                line: idx + 1,
                message: format!("bad round index {:?}", fields[0]),
            })?;
            records.push(TraceRecord {
                round,
                error: ErrorVector {
                    consensus: num(1)?,
                    tracking: num(2)?,
                    optimality: num(3)?,
                    momentum: num(4)?,
                },
                f_value: num(5)?,
                grad_norm: num(6)?,
                elapsed: 0.0,
            });
        }
        Ok(records)
    }
}

/// Stopping rule: whichever of the two triggers first.
#[derive(Debug, Clone, Copy)]
pub struct StopRule {
    pub grad_tol: f64,
    pub max_rounds: usize,
}

/// Iterate [`step`] until the gradient tolerance, the round budget, or the
/// divergence guard fires. Records one [`TraceRecord`] per visited round;
/// the optimality component is only populated when `x_star` is supplied.
pub fn run(
    state: &mut NetworkState,
    w: &ConsensusMatrix,
    cfg: &AlgoConfig,
    obj: &GlobalObjective,
    stop: &StopRule,
    x_star: Option<&[f64]>,
) -> Result<RunTrace, AlgoError> {
    let started = Instant::now();
    let mut records = Vec::new();
    let status = loop {
        let x_mean = state.x.col_means();
        let (f_value, grad_mean) = obj.value_and_gradient(&x_mean);
        let grad_norm = norm2(&grad_mean);
        records.push(TraceRecord {
            round: state.t,
            error: error_vector(state, x_star),
            f_value,
            grad_norm,
            elapsed: started.elapsed().as_secs_f64(),
        });
        if !grad_norm.is_finite() || grad_norm > DIVERGENCE_GUARD || !state.all_finite() {
            break RunStatus::Diverged { round: state.t };
        }
        if grad_norm <= stop.grad_tol {
            break RunStatus::Converged;
        }
        if state.t >= stop.max_rounds {
            break RunStatus::MaxRounds;
        }
        step(state, w, cfg, obj)?;
    };
    Ok(RunTrace { records, status })
}

// ---------------------------------------------------------------------------
// Grid sweeps
// ---------------------------------------------------------------------------

/// What a sweep counts rounds against.
#[derive(Debug, Clone, Copy)]
pub enum SweepTarget {
    /// Rounds until `‖∇f(x̄)‖ ≤ tol`.
    GradTol(f64),
    /// Rounds until `f(x̄) − f* ≤ tol`.
    Gap { f_star: f64, tol: f64 },
}

#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub cfg: AlgoConfig,
    /// Rounds to the target, or `max_rounds + 1` as the failure sentinel.
    pub rounds: usize,
    pub status: RunStatus,
}

/// Run every config from the same start and report rounds-to-target.
/// Failures (divergence, factorization breakdown) are recorded per entry and
/// never abort sibling configs. Entries come back in grid order.
pub fn sweep(
    grid: &[AlgoConfig],
    w: &ConsensusMatrix,
    obj: &GlobalObjective,
    x0: &Mat,
    stop: &StopRule,
    target: &SweepTarget,
    x_star: Option<&[f64]>,
) -> Vec<SweepEntry> {
    let sentinel = stop.max_rounds + 1;
    grid.par_iter()
        .map(|cfg| {
            let outcome = init(obj, x0.clone(), cfg)
                .and_then(|mut state| run(&mut state, w, cfg, obj, stop, x_star));
            match outcome {
                Ok(trace) => {
                    let rounds = match *target {
                        SweepTarget::GradTol(tol) => trace.rounds_to_grad_tol(tol),
                        SweepTarget::Gap { f_star, tol } => trace.rounds_to_gap(f_star, tol),
                    };
                    SweepEntry {
                        cfg: *cfg,
                        rounds: rounds.unwrap_or(sentinel),
                        status: trace.status,
                    }
                }
                Err(_) => SweepEntry { cfg: *cfg, rounds: sentinel, status: RunStatus::Diverged { round: 0 } },
            }
        })
        .collect()
}
