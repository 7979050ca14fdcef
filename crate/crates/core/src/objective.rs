//! Local objectives with analytic gradients and Hessians, the aggregate
//! objective, and a centralized Newton reference solver.
//!
//! Every local objective is twice differentiable with curvature pinched
//! between its strong-convexity constant `μ` and smoothness constant `L`
//! (`μI ⪯ ∇²f_i(x) ⪯ LI`). The regularized logistic loss
//!
//! ```text
//! f_i(x) = (1/m_i) Σ_j log(1 + exp(−v_j·(xᵀu_j))) + (λ/2)‖x‖²
//! ```
//!
//! has `μ = λ` and `L = λ + λ_max(UᵀU)/(4 m_i)` from the `s(1−s) ≤ 1/4`
//! bound on the sigmoid derivative. Hessian applications are realized as an
//! SPD Cholesky factorization plus triangular solves; no explicit inverse is
//! ever formed.

use std::fmt;

use crate::linalg::{cholesky, dot, norm2, sym_eigen, Cholesky, LinalgError, Mat};

#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveError {
    /// Construction input outside its domain.
    InvalidInput(String),
    /// Hessian factorization failed: curvature assumption violated or data
    /// pathology.
    Factorization(LinalgError),
    /// Eigensolver failure while computing smoothness constants.
    Eigen(LinalgError),
    /// Newton exceeded its iteration budget.
    MaxIterations { iterations: usize, grad_norm: f64 },
    /// Backtracking line search shrank the step below representable range.
    LineSearchFailure { iteration: usize },
}

impl fmt::Display for ObjectiveError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Self::Factorization(e) => write!(f, "hessian factorization failed: {e}"),
            Self::Eigen(e) => write!(f, "eigendecomposition failed: {e}"),
            Self::MaxIterations { iterations, grad_norm } => {
                write!(f, "newton did not converge in {iterations} iterations (|grad| = {grad_norm:e})")
            }
            Self::LineSearchFailure { iteration } => {
                write!(f, "line search failed at iteration {iteration}")
            }
        }
    }
}

impl std::error::Error for ObjectiveError {}

// ---------------------------------------------------------------------------
// LocalObjective
// ---------------------------------------------------------------------------

/// A twice-differentiable, strongly convex and smooth per-agent objective.
///
/// Implementations are immutable after construction; gradient and Hessian
/// calls on distinct agents may run concurrently.
pub trait LocalObjective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    /// Value and gradient in one pass over the data.
    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.value(x), self.gradient(x))
    }

    /// Dense Hessian, for diagnostics and the centralized reference solver.
    fn hessian(&self, x: &[f64]) -> Mat;

    /// Solve `∇²f(x) · z = rhs` through a fresh SPD factorization.
    fn hessian_solve(&self, x: &[f64], rhs: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        assert_eq!(x.len(), self.dim(), "hessian_solve point dimension");
        assert_eq!(rhs.len(), self.dim(), "hessian_solve rhs dimension");
        let chol = cholesky(&self.hessian(x)).map_err(ObjectiveError::Factorization)?;
        Ok(chol.solve(rhs))
    }

    /// `(μ, L)` with `μI ⪯ ∇²f(x) ⪯ LI` for all `x`.
    fn constants(&self) -> (f64, f64);
}

// ---------------------------------------------------------------------------
// Logistic loss
// ---------------------------------------------------------------------------

/// Regularized binary logistic regression on one agent's data shard.
#[derive(Debug, Clone)]
pub struct LogisticLocal {
    features: Mat,
    labels: Vec<f64>,
    lambda: f64,
    lipschitz: f64,
}

/// `log(1 + exp(z))` without overflow on either tail.
fn log1pexp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Standard sigmoid, evaluated on the non-overflowing branch.
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl LogisticLocal {
    pub fn new(features: Mat, labels: Vec<f64>, lambda: f64) -> Result<Self, ObjectiveError> {
        if features.rows() == 0 || features.cols() == 0 {
            return Err(ObjectiveError::InvalidInput("empty feature matrix".into()));
        }
        if labels.len() != features.rows() {
            return Err(ObjectiveError::InvalidInput(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        if !(lambda > 0.0) {
            return Err(ObjectiveError::InvalidInput(format!("lambda must be positive, got {lambda}")));
        }
        if !features.all_finite() {
            return Err(ObjectiveError::InvalidInput("non-finite feature entry".into()));
        }
        if labels.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(ObjectiveError::InvalidInput("labels must be ±1".into()));
        }
        let gram = features.transpose().matmul(&features);
        let eig = sym_eigen(&gram).map_err(ObjectiveError::Eigen)?;
        let lmax = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        let lipschitz = lambda + lmax / (4.0 * features.rows() as f64);
        Ok(Self { features, labels, lambda, lipschitz })
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl LocalObjective for LogisticLocal {
    fn dim(&self) -> usize {
        self.features.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim(), "value dimension");
        let m = self.samples() as f64;
        let mut loss = 0.0;
        for (j, &v) in self.labels.iter().enumerate() {
            let z = dot(self.features.row(j), x);
            loss += log1pexp(-v * z);
        }
        loss / m + 0.5 * self.lambda * dot(x, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(x.len(), self.dim(), "gradient dimension");
        let m = self.samples() as f64;
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.dim()];
        for (j, &v) in self.labels.iter().enumerate() {
            let row = self.features.row(j);
            let z = dot(row, x);
            loss += log1pexp(-v * z);
            let coeff = -v * sigmoid(-v * z);
            for (g, &u) in grad.iter_mut().zip(row) {
                *g += coeff * u;
            }
        }
        loss = loss / m + 0.5 * self.lambda * dot(x, x);
        for (g, &xi) in grad.iter_mut().zip(x) {
            *g = *g / m + self.lambda * xi;
        }
        (loss, grad)
    }

    fn hessian(&self, x: &[f64]) -> Mat {
        assert_eq!(x.len(), self.dim(), "hessian dimension");
        let p = self.dim();
        let m = self.samples() as f64;
        let mut h = Mat::zeros(p, p);
        for j in 0..self.samples() {
            let row = self.features.row(j);
            let s = sigmoid(dot(row, x));
            let weight = s * (1.0 - s) / m;
            for a in 0..p {
                let wa = weight * row[a];
                for b in a..p {
                    h[(a, b)] += wa * row[b];
                }
            }
        }
        for a in 0..p {
            h[(a, a)] += self.lambda;
            for b in (a + 1)..p {
                h[(b, a)] = h[(a, b)];
            }
        }
        h
    }

    fn constants(&self) -> (f64, f64) {
        (self.lambda, self.lipschitz)
    }
}

// ---------------------------------------------------------------------------
// Quadratic test objective
// ---------------------------------------------------------------------------

/// `½xᵀAx − bᵀx` with SPD `A`; closed-form optimum `A⁻¹b`.
#[derive(Debug, Clone)]
pub struct QuadraticLocal {
    a: Mat,
    b: Vec<f64>,
    factor: Cholesky,
    mu: f64,
    lipschitz: f64,
}

impl QuadraticLocal {
    pub fn new(a: Mat, b: Vec<f64>) -> Result<Self, ObjectiveError> {
        if a.rows() != a.cols() || a.rows() != b.len() {
            return Err(ObjectiveError::InvalidInput("quadratic shape mismatch".into()));
        }
        for i in 0..a.rows() {
            for j in (i + 1)..a.cols() {
                if (a[(i, j)] - a[(j, i)]).abs() > 1e-12 * a.max_abs().max(1.0) {
                    return Err(ObjectiveError::InvalidInput("matrix must be symmetric".into()));
                }
            }
        }
        let eig = sym_eigen(&a).map_err(ObjectiveError::Eigen)?;
        let mu = eig.values[0];
        let lipschitz = *eig.values.last().unwrap();
        if mu <= 0.0 {
            return Err(ObjectiveError::InvalidInput(format!("matrix not positive definite (λ_min = {mu:e})")));
        }
        let factor = cholesky(&a).map_err(ObjectiveError::Factorization)?;
        Ok(Self { a, b, factor, mu, lipschitz })
    }

    /// The unconstrained minimizer `A⁻¹ b`.
    pub fn optimum(&self) -> Vec<f64> {
        self.factor.solve(&self.b)
    }
}

impl LocalObjective for QuadraticLocal {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim());
        0.5 * dot(x, &self.a.mat_vec(x)) - dot(&self.b, x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.dim());
        let mut g = self.a.mat_vec(x);
        for (gi, &bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        g
    }

    fn hessian(&self, _x: &[f64]) -> Mat {
        self.a.clone()
    }

    fn hessian_solve(&self, _x: &[f64], rhs: &[f64]) -> Result<Vec<f64>, ObjectiveError> {
        assert_eq!(rhs.len(), self.dim());
        Ok(self.factor.solve(rhs))
    }

    fn constants(&self) -> (f64, f64) {
        (self.mu, self.lipschitz)
    }
}

// ---------------------------------------------------------------------------
// Aggregate objective
// ---------------------------------------------------------------------------

/// Global constants: worst case over agents, `Q = L/μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub q: f64,
}

/// `f(x) = (1/n) Σ f_i(x)` over all agents.
pub struct GlobalObjective {
    locals: Vec<Box<dyn LocalObjective>>,
    dim: usize,
}

impl GlobalObjective {
    pub fn new(locals: Vec<Box<dyn LocalObjective>>) -> Result<Self, ObjectiveError> {
        let Some(first) = locals.first() else {
            return Err(ObjectiveError::InvalidInput("need at least one agent".into()));
        };
        let dim = first.dim();
        if locals.iter().any(|l| l.dim() != dim) {
            return Err(ObjectiveError::InvalidInput("agents disagree on dimension".into()));
        }
        Ok(Self { locals, dim })
    }

    pub fn n_agents(&self) -> usize {
        self.locals.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn local(&self, i: usize) -> &dyn LocalObjective {
        self.locals[i].as_ref()
    }

    /// `μ = min_i μ_i`, `L = max_i L_i`, `Q = L/μ`.
    pub fn constants(&self) -> SmoothnessConstants {
        let mut mu = f64::INFINITY;
        let mut lipschitz = 0.0f64;
        for l in &self.locals {
            let (m, lips) = l.constants();
            mu = mu.min(m);
            lipschitz = lipschitz.max(lips);
        }
        SmoothnessConstants { mu, lipschitz, q: lipschitz / mu }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let inv = 1.0 / self.n_agents() as f64;
        self.locals.iter().map(|l| l.value(x)).sum::<f64>() * inv
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.value_and_gradient(x).1
    }

    pub fn value_and_gradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let inv = 1.0 / self.n_agents() as f64;
        let mut total = 0.0;
        let mut grad = vec![0.0; self.dim];
        for l in &self.locals {
            let (v, g) = l.value_and_gradient(x);
            total += v;
            for (acc, gi) in grad.iter_mut().zip(g) {
                *acc += gi;
            }
        }
        for g in &mut grad {
            *g *= inv;
        }
        (total * inv, grad)
    }

    pub fn hessian(&self, x: &[f64]) -> Mat {
        let mut h = Mat::zeros(self.dim, self.dim);
        for l in &self.locals {
            h.add_scaled(&l.hessian(x), 1.0);
        }
        h.scale(1.0 / self.n_agents() as f64)
    }

    /// Stacked per-agent gradients: row `i` is `∇f_i(x_i)` for row `x_i` of
    /// the input.
    pub fn stack_gradient(&self, x: &Mat) -> Mat {
        assert_eq!(x.rows(), self.n_agents(), "one row per agent");
        assert_eq!(x.cols(), self.dim, "stacked point dimension");
        let mut out = Mat::zeros(x.rows(), x.cols());
        for (i, l) in self.locals.iter().enumerate() {
            out.set_row(i, &l.gradient(x.row(i)));
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Centralized Newton reference
// ---------------------------------------------------------------------------

/// Knobs for the centralized Newton–Raphson reference solver.
#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    /// Stop when `‖∇f(x)‖ ≤ tol`.
    pub tol: f64,
    /// Armijo sufficient-decrease constant, in `(0, 0.5)`.
    pub c1: f64,
    /// Backtracking shrink factor, in `(0, 1)`.
    pub shrink: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-12, c1: 1e-4, shrink: 0.5, max_iterations: 200 }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    /// `‖∇f‖` before each step plus the final accepted value.
    pub grad_norms: Vec<f64>,
}

/// Full Newton with Armijo backtracking from unit step on the aggregate
/// objective. Used to pin down the reference optimum `x*` that the error
/// vector of the distributed runs is measured against.
pub fn centralized_newton(
    obj: &GlobalObjective,
    x0: &[f64],
    opts: &NewtonOptions,
) -> Result<NewtonSolution, ObjectiveError> {
    if !(opts.tol > 0.0) {
        return Err(ObjectiveError::InvalidInput("tol must be positive".into()));
    }
    if !(opts.c1 > 0.0 && opts.c1 < 0.5) {
        return Err(ObjectiveError::InvalidInput("need 0 < c1 < 0.5".into()));
    }
    if !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(ObjectiveError::InvalidInput("need 0 < shrink < 1".into()));
    }
    assert_eq!(x0.len(), obj.dim(), "x0 dimension");

    let mut x = x0.to_vec();
    let mut grad_norms = Vec::new();
    for iteration in 0..=opts.max_iterations {
        let (fx, g) = obj.value_and_gradient(&x);
        let gn = norm2(&g);
        grad_norms.push(gn);
        if gn <= opts.tol {
            return Ok(NewtonSolution { x, f: fx, iterations: iteration, grad_norms });
        }
        if iteration == opts.max_iterations {
            break;
        }
        let chol = cholesky(&obj.hessian(&x)).map_err(ObjectiveError::Factorization)?;
        let dir = chol.solve(&g);
        let slope = dot(&g, &dir); // positive: dir is an ascent direction of f, we step −dir
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(&xi, &di)| xi - t * di).collect();
            if obj.value(&trial) <= fx - opts.c1 * t * slope {
                x = trial;
                break;
            }
            t *= opts.shrink;
            if t < 1e-20 {
                return Err(ObjectiveError::LineSearchFailure { iteration });
            }
        }
    }
    Err(ObjectiveError::MaxIterations {
        iterations: opts.max_iterations,
        grad_norm: *grad_norms.last().unwrap(),
    })
}
