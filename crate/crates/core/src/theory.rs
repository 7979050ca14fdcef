//! Contraction analysis: the 4×4 error-dynamics matrix, spectral radii,
//! ε-certificates for admissible `(α, β)`, and verification of observed runs
//! against the certified rate.
//!
//! The round-`t` error vector is
//!
//! ```text
//! e(t) = ( ‖X − 1x̄ᵀ‖_F,  ‖Y − 1ȳᵀ‖_F,  √n·‖x̄ − x*‖,  ‖X(t) − X(t−1)‖_F )
//! ```
//!
//! For `α ≤ μ/L` the recursion satisfies `e(t+1) ≤ M(α,β) e(t)` elementwise
//! with the nonnegative matrix
//!
//! ```text
//!            ⎛ σ+αQ       α/μ    αQ      β  ⎞
//! M(α,β) =   ⎜ L(η+αQ)    σ+αQ   LαQ     Lβ ⎟
//!            ⎜ αQ         α/μ    1−α/Q   β  ⎟
//!            ⎝ η+αQ       α/μ    αQ      β  ⎠
//! ```
//!
//! where `σ = ‖W − (1/n)11ᵀ‖₂`, `η = ‖W − I‖₂` and `Q = L/μ`. When
//! `ρ(M) < 1` the errors vanish at the linear rate `O(ρ(M)^t)`.
//!
//! Feasible `(α, β)` come from a certificate `ε = (ε₁..ε₄) > 0` with
//!
//! ```text
//! 0 < ε₁ < min{ σ̄ε₂/(Lη),  ε₃/Q² − ε₂/(μQ),  ε₄/η }        σ̄ = 1 − σ
//! ```
//!
//! which induces upper bounds on `α` and, per `α`, on `β` such that
//! `M(α,β)ε < ε` holds row by row — hence `ρ(M) < 1`. The certificate
//! construction normalizes `ε₂ = 1` and leaves ≥ 5% slack in every
//! inequality. A Perron-vector variant tightens the region against a target
//! rate `1 − α/(cQ)` using the decomposition `M = M₀ + αM₁ + βM₂`.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::algorithm::{NetworkState, RunTrace};
use crate::graph::ConsensusMatrix;
use crate::linalg::{norm2, vec_sub, Mat};
use crate::objective::GlobalObjective;
use crate::util::fmt17;

#[derive(Debug, Clone, PartialEq)]
pub enum TheoryError {
    InvalidConstants(String),
    /// Certificate construction cannot satisfy the strict inequalities.
    Infeasible(String),
    /// The admissible region collapsed; regenerate the certificate.
    EmptyRegion(String),
    /// Perron vector extraction failed outright.
    PerronFailure(String),
    /// Not enough usable rounds for the requested check or fit.
    InsufficientTrace { needed: usize, got: usize },
    Io(String),
}

impl fmt::Display for TheoryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidConstants(m) => write!(f, "invalid constants: {m}"),
            Self::Infeasible(m) => write!(f, "infeasible certificate: {m}"),
            Self::EmptyRegion(m) => write!(f, "empty admissible region: {m}"),
            Self::PerronFailure(m) => write!(f, "perron vector failure: {m}"),
            Self::InsufficientTrace { needed, got } => {
                write!(f, "insufficient trace: need {needed} usable rounds, got {got}")
            }
            Self::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for TheoryError {}

// ---------------------------------------------------------------------------
// Error vector
// ---------------------------------------------------------------------------

/// The four error components tracked per round. `optimality` is NaN when the
/// reference optimum is unknown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorVector {
    pub consensus: f64,
    pub tracking: f64,
    pub optimality: f64,
    pub momentum: f64,
}

impl ErrorVector {
    pub fn as_array(&self) -> [f64; 4] {
        [self.consensus, self.tracking, self.optimality, self.momentum]
    }

    /// Euclidean norm over the finite components.
    pub fn norm(&self) -> f64 {
        self.as_array()
            .iter()
            .filter(|v| v.is_finite())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }
}

/// Measure the error vector of a state against the reference optimum.
pub fn error_vector(state: &NetworkState, x_star: Option<&[f64]>) -> ErrorVector {
    let n = state.n();
    let x_mean = state.x().col_means();
    let consensus = state.x().sub(&Mat::broadcast_row(&x_mean, n)).frobenius_norm();
    let y_mean = state.y().col_means();
    let tracking = state.y().sub(&Mat::broadcast_row(&y_mean, n)).frobenius_norm();
    let optimality = match x_star {
        Some(star) => (n as f64).sqrt() * norm2(&vec_sub(&x_mean, star)),
        None => f64::NAN,
    };
    let momentum = state.v().frobenius_norm();
    ErrorVector { consensus, tracking, optimality, momentum }
}

// ---------------------------------------------------------------------------
// Problem constants
// ---------------------------------------------------------------------------

/// The scalars the contraction analysis runs on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub mu: f64,
    pub lipschitz: f64,
    pub q: f64,
    pub sigma: f64,
    pub eta: f64,
    /// `σ̄ = 1 − σ`.
    pub sigma_bar: f64,
    pub n: usize,
}

impl ProblemConstants {
    pub fn new(mu: f64, lipschitz: f64, sigma: f64, eta: f64, n: usize) -> Result<Self, TheoryError> {
        if !(mu > 0.0) || !(lipschitz >= mu) {
            return Err(TheoryError::InvalidConstants(format!(
                "need 0 < mu ≤ L, got mu = {mu}, L = {lipschitz}"
            )));
        }
        if !(0.0..1.0).contains(&sigma) {
            return Err(TheoryError::InvalidConstants(format!("need 0 ≤ sigma < 1, got {sigma}")));
        }
        if !(eta >= 0.0) {
            return Err(TheoryError::InvalidConstants(format!("need eta ≥ 0, got {eta}")));
        }
        Ok(Self { mu, lipschitz, q: lipschitz / mu, sigma, eta, sigma_bar: 1.0 - sigma, n })
    }

    /// Read the constants off a concrete problem instance.
    pub fn measure(obj: &GlobalObjective, w: &ConsensusMatrix) -> Result<Self, TheoryError> {
        let c = obj.constants();
        Self::new(c.mu, c.lipschitz, w.sigma, w.eta, obj.n_agents())
    }
}

// ---------------------------------------------------------------------------
// Contraction matrix
// ---------------------------------------------------------------------------

pub type Mat4 = [[f64; 4]; 4];

/// `M(α,β)` with its spectral radius and the regime flag for the elementwise
/// recursion (`α ≤ μ/L`; outside that regime the matrix is still defined but
/// the per-round bound is not guaranteed).
#[derive(Debug, Clone, Copy)]
pub struct ContractionMatrix {
    pub m: Mat4,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub bound_regime: bool,
}

/// Populate `M(α,β)` entry by entry.
pub fn contraction_matrix(c: &ProblemConstants, alpha: f64, beta: f64) -> ContractionMatrix {
    assert!(alpha >= 0.0 && beta >= 0.0, "need alpha ≥ 0, beta ≥ 0");
    let (q, mu, l, sigma, eta) = (c.q, c.mu, c.lipschitz, c.sigma, c.eta);
    let aq = alpha * q;
    let m: Mat4 = [
        [sigma + aq, alpha / mu, aq, beta],
        [l * (eta + aq), sigma + aq, l * aq, l * beta],
        [aq, alpha / mu, 1.0 - alpha / q, beta],
        [eta + aq, alpha / mu, aq, beta],
    ];
    // The (3,3) entry drops below zero once α > Q; Perron iteration no longer
    // applies there, but the characteristic roots still do.
    let nonnegative = m.iter().flatten().all(|&e| e >= 0.0);
    let rho = if nonnegative { spectral_radius(&m) } else { spectral_radius_direct(&m) };
    ContractionMatrix { m, alpha, beta, rho, bound_regime: alpha <= c.mu / c.lipschitz }
}

/// `M₀ = M(0,0)`.
pub fn m_zero(c: &ProblemConstants) -> Mat4 {
    [
        [c.sigma, 0.0, 0.0, 0.0],
        [c.lipschitz * c.eta, c.sigma, 0.0, 0.0],
        [0.0, 0.0, 1.0, 0.0],
        [c.eta, 0.0, 0.0, 0.0],
    ]
}

/// `M₁ = ∂M/∂α`, constant in `(α, β)`.
pub fn m_alpha(c: &ProblemConstants) -> Mat4 {
    let (q, mu, l) = (c.q, c.mu, c.lipschitz);
    [
        [q, 1.0 / mu, q, 0.0],
        [l * q, q, l * q, 0.0],
        [q, 1.0 / mu, -1.0 / q, 0.0],
        [q, 1.0 / mu, q, 0.0],
    ]
}

/// `M₂ = ∂M/∂β`: fourth column `(1, L, 1, 1)ᵀ`, zero elsewhere.
pub fn m_beta(c: &ProblemConstants) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    m[0][3] = 1.0;
    m[1][3] = c.lipschitz;
    m[2][3] = 1.0;
    m[3][3] = 1.0;
    m
}

fn mat4_vec(m: &Mat4, v: &[f64; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    for i in 0..4 {
        for j in 0..4 {
            out[i] += m[i][j] * v[j];
        }
    }
    out
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            for j in 0..4 {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn trace4(m: &Mat4) -> f64 {
    m[0][0] + m[1][1] + m[2][2] + m[3][3]
}

// ---------------------------------------------------------------------------
// Spectral radius: power iteration with a direct quartic fallback
// ---------------------------------------------------------------------------

/// Perron root of a nonnegative 4×4 matrix.
///
/// Power iteration with a relative tolerance of 1e-12 capped at 1e5
/// iterations; matrices that defeat it (cyclic structure, near-degenerate
/// spectra) fall back to solving the characteristic quartic directly. The
/// debug build cross-checks the result as a root of the characteristic
/// polynomial.
pub fn spectral_radius(m: &Mat4) -> f64 {
    for row in m {
        for &e in row {
            assert!(e.is_finite() && e >= 0.0, "entries must be finite and nonnegative");
        }
    }
    let scale = m.iter().flatten().fold(0.0f64, |s, &e| s.max(e));
    if scale == 0.0 {
        return 0.0;
    }
    if let Some((lambda, _)) = power_iteration_4(m, 100_000, 1e-12) {
        debug_assert!(
            char_poly_residual(m, lambda) <= 1e-7,
            "power iteration result {lambda} is not a root of the characteristic polynomial"
        );
        return lambda;
    }
    spectral_radius_direct(m)
}

/// Power iteration from a fixed symmetry-breaking start. Returns the
/// dominant-eigenvalue estimate and the normalized iterate when both have
/// stabilized to the relative tolerance.
fn power_iteration_4(m: &Mat4, cap: usize, tol: f64) -> Option<(f64, [f64; 4])> {
    let mut v = [0.25, 0.5, 0.75, 1.0];
    let mut lambda_prev = f64::NAN;
    for _ in 0..cap {
        let w = mat4_vec(m, &v);
        let lambda = w.iter().fold(0.0f64, |s, &e| s.max(e.abs()));
        if lambda == 0.0 {
            return Some((0.0, v));
        }
        let next = [w[0] / lambda, w[1] / lambda, w[2] / lambda, w[3] / lambda];
        let drift = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        if (lambda - lambda_prev).abs() <= tol * lambda && drift <= tol {
            return Some((lambda, next));
        }
        lambda_prev = lambda;
        v = next;
    }
    None
}

/// Coefficients `[c3, c2, c1, c0]` of `det(zI − M) = z⁴ + c3·z³ + c2·z² +
/// c1·z + c0`, by the Faddeev–LeVerrier recurrence.
fn char_poly_4(m: &Mat4) -> [f64; 4] {
    let ident = |c: f64| -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for (i, row) in out.iter_mut().enumerate() {
            row[i] = c;
        }
        out
    };
    let add = |a: &Mat4, b: &Mat4| -> Mat4 {
        let mut out = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] = a[i][j] + b[i][j];
            }
        }
        out
    };
    let m1 = *m;
    let c1 = -trace4(&m1);
    let m2 = mat4_mul(m, &add(&m1, &ident(c1)));
    let c2 = -trace4(&m2) / 2.0;
    let m3 = mat4_mul(m, &add(&m2, &ident(c2)));
    let c3 = -trace4(&m3) / 3.0;
    let m4 = mat4_mul(m, &add(&m3, &ident(c3)));
    let c4 = -trace4(&m4) / 4.0;
    [c1, c2, c3, c4]
}

/// `|p(λ)|` scaled to the polynomial's magnitude; small iff λ is a root.
fn char_poly_residual(m: &Mat4, lambda: f64) -> f64 {
    let scale = m.iter().flatten().fold(1.0f64, |s, &e| s.max(e.abs()));
    let c = char_poly_4(&scale_mat4(m, 1.0 / scale));
    let z = lambda / scale;
    let horner = (((z + c[0]) * z + c[1]) * z + c[2]) * z + c[3];
    horner.abs() / (1.0 + z.abs()).powi(4)
}

fn scale_mat4(m: &Mat4, s: f64) -> Mat4 {
    let mut out = *m;
    for row in &mut out {
        for e in row.iter_mut() {
            *e *= s;
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
struct Complex {
    re: f64,
    im: f64,
}

impl Complex {
    fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }
    fn abs(self) -> f64 {
        self.re.hypot(self.im)
    }
    fn add(self, o: Self) -> Self {
        Self::new(self.re + o.re, self.im + o.im)
    }
    fn sub(self, o: Self) -> Self {
        Self::new(self.re - o.re, self.im - o.im)
    }
    fn mul(self, o: Self) -> Self {
        Self::new(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)
    }
    fn div(self, o: Self) -> Self {
        let d = o.re * o.re + o.im * o.im;
        Self::new((self.re * o.re + self.im * o.im) / d, (self.im * o.re - self.re * o.im) / d)
    }
}

/// Evaluate the monic quartic with coefficients `[c3, c2, c1, c0]`.
fn quartic_eval(c: &[f64; 4], z: Complex) -> Complex {
    let mut acc = z.add(Complex::new(c[0], 0.0));
    acc = acc.mul(z).add(Complex::new(c[1], 0.0));
    acc = acc.mul(z).add(Complex::new(c[2], 0.0));
    acc.mul(z).add(Complex::new(c[3], 0.0))
}

fn quartic_eval_deriv(c: &[f64; 4], z: Complex) -> Complex {
    // p'(z) = 4z³ + 3c3 z² + 2c2 z + c1
    let mut acc = z.mul(Complex::new(4.0, 0.0)).add(Complex::new(3.0 * c[0], 0.0));
    acc = acc.mul(z).add(Complex::new(2.0 * c[1], 0.0));
    acc.mul(z).add(Complex::new(c[2], 0.0))
}

/// All four roots by Durand–Kerner simultaneous iteration, polished with a
/// few Newton steps.
fn quartic_roots(c: &[f64; 4]) -> [Complex; 4] {
    let seed = Complex::new(0.4, 0.9);
    let mut roots = [seed, seed.mul(seed), seed.mul(seed).mul(seed), seed.mul(seed).mul(seed).mul(seed)];
    for _ in 0..500 {
        let mut max_step = 0.0f64;
        for i in 0..4 {
            let mut den = Complex::new(1.0, 0.0);
            for j in 0..4 {
                if i != j {
                    den = den.mul(roots[i].sub(roots[j]));
                }
            }
            if den.abs() < 1e-300 {
                den = Complex::new(1e-300, 0.0);
            }
            let delta = quartic_eval(c, roots[i]).div(den);
            roots[i] = roots[i].sub(delta);
            max_step = max_step.max(delta.abs());
        }
        if max_step < 1e-15 {
            break;
        }
    }
    for r in &mut roots {
        for _ in 0..4 {
            let dp = quartic_eval_deriv(c, *r);
            if dp.abs() < 1e-14 {
                break;
            }
            *r = r.sub(quartic_eval(c, *r).div(dp));
        }
    }
    roots
}

/// Largest root modulus of the characteristic quartic (the fallback route).
fn spectral_radius_direct(m: &Mat4) -> f64 {
    let scale = m.iter().flatten().fold(0.0f64, |s, &e| s.max(e.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    let coeffs = char_poly_4(&scale_mat4(m, 1.0 / scale));
    let roots = quartic_roots(&coeffs);
    scale * roots.iter().fold(0.0f64, |s, r| s.max(r.abs()))
}

// ---------------------------------------------------------------------------
// ε-certificates and admissible regions
// ---------------------------------------------------------------------------

/// A strictly feasible `ε` for the certificate inequality, together with the
/// derived aggregates `ε̃ = Q(ε₁+ε₃) + ε₂/μ` and `ε̄ = LQ(ε₁+ε₃) + Qε₂`.
#[derive(Debug, Clone, Copy)]
pub struct EpsilonCertificate {
    pub eps: [f64; 4],
    pub eps_tilde: f64,
    pub eps_bar: f64,
}

impl EpsilonCertificate {
    pub fn from_eps(eps: [f64; 4], c: &ProblemConstants) -> Self {
        let eps_tilde = c.q * (eps[0] + eps[2]) + eps[1] / c.mu;
        let eps_bar = c.lipschitz * c.q * (eps[0] + eps[2]) + c.q * eps[1];
        Self { eps, eps_tilde, eps_bar }
    }

    /// The three upper bounds constraining `ε₁` (division by zero yields
    /// `+∞`, i.e. a vacuous bound).
    pub fn eps1_bounds(c: &ProblemConstants, eps: &[f64; 4]) -> [f64; 3] {
        [
            c.sigma_bar * eps[1] / (c.lipschitz * c.eta),
            eps[2] / (c.q * c.q) - eps[1] / (c.mu * c.q),
            eps[3] / c.eta,
        ]
    }

    /// Strict feasibility with at least `margin` relative slack per bound.
    pub fn is_feasible(&self, c: &ProblemConstants, margin: f64) -> bool {
        if self.eps.iter().any(|&e| !(e > 0.0) || !e.is_finite()) {
            return false;
        }
        Self::eps1_bounds(c, &self.eps)
            .iter()
            .all(|&b| b.is_nan() || self.eps[0] <= (1.0 - margin) * b)
    }

    /// Certificates are homogeneous of degree one; scaling leaves every
    /// induced bound unchanged.
    pub fn scaled(&self, factor: f64, c: &ProblemConstants) -> Self {
        let e = self.eps;
        Self::from_eps([e[0] * factor, e[1] * factor, e[2] * factor, e[3] * factor], c)
    }
}

/// Construct a strictly feasible certificate.
///
/// Normalization `ε₂ = 1`; `ε₃` gets 10% headroom over the term it must
/// dominate; a provisional `ε₁` sizes `ε₄ = 1.1·η·ε₁`, and the final `ε₁`
/// takes half of the tightest bound, leaving ≥ 5% slack everywhere. When
/// `η = 0` the bounds touching it are vacuous and `ε₄` is free.
pub fn find_epsilon(c: &ProblemConstants) -> Result<EpsilonCertificate, TheoryError> {
    if !(c.sigma < 1.0) {
        return Err(TheoryError::Infeasible(format!("sigma = {} not < 1", c.sigma)));
    }
    let e2 = 1.0;
    let e3 = 1.1 * c.q * e2 / c.mu; // = Q²·(ε₂/(μQ) + 0.1·ε₂/(μQ))
    let b1 = c.sigma_bar * e2 / (c.lipschitz * c.eta); // +∞ when η = 0
    let b2 = e3 / (c.q * c.q) - e2 / (c.mu * c.q);
    let e1_pre = 0.5 * b1.min(b2);
    if !(e1_pre > 0.0) {
        return Err(TheoryError::Infeasible(format!("no positive epsilon_1 (bounds {b1:e}, {b2:e})")));
    }
    let e4 = if c.eta > 0.0 { 1.1 * c.eta * e1_pre } else { e2 };
    let b3 = e4 / c.eta; // +∞ when η = 0
    let e1 = 0.5 * b1.min(b2).min(b3);
    let cert = EpsilonCertificate::from_eps([e1, e2, e3, e4], c);
    if !cert.is_feasible(c, 0.05) {
        return Err(TheoryError::Infeasible("constructed certificate rechecks infeasible".into()));
    }
    Ok(cert)
}

/// The admissible `(α, β)` region induced by a certificate.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibleRegion {
    pub alpha_max: f64,
    cert: EpsilonCertificate,
    consts: ProblemConstants,
}

impl AdmissibleRegion {
    /// The four individual α caps whose minimum is `alpha_max`.
    pub fn alpha_terms(&self) -> [f64; 4] {
        let c = &self.consts;
        let [e1, e2, _, e4] = self.cert.eps;
        let (et, eb) = (self.cert.eps_tilde, self.cert.eps_bar);
        [
            1.0 / c.q,
            c.sigma_bar * e1 / et,
            (c.sigma_bar * e2 - c.lipschitz * c.eta * e1) / eb,
            (e4 - c.eta * e1) / et,
        ]
    }

    /// The four β caps at a given α. The first row's bound is stated with
    /// `ε₂` in one place and derived with `ε₁` in another; both are computed
    /// and the smaller kept, so the region is safe under either reading.
    pub fn beta_terms(&self, alpha: f64) -> [f64; 4] {
        let c = &self.consts;
        let [e1, e2, e3, e4] = self.cert.eps;
        let (et, eb) = (self.cert.eps_tilde, self.cert.eps_bar);
        let row1_stated = (et / e4) * (c.sigma_bar * e2 / et - alpha);
        let row1_derived = (et / e4) * (c.sigma_bar * e1 / et - alpha);
        [
            row1_stated.min(row1_derived),
            (eb / (c.lipschitz * e4)) * ((c.sigma_bar * e2 - c.lipschitz * c.eta * e1) / eb - alpha),
            (alpha / e4) * (e3 / c.q - c.q * e1 - e2 / c.mu),
            (et / e4) * ((e4 - c.eta * e1) / et - alpha),
        ]
    }

    /// Largest admissible β at this α (zero at or beyond the α boundary).
    pub fn beta_max(&self, alpha: f64) -> f64 {
        self.beta_terms(alpha).into_iter().fold(f64::INFINITY, f64::min).max(0.0)
    }

    pub fn contains(&self, alpha: f64, beta: f64) -> bool {
        alpha > 0.0 && alpha < self.alpha_max && beta >= 0.0 && beta < self.beta_max(alpha)
    }

    pub fn certificate(&self) -> &EpsilonCertificate {
        &self.cert
    }
}

/// Admissible step-size/momentum bounds induced by a certificate.
pub fn stepsize_bounds(
    cert: &EpsilonCertificate,
    c: &ProblemConstants,
) -> Result<AdmissibleRegion, TheoryError> {
    let region = AdmissibleRegion { alpha_max: 0.0, cert: *cert, consts: *c };
    let alpha_max = region.alpha_terms().into_iter().fold(f64::INFINITY, f64::min);
    if !(alpha_max > 0.0) {
        return Err(TheoryError::EmptyRegion(format!(
            "alpha_max = {alpha_max:e}; certificate slack exhausted"
        )));
    }
    Ok(AdmissibleRegion { alpha_max, ..region })
}

// ---------------------------------------------------------------------------
// Perron-vector tightening
// ---------------------------------------------------------------------------

/// Region certifying the target rate `1 − α/(cQ)` with ε taken from the
/// Perron direction of `M₀`.
#[derive(Debug, Clone, Copy)]
pub struct PerronRegion {
    pub eps: [f64; 4],
    /// Target-rate constant `c` in `1 − α/(cQ)`.
    pub rate_c: f64,
    m0: Mat4,
    m1: Mat4,
    m2: Mat4,
    consts: ProblemConstants,
}

impl PerronRegion {
    pub fn target_rate(&self, alpha: f64) -> f64 {
        1.0 - alpha / (self.rate_c * self.consts.q)
    }

    /// Largest β with `M(α,β)ε ≤ (1 − α/(cQ))ε` elementwise; zero when the
    /// α part already breaks a row.
    pub fn beta_max(&self, alpha: f64) -> f64 {
        let m0e = mat4_vec(&self.m0, &self.eps);
        let m1e = mat4_vec(&self.m1, &self.eps);
        let m2e = mat4_vec(&self.m2, &self.eps);
        let rate = self.target_rate(alpha);
        let mut best = f64::INFINITY;
        for i in 0..4 {
            let headroom = rate * self.eps[i] - m0e[i] - alpha * m1e[i];
            best = best.min(headroom / m2e[i]);
        }
        best.max(0.0)
    }

    pub fn contains(&self, alpha: f64, beta: f64) -> bool {
        alpha > 0.0 && beta >= 0.0 && beta < self.beta_max(alpha)
    }
}

/// Build the Perron-tightened region for a target rate `1 − α/(cQ)`.
///
/// `M₀` is reducible with spectral radius exactly 1 (third diagonal entry),
/// so its Perron vector collapses onto the optimality coordinate and power
/// iteration returns a vector with zero entries. In that case the vector is
/// taken from `M₀ + δ·11ᵀ` with `δ = 1e-3·σ̄`, which is strictly positive and
/// inherits the dominant direction up to O(δ).
pub fn perron_bounds(c: &ProblemConstants, rate_c: f64) -> Result<PerronRegion, TheoryError> {
    if !(rate_c > 1.0) {
        return Err(TheoryError::InvalidConstants(format!("need rate constant > 1, got {rate_c}")));
    }
    let m0 = m_zero(c);
    let eps = match power_iteration_4(&m0, 100_000, 1e-12) {
        Some((_, v)) if positive_enough(&v) => v,
        _ => {
            let delta = 1e-3 * c.sigma_bar;
            let mut reg = m0;
            for row in &mut reg {
                for e in row.iter_mut() {
                    *e += delta;
                }
            }
            match power_iteration_4(&reg, 100_000, 1e-12) {
                Some((_, v)) if positive_enough(&v) => v,
                _ => {
                    return Err(TheoryError::PerronFailure(
                        "no strictly positive Perron direction even after regularization".into(),
                    ))
                }
            }
        }
    };
    Ok(PerronRegion { eps, rate_c, m0, m1: m_alpha(c), m2: m_beta(c), consts: *c })
}

fn positive_enough(v: &[f64; 4]) -> bool {
    let max = v.iter().fold(0.0f64, |s, &e| s.max(e));
    max > 0.0 && v.iter().all(|&e| e > 1e-6 * max)
}

// ---------------------------------------------------------------------------
// Rate fitting and trace verification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Rounds dropped from the front of the trace.
    pub burn_in: usize,
    /// The window ends at the first round whose error falls to this floor.
    pub floor: f64,
    pub min_points: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { burn_in: 20, floor: 1e-10, min_points: 30 }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RateFit {
    /// `exp(slope)` of the least-squares line on `log e(t)`.
    pub rho_hat: f64,
    pub r_squared: f64,
    /// Inclusive round window the fit used.
    pub window: (usize, usize),
}

/// Least-squares log-linear rate estimate over the post-burn-in window.
pub fn fit_log_linear_rate(errors: &[f64], opts: &FitOptions) -> Result<RateFit, TheoryError> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    let mut last = 0usize;
    for (t, &e) in errors.iter().enumerate().skip(opts.burn_in) {
        if !(e > opts.floor) || !e.is_finite() {
            break;
        }
        pts.push((t as f64, e.ln()));
        last = t;
    }
    if pts.len() < opts.min_points {
        return Err(TheoryError::InsufficientTrace { needed: opts.min_points, got: pts.len() });
    }
    let n = pts.len() as f64;
    let t_mean = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for &(t, y) in &pts {
        sxx += (t - t_mean) * (t - t_mean);
        sxy += (t - t_mean) * (y - y_mean);
        syy += (y - y_mean) * (y - y_mean);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
    Ok(RateFit { rho_hat: slope.exp(), r_squared, window: (opts.burn_in, last) })
}

#[derive(Debug, Clone, Copy)]
pub struct Violation {
    pub round: usize,
    pub component: usize,
    pub excess: f64,
}

#[derive(Debug, Clone)]
pub struct ContractionReport {
    pub rounds_checked: usize,
    pub first_violation: Option<Violation>,
    pub fit: Option<RateFit>,
    /// `ρ̂ ≤ ρ(M) + 0.02`, evaluated only for certified parameters inside
    /// the `α ≤ μ/L` regime.
    pub rate_ok: Option<bool>,
}

impl ContractionReport {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none() && self.rate_ok.unwrap_or(true)
    }
}

/// Absolute slack absorbing float rounding in the per-round comparison.
pub const CONTRACTION_SLACK: f64 = 1e-9;

/// Fitted-rate tolerance over the certified spectral radius.
pub const RATE_SLACK: f64 = 0.02;

/// Check `e(t+1) ≤ M·e(t)` componentwise on every consecutive round pair and
/// fit the observed rate. Requires the trace to carry optimality components
/// (a known `x*`).
pub fn verify_contraction(
    trace: &RunTrace,
    cm: &ContractionMatrix,
    certified: bool,
) -> Result<ContractionReport, TheoryError> {
    let usable = trace
        .records
        .iter()
        .take_while(|r| r.error.optimality.is_finite())
        .count();
    if usable < 2 {
        return Err(TheoryError::InsufficientTrace { needed: 2, got: usable });
    }
    let mut first_violation = None;
    for t in 0..usable - 1 {
        let e_now = trace.records[t].error.as_array();
        let e_next = trace.records[t + 1].error.as_array();
        let bound = mat4_vec(&cm.m, &e_now);
        for i in 0..4 {
            let excess = e_next[i] - (bound[i] + CONTRACTION_SLACK);
            if excess > 0.0 {
                first_violation.get_or_insert(Violation {
                    round: trace.records[t + 1].round,
                    component: i,
                    excess,
                });
            }
        }
        if first_violation.is_some() {
            break;
        }
    }
    let fit = fit_log_linear_rate(&trace.error_norms()[..usable], &FitOptions::default()).ok();
    let rate_ok = if certified && cm.bound_regime {
        fit.map(|f| f.rho_hat <= cm.rho + RATE_SLACK)
    } else {
        None
    };
    Ok(ContractionReport { rounds_checked: usable - 1, first_violation, fit, rate_ok })
}

// ---------------------------------------------------------------------------
// Region export
// ---------------------------------------------------------------------------

/// CSV grid `(alpha, beta, rho, certified)` for external plotting.
pub fn write_region_csv(
    c: &ProblemConstants,
    region: &AdmissibleRegion,
    alpha_hi: f64,
    beta_hi: f64,
    steps: usize,
    path: &Path,
) -> Result<(), TheoryError> {
    let file = fs::File::create(path).map_err(|e| TheoryError::Io(e.to_string()))?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "alpha,beta,rho,certified").map_err(|e| TheoryError::Io(e.to_string()))?;
    for ia in 0..steps {
        let alpha = alpha_hi * (ia as f64 + 1.0) / steps as f64;
        for ib in 0..=steps {
            let beta = beta_hi * ib as f64 / steps as f64;
            let cm = contraction_matrix(c, alpha, beta);
            let flag = u8::from(region.contains(alpha, beta));
            writeln!(out, "{},{},{},{}", fmt17(alpha), fmt17(beta), fmt17(cm.rho), flag)
                .map_err(|e| TheoryError::Io(e.to_string()))?;
        }
    }
    Ok(())
}
