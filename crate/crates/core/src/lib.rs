//! Simulator and certificate toolkit for Newton-type distributed optimization
//! with heavy-ball momentum over undirected consensus networks.
//!
//! A group of `n` agents minimizes `f(x) = (1/n) Σ f_i(x)` where agent `i`
//! holds the local objective `f_i` and exchanges state only with its 1-hop
//! neighbors through a doubly stochastic weight matrix `W`. Each synchronous
//! round runs
//!
//! ```text
//! X(t+1) = W·X(t) − α·D(t) + β·V(t)        D(t) rows: [∇²f_i(x_i)]⁻¹ y_i
//! G(t+1) = ∇F(X(t+1)) − ∇F(X(t))
//! Y(t+1) = W·Y(t) + G(t+1)                 gradient tracker
//! V(t+1) = X(t+1) − X(t)                   momentum memory
//! ```
//!
//! with step size `α` and momentum coefficient `β`. Setting `β = 0` recovers
//! the momentum-free Newton-type baseline; replacing the Hessian solve with
//! the identity recovers plain gradient tracking.
//!
//! The `theory` module builds the 4×4 nonnegative matrix `M(α,β)` that bounds
//! the round-to-round evolution of the error vector (consensus, tracking,
//! optimality, momentum). Its spectral radius certifies a global linear rate,
//! and the ε-certificate machinery produces admissible `(α, β)` regions that
//! guarantee `ρ(M) < 1`.
//!
//! Crate layout:
//! - [`graph`] — topology generation and Metropolis consensus weights
//! - [`objective`] — local objectives, analytic Hessians, centralized Newton
//! - [`algorithm`] — the synchronous round engine and run traces
//! - [`theory`] — contraction matrix, certificates, rate verification
//! - [`data`] — dataset synthesis, ingestion, PCA, partitioning
//! - [`cli`] — experiment harness and file outputs

pub mod algorithm;
pub mod cli;
pub mod data;
pub mod graph;
pub mod linalg;
pub mod objective;
pub mod theory;

pub(crate) mod util;
