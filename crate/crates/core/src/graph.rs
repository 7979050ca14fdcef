//! Undirected communication topologies and Metropolis consensus weights.
//!
//! Two generators cover the experiment families: d-regular graphs (dense
//! expanders) and Erdős–Rényi graphs. Both resample with a derived seed until
//! the draw is connected, so a returned [`Topology`] always satisfies the
//! connectivity invariant and the Metropolis weight matrix it induces has
//! mixing norm `σ < 1`.
//!
//! The consensus weights follow the Metropolis rule
//! `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, with the residual mass on
//! the diagonal. The result is symmetric, nonnegative and doubly stochastic.
//! Two spectral constants are attached to every weight matrix:
//! `σ = ‖W − (1/n)11ᵀ‖₂` (mixing rate) and `η = ‖W − I‖₂` (deviation from
//! no-mixing); both enter the contraction analysis in [`crate::theory`].

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{spectral_norm, LinalgError, Mat};
use crate::util::{derive_seed, fmt17};

/// Resampling budget for connectivity (and pairing dead ends).
pub const RETRY_BUDGET: usize = 100;

/// Row/column sum tolerance for accepting a matrix as doubly stochastic.
pub const STOCHASTIC_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum GraphError {
    /// Degree sequence impossible: `n·d` odd, `d = 0`, or `d ≥ n`.
    InvalidDegree { n: usize, d: usize },
    /// Parameter outside its domain (e.g. edge probability).
    InvalidParameter(String),
    /// No connected simple graph produced within the retry budget.
    GenerationFailure { attempts: usize },
    /// The operation requires a connected topology.
    NotConnected,
    /// Edge list violates the simple-graph invariants.
    InvalidEdge { i: usize, j: usize },
    /// Matrix fails the doubly stochastic precondition.
    NotDoublyStochastic { max_row_dev: f64, max_col_dev: f64 },
    /// Eigensolver failure while computing spectral constants.
    Eigen(LinalgError),
    /// Text import failed.
    Parse { line: usize, message: String },
    Io(String),
}

impl fmt::Display for GraphError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidDegree { n, d } => write!(f, "no {d}-regular simple graph on {n} nodes"),
            Self::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Self::GenerationFailure { attempts } => {
                write!(f, "no connected graph generated in {attempts} attempts")
            }
            Self::NotConnected => write!(f, "topology is not connected"),
            Self::InvalidEdge { i, j } => write!(f, "invalid edge ({i}, {j})"),
            Self::NotDoublyStochastic { max_row_dev, max_col_dev } => write!(
                f,
                "matrix is not doubly stochastic (row dev {max_row_dev:e}, col dev {max_col_dev:e})"
            ),
            Self::Eigen(e) => write!(f, "spectral computation failed: {e}"),
            Self::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Self::Io(msg) => write!(f, "io error: {msg}"),
        }
    }
}

impl std::error::Error for GraphError {}

impl From<LinalgError> for GraphError {
    fn from(e: LinalgError) -> Self {
        Self::Eigen(e)
    }
}

// ---------------------------------------------------------------------------
// Topology
// ---------------------------------------------------------------------------

/// Connected undirected simple graph on nodes `0..n`.
///
/// Edges are stored as sorted `(i, j)` pairs with `i < j`; a given pair
/// appears once. Construction rejects self-loops, duplicates, out-of-range
/// endpoints and disconnected graphs, so instances always satisfy the type's
/// invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: Vec<(usize, usize)>,
    degrees: Vec<usize>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    pub fn new(n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::InvalidParameter(format!("need n ≥ 2, got {n}")));
        }
        for e in &mut edges {
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        let mut seen = BTreeSet::new();
        let mut degrees = vec![0usize; n];
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &edges {
            if i == j || j >= n || !seen.insert((i, j)) {
                return Err(GraphError::InvalidEdge { i, j });
            }
            degrees[i] += 1;
            degrees[j] += 1;
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        let topo = Self { n, edges, degrees, neighbors };
        if !topo.is_connected() {
            return Err(GraphError::NotConnected);
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = std::collections::VecDeque::from([0usize]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.neighbors[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == self.n
    }

    /// Plain-text export: first line `n m`, then one `i j` line per edge.
    pub fn write_text(&self, path: &Path) -> Result<(), GraphError> {
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.n, self.edges.len()));
        for &(i, j) in &self.edges {
            out.push_str(&format!("{i} {j}\n"));
        }
        fs::write(path, out).map_err(|e| GraphError::Io(e.to_string()))
    }

    pub fn read_text(path: &Path) -> Result<Self, GraphError> {
        let text = fs::read_to_string(path).map_err(|e| GraphError::Io(e.to_string()))?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or(GraphError::Parse { line: 1, message: "empty file".into() })?;
        let mut parts = header.split_whitespace();
        let n: usize = parse_field(parts.next(), 1)?;
        let m: usize = parse_field(parts.next(), 1)?;
        let mut edges = Vec::with_capacity(m);
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let i: usize = parse_field(parts.next(), idx + 1)?;
            let j: usize = parse_field(parts.next(), idx + 1)?;
            edges.push((i, j));
        }
        if edges.len() != m {
            return Err(GraphError::Parse {
                line: text.lines().count(),
                message: format!("expected {m} edges, found {}", edges.len()),
            });
        }
        Self::new(n, edges)
    }
}

fn parse_field<T: std::str::FromStr>(tok: Option<&str>, line: usize) -> Result<T, GraphError> {
    tok.ok_or(GraphError::Parse { line, message: "missing field".into() })?
        .parse()
        .map_err(|_| GraphError::Parse { line, message: "bad numeric field".into() })
}

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Random d-regular connected graph, deterministic in `(n, d, seed)`.
///
/// Stub pairing with validity-aware matching: stubs are paired uniformly at
/// random, rejecting self-loops and duplicate edges pair-by-pair instead of
/// resampling the whole graph (wholesale rejection has vanishing acceptance
/// at the dense degrees used here). For `d > (n−1)/2` the complement graph is
/// generated and inverted. Dead ends and disconnected draws retry with a
/// seed derived from the attempt index.
pub fn gen_regular(n: usize, d: usize, seed: u64) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("need n ≥ 2, got {n}")));
    }
    if d == 0 || d >= n || (n * d) % 2 != 0 {
        return Err(GraphError::InvalidDegree { n, d });
    }
    // Dense degrees: pair the complement instead.
    let (d_eff, complement) = if d > (n - 1) / 2 { (n - 1 - d, true) } else { (d, false) };

    for attempt in 0..RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
        let sampled = if d_eff == 0 {
            Some(Vec::new()) // complement of the complete graph
        } else {
            sample_regular_edges(n, d_eff, &mut rng)
        };
        let Some(core_edges) = sampled else { continue };
        let edges = if complement { complement_edges(n, &core_edges) } else { core_edges };
        match Topology::new(n, edges) {
            Ok(t) => return Ok(t),
            Err(GraphError::NotConnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GraphError::GenerationFailure { attempts: RETRY_BUDGET })
}

/// One stub-pairing pass; `None` on a dead end (only invalid pairs remain).
fn sample_regular_edges(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Option<Vec<(usize, usize)>> {
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat(v).take(d)).collect();
    let mut present = BTreeSet::new();
    let mut edges = Vec::with_capacity(n * d / 2);

    while !stubs.is_empty() {
        let mut tries = 0;
        loop {
            let a = rng.random_range(0..stubs.len());
            let b = rng.random_range(0..stubs.len());
            let (u, v) = (stubs[a], stubs[b]);
            if a != b && u != v && !present.contains(&key(u, v)) {
                present.insert(key(u, v));
                edges.push(key(u, v));
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                break;
            }
            tries += 1;
            if tries > 64 {
                // Rejection is struggling; enumerate the remaining feasible
                // pairs exactly and either draw one or declare a dead end.
                match draw_feasible_pair(&stubs, &present, rng) {
                    Some((u, v)) => {
                        present.insert(key(u, v));
                        edges.push(key(u, v));
                        remove_one_stub(&mut stubs, u);
                        remove_one_stub(&mut stubs, v);
                        break;
                    }
                    None => return None,
                }
            }
        }
    }
    Some(edges)
}

fn key(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

fn remove_one_stub(stubs: &mut Vec<usize>, node: usize) {
    let idx = stubs.iter().position(|&s| s == node).expect("stub present");
    stubs.swap_remove(idx);
}

/// Enumerate feasible node pairs among remaining stubs and sample one with
/// probability proportional to the stub multiplicity product, matching the
/// distribution of the rejection path.
fn draw_feasible_pair(
    stubs: &[usize],
    present: &BTreeSet<(usize, usize)>,
    rng: &mut ChaCha8Rng,
) -> Option<(usize, usize)> {
    let mut mult = std::collections::BTreeMap::new();
    for &s in stubs {
        *mult.entry(s).or_insert(0usize) += 1;
    }
    let nodes: Vec<(usize, usize)> = mult.into_iter().collect();
    let mut candidates = Vec::new();
    let mut total = 0usize;
    for (i, &(u, cu)) in nodes.iter().enumerate() {
        for &(v, cv) in &nodes[i + 1..] {
            if !present.contains(&key(u, v)) {
                let w = cu * cv;
                total += w;
                candidates.push((u, v, total));
            }
        }
    }
    if candidates.is_empty() {
        return None;
    }
    let pick = rng.random_range(0..total);
    let &(u, v, _) = candidates
        .iter()
        .find(|&&(_, _, cum)| pick < cum)
        .expect("cumulative weights cover range");
    Some((u, v))
}

fn complement_edges(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let present: BTreeSet<(usize, usize)> = edges.iter().copied().collect();
    let mut out = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if !present.contains(&(i, j)) {
                out.push((i, j));
            }
        }
    }
    out
}

/// Erdős–Rényi `G(n, p)` conditioned on connectivity, deterministic in
/// `(n, p, seed)`. Fails after the retry budget when `p` is too small for
/// the graph to plausibly connect.
pub fn gen_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Topology, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameter(format!("need n ≥ 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(GraphError::InvalidParameter(format!("need 0 < p ≤ 1, got {p}")));
    }
    for attempt in 0..RETRY_BUDGET {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, attempt as u64));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random::<f64>() < p {
                    edges.push((i, j));
                }
            }
        }
        match Topology::new(n, edges) {
            Ok(t) => return Ok(t),
            Err(GraphError::NotConnected) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(GraphError::GenerationFailure { attempts: RETRY_BUDGET })
}

// ---------------------------------------------------------------------------
// Consensus weights
// ---------------------------------------------------------------------------

/// Doubly stochastic consensus weight matrix with its spectral constants.
#[derive(Debug, Clone)]
pub struct ConsensusMatrix {
    pub w: Mat,
    /// `‖W − (1/n)11ᵀ‖₂` — strictly below 1 on a connected topology.
    pub sigma: f64,
    /// `‖W − I‖₂`.
    pub eta: f64,
}

impl ConsensusMatrix {
    pub fn n(&self) -> usize {
        self.w.rows()
    }

    /// CSV export: n rows of n comma-separated values at 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<(), GraphError> {
        let file = fs::File::create(path).map_err(|e| GraphError::Io(e.to_string()))?;
        let mut out = std::io::BufWriter::new(file);
        for i in 0..self.w.rows() {
            let line: Vec<String> = self.w.row(i).iter().map(|&v| fmt17(v)).collect();
            writeln!(out, "{}", line.join(",")).map_err(|e| GraphError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

/// Metropolis weights for a connected topology.
///
/// Edge weight `1 / (1 + max(deg_i, deg_j))`, residual on the diagonal. The
/// diagonal stays strictly positive because each node's edge weights sum to
/// at most `deg_i / (1 + deg_i)`.
pub fn metropolis_weights(topo: &Topology) -> Result<ConsensusMatrix, GraphError> {
    if !topo.is_connected() {
        return Err(GraphError::NotConnected);
    }
    let n = topo.n();
    let mut w = Mat::zeros(n, n);
    for &(i, j) in topo.edges() {
        let wij = 1.0 / (1.0 + topo.degrees()[i].max(topo.degrees()[j]) as f64);
        w[(i, j)] = wij;
        w[(j, i)] = wij;
    }
    for i in 0..n {
        let off: f64 = topo.neighbors(i).iter().map(|&j| w[(i, j)]).sum();
        w[(i, i)] = 1.0 - off;
    }
    let (sigma, eta) = spectral_quantities(&w)?;
    Ok(ConsensusMatrix { w, sigma, eta })
}

/// Spectral constants of a doubly stochastic matrix: largest singular values
/// of `W − (1/n)11ᵀ` and `W − I`, via symmetric eigendecomposition of the
/// Gram matrices.
pub fn spectral_quantities(w: &Mat) -> Result<(f64, f64), GraphError> {
    let n = w.rows();
    assert_eq!(n, w.cols(), "weight matrix must be square");
    let (mut row_dev, mut col_dev) = (0.0f64, 0.0f64);
    for i in 0..n {
        let rs: f64 = w.row(i).iter().sum();
        row_dev = row_dev.max((rs - 1.0).abs());
        let cs: f64 = (0..n).map(|r| w[(r, i)]).sum();
        col_dev = col_dev.max((cs - 1.0).abs());
    }
    if row_dev > 1e-8 || col_dev > 1e-8 {
        return Err(GraphError::NotDoublyStochastic { max_row_dev: row_dev, max_col_dev: col_dev });
    }
    let inv_n = 1.0 / n as f64;
    let centered = Mat::from_fn(n, n, |i, j| w[(i, j)] - inv_n);
    let shifted = Mat::from_fn(n, n, |i, j| w[(i, j)] - if i == j { 1.0 } else { 0.0 });
    let sigma = spectral_norm(&centered)?;
    let eta = spectral_norm(&shifted)?;
    Ok((sigma, eta))
}
