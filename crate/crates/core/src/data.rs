//! Dataset synthesis, delimited-text ingestion, PCA reduction, and
//! homogeneous partitioning across agents.
//!
//! The synthetic generator is the desk-scale stand-in for a large tabular
//! classification corpus: Gaussian features, a hidden unit normal, labels
//! `sign(⟨u, w⟩ + noise/separation)`. Ingestion reads one sample per line
//! (comma or whitespace separated) with a configurable label column and maps
//! labels to `{−1, +1}` by matching a raw positive token, which also covers
//! binarizing multi-class sources.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{sym_eigen, LinalgError, Mat};
use crate::util::{derive_seed, fmt17, normal};

/// Noise-redraw budget before declaring the labels degenerate.
pub const LABEL_RETRY_BUDGET: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum DataError {
    InvalidInput(String),
    /// Could not produce both classes within the retry budget.
    DegenerateLabels { attempts: usize },
    Parse { line: usize, message: String },
    InconsistentWidth { line: usize, expected: usize, got: usize },
    /// Requested more PCA components than the numerical rank supports.
    RankDeficient { k: usize, rank: usize },
    Eigen(LinalgError),
    Io(String),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::InvalidInput(m) => write!(f, "invalid input: {m}"),
            Self::DegenerateLabels { attempts } => {
                write!(f, "labels degenerate after {attempts} noise redraws")
            }
            Self::Parse { line, message } => write!(f, "parse error at line {line}: {message}"),
            Self::InconsistentWidth { line, expected, got } => {
                write!(f, "line {line} has {got} columns, expected {expected}")
            }
            Self::RankDeficient { k, rank } => {
                write!(f, "requested {k} components but numerical rank is {rank}")
            }
            Self::Eigen(e) => write!(f, "eigendecomposition failed: {e}"),
            Self::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for DataError {}

impl From<LinalgError> for DataError {
    fn from(e: LinalgError) -> Self {
        Self::Eigen(e)
    }
}

// ---------------------------------------------------------------------------
// RawDataset
// ---------------------------------------------------------------------------

/// Feature matrix plus ±1 labels, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub features: Mat,
    pub labels: Vec<f64>,
}

impl RawDataset {
    pub fn new(features: Mat, labels: Vec<f64>) -> Result<Self, DataError> {
        if features.rows() == 0 {
            return Err(DataError::InvalidInput("need at least one sample".into()));
        }
        if labels.len() != features.rows() {
            return Err(DataError::InvalidInput(format!(
                "{} labels for {} samples",
                labels.len(),
                features.rows()
            )));
        }
        if !features.all_finite() {
            return Err(DataError::InvalidInput("non-finite feature entry".into()));
        }
        if labels.iter().any(|&v| v != 1.0 && v != -1.0) {
            return Err(DataError::InvalidInput("labels must be ±1".into()));
        }
        Ok(Self { features, labels })
    }

    pub fn samples(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    /// Write in the delimited format `load_delimited` reads back: features
    /// comma-separated at 17 significant digits, label in the last column.
    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let file = fs::File::create(path).map_err(|e| DataError::Io(e.to_string()))?;
        let mut out = std::io::BufWriter::new(file);
        for i in 0..self.samples() {
            let mut fields: Vec<String> = self.features.row(i).iter().map(|&v| fmt17(v)).collect();
            fields.push(if self.labels[i] > 0.0 { "1".into() } else { "-1".into() });
            writeln!(out, "{}", fields.join(",")).map_err(|e| DataError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Synthesis
// ---------------------------------------------------------------------------

/// Deterministic synthetic binary classification set.
///
/// Features and the hidden direction come from the base seed; label noise
/// comes from a derived stream so a redraw (when a draw leaves one class
/// empty) neverperturbs the features. Larger `separation` shrinks the noise
/// and approaches exactly linearly separable labels.
pub fn synthesize(m: usize, p: usize, seed: u64, separation: f64) -> Result<RawDataset, DataError> {
    if m < 2 || p < 1 {
        return Err(DataError::InvalidInput(format!("need m ≥ 2 and p ≥ 1, got m = {m}, p = {p}")));
    }
    if !(separation > 0.0) {
        return Err(DataError::InvalidInput(format!("separation must be positive, got {separation}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = Mat::from_fn(m, p, |_, _| normal(&mut rng));
    let mut w: Vec<f64> = (0..p).map(|_| normal(&mut rng)).collect();
    let w_norm = crate::linalg::norm2(&w).max(f64::MIN_POSITIVE);
    for wi in &mut w {
        *wi /= w_norm;
    }
    let margins: Vec<f64> = (0..m).map(|j| crate::linalg::dot(features.row(j), &w)).collect();

    for attempt in 0..LABEL_RETRY_BUDGET {
        let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1 + attempt as u64));
        let labels: Vec<f64> = margins
            .iter()
            .map(|&z| if z + normal(&mut noise_rng) / separation >= 0.0 { 1.0 } else { -1.0 })
            .collect();
        if labels.iter().any(|&v| v > 0.0) && labels.iter().any(|&v| v < 0.0) {
            return RawDataset::new(features, labels);
        }
    }
    Err(DataError::DegenerateLabels { attempts: LABEL_RETRY_BUDGET })
}

// ---------------------------------------------------------------------------
// Ingestion
// ---------------------------------------------------------------------------

/// Read a delimited text file, one sample per line. Fields split on commas
/// when present, otherwise on whitespace. The label column is matched
/// against `positive_label` as a raw token: equal → +1, anything else → −1.
pub fn load_delimited(
    path: &Path,
    label_column: usize,
    positive_label: &str,
) -> Result<RawDataset, DataError> {
    let text = fs::read_to_string(path).map_err(|e| DataError::Io(e.to_string()))?;
    let mut width: Option<usize> = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains(',') {
            trimmed.split(',').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        let expected = *width.get_or_insert(fields.len());
        if fields.len() != expected {
            return Err(DataError::InconsistentWidth { line: line_no, expected, got: fields.len() });
        }
        if label_column >= fields.len() {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("label column {label_column} out of range ({} fields)", fields.len()),
            });
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for (k, tok) in fields.iter().enumerate() {
            if k == label_column {
                labels.push(if *tok == positive_label { 1.0 } else { -1.0 });
            } else {
                let v: f64 = tok.parse().map_err(|_| DataError::Parse {
                    line: line_no,
                    message: format!("non-numeric token {tok:?}"),
                })?;
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(DataError::InvalidInput("file holds no samples".into()));
    }
    RawDataset::new(Mat::from_rows(&rows), labels)
}

// ---------------------------------------------------------------------------
// PCA
// ---------------------------------------------------------------------------

/// Fitted PCA basis: the feature mean, per-feature scale (unit unless
/// standardization was requested), orthonormal components (columns), and
/// nonincreasing explained variances.
#[derive(Debug, Clone)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub components: Mat,
    pub explained_variance: Vec<f64>,
}

impl PcaModel {
    /// Project new data into the fitted basis.
    pub fn transform(&self, features: &Mat) -> Mat {
        let mut centered = features.sub(&Mat::broadcast_row(&self.mean, features.rows()));
        for i in 0..centered.rows() {
            let row = centered.row_mut(i);
            for (v, &s) in row.iter_mut().zip(&self.scale) {
                *v /= s;
            }
        }
        centered.matmul(&self.components)
    }

    /// Map reduced coordinates back to the original space.
    pub fn reconstruct(&self, reduced: &Mat) -> Mat {
        let mut back = reduced.matmul(&self.components.transpose());
        for i in 0..back.rows() {
            let row = back.row_mut(i);
            for (v, &s) in row.iter_mut().zip(&self.scale) {
                *v *= s;
            }
        }
        back.add_scaled(&Mat::broadcast_row(&self.mean, reduced.rows()), 1.0);
        back
    }
}

/// Fit PCA on the sample covariance of mean-centered features and project
/// onto the top-`k` eigenvectors.
///
/// Sign convention for determinism: each component's largest-magnitude entry
/// is made positive. Errors only when `k` exceeds the numerical rank.
pub fn pca_fit_transform(ds: &RawDataset, k: usize) -> Result<(PcaModel, RawDataset), DataError> {
    pca_fit_transform_opts(ds, k, false)
}

/// PCA with optional feature standardization (correlation-matrix PCA):
/// centered columns are divided by their sample standard deviation before the
/// eigendecomposition.
pub fn pca_fit_transform_opts(
    ds: &RawDataset,
    k: usize,
    standardize: bool,
) -> Result<(PcaModel, RawDataset), DataError> {
    let (m, p) = (ds.samples(), ds.dim());
    if k == 0 || k > p.min(m) {
        return Err(DataError::InvalidInput(format!(
            "need 1 ≤ k ≤ min(m, p) = {}, got {k}",
            p.min(m)
        )));
    }
    if m < 2 {
        return Err(DataError::InvalidInput("PCA needs at least two samples".into()));
    }
    let mean = ds.features.col_means();
    let mut centered = ds.features.sub(&Mat::broadcast_row(&mean, m));
    let scale: Vec<f64> = if standardize {
        let mut scale = vec![0.0; p];
        for i in 0..m {
            for (s, &v) in scale.iter_mut().zip(centered.row(i)) {
                *s += v * v;
            }
        }
        for s in &mut scale {
            *s = (*s / (m as f64 - 1.0)).sqrt();
            if *s == 0.0 {
                return Err(DataError::InvalidInput(
                    "cannot standardize a constant feature column".into(),
                ));
            }
        }
        for i in 0..m {
            let row = centered.row_mut(i);
            for (v, &s) in row.iter_mut().zip(&scale) {
                *v /= s;
            }
        }
        scale
    } else {
        vec![1.0; p]
    };
    let cov = centered.transpose().matmul(&centered).scale(1.0 / (m as f64 - 1.0));
    let eig = sym_eigen(&cov)?;

    // Eigenvalues ascending; walk from the top.
    let top = eig.values.iter().rev().copied().collect::<Vec<f64>>();
    let lead = top[0].max(0.0);
    let rank = top.iter().take_while(|&&v| v > 1e-12 * lead.max(f64::MIN_POSITIVE)).count();
    if k > rank {
        return Err(DataError::RankDeficient { k, rank });
    }

    let mut components = Mat::zeros(p, k);
    for c in 0..k {
        let src = p - 1 - c; // column index in ascending order
        let mut col: Vec<f64> = (0..p).map(|r| eig.vectors[(r, src)]).collect();
        let pivot = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if col[pivot] < 0.0 {
            for v in &mut col {
                *v = -*v;
            }
        }
        for r in 0..p {
            components[(r, c)] = col[r];
        }
    }
    let explained_variance: Vec<f64> = top[..k].to_vec();
    let model = PcaModel { mean, scale, components, explained_variance };
    let reduced = RawDataset::new(model.transform(&ds.features), ds.labels.clone())?;
    Ok((model, reduced))
}

// ---------------------------------------------------------------------------
// Partitioning
// ---------------------------------------------------------------------------

/// Homogeneous assignment of samples to agents: shuffled, then dealt
/// round-robin, so per-agent counts differ by at most one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// `assignment[sample] = agent`.
    pub assignment: Vec<usize>,
    /// Per-agent sample counts.
    pub counts: Vec<usize>,
}

pub fn shuffle_partition(ds: &RawDataset, n: usize, seed: u64) -> Result<Partition, DataError> {
    let m = ds.samples();
    if n == 0 || m < n {
        return Err(DataError::InvalidInput(format!("need 1 ≤ n ≤ m, got n = {n}, m = {m}")));
    }
    let mut order: Vec<usize> = (0..m).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut assignment = vec![0usize; m];
    let mut counts = vec![0usize; n];
    for (pos, &sample) in order.iter().enumerate() {
        let agent = pos % n;
        assignment[sample] = agent;
        counts[agent] += 1;
    }
    Ok(Partition { assignment, counts })
}

/// Materialize per-agent shards in agent order; within a shard samples keep
/// their original file order.
pub fn split(ds: &RawDataset, part: &Partition) -> Vec<RawDataset> {
    let n = part.counts.len();
    let mut rows: Vec<Vec<Vec<f64>>> = vec![Vec::new(); n];
    let mut labels: Vec<Vec<f64>> = vec![Vec::new(); n];
    for s in 0..ds.samples() {
        let a = part.assignment[s];
        rows[a].push(ds.features.row(s).to_vec());
        labels[a].push(ds.labels[s]);
    }
    rows.into_iter()
        .zip(labels)
        .map(|(r, l)| RawDataset::new(Mat::from_rows(&r), l).expect("shard inherits validity"))
        .collect()
}

/// Class frequencies, mostly a diagnostic for synthetic draws.
pub fn class_balance(ds: &RawDataset) -> BTreeMap<i8, usize> {
    let mut counts = BTreeMap::new();
    for &v in &ds.labels {
        *counts.entry(if v > 0.0 { 1i8 } else { -1i8 }).or_insert(0) += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthesize_balance_on_the_desk_instance() {
        let ds = synthesize(4000, 10, 42, 2.0).unwrap();
        let counts = class_balance(&ds);
        let pos = counts[&1] as f64 / 4000.0;
        assert!((0.35..=0.65).contains(&pos), "positive share {pos}");
    }

    #[test]
    fn synthesize_separation_limit_is_stable() {
        let a = synthesize(200, 5, 7, 1e9).unwrap();
        let b = synthesize(200, 5, 7, 1e12).unwrap();
        assert_eq!(a.features, b.features, "features independent of separation");
        assert_eq!(a.labels, b.labels, "labels already at the separable limit");
    }

    #[test]
    fn synthesize_two_samples_covers_both_classes() {
        let ds = synthesize(2, 3, 11, 1.0).unwrap();
        assert_eq!(class_balance(&ds).len(), 2);
    }

    #[test]
    fn synthesize_is_deterministic() {
        let a = synthesize(100, 4, 3, 2.0).unwrap();
        let b = synthesize(100, 4, 3, 2.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_maps_labels_and_reports_bad_lines() {
        let dir = std::env::temp_dir().join("netnewton_data_io_test");
        std::fs::create_dir_all(&dir).unwrap();

        let path = dir.join("tiny.csv");
        std::fs::write(&path, "0.5,2.0,1\n1.5,-1.0,2\n-0.25,0.75,1\n").unwrap();
        let ds = load_delimited(&path, 2, "1").unwrap();
        assert_eq!(ds.labels, vec![1.0, -1.0, 1.0]);
        assert_eq!(ds.dim(), 2);

        let bad = dir.join("bad.csv");
        std::fs::write(&bad, "0.5,2.0,1\n1.5,oops,2\n").unwrap();
        match load_delimited(&bad, 2, "1") {
            Err(DataError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let ragged = dir.join("ragged.csv");
        std::fs::write(&ragged, "0.5,2.0,1\n1.5,2\n").unwrap();
        assert!(matches!(
            load_delimited(&ragged, 2, "1"),
            Err(DataError::InconsistentWidth { line: 2, .. })
        ));
    }

    #[test]
    fn load_wide_multiclass_file() {
        // 54 feature columns plus a trailing class column with 7 classes;
        // class 2 binarized against the rest.
        let dir = std::env::temp_dir().join("netnewton_data_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("multiclass_sample.csv");
        let mut text = String::new();
        for i in 0..20 {
            let mut fields: Vec<String> = (0..54).map(|j| format!("{}", (i * 54 + j) as f64 * 0.1)).collect();
            fields.push(format!("{}", i % 7 + 1));
            text.push_str(&fields.join(","));
            text.push('\n');
        }
        std::fs::write(&path, text).unwrap();
        let ds = load_delimited(&path, 54, "2").unwrap();
        assert_eq!(ds.samples(), 20);
        assert_eq!(ds.dim(), 54, "original feature count before any reduction");
        assert_eq!(ds.labels.iter().filter(|&&v| v > 0.0).count(), 3);
    }

    #[test]
    fn save_load_round_trip_is_exact() {
        let ds = synthesize(60, 4, 5, 2.0).unwrap();
        let dir = std::env::temp_dir().join("netnewton_data_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("round_trip.csv");
        ds.save(&path).unwrap();
        let back = load_delimited(&path, 4, "1").unwrap();
        assert_eq!(back.labels, ds.labels);
        for i in 0..ds.samples() {
            for (a, b) in ds.features.row(i).iter().zip(back.features.row(i)) {
                assert_eq!(a.to_bits(), b.to_bits(), "17 significant digits round-trip f64");
            }
        }
    }

    #[test]
    fn pca_preserves_an_embedded_subspace() {
        // 3-dimensional data embedded in 7 dimensions with a zero tail.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let base = Mat::from_fn(80, 3, |_, _| normal(&mut rng));
        let embedded = Mat::from_fn(80, 7, |i, j| if j < 3 { base[(i, j)] } else { 0.0 });
        let labels = vec![1.0; 79].into_iter().chain([-1.0]).collect();
        let ds = RawDataset::new(embedded, labels).unwrap();
        let (_, reduced) = pca_fit_transform(&ds, 3).unwrap();
        for a in 0..10 {
            for b in 0..10 {
                let orig = crate::linalg::norm2(&crate::linalg::vec_sub(
                    ds.features.row(a),
                    ds.features.row(b),
                ));
                let red = crate::linalg::norm2(&crate::linalg::vec_sub(
                    reduced.features.row(a),
                    reduced.features.row(b),
                ));
                assert!((orig - red).abs() < 1e-10, "isometry on the spanned subspace");
            }
        }
    }

    #[test]
    fn pca_variance_identity_and_ordering() {
        let ds = synthesize(300, 6, 13, 2.0).unwrap();
        let (model, reduced) = pca_fit_transform(&ds, 4).unwrap();
        for w in model.explained_variance.windows(2) {
            assert!(w[0] >= w[1] - 1e-12, "explained variance must not increase");
        }
        // Total variance of the reduced data equals the top-k eigenvalue sum
        // and cannot exceed the original total variance.
        let m = reduced.samples() as f64;
        let mean = reduced.features.col_means();
        let centered = reduced.features.sub(&Mat::broadcast_row(&mean, reduced.samples()));
        let total_reduced = centered.frobenius_norm().powi(2) / (m - 1.0);
        let top_k: f64 = model.explained_variance.iter().sum();
        assert!((total_reduced - top_k).abs() < 1e-9 * top_k.max(1.0));

        let mean0 = ds.features.col_means();
        let centered0 = ds.features.sub(&Mat::broadcast_row(&mean0, ds.samples()));
        let total_orig = centered0.frobenius_norm().powi(2) / (m - 1.0);
        assert!(top_k <= total_orig + 1e-9);
    }

    #[test]
    fn pca_full_rank_reconstruction_is_exact() {
        let ds = synthesize(200, 6, 17, 2.0).unwrap();
        let (model, reduced) = pca_fit_transform(&ds, 6).unwrap();
        let back = model.reconstruct(&reduced.features);
        assert!(back.sub(&ds.features).max_abs() < 1e-10);

        // Orthonormal columns.
        let gram = model.components.transpose().matmul(&model.components);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - want).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn pca_standardization_whitens_columns() {
        // Wildly different column scales; standardized PCA sees unit variance.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(33);
        let raw = Mat::from_fn(120, 4, |_, j| normal(&mut rng) * 10f64.powi(j as i32));
        let labels = vec![1.0; 119].into_iter().chain([-1.0]).collect();
        let ds = RawDataset::new(raw, labels).unwrap();
        let (model, reduced) = pca_fit_transform_opts(&ds, 4, true).unwrap();
        let total: f64 = model.explained_variance.iter().sum();
        assert!((total - 4.0).abs() < 1e-9, "correlation PCA total variance is p, got {total}");
        let back = model.reconstruct(&reduced.features);
        assert!(back.sub(&ds.features).max_abs() < 1e-8 * ds.features.max_abs());
    }

    #[test]
    fn pca_errors_past_numerical_rank() {
        // Rank-2 data in 5 dimensions.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let base = Mat::from_fn(50, 2, |_, _| normal(&mut rng));
        let lift = Mat::from_fn(2, 5, |i, j| ((i + 2 * j) as f64).sin());
        let feats = base.matmul(&lift);
        let labels = vec![1.0; 49].into_iter().chain([-1.0]).collect();
        let ds = RawDataset::new(feats, labels).unwrap();
        assert!(pca_fit_transform(&ds, 2).is_ok());
        assert!(matches!(pca_fit_transform(&ds, 3), Err(DataError::RankDeficient { rank: 2, .. })));
    }

    #[test]
    fn partition_counts_and_determinism() {
        let ds = synthesize(100, 3, 1, 2.0).unwrap();
        let part = shuffle_partition(&ds, 20, 5).unwrap();
        assert!(part.counts.iter().all(|&c| c == 5));

        let ds101 = synthesize(101, 3, 1, 2.0).unwrap();
        let part101 = shuffle_partition(&ds101, 20, 5).unwrap();
        assert_eq!(part101.counts.iter().filter(|&&c| c == 6).count(), 1);
        assert_eq!(part101.counts.iter().filter(|&&c| c == 5).count(), 19);

        let again = shuffle_partition(&ds, 20, 5).unwrap();
        assert_eq!(part, again);
    }

    #[test]
    fn split_shards_match_partition() {
        let ds = synthesize(83, 4, 2, 2.0).unwrap();
        let part = shuffle_partition(&ds, 7, 9).unwrap();
        let shards = split(&ds, &part);
        assert_eq!(shards.len(), 7);
        for (a, shard) in shards.iter().enumerate() {
            assert_eq!(shard.samples(), part.counts[a]);
        }
        let total: usize = shards.iter().map(RawDataset::samples).sum();
        assert_eq!(total, 83);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(30))]

            /// Counts differ by at most one and the assignment covers every
            /// sample exactly once.
            #[test]
            fn partition_is_homogeneous(m in 2usize..300, n_raw in 1usize..25, seed in 0u64..1000) {
                let n = n_raw.min(m);
                let ds = synthesize(m, 2, seed, 2.0).unwrap();
                let part = shuffle_partition(&ds, n, seed).unwrap();
                prop_assert_eq!(part.assignment.len(), m);
                let lo = m / n;
                let hi = lo + usize::from(m % n != 0);
                for &c in &part.counts {
                    prop_assert!(c == lo || c == hi);
                }
                prop_assert_eq!(part.counts.iter().sum::<usize>(), m);
                let mut recount = vec![0usize; n];
                for &a in &part.assignment {
                    prop_assert!(a < n);
                    recount[a] += 1;
                }
                prop_assert_eq!(recount, part.counts);
            }
        }
    }
}
