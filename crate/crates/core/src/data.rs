//! Dataset representation, CSV ingestion, min-max scaling, class splits,
//! k-fold plans, and the two synthetic 2-D generators used by the
//! experiment harness.
//!
//! Every random operation takes an explicit 64-bit seed and draws from a
//! `ChaCha8Rng` stream, so identical seeds reproduce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Labeled instance matrix. Labels are strictly `+1` / `-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<i8>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<i8>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(Error::invalid("dataset needs at least one row and one feature"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::invalid(format!(
                "feature rows ({}) do not match label count ({})",
                features.nrows(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
            return Err(Error::invalid(format!("label {bad} is not +1 or -1")));
        }
        Ok(Dataset { features, labels })
    }

    /// Number of instances `l`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Feature dimension `n`.
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> ArrayView2<'_, f64> {
        self.features.view()
    }

    pub fn labels(&self) -> &[i8] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// New dataset keeping `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Dataset { features, labels }
    }

    /// Row indices of the positive and negative class, in row order.
    pub fn class_indices(&self) -> (Vec<usize>, Vec<usize>) {
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for (i, &y) in self.labels.iter().enumerate() {
            if y == 1 {
                pos.push(i);
            } else {
                neg.push(i);
            }
        }
        (pos, neg)
    }
}

/// CSV reading knobs. The dialect is plain comma-separated decimal text,
/// one instance per row, no quoting.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// 0-based label column; `None` means the last column.
    pub label_column: Option<usize>,
    /// Drop the first row before parsing.
    pub skip_header: bool,
    /// Remap raw class ids by majority-vs-rest instead of requiring +-1.
    pub binarize: bool,
}

/// Read a dataset from `path` according to `opts`.
pub fn load_csv(path: impl AsRef<Path>, opts: &LoadOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<&str> = text.lines().map(|l| l.trim_end_matches('\r')).collect();
    while rows.last().is_some_and(|l| l.trim().is_empty()) {
        rows.pop();
    }
    let mut first_data_row = 0usize;
    if opts.skip_header && !rows.is_empty() {
        first_data_row = 1;
    }
    let rows = &rows[first_data_row..];
    if rows.is_empty() {
        return Err(Error::invalid(format!("{}: no rows", path.display())));
    }

    let width = rows[0].split(',').count();
    if width < 2 {
        return Err(Error::invalid(format!(
            "{}: rows need at least one feature and a label",
            path.display()
        )));
    }
    let label_col = opts.label_column.unwrap_or(width - 1);
    if label_col >= width {
        return Err(Error::invalid(format!(
            "label column {label_col} out of range for {width}-column file"
        )));
    }

    let l = rows.len();
    let n = width - 1;
    let mut features = Array2::zeros((l, n));
    let mut raw_labels = Vec::with_capacity(l);
    for (r, line) in rows.iter().enumerate() {
        let row_no = first_data_row + r + 1;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != width {
            return Err(Error::Parse {
                path: path.into(),
                row: row_no,
                column: cells.len().min(width),
                message: format!("expected {width} columns, found {}", cells.len()),
            });
        }
        let mut feat_idx = 0usize;
        for (c, cell) in cells.iter().enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.into(),
                row: row_no,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if c == label_col {
                raw_labels.push(value);
            } else {
                features[[r, feat_idx]] = value;
                feat_idx += 1;
            }
        }
    }

    let labels = if opts.binarize {
        binarize_majority(&raw_labels)?
    } else {
        raw_labels
            .iter()
            .enumerate()
            .map(|(r, &v)| {
                if v == 1.0 {
                    Ok(1i8)
                } else if v == -1.0 {
                    Ok(-1i8)
                } else {
                    Err(Error::Parse {
                        path: path.into(),
                        row: first_data_row + r + 1,
                        column: label_col + 1,
                        message: format!("label {v} is not +1 or -1 (use --binarize for raw class ids)"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    Dataset::new(features, labels)
}

/// Majority class becomes `+1`, everything else `-1`. Ties on the count
/// go to the smallest class id.
pub fn binarize_majority(raw: &[f64]) -> Result<Vec<i8>> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("class ids must be finite"));
    }
    let mut ids: Vec<f64> = raw.to_vec();
    ids.sort_by(f64::total_cmp);
    ids.dedup();
    if ids.len() < 2 {
        return Err(Error::invalid("need at least two distinct class ids"));
    }
    // ids are sorted ascending, so the first strict maximum wins ties.
    let mut majority = ids[0];
    let mut best = 0usize;
    for &id in &ids {
        let count = raw.iter().filter(|&&v| v == id).count();
        if count > best {
            best = count;
            majority = id;
        }
    }
    Ok(raw.iter().map(|&v| if v == majority { 1 } else { -1 }).collect())
}

/// Write `data` in the same CSV dialect `load_csv` reads (features then
/// label in the last column, shortest round-trip float formatting).
pub fn write_csv(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for i in 0..data.len() {
        for v in data.row(i) {
            let _ = write!(out, "{v},");
        }
        let _ = writeln!(out, "{}", data.labels()[i]);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-feature affine map onto `[0, 1]`, fit on training data only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    min: Array1<f64>,
    range: Array1<f64>,
}

impl MinMaxScaler {
    pub fn fit(train: &Dataset) -> MinMaxScaler {
        let feats = train.features();
        let mut min = Array1::from_elem(train.dim(), f64::INFINITY);
        let mut max = Array1::from_elem(train.dim(), f64::NEG_INFINITY);
        for row in feats.rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        let range = &max - &min;
        MinMaxScaler { min, range }
    }

    /// Scaler that leaves features untouched.
    pub fn identity(dim: usize) -> MinMaxScaler {
        MinMaxScaler { min: Array1::zeros(dim), range: Array1::ones(dim) }
    }

    pub fn transform_row(&self, x: ArrayView1<'_, f64>) -> Array1<f64> {
        assert_eq!(x.len(), self.min.len(), "feature dimension mismatch");
        Array1::from_iter(x.iter().zip(self.min.iter().zip(self.range.iter())).map(
            |(&v, (&m, &r))| {
                if r > 0.0 {
                    (v - m) / r
                } else {
                    0.0
                }
            },
        ))
    }

    /// Transform a whole dataset; values outside the training range are
    /// not clamped.
    pub fn apply(&self, data: &Dataset) -> Dataset {
        let mut features = Array2::zeros((data.len(), data.dim()));
        for (i, row) in data.features().rows().into_iter().enumerate() {
            features.row_mut(i).assign(&self.transform_row(row));
        }
        Dataset { features, labels: data.labels.clone() }
    }
}

/// Split rows into the positive and negative class matrices, keeping row
/// order within each class.
pub fn split_by_class(data: &Dataset) -> Result<(Array2<f64>, Array2<f64>)> {
    let (pos, neg) = data.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("both classes must be present"));
    }
    Ok((
        data.features().select(Axis(0), &pos),
        data.features().select(Axis(0), &neg),
    ))
}

/// Deterministic assignment of `l` instances to `k` folds whose sizes
/// differ by at most one.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }
}

pub fn make_folds(l: usize, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::invalid("need at least 2 folds"));
    }
    if k > l {
        return Err(Error::invalid(format!("k = {k} exceeds instance count {l}")));
    }
    let mut order: Vec<usize> = (0..l).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut assignments = vec![0usize; l];
    for (pos, &i) in order.iter().enumerate() {
        assignments[i] = pos % k;
    }
    Ok(FoldPlan { k, assignments })
}

/// Random train/test partition with `n_train` training rows.
pub fn random_split(data: &Dataset, n_train: usize, seed: u64) -> Result<(Dataset, Dataset)> {
    if n_train == 0 || n_train >= data.len() {
        return Err(Error::invalid(format!(
            "train size {n_train} must be in 1..{}",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let (train_idx, test_idx) = order.split_at(n_train);
    Ok((data.select(train_idx), data.select(test_idx)))
}

const SINE_X1_LO: f64 = -std::f64::consts::FRAC_PI_2;
const SINE_X1_HI: f64 = 2.0 * std::f64::consts::PI;

/// Two sinusoidal bands: positives uniform in a band of half-width 0.25
/// around `sin(x1)`, negatives uniform in the band
/// `[c - 1.3, c - 0.8]` below `c = 0.6 sin(x1/1.05 + 0.5)`. The two
/// stripes are disjoint up to a sliver of well under 1% of the area, so
/// near-perfect classification is attainable.
pub fn gen_sine_band(count: usize, seed: u64) -> Result<Dataset> {
    if count < 2 {
        return Err(Error::invalid("need at least 2 instances"));
    }
    let n_pos = count - count / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((count, 2));
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let x1 = rng.gen_range(SINE_X1_LO..=SINE_X1_HI);
        let (x2, y) = if i < n_pos {
            let c = x1.sin();
            (rng.gen_range(c - 0.25..=c + 0.25), 1)
        } else {
            let c = 0.6 * (x1 / 1.05 + 0.5).sin();
            (rng.gen_range(c - 1.3..=c - 0.8), -1)
        };
        features[[i, 0]] = x1;
        features[[i, 1]] = x2;
        labels.push(y);
    }
    Dataset::new(features, labels)
}

/// Component means of the two-class, two-component Gaussian mixture used
/// for the Ripley-style synthetic data (component variance 0.04).
const RIPLEY_POS_CENTERS: [[f64; 2]; 2] = [[-0.3, 0.7], [0.4, 0.7]];
const RIPLEY_NEG_CENTERS: [[f64; 2]; 2] = [[-0.7, 0.3], [0.3, 0.3]];
const RIPLEY_STD: f64 = 0.2;

fn gen_ripley_block(count: usize, rng: &mut ChaCha8Rng) -> Result<Dataset> {
    let n_pos = count - count / 2;
    let noise = Normal::new(0.0, RIPLEY_STD).expect("valid stddev");
    let mut features = Array2::zeros((count, 2));
    let mut labels = Vec::with_capacity(count);
    for i in 0..count {
        let centers = if i < n_pos { &RIPLEY_POS_CENTERS } else { &RIPLEY_NEG_CENTERS };
        let c = centers[usize::from(rng.gen_bool(0.5))];
        features[[i, 0]] = c[0] + noise.sample(rng);
        features[[i, 1]] = c[1] + noise.sample(rng);
        labels.push(if i < n_pos { 1 } else { -1 });
    }
    Dataset::new(features, labels)
}

/// Balanced Gaussian-mixture train/test pair in the style of the Ripley
/// synthetic benchmark.
pub fn gen_ripley_mixture(
    count_train: usize,
    count_test: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if count_train < 2 || count_test < 2 {
        return Err(Error::invalid("need at least 2 instances per split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = gen_ripley_block(count_train, &mut rng)?;
    let test = gen_ripley_block(count_test, &mut rng)?;
    Ok((train, test))
}

/// Perturb every feature entry by an independent `N(0, sigma^2)` draw.
/// Labels are unchanged.
pub fn add_gaussian_noise(data: &Dataset, sigma: f64, seed: u64) -> Result<Dataset> {
    if sigma < 0.0 {
        return Err(Error::invalid("sigma must be non-negative"));
    }
    if sigma == 0.0 {
        return Ok(data.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).expect("valid stddev");
    let mut features = data.features.clone();
    for v in features.iter_mut() {
        *v += noise.sample(&mut rng);
    }
    Ok(Dataset { features, labels: data.labels.clone() })
}
