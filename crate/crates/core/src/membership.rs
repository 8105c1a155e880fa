//! Fuzzy membership weights from class geometry.
//!
//! Each instance gets a weight in `(0, 1]` that shrinks as the instance
//! drifts from its class center; instances at least as close to the
//! opposite center as to their own are treated as suspected outliers and
//! damped by the factor `mu` instead of `1 - mu`. The same rule is
//! applied either in input space (linear models) or in kernel feature
//! space through the Gram expansion of squared distances.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array1, ArrayView1, ArrayView2};

use crate::data::{split_by_class, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{gram, row_mean, GramBlock, KernelSpec};

/// Weighting knobs: `mu` damps suspected outliers, `delta` keeps every
/// weight strictly positive.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MembershipParams {
    pub mu: f64,
    pub delta: f64,
}

impl MembershipParams {
    pub fn new(mu: f64, delta: f64) -> Result<MembershipParams> {
        if !(0.0..=1.0).contains(&mu) {
            return Err(Error::invalid(format!("mu must lie in [0, 1], got {mu}")));
        }
        if delta <= 0.0 || !delta.is_finite() {
            return Err(Error::invalid(format!("delta must be positive, got {delta}")));
        }
        Ok(MembershipParams { mu, delta })
    }
}

impl Default for MembershipParams {
    fn default() -> Self {
        MembershipParams { mu: 0.1, delta: 1e-3 }
    }
}

/// Per-instance weights, split by class and ordered as the instances
/// appear in the dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipVector {
    pub s_plus: Array1<f64>,
    pub s_minus: Array1<f64>,
}

impl MembershipVector {
    /// Unit weights (used by the plain twin-SVM baseline).
    pub fn ones(l_plus: usize, l_minus: usize) -> MembershipVector {
        MembershipVector { s_plus: Array1::ones(l_plus), s_minus: Array1::ones(l_minus) }
    }
}

/// Arithmetic means of the class rows.
pub fn class_centers(
    x_plus: ArrayView2<'_, f64>,
    x_minus: ArrayView2<'_, f64>,
) -> Result<(Array1<f64>, Array1<f64>)> {
    if x_plus.nrows() == 0 || x_minus.nrows() == 0 {
        return Err(Error::invalid("class centers need nonempty classes"));
    }
    Ok((row_mean(x_plus), row_mean(x_minus)))
}

/// Largest Euclidean distance from a class row to its center.
pub fn class_radius(x: ArrayView2<'_, f64>, center: ArrayView1<'_, f64>) -> f64 {
    x.rows()
        .into_iter()
        .map(|row| euclidean(row, center))
        .fold(0.0, f64::max)
}

fn euclidean(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn weight(d_own: f64, d_other: f64, ratio: f64, params: &MembershipParams) -> f64 {
    // ties count as the outlier branch
    let factor = if d_own >= d_other { params.mu } else { 1.0 - params.mu };
    factor * (1.0 - ratio)
}

/// Input-space memberships from class means and hypersphere radii.
pub fn membership_linear(data: &Dataset, params: &MembershipParams) -> Result<MembershipVector> {
    let (x_plus, x_minus) = split_by_class(data)?;
    let (c_plus, c_minus) = class_centers(x_plus.view(), x_minus.view())?;
    let r_plus = class_radius(x_plus.view(), c_plus.view());
    let r_minus = class_radius(x_minus.view(), c_minus.view());

    let assign = |x: ArrayView2<'_, f64>, own: &Array1<f64>, other: &Array1<f64>, r: f64| {
        x.rows()
            .into_iter()
            .map(|row| {
                let d_own = euclidean(row, own.view());
                let d_other = euclidean(row, other.view());
                weight(d_own, d_other, d_own / (r + params.delta), params)
            })
            .collect::<Array1<f64>>()
    };
    Ok(MembershipVector {
        s_plus: assign(x_plus.view(), &c_plus, &c_minus, r_plus),
        s_minus: assign(x_minus.view(), &c_minus, &c_plus, r_minus),
    })
}

/// Squared feature-space distance from instance `x_index` to the mean of
/// the mapped `class_rows`, expanded through kernel sums and clamped to
/// be non-negative.
pub fn kernel_sq_dist_to_center(
    x_index: usize,
    class_rows: &[usize],
    gram: &GramBlock,
) -> Result<f64> {
    if class_rows.is_empty() {
        return Err(Error::invalid("class index set is empty"));
    }
    let lc = class_rows.len() as f64;
    let self_term = gram.get(x_index, x_index);
    let cross: f64 = class_rows.iter().map(|&j| gram.get(x_index, j)).sum();
    let mut center = 0.0;
    for &j in class_rows {
        for &k in class_rows {
            center += gram.get(j, k);
        }
    }
    Ok((self_term - 2.0 * cross / lc + center / (lc * lc)).max(0.0))
}

/// Feature-space memberships through the kernel expansion.
pub fn membership_kernel(
    data: &Dataset,
    kernel: &KernelSpec,
    params: &MembershipParams,
) -> Result<MembershipVector> {
    let features = data.features();
    let gram_xx = gram(features, features, kernel)?;
    membership_kernel_with_gram(data, &gram_xx, params)
}

/// Same as [`membership_kernel`] with a caller-supplied full Gram block,
/// so training can reuse the one it already assembled.
pub fn membership_kernel_with_gram(
    data: &Dataset,
    gram_xx: &GramBlock,
    params: &MembershipParams,
) -> Result<MembershipVector> {
    let (pos, neg) = data.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("both classes must be present"));
    }

    let sq_to = |rows: &[usize], class: &[usize]| -> Result<Vec<f64>> {
        rows.iter()
            .map(|&i| kernel_sq_dist_to_center(i, class, gram_xx))
            .collect()
    };
    let assign = |rows: &[usize], own: &[usize], other: &[usize]| -> Result<Array1<f64>> {
        let d2_own = sq_to(rows, own)?;
        let d2_other = sq_to(rows, other)?;
        let r2_own = d2_own.iter().cloned().fold(0.0, f64::max);
        Ok(d2_own
            .iter()
            .zip(d2_other.iter())
            .map(|(&own_sq, &other_sq)| {
                let ratio = (own_sq / (r2_own + params.delta)).sqrt();
                weight(own_sq, other_sq, ratio, params)
            })
            .collect())
    };
    Ok(MembershipVector {
        s_plus: assign(&pos, &pos, &neg)?,
        s_minus: assign(&neg, &neg, &pos)?,
    })
}

/// Dump `(index, label, s)` rows for inspection.
pub fn write_membership_csv(
    data: &Dataset,
    memberships: &MembershipVector,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let (pos, neg) = data.class_indices();
    let mut rows: Vec<(usize, i8, f64)> = Vec::with_capacity(data.len());
    for (k, &i) in pos.iter().enumerate() {
        rows.push((i, 1, memberships.s_plus[k]));
    }
    for (k, &i) in neg.iter().enumerate() {
        rows.push((i, -1, memberships.s_minus[k]));
    }
    rows.sort_by_key(|r| r.0);
    let mut out = String::from("index,label,s\n");
    for (i, y, s) in rows {
        let _ = writeln!(out, "{i},{y},{s}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
