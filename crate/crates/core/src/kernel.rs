//! Kernel evaluation, Gram blocks, regularized SPD solves, and the
//! solver-facing `Q` factors for the twin dual problems.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Jitter levels tried in order when a factorization fails; the last
/// entry equals the classical twin-SVM ridge.
pub const DEFAULT_JITTER_SCHEDULE: [f64; 5] = [0.0, 1e-8, 1e-6, 1e-4, 1e-2];

/// Ridge applied by the plain twin-SVM baseline.
pub const TSVM_RIDGE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    /// `k(x, y) = exp(-||x - y||^2 / width^2)`.
    Gaussian { width: f64 },
}

impl KernelSpec {
    pub fn gaussian(width: f64) -> Result<KernelSpec> {
        if width <= 0.0 || !width.is_finite() {
            return Err(Error::invalid(format!("gaussian width must be positive, got {width}")));
        }
        Ok(KernelSpec::Gaussian { width })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Gaussian { width } => {
                KernelSpec::gaussian(width).map(|_| ())
            }
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, KernelSpec::Gaussian { .. })
    }

    /// Evaluate the kernel on two equal-length vectors.
    pub fn eval(&self, x1: ArrayView1<'_, f64>, x2: ArrayView1<'_, f64>) -> f64 {
        debug_assert_eq!(x1.len(), x2.len());
        match *self {
            KernelSpec::Linear => x1.dot(&x2),
            KernelSpec::Gaussian { width } => {
                let mut d2 = 0.0;
                for (a, b) in x1.iter().zip(x2.iter()) {
                    let d = a - b;
                    d2 += d * d;
                }
                (-d2 / (width * width)).exp()
            }
        }
    }
}

/// `exp(-||x1 - x2||^2 / g^2)` with dimension checking.
pub fn gaussian_kernel(x1: ArrayView1<'_, f64>, x2: ArrayView1<'_, f64>, g: f64) -> Result<f64> {
    if x1.len() != x2.len() {
        return Err(Error::invalid(format!(
            "kernel arguments have dimensions {} and {}",
            x1.len(),
            x2.len()
        )));
    }
    Ok(KernelSpec::gaussian(g)?.eval(x1, x2))
}

/// Block of pairwise kernel evaluations `k(rows(A), rows(B))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlock {
    values: Array2<f64>,
}

impl GramBlock {
    /// Wrap precomputed kernel values (used by tests that supply kernels
    /// the crate does not implement).
    pub fn from_values(values: Array2<f64>) -> GramBlock {
        GramBlock { values }
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[[i, j]]
    }

    pub fn nrows(&self) -> usize {
        self.values.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.values.ncols()
    }
}

/// Assemble `k(A, B^T)`. Squared distances for the Gaussian case come
/// from the expanded form with negatives clamped to zero; when `a` and
/// `b` are the same view the block is made exactly symmetric with a unit
/// diagonal.
pub fn gram(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, kernel: &KernelSpec) -> Result<GramBlock> {
    if a.ncols() != b.ncols() {
        return Err(Error::invalid(format!(
            "gram blocks need equal feature dimensions ({} vs {})",
            a.ncols(),
            b.ncols()
        )));
    }
    kernel.validate()?;
    let same = std::ptr::eq(a.as_ptr(), b.as_ptr()) && a.dim() == b.dim();
    let mut values = a.dot(&b.t());
    if let KernelSpec::Gaussian { width } = *kernel {
        let sq = |m: ArrayView2<'_, f64>| -> Array1<f64> {
            m.rows().into_iter().map(|r| r.dot(&r)).collect()
        };
        let ra = sq(a);
        let rb = if same { ra.clone() } else { sq(b) };
        let inv_g2 = 1.0 / (width * width);
        for ((i, j), v) in values.indexed_iter_mut() {
            let d2 = (ra[i] + rb[j] - 2.0 * *v).max(0.0);
            *v = (-d2 * inv_g2).exp();
        }
        if same {
            for i in 0..values.nrows() {
                values[[i, i]] = 1.0;
            }
        }
    }
    if same {
        for i in 0..values.nrows() {
            for j in 0..i {
                values[[i, j]] = values[[j, i]];
            }
        }
    }
    Ok(GramBlock { values })
}

/// Append a column of ones, turning `X` into `[X, e]` (and kernel blocks
/// into their augmented counterparts).
pub fn augment_ones(m: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut out = Array2::ones((m.nrows(), m.ncols() + 1));
    out.slice_mut(ndarray::s![.., ..m.ncols()]).assign(&m);
    out
}

/// Cholesky factor of `MtM + c_reg * E + jitter * I`, where `E` is the
/// identity with a zero in the last (bias) diagonal entry. The factor is
/// stored flat row-major so the substitution loops run on contiguous
/// slices.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    lower: Vec<f64>,
    jitter: f64,
}

fn dot_slices(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl SpdFactor {
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solve `P x = rhs` via forward/backward substitution.
    pub fn solve(&self, rhs: ArrayView1<'_, f64>) -> Array1<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n, "right-hand side dimension mismatch");
        let l = &self.lower;
        let mut x = rhs.to_owned();
        for i in 0..n {
            let row = &l[i * n..i * n + i];
            let s = x[i] - dot_slices(row, &x.as_slice().expect("contiguous")[..i]);
            x[i] = s / l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= l[k * n + i] * x[k];
            }
            x[i] = s / l[i * n + i];
        }
        x
    }

    /// Solve `P X = RHS` for a whole `n x m` right-hand-side block,
    /// substituting across all columns at once.
    pub fn solve_matrix(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        let n = self.n;
        assert_eq!(rhs.nrows(), n, "right-hand side dimension mismatch");
        let m = rhs.ncols();
        let mut x = Array2::zeros((n, m));
        x.assign(&rhs);
        let flat = x.as_slice_mut().expect("zeros allocates standard layout");
        let l = &self.lower;
        for i in 0..n {
            let (head, tail) = flat.split_at_mut(i * m);
            let row_i = &mut tail[..m];
            for k in 0..i {
                axpy(-l[i * n + k], &head[k * m..(k + 1) * m], row_i);
            }
            let inv = 1.0 / l[i * n + i];
            for v in row_i.iter_mut() {
                *v *= inv;
            }
        }
        for i in (0..n).rev() {
            let (head, tail) = flat.split_at_mut((i + 1) * m);
            let row_i = &mut head[i * m..];
            for k in i + 1..n {
                axpy(-l[k * n + i], &tail[(k - i - 1) * m..(k - i) * m], row_i);
            }
            let inv = 1.0 / l[i * n + i];
            for v in row_i.iter_mut() {
                *v *= inv;
            }
        }
        x
    }
}

fn cholesky_lower(p: &Array2<f64>) -> Option<Vec<f64>> {
    let n = p.nrows();
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let s =
                p[[i, j]] - dot_slices(&l[i * n..i * n + j], &l[j * n..j * n + j]);
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn regularized(mtm: ArrayView2<'_, f64>, c_reg: f64, jitter: f64) -> Array2<f64> {
    let n = mtm.nrows();
    let mut p = mtm.to_owned();
    for i in 0..n {
        // c_reg skips the bias coordinate; jitter covers the full diagonal.
        if i + 1 < n {
            p[[i, i]] += c_reg;
        }
        p[[i, i]] += jitter;
    }
    p
}

/// Factor `MtM + c_reg * E + jitter * I`, escalating through
/// `jitter_schedule` until the Cholesky decomposition succeeds.
pub fn spd_solve_factor(
    mtm: ArrayView2<'_, f64>,
    c_reg: f64,
    jitter_schedule: &[f64],
) -> Result<SpdFactor> {
    if mtm.nrows() != mtm.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    if c_reg < 0.0 {
        return Err(Error::invalid("ridge weight must be non-negative"));
    }
    for &jitter in jitter_schedule {
        let p = regularized(mtm, c_reg, jitter);
        if let Some(lower) = cholesky_lower(&p) {
            return Ok(SpdFactor { n: p.nrows(), lower, jitter });
        }
    }
    Err(Error::Factorization(format!(
        "no jitter in {jitter_schedule:?} produced a positive-definite system"
    )))
}

/// Solver-facing factor for one dual problem: `Q = P^-1 G_other^T` with
/// `P = G_own^T G_own + c_reg E (+ jitter I)`, plus the diagonal of the
/// implicit Hessian `Qbar = G_other Q`.
#[derive(Debug, Clone)]
pub struct QFactor {
    /// `p x m` solve results, one column per dual variable.
    pub q: Array2<f64>,
    /// `Qbar_ii = G_other_i Q_i`, strictly positive.
    pub qbar_diag: Array1<f64>,
    /// Regularized normal matrix the factorization decomposed.
    pub inner: Array2<f64>,
    /// Jitter level that made the factorization usable.
    pub jitter: f64,
}

impl QFactor {
    /// Number of dual variables.
    pub fn len(&self) -> usize {
        self.qbar_diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qbar_diag.is_empty()
    }
}

/// Build the `Q` factor from the raw class matrices.
pub fn build_q_factor(
    g_own: ArrayView2<'_, f64>,
    g_other: ArrayView2<'_, f64>,
    c_reg: f64,
    jitter_schedule: &[f64],
) -> Result<QFactor> {
    if g_own.ncols() != g_other.ncols() {
        return Err(Error::invalid(format!(
            "class matrices disagree on augmented dimension ({} vs {})",
            g_own.ncols(),
            g_other.ncols()
        )));
    }
    let mtm = g_own.t().dot(&g_own);
    build_q_factor_from_mtm(mtm.view(), g_other, c_reg, jitter_schedule)
}

/// Same as [`build_q_factor`] but with `G_own^T G_own` precomputed, so
/// grid search can share it across ridge values.
pub fn build_q_factor_from_mtm(
    mtm: ArrayView2<'_, f64>,
    g_other: ArrayView2<'_, f64>,
    c_reg: f64,
    jitter_schedule: &[f64],
) -> Result<QFactor> {
    if mtm.nrows() != g_other.ncols() {
        return Err(Error::invalid("normal matrix does not match the opposite class"));
    }
    // A level "succeeds" only if the Cholesky completes and every
    // Qbar_ii comes out strictly positive; otherwise escalate.
    let rhs = g_other.t().to_owned();
    for &jitter in jitter_schedule {
        let Ok(factor) = spd_solve_factor(mtm, c_reg, &[jitter]) else {
            continue;
        };
        let m = g_other.nrows();
        let q = factor.solve_matrix(rhs.view());
        let qbar_diag: Array1<f64> =
            (0..m).map(|i| g_other.row(i).dot(&q.column(i))).collect();
        if qbar_diag.iter().all(|&v| v > 0.0 && v.is_finite()) {
            let inner = regularized(mtm, c_reg, jitter);
            return Ok(QFactor { q, qbar_diag, inner, jitter });
        }
    }
    Err(Error::Factorization(
        "no jitter level produced positive Qbar diagonal entries".into(),
    ))
}

/// Dense `Qbar = G_other Q`, used by oracles and diagnostics.
pub fn dense_qbar(qf: &QFactor, g_other: ArrayView2<'_, f64>) -> Array2<f64> {
    g_other.dot(&qf.q)
}

/// Row-mean of a matrix (used for class centers, kept here for reuse on
/// raw kernel blocks).
pub(crate) fn row_mean(m: ArrayView2<'_, f64>) -> Array1<f64> {
    m.mean_axis(Axis(0)).expect("nonempty matrix")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_kernel_values() {
        let x = array![1.0, 2.0];
        assert_abs_diff_eq!(gaussian_kernel(x.view(), x.view(), 2.0).unwrap(), 1.0);
        // ||x1 - x2|| = g  ->  e^-1
        let y = array![1.0, 4.0];
        assert_abs_diff_eq!(
            gaussian_kernel(x.view(), y.view(), 2.0).unwrap(),
            (-1.0f64).exp(),
            epsilon = 1e-15
        );
        // huge width: value tends to 1
        assert!((gaussian_kernel(x.view(), y.view(), 1e6).unwrap() - 1.0).abs() < 1e-6);
        let z = array![1.0];
        assert!(gaussian_kernel(x.view(), z.view(), 1.0).is_err());
        assert!(gaussian_kernel(x.view(), y.view(), 0.0).is_err());
    }

    #[test]
    fn linear_gram_is_a_bt() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        let b = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let g = gram(a.view(), b.view(), &KernelSpec::Linear).unwrap();
        assert_eq!(g.values().to_owned(), a.dot(&b.t()));
    }

    #[test]
    fn gaussian_self_gram_unit_diagonal_and_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Array2::from_shape_fn((12, 3), |_| rng.gen_range(-1.0..1.0));
        let spec = KernelSpec::gaussian(0.7).unwrap();
        let g = gram(a.view(), a.view(), &spec).unwrap();
        for i in 0..12 {
            assert_eq!(g.get(i, i), 1.0);
            for j in 0..12 {
                assert_eq!(g.get(i, j), g.get(j, i));
                assert!(g.get(i, j) > 0.0 && g.get(i, j) <= 1.0);
            }
        }
    }

    #[test]
    fn cross_gram_matches_scalar_kernel() {
        let a = array![[0.1, 0.2], [0.3, -0.4], [0.5, 0.6]];
        let b = array![[1.0, 1.0], [0.0, 0.0], [-1.0, 0.5], [0.2, 0.2]];
        let spec = KernelSpec::gaussian(1.3).unwrap();
        let g = gram(a.view(), b.view(), &spec).unwrap();
        assert_eq!(g.nrows(), 3);
        assert_eq!(g.ncols(), 4);
        for i in 0..3 {
            for j in 0..4 {
                assert_abs_diff_eq!(
                    g.get(i, j),
                    gaussian_kernel(a.row(i), b.row(j), 1.3).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
    }

    #[test]
    fn augment_appends_ones() {
        let m = array![[1.0, 2.0], [3.0, 4.0]];
        let h = augment_ones(m.view());
        assert_eq!(h, array![[1.0, 2.0, 1.0], [3.0, 4.0, 1.0]]);
    }

    #[test]
    fn spd_factor_solves_identity() {
        let eye = Array2::eye(4);
        let f = spd_solve_factor(eye.view(), 0.0, &[0.0]).unwrap();
        let rhs = array![1.0, -2.0, 3.0, 0.5];
        assert_abs_diff_eq!(f.solve(rhs.view()), rhs, epsilon = 1e-14);
        assert_eq!(f.jitter(), 0.0);
    }

    #[test]
    fn spd_factor_escalates_on_singular_bias_block() {
        // zero bias-bias entry with no ridge is singular at jitter 0
        let mtm = array![[1.0, 0.0], [0.0, 0.0]];
        let f = spd_solve_factor(mtm.view(), 0.0, &DEFAULT_JITTER_SCHEDULE).unwrap();
        assert!(f.jitter() > 0.0);
    }

    #[test]
    fn spd_factor_residual_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Array2::from_shape_fn((6, 6), |_| rng.gen_range(-1.0..1.0));
        let mtm = a.t().dot(&a);
        let c_reg = 0.5;
        let f = spd_solve_factor(mtm.view(), c_reg, &[1e-8]).unwrap();
        let rhs = Array1::from_shape_fn(6, |i| (i as f64) - 2.5);
        let x = f.solve(rhs.view());
        let p = regularized(mtm.view(), c_reg, f.jitter());
        let resid = &p.dot(&x) - &rhs;
        let norm = |v: &Array1<f64>| v.dot(v).sqrt();
        assert!(norm(&resid) <= 1e-8 * norm(&rhs));
    }

    #[test]
    fn q_factor_single_opposite_row() {
        let own = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let other = array![[2.0, 1.0, 1.0]];
        let qf = build_q_factor(own.view(), other.view(), 0.1, &DEFAULT_JITTER_SCHEDULE).unwrap();
        assert_eq!(qf.q.ncols(), 1);
        assert_eq!(qf.len(), 1);
        assert_abs_diff_eq!(
            qf.qbar_diag[0],
            other.row(0).dot(&qf.q.column(0)),
            epsilon = 1e-14
        );
    }

    #[test]
    fn qbar_diag_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let own = Array2::from_shape_fn((8, 5), |_| rng.gen_range(-1.0..1.0));
        let other = Array2::from_shape_fn((8, 5), |_| rng.gen_range(-1.0..1.0));
        let qf = build_q_factor(own.view(), other.view(), 0.3, &[0.0]).unwrap();
        let qbar = dense_qbar(&qf, other.view());
        for i in 0..8 {
            assert_abs_diff_eq!(qf.qbar_diag[i], qbar[[i, i]], epsilon = 1e-10);
            assert!(qf.qbar_diag[i] > 0.0);
        }
        // bilinearity: doubling the opposite rows quadruples the diagonal
        let doubled = &other * 2.0;
        let qf2 = build_q_factor(own.view(), doubled.view(), 0.3, &[0.0]).unwrap();
        for i in 0..8 {
            assert_abs_diff_eq!(qf2.qbar_diag[i], 4.0 * qf.qbar_diag[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn dual_variable_count_matches_opposite_class() {
        let own = Array2::ones((5, 3));
        let other = Array2::ones((9, 3));
        let qf = build_q_factor(
            augment_ones(own.view()).view(),
            augment_ones(other.view()).view(),
            1.0,
            &DEFAULT_JITTER_SCHEDULE,
        )
        .unwrap();
        assert_eq!(qf.len(), 9);
        assert_eq!(qf.q.dim(), (4, 9));
    }

    proptest! {
        // PSD certificate: K + 1e-8 I admitting a Cholesky factorization
        // bounds every eigenvalue of K below by -1e-8.
        #[test]
        fn gaussian_gram_is_numerically_psd(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = Array2::from_shape_fn((20, 4), |_| rng.gen_range(-2.0..2.0));
            let g = gram(a.view(), a.view(), &KernelSpec::gaussian(1.0).unwrap()).unwrap();
            let mut shifted = g.values().to_owned();
            for i in 0..20 {
                shifted[[i, i]] += 1e-8;
            }
            prop_assert!(cholesky_lower(&shifted).is_some());
        }

        #[test]
        fn implicit_qbar_is_psd_with_positive_diagonal(seed: u64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let own = Array2::from_shape_fn((6, 4), |_| rng.gen_range(-1.0..1.0));
            let other = Array2::from_shape_fn((7, 4), |_| rng.gen_range(-1.0..1.0));
            let qf = build_q_factor(own.view(), other.view(), 0.2, &DEFAULT_JITTER_SCHEDULE).unwrap();
            let qbar = dense_qbar(&qf, other.view());
            let mut shifted = qbar.clone();
            for i in 0..7 {
                prop_assert!(qf.qbar_diag[i] > 0.0);
                shifted[[i, i]] += 1e-8 * (1.0 + qbar[[i, i]].abs());
            }
            // symmetrize rounding noise before the certificate
            let sym = (&shifted + &shifted.t()) * 0.5;
            prop_assert!(cholesky_lower(&sym).is_some());
        }
    }
}
