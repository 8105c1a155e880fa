//! Coordinate descent for the box-constrained twin duals
//! `min 1/2 a^T Qbar a - e^T a  s.t.  0 <= a <= u`,
//! as plain cyclic sweeps and as randomized sweeps with heuristic
//! active-set shrinking, plus an independent projected-gradient oracle
//! used for verification.
//!
//! `Qbar` is never formed densely during a solve: the gradient is
//! maintained through `u_aux = -Q a`, giving
//! `grad_i = -G_other_i . u_aux - 1` at `O(p)` per coordinate.

use std::sync::Arc;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernel::QFactor;

/// Updates whose projected gradient is below this magnitude are treated
/// as already optimal and skipped.
const PG_SKIP: f64 = 1e-12;

/// One of the twin dual problems in factored form. The factor and
/// gradient rows are shared, so rebinding the box (`with_upper`) is
/// cheap; both matrices are stored with the per-variable vectors as
/// contiguous rows for the inner loops.
#[derive(Debug, Clone)]
pub struct DualProblem {
    /// `m x p`: row `i` is the `i`-th column of `Q` (`Qbar = g_other Q`).
    q_t: Arc<Array2<f64>>,
    /// Strictly positive diagonal of the implicit Hessian.
    qbar_diag: Arc<Array1<f64>>,
    /// `m x p` rows used for gradient maintenance.
    g_other: Arc<Array2<f64>>,
    /// Per-variable box upper bounds.
    upper: Array1<f64>,
}

impl DualProblem {
    pub fn new(qfactor: &QFactor, g_other: Array2<f64>, upper: Array1<f64>) -> Result<DualProblem> {
        let m = upper.len();
        if m == 0 {
            return Err(Error::invalid("dual problem needs at least one variable"));
        }
        if qfactor.q.ncols() != m || qfactor.qbar_diag.len() != m || g_other.nrows() != m {
            return Err(Error::invalid("dual problem dimensions disagree"));
        }
        if g_other.ncols() != qfactor.q.nrows() {
            return Err(Error::invalid("gradient rows do not match the factor"));
        }
        validate_upper(&upper)?;
        Ok(DualProblem {
            q_t: Arc::new(qfactor.q.t().to_owned()),
            qbar_diag: Arc::new(qfactor.qbar_diag.clone()),
            g_other: Arc::new(g_other),
            upper,
        })
    }

    /// Same problem with a different box; the factor and gradient rows
    /// are shared, not copied.
    pub fn with_upper(&self, upper: Array1<f64>) -> Result<DualProblem> {
        if upper.len() != self.len() {
            return Err(Error::invalid("box bounds have the wrong length"));
        }
        validate_upper(&upper)?;
        Ok(DualProblem {
            q_t: Arc::clone(&self.q_t),
            qbar_diag: Arc::clone(&self.qbar_diag),
            g_other: Arc::clone(&self.g_other),
            upper,
        })
    }

    /// Wrap an explicit dense `Qbar` (identity factor), mainly for tests
    /// and oracle comparisons.
    pub fn from_dense(qbar: Array2<f64>, upper: Array1<f64>) -> Result<DualProblem> {
        let m = qbar.nrows();
        if m == 0 || qbar.ncols() != m {
            return Err(Error::invalid("dense Qbar must be square and nonempty"));
        }
        let qbar_diag = Array1::from_iter((0..m).map(|i| qbar[[i, i]]));
        let factor = QFactor {
            q: Array2::eye(m),
            qbar_diag,
            inner: Array2::eye(m),
            jitter: 0.0,
        };
        DualProblem::new(&factor, qbar, upper)
    }

    /// Number of dual variables.
    pub fn len(&self) -> usize {
        self.upper.len()
    }

    pub fn is_empty(&self) -> bool {
        self.upper.is_empty()
    }

    pub fn upper(&self) -> ArrayView1<'_, f64> {
        self.upper.view()
    }

    /// Materialize `Qbar = G_other Q` for oracles and diagnostics.
    pub fn dense_qbar(&self) -> Array2<f64> {
        self.g_other.dot(&self.q_t.t())
    }

    /// Dual objective `1/2 a^T Qbar a - e^T a`.
    pub fn objective(&self, alpha: ArrayView1<'_, f64>) -> f64 {
        let qa = self.q_t.t().dot(&alpha);
        0.5 * alpha.dot(&self.g_other.dot(&qa)) - alpha.sum()
    }

    /// `u_aux = -Q a`, recomputed from scratch.
    pub fn fresh_u(&self, alpha: ArrayView1<'_, f64>) -> Array1<f64> {
        -self.q_t.t().dot(&alpha)
    }
}

fn validate_upper(upper: &Array1<f64>) -> Result<()> {
    if upper.iter().any(|&u| u < 0.0 || !u.is_finite()) {
        return Err(Error::invalid("box bounds must be finite and non-negative"));
    }
    Ok(())
}

/// Gradient component clipped to respect the active box bounds; zero at
/// a coordinate-wise optimum.
pub fn projected_gradient(alpha_i: f64, grad_i: f64, upper_i: f64) -> f64 {
    debug_assert!(
        (0.0..=upper_i.max(0.0)).contains(&alpha_i),
        "alpha {alpha_i} outside [0, {upper_i}]"
    );
    if upper_i <= 0.0 {
        0.0
    } else if alpha_i <= 0.0 {
        grad_i.min(0.0)
    } else if alpha_i >= upper_i {
        grad_i.max(0.0)
    } else {
        grad_i
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverConfig {
    /// Termination gap on projected gradients over a full-set sweep.
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Seed for the randomized sweep order (shrinking solver only).
    pub seed: u64,
    /// Select the shrinking solver in the training pipeline.
    pub shrinking: bool,
    /// Record per-epoch (objective, gap, active-set size) rows.
    pub trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { epsilon: 1e-4, max_epochs: 1000, seed: 0, shrinking: true, trace: false }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be at least 1"));
        }
        Ok(())
    }
}

/// Per-epoch convergence snapshot (written when tracing is on).
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTrace {
    pub epoch: usize,
    pub objective: f64,
    pub kkt_gap: f64,
    pub active_set_size: usize,
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub alpha: Array1<f64>,
    pub objective: f64,
    /// Plain solver: largest projected-gradient magnitude on the final
    /// sweep. Shrinking solver: max - min projected gradient on the
    /// final full-set sweep. At most `epsilon` when `converged`.
    pub kkt_gap: f64,
    pub epochs: usize,
    pub updates: u64,
    pub shrink_events: usize,
    /// Coordinates skipped because their Hessian diagonal was not
    /// strictly positive.
    pub skipped_coordinates: usize,
    pub converged: bool,
    /// A full-set sweep accepted no update while the gap was still
    /// above `epsilon`: the iteration reached its fixpoint at machine
    /// resolution and further epochs cannot change the state.
    pub stalled: bool,
    pub wall_time: Duration,
    pub trace: Vec<EpochTrace>,
}

impl SolverReport {
    /// Equality over everything a seed determines (wall time excluded).
    pub fn same_result(&self, other: &SolverReport) -> bool {
        self.alpha == other.alpha
            && self.objective == other.objective
            && self.kkt_gap == other.kkt_gap
            && self.epochs == other.epochs
            && self.updates == other.updates
            && self.shrink_events == other.shrink_events
            && self.converged == other.converged
            && self.stalled == other.stalled
    }
}

/// Exact single-variable solve on coordinate `i`, maintaining `u_aux`.
/// Returns the projected gradient seen before the update.
#[inline]
fn coordinate_step(
    problem: &DualProblem,
    i: usize,
    alpha: &mut Array1<f64>,
    u_aux: &mut Array1<f64>,
    updates: &mut u64,
) -> f64 {
    let upper_i = problem.upper[i];
    let grad = -problem.g_other.row(i).dot(u_aux) - 1.0;
    let pg = projected_gradient(alpha[i], grad, upper_i);
    if pg.abs() > PG_SKIP {
        let new = (alpha[i] - grad / problem.qbar_diag[i]).clamp(0.0, upper_i);
        let diff = new - alpha[i];
        if diff != 0.0 {
            alpha[i] = new;
            u_aux.scaled_add(-diff, &problem.q_t.row(i));
            *updates += 1;
        }
    }
    pg
}

#[cfg(debug_assertions)]
fn assert_u_maintenance(problem: &DualProblem, alpha: &Array1<f64>, u_aux: &Array1<f64>) {
    let fresh = problem.fresh_u(alpha.view());
    let drift = (&fresh - u_aux).mapv(f64::abs).sum();
    let scale = 1.0 + alpha.dot(alpha).sqrt();
    assert!(drift <= 1e-8 * scale, "u_aux drifted: {drift} vs scale {scale}");
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &DualProblem,
    alpha: Array1<f64>,
    kkt_gap: f64,
    epochs: usize,
    updates: u64,
    shrink_events: usize,
    skipped: usize,
    converged: bool,
    stalled: bool,
    start: Instant,
    trace: Vec<EpochTrace>,
) -> SolverReport {
    let objective = problem.objective(alpha.view());
    SolverReport {
        alpha,
        objective,
        kkt_gap,
        epochs,
        updates,
        shrink_events,
        skipped_coordinates: skipped,
        converged,
        stalled,
        wall_time: start.elapsed(),
        trace,
    }
}

/// Cyclic coordinate descent: sweep all variables in index order until
/// the largest projected-gradient magnitude over a sweep drops below
/// `epsilon`.
pub fn solve_plain(problem: &DualProblem, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let start = Instant::now();
    let m = problem.len();
    let skipped = problem.qbar_diag.iter().filter(|&&d| d <= 0.0).count();
    let mut alpha = Array1::zeros(m);
    let mut u_aux = Array1::zeros(problem.q_t.ncols());
    let mut updates = 0u64;
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut stalled = false;
    let mut epochs = 0;

    for epoch in 0..config.max_epochs {
        epochs = epoch + 1;
        let updates_before = updates;
        let mut max_abs_pg: f64 = 0.0;
        for i in 0..m {
            if problem.qbar_diag[i] <= 0.0 {
                continue;
            }
            let pg = coordinate_step(problem, i, &mut alpha, &mut u_aux, &mut updates);
            max_abs_pg = max_abs_pg.max(pg.abs());
        }
        gap = max_abs_pg;
        if config.trace {
            trace.push(EpochTrace {
                epoch: epochs,
                objective: problem.objective(alpha.view()),
                kkt_gap: gap,
                active_set_size: m,
            });
        }
        if gap < config.epsilon {
            converged = true;
            break;
        }
        // a sweep that accepted nothing is a fixpoint: every further
        // sweep would replay it identically
        if updates == updates_before {
            stalled = true;
            break;
        }
    }

    #[cfg(debug_assertions)]
    assert_u_maintenance(problem, &alpha, &u_aux);
    Ok(finish(
        problem, alpha, gap, epochs, updates, 0, skipped, converged, stalled, start, trace,
    ))
}

/// Randomized coordinate descent with heuristic shrinking: variables
/// pinned at a bound with a gradient beyond the previous sweep's bounds
/// are dropped from the active set; once a shrunken set converges the
/// full set is restored, and the solver only terminates when a full-set
/// sweep satisfies `M - m < epsilon`.
pub fn solve_shrinking(problem: &DualProblem, config: &SolverConfig) -> Result<SolverReport> {
    config.validate()?;
    let start = Instant::now();
    let m = problem.len();
    let skipped = problem.qbar_diag.iter().filter(|&&d| d <= 0.0).count();
    let mut alpha = Array1::zeros(m);
    let mut u_aux = Array1::zeros(problem.q_t.ncols());
    let mut index: Vec<usize> = (0..m).collect();
    let mut active = m;
    // bounds from the previous sweep, with the sign guards applied
    let mut shrink_hi = f64::INFINITY;
    let mut shrink_lo = f64::NEG_INFINITY;
    let mut updates = 0u64;
    let mut shrink_events = 0usize;
    let mut trace = Vec::new();
    let mut gap = f64::INFINITY;
    let mut converged = false;
    let mut stalled = false;
    let mut epochs = 0;

    for epoch in 0..config.max_epochs {
        epochs = epoch + 1;
        let updates_before = updates;
        let sweep_was_full = active == m;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(epoch as u64));
        index[..active].shuffle(&mut rng);

        let mut sweep_max = f64::NEG_INFINITY;
        let mut sweep_min = f64::INFINITY;
        let mut s = 0usize;
        while s < active {
            let i = index[s];
            if problem.qbar_diag[i] <= 0.0 {
                s += 1;
                continue;
            }
            let upper_i = problem.upper[i];
            let grad = -problem.g_other.row(i).dot(&u_aux) - 1.0;
            if alpha[i] == 0.0 {
                if grad > shrink_hi {
                    active -= 1;
                    index.swap(s, active);
                    shrink_events += 1;
                    continue;
                }
            } else if alpha[i] == upper_i {
                if grad < shrink_lo {
                    active -= 1;
                    index.swap(s, active);
                    shrink_events += 1;
                    continue;
                }
            }
            let pg = projected_gradient(alpha[i], grad, upper_i);
            sweep_max = sweep_max.max(pg);
            sweep_min = sweep_min.min(pg);
            if pg.abs() > PG_SKIP {
                let new = (alpha[i] - grad / problem.qbar_diag[i]).clamp(0.0, upper_i);
                let diff = new - alpha[i];
                if diff != 0.0 {
                    alpha[i] = new;
                    u_aux.scaled_add(-diff, &problem.q_t.row(i));
                    updates += 1;
                }
            }
            s += 1;
        }

        gap = if sweep_max == f64::NEG_INFINITY { 0.0 } else { sweep_max - sweep_min };
        if config.trace {
            trace.push(EpochTrace {
                epoch: epochs,
                objective: problem.objective(alpha.view()),
                kkt_gap: gap,
                active_set_size: active,
            });
        }
        if gap < config.epsilon {
            if sweep_was_full && active == m {
                converged = true;
                break;
            }
            // final full-set pass: bring every variable back and verify
            active = m;
            shrink_hi = f64::INFINITY;
            shrink_lo = f64::NEG_INFINITY;
            continue;
        }
        if updates == updates_before {
            // nothing moved: a full-set fixpoint terminates, a shrunken
            // one gets the full-set verification first
            if sweep_was_full && active == m {
                stalled = true;
                break;
            }
            active = m;
            shrink_hi = f64::INFINITY;
            shrink_lo = f64::NEG_INFINITY;
            continue;
        }
        shrink_hi = if sweep_max <= 0.0 { f64::INFINITY } else { sweep_max };
        shrink_lo = if sweep_min >= 0.0 { f64::NEG_INFINITY } else { sweep_min };
    }

    #[cfg(debug_assertions)]
    assert_u_maintenance(problem, &alpha, &u_aux);
    Ok(finish(
        problem,
        alpha,
        gap,
        epochs,
        updates,
        shrink_events,
        skipped,
        converged,
        stalled,
        start,
        trace,
    ))
}

/// Convenience dispatch on `config.shrinking`.
pub fn solve(problem: &DualProblem, config: &SolverConfig) -> Result<SolverReport> {
    if config.shrinking {
        solve_shrinking(problem, config)
    } else {
        solve_plain(problem, config)
    }
}

/// KKT gap the oracle must certify before returning.
const ORACLE_TOL: f64 = 1e-9;
const ORACLE_MAX_ITERS: usize = 400_000;

fn oracle_kkt_gap(x: &Array1<f64>, grad: &Array1<f64>, upper: ArrayView1<'_, f64>) -> f64 {
    x.iter()
        .zip(grad.iter())
        .zip(upper.iter())
        .map(|((&xi, &gi), &ui)| projected_gradient(xi, gi, ui).abs())
        .fold(0.0, f64::max)
}

fn power_iteration_lmax(qbar: ArrayView2<'_, f64>) -> f64 {
    let m = qbar.nrows();
    let mut v = Array1::from_shape_fn(m, |i| 1.0 + (i as f64) / (m as f64 + 1.0));
    let mut lmax = 0.0;
    for _ in 0..80 {
        let w = qbar.dot(&v);
        let norm = w.dot(&w).sqrt();
        if norm <= f64::MIN_POSITIVE {
            break;
        }
        v = w / norm;
        lmax = v.dot(&qbar.dot(&v));
    }
    lmax.max(qbar.diag().iter().cloned().fold(0.0, f64::max))
}

/// Direct solve on the unclipped coordinates, used to polish the
/// projected-gradient iterate. Returns a candidate or `None` when the
/// reduced system is not positive definite.
fn active_set_polish(
    qbar: ArrayView2<'_, f64>,
    linear: ArrayView1<'_, f64>,
    upper: ArrayView1<'_, f64>,
    x: &Array1<f64>,
    grad: &Array1<f64>,
) -> Option<Array1<f64>> {
    let m = x.len();
    let free: Vec<usize> = (0..m)
        .filter(|&i| {
            let at_lo = x[i] <= 0.0 && grad[i] > 0.0;
            let at_hi = x[i] >= upper[i] && grad[i] < 0.0;
            upper[i] > 0.0 && !at_lo && !at_hi
        })
        .collect();
    if free.is_empty() {
        return Some(x.clone());
    }
    let mut is_free = vec![false; m];
    for &i in &free {
        is_free[i] = true;
    }
    let f = free.len();
    let mut reduced = Array2::zeros((f, f));
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            reduced[[a, b]] = qbar[[i, j]];
        }
    }
    let mut rhs = Array1::zeros(f);
    for (a, &i) in free.iter().enumerate() {
        let mut v = linear[i];
        for j in 0..m {
            if !is_free[j] {
                v -= qbar[[i, j]] * x[j];
            }
        }
        rhs[a] = v;
    }
    let sym = (&reduced + &reduced.t()) * 0.5;
    let factor = crate::kernel::spd_solve_factor(sym.view(), 0.0, &[0.0, 1e-12]).ok()?;
    let sol = factor.solve(rhs.view());
    let mut candidate = x.clone();
    for (a, &i) in free.iter().enumerate() {
        candidate[i] = sol[a].clamp(0.0, upper[i]);
    }
    Some(candidate)
}

/// Independent verification oracle: projected gradient descent with a
/// fixed `1/L` step (plus periodic direct polish of the free subspace),
/// returning only once its own KKT gap is below `1e-9`. Deliberately a
/// different algorithm family than the coordinate-descent solvers.
pub fn brute_force_oracle(
    qbar: ArrayView2<'_, f64>,
    linear: ArrayView1<'_, f64>,
    upper: ArrayView1<'_, f64>,
) -> Result<(Array1<f64>, f64)> {
    let m = qbar.nrows();
    if m == 0 || qbar.ncols() != m || linear.len() != m || upper.len() != m {
        return Err(Error::invalid("oracle inputs disagree on dimension"));
    }
    if upper.iter().any(|&u| u < 0.0 || !u.is_finite()) {
        return Err(Error::invalid("oracle box bounds must be finite and non-negative"));
    }
    let lmax = power_iteration_lmax(qbar);
    let step = if lmax > 0.0 { 1.0 / (1.05 * lmax) } else { 1.0 };
    let objective = |x: &Array1<f64>, grad: &Array1<f64>| {
        // Qx = grad + e, so f = 1/2 x.grad + 1/2 x.e - x.e
        0.5 * x.dot(grad) - 0.5 * x.dot(&linear)
    };

    let mut x: Array1<f64> = Array1::zeros(m);
    let mut grad = -linear.to_owned();
    for iter in 0..ORACLE_MAX_ITERS {
        if oracle_kkt_gap(&x, &grad, upper) < ORACLE_TOL {
            return Ok((x.clone(), objective(&x, &grad)));
        }
        if iter % 100 == 99 {
            if let Some(candidate) = active_set_polish(qbar, linear, upper, &x, &grad) {
                let cand_grad = qbar.dot(&candidate) - &linear;
                if objective(&candidate, &cand_grad) <= objective(&x, &grad) + 1e-15 {
                    x = candidate;
                    grad = cand_grad;
                    continue;
                }
            }
        }
        for i in 0..m {
            x[i] = (x[i] - step * grad[i]).clamp(0.0, upper[i]);
        }
        grad = qbar.dot(&x) - &linear;
    }
    Err(Error::NonConvergence {
        epochs: ORACLE_MAX_ITERS,
        gap: oracle_kkt_gap(&x, &grad, upper),
        epsilon: ORACLE_TOL,
    })
}

/// Per-epoch trace rows as CSV with columns
/// `plane,epoch,objective,kkt_gap,active_set_size`.
pub fn write_trace_csv(
    traces: &[(&str, &[EpochTrace])],
    path: impl AsRef<std::path::Path>,
) -> Result<()> {
    use std::fmt::Write as _;
    let path = path.as_ref();
    let mut out = String::from("plane,epoch,objective,kkt_gap,active_set_size\n");
    for (plane, rows) in traces {
        for row in *rows {
            let _ = writeln!(
                out,
                "{plane},{},{},{},{}",
                row.epoch, row.objective, row.kkt_gap, row.active_set_size
            );
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn tight() -> SolverConfig {
        SolverConfig { epsilon: 1e-8, ..SolverConfig::default() }
    }

    /// Random strictly convex box problem: `Qbar = A^T A + 0.1 I`,
    /// bounds uniform in `[0, hi]`.
    fn random_problem(seed: u64, m: usize, hi: f64) -> DualProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((m, m), |_| rng.gen_range(-1.0..1.0));
        let mut qbar = a.t().dot(&a);
        for i in 0..m {
            qbar[[i, i]] += 0.1;
        }
        let upper = Array1::from_shape_fn(m, |_| rng.gen_range(0.0..hi));
        DualProblem::from_dense(qbar, upper).unwrap()
    }

    #[test]
    fn projected_gradient_three_cases() {
        assert_eq!(projected_gradient(0.0, 3.0, 10.0), 0.0);
        assert_eq!(projected_gradient(0.0, -3.0, 10.0), -3.0);
        assert_eq!(projected_gradient(10.0, 3.0, 10.0), 3.0);
        assert_eq!(projected_gradient(10.0, -3.0, 10.0), 0.0);
        assert_eq!(projected_gradient(5.0, -3.0, 10.0), -3.0);
        // collapsed box never moves
        assert_eq!(projected_gradient(0.0, -3.0, 0.0), 0.0);
    }

    #[cfg(debug_assertions)]
    #[test]
    #[should_panic(expected = "outside")]
    fn projected_gradient_rejects_out_of_box() {
        projected_gradient(11.0, 1.0, 10.0);
    }

    #[test]
    fn single_coordinate_update_is_the_analytic_minimizer() {
        // Qbar = 2, alpha = 0, grad = -1 (e term), upper = 10 -> 0.5
        let problem = DualProblem::from_dense(array![[2.0]], array![10.0]).unwrap();
        let mut alpha = Array1::<f64>::zeros(1);
        let mut u_aux = Array1::<f64>::zeros(1);
        let mut updates = 0;
        let pg = coordinate_step(&problem, 0, &mut alpha, &mut u_aux, &mut updates);
        assert_abs_diff_eq!(pg, -1.0);
        assert_abs_diff_eq!(alpha[0], 0.5);
        assert_eq!(updates, 1);
        // now at the interior optimum: projected gradient is zero and
        // nothing moves
        let pg = coordinate_step(&problem, 0, &mut alpha, &mut u_aux, &mut updates);
        assert_abs_diff_eq!(pg, 0.0);
        assert_eq!(updates, 1);
    }

    #[test]
    fn collapsed_box_coordinate_never_moves() {
        let problem =
            DualProblem::from_dense(array![[2.0, 0.0], [0.0, 2.0]], array![0.0, 10.0]).unwrap();
        let report = solve_plain(&problem, &SolverConfig::default()).unwrap();
        assert_eq!(report.alpha[0], 0.0);
        assert_abs_diff_eq!(report.alpha[1], 0.5);
        assert!(report.converged);
    }

    #[test]
    fn separable_two_variable_problem_in_one_epoch() {
        let problem =
            DualProblem::from_dense(array![[2.0, 0.0], [0.0, 2.0]], array![10.0, 10.0]).unwrap();
        let report = solve_plain(&problem, &tight()).unwrap();
        assert_abs_diff_eq!(report.alpha[0], 0.5);
        assert_abs_diff_eq!(report.alpha[1], 0.5);
        assert_abs_diff_eq!(report.objective, -0.5);
        assert!(report.converged);
        assert_eq!(report.updates, 2);

        let shrunk = solve_shrinking(&problem, &tight()).unwrap();
        assert_abs_diff_eq!(shrunk.alpha[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(shrunk.objective, -0.5, epsilon = 1e-12);
    }

    #[test]
    fn all_zero_bounds_converges_immediately() {
        let problem =
            DualProblem::from_dense(array![[2.0, 0.1], [0.1, 2.0]], array![0.0, 0.0]).unwrap();
        for report in [
            solve_plain(&problem, &SolverConfig::default()).unwrap(),
            solve_shrinking(&problem, &SolverConfig::default()).unwrap(),
        ] {
            assert!(report.converged);
            assert_eq!(report.alpha, Array1::<f64>::zeros(2));
            assert_eq!(report.epochs, 1);
            assert_eq!(report.objective, 0.0);
        }
    }

    #[test]
    fn oracle_analytic_one_variable() {
        let (x, f) =
            brute_force_oracle(array![[2.0]].view(), array![1.0].view(), array![10.0].view())
                .unwrap();
        assert_abs_diff_eq!(x[0], 0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(f, -0.25, epsilon = 1e-12);
        // bound-clipped
        let (x, _) =
            brute_force_oracle(array![[2.0]].view(), array![1.0].view(), array![0.3].view())
                .unwrap();
        assert_abs_diff_eq!(x[0], 0.3, epsilon = 1e-9);
    }

    #[test]
    fn solvers_match_oracle_on_random_problems() {
        let e = Array1::<f64>::ones(15);
        for seed in 0..20u64 {
            let problem = random_problem(seed, 15, 2.0);
            let qbar = problem.dense_qbar();
            let (_, f_oracle) =
                brute_force_oracle(qbar.view(), e.view(), problem.upper()).unwrap();
            let cfg = SolverConfig { epsilon: 1e-6, ..SolverConfig::default() };
            let plain = solve_plain(&problem, &cfg).unwrap();
            let shrunk = solve_shrinking(&problem, &cfg).unwrap();
            assert!(plain.converged && shrunk.converged);
            assert!((plain.objective - f_oracle).abs() <= 1e-6, "seed {seed}");
            assert!((shrunk.objective - f_oracle).abs() <= 1e-6, "seed {seed}");
        }
    }

    #[test]
    fn shrinking_fires_and_agrees_with_plain() {
        // tiny bounds rail most variables, making shrinking productive
        let problem = random_problem(99, 25, 0.05);
        let cfg = SolverConfig { epsilon: 1e-6, ..SolverConfig::default() };
        let plain = solve_plain(&problem, &cfg).unwrap();
        let shrunk = solve_shrinking(&problem, &cfg).unwrap();
        assert!(shrunk.shrink_events > 0, "no shrink events");
        assert!((plain.objective - shrunk.objective).abs() <= 1e-6);
        let max_diff = (&plain.alpha - &shrunk.alpha)
            .iter()
            .fold(0.0f64, |acc, d| acc.max(d.abs()));
        assert!(max_diff <= 1e-4, "alpha mismatch {max_diff}");
    }

    #[test]
    fn reported_gap_is_below_epsilon_on_convergence() {
        for eps in [1e-4, 1e-6] {
            let problem = random_problem(7, 12, 1.0);
            let cfg = SolverConfig { epsilon: eps, ..SolverConfig::default() };
            for report in
                [solve_plain(&problem, &cfg).unwrap(), solve_shrinking(&problem, &cfg).unwrap()]
            {
                assert!(report.converged);
                assert!(report.kkt_gap < eps);
            }
        }
    }

    #[test]
    fn plain_solution_satisfies_kkt_from_scratch() {
        let problem = random_problem(21, 18, 1.5);
        let cfg = SolverConfig { epsilon: 1e-6, ..SolverConfig::default() };
        let report = solve_plain(&problem, &cfg).unwrap();
        let qbar = problem.dense_qbar();
        let grad = qbar.dot(&report.alpha) - &Array1::<f64>::ones(18);
        let gap = oracle_kkt_gap(&report.alpha, &grad, problem.upper());
        assert!(gap <= 1e-6, "kkt gap {gap}");
    }

    #[test]
    fn non_convergence_is_reported_not_fatal() {
        let problem = random_problem(3, 20, 2.0);
        let cfg = SolverConfig { epsilon: 1e-12, max_epochs: 2, ..SolverConfig::default() };
        let report = solve_plain(&problem, &cfg).unwrap();
        assert!(!report.converged);
        assert_eq!(report.epochs, 2);
    }

    #[test]
    fn traced_objective_never_increases_across_epochs() {
        let problem = random_problem(11, 20, 1.0);
        let cfg = SolverConfig { epsilon: 1e-8, trace: true, ..SolverConfig::default() };
        for report in
            [solve_plain(&problem, &cfg).unwrap(), solve_shrinking(&problem, &cfg).unwrap()]
        {
            assert!(!report.trace.is_empty());
            for w in report.trace.windows(2) {
                assert!(w[1].objective <= w[0].objective + 1e-12);
            }
        }
    }

    #[test]
    fn objective_decreases_after_every_single_update() {
        let problem = random_problem(5, 8, 1.0);
        let mut alpha = Array1::<f64>::zeros(8);
        let mut u_aux = Array1::<f64>::zeros(8);
        let mut updates = 0;
        let mut last = problem.objective(alpha.view());
        for _ in 0..4 {
            for i in 0..8 {
                let before = updates;
                coordinate_step(&problem, i, &mut alpha, &mut u_aux, &mut updates);
                let f = problem.objective(alpha.view());
                if updates > before {
                    assert!(f < last + 1e-15, "objective rose after an update");
                }
                assert!(f <= last + 1e-15);
                last = f;
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_report() {
        let problem = random_problem(13, 16, 1.0);
        let cfg = SolverConfig { epsilon: 1e-6, seed: 42, ..SolverConfig::default() };
        let a = solve_shrinking(&problem, &cfg).unwrap();
        let b = solve_shrinking(&problem, &cfg).unwrap();
        assert!(a.same_result(&b));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        // final objective is independent of the sweep-order seed, and the
        // iterates stay inside the box
        #[test]
        fn seed_independent_objective_and_feasibility(seed in 0u64..500, sweep_seed in 0u64..100) {
            let problem = random_problem(seed, 10, 1.0);
            let base = solve_shrinking(
                &problem,
                &SolverConfig { epsilon: 1e-6, seed: 0, ..SolverConfig::default() },
            ).unwrap();
            let other = solve_shrinking(
                &problem,
                &SolverConfig { epsilon: 1e-6, seed: sweep_seed, ..SolverConfig::default() },
            ).unwrap();
            prop_assert!((base.objective - other.objective).abs() <= 1e-6);
            for (i, &a) in other.alpha.iter().enumerate() {
                prop_assert!(a >= 0.0 && a <= problem.upper()[i]);
            }
        }
    }
}
