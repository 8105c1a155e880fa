//! Cross-validation, exhaustive grid search, accuracy statistics, and
//! solver timing comparisons.
//!
//! Grid search follows the two-stage protocol: hyperparameters are
//! scored by k-fold cross-validation on a random 30% subsample, then the
//! winning configuration is reported for a full-data run. Cells tie the
//! weights `c1 = c2` and `c3 = c4` (`c1 = c2` only for the baseline).

use std::fmt::Write as _;
use std::ops::RangeInclusive;
use std::path::Path;
use std::time::{Duration, Instant};

use ndarray::Array1;
use rayon::prelude::*;

use crate::data::{make_folds, Dataset, FoldPlan};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::model::{
    self, train, TrainConfig, TrainMode, TrainedModel,
};
use crate::solver::{brute_force_oracle, solve_plain, solve_shrinking};

/// Exponent ranges for the `2^i` hyperparameter grids.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub c_exponents: RangeInclusive<i32>,
    pub g_exponents: RangeInclusive<i32>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { c_exponents: -8..=8, g_exponents: -4..=4 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.c_exponents.is_empty() || self.g_exponents.is_empty() {
            return Err(Error::invalid("grid exponent ranges must be nonempty"));
        }
        Ok(())
    }

    /// Number of cells for the given kernel and mode.
    pub fn cell_count(&self, kernel: &KernelSpec, mode: TrainMode) -> usize {
        let n_c = self.c_exponents.clone().count();
        let n_g = if kernel.is_gaussian() { self.g_exponents.clone().count() } else { 1 };
        match mode {
            TrainMode::FrTsvm => n_c * n_c * n_g,
            TrainMode::Tsvm => n_c * n_g,
        }
    }
}

/// Cross-validation summary. Accuracies are percentages.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub per_fold: Vec<f64>,
    pub mean_train_time: Duration,
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Percentage of correctly labeled instances.
pub fn accuracy(model: &TrainedModel, data: &Dataset) -> Result<f64> {
    let mut correct = 0usize;
    for i in 0..data.len() {
        if model.predict(data.row(i))? == data.labels()[i] {
            correct += 1;
        }
    }
    Ok(100.0 * correct as f64 / data.len() as f64)
}

/// Fold plan whose training folds all contain both classes; the seed is
/// bumped up to ten times before giving up.
fn folds_with_both_classes(data: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    for attempt in 0..10u64 {
        let plan = make_folds(data.len(), k, seed.wrapping_add(attempt))?;
        let ok = (0..k).all(|f| {
            let idx = plan.train_indices(f);
            idx.iter().any(|&i| data.labels()[i] == 1)
                && idx.iter().any(|&i| data.labels()[i] == -1)
        });
        if ok {
            return Ok(plan);
        }
    }
    Err(Error::invalid(
        "could not build folds with both classes in every training fold",
    ))
}

pub(crate) fn cross_validate_with<F>(
    data: &Dataset,
    k: usize,
    seed: u64,
    trainer: F,
) -> Result<CvResult>
where
    F: Fn(&Dataset) -> Result<TrainedModel>,
{
    let plan = folds_with_both_classes(data, k, seed)?;
    let mut per_fold = Vec::with_capacity(k);
    let mut total_train = Duration::ZERO;
    for f in 0..k {
        let train_set = data.select(&plan.train_indices(f));
        let test_set = data.select(&plan.test_indices(f));
        let t0 = Instant::now();
        let model = trainer(&train_set)?;
        total_train += t0.elapsed();
        per_fold.push(accuracy(&model, &test_set)?);
    }
    let (mean_accuracy, std_accuracy) = mean_std(&per_fold);
    Ok(CvResult {
        mean_accuracy,
        std_accuracy,
        per_fold,
        mean_train_time: total_train / k as u32,
    })
}

/// k-fold cross-validation: the scaler and memberships are refit on
/// every training fold; the held-out fold is never seen before scoring.
pub fn cross_validate(
    data: &Dataset,
    config: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<CvResult> {
    config.validate()?;
    cross_validate_with(data, k, seed, |fold| train(fold, config).map(|(m, _)| m))
}

/// One scored grid cell. `g` is absent for the linear kernel and `c3`
/// for the baseline mode (whose boxes come from `c1`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub c1: f64,
    pub c3: Option<f64>,
    pub g: Option<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: TrainConfig,
    pub best_cell: GridCell,
    pub table: Vec<GridCell>,
    /// Rows of the original dataset the 30% subsample kept.
    pub subsample_indices: Vec<usize>,
    /// Cells whose training failed (scored as 0% accuracy).
    pub failed_cells: usize,
}

fn pow2(exps: &RangeInclusive<i32>) -> Vec<f64> {
    exps.clone().map(|i| (i as f64).exp2()).collect()
}

/// Random 30% subsample (at least `k`, at most `l`) containing both
/// classes; the seed is bumped up to ten times to achieve coverage.
fn subsample_indices(data: &Dataset, k: usize, seed: u64) -> Result<Vec<usize>> {
    let l = data.len();
    let n_sub = ((0.3 * l as f64).ceil() as usize).clamp(k.min(l), l);
    for attempt in 0..10u64 {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..l).collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt));
        order.shuffle(&mut rng);
        let picked: Vec<usize> = order[..n_sub].to_vec();
        let has = |y: i8| picked.iter().any(|&i| data.labels()[i] == y);
        if has(1) && has(-1) {
            return Ok(picked);
        }
    }
    Err(Error::invalid("could not draw a subsample containing both classes"))
}

/// Exhaustive grid search over `2^i` weights (and Gaussian widths),
/// scored by k-fold cross-validation on a 30% subsample. Ties break
/// toward smaller `c3`, then `c1`, then `g`. The per-cell work shares
/// the fold preparation (scaling, Gram, memberships, normal matrices)
/// across every `c` cell, which is exactly equivalent to calling
/// [`cross_validate`] per cell.
pub fn grid_search(
    data: &Dataset,
    grid: &GridSpec,
    base: &TrainConfig,
    k: usize,
    seed: u64,
) -> Result<GridSearchResult> {
    grid.validate()?;
    base.validate()?;
    let subsample = subsample_indices(data, k, seed)?;
    let sub = data.select(&subsample);
    let plan = folds_with_both_classes(&sub, k, seed)?;

    let c_grid = pow2(&grid.c_exponents);
    let g_grid: Vec<Option<f64>> = if base.kernel.is_gaussian() {
        pow2(&grid.g_exponents).into_iter().map(Some).collect()
    } else {
        vec![None]
    };
    let c3_grid: Vec<Option<f64>> = match base.mode {
        TrainMode::FrTsvm => c_grid.iter().copied().map(Some).collect(),
        TrainMode::Tsvm => vec![None],
    };
    let (n_c1, n_c3, n_g) = (c_grid.len(), c3_grid.len(), g_grid.len());

    let folds: Vec<(Dataset, Dataset)> = (0..k)
        .map(|f| (sub.select(&plan.train_indices(f)), sub.select(&plan.test_indices(f))))
        .collect();
    let units: Vec<(usize, usize)> =
        (0..n_g).flat_map(|gi| (0..k).map(move |f| (gi, f))).collect();

    // per unit: accuracy for every (c1, c3) cell, or a training failure
    // scored as zero
    let unit_scores: Vec<Vec<f64>> = units
        .par_iter()
        .map(|&(gi, f)| -> Result<Vec<f64>> {
            let (train_fold, test_fold) = &folds[f];
            let mut config = base.clone();
            if let Some(g) = g_grid[gi] {
                config.kernel = KernelSpec::Gaussian { width: g };
            }
            let prep = model::prepare(train_fold, &config)?;
            let mut scores = vec![0.0; n_c1 * n_c3];
            for (i1, &c1) in c_grid.iter().enumerate() {
                config.c1 = c1;
                config.c2 = c1;
                let factors = match model::build_dual_factors(&prep, &config) {
                    Ok(f) => f,
                    Err(_) => {
                        for i3 in 0..n_c3 {
                            scores[i1 * n_c3 + i3] = f64::NAN;
                        }
                        continue;
                    }
                };
                let (base_plus, base_minus) =
                    model::dual_problems(&prep, &factors, &config)?;
                for (i3, c3) in c3_grid.iter().enumerate() {
                    if let Some(c3) = *c3 {
                        config.c3 = c3;
                        config.c4 = c3;
                    }
                    // only the boxes change within a c1 row
                    let (upper_plus, upper_minus) = model::boxes(&prep, &config);
                    let attempt = base_plus
                        .with_upper(upper_plus)
                        .and_then(|pp| Ok((pp, base_minus.with_upper(upper_minus)?)))
                        .and_then(|(pp, pm)| {
                            model::solve_with_problems(&prep, &factors, &pp, &pm, &config)
                        });
                    let score = match attempt {
                        Ok((m, _)) => accuracy(&m, test_fold)?,
                        Err(
                            Error::NonConvergence { .. }
                            | Error::Degenerate(_)
                            | Error::Factorization(_),
                        ) => f64::NAN,
                        Err(other) => return Err(other),
                    };
                    scores[i1 * n_c3 + i3] = score;
                }
            }
            Ok(scores)
        })
        .collect::<Result<_>>()?;

    let mut table = Vec::with_capacity(n_c1 * n_c3 * n_g);
    let mut failed_cells = 0usize;
    for (i1, &c1) in c_grid.iter().enumerate() {
        for (i3, &c3) in c3_grid.iter().enumerate() {
            for (gi, &g) in g_grid.iter().enumerate() {
                let fold_scores: Vec<f64> = (0..k)
                    .map(|f| unit_scores[gi * k + f][i1 * n_c3 + i3])
                    .collect();
                let failed = fold_scores.iter().any(|s| s.is_nan());
                let fold_scores: Vec<f64> = if failed {
                    failed_cells += 1;
                    vec![0.0; k]
                } else {
                    fold_scores
                };
                let (mean_accuracy, std_accuracy) = mean_std(&fold_scores);
                table.push(GridCell { c1, c3, g, mean_accuracy, std_accuracy });
            }
        }
    }

    let best_cell = table
        .iter()
        .cloned()
        .reduce(|best, cell| if cell_beats(&cell, &best) { cell } else { best })
        .expect("grid is nonempty");
    let mut best = base.clone();
    best.c1 = best_cell.c1;
    best.c2 = best_cell.c1;
    if let Some(c3) = best_cell.c3 {
        best.c3 = c3;
        best.c4 = c3;
    }
    if let Some(g) = best_cell.g {
        best.kernel = KernelSpec::Gaussian { width: g };
    }
    Ok(GridSearchResult { best, best_cell, table, subsample_indices: subsample, failed_cells })
}

/// Strictly-better comparison with the documented tie order.
fn cell_beats(cell: &GridCell, best: &GridCell) -> bool {
    if cell.mean_accuracy != best.mean_accuracy {
        return cell.mean_accuracy > best.mean_accuracy;
    }
    let key = |c: &GridCell| {
        (
            c.c3.unwrap_or(f64::NEG_INFINITY),
            c.c1,
            c.g.unwrap_or(f64::NEG_INFINITY),
        )
    };
    let (a, b) = (key(cell), key(best));
    (a.0, a.1, a.2) < (b.0, b.1, b.2)
}

/// Mean wall time of the two dual solves per method.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: String,
    pub mean_seconds: f64,
    pub repetitions: usize,
}

/// Time the shrinking solver, the plain solver, and the verification
/// oracle on the same pair of duals. Each method gets one discarded
/// warm-up run; the clock is monotonic.
pub fn timing_compare(
    data: &Dataset,
    config: &TrainConfig,
    repetitions: usize,
) -> Result<Vec<TimingRow>> {
    if repetitions < 3 {
        return Err(Error::invalid("need at least 3 repetitions"));
    }
    config.validate()?;
    let prep = model::prepare(data, config)?;
    let factors = model::build_dual_factors(&prep, config)?;
    let (problem_plus, problem_minus) = model::dual_problems(&prep, &factors, config)?;
    let dense_plus = problem_plus.dense_qbar();
    let dense_minus = problem_minus.dense_qbar();
    let e_plus = Array1::ones(problem_plus.len());
    let e_minus = Array1::ones(problem_minus.len());

    let mut rows = Vec::new();
    let mut run = |method: &str, runner: &dyn Fn() -> Result<()>| -> Result<()> {
        runner()?; // warm-up, discarded
        let mut total = 0.0;
        for _ in 0..repetitions {
            let t0 = Instant::now();
            runner()?;
            total += t0.elapsed().as_secs_f64();
        }
        rows.push(TimingRow {
            method: method.to_string(),
            mean_seconds: total / repetitions as f64,
            repetitions,
        });
        Ok(())
    };

    run("shrinking", &|| {
        solve_shrinking(&problem_plus, &config.solver)?;
        solve_shrinking(&problem_minus, &config.solver)?;
        Ok(())
    })?;
    run("plain", &|| {
        solve_plain(&problem_plus, &config.solver)?;
        solve_plain(&problem_minus, &config.solver)?;
        Ok(())
    })?;
    run("oracle", &|| {
        brute_force_oracle(dense_plus.view(), e_plus.view(), problem_plus.upper())?;
        brute_force_oracle(dense_minus.view(), e_minus.view(), problem_minus.upper())?;
        Ok(())
    })?;
    Ok(rows)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Grid table as CSV with columns `c1,c3,g,mean_accuracy,std_accuracy`
/// (empty `g` for the linear kernel, empty `c3` for the baseline).
pub fn write_grid_csv(result: &GridSearchResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("c1,c3,g,mean_accuracy,std_accuracy\n");
    for cell in &result.table {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            cell.c1,
            fmt_opt(cell.c3),
            fmt_opt(cell.g),
            cell.mean_accuracy,
            cell.std_accuracy
        );
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Per-fold accuracies as CSV with columns `fold,accuracy`.
pub fn write_cv_csv(result: &CvResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("fold,accuracy\n");
    for (f, acc) in result.per_fold.iter().enumerate() {
        let _ = writeln!(out, "{f},{acc}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Timing rows as CSV with columns `method,mean_seconds,repetitions`.
pub fn write_timing_csv(rows: &[TimingRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("method,mean_seconds,repetitions\n");
    for row in rows {
        let _ = writeln!(out, "{},{},{}", row.method, row.mean_seconds, row.repetitions);
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
