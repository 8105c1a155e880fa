//! Training and prediction for the twin-hyperplane models.
//!
//! `train` assembles the two box-constrained duals from the scaled data
//! and per-instance memberships, solves them by coordinate descent, and
//! recovers the primal hyperplanes. Plane `+` is fit to the positive
//! class and constrained by the negative instances (its dual variables
//! are indexed by the negative class), and vice versa; code below names
//! matrices by that own/other role.
//!
//! The pipeline is split into `prepare` (everything that depends only on
//! data and kernel), `build_dual_factors` (depends on the ridge weights)
//! and `solve_and_assemble` (depends on the box weights) so that grid
//! search can reuse the expensive stages across cells.

use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MinMaxScaler};
use crate::error::{Error, Result};
use crate::kernel::{
    augment_ones, build_q_factor_from_mtm, gram, GramBlock, KernelSpec, QFactor,
    DEFAULT_JITTER_SCHEDULE, TSVM_RIDGE,
};
use crate::membership::{
    membership_kernel_with_gram, membership_linear, MembershipParams, MembershipVector,
};
use crate::solver::{solve, DualProblem, SolverConfig, SolverReport};

/// Distances within this margin count as a tie, which goes to `+1`.
const TIE_EPS: f64 = 1e-12;
/// A recovered normal vector shorter than this rejects the model.
const MIN_NORMAL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    /// Fuzzy-membership weighted model with margin regularization.
    FrTsvm,
    /// Plain twin-SVM baseline: unit memberships, fixed 0.01 ridge.
    Tsvm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub kernel: KernelSpec,
    pub membership: MembershipParams,
    pub solver: SolverConfig,
    pub mode: TrainMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
            c4: 1.0,
            kernel: KernelSpec::Gaussian { width: 1.0 },
            membership: MembershipParams::default(),
            solver: SolverConfig::default(),
            mode: TrainMode::FrTsvm,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3), ("c4", self.c4)] {
            if c <= 0.0 || !c.is_finite() {
                return Err(Error::invalid(format!("{name} must be positive, got {c}")));
            }
        }
        self.kernel.validate()?;
        MembershipParams::new(self.membership.mu, self.membership.delta)?;
        self.solver.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w_plus: Array1<f64>,
    pub w_minus: Array1<f64>,
    pub b_plus: f64,
    pub b_minus: f64,
    pub scaler: MinMaxScaler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    /// Scaled training matrix; the decision function evaluates the
    /// kernel against every row.
    pub support: Array2<f64>,
    pub coeff_plus: Array1<f64>,
    pub coeff_minus: Array1<f64>,
    pub b_plus: f64,
    pub b_minus: f64,
    pub kernel: KernelSpec,
    /// `sqrt(w^T k(X, X^T) w)` per plane, fixed at training time.
    pub norm_plus: f64,
    pub norm_minus: f64,
    pub scaler: MinMaxScaler,
}

/// Either trained variant, ready to predict raw (unscaled) instances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Linear(LinearModel),
    Kernel(KernelModel),
}

fn choose_label(dist_plus: f64, dist_minus: f64) -> i8 {
    if dist_plus - dist_minus <= TIE_EPS {
        1
    } else {
        -1
    }
}

impl LinearModel {
    /// Normalized distances of a raw instance to the two planes.
    pub fn decision_distances(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        if x.len() != self.w_plus.len() {
            return Err(Error::invalid(format!(
                "instance has dimension {}, model expects {}",
                x.len(),
                self.w_plus.len()
            )));
        }
        let xs = self.scaler.transform_row(x);
        let dist = |w: &Array1<f64>, b: f64| (w.dot(&xs) + b).abs() / w.dot(w).sqrt();
        Ok((dist(&self.w_plus, self.b_plus), dist(&self.w_minus, self.b_minus)))
    }

    /// Label of the nearer plane; ties go to `+1`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<i8> {
        let (dp, dm) = self.decision_distances(x)?;
        Ok(choose_label(dp, dm))
    }
}

impl KernelModel {
    pub fn decision_distances(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        if x.len() != self.support.ncols() {
            return Err(Error::invalid(format!(
                "instance has dimension {}, model expects {}",
                x.len(),
                self.support.ncols()
            )));
        }
        let xs = self.scaler.transform_row(x);
        let k_row: Array1<f64> = self
            .support
            .rows()
            .into_iter()
            .map(|row| self.kernel.eval(xs.view(), row))
            .collect();
        let dist = |coeff: &Array1<f64>, b: f64, norm: f64| {
            (k_row.dot(coeff) + b).abs() / norm.max(MIN_NORMAL)
        };
        Ok((
            dist(&self.coeff_plus, self.b_plus, self.norm_plus),
            dist(&self.coeff_minus, self.b_minus, self.norm_minus),
        ))
    }

    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<i8> {
        let (dp, dm) = self.decision_distances(x)?;
        Ok(choose_label(dp, dm))
    }
}

impl TrainedModel {
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<i8> {
        match self {
            TrainedModel::Linear(m) => m.predict(x),
            TrainedModel::Kernel(m) => m.predict(x),
        }
    }

    pub fn decision_distances(&self, x: ArrayView1<'_, f64>) -> Result<(f64, f64)> {
        match self {
            TrainedModel::Linear(m) => m.decision_distances(x),
            TrainedModel::Kernel(m) => m.decision_distances(x),
        }
    }

    pub fn feature_dim(&self) -> usize {
        match self {
            TrainedModel::Linear(m) => m.w_plus.len(),
            TrainedModel::Kernel(m) => m.support.ncols(),
        }
    }
}

/// Everything reported alongside a trained model.
#[derive(Debug, Clone)]
pub struct TrainDiagnostics {
    pub report_plus: SolverReport,
    pub report_minus: SolverReport,
    pub jitter_plus: f64,
    pub jitter_minus: f64,
    /// Relative residuals of the primal-recovery equations.
    pub stationarity_plus: f64,
    pub stationarity_minus: f64,
    pub memberships: MembershipVector,
}

/// Data-and-kernel dependent stage, reusable across ridge and box
/// weights.
pub(crate) struct PreparedTraining {
    pub mode: TrainMode,
    pub kernel: KernelSpec,
    pub scaler: MinMaxScaler,
    pub scaled: Dataset,
    /// Augmented own-class matrices: `[X+, e]` / `[S+, e]` and the
    /// negative counterparts.
    pub g_plus: Array2<f64>,
    pub g_minus: Array2<f64>,
    pub mtm_plus: Array2<f64>,
    pub mtm_minus: Array2<f64>,
    pub memberships: MembershipVector,
    /// Full training Gram (kernel mode only), for the decision norms.
    pub gram_xx: Option<GramBlock>,
}

pub(crate) fn prepare(train: &Dataset, config: &TrainConfig) -> Result<PreparedTraining> {
    prepare_with(train, config, None)
}

/// `prepare` with an optional membership override (tests use it to pin
/// weights).
pub(crate) fn prepare_with(
    train: &Dataset,
    config: &TrainConfig,
    memberships: Option<MembershipVector>,
) -> Result<PreparedTraining> {
    config.validate()?;
    let scaler = MinMaxScaler::fit(train);
    let scaled = scaler.apply(train);
    let (pos, neg) = scaled.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("training data must contain both classes"));
    }

    let (g_plus, g_minus, gram_xx) = match config.kernel {
        KernelSpec::Linear => {
            let x_plus = scaled.features().select(Axis(0), &pos);
            let x_minus = scaled.features().select(Axis(0), &neg);
            (augment_ones(x_plus.view()), augment_ones(x_minus.view()), None)
        }
        KernelSpec::Gaussian { .. } => {
            let features = scaled.features();
            let gram_xx = gram(features, features, &config.kernel)?;
            let k_plus = gram_xx.values().select(Axis(0), &pos);
            let k_minus = gram_xx.values().select(Axis(0), &neg);
            (augment_ones(k_plus.view()), augment_ones(k_minus.view()), Some(gram_xx))
        }
    };

    let memberships = match memberships {
        Some(m) => {
            if m.s_plus.len() != pos.len() || m.s_minus.len() != neg.len() {
                return Err(Error::invalid("membership override has wrong lengths"));
            }
            m
        }
        None => match config.mode {
            TrainMode::Tsvm => MembershipVector::ones(pos.len(), neg.len()),
            TrainMode::FrTsvm => match (&config.kernel, &gram_xx) {
                (KernelSpec::Linear, _) => membership_linear(&scaled, &config.membership)?,
                (KernelSpec::Gaussian { .. }, Some(g)) => {
                    membership_kernel_with_gram(&scaled, g, &config.membership)?
                }
                _ => unreachable!("gaussian mode always has a gram block"),
            },
        },
    };

    let mtm_plus = g_plus.t().dot(&g_plus);
    let mtm_minus = g_minus.t().dot(&g_minus);
    Ok(PreparedTraining {
        mode: config.mode,
        kernel: config.kernel,
        scaler,
        scaled,
        g_plus,
        g_minus,
        mtm_plus,
        mtm_minus,
        memberships,
        gram_xx,
    })
}

/// The two regularized factors; depends on the ridge weights only.
pub(crate) struct DualFactors {
    pub qf_plus: QFactor,
    pub qf_minus: QFactor,
}

pub(crate) fn build_dual_factors(prep: &PreparedTraining, config: &TrainConfig) -> Result<DualFactors> {
    build_dual_factors_with(prep, config, None)
}

pub(crate) fn build_dual_factors_with(
    prep: &PreparedTraining,
    config: &TrainConfig,
    schedule_override: Option<&[f64]>,
) -> Result<DualFactors> {
    let (ridge_plus, ridge_minus, schedule): (f64, f64, &[f64]) = match prep.mode {
        TrainMode::FrTsvm => (config.c1, config.c2, &DEFAULT_JITTER_SCHEDULE),
        TrainMode::Tsvm => (0.0, 0.0, &[TSVM_RIDGE]),
    };
    let schedule = schedule_override.unwrap_or(schedule);
    let qf_plus =
        build_q_factor_from_mtm(prep.mtm_plus.view(), prep.g_minus.view(), ridge_plus, schedule)?;
    let qf_minus =
        build_q_factor_from_mtm(prep.mtm_minus.view(), prep.g_plus.view(), ridge_minus, schedule)?;
    Ok(DualFactors { qf_plus, qf_minus })
}

/// Box upper bounds of the two duals: plane + is constrained by the
/// negative class and vice versa.
pub(crate) fn boxes(
    prep: &PreparedTraining,
    config: &TrainConfig,
) -> (Array1<f64>, Array1<f64>) {
    match prep.mode {
        TrainMode::FrTsvm => {
            (&prep.memberships.s_minus * config.c3, &prep.memberships.s_plus * config.c4)
        }
        TrainMode::Tsvm => {
            (&prep.memberships.s_minus * config.c1, &prep.memberships.s_plus * config.c2)
        }
    }
}

/// The two box problems handed to the solver; depends on the box weights.
pub(crate) fn dual_problems(
    prep: &PreparedTraining,
    factors: &DualFactors,
    config: &TrainConfig,
) -> Result<(DualProblem, DualProblem)> {
    let (upper_plus, upper_minus) = boxes(prep, config);
    let plus = DualProblem::new(&factors.qf_plus, prep.g_minus.clone(), upper_plus)?;
    let minus = DualProblem::new(&factors.qf_minus, prep.g_plus.clone(), upper_minus)?;
    Ok((plus, minus))
}

fn relative_residual(inner: &Array2<f64>, u: &Array1<f64>, rhs: &Array1<f64>) -> f64 {
    let resid = inner.dot(u) - rhs;
    let norm = |v: &Array1<f64>| v.dot(v).sqrt();
    norm(&resid) / (1.0 + norm(rhs))
}

pub(crate) fn solve_and_assemble(
    prep: &PreparedTraining,
    factors: &DualFactors,
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainDiagnostics)> {
    let (problem_plus, problem_minus) = dual_problems(prep, factors, config)?;
    solve_with_problems(prep, factors, &problem_plus, &problem_minus, config)
}

/// `solve_and_assemble` with prebuilt dual problems, so grid search can
/// rebind only the box bounds between cells.
pub(crate) fn solve_with_problems(
    prep: &PreparedTraining,
    factors: &DualFactors,
    problem_plus: &DualProblem,
    problem_minus: &DualProblem,
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainDiagnostics)> {
    let (report_plus, report_minus) = rayon::join(
        || solve(problem_plus, &config.solver),
        || solve(problem_minus, &config.solver),
    );
    let (report_plus, report_minus) = (report_plus?, report_minus?);
    for report in [&report_plus, &report_minus] {
        // a stalled solve is the iteration's fixpoint at machine
        // resolution and is accepted as the solution
        if !report.converged && !report.stalled {
            return Err(Error::NonConvergence {
                epochs: report.epochs,
                gap: report.kkt_gap,
                epsilon: config.solver.epsilon,
            });
        }
    }

    // u+ = -(G+^T G+ + ridge E + jitter I)^-1 G-^T alpha, mirrored for u-
    let u_plus = -factors.qf_plus.q.dot(&report_plus.alpha);
    let u_minus = factors.qf_minus.q.dot(&report_minus.alpha);
    let rhs_plus = -prep.g_minus.t().dot(&report_plus.alpha);
    let rhs_minus = prep.g_plus.t().dot(&report_minus.alpha);
    let stationarity_plus = relative_residual(&factors.qf_plus.inner, &u_plus, &rhs_plus);
    let stationarity_minus = relative_residual(&factors.qf_minus.inner, &u_minus, &rhs_minus);

    let p = u_plus.len();
    let split = |u: &Array1<f64>| (u.slice(s![..p - 1]).to_owned(), u[p - 1]);
    let (w_plus, b_plus) = split(&u_plus);
    let (w_minus, b_minus) = split(&u_minus);

    // preparation with a Gram block assembles the kernel decision rule,
    // anything else recovers input-space hyperplanes
    let model = if let Some(gram_xx) = &prep.gram_xx {
        let sq_norm = |w: &Array1<f64>| w.dot(&gram_xx.values().dot(w));
        let (n2_plus, n2_minus) = (sq_norm(&w_plus), sq_norm(&w_minus));
        for (side, n2) in [("+", n2_plus), ("-", n2_minus)] {
            if !(n2 > 0.0) {
                return Err(Error::Degenerate(format!(
                    "plane {side} has non-positive decision denominator {n2}"
                )));
            }
        }
        TrainedModel::Kernel(KernelModel {
            support: prep.scaled.features().to_owned(),
            coeff_plus: w_plus,
            coeff_minus: w_minus,
            b_plus,
            b_minus,
            kernel: prep.kernel,
            norm_plus: n2_plus.sqrt(),
            norm_minus: n2_minus.sqrt(),
            scaler: prep.scaler.clone(),
        })
    } else {
        for (side, w) in [("+", &w_plus), ("-", &w_minus)] {
            if w.dot(w).sqrt() < MIN_NORMAL {
                return Err(Error::Degenerate(format!(
                    "plane {side} has a vanishing normal vector"
                )));
            }
        }
        TrainedModel::Linear(LinearModel {
            w_plus,
            w_minus,
            b_plus,
            b_minus,
            scaler: prep.scaler.clone(),
        })
    };

    Ok((
        model,
        TrainDiagnostics {
            report_plus,
            report_minus,
            jitter_plus: factors.qf_plus.jitter,
            jitter_minus: factors.qf_minus.jitter,
            stationarity_plus,
            stationarity_minus,
            memberships: prep.memberships.clone(),
        },
    ))
}

/// Train a model of the configured kind and mode.
pub fn train(train: &Dataset, config: &TrainConfig) -> Result<(TrainedModel, TrainDiagnostics)> {
    let prep = prepare(train, config)?;
    let factors = build_dual_factors(&prep, config)?;
    solve_and_assemble(&prep, &factors, config)
}

/// Train the linear variant regardless of `config.kernel`.
pub fn train_linear(data: &Dataset, config: &TrainConfig) -> Result<(LinearModel, TrainDiagnostics)> {
    let mut config = config.clone();
    config.kernel = KernelSpec::Linear;
    match train(data, &config)? {
        (TrainedModel::Linear(m), d) => Ok((m, d)),
        _ => unreachable!("linear config trains a linear model"),
    }
}

/// Train the kernel variant. Gaussian is the supported production
/// kernel; a linear kernel is accepted for diagnostics and testing.
pub fn train_kernel(data: &Dataset, config: &TrainConfig) -> Result<(KernelModel, TrainDiagnostics)> {
    let prep = prepare_kernel(data, config)?;
    let factors = build_dual_factors(&prep, config)?;
    match solve_and_assemble(&prep, &factors, config)? {
        (TrainedModel::Kernel(m), d) => Ok((m, d)),
        _ => unreachable!("kernel preparation assembles a kernel model"),
    }
}

/// Kernel-mode preparation even when the spec is `Linear` (the Gram and
/// augmented blocks are built from the kernel function either way).
fn prepare_kernel(data: &Dataset, config: &TrainConfig) -> Result<PreparedTraining> {
    config.validate()?;
    let scaler = MinMaxScaler::fit(data);
    let scaled = scaler.apply(data);
    let (pos, neg) = scaled.class_indices();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::invalid("training data must contain both classes"));
    }
    let features = scaled.features();
    let gram_xx = gram(features, features, &config.kernel)?;
    let g_plus = augment_ones(gram_xx.values().select(Axis(0), &pos).view());
    let g_minus = augment_ones(gram_xx.values().select(Axis(0), &neg).view());
    let memberships = match config.mode {
        TrainMode::Tsvm => MembershipVector::ones(pos.len(), neg.len()),
        TrainMode::FrTsvm => membership_kernel_with_gram(&scaled, &gram_xx, &config.membership)?,
    };
    let mtm_plus = g_plus.t().dot(&g_plus);
    let mtm_minus = g_minus.t().dot(&g_minus);
    Ok(PreparedTraining {
        mode: config.mode,
        kernel: config.kernel,
        scaler,
        scaled,
        g_plus,
        g_minus,
        mtm_plus,
        mtm_minus,
        memberships,
        gram_xx: Some(gram_xx),
    })
}

/// Plain twin-SVM baseline: unit memberships, no margin terms, fixed
/// 0.01 ridge; boxes come from `c1` / `c2`.
pub fn train_tsvm_baseline(
    data: &Dataset,
    config: &TrainConfig,
) -> Result<(TrainedModel, TrainDiagnostics)> {
    let mut config = config.clone();
    config.mode = TrainMode::Tsvm;
    train(data, &config)
}

/// Versioned on-disk container: the model plus the configuration that
/// produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedModel {
    pub format: String,
    pub version: u32,
    pub config: TrainConfig,
    pub model: TrainedModel,
}

pub const MODEL_FORMAT: &str = "frtsvm-model";
pub const MODEL_VERSION: u32 = 1;

impl SavedModel {
    pub fn new(config: TrainConfig, model: TrainedModel) -> SavedModel {
        SavedModel { format: MODEL_FORMAT.into(), version: MODEL_VERSION, config, model }
    }
}

pub fn save_model(saved: &SavedModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(saved)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<SavedModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let saved: SavedModel = serde_json::from_str(&text)?;
    if saved.format != MODEL_FORMAT {
        return Err(Error::invalid(format!("not a model file: format {:?}", saved.format)));
    }
    if saved.version != MODEL_VERSION {
        return Err(Error::invalid(format!("unsupported model version {}", saved.version)));
    }
    Ok(saved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tight_config() -> TrainConfig {
        TrainConfig {
            kernel: KernelSpec::Linear,
            solver: SolverConfig { epsilon: 1e-8, ..SolverConfig::default() },
            ..TrainConfig::default()
        }
    }

    /// Two well-separated blobs in the plane.
    fn blobs(seed: u64, per_class: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut features = Array2::zeros((2 * per_class, 2));
        let mut labels = Vec::new();
        for i in 0..2 * per_class {
            let (cx, cy, y) = if i < per_class { (0.0, 0.0, 1) } else { (4.0, 4.0, -1) };
            features[[i, 0]] = cx + rng.gen_range(-1.0..1.0);
            features[[i, 1]] = cy + rng.gen_range(-1.0..1.0);
            labels.push(y);
        }
        Dataset::new(features, labels).unwrap()
    }

    fn training_accuracy(model: &TrainedModel, data: &Dataset) -> f64 {
        let correct = (0..data.len())
            .filter(|&i| model.predict(data.row(i)).unwrap() == data.labels()[i])
            .count();
        correct as f64 / data.len() as f64
    }

    #[test]
    fn config_validation_rejects_bad_weights() {
        let mut config = TrainConfig::default();
        config.c3 = 0.0;
        assert!(config.validate().is_err());
        config.c3 = 1.0;
        config.kernel = KernelSpec::Gaussian { width: -1.0 };
        assert!(config.validate().is_err());
    }

    #[test]
    fn separable_blobs_train_perfectly_in_both_modes() {
        let data = blobs(1, 30);
        let config = tight_config();
        let (model, diag) = train(&data, &config).unwrap();
        assert_eq!(training_accuracy(&model, &data), 1.0);
        assert!(diag.report_plus.converged && diag.report_minus.converged);

        let (baseline, _) = train_tsvm_baseline(&data, &config).unwrap();
        assert_eq!(training_accuracy(&baseline, &data), 1.0);
    }

    /// Mirror oracle: negatives are the positives reflected through
    /// x2 -> 1 - x2 inside the unit square. Substituting the reflection
    /// into the second primal (whose margin constraint has the opposite
    /// orientation) maps it onto the first with negated parameters, so
    /// w+[0] = -w-[0], w+[1] = w-[1], and b+ + b- + w-[1] = 0.
    #[test]
    fn mirrored_classes_recover_mirrored_planes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let per_class = 20;
        let mut features = Array2::zeros((2 * per_class, 2));
        // anchor the corners so min-max scaling is exactly the identity
        let mut pos: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 1.0]];
        for _ in 2..per_class {
            pos.push([rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]);
        }
        for (i, p) in pos.iter().enumerate() {
            features[[i, 0]] = p[0];
            features[[i, 1]] = p[1];
            features[[per_class + i, 0]] = p[0];
            features[[per_class + i, 1]] = 1.0 - p[1];
        }
        let labels: Vec<i8> =
            (0..2 * per_class).map(|i| if i < per_class { 1 } else { -1 }).collect();
        let data = Dataset::new(features, labels).unwrap();
        let (model, _) = train_linear(&data, &tight_config()).unwrap();
        assert_abs_diff_eq!(model.w_plus[0], -model.w_minus[0], epsilon = 1e-6);
        assert_abs_diff_eq!(model.w_plus[1], model.w_minus[1], epsilon = 1e-6);
        assert_abs_diff_eq!(
            model.b_plus + model.b_minus + model.w_minus[1],
            0.0,
            epsilon = 1e-6
        );
        let norm = |w: &Array1<f64>| w.dot(w).sqrt();
        assert_abs_diff_eq!(norm(&model.w_plus), norm(&model.w_minus), epsilon = 1e-6);
    }

    /// With unit memberships, a vanishing margin weight, and the 0.01
    /// ridge forced through the jitter schedule, the weighted model's
    /// inner systems coincide with the baseline's, so the recovered
    /// planes must match.
    #[test]
    fn unit_memberships_and_matched_ridge_reduce_to_baseline() {
        let data = blobs(7, 15);
        let box_weight = 0.5;

        let mut fr_config = tight_config();
        fr_config.c1 = 1e-12;
        fr_config.c2 = 1e-12;
        fr_config.c3 = box_weight;
        fr_config.c4 = box_weight;
        let (pos, neg) = data.class_indices();
        let prep = prepare_with(
            &data,
            &fr_config,
            Some(MembershipVector::ones(pos.len(), neg.len())),
        )
        .unwrap();
        let factors = build_dual_factors_with(&prep, &fr_config, Some(&[TSVM_RIDGE])).unwrap();
        let (fr_model, _) = solve_and_assemble(&prep, &factors, &fr_config).unwrap();

        let mut base_config = tight_config();
        base_config.c1 = box_weight;
        base_config.c2 = box_weight;
        let (base_model, _) = train_tsvm_baseline(&data, &base_config).unwrap();

        let (TrainedModel::Linear(fr), TrainedModel::Linear(base)) = (&fr_model, &base_model)
        else {
            panic!("expected linear models");
        };
        assert_abs_diff_eq!(fr.w_plus[0], base.w_plus[0], epsilon = 1e-6);
        assert_abs_diff_eq!(fr.w_plus[1], base.w_plus[1], epsilon = 1e-6);
        assert_abs_diff_eq!(fr.w_minus[0], base.w_minus[0], epsilon = 1e-6);
        assert_abs_diff_eq!(fr.b_plus, base.b_plus, epsilon = 1e-6);
        assert_abs_diff_eq!(fr.b_minus, base.b_minus, epsilon = 1e-6);
    }

    #[test]
    fn xor_is_separated_by_the_gaussian_kernel() {
        let data = Dataset::new(
            array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]],
            vec![1, 1, -1, -1],
        )
        .unwrap();
        let mut config = tight_config();
        config.kernel = KernelSpec::Gaussian { width: 1.0 };
        config.c3 = 10.0;
        config.c4 = 10.0;
        let (model, _) = train(&data, &config).unwrap();
        assert_eq!(training_accuracy(&model, &data), 1.0);
    }

    #[test]
    fn predict_linear_hand_planes() {
        // planes x2 = 1 and x2 = -1
        let model = LinearModel {
            w_plus: array![0.0, 1.0],
            w_minus: array![0.0, 1.0],
            b_plus: -1.0,
            b_minus: 1.0,
            scaler: MinMaxScaler::identity(2),
        };
        assert_eq!(model.predict(array![0.0, 0.2].view()).unwrap(), 1);
        assert_eq!(model.predict(array![3.0, -0.2].view()).unwrap(), -1);
        // point on plane + exactly
        assert_eq!(model.predict(array![7.0, 1.0].view()).unwrap(), 1);
        // equidistant tie goes to +1
        assert_eq!(model.predict(array![0.0, 0.0].view()).unwrap(), 1);
        assert!(model.predict(array![1.0].view()).is_err());
    }

    #[test]
    fn rescaling_one_plane_changes_no_prediction() {
        let data = blobs(11, 12);
        let (model, _) = train_linear(&data, &tight_config()).unwrap();
        let mut rescaled = model.clone();
        rescaled.w_plus *= 3.0;
        rescaled.b_plus *= 3.0;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let x = array![rng.gen_range(-2.0..6.0), rng.gen_range(-2.0..6.0)];
            assert_eq!(
                model.predict(x.view()).unwrap(),
                rescaled.predict(x.view()).unwrap()
            );
        }
    }

    /// With a linear kernel, the kernel decision rule collapses
    /// algebraically onto the input-space rule applied to the effective
    /// weights `X^T w`.
    #[test]
    fn linear_kernel_model_equals_collapsed_linear_rule() {
        let data = blobs(3, 5);
        let mut config = tight_config();
        config.kernel = KernelSpec::Linear;
        let (kernel_model, _) = train_kernel(&data, &config).unwrap();
        let collapsed = LinearModel {
            w_plus: kernel_model.support.t().dot(&kernel_model.coeff_plus),
            w_minus: kernel_model.support.t().dot(&kernel_model.coeff_minus),
            b_plus: kernel_model.b_plus,
            b_minus: kernel_model.b_minus,
            scaler: kernel_model.scaler.clone(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = array![rng.gen_range(-2.0..6.0), rng.gen_range(-2.0..6.0)];
            let (kp, km) = kernel_model.decision_distances(x.view()).unwrap();
            let (lp, lm) = collapsed.decision_distances(x.view()).unwrap();
            assert_abs_diff_eq!(kp, lp, epsilon = 1e-9);
            assert_abs_diff_eq!(km, lm, epsilon = 1e-9);
            assert_eq!(
                kernel_model.predict(x.view()).unwrap(),
                collapsed.predict(x.view()).unwrap()
            );
        }
    }

    #[test]
    fn stationarity_residuals_are_tiny() {
        let data = blobs(17, 25);
        for config in [tight_config(), {
            let mut c = tight_config();
            c.kernel = KernelSpec::Gaussian { width: 1.0 };
            c
        }] {
            let (_, diag) = train(&data, &config).unwrap();
            assert!(diag.stationarity_plus <= 1e-6, "{}", diag.stationarity_plus);
            assert!(diag.stationarity_minus <= 1e-6, "{}", diag.stationarity_minus);
        }
    }

    /// Complementary slackness: interior multipliers pin their margin
    /// constraint to exactly one.
    #[test]
    fn interior_multipliers_sit_on_the_margin() {
        let data = blobs(23, 20);
        let config = tight_config();
        let (model, diag) = train(&data, &config).unwrap();
        let TrainedModel::Linear(model) = &model else { panic!("linear expected") };
        let scaled = model.scaler.apply(&data);
        let (_, neg) = scaled.class_indices();
        let mut interior = 0;
        for (k, &i) in neg.iter().enumerate() {
            let upper = config.c3 * diag.memberships.s_minus[k];
            let a = diag.report_plus.alpha[k];
            if a > 0.05 * upper && a < 0.95 * upper {
                interior += 1;
                let margin = -(scaled.row(i).dot(&model.w_plus) + model.b_plus);
                assert!((margin - 1.0).abs() <= 1e-5, "margin {margin}");
            }
        }
        assert!(interior > 0, "test data produced no interior multipliers");
    }

    /// Driving one instance's membership to zero removes its influence
    /// on the plane it constrains: retraining without the instance moves
    /// (w+, b+) by a negligible amount.
    #[test]
    fn zero_membership_equals_deletion_for_the_constrained_plane() {
        let data = blobs(31, 15);
        let (pos, neg) = data.class_indices();
        let config = tight_config();

        let mut memberships = MembershipVector::ones(pos.len(), neg.len());
        memberships.s_minus[0] = 1e-9;
        let prep = prepare_with(&data, &config, Some(memberships)).unwrap();
        let factors = build_dual_factors(&prep, &config).unwrap();
        let (with_ghost, _) = solve_and_assemble(&prep, &factors, &config).unwrap();

        let keep: Vec<usize> = (0..data.len()).filter(|&i| i != neg[0]).collect();
        let reduced = data.select(&keep);
        let (rpos, rneg) = reduced.class_indices();
        let prep = prepare_with(
            &reduced,
            &config,
            Some(MembershipVector::ones(rpos.len(), rneg.len())),
        )
        .unwrap();
        let factors = build_dual_factors(&prep, &config).unwrap();
        let (without, _) = solve_and_assemble(&prep, &factors, &config).unwrap();

        let (TrainedModel::Linear(a), TrainedModel::Linear(b)) = (&with_ghost, &without) else {
            panic!("linear expected")
        };
        let scale = a.w_plus.dot(&a.w_plus).sqrt() + a.b_plus.abs();
        let diff = ((&a.w_plus - &b.w_plus).dot(&(&a.w_plus - &b.w_plus))).sqrt()
            + (a.b_plus - b.b_plus).abs();
        assert!(diff <= 1e-4 * scale, "relative drift {}", diff / scale);
    }

    #[test]
    fn collapsed_memberships_reject_the_model() {
        let data = blobs(41, 10);
        let (pos, neg) = data.class_indices();
        let config = tight_config();
        let dead = MembershipVector {
            s_plus: Array1::from_elem(pos.len(), 1e-18),
            s_minus: Array1::from_elem(neg.len(), 1e-18),
        };
        let prep = prepare_with(&data, &config, Some(dead)).unwrap();
        let factors = build_dual_factors(&prep, &config).unwrap();
        assert!(matches!(
            solve_and_assemble(&prep, &factors, &config),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn fixed_seed_training_is_bit_identical() {
        let data = blobs(51, 20);
        let mut config = tight_config();
        config.kernel = KernelSpec::Gaussian { width: 0.8 };
        let (m1, d1) = train(&data, &config).unwrap();
        let (m2, d2) = train(&data, &config).unwrap();
        assert_eq!(m1, m2);
        assert!(d1.report_plus.same_result(&d2.report_plus));
        assert!(d1.report_minus.same_result(&d2.report_minus));
    }

    #[test]
    fn model_file_round_trips_exactly() {
        let data = blobs(61, 10);
        let mut config = tight_config();
        config.kernel = KernelSpec::Gaussian { width: 1.3 };
        let (model, _) = train(&data, &config).unwrap();
        let saved = SavedModel::new(config, model);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_model(&saved, &path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, saved);
        let x = array![0.3, 0.4];
        assert_eq!(
            loaded.model.predict(x.view()).unwrap(),
            saved.model.predict(x.view()).unwrap()
        );
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"format\": \"frtsvm-model\""));
        assert!(text.contains("\"kind\": \"kernel\""));
    }

    #[test]
    fn non_convergence_is_an_error_with_exit_semantics() {
        let data = blobs(71, 25);
        let mut config = tight_config();
        config.solver.epsilon = 1e-13;
        config.solver.max_epochs = 1;
        assert!(matches!(train(&data, &config), Err(Error::NonConvergence { .. })));
    }
}
