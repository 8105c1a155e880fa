//! Fast robust twin SVM training.
//!
//! The crate trains a pair of nonparallel proximal hyperplanes (linear or
//! Gaussian-kernel) where each instance's slack penalty is weighted by a
//! fuzzy membership derived from class geometry. The two box-constrained
//! dual QPs are solved by coordinate descent, optionally with heuristic
//! active-set shrinking. A plain twin-SVM baseline, synthetic data
//! generators, cross-validation, and grid search round out the toolkit.
//!
//! All randomness flows from explicit 64-bit seeds through `ChaCha8Rng`;
//! identical seeds reproduce identical models and reports.

pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod membership;
pub mod model;
pub mod solver;

pub use data::{Dataset, FoldPlan, LoadOptions, MinMaxScaler};
pub use error::{Error, Result};
pub use eval::{CvResult, GridSearchResult, GridSpec, TimingRow};
pub use kernel::{GramBlock, KernelSpec, QFactor};
pub use membership::{MembershipParams, MembershipVector};
pub use model::{
    load_model, save_model, train, train_kernel, train_linear, train_tsvm_baseline, KernelModel,
    LinearModel, SavedModel, TrainConfig, TrainDiagnostics, TrainMode, TrainedModel,
};
pub use solver::{DualProblem, SolverConfig, SolverReport};
