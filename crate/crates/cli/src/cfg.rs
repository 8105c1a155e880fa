//! Option resolution (flags > config file > defaults) and the manifest
//! every command echoes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;
use frtsvm::{KernelSpec, MembershipParams, SolverConfig, TrainConfig, TrainMode};

use crate::CliError;

/// Sorted key=value pairs describing one run; echoing it makes every
/// run reconstructible.
#[derive(Debug, Default)]
pub struct Manifest {
    entries: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str) -> Manifest {
        let mut m = Manifest::default();
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn set_path(&mut self, key: &str, path: &Path) {
        self.set(key, path.display());
    }

    pub fn set_config(&mut self, config: &TrainConfig) {
        match config.kernel {
            KernelSpec::Linear => self.set("kernel", "linear"),
            KernelSpec::Gaussian { width } => {
                self.set("kernel", "gaussian");
                self.set("g", width);
            }
        }
        self.set("c1", config.c1);
        self.set("c2", config.c2);
        self.set("c3", config.c3);
        self.set("c4", config.c4);
        self.set("mu", config.membership.mu);
        self.set("delta", config.membership.delta);
        self.set("eps", config.solver.epsilon);
        self.set("max-epochs", config.solver.max_epochs);
        self.set("seed", config.solver.seed);
        self.set("shrinking", config.solver.shrinking);
        self.set(
            "mode",
            match config.mode {
                TrainMode::FrTsvm => "frtsvm",
                TrainMode::Tsvm => "tsvm",
            },
        );
    }

    /// Print as `manifest.key=value` lines.
    pub fn echo(&self) {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "manifest.{k}={v}");
        }
        print!("{out}");
    }
}

/// Hyperparameter and solver flags shared by the training-style
/// commands. Anything left unset falls back to the config file, then to
/// the documented default.
#[derive(Debug, Clone, Args)]
pub struct ConfigOpts {
    /// Flat key=value config file (same keys as the flags below)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Kernel kind: linear or gaussian [default: gaussian]
    #[arg(long)]
    pub kernel: Option<String>,
    /// Gaussian kernel width [default: 1]
    #[arg(long)]
    pub g: Option<f64>,
    /// Margin weight of plane + [default: 1]
    #[arg(long)]
    pub c1: Option<f64>,
    /// Margin weight of plane - [default: c1]
    #[arg(long)]
    pub c2: Option<f64>,
    /// Slack weight of plane + [default: 1]
    #[arg(long)]
    pub c3: Option<f64>,
    /// Slack weight of plane - [default: c3]
    #[arg(long)]
    pub c4: Option<f64>,
    /// Outlier damping factor of the fuzzy memberships [default: 0.1]
    #[arg(long)]
    pub mu: Option<f64>,
    /// Positivity offset of the fuzzy memberships [default: 0.001]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Solver termination gap [default: 1e-4]
    #[arg(long)]
    pub eps: Option<f64>,
    /// Solver epoch cap [default: 1000]
    #[arg(long)]
    pub max_epochs: Option<usize>,
    /// Seed for every random draw in the run [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training mode: frtsvm or tsvm [default: frtsvm]
    #[arg(long)]
    pub mode: Option<String>,
    /// Use the shrinking solver [default: true]
    #[arg(long)]
    pub shrinking: Option<bool>,
}

fn parse_config_file(path: &Path) -> Result<BTreeMap<String, String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config file {}: {e}", path.display())))?;
    let mut map = BTreeMap::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!(
                "config file {} line {}: expected key=value",
                path.display(),
                no + 1
            )));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn pick<T: std::str::FromStr>(
    flag: Option<T>,
    file: &BTreeMap<String, String>,
    key: &str,
    default: T,
) -> Result<T, CliError> {
    if let Some(v) = flag {
        return Ok(v);
    }
    match file.get(key) {
        Some(raw) => raw
            .parse()
            .map_err(|_| CliError::Usage(format!("config key {key}: cannot parse {raw:?}"))),
        None => Ok(default),
    }
}

impl ConfigOpts {
    /// Merge flags, config file, and defaults into a full `TrainConfig`.
    pub fn resolve(&self) -> Result<TrainConfig, CliError> {
        let file = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        let kernel_kind =
            pick(self.kernel.clone(), &file, "kernel", "gaussian".to_string())?;
        let g = pick(self.g, &file, "g", 1.0)?;
        let kernel = match kernel_kind.as_str() {
            "linear" => KernelSpec::Linear,
            "gaussian" => KernelSpec::Gaussian { width: g },
            other => {
                return Err(CliError::Usage(format!(
                    "unknown kernel {other:?} (use linear or gaussian)"
                )))
            }
        };
        let mode_name = pick(self.mode.clone(), &file, "mode", "frtsvm".to_string())?;
        let mode = match mode_name.as_str() {
            "frtsvm" => TrainMode::FrTsvm,
            "tsvm" => TrainMode::Tsvm,
            other => {
                return Err(CliError::Usage(format!(
                    "unknown mode {other:?} (use frtsvm or tsvm)"
                )))
            }
        };
        let c1 = pick(self.c1, &file, "c1", 1.0)?;
        let c2 = pick(self.c2, &file, "c2", c1)?;
        let c3 = pick(self.c3, &file, "c3", 1.0)?;
        let c4 = pick(self.c4, &file, "c4", c3)?;
        let config = TrainConfig {
            c1,
            c2,
            c3,
            c4,
            kernel,
            membership: MembershipParams {
                mu: pick(self.mu, &file, "mu", 0.1)?,
                delta: pick(self.delta, &file, "delta", 1e-3)?,
            },
            solver: SolverConfig {
                epsilon: pick(self.eps, &file, "eps", 1e-4)?,
                max_epochs: pick(self.max_epochs, &file, "max-epochs", 1000)?,
                seed: pick(self.seed, &file, "seed", 0)?,
                shrinking: pick(self.shrinking, &file, "shrinking", true)?,
                trace: false,
            },
            mode,
        };
        config.validate().map_err(CliError::Core)?;
        Ok(config)
    }

    /// The seed also drives data-level randomness (splits, folds).
    pub fn resolved_seed(&self) -> Result<u64, CliError> {
        let file = match &self.config {
            Some(path) => parse_config_file(path)?,
            None => BTreeMap::new(),
        };
        pick(self.seed, &file, "seed", 0)
    }
}

/// CSV-shape flags shared by every data-reading command.
#[derive(Debug, Clone, Args)]
pub struct DataOpts {
    /// Input CSV file
    #[arg(long, value_name = "PATH")]
    pub data: PathBuf,
    /// 0-based label column [default: last]
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Skip one header row
    #[arg(long)]
    pub skip_header: bool,
    /// Remap raw class ids by majority-vs-rest instead of requiring +-1
    #[arg(long)]
    pub binarize: bool,
}

impl DataOpts {
    pub fn load(&self) -> frtsvm::Result<frtsvm::Dataset> {
        let opts = frtsvm::LoadOptions {
            label_column: self.label_column,
            skip_header: self.skip_header,
            binarize: self.binarize,
        };
        frtsvm::data::load_csv(&self.data, &opts)
    }

    pub fn describe(&self, manifest: &mut Manifest) {
        manifest.set_path("data", &self.data);
        if let Some(col) = self.label_column {
            manifest.set("label-column", col);
        }
        manifest.set("skip-header", self.skip_header);
        manifest.set("binarize", self.binarize);
    }
}
