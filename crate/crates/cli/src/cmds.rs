//! Command implementations.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use frtsvm::data::{
    add_gaussian_noise, gen_ripley_mixture, gen_sine_band, random_split, write_csv, Dataset,
};
use frtsvm::eval::{
    cross_validate, grid_search, timing_compare, write_cv_csv, write_grid_csv, write_timing_csv,
    GridSpec,
};
use frtsvm::membership::write_membership_csv;
use frtsvm::solver::write_trace_csv;
use frtsvm::{
    load_model, save_model, train, Error, KernelSpec, SavedModel, TrainDiagnostics,
};

use crate::cfg::{ConfigOpts, DataOpts, Manifest};
use crate::{CliError, GenArgs, GridArgs, Result};

/// `path` minus a `.csv` suffix, plus `_{part}.csv`.
fn split_path(out: &Path, part: &str) -> PathBuf {
    let stem = out.to_string_lossy();
    let stem = stem.strip_suffix(".csv").unwrap_or(&stem);
    PathBuf::from(format!("{stem}_{part}.csv"))
}

pub fn cmd_gen(args: &GenArgs) -> Result<()> {
    let seed = args.seed.unwrap_or(0);
    let sigma = args.noise_sigma.unwrap_or(0.0);
    let mut manifest = Manifest::new("gen");
    manifest.set("kind", &args.kind);
    manifest.set("seed", seed);
    manifest.set("noise-sigma", sigma);
    manifest.set_path("out", &args.out);

    match args.kind.as_str() {
        "sine" => {
            let count = args.count.unwrap_or(3000);
            manifest.set("count", count);
            let data = gen_sine_band(count, seed).map_err(CliError::Core)?;
            match args.split {
                Some(n_train) => {
                    manifest.set("split", n_train);
                    manifest.echo();
                    let (train, test) =
                        random_split(&data, n_train, seed).map_err(CliError::Core)?;
                    let train = add_gaussian_noise(&train, sigma, seed).map_err(CliError::Core)?;
                    write_files(&args.out, &train, &test)
                }
                None => {
                    manifest.echo();
                    let data = add_gaussian_noise(&data, sigma, seed).map_err(CliError::Core)?;
                    write_csv(&data, &args.out).map_err(CliError::Core)?;
                    println!("wrote {} rows to {}", data.len(), args.out.display());
                    Ok(())
                }
            }
        }
        "ripley" => {
            let n_train = args.train_count.unwrap_or(250);
            let n_test = args.test_count.unwrap_or(1000);
            manifest.set("train-count", n_train);
            manifest.set("test-count", n_test);
            manifest.echo();
            let (train, test) =
                gen_ripley_mixture(n_train, n_test, seed).map_err(CliError::Core)?;
            let train = add_gaussian_noise(&train, sigma, seed).map_err(CliError::Core)?;
            write_files(&args.out, &train, &test)
        }
        other => Err(CliError::Usage(format!("unknown generator {other:?} (use sine or ripley)"))),
    }
}

fn write_files(out: &Path, train: &Dataset, test: &Dataset) -> Result<()> {
    let train_path = split_path(out, "train");
    let test_path = split_path(out, "test");
    write_csv(train, &train_path).map_err(CliError::Core)?;
    write_csv(test, &test_path).map_err(CliError::Core)?;
    println!("wrote {} rows to {}", train.len(), train_path.display());
    println!("wrote {} rows to {}", test.len(), test_path.display());
    Ok(())
}

fn print_diagnostics(diag: &TrainDiagnostics) {
    for (plane, report, jitter, stationarity) in [
        ("+", &diag.report_plus, diag.jitter_plus, diag.stationarity_plus),
        ("-", &diag.report_minus, diag.jitter_minus, diag.stationarity_minus),
    ] {
        println!(
            "plane {plane}: epochs={} updates={} shrink_events={} kkt_gap={:.3e} \
             objective={:.6} jitter={:.0e} stationarity={:.3e} wall_time={:.6}s",
            report.epochs,
            report.updates,
            report.shrink_events,
            report.kkt_gap,
            report.objective,
            jitter,
            stationarity,
            report.wall_time.as_secs_f64(),
        );
    }
}

pub fn cmd_train(
    data_opts: &DataOpts,
    config_opts: &ConfigOpts,
    out: &Path,
    memberships_out: Option<&Path>,
    trace_out: Option<&Path>,
) -> Result<()> {
    let mut config = config_opts.resolve()?;
    config.solver.trace = trace_out.is_some();
    let mut manifest = Manifest::new("train");
    data_opts.describe(&mut manifest);
    manifest.set_config(&config);
    manifest.set_path("out", out);
    manifest.echo();

    let data = data_opts.load().map_err(CliError::Core)?;
    let (model, diag) = train(&data, &config).map_err(CliError::Core)?;
    print_diagnostics(&diag);

    if let Some(path) = memberships_out {
        write_membership_csv(&data, &diag.memberships, path).map_err(CliError::Core)?;
        println!("memberships written to {}", path.display());
    }
    if let Some(path) = trace_out {
        write_trace_csv(
            &[("+", &diag.report_plus.trace), ("-", &diag.report_minus.trace)],
            path,
        )
        .map_err(CliError::Core)?;
        println!("solver trace written to {}", path.display());
    }

    save_model(&SavedModel::new(config, model), out).map_err(CliError::Core)?;
    println!("model written to {}", out.display());
    Ok(())
}

pub fn cmd_predict(model_path: &Path, data_opts: &DataOpts, out: Option<&Path>) -> Result<()> {
    let mut manifest = Manifest::new("predict");
    manifest.set_path("model", model_path);
    data_opts.describe(&mut manifest);
    if let Some(out) = out {
        manifest.set_path("out", out);
    }
    manifest.echo();

    let saved = load_model(model_path).map_err(CliError::Core)?;
    let data = data_opts.load().map_err(CliError::Core)?;
    let mut correct = 0usize;
    let mut rows = String::from("index,label,predicted\n");
    for i in 0..data.len() {
        let predicted = saved.model.predict(data.row(i)).map_err(CliError::Core)?;
        if predicted == data.labels()[i] {
            correct += 1;
        }
        let _ = writeln!(rows, "{i},{},{predicted}", data.labels()[i]);
    }
    if let Some(path) = out {
        std::fs::write(path, rows)
            .map_err(|e| CliError::Core(Error::Io { path: path.into(), source: e }))?;
        println!("predictions written to {}", path.display());
    }
    println!(
        "accuracy: {:.4}% ({correct}/{})",
        100.0 * correct as f64 / data.len() as f64,
        data.len()
    );
    Ok(())
}

pub fn cmd_cv(
    data_opts: &DataOpts,
    config_opts: &ConfigOpts,
    folds: usize,
    out: Option<&Path>,
) -> Result<()> {
    let config = config_opts.resolve()?;
    let seed = config_opts.resolved_seed()?;
    let mut manifest = Manifest::new("cv");
    data_opts.describe(&mut manifest);
    manifest.set_config(&config);
    manifest.set("folds", folds);
    if let Some(out) = out {
        manifest.set_path("out", out);
    }
    manifest.echo();

    let data = data_opts.load().map_err(CliError::Core)?;
    let result = cross_validate(&data, &config, folds, seed).map_err(CliError::Core)?;
    for (f, acc) in result.per_fold.iter().enumerate() {
        println!("fold {f}: {acc:.4}%");
    }
    println!(
        "accuracy: {:.4}% +- {:.4}% (mean train time {:.6}s)",
        result.mean_accuracy,
        result.std_accuracy,
        result.mean_train_time.as_secs_f64()
    );
    if let Some(path) = out {
        write_cv_csv(&result, path).map_err(CliError::Core)?;
        println!("per-fold table written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_grid(args: &GridArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let seed = args.config.resolved_seed()?;
    let grid = GridSpec {
        c_exponents: args.c_exp_min.unwrap_or(-8)..=args.c_exp_max.unwrap_or(8),
        g_exponents: args.g_exp_min.unwrap_or(-4)..=args.g_exp_max.unwrap_or(4),
    };
    let mut manifest = Manifest::new("grid");
    args.data.describe(&mut manifest);
    manifest.set_config(&config);
    manifest.set("folds", args.folds);
    manifest.set("c-exp-min", grid.c_exponents.start());
    manifest.set("c-exp-max", grid.c_exponents.end());
    manifest.set("g-exp-min", grid.g_exponents.start());
    manifest.set("g-exp-max", grid.g_exponents.end());
    if let Some(out) = &args.out {
        manifest.set_path("out", out);
    }
    manifest.echo();

    let data = args.data.load().map_err(CliError::Core)?;
    let result = grid_search(&data, &grid, &config, args.folds, seed).map_err(CliError::Core)?;
    println!(
        "evaluated {} cells on a {}-row subsample ({} failed)",
        result.table.len(),
        result.subsample_indices.len(),
        result.failed_cells
    );
    println!(
        "best: accuracy {:.4}% +- {:.4}%",
        result.best_cell.mean_accuracy, result.best_cell.std_accuracy
    );
    let mut best = Manifest::new("train");
    best.set_config(&result.best);
    best.echo();
    if let Some(path) = &args.out {
        write_grid_csv(&result, path).map_err(CliError::Core)?;
        println!("grid table written to {}", path.display());
    }
    if let Some(path) = &args.best_out {
        let best = &result.best;
        let mut text = String::new();
        match best.kernel {
            KernelSpec::Linear => text.push_str("kernel = linear\n"),
            KernelSpec::Gaussian { width } => {
                let _ = writeln!(text, "kernel = gaussian\ng = {width}");
            }
        }
        let _ = writeln!(text, "c1 = {}\nc2 = {}\nc3 = {}\nc4 = {}", best.c1, best.c2, best.c3, best.c4);
        let _ = writeln!(text, "mu = {}\ndelta = {}", best.membership.mu, best.membership.delta);
        let _ = writeln!(text, "eps = {}\nseed = {}", best.solver.epsilon, best.solver.seed);
        std::fs::write(path, text)
            .map_err(|e| CliError::Core(Error::Io { path: path.into(), source: e }))?;
        println!("best config written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_time(
    data_opts: &DataOpts,
    config_opts: &ConfigOpts,
    reps: usize,
    out: Option<&Path>,
) -> Result<()> {
    let config = config_opts.resolve()?;
    let mut manifest = Manifest::new("time");
    data_opts.describe(&mut manifest);
    manifest.set_config(&config);
    manifest.set("reps", reps);
    manifest.echo();

    let data = data_opts.load().map_err(CliError::Core)?;
    let rows = timing_compare(&data, &config, reps).map_err(CliError::Core)?;
    println!("{:<12} {:>14}", "method", "mean seconds");
    for row in &rows {
        println!("{:<12} {:>14.6}", row.method, row.mean_seconds);
    }
    if let Some(path) = out {
        write_timing_csv(&rows, path).map_err(CliError::Core)?;
        println!("timing table written to {}", path.display());
    }
    Ok(())
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_boundary(
    model_path: &Path,
    out: &Path,
    x1_min: f64,
    x1_max: f64,
    x2_min: f64,
    x2_max: f64,
    resolution: usize,
) -> Result<()> {
    if resolution == 0 {
        return Err(CliError::Usage("resolution must be at least 1".into()));
    }
    let mut manifest = Manifest::new("boundary");
    manifest.set_path("model", model_path);
    manifest.set_path("out", out);
    manifest.set("x1-min", x1_min);
    manifest.set("x1-max", x1_max);
    manifest.set("x2-min", x2_min);
    manifest.set("x2-max", x2_max);
    manifest.set("resolution", resolution);
    manifest.echo();

    let saved = load_model(model_path).map_err(CliError::Core)?;
    if saved.model.feature_dim() != 2 {
        return Err(CliError::Core(Error::InvalidInput(format!(
            "boundary export needs a 2-D model, this one has {} features",
            saved.model.feature_dim()
        ))));
    }
    let mut rows = String::from("x1,x2,dist_plus,dist_minus,label\n");
    for &x1 in &linspace(x1_min, x1_max, resolution) {
        for &x2 in &linspace(x2_min, x2_max, resolution) {
            let x = ndarray::array![x1, x2];
            let (dp, dm) = saved.model.decision_distances(x.view()).map_err(CliError::Core)?;
            let label = saved.model.predict(x.view()).map_err(CliError::Core)?;
            let _ = writeln!(rows, "{x1},{x2},{dp},{dm},{label}");
        }
    }
    std::fs::write(out, rows)
        .map_err(|e| CliError::Core(Error::Io { path: out.into(), source: e }))?;
    println!("wrote {} rows to {}", resolution * resolution, out.display());
    Ok(())
}
