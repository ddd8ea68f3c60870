//! Command-line interface: argument definitions and subcommand bodies.
//!
//! Exit codes: 0 success, 1 usage or input error, 2 numerical failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::ConfigFile;
use crate::error::{PlsmError, Result};
use crate::experiment::{
    evaluate_predictions, holdout_mask, predict_cells, run_experiment, ExperimentSpec, Sweep,
    HOLDOUT_STREAM,
};
use crate::init::initialize_svt_masked;
use crate::io::{
    load_model, load_network, read_predictions, save_model, save_network, write_cv_grid,
    write_pr_curve, write_predictions, write_trace, ModelFile,
};
use crate::network::ObservationMask;
use crate::optim::{fit, FitConfig};
use crate::simulate::{derive_seed, gen_network, gen_params, SimConfig};
use crate::tuning::{cross_validate, sparsity_from_proportions, DEFAULT_S_PROPORTIONS};

#[derive(Debug, Parser)]
#[command(name = "plsm", version, about = "Preferential latent space model toolkit")]
pub struct Cli {
    /// TOML file with [sim], [fit], [cv] and [experiment] sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for cross-validation and replications.
    #[arg(long, global = true, env = "PLSM_THREADS")]
    pub threads: Option<usize>,
    /// Run single-threaded.
    #[arg(long, global = true)]
    pub sequential: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a network (and optionally its ground truth) from the model.
    Simulate(SimulateArgs),
    /// Fit the model to a network.
    Fit(FitArgs),
    /// Choose d and s by edge cross-validation.
    Cv(CvArgs),
    /// Predict edge probabilities for a set of cells.
    Predict(PredictArgs),
    /// Precision-recall curve of predictions against a network.
    Eval(EvalArgs),
    /// Run a replication study over one simulation setting.
    Replicate(ReplicateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub d: Option<usize>,
    /// Network file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the ground-truth model here.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub network: PathBuf,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-iteration trace CSV.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Ground-truth model; adds the e_t column to the trace.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Leave out this fraction of every layer (chosen from the seed).
    #[arg(long)]
    pub holdout: Option<f64>,
}

#[derive(Debug, Args)]
pub struct CvArgs {
    pub network: PathBuf,
    /// Latent dimensions to try.
    #[arg(long, value_delimiter = ',')]
    pub d: Vec<usize>,
    /// Sparsity budgets to try; defaults to proportions of nK.
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<usize>,
    #[arg(long)]
    pub folds: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Deviance grid CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    pub model: PathBuf,
    pub network: PathBuf,
    /// Predict the cells held out by `fit --holdout` with the same seed;
    /// without it every cell is predicted.
    #[arg(long)]
    pub holdout: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub predictions: PathBuf,
    pub network: PathBuf,
    /// Precision-recall curve CSV.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplicateArgs {
    /// n, K, m or density.
    #[arg(long)]
    pub sweep: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub levels: Vec<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sparsity budget as a multiple of the true support size.
    #[arg(long)]
    pub s_ratio: Option<f64>,
    /// Per-replication table; the aggregate goes next to it as `<stem>.agg.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

/// Exit status for an error returned by [`run`].
pub fn exit_code(err: &PlsmError) -> i32 {
    if err.is_numerical() {
        2
    } else {
        1
    }
}

/// Sets the size of the global worker pool. Only the first call in a
/// process takes effect.
pub fn configure_threads(threads: Option<usize>, sequential: bool) {
    let n = if sequential { Some(1) } else { threads.filter(|&t| t > 0) };
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

pub fn run(cli: Cli, out: &mut impl Write) -> Result<()> {
    configure_threads(cli.threads, cli.sequential);
    let config = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Simulate(a) => simulate_cmd(&a, &config, out),
        Command::Fit(a) => fit_cmd(&a, &config, out),
        Command::Cv(a) => cv_cmd(&a, &config, out),
        Command::Predict(a) => predict_cmd(&a, &config, out),
        Command::Eval(a) => eval_cmd(&a, out),
        Command::Replicate(a) => replicate_cmd(&a, &config, out),
    }
}

fn say(out: &mut impl Write, msg: std::fmt::Arguments<'_>) -> Result<()> {
    out.write_fmt(msg)
        .and_then(|_| out.write_all(b"\n"))
        .map_err(|e| PlsmError::io("<stdout>", e))
}

fn simulate_cmd(a: &SimulateArgs, config: &ConfigFile, out: &mut impl Write) -> Result<()> {
    let mut sim: SimConfig = config.sim.clone().unwrap_or_default();
    if let Some(seed) = a.seed {
        sim.seed = seed;
    }
    if let Some(d) = a.d {
        sim.d = d;
    }
    let truth = gen_params(&sim)?;
    let net = gen_network(&truth, sim.m, derive_seed(sim.seed, 1))?;
    save_network(&net, &a.out)?;
    if let Some(path) = &a.truth {
        let model = ModelFile::new(truth)
            .with_meta("source", "simulate")
            .with_meta("seed", sim.seed)
            .with_meta("q0", sim.q0);
        save_model(&model, path)?;
    }
    say(
        out,
        format_args!(
            "simulated n={} K={} m={} density={:.4} -> {}",
            sim.n,
            sim.k,
            sim.m,
            net.density(),
            a.out.display()
        ),
    )
}

fn resolve_fit(
    config: &ConfigFile,
    d: Option<usize>,
    s: Option<usize>,
    seed: Option<u64>,
    n: usize,
    k: usize,
) -> Result<FitConfig> {
    let d = d.or(config.fit.d).unwrap_or(2);
    let s = s.or_else(|| config.fit.budget(n, k)).ok_or_else(|| {
        PlsmError::arg("no sparsity budget: pass --s or set s / s_prop under [fit]")
    })?;
    let mut cfg = config.fit.apply(FitConfig::new(d, s))?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate(n, k)?;
    Ok(cfg)
}

fn mask_for(
    net: &crate::network::MultiEdgeNetwork,
    holdout: Option<f64>,
    seed: u64,
) -> Result<(ObservationMask, ObservationMask)> {
    match holdout {
        Some(frac) => {
            let hold = holdout_mask(net, frac, derive_seed(seed, HOLDOUT_STREAM))?;
            Ok((hold.complement(), hold))
        }
        None => Ok((ObservationMask::full(net), ObservationMask::full(net))),
    }
}

fn fit_cmd(a: &FitArgs, config: &ConfigFile, out: &mut impl Write) -> Result<()> {
    let net = load_network(&a.network)?;
    let cfg = resolve_fit(config, a.d, a.s, a.seed, net.n(), net.n_topics())?;
    let truth = a.truth.as_deref().map(load_model).transpose()?;
    let (train, _) = mask_for(&net, a.holdout, cfg.seed)?;
    let init = initialize_svt_masked(&net, &train, cfg.d, cfg.s, cfg.seed)?;
    let report = match fit(&net, &train, &cfg, init, truth.as_ref().map(|t| &t.params)) {
        Ok(r) => r,
        Err(PlsmError::Divergence { iteration, trace }) => {
            if let Some(path) = &a.trace {
                write_trace(&trace, path)?;
            }
            return Err(PlsmError::Divergence { iteration, trace });
        }
        Err(e) => return Err(e),
    };
    if let Some(path) = &a.trace {
        write_trace(&report.trace, path)?;
    }
    let mut model = ModelFile::new(report.params.clone())
        .with_meta("d", cfg.d)
        .with_meta("s", cfg.s)
        .with_meta("seed", cfg.seed)
        .with_meta("iterations", report.iterations)
        .with_meta("converged", report.converged)
        .with_meta("objective", format!("{:?}", report.objective()));
    if let Some(h) = a.holdout {
        model = model.with_meta("holdout", h);
    }
    save_model(&model, &a.out)?;
    say(
        out,
        format_args!(
            "fit d={} s={} iterations={} converged={} objective={:.6} -> {}",
            cfg.d,
            cfg.s,
            report.iterations,
            report.converged,
            report.objective(),
            a.out.display()
        ),
    )
}

fn cv_cmd(a: &CvArgs, config: &ConfigFile, out: &mut impl Write) -> Result<()> {
    let net = load_network(&a.network)?;
    let (n, k) = (net.n(), net.n_topics());
    let d_grid = if a.d.is_empty() {
        config.cv.d_grid.clone().unwrap_or_else(|| vec![1, 2, 3, 4])
    } else {
        a.d.clone()
    };
    let s_grid = if !a.s.is_empty() {
        a.s.clone()
    } else if let Some(s) = &config.cv.s_grid {
        s.clone()
    } else {
        let props = config
            .cv
            .s_props
            .clone()
            .unwrap_or_else(|| DEFAULT_S_PROPORTIONS.to_vec());
        sparsity_from_proportions(&props, n, k)?
    };
    let folds = a.folds.or(config.cv.folds).unwrap_or(5);
    let seed = a.seed.or(config.cv.seed).unwrap_or(0);
    let template = config
        .fit
        .apply(FitConfig::new(d_grid[0].max(1), s_grid[0].max(1)))?;
    let cv = cross_validate(&net, &d_grid, &s_grid, folds, &template, seed)?;
    write_cv_grid(&cv, &a.out)?;
    let best = cv.selected_candidate();
    say(
        out,
        format_args!(
            "selected d={} s={} mean deviance={:.4} -> {}",
            best.d,
            best.s,
            best.mean_deviance.unwrap_or(f64::NAN),
            a.out.display()
        ),
    )
}

fn predict_cmd(a: &PredictArgs, config: &ConfigFile, out: &mut impl Write) -> Result<()> {
    let model = load_model(&a.model)?;
    let net = load_network(&a.network)?;
    let seed = a.seed.or(config.fit.seed).unwrap_or(0);
    let (_, hold) = mask_for(&net, a.holdout, seed)?;
    let preds = predict_cells(&model.params, &net, &hold)?;
    write_predictions(&preds, &a.out)?;
    say(out, format_args!("predicted {} cells -> {}", preds.len(), a.out.display()))
}

fn eval_cmd(a: &EvalArgs, out: &mut impl Write) -> Result<()> {
    let preds = read_predictions(&a.predictions)?;
    let net = load_network(&a.network)?;
    let curve = evaluate_predictions(&preds, &net)?;
    write_pr_curve(&curve, &a.out)?;
    say(out, format_args!("auc {:?}", curve.auc))
}

/// `<dir>/<stem>.agg.csv` next to the raw table.
pub fn aggregate_path(raw: &Path) -> PathBuf {
    let stem = raw
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "experiment".into());
    raw.with_file_name(format!("{stem}.agg.csv"))
}

fn replicate_cmd(a: &ReplicateArgs, config: &ConfigFile, out: &mut impl Write) -> Result<()> {
    let ex = &config.experiment;
    let sweep: Sweep = a
        .sweep
        .as_deref()
        .or(ex.sweep.as_deref())
        .ok_or_else(|| PlsmError::arg("no sweep variable: pass --sweep or set it under [experiment]"))?
        .parse()?;
    let levels = if a.levels.is_empty() {
        ex.levels
            .clone()
            .ok_or_else(|| PlsmError::arg("no sweep levels: pass --levels or set them under [experiment]"))?
    } else {
        a.levels.clone()
    };
    let base = config.sim.clone().unwrap_or_default();
    let mut spec = ExperimentSpec::new(base, sweep, levels);
    spec.reps = a.reps.or(ex.reps).unwrap_or(spec.reps);
    spec.seed = a.seed.or(ex.seed).unwrap_or(spec.seed);
    spec.s_ratio = a.s_ratio.or(ex.s_ratio).unwrap_or(spec.s_ratio);
    spec.fit = config.fit.apply(spec.fit)?;
    let table = run_experiment(&spec)?;
    let agg = aggregate_path(&a.out);
    table.write(&a.out, &agg)?;
    let failed = table.records.iter().filter(|r| r.outcome.is_err()).count();
    say(
        out,
        format_args!(
            "{} replications ({failed} failed) -> {}, {}",
            table.records.len(),
            a.out.display(),
            agg.display()
        ),
    )
}
