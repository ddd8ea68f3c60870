//! Replication studies and the hold-out link-prediction protocol.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PlsmError, Result};
use crate::init::initialize_svt_masked;
use crate::io::Prediction;
use crate::math::sigmoid;
use crate::metrics::{precision_recall, relative_errors, support_rates, PrCurve};
use crate::model::ModelParams;
use crate::network::{MultiEdgeNetwork, ObservationMask};
use crate::optim::{fit, FitConfig};
use crate::simulate::{baseline_range_for_density, derive_seed, simulate, SimConfig};

/// Stream used to derive the hold-out seed from a user seed, so that `fit`
/// and `predict` given the same seed agree on the held-out cells.
pub const HOLDOUT_STREAM: u64 = 0x686f_6c64;

/// Holds out `round(frac · count_k)` cells of every topic layer `k`,
/// sampled without replacement. Returns the mask of held-out cells.
pub fn holdout_mask(net: &MultiEdgeNetwork, frac: f64, seed: u64) -> Result<ObservationMask> {
    if !(0.0..1.0).contains(&frac) {
        return Err(PlsmError::arg(format!("hold-out fraction {frac} must lie in [0, 1)")));
    }
    let mut layers: Vec<Vec<usize>> = vec![Vec::new(); net.n_topics()];
    for (idx, (cell, _)) in net.cells().enumerate() {
        layers[cell.k].push(idx);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut mask = ObservationMask::none(net);
    for cells in &layers {
        let take = (frac * cells.len() as f64).round() as usize;
        for pos in sample(&mut rng, cells.len(), take) {
            mask.set(cells[pos], true);
        }
    }
    Ok(mask)
}

/// Predicted probabilities for the masked cells, in cell order. Values are
/// kept strictly inside `(0, 1)`: log odds beyond about ±37 would otherwise
/// round to exactly 0 or 1.
pub fn predict_cells(
    params: &ModelParams,
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
) -> Result<Vec<Prediction>> {
    crate::likelihood::check_net(params, net)?;
    if mask.len() != net.cell_count() {
        return Err(PlsmError::Shape("mask does not match the network".into()));
    }
    mask.indices()
        .map(|idx| {
            let c = net.cell_at(idx)?;
            Ok(Prediction {
                i: c.i,
                j: c.j,
                l: c.l,
                k: c.k,
                prob: sigmoid(params.log_odds_unchecked(c.i, c.j, c.k))
                    .clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
            })
        })
        .collect()
}

/// Precision-recall curve of predictions against the observed outcomes.
pub fn evaluate_predictions(preds: &[Prediction], net: &MultiEdgeNetwork) -> Result<PrCurve> {
    let mut scores = Vec::with_capacity(preds.len());
    let mut ys = Vec::with_capacity(preds.len());
    for p in preds {
        if !(p.prob >= 0.0 && p.prob <= 1.0) {
            return Err(PlsmError::arg(format!(
                "prediction for ({}, {}, {}, {}) is {}, not a probability",
                p.i, p.j, p.l, p.k, p.prob
            )));
        }
        ys.push(net.y(p.cell())?);
        scores.push(p.prob);
    }
    precision_recall(&scores, &ys)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkPredictionOutcome {
    pub curve: PrCurve,
    /// Area of a constant predictor, which equals the held-out positive rate.
    pub baseline_auc: f64,
    pub held_out: usize,
    pub positives: usize,
}

/// Holds out a fraction of every layer, fits on the rest and scores the
/// held-out cells.
pub fn link_prediction(
    net: &MultiEdgeNetwork,
    frac: f64,
    config: &FitConfig,
    seed: u64,
) -> Result<LinkPredictionOutcome> {
    let hold = holdout_mask(net, frac, derive_seed(seed, HOLDOUT_STREAM))?;
    let train = hold.complement();
    let init = initialize_svt_masked(net, &train, config.d, config.s, seed)?;
    let report = fit(net, &train, config, init, None)?;
    let preds = predict_cells(&report.params, net, &hold)?;
    let curve = evaluate_predictions(&preds, net)?;
    let ys: Vec<u8> = preds.iter().map(|p| net.y(p.cell())).collect::<Result<_>>()?;
    let positives = ys.iter().filter(|&&y| y != 0).count();
    let baseline = precision_recall(&vec![0.5; ys.len()], &ys)?;
    Ok(LinkPredictionOutcome {
        curve,
        baseline_auc: baseline.auc,
        held_out: preds.len(),
        positives,
    })
}

/// Simulation setting varied across a replication study.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sweep {
    N,
    K,
    M,
    /// Levels are nominal densities mapped to baseline ranges.
    Density,
}

impl FromStr for Sweep {
    type Err = PlsmError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n" => Ok(Sweep::N),
            "K" | "k" => Ok(Sweep::K),
            "m" => Ok(Sweep::M),
            "density" => Ok(Sweep::Density),
            _ => Err(PlsmError::arg(format!(
                "unknown sweep variable `{s}` (n, K, m or density)"
            ))),
        }
    }
}

impl fmt::Display for Sweep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sweep::N => "n",
            Sweep::K => "K",
            Sweep::M => "m",
            Sweep::Density => "density",
        })
    }
}

impl Sweep {
    /// `base` with the swept setting set to `level`.
    pub fn apply(&self, base: &SimConfig, level: f64) -> Result<SimConfig> {
        let count = || -> Result<usize> {
            if level >= 1.0 && level.fract() == 0.0 {
                Ok(level as usize)
            } else {
                Err(PlsmError::arg(format!("{self} level {level} must be a positive integer")))
            }
        };
        let mut cfg = base.clone();
        match self {
            Sweep::N => cfg.n = count()?,
            Sweep::K => cfg.k = count()?,
            Sweep::M => cfg.m = count()?,
            Sweep::Density => {
                let (lo, hi) = baseline_range_for_density(level).ok_or_else(|| {
                    PlsmError::arg(format!(
                        "density level {level} is not one of 0.04, 0.08, 0.12, 0.16"
                    ))
                })?;
                cfg.a_low = lo;
                cfg.a_high = hi;
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub base: SimConfig,
    pub sweep: Sweep,
    pub levels: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// Sparsity budget as a multiple of the true support size.
    pub s_ratio: f64,
    /// Optimizer settings; `d` and `s` are replaced per replication.
    pub fit: FitConfig,
}

impl ExperimentSpec {
    pub fn new(base: SimConfig, sweep: Sweep, levels: Vec<f64>) -> Self {
        let fit = FitConfig::new(base.d, 1);
        Self {
            base,
            sweep,
            levels,
            reps: 20,
            seed: 0,
            s_ratio: 1.0,
            fit,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReplicationMetrics {
    pub rel_a: f64,
    pub rel_w: f64,
    pub rel_u: f64,
    pub rel_prob: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub density: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ReplicationMetrics {
    pub const NAMES: [&'static str; 7] = ["rel_a", "rel_w", "rel_u", "rel_prob", "tpr", "fpr", "density"];

    pub fn values(&self) -> [f64; 7] {
        [
            self.rel_a,
            self.rel_w,
            self.rel_u,
            self.rel_prob,
            self.tpr,
            self.fpr,
            self.density,
        ]
    }
}

/// Simulates from `sim`, fits with the true `d` and `s = round(s_ratio·s*)`
/// from the spectral start, and scores the estimate against the truth.
pub fn run_replication(sim: &SimConfig, s_ratio: f64, template: &FitConfig) -> Result<ReplicationMetrics> {
    if !(s_ratio > 0.0) {
        return Err(PlsmError::arg("s_ratio must be positive"));
    }
    let (truth, net) = simulate(sim)?;
    let cap = sim.n * sim.k;
    let s = ((s_ratio * sim.support_size() as f64).round() as usize).clamp(1, cap);
    let mut cfg = template.clone();
    cfg.d = sim.d;
    cfg.s = s;
    cfg.seed = sim.seed;
    let full = ObservationMask::full(&net);
    let init = initialize_svt_masked(&net, &full, sim.d, s, sim.seed)?;
    let report = fit(&net, &full, &cfg, init, None)?;
    let errors = relative_errors(&report.params, &truth)?;
    let (tpr, fpr) = support_rates(&report.params.w, &truth.w)?;
    Ok(ReplicationMetrics {
        rel_a: errors.rel_a,
        rel_w: errors.rel_w,
        rel_u: errors.rel_u,
        rel_prob: errors.rel_prob,
        tpr,
        fpr,
        density: net.density(),
        iterations: report.iterations,
        converged: report.converged,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationRecord {
    pub level: f64,
    pub rep: usize,
    pub seed: u64,
    /// Metrics, or the error message of a failed replication.
    pub outcome: std::result::Result<ReplicationMetrics, String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AggregateRow {
    pub level: f64,
    pub metric: &'static str,
    pub count: usize,
    pub failures: usize,
    pub mean: f64,
    pub q025: f64,
    pub q975: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentTable {
    pub sweep: Sweep,
    pub levels: Vec<f64>,
    /// Ordered by level, then replication.
    pub records: Vec<ReplicationRecord>,
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl ExperimentTable {
    pub fn successes(&self, level: f64) -> impl Iterator<Item = &ReplicationMetrics> + '_ {
        self.records
            .iter()
            .filter(move |r| r.level == level)
            .filter_map(|r| r.outcome.as_ref().ok())
    }

    /// Mean of one metric over the successful replications at `level`.
    pub fn mean(&self, level: f64, metric: &str) -> Option<f64> {
        let col = ReplicationMetrics::NAMES.iter().position(|&m| m == metric)?;
        let vals: Vec<f64> = self.successes(level).map(|m| m.values()[col]).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }

    /// Mean and 2.5/97.5 empirical quantiles per level and metric.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut rows = Vec::new();
        for &level in &self.levels {
            let failures = self
                .records
                .iter()
                .filter(|r| r.level == level && r.outcome.is_err())
                .count();
            for (col, &metric) in ReplicationMetrics::NAMES.iter().enumerate() {
                let mut vals: Vec<f64> = self.successes(level).map(|m| m.values()[col]).collect();
                vals.sort_by(f64::total_cmp);
                let (mean, q025, q975) = if vals.is_empty() {
                    (f64::NAN, f64::NAN, f64::NAN)
                } else {
                    (
                        vals.iter().sum::<f64>() / vals.len() as f64,
                        quantile(&vals, 0.025),
                        quantile(&vals, 0.975),
                    )
                };
                rows.push(AggregateRow {
                    level,
                    metric,
                    count: vals.len(),
                    failures,
                    mean,
                    q025,
                    q975,
                });
            }
        }
        rows
    }

    /// Writes the per-replication table to `raw` and the aggregate to `agg`.
    pub fn write(&self, raw: &Path, agg: &Path) -> Result<()> {
        let err = |p: &Path, e: csv::Error| PlsmError::Parse {
            path: p.to_path_buf(),
            line: 0,
            msg: e.to_string(),
        };
        let mut w = csv::Writer::from_path(raw).map_err(|e| err(raw, e))?;
        let mut header = vec!["sweep", "level", "rep", "seed", "status"];
        header.extend(ReplicationMetrics::NAMES);
        header.extend(["iterations", "converged"]);
        w.write_record(&header).map_err(|e| err(raw, e))?;
        for r in &self.records {
            let mut rec = vec![
                self.sweep.to_string(),
                r.level.to_string(),
                r.rep.to_string(),
                r.seed.to_string(),
            ];
            match &r.outcome {
                Ok(m) => {
                    rec.push("ok".into());
                    rec.extend(m.values().iter().map(|v| format!("{v:?}")));
                    rec.push(m.iterations.to_string());
                    rec.push(m.converged.to_string());
                }
                Err(msg) => {
                    rec.push(format!("failed: {msg}"));
                    rec.extend(std::iter::repeat(String::new()).take(ReplicationMetrics::NAMES.len() + 2));
                }
            }
            w.write_record(&rec).map_err(|e| err(raw, e))?;
        }
        w.flush().map_err(|e| PlsmError::io(raw, e))?;

        let mut w = csv::Writer::from_path(agg).map_err(|e| err(agg, e))?;
        w.write_record(["sweep", "level", "metric", "count", "failures", "mean", "q025", "q975"])
            .map_err(|e| err(agg, e))?;
        for row in self.aggregate() {
            w.write_record(&[
                self.sweep.to_string(),
                row.level.to_string(),
                row.metric.to_string(),
                row.count.to_string(),
                row.failures.to_string(),
                format!("{:?}", row.mean),
                format!("{:?}", row.q025),
                format!("{:?}", row.q975),
            ])
            .map_err(|e| err(agg, e))?;
        }
        w.flush().map_err(|e| PlsmError::io(agg, e))
    }
}

/// Runs every (level, replication) job in parallel. Replication `r` uses the
/// same seed at every level, so levels are compared on common draws; the
/// table order does not depend on scheduling.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentTable> {
    if spec.reps == 0 {
        return Err(PlsmError::arg("reps must be at least 1"));
    }
    if spec.levels.is_empty() {
        return Err(PlsmError::arg("at least one sweep level is needed"));
    }
    let settings: Vec<SimConfig> = spec
        .levels
        .iter()
        .map(|&lv| spec.sweep.apply(&spec.base, lv))
        .collect::<Result<_>>()?;
    let jobs: Vec<(usize, usize)> = (0..settings.len())
        .flat_map(|li| (0..spec.reps).map(move |r| (li, r)))
        .collect();
    let records = jobs
        .par_iter()
        .map(|&(li, rep)| {
            let seed = derive_seed(spec.seed, rep as u64);
            let sim = SimConfig {
                seed,
                ..settings[li].clone()
            };
            let outcome = run_replication(&sim, spec.s_ratio, &spec.fit).map_err(|e| {
                warn!("{} = {}, replication {rep} failed: {e}", spec.sweep, spec.levels[li]);
                e.to_string()
            });
            ReplicationRecord {
                level: spec.levels[li],
                rep,
                seed,
                outcome,
            }
        })
        .collect();
    Ok(ExperimentTable {
        sweep: spec.sweep,
        levels: spec.levels.clone(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    fn grid_net(n: usize, k: usize) -> MultiEdgeNetwork {
        let mut b = NetworkBuilder::new(n, k).unwrap();
        for i in 0..n {
            for j in i + 1..n {
                let rows = (0..2 * k).map(|c| ((i + j + c) % 3 == 0) as u8).collect();
                b.pair(i, j, rows).unwrap();
            }
        }
        b.build().unwrap()
    }

    #[test]
    fn holdout_takes_rounded_share_per_layer() {
        let net = grid_net(6, 3);
        // 15 pairs, 2 docs: 30 cells per layer, 20% = 6
        let mask = holdout_mask(&net, 0.2, 4).unwrap();
        for k in 0..3 {
            let held = net
                .cells()
                .enumerate()
                .filter(|(idx, (c, _))| c.k == k && mask.contains(*idx))
                .count();
            assert_eq!(held, 6);
        }
        assert_eq!(mask, holdout_mask(&net, 0.2, 4).unwrap());
        assert_ne!(mask, holdout_mask(&net, 0.2, 5).unwrap());
        assert_eq!(holdout_mask(&net, 0.0, 1).unwrap().count(), 0);
        assert!(holdout_mask(&net, 1.0, 1).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert!((quantile(&v, 0.975) - 4.9).abs() < 1e-12);
        assert_eq!(quantile(&[7.0], 0.025), 7.0);
    }

    #[test]
    fn sweep_levels() {
        let base = SimConfig::default();
        assert_eq!(Sweep::K.apply(&base, 40.0).unwrap().k, 40);
        assert!(Sweep::M.apply(&base, 1.5).is_err());
        let dense = Sweep::Density.apply(&base, 0.16).unwrap();
        assert_eq!((dense.a_low, dense.a_high), (-1.4, -0.9));
        assert!(Sweep::Density.apply(&base, 0.5).is_err());
        assert_eq!("density".parse::<Sweep>().unwrap(), Sweep::Density);
        assert!("q".parse::<Sweep>().is_err());
    }

    #[test]
    fn single_rep_aggregate_equals_row() {
        let base = SimConfig {
            n: 12,
            k: 3,
            ..SimConfig::default()
        };
        let mut spec = ExperimentSpec::new(base, Sweep::M, vec![2.0]);
        spec.reps = 1;
        spec.fit.max_iters = 50;
        let table = run_experiment(&spec).unwrap();
        let m = table.records[0].outcome.clone().unwrap();
        for row in table.aggregate() {
            let col = ReplicationMetrics::NAMES.iter().position(|&x| x == row.metric).unwrap();
            assert_eq!(row.mean, m.values()[col]);
            assert_eq!(row.q025, m.values()[col]);
            assert_eq!(row.q975, m.values()[col]);
        }
    }

    #[test]
    fn failed_replications_are_recorded() {
        // q0 = 1 leaves no zero entry, so the false positive rate is undefined.
        let base = SimConfig {
            n: 8,
            k: 2,
            q0: 1.0,
            ..SimConfig::default()
        };
        let mut spec = ExperimentSpec::new(base, Sweep::N, vec![8.0, 10.0]);
        spec.reps = 2;
        spec.fit.max_iters = 5;
        let table = run_experiment(&spec).unwrap();
        assert_eq!(table.records.len(), 4);
        assert!(table.records.iter().all(|r| r.outcome.is_err()));
        assert!(table.aggregate().iter().all(|r| r.failures == 2 && r.count == 0));
    }
}
