//! Edge cross-validation over `(i, j, l, k)` cells for choosing the latent
//! dimension `d` and the sparsity budget `s`.

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{PlsmError, Result};
use crate::init::initialize_svt_masked;
use crate::likelihood::Observed;
use crate::math::softplus;
use crate::network::{MultiEdgeNetwork, ObservationMask};
use crate::optim::{fit_observed, FitConfig};
use crate::simulate::derive_seed;

/// Assignment of every cell to one of `L` folds.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FoldPlan {
    pub folds: usize,
    pub seed: u64,
    /// Fold of each cell, by linear cell index.
    pub assignment: Vec<usize>,
}

impl FoldPlan {
    /// Cells of fold `f`.
    pub fn fold_mask(&self, net: &MultiEdgeNetwork, f: usize) -> Result<ObservationMask> {
        ObservationMask::from_bits(net, self.assignment.iter().map(|&a| a == f).collect())
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.folds];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

/// Uniformly random balanced partition of all cells into `folds` folds.
pub fn make_folds(net: &MultiEdgeNetwork, folds: usize, seed: u64) -> Result<FoldPlan> {
    let cells = net.cell_count();
    if folds < 2 {
        return Err(PlsmError::arg("cross-validation needs at least 2 folds"));
    }
    if folds > cells {
        return Err(PlsmError::arg(format!(
            "{folds} folds exceed the {cells} available cells"
        )));
    }
    let mut order: Vec<usize> = (0..cells).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut assignment = vec![0; cells];
    for (pos, &cell) in order.iter().enumerate() {
        assignment[cell] = pos % folds;
    }
    Ok(FoldPlan {
        folds,
        seed,
        assignment,
    })
}

/// `−2 Σ [y log p + (1 − y) log(1 − p)]`.
pub fn binomial_deviance(probs: &[f64], ys: &[u8]) -> Result<f64> {
    if probs.len() != ys.len() {
        return Err(PlsmError::Shape(format!(
            "{} probabilities for {} outcomes",
            probs.len(),
            ys.len()
        )));
    }
    let mut total = 0.0;
    for (&p, &y) in probs.iter().zip(ys) {
        if !(p > 0.0 && p < 1.0) {
            return Err(PlsmError::arg(format!("probability {p} is outside (0, 1)")));
        }
        total += if y != 0 { p.ln() } else { (-p).ln_1p() };
    }
    Ok(-2.0 * total)
}

/// Deviance of one outcome given its log odds; finite for any finite `Λ`.
#[inline]
fn deviance_from_log_odds(lam: f64, y: u8) -> f64 {
    2.0 * (softplus(lam) - if y != 0 { lam } else { 0.0 })
}

/// Sparsity budgets from proportions of the `nK` entries of `W`.
pub fn sparsity_from_proportions(props: &[f64], n: usize, k: usize) -> Result<Vec<usize>> {
    props
        .iter()
        .map(|&q| {
            if !(q > 0.0 && q <= 1.0) {
                return Err(PlsmError::arg(format!("sparsity proportion {q} must lie in (0, 1]")));
            }
            Ok(((q * (n * k) as f64).round() as usize).max(1))
        })
        .collect()
}

/// Default sparsity proportions of the search grid.
pub const DEFAULT_S_PROPORTIONS: [f64; 5] = [0.4, 0.55, 0.7, 0.85, 1.0];

#[derive(Clone, Debug, PartialEq)]
pub struct CvCandidate {
    pub d: usize,
    pub s: usize,
    /// Held-out deviance per fold; empty when the candidate failed.
    pub fold_deviance: Vec<f64>,
    pub mean_deviance: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CvResult {
    pub candidates: Vec<CvCandidate>,
    pub selected: (usize, usize),
    pub folds: usize,
    /// Held-out cells predicted in each fold.
    pub predictions_per_fold: Vec<usize>,
}

impl CvResult {
    pub fn selected_candidate(&self) -> &CvCandidate {
        self.candidates
            .iter()
            .find(|c| (c.d, c.s) == self.selected)
            .expect("selected candidate is in the grid")
    }
}

/// Fits every `(d, s)` on each training complement and scores the
/// held-out cells by binomial deviance. Candidates whose fit fails in any
/// fold are excluded with a warning.
pub fn cross_validate(
    net: &MultiEdgeNetwork,
    d_grid: &[usize],
    s_grid: &[usize],
    folds: usize,
    template: &FitConfig,
    seed: u64,
) -> Result<CvResult> {
    if d_grid.is_empty() || s_grid.is_empty() {
        return Err(PlsmError::arg("cross-validation grids must be nonempty"));
    }
    let plan = make_folds(net, folds, seed)?;
    let mut held_out = Vec::with_capacity(folds);
    let mut training = Vec::with_capacity(folds);
    for f in 0..folds {
        let hold = plan.fold_mask(net, f)?;
        let train = hold.complement();
        assert!(!hold.intersects(&train));
        training.push(Observed::new(net, &train)?);
        held_out.push((train, hold));
    }
    let predictions_per_fold: Vec<usize> = held_out.iter().map(|(_, h)| h.count()).collect();
    debug_assert_eq!(predictions_per_fold.iter().sum::<usize>(), net.cell_count());

    let mut grid: Vec<(usize, usize)> = d_grid
        .iter()
        .flat_map(|&d| s_grid.iter().map(move |&s| (d, s)))
        .collect();
    grid.sort_unstable();
    grid.dedup();

    let jobs: Vec<(usize, usize, usize)> = grid
        .iter()
        .flat_map(|&(d, s)| (0..folds).map(move |f| (d, s, f)))
        .collect();
    let outcomes: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(d, s, f)| {
            let (train, hold) = &held_out[f];
            let mut cfg = template.clone();
            cfg.d = d;
            cfg.s = s;
            let job_seed = derive_seed(seed, (d * 1_000_003 + s) as u64 * 64 + f as u64);
            cfg.seed = job_seed;
            let init = initialize_svt_masked(net, train, d, s, job_seed)?;
            let report = fit_observed(&training[f], &cfg, init, None)?;
            let p = &report.params;
            let mut dev = 0.0;
            for idx in hold.indices() {
                let c = net.cell_at(idx)?;
                let y = net.y(c)?;
                dev += deviance_from_log_odds(p.log_odds_unchecked(c.i, c.j, c.k), y);
            }
            Ok(dev)
        })
        .collect();

    let mut candidates = Vec::with_capacity(grid.len());
    for (ci, &(d, s)) in grid.iter().enumerate() {
        let mut fold_deviance = Vec::with_capacity(folds);
        let mut failure = None;
        for f in 0..folds {
            match &outcomes[ci * folds + f] {
                Ok(v) if v.is_finite() => fold_deviance.push(*v),
                Ok(v) => {
                    failure = Some(format!("fold {f}: deviance {v}"));
                    break;
                }
                Err(e) => {
                    failure = Some(format!("fold {f}: {e}"));
                    break;
                }
            }
        }
        if let Some(msg) = &failure {
            warn!("cross-validation candidate d={d}, s={s} excluded: {msg}");
            fold_deviance.clear();
        }
        let mean_deviance = failure
            .is_none()
            .then(|| fold_deviance.iter().sum::<f64>() / folds as f64);
        candidates.push(CvCandidate {
            d,
            s,
            fold_deviance,
            mean_deviance,
            failure,
        });
    }

    // Grid is sorted by (d, s), so a strict comparison keeps the smaller pair on ties.
    let mut best: Option<(f64, (usize, usize))> = None;
    for c in &candidates {
        if let Some(m) = c.mean_deviance {
            if best.map_or(true, |(b, _)| m < b) {
                best = Some((m, (c.d, c.s)));
            }
        }
    }
    let Some((_, selected)) = best else {
        return Err(PlsmError::arg("every cross-validation candidate failed"));
    };
    Ok(CvResult {
        candidates,
        selected,
        folds,
        predictions_per_fold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::NetworkBuilder;

    fn ten_cells() -> MultiEdgeNetwork {
        // n = 2, K = 5, two documents
        let mut b = NetworkBuilder::new(2, 5).unwrap();
        b.pair(0, 1, vec![1, 0, 0, 1, 0, 0, 0, 1, 1, 0]).unwrap();
        b.build().unwrap()
    }

    #[test]
    fn two_folds_of_five() {
        let net = ten_cells();
        let plan = make_folds(&net, 2, 3).unwrap();
        assert_eq!(plan.fold_sizes(), vec![5, 5]);
        let a = plan.fold_mask(&net, 0).unwrap();
        let b = plan.fold_mask(&net, 1).unwrap();
        assert!(!a.intersects(&b));
        assert_eq!(a.count() + b.count(), 10);
        assert_eq!(plan, make_folds(&net, 2, 3).unwrap());
    }

    #[test]
    fn fold_errors() {
        let net = ten_cells();
        assert!(make_folds(&net, 1, 0).is_err());
        assert!(make_folds(&net, 11, 0).is_err());
        assert!(make_folds(&net, 10, 0).is_ok());
    }

    #[test]
    fn deviance_values() {
        let v = binomial_deviance(&[0.5; 4], &[1, 0, 1, 1]).unwrap();
        assert!((v - 8.0 * std::f64::consts::LN_2).abs() < 1e-12);
        assert!((v - 5.545_177_444_479_562).abs() < 1e-12);
        let near = binomial_deviance(&[1.0 - 1e-12], &[1]).unwrap();
        assert!(near < 1e-10);
        assert!(binomial_deviance(&[1.0], &[1]).is_err());
        assert!(binomial_deviance(&[0.0], &[0]).is_err());
        assert!(binomial_deviance(&[0.2, 0.3], &[1]).is_err());
    }

    #[test]
    fn deviance_is_permutation_invariant() {
        let p = [0.1, 0.7, 0.4, 0.9];
        let y = [0u8, 1, 1, 0];
        let a = binomial_deviance(&p, &y).unwrap();
        let b = binomial_deviance(&[p[2], p[0], p[3], p[1]], &[y[2], y[0], y[3], y[1]]).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn log_odds_deviance_matches_probability_form() {
        for (lam, y) in [(-2.0, 0u8), (-2.0, 1), (0.3, 1), (3.0, 0)] {
            let p = crate::math::sigmoid(lam);
            let v = binomial_deviance(&[p], &[y]).unwrap();
            assert!((deviance_from_log_odds(lam, y) - v).abs() < 1e-12);
        }
    }

    #[test]
    fn proportions_to_budgets() {
        assert_eq!(
            sparsity_from_proportions(&DEFAULT_S_PROPORTIONS, 10, 10).unwrap(),
            vec![40, 55, 70, 85, 100]
        );
        assert!(sparsity_from_proportions(&[0.0], 3, 3).is_err());
    }
}
