//! TOML configuration with `[sim]`, `[fit]`, `[cv]` and `[experiment]`
//! sections. Every key is optional; command-line flags take precedence.
//!
//! ```toml
//! [sim]
//! n = 100
//! K = 10
//! m = 1
//! a_low = -3.0
//! a_high = -1.0
//!
//! [fit]
//! d = 2
//! s_prop = 0.7          # or s = 700
//! tol = 1e-7
//! step = "backtracking" # or "fixed" with eta_a, eta_w, eta_u
//!
//! [cv]
//! d_grid = [1, 2, 3, 4]
//! s_props = [0.4, 0.55, 0.7, 0.85, 1.0]
//! folds = 5
//!
//! [experiment]
//! sweep = "K"
//! levels = [10, 20, 40]
//! reps = 20
//! ```

use std::path::Path;

use serde::Deserialize;

use crate::error::{PlsmError, Result};
use crate::optim::{FitConfig, StepMode, StepSizes};
use crate::simulate::SimConfig;

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub sim: Option<SimConfig>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub d: Option<usize>,
    pub s: Option<usize>,
    /// Sparsity as a proportion of `nK`; ignored when `s` is set.
    pub s_prop: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub step: Option<String>,
    pub eta_a: Option<f64>,
    pub eta_w: Option<f64>,
    pub eta_u: Option<f64>,
    pub shrink: Option<f64>,
    pub sufficient_decrease: Option<f64>,
    pub initial_step: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CvSection {
    pub d_grid: Option<Vec<usize>>,
    pub s_grid: Option<Vec<usize>>,
    pub s_props: Option<Vec<f64>>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub sweep: Option<String>,
    pub levels: Option<Vec<f64>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    /// Sparsity budget as a multiple of the true support size.
    pub s_ratio: Option<f64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PlsmError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| PlsmError::io(path, e))?;
        Self::parse(&text).map_err(|e| PlsmError::Config(format!("{}: {e}", path.display())))
    }
}

impl FitSection {
    /// Sparsity budget for a network with `n·k` preference entries.
    pub fn budget(&self, n: usize, k: usize) -> Option<usize> {
        self.s
            .or_else(|| self.s_prop.map(|q| ((q * (n * k) as f64).round() as usize).max(1)))
    }

    /// Applies the optimizer keys on top of `base`.
    pub fn apply(&self, mut base: FitConfig) -> Result<FitConfig> {
        if let Some(v) = self.max_iters {
            base.max_iters = v;
        }
        if let Some(v) = self.tol {
            base.tol = v;
        }
        if let Some(v) = self.seed {
            base.seed = v;
        }
        match self.step.as_deref() {
            None | Some("backtracking") => {
                let StepMode::Backtracking {
                    shrink,
                    sufficient_decrease,
                    initial,
                } = StepMode::default()
                else {
                    unreachable!("default step mode is backtracking")
                };
                if self.eta_a.is_some() || self.eta_w.is_some() || self.eta_u.is_some() {
                    return Err(PlsmError::Config(
                        "eta_a/eta_w/eta_u need step = \"fixed\"".into(),
                    ));
                }
                base.step_mode = StepMode::Backtracking {
                    shrink: self.shrink.unwrap_or(shrink),
                    sufficient_decrease: self.sufficient_decrease.unwrap_or(sufficient_decrease),
                    initial: self.initial_step.unwrap_or(initial),
                };
            }
            Some("fixed") => {
                let (Some(a), Some(w), Some(u)) = (self.eta_a, self.eta_w, self.eta_u) else {
                    return Err(PlsmError::Config(
                        "fixed steps need eta_a, eta_w and eta_u".into(),
                    ));
                };
                base.step_mode = StepMode::Fixed(StepSizes::new(a, w, u));
            }
            Some(other) => {
                return Err(PlsmError::Config(format!(
                    "unknown step mode `{other}` (backtracking or fixed)"
                )))
            }
        }
        Ok(base)
    }
}
