//! Synthetic ground truth and networks.
//!
//! Draw order within one parameter stream is fixed: baselines `a`, then the
//! latent positions `U` row by row, then the support of `W`, then its
//! nonzero values in ascending row-major position. Edges come from a
//! separate stream, drawn pair by pair (row-major), document by document,
//! topic by topic.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{PlsmError, Result};
use crate::math::sigmoid;
use crate::model::ModelParams;
use crate::network::{MultiEdgeNetwork, NetworkBuilder};

/// Range of the nonzero preference weights.
pub const DEFAULT_W_RANGE: (f64, f64) = (0.5, 3.5);

/// Baseline ranges for the four reference edge densities
/// (≈ 0.04, 0.08, 0.12, 0.16).
pub const DENSITY_LEVELS: [(f64, (f64, f64)); 4] = [
    (0.04, (-3.5, -1.8)),
    (0.08, (-3.0, -1.0)),
    (0.12, (-2.0, -1.0)),
    (0.16, (-1.4, -0.9)),
];

/// Baseline range for a nominal density level, if it is one of the four
/// reference levels.
pub fn baseline_range_for_density(density: f64) -> Option<(f64, f64)> {
    DENSITY_LEVELS
        .iter()
        .find(|(d, _)| (d - density).abs() < 1e-9)
        .map(|&(_, r)| r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub d: usize,
    /// Documents per pair.
    pub m: usize,
    /// Proportion of nonzero entries in `W`.
    pub q0: f64,
    pub a_low: f64,
    pub a_high: f64,
    pub w_low: f64,
    pub w_high: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 100,
            k: 10,
            d: 2,
            m: 1,
            q0: 0.7,
            a_low: -3.0,
            a_high: -1.0,
            w_low: DEFAULT_W_RANGE.0,
            w_high: DEFAULT_W_RANGE.1,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(PlsmError::arg("n must be at least 2"));
        }
        if self.k == 0 || self.d == 0 || self.d > self.n {
            return Err(PlsmError::arg("K must be positive and d must lie in [1, n]"));
        }
        if self.m == 0 {
            return Err(PlsmError::arg("m must be at least 1"));
        }
        if !(self.q0 > 0.0 && self.q0 <= 1.0) {
            return Err(PlsmError::arg(format!("q0 = {} must lie in (0, 1]", self.q0)));
        }
        if !(self.a_low < self.a_high) {
            return Err(PlsmError::arg("a_low must be below a_high"));
        }
        if !(self.w_low > 0.0 && self.w_low <= self.w_high) {
            return Err(PlsmError::arg("weight range must be positive and ordered"));
        }
        Ok(())
    }

    /// Number of nonzero entries of the generated `W*`.
    pub fn support_size(&self) -> usize {
        (self.q0 * (self.n * self.k) as f64).round() as usize
    }
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ground-truth parameters for a simulation setting.
pub fn gen_params(cfg: &SimConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (n, k, d) = (cfg.n, cfg.k, cfg.d);

    let a = DVector::from_iterator(n, (0..n).map(|_| rng.gen_range(cfg.a_low..cfg.a_high)));

    let mut u = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut norm = 0.0;
        while !(norm > 0.0) {
            for c in 0..d {
                u[(i, c)] = rng.sample::<f64, _>(StandardNormal);
            }
            norm = u.row(i).norm();
        }
        u.row_mut(i).unscale_mut(norm);
    }

    let mut support = sample(&mut rng, n * k, cfg.support_size()).into_vec();
    support.sort_unstable();
    let mut w = DMatrix::zeros(n, k);
    for flat in support {
        let v = if cfg.w_low == cfg.w_high {
            cfg.w_low
        } else {
            rng.gen_range(cfg.w_low..cfg.w_high)
        };
        w[(flat / k, flat % k)] = v;
    }

    ModelParams::new(a, w, u)
}

/// Draws `m` documents per pair from the model.
pub fn gen_network(truth: &ModelParams, m: usize, seed: u64) -> Result<MultiEdgeNetwork> {
    if m == 0 {
        return Err(PlsmError::arg("m must be at least 1"));
    }
    let n = truth.n();
    let k = truth.n_topics();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut builder = NetworkBuilder::new(n, k)?;
    let mut probs = vec![0.0; k];
    for i in 0..n {
        for j in i + 1..n {
            for (kk, p) in probs.iter_mut().enumerate() {
                *p = sigmoid(truth.log_odds_unchecked(i, j, kk));
            }
            let mut rows = Vec::with_capacity(m * k);
            for _ in 0..m {
                for &p in &probs {
                    rows.push((rng.gen::<f64>() < p) as u8);
                }
            }
            builder.pair(i, j, rows)?;
        }
    }
    builder.build()
}

/// Ground truth plus one network drawn from it; the edge stream seed is
/// derived from the configuration seed.
pub fn simulate(cfg: &SimConfig) -> Result<(ModelParams, MultiEdgeNetwork)> {
    let truth = gen_params(cfg)?;
    let net = gen_network(&truth, cfg.m, derive_seed(cfg.seed, 1))?;
    Ok((truth, net))
}
