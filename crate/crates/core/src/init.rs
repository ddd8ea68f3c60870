//! Spectral (singular value thresholding) starting point for the optimizer.
//!
//! 1. Pool each pair's outcomes over topics and documents into an empirical
//!    probability, clipped to `[ε, 1 − ε]` with `ε = 1/(2nK)`.
//! 2. Take logits, `M_ii = 0`.
//! 3. Fit `M_ij ≈ a_i + a_j` over `i < j` by least squares; the normal
//!    equations are `((n−2)I + 11ᵀ) a = rowsums(M)`, solved in closed form.
//! 4. Eigendecompose the off-diagonal residual and embed with the top `d`
//!    positive eigenpairs; rows are scaled onto the unit sphere.
//! 5. Start `W` flat at the level implied by the mean kept eigenvalue and
//!    truncate it to `s` entries.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PlsmError, Result};
use crate::math::logit;
use crate::model::ModelParams;
use crate::network::{MultiEdgeNetwork, ObservationMask};
use crate::optim::truncate;

/// Clipped logits of pooled per-pair edge frequencies.
pub fn pooled_logits(net: &MultiEdgeNetwork) -> DMatrix<f64> {
    pooled_logits_masked(net, &ObservationMask::full(net))
}

/// [`pooled_logits`] using only the masked cells. A pair without masked
/// cells takes the overall masked frequency.
pub fn pooled_logits_masked(net: &MultiEdgeNetwork, mask: &ObservationMask) -> DMatrix<f64> {
    let n = net.n();
    let k = net.n_topics();
    let eps = 1.0 / (2.0 * n as f64 * k as f64);
    let mut freqs = Vec::with_capacity(net.n_pairs());
    let (mut all_ones, mut all_seen) = (0usize, 0usize);
    let mut cell = 0usize;
    for p in 0..net.n_pairs() {
        let block = net.block_at(p);
        let (mut ones, mut seen) = (0usize, 0usize);
        for (off, &y) in block.iter().enumerate() {
            if mask.contains(cell + off) {
                ones += y as usize;
                seen += 1;
            }
        }
        cell += block.len();
        all_ones += ones;
        all_seen += seen;
        freqs.push((seen > 0).then(|| ones as f64 / seen as f64));
    }
    let overall = if all_seen > 0 {
        all_ones as f64 / all_seen as f64
    } else {
        0.5
    };
    let mut m = DMatrix::zeros(n, n);
    for ((i, j), f) in net.pairs().zip(freqs) {
        let v = logit(f.unwrap_or(overall).clamp(eps, 1.0 - eps));
        m[(i, j)] = v;
        m[(j, i)] = v;
    }
    m
}

/// Least-squares baselines for `M_ij ≈ a_i + a_j` over `i < j`.
///
/// Uses `((n−2)I + 11ᵀ)⁻¹ = (I − 11ᵀ/(2n−2)) / (n−2)`; for `n = 2` the
/// system is rank one and the minimum-norm solution splits `M_12` evenly.
pub fn baseline_least_squares(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let rows: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum::<f64>()),
    );
    if n == 2 {
        return DVector::from_element(2, m[(0, 1)] / 2.0);
    }
    let alpha = (n - 2) as f64;
    let total = rows.sum();
    rows.map(|r| (r - total / (alpha + n as f64)) / alpha)
}

pub fn initialize_svt(net: &MultiEdgeNetwork, d: usize, s: usize, seed: u64) -> Result<ModelParams> {
    initialize_svt_masked(net, &ObservationMask::full(net), d, s, seed)
}

/// [`initialize_svt`] computed from the masked cells only.
pub fn initialize_svt_masked(
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
    d: usize,
    s: usize,
    seed: u64,
) -> Result<ModelParams> {
    mask.check_against(net)?;
    let n = net.n();
    let k = net.n_topics();
    if d == 0 || d > n {
        return Err(PlsmError::arg(format!("d = {d} must lie in [1, {n}]")));
    }
    if s > n * k {
        return Err(PlsmError::arg(format!("s = {s} exceeds nK = {}", n * k)));
    }
    let m = pooled_logits_masked(net, mask);
    let a = baseline_least_squares(&m);

    let mut resid = m;
    for i in 0..n {
        for j in 0..n {
            resid[(i, j)] = if i == j { 0.0 } else { resid[(i, j)] - a[i] - a[j] };
        }
    }

    let eig = SymmetricEigen::new(resid);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let scale = eig.eigenvalues.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let cutoff = 1e-8 * scale;
    let kept: Vec<usize> = order
        .iter()
        .copied()
        .take(d)
        .filter(|&c| eig.eigenvalues[c] > cutoff)
        .collect();
    let lambda_mean = if kept.is_empty() {
        0.0
    } else {
        kept.iter().map(|&c| eig.eigenvalues[c]).sum::<f64>() / kept.len() as f64
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = DMatrix::zeros(n, d);
    for (col, &c) in kept.iter().enumerate() {
        let root = eig.eigenvalues[c].sqrt();
        for i in 0..n {
            u[(i, col)] = eig.eigenvectors[(i, c)] * root;
        }
    }
    // Deficient directions get random entries at the scale of the kept ones.
    let fill = if lambda_mean > 0.0 {
        (lambda_mean / n as f64).sqrt()
    } else {
        1.0
    };
    for col in kept.len()..d {
        for i in 0..n {
            u[(i, col)] = fill * rng.sample::<f64, _>(StandardNormal);
        }
    }
    for i in 0..n {
        let mut norm = u.row(i).norm();
        while !(norm > 0.0) {
            for col in 0..d {
                u[(i, col)] = rng.sample(StandardNormal);
            }
            norm = u.row(i).norm();
        }
        u.row_mut(i).unscale_mut(norm);
    }

    // With unit rows the top-d eigenvalues of c²·UUᵀ average c²·n/d.
    let level = (lambda_mean.max(0.0) * d as f64 / n as f64).sqrt();
    let w = truncate(&DMatrix::from_element(n, k, level), s)?;
    ModelParams::new(a, w, u)
}
