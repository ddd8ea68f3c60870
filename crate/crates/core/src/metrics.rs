//! Evaluation quantities: Procrustes distance, relative errors, the
//! combined iterate error `e_t`, support recovery rates and
//! precision-recall curves.

use nalgebra::{DMatrix, SVD};

use crate::error::{PlsmError, Result};
use crate::math::sigmoid;
use crate::model::ModelParams;

/// `min_R ‖U1 − U2·R‖_F` over orthogonal `R`, with the minimizer.
///
/// With `U2ᵀU1 = A Σ Bᵀ` the minimizer is `R = A Bᵀ`.
pub fn procrustes_distance(u1: &DMatrix<f64>, u2: &DMatrix<f64>) -> Result<(f64, DMatrix<f64>)> {
    if u1.shape() != u2.shape() {
        return Err(PlsmError::Shape(format!(
            "Procrustes inputs are {:?} and {:?}",
            u1.shape(),
            u2.shape()
        )));
    }
    let cross = u2.transpose() * u1;
    let svd = SVD::new(cross, true, true);
    let a = svd.u.expect("left singular vectors requested");
    let bt = svd.v_t.expect("right singular vectors requested");
    let r = a * bt;
    let dist = (u1 - u2 * &r).norm();
    Ok((dist, r))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorSummary {
    pub rel_a: f64,
    pub rel_w: f64,
    pub rel_u: f64,
    pub rel_prob: f64,
}

fn same_shape(est: &ModelParams, truth: &ModelParams) -> Result<()> {
    if est.n() != truth.n() || est.n_topics() != truth.n_topics() || est.dim() != truth.dim() {
        return Err(PlsmError::Shape(format!(
            "estimate is (n={}, K={}, d={}), truth is (n={}, K={}, d={})",
            est.n(),
            est.n_topics(),
            est.dim(),
            truth.n(),
            truth.n_topics(),
            truth.dim()
        )));
    }
    Ok(())
}

fn ratio(num: f64, den: f64, what: &str) -> Result<f64> {
    if den == 0.0 {
        return Err(PlsmError::arg(format!("{what}: truth has zero norm")));
    }
    Ok(num / den)
}

/// Squared relative errors of `a`, `W`, `U` (after optimal rotation) and
/// of the edge-probability surface averaged over topics. Diagonal cells
/// are excluded from the probability error.
pub fn relative_errors(est: &ModelParams, truth: &ModelParams) -> Result<ErrorSummary> {
    same_shape(est, truth)?;
    let rel_a = ratio((&est.a - &truth.a).norm_squared(), truth.a.norm_squared(), "a")?;
    let rel_w = ratio((&est.w - &truth.w).norm_squared(), truth.w.norm_squared(), "W")?;
    let (du, _) = procrustes_distance(&est.u, &truth.u)?;
    let rel_u = ratio(du * du, truth.u.norm_squared(), "U")?;

    let n = est.n();
    let k_count = est.n_topics();
    let mut rel_prob = 0.0;
    for k in 0..k_count {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let pe = sigmoid(est.log_odds_unchecked(i, j, k));
                let pt = sigmoid(truth.log_odds_unchecked(i, j, k));
                num += (pe - pt) * (pe - pt);
                den += pt * pt;
            }
        }
        rel_prob += ratio(num, den, "edge probabilities")?;
    }
    rel_prob /= k_count as f64;

    Ok(ErrorSummary {
        rel_a,
        rel_w,
        rel_u,
        rel_prob,
    })
}

/// `e = 2Kn‖a − a*‖² + σ₁*² w_max² ‖W − W*‖²_F + K σ₁*² w_max⁴ dist²(U, U*)`.
pub fn error_metric_et(est: &ModelParams, truth: &ModelParams, sigma1: f64, wmax: f64) -> Result<f64> {
    same_shape(est, truth)?;
    if !(sigma1 > 0.0 && wmax > 0.0) {
        return Err(PlsmError::arg("sigma1 and wmax must be positive"));
    }
    let k = est.n_topics() as f64;
    let n = est.n() as f64;
    let s2 = sigma1 * sigma1;
    let w2 = wmax * wmax;
    let (du, _) = procrustes_distance(&est.u, &truth.u)?;
    Ok(2.0 * k * n * (&est.a - &truth.a).norm_squared()
        + s2 * w2 * (&est.w - &truth.w).norm_squared()
        + k * s2 * w2 * w2 * du * du)
}

/// True and false positive rates of the estimated support `Ŵ > 0` against
/// the true support `W* > 0`.
pub fn support_rates(w_est: &DMatrix<f64>, w_true: &DMatrix<f64>) -> Result<(f64, f64)> {
    if w_est.shape() != w_true.shape() {
        return Err(PlsmError::Shape(format!(
            "W estimates are {:?} and {:?}",
            w_est.shape(),
            w_true.shape()
        )));
    }
    let (mut tp, mut pos, mut fp, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (&e, &t) in w_est.iter().zip(w_true.iter()) {
        if t > 0.0 {
            pos += 1;
            tp += (e > 0.0) as usize;
        } else {
            neg += 1;
            fp += (e > 0.0) as usize;
        }
    }
    if pos == 0 {
        return Err(PlsmError::UndefinedRate("true W has no nonzero entries".into()));
    }
    if neg == 0 {
        return Err(PlsmError::UndefinedRate("true W has no zero entries".into()));
    }
    Ok((tp as f64 / pos as f64, fp as f64 / neg as f64))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Precision-recall curve ordered by ascending threshold (so recall is
/// non-increasing along the list).
#[derive(Clone, Debug, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    pub auc: f64,
}

/// Sweeps every unique score as a threshold, predicting positive when
/// `score ≥ threshold`. The area is the trapezoid rule over recall, with
/// the curve extended flat from its highest-threshold point to recall 0.
pub fn precision_recall(scores: &[f64], ys: &[u8]) -> Result<PrCurve> {
    if scores.len() != ys.len() {
        return Err(PlsmError::Shape(format!(
            "{} scores for {} outcomes",
            scores.len(),
            ys.len()
        )));
    }
    if scores.is_empty() {
        return Err(PlsmError::arg("precision-recall needs at least one prediction"));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(PlsmError::arg(format!("score {s} is not a number")));
    }
    let total_pos = ys.iter().filter(|&&y| y != 0).count();
    if total_pos == 0 {
        return Err(PlsmError::UndefinedRate("no positive outcomes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&x, &y| scores[y].total_cmp(&scores[x]));

    // Descending sweep: after consuming all items with score ≥ t we have
    // the confusion counts for threshold t.
    let mut desc = Vec::new();
    let (mut tp, mut seen) = (0usize, 0usize);
    let mut idx = 0;
    while idx < order.len() {
        let t = scores[order[idx]];
        while idx < order.len() && scores[order[idx]] == t {
            tp += (ys[order[idx]] != 0) as usize;
            seen += 1;
            idx += 1;
        }
        desc.push(PrPoint {
            threshold: t,
            precision: tp as f64 / seen as f64,
            recall: tp as f64 / total_pos as f64,
        });
    }

    let mut auc = desc[0].recall * desc[0].precision;
    for w in desc.windows(2) {
        auc += (w[1].recall - w[0].recall) * (w[1].precision + w[0].precision) / 2.0;
    }
    desc.reverse();
    Ok(PrCurve { points: desc, auc })
}
