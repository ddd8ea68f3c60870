//! Model parameters and the log-odds surface.
//!
//! The log odds of an edge between nodes `i` and `j` on topic `k` is
//!
//! ```text
//! Λ_ij^(k) = a_i + a_j + W_ik · W_jk · ⟨u_i, u_j⟩
//! ```
//!
//! with baseline effects `a`, nonnegative node-topic preferences `W` and
//! latent positions `U` whose rows lie on the unit sphere. Replacing `U`
//! by `U·R` for any orthogonal `R` leaves every log odds unchanged, so `U`
//! is only identified up to rotation.

use nalgebra::{DMatrix, DVector};

use crate::error::{PlsmError, Result};
use crate::math::sigmoid;

/// Tolerance for the unit-row invariant of `U`.
pub const UNIT_ROW_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Node baseline effects, length `n`.
    pub a: DVector<f64>,
    /// Node-topic preference weights, `n × K`, nonnegative.
    pub w: DMatrix<f64>,
    /// Latent positions, `n × d`, unit rows.
    pub u: DMatrix<f64>,
}

impl ModelParams {
    /// Builds parameters and checks every invariant (consistent shapes,
    /// `W ≥ 0`, unit rows of `U`).
    pub fn new(a: DVector<f64>, w: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        let p = Self::from_raw(a, w, u)?;
        if let Some(((i, k), v)) = p
            .w
            .iter()
            .enumerate()
            .map(|(idx, v)| ((idx % p.w.nrows(), idx / p.w.nrows()), v))
            .find(|(_, v)| !(**v >= 0.0))
        {
            return Err(PlsmError::arg(format!("W[{i},{k}] = {v} is negative")));
        }
        for i in 0..p.n() {
            let norm = p.u.row(i).norm();
            if (norm - 1.0).abs() > UNIT_ROW_TOL {
                return Err(PlsmError::arg(format!(
                    "row {i} of U has norm {norm}, expected 1"
                )));
            }
        }
        Ok(p)
    }

    /// Builds parameters checking only that the shapes agree.
    pub fn from_raw(a: DVector<f64>, w: DMatrix<f64>, u: DMatrix<f64>) -> Result<Self> {
        let n = a.len();
        if w.nrows() != n || u.nrows() != n {
            return Err(PlsmError::Shape(format!(
                "a has {n} entries, W has {} rows, U has {} rows",
                w.nrows(),
                u.nrows()
            )));
        }
        if w.ncols() == 0 || u.ncols() == 0 {
            return Err(PlsmError::Shape("K and d must be positive".into()));
        }
        Ok(Self { a, w, u })
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn n_topics(&self) -> usize {
        self.w.ncols()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Number of nonzero entries of `W`.
    pub fn w_nnz(&self) -> usize {
        self.w.iter().filter(|&&v| v != 0.0).count()
    }

    fn check_indices(&self, i: usize, j: usize, k: usize) -> Result<()> {
        for v in [i, j] {
            if v >= self.n() {
                return Err(PlsmError::Index {
                    what: "node",
                    index: v,
                    bound: self.n(),
                });
            }
        }
        if k >= self.n_topics() {
            return Err(PlsmError::Index {
                what: "topic",
                index: k,
                bound: self.n_topics(),
            });
        }
        if i == j {
            return Err(PlsmError::arg(format!("self-pair ({i}, {i}) is not modeled")));
        }
        Ok(())
    }

    /// Inner product of latent positions; symmetric by construction.
    #[inline]
    pub(crate) fn gram(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.u.row(lo).dot(&self.u.row(hi))
    }

    #[inline]
    pub(crate) fn log_odds_unchecked(&self, i: usize, j: usize, k: usize) -> f64 {
        let (lo, hi) = if i < j { (i, j) } else { (j, i) };
        self.a[lo] + self.a[hi] + self.w[(lo, k)] * self.w[(hi, k)] * self.gram(lo, hi)
    }

    /// Log odds `Λ_ij^(k)`. Exactly symmetric in `(i, j)`.
    pub fn log_odds(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.check_indices(i, j, k)?;
        Ok(self.log_odds_unchecked(i, j, k))
    }

    /// Edge probability `ψ(Λ_ij^(k))`.
    pub fn edge_probability(&self, i: usize, j: usize, k: usize) -> Result<f64> {
        self.log_odds(i, j, k).map(sigmoid)
    }

    /// Full `n × n` log-odds matrix for topic `k`; the diagonal is left at zero.
    pub fn log_odds_matrix(&self, k: usize) -> Result<DMatrix<f64>> {
        if k >= self.n_topics() {
            return Err(PlsmError::Index {
                what: "topic",
                index: k,
                bound: self.n_topics(),
            });
        }
        let n = self.n();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = self.log_odds_unchecked(i, j, k);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        Ok(m)
    }

    /// Parameters with `U` replaced by `U·R`.
    pub fn rotated(&self, r: &DMatrix<f64>) -> Result<Self> {
        if r.nrows() != self.dim() || r.ncols() != self.dim() {
            return Err(PlsmError::Shape(format!(
                "rotation is {}x{}, latent dimension is {}",
                r.nrows(),
                r.ncols(),
                self.dim()
            )));
        }
        Ok(Self {
            a: self.a.clone(),
            w: self.w.clone(),
            u: &self.u * r,
        })
    }
}

/// Outcome of checking parameters against the bounded parameter space
/// `Ω(M1)` used by the convergence theory.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSpaceCheck {
    pub m1: f64,
    pub c: f64,
    /// `‖a‖_∞ ≤ M1/4`
    pub baseline_bounded: bool,
    /// `max_i Σ_k W_ik² ≤ M1/2`
    pub preference_bounded: bool,
    /// `‖W‖_0 < nK`
    pub has_zero_preference: bool,
    /// `‖u_i‖ = 1` for all rows
    pub unit_rows: bool,
    /// `max Λ ≤ −(1−C)·M1`
    pub log_odds_bounded: bool,
    pub max_log_odds: f64,
    pub max_abs_log_odds: f64,
}

impl ParameterSpaceCheck {
    pub fn passes(&self) -> bool {
        self.baseline_bounded
            && self.preference_bounded
            && self.has_zero_preference
            && self.unit_rows
            && self.log_odds_bounded
    }
}

pub fn check_parameter_space(params: &ModelParams, m1: f64, c: f64) -> Result<ParameterSpaceCheck> {
    if !(c > 0.0 && c < 1.0) {
        return Err(PlsmError::arg(format!("C = {c} must lie in (0, 1)")));
    }
    if !(m1 >= 0.0) {
        return Err(PlsmError::arg(format!("M1 = {m1} must be nonnegative")));
    }
    let n = params.n();
    let k_count = params.n_topics();
    let a_inf = params.a.amax();
    let row_sq_max = (0..n)
        .map(|i| params.w.row(i).norm_squared())
        .fold(0.0f64, f64::max);
    let unit_rows = (0..n).all(|i| (params.u.row(i).norm() - 1.0).abs() <= UNIT_ROW_TOL);

    let mut max_log_odds = f64::NEG_INFINITY;
    let mut max_abs = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..k_count {
                let v = params.log_odds_unchecked(i, j, k);
                max_log_odds = max_log_odds.max(v);
                max_abs = max_abs.max(v.abs());
            }
        }
    }

    Ok(ParameterSpaceCheck {
        m1,
        c,
        baseline_bounded: a_inf <= m1 / 4.0,
        preference_bounded: row_sq_max <= m1 / 2.0,
        has_zero_preference: params.w_nnz() < n * k_count,
        unit_rows,
        log_odds_bounded: max_log_odds <= -(1.0 - c) * m1,
        max_log_odds,
        max_abs_log_odds: max_abs,
    })
}
