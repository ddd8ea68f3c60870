//! Projected gradient descent with hard thresholding.
//!
//! Each iteration evaluates all three gradient blocks at the current iterate
//! `(a, W, U)` and then updates
//!
//! ```text
//! a ← a − η_a ∇_a ℓ
//! W ← Truncate(W − η_W ∇_W ℓ, s)
//! U ← rows of (U − η_U ∇_U ℓ) scaled to unit norm
//! ```
//!
//! `Truncate` keeps the `s` largest entries (ties broken by row, then
//! column) and clamps the survivors at zero from below, so `W` stays
//! nonnegative with at most `s` nonzeros.

use nalgebra::{DMatrix, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{PlsmError, Result};
use crate::likelihood::{check_net, Gradients, Observed};
use crate::metrics::error_metric_et;
use crate::model::ModelParams;
use crate::network::{MultiEdgeNetwork, ObservationMask};

/// Shrink steps tried per block before the block is frozen for one iteration.
const MAX_SHRINKS: usize = 60;
/// Common shrinks of the combined step before falling back to one block.
const JOINT_SHRINKS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub a: f64,
    pub w: f64,
    pub u: f64,
}

impl StepSizes {
    pub const ZERO: StepSizes = StepSizes {
        a: 0.0,
        w: 0.0,
        u: 0.0,
    };

    pub fn new(a: f64, w: f64, u: f64) -> Self {
        Self { a, w, u }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMode {
    Fixed(StepSizes),
    /// Per-block Armijo backtracking. Each search starts from the block's
    /// previous accepted step divided by `shrink`, capped at `initial`.
    Backtracking {
        shrink: f64,
        sufficient_decrease: f64,
        initial: f64,
    },
}

impl Default for StepMode {
    fn default() -> Self {
        StepMode::Backtracking {
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            initial: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitConfig {
    /// Latent dimension.
    pub d: usize,
    /// Sparsity budget: maximum number of nonzero entries of `W`.
    pub s: usize,
    pub max_iters: usize,
    /// Stop once `|ℓ_t − ℓ_{t−1}| / max(1, |ℓ_{t−1}|) < tol`.
    pub tol: f64,
    pub step_mode: StepMode,
    /// Seeds the re-randomization of rows that collapse to zero.
    pub seed: u64,
}

impl FitConfig {
    pub fn new(d: usize, s: usize) -> Self {
        Self {
            d,
            s,
            max_iters: 2000,
            tol: 1e-7,
            step_mode: StepMode::default(),
            seed: 0,
        }
    }

    pub fn validate(&self, n: usize, k: usize) -> Result<()> {
        if self.d == 0 || self.d > n {
            return Err(PlsmError::arg(format!("d = {} must lie in [1, {n}]", self.d)));
        }
        if self.s == 0 || self.s > n * k {
            return Err(PlsmError::arg(format!(
                "s = {} must lie in [1, {}]",
                self.s,
                n * k
            )));
        }
        if self.max_iters == 0 {
            return Err(PlsmError::arg("max_iters must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(PlsmError::arg("tol must be positive"));
        }
        match self.step_mode {
            StepMode::Fixed(st) => {
                if !(st.a > 0.0 && st.w > 0.0 && st.u > 0.0) {
                    return Err(PlsmError::arg("fixed step sizes must be positive"));
                }
            }
            StepMode::Backtracking {
                shrink,
                sufficient_decrease,
                initial,
            } => {
                if !(shrink > 0.0 && shrink < 1.0) {
                    return Err(PlsmError::arg("backtracking shrink must lie in (0, 1)"));
                }
                if !(sufficient_decrease > 0.0 && sufficient_decrease < 1.0) {
                    return Err(PlsmError::arg(
                        "sufficient-decrease constant must lie in (0, 1)",
                    ));
                }
                if !(initial > 0.0) {
                    return Err(PlsmError::arg("initial step must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Per-iteration record. Entry 0 is the starting point with zero steps.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IterTrace {
    pub objective: Vec<f64>,
    pub steps: Vec<StepSizes>,
    /// `e_t` against the supplied ground truth.
    pub error: Option<Vec<f64>>,
}

impl IterTrace {
    pub fn len(&self) -> usize {
        self.objective.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objective.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct FitReport {
    pub params: ModelParams,
    pub trace: IterTrace,
    pub converged: bool,
    pub iterations: usize,
}

impl FitReport {
    pub fn objective(&self) -> f64 {
        *self.trace.objective.last().expect("trace holds the starting point")
    }
}

/// Keeps the `s` largest entries of `w` and zeroes the rest; survivors are
/// clamped at zero from below.
pub fn truncate(w: &DMatrix<f64>, s: usize) -> Result<DMatrix<f64>> {
    let (n, k) = w.shape();
    if s > n * k {
        return Err(PlsmError::arg(format!(
            "sparsity {s} exceeds the {} entries of W",
            n * k
        )));
    }
    // Row-major flat order so that ties resolve by (row, column).
    let mut order: Vec<(usize, usize)> = (0..n).flat_map(|i| (0..k).map(move |c| (i, c))).collect();
    let key = |&(i, c): &(usize, usize)| w[(i, c)];
    if s < n * k {
        order.select_nth_unstable_by(s.saturating_sub(1).min(n * k - 1), |x, y| {
            key(y).total_cmp(&key(x)).then(x.cmp(y))
        });
    }
    let mut out = DMatrix::zeros(n, k);
    for &(i, c) in order.iter().take(s) {
        let v = w[(i, c)];
        out[(i, c)] = if v > 0.0 { v } else { 0.0 };
    }
    Ok(out)
}

/// Scales each row of `u` to unit Euclidean norm.
pub fn project_rows_to_sphere(u: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut out = u.clone();
    for i in 0..u.nrows() {
        let norm = u.row(i).norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(PlsmError::DegenerateRow { row: i });
        }
        out.row_mut(i).unscale_mut(norm);
    }
    Ok(out)
}

/// Like [`project_rows_to_sphere`] but replaces zero rows with random unit rows.
fn project_rows_or_resample(u: &DMatrix<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
    let mut out = u.clone();
    for i in 0..u.nrows() {
        let mut norm = out.row(i).norm();
        while !(norm > 0.0) || !norm.is_finite() {
            for c in 0..u.ncols() {
                out[(i, c)] = rng.sample(StandardNormal);
            }
            norm = out.row(i).norm();
        }
        out.row_mut(i).unscale_mut(norm);
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Block {
    A,
    W,
    U,
}

fn update_block(
    params: &ModelParams,
    grads: &Gradients,
    block: Block,
    eta: f64,
    s: usize,
    rng: &mut impl Rng,
) -> Result<ModelParams> {
    let mut next = params.clone();
    match block {
        Block::A => next.a = &params.a - &grads.a * eta,
        Block::W => next.w = truncate(&(&params.w - &grads.w * eta), s)?,
        Block::U => next.u = project_rows_or_resample(&(&params.u - &grads.u * eta), rng),
    }
    Ok(next)
}

fn apply_steps(
    params: &ModelParams,
    grads: &Gradients,
    steps: StepSizes,
    s: usize,
    rng: &mut impl Rng,
) -> Result<ModelParams> {
    let mut next = params.clone();
    if steps.a > 0.0 {
        next.a = &params.a - &grads.a * steps.a;
    }
    if steps.w > 0.0 {
        next.w = truncate(&(&params.w - &grads.w * steps.w), s)?;
    }
    if steps.u > 0.0 {
        next.u = project_rows_or_resample(&(&params.u - &grads.u * steps.u), rng);
    }
    Ok(next)
}

/// One projected gradient step from the current iterate. All three blocks
/// use gradients evaluated at the incoming `(a, W, U)`.
pub fn pgd_step(
    params: &ModelParams,
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
    steps: StepSizes,
    s: usize,
) -> Result<ModelParams> {
    check_net(params, net)?;
    if !(steps.a > 0.0 && steps.w > 0.0 && steps.u > 0.0) {
        return Err(PlsmError::arg("step sizes must be positive"));
    }
    let obs = Observed::new(net, mask)?;
    let (_, grads) = obs.objective_and_gradients(params)?;
    Ok(ModelParams {
        a: &params.a - &grads.a * steps.a,
        w: truncate(&(&params.w - &grads.w * steps.w), s)?,
        u: project_rows_to_sphere(&(&params.u - &grads.u * steps.u))?,
    })
}

fn block_distance_sq(a: &ModelParams, b: &ModelParams, block: Block) -> f64 {
    match block {
        Block::A => (&a.a - &b.a).norm_squared(),
        Block::W => (&a.w - &b.w).norm_squared(),
        Block::U => (&a.u - &b.u).norm_squared(),
    }
}

struct Accepted {
    params: ModelParams,
    objective: f64,
    steps: StepSizes,
    /// Step found by each block's own search (zero when it failed).
    searched: StepSizes,
}

/// Blockwise Armijo search. Each block is searched with the other two held
/// at the current iterate; the sufficient-decrease test uses the squared
/// norm of the projected step divided by `η²` (the plain gradient norm
/// whenever the projection is inactive). The combined step, shrunk jointly a
/// few times if needed, is taken when it beats every single-block step;
/// otherwise the best single-block step is taken.
fn backtracking_step(
    obs: &Observed,
    params: &ModelParams,
    f0: f64,
    grads: &Gradients,
    s: usize,
    (shrink, c, start): (f64, f64, StepSizes),
    rng: &mut impl Rng,
) -> Result<Accepted> {
    let mut steps = StepSizes::ZERO;
    let mut best: Option<(f64, ModelParams, Block, f64)> = None;
    for block in [Block::A, Block::W, Block::U] {
        let mut eta = match block {
            Block::A => start.a,
            Block::W => start.w,
            Block::U => start.u,
        };
        for _ in 0..MAX_SHRINKS {
            let cand = update_block(params, grads, block, eta, s, rng)?;
            let f = obs.objective(&cand)?;
            let moved = block_distance_sq(&cand, params, block) / eta;
            if f.is_finite() && f <= f0 - c * moved {
                match block {
                    Block::A => steps.a = eta,
                    Block::W => steps.w = eta,
                    Block::U => steps.u = eta,
                }
                if best.as_ref().map_or(true, |b| f < b.0) {
                    best = Some((f, cand, block, eta));
                }
                break;
            }
            eta *= shrink;
        }
    }
    let Some((best_f, best_params, best_block, best_eta)) = best else {
        return Ok(Accepted {
            params: params.clone(),
            objective: f0,
            steps: StepSizes::ZERO,
            searched: StepSizes::ZERO,
        });
    };
    let mut joint_steps = steps;
    for _ in 0..JOINT_SHRINKS {
        let joint = apply_steps(params, grads, joint_steps, s, rng)?;
        let fj = obs.objective(&joint)?;
        if fj.is_finite() && fj <= best_f {
            return Ok(Accepted {
                params: joint,
                objective: fj,
                steps: joint_steps,
                searched: steps,
            });
        }
        joint_steps = StepSizes::new(
            joint_steps.a * shrink,
            joint_steps.w * shrink,
            joint_steps.u * shrink,
        );
    }
    let mut only = StepSizes::ZERO;
    match best_block {
        Block::A => only.a = best_eta,
        Block::W => only.w = best_eta,
        Block::U => only.u = best_eta,
    }
    Ok(Accepted {
        params: best_params,
        objective: best_f,
        steps: only,
        searched: steps,
    })
}

/// Truth-dependent constants of the `e_t` metric.
struct TruthScale<'a> {
    truth: &'a ModelParams,
    sigma1: f64,
    wmax: f64,
}

impl<'a> TruthScale<'a> {
    fn new(truth: &'a ModelParams) -> Self {
        let sigma1 = SVD::new(truth.u.clone(), false, false)
            .singular_values
            .iter()
            .copied()
            .fold(0.0, f64::max);
        let wmax = truth.w.iter().copied().fold(0.0, f64::max);
        Self {
            truth,
            sigma1,
            wmax,
        }
    }

    fn et(&self, p: &ModelParams) -> Result<f64> {
        error_metric_et(p, self.truth, self.sigma1, self.wmax)
    }
}

/// Runs projected gradient descent on the masked cells of `net`.
pub fn fit(
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
    config: &FitConfig,
    init: ModelParams,
    truth: Option<&ModelParams>,
) -> Result<FitReport> {
    check_net(&init, net)?;
    let obs = Observed::new(net, mask)?;
    fit_observed(&obs, config, init, truth)
}

/// [`fit`] on precomputed sufficient statistics.
pub fn fit_observed(
    obs: &Observed,
    config: &FitConfig,
    init: ModelParams,
    truth: Option<&ModelParams>,
) -> Result<FitReport> {
    let n = obs.n();
    let k = obs.n_topics();
    config.validate(n, k)?;
    if init.n() != n || init.n_topics() != k {
        return Err(PlsmError::Shape(format!(
            "initial parameters are for n = {}, K = {}; data has n = {n}, K = {k}",
            init.n(),
            init.n_topics()
        )));
    }
    if init.dim() != config.d {
        return Err(PlsmError::Shape(format!(
            "initial U has {} columns, config asks for d = {}",
            init.dim(),
            config.d
        )));
    }
    let scale = match truth {
        Some(t) => {
            if t.n() != n || t.n_topics() != k || t.dim() != config.d {
                return Err(PlsmError::Shape("ground truth does not match the fit".into()));
            }
            Some(TruthScale::new(t))
        }
        None => None,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = init;
    let mut trace = IterTrace {
        error: scale.as_ref().map(|_| Vec::new()),
        ..IterTrace::default()
    };

    let (mut f, mut grads) = obs.objective_and_gradients(&params)?;
    let record = |trace: &mut IterTrace, f: f64, st: StepSizes, p: &ModelParams| -> Result<()> {
        trace.objective.push(f);
        trace.steps.push(st);
        if let (Some(errs), Some(sc)) = (trace.error.as_mut(), scale.as_ref()) {
            errs.push(sc.et(p)?);
        }
        Ok(())
    };
    record(&mut trace, f, StepSizes::ZERO, &params)?;
    if !f.is_finite() {
        return Err(PlsmError::Divergence {
            iteration: 0,
            trace: Box::new(trace),
        });
    }

    let mut converged = false;
    let mut iterations = 0;
    let mut searched = StepSizes::ZERO;
    for t in 1..=config.max_iters {
        let (next, f_next, steps) = match config.step_mode {
            StepMode::Fixed(st) => {
                let next = apply_steps(&params, &grads, st, config.s, &mut rng)?;
                let f_next = obs.objective(&next)?;
                (next, f_next, st)
            }
            StepMode::Backtracking {
                shrink,
                sufficient_decrease,
                initial,
            } => {
                let warm = |prev: f64| {
                    if prev > 0.0 {
                        (prev / shrink).min(initial)
                    } else {
                        initial
                    }
                };
                let start = StepSizes::new(warm(searched.a), warm(searched.w), warm(searched.u));
                let acc = backtracking_step(
                    obs,
                    &params,
                    f,
                    &grads,
                    config.s,
                    (shrink, sufficient_decrease, start),
                    &mut rng,
                )?;
                searched = acc.searched;
                (acc.params, acc.objective, acc.steps)
            }
        };
        iterations = t;
        record(&mut trace, f_next, steps, &next)?;
        if !f_next.is_finite() {
            return Err(PlsmError::Divergence {
                iteration: t,
                trace: Box::new(trace),
            });
        }
        let rel = (f_next - f).abs() / f.abs().max(1.0);
        params = next;
        f = f_next;
        if rel < config.tol {
            converged = true;
            break;
        }
        grads = obs.objective_and_gradients(&params)?.1;
    }

    Ok(FitReport {
        params,
        trace,
        converged,
        iterations,
    })
}

/// Step sizes from the convergence theory:
/// `η_a = η/(4Kn)`, `η_W = η/(4σ₁²w_max²)`, `η_U = η/(2Kσ₁²w_max⁴)` with
/// `η = κ₀²(16 − ρ)e^{M1}/4`.
pub fn theoretical_steps(
    sigma1: f64,
    wmax: f64,
    k: usize,
    n: usize,
    m1: f64,
    kappa0: f64,
    rho: f64,
) -> StepSizes {
    let eta = kappa0 * kappa0 * (16.0 - rho) * m1.exp() / 4.0;
    let s2 = sigma1 * sigma1;
    let w2 = wmax * wmax;
    StepSizes {
        a: eta / (4.0 * k as f64 * n as f64),
        w: eta / (4.0 * s2 * w2),
        u: eta / (2.0 * k as f64 * s2 * w2 * w2),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn truncate_keeps_top_s() {
        let w = dmatrix![3.0, -1.0; 0.5, 2.0];
        assert_eq!(truncate(&w, 2).unwrap(), dmatrix![3.0, 0.0; 0.0, 2.0]);
    }

    #[test]
    fn truncate_identity_when_full_and_nonnegative() {
        let w = dmatrix![3.0, 0.0; 0.5, 2.0];
        assert_eq!(truncate(&w, 4).unwrap(), w);
    }

    #[test]
    fn truncate_all_negative_clamps() {
        let w = dmatrix![-3.0, -1.0; -0.5, -2.0];
        let t = truncate(&w, 1).unwrap();
        assert_eq!(t.iter().filter(|&&v| v != 0.0).count(), 0);
        assert!(t.iter().all(|&v| v == 0.0 && v.is_sign_positive()));
    }

    #[test]
    fn truncate_ties_prefer_lower_index() {
        let w = DMatrix::from_element(3, 2, 1.5);
        let t = truncate(&w, 3).unwrap();
        assert_eq!(t, dmatrix![1.5, 1.5; 1.5, 0.0; 0.0, 0.0]);
        assert!(truncate(&w, 7).is_err());
        assert_eq!(truncate(&w, 0).unwrap(), DMatrix::zeros(3, 2));
    }

    #[test]
    fn projection_normalizes() {
        let u = dmatrix![3.0, 4.0; 0.0, -2.0];
        let p = project_rows_to_sphere(&u).unwrap();
        assert!((p[(0, 0)] - 0.6).abs() < 1e-15 && (p[(0, 1)] - 0.8).abs() < 1e-15);
        assert_eq!(p.row(1), dmatrix![0.0, -1.0].row(0));
        let u0 = dmatrix![1.0, 0.0; 0.0, 0.0];
        assert!(matches!(
            project_rows_to_sphere(&u0),
            Err(PlsmError::DegenerateRow { row: 1 })
        ));
    }

    #[test]
    fn resampling_replaces_zero_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u0 = dmatrix![1.0, 0.0; 0.0, 0.0];
        let p = project_rows_or_resample(&u0, &mut rng);
        assert!((p.row(1).norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn theoretical_steps_unit_case() {
        let st = theoretical_steps(2.0, 1.0, 10, 100, 0.0, 1.0, 0.0);
        assert!((st.a - 1.0 / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn theoretical_steps_hand_values() {
        // η = 15.75 e / 4
        let eta = 15.75 * std::f64::consts::E / 4.0;
        let st = theoretical_steps(2.0, 1.0, 10, 100, 1.0, 1.0, 0.25);
        assert!((st.a - eta / 4000.0).abs() < 1e-15);
        assert!((st.w - eta / 16.0).abs() < 1e-15);
        assert!((st.u - eta / 80.0).abs() < 1e-15);
    }

    #[test]
    fn doubling_k_halves_a_and_u_steps() {
        let s1 = theoretical_steps(3.0, 2.0, 10, 50, 0.5, 1.2, 0.1);
        let s2 = theoretical_steps(3.0, 2.0, 20, 50, 0.5, 1.2, 0.1);
        assert!((s2.a - s1.a / 2.0).abs() < 1e-15);
        assert!((s2.u - s1.u / 2.0).abs() < 1e-15);
        assert_eq!(s2.w, s1.w);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::new(2, 5).validate(4, 2).is_ok());
        assert!(FitConfig::new(0, 5).validate(4, 2).is_err());
        assert!(FitConfig::new(5, 5).validate(4, 2).is_err());
        assert!(FitConfig::new(2, 9).validate(4, 2).is_err());
        let mut c = FitConfig::new(2, 5);
        c.tol = 0.0;
        assert!(c.validate(4, 2).is_err());
        c.tol = 1e-6;
        c.step_mode = StepMode::Fixed(StepSizes::new(0.1, 0.0, 0.1));
        assert!(c.validate(4, 2).is_err());
    }
}
