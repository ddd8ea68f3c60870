//! Weighted negative log-likelihood and its analytic gradients.
//!
//! ```text
//! ℓ(a, W, U) = Σ_{i<j} Σ_k Σ_{l masked} (1/m_ij) · [ softplus(Λ_ij^(k)) − y_ijl^(k) Λ_ij^(k) ]
//! ```
//!
//! Because `Λ_ij^(k)` does not depend on the document `l`, each
//! `(pair, topic)` collapses to two sufficient statistics: the weighted
//! count of masked cells `c/m` and the weighted count of masked ones `y/m`.
//! [`Observed`] precomputes them once per mask so the optimizer's inner loop
//! touches `n(n−1)/2 · K` terms regardless of the document counts.
//!
//! With residual `r_ij^(k) = (c/m)·ψ(Λ) − (y/m)` the gradients are
//!
//! ```text
//! ∇_a ℓ[i]    = Σ_k Σ_{j≠i} r_ij^(k)
//! ∇_W ℓ[i,k]  = Σ_{j≠i} r_ij^(k) · W_jk · ⟨u_i, u_j⟩
//! ∇_U ℓ[i,·]  = Σ_k Σ_{j≠i} r_ij^(k) · W_ik · W_jk · u_j
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{PlsmError, Result};
use crate::math::{softplus, softplus_and_sigmoid};
use crate::model::ModelParams;
use crate::network::{MultiEdgeNetwork, ObservationMask};

/// Gradient blocks of the negative log-likelihood.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub a: DVector<f64>,
    pub w: DMatrix<f64>,
    pub u: DMatrix<f64>,
}

/// Per `(pair, topic)` sufficient statistics of a masked network.
#[derive(Clone, Debug)]
pub struct Observed {
    n: usize,
    k: usize,
    /// `count_masked / m_ij`, indexed `p * K + k`.
    weight: Vec<f64>,
    /// `ones_masked / m_ij`, indexed `p * K + k`.
    ones: Vec<f64>,
    /// Pairs with at least one masked cell.
    active: Vec<bool>,
}

impl Observed {
    pub fn new(net: &MultiEdgeNetwork, mask: &ObservationMask) -> Result<Self> {
        mask.check_against(net)?;
        let k_count = net.n_topics();
        let pairs = net.n_pairs();
        let mut weight = vec![0.0; pairs * k_count];
        let mut ones = vec![0.0; pairs * k_count];
        let mut active = vec![false; pairs];
        let mut cell = 0usize;
        for p in 0..pairs {
            let block = net.block_at(p);
            let m = net.docs_at(p);
            let mut counts = vec![0usize; k_count];
            let mut pos = vec![0usize; k_count];
            for (off, &y) in block.iter().enumerate() {
                if mask.contains(cell + off) {
                    let k = off % k_count;
                    counts[k] += 1;
                    pos[k] += y as usize;
                }
            }
            cell += block.len();
            for k in 0..k_count {
                if counts[k] > 0 {
                    active[p] = true;
                    weight[p * k_count + k] = counts[k] as f64 / m as f64;
                    ones[p * k_count + k] = pos[k] as f64 / m as f64;
                }
            }
        }
        Ok(Self {
            n: net.n(),
            k: k_count,
            weight,
            ones,
            active,
        })
    }

    /// Builds statistics directly. `weight[p*K + k]` is the weighted count
    /// of observed cells and `ones[p*K + k]` the weighted sum of outcomes,
    /// which may be fractional (a continuous relaxation of binary edges).
    pub fn from_stats(n: usize, k: usize, weight: Vec<f64>, ones: Vec<f64>) -> Result<Self> {
        let len = crate::network::pair_count(n) * k;
        if weight.len() != len || ones.len() != len {
            return Err(PlsmError::Shape(format!(
                "expected {len} statistics, got {} and {}",
                weight.len(),
                ones.len()
            )));
        }
        let active = weight.chunks(k).map(|c| c.iter().any(|&w| w != 0.0)).collect();
        Ok(Self {
            n,
            k,
            weight,
            ones,
            active,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_topics(&self) -> usize {
        self.k
    }

    fn check(&self, params: &ModelParams) -> Result<()> {
        if params.n() != self.n || params.n_topics() != self.k {
            return Err(PlsmError::Shape(format!(
                "parameters are for n = {}, K = {}; data has n = {}, K = {}",
                params.n(),
                params.n_topics(),
                self.n,
                self.k
            )));
        }
        Ok(())
    }

    pub fn objective(&self, params: &ModelParams) -> Result<f64> {
        self.check(params)?;
        let n = self.n;
        let kc = self.k;
        let d = params.dim();
        let (ub, wb) = row_major(params);
        let a = params.a.as_slice();
        let mut total = 0.0;
        let mut p = 0usize;
        for i in 0..n {
            let ui = &ub[i * d..(i + 1) * d];
            let wi = &wb[i * kc..(i + 1) * kc];
            for j in i + 1..n {
                if self.active[p] {
                    let uj = &ub[j * d..(j + 1) * d];
                    let wj = &wb[j * kc..(j + 1) * kc];
                    let g = dot(ui, uj);
                    let base = a[i] + a[j];
                    let wt = &self.weight[p * kc..(p + 1) * kc];
                    let on = &self.ones[p * kc..(p + 1) * kc];
                    for k in 0..kc {
                        if wt[k] == 0.0 {
                            continue;
                        }
                        let lam = base + wi[k] * wj[k] * g;
                        total += wt[k] * softplus(lam) - on[k] * lam;
                    }
                }
                p += 1;
            }
        }
        Ok(total)
    }

    pub fn objective_and_gradients(&self, params: &ModelParams) -> Result<(f64, Gradients)> {
        self.check(params)?;
        let n = self.n;
        let kc = self.k;
        let d = params.dim();
        let (ub, wb) = row_major(params);
        let a = params.a.as_slice();
        let mut ga = vec![0.0; n];
        let mut gw = vec![0.0; n * kc];
        let mut gu = vec![0.0; n * d];
        let mut total = 0.0;
        let mut p = 0usize;
        for i in 0..n {
            for j in i + 1..n {
                if !self.active[p] {
                    p += 1;
                    continue;
                }
                let ui = &ub[i * d..(i + 1) * d];
                let uj = &ub[j * d..(j + 1) * d];
                let wi = &wb[i * kc..(i + 1) * kc];
                let wj = &wb[j * kc..(j + 1) * kc];
                let g = dot(ui, uj);
                let base = a[i] + a[j];
                let wt = &self.weight[p * kc..(p + 1) * kc];
                let on = &self.ones[p * kc..(p + 1) * kc];
                let mut ra = 0.0;
                let mut coef_u = 0.0;
                for k in 0..kc {
                    if wt[k] == 0.0 {
                        continue;
                    }
                    let ww = wi[k] * wj[k];
                    let lam = base + ww * g;
                    let (sp, prob) = softplus_and_sigmoid(lam);
                    total += wt[k] * sp - on[k] * lam;
                    let r = wt[k] * prob - on[k];
                    ra += r;
                    gw[i * kc + k] += r * wj[k] * g;
                    gw[j * kc + k] += r * wi[k] * g;
                    coef_u += r * ww;
                }
                ga[i] += ra;
                ga[j] += ra;
                if coef_u != 0.0 {
                    for c in 0..d {
                        gu[i * d + c] += coef_u * uj[c];
                        gu[j * d + c] += coef_u * ui[c];
                    }
                }
                p += 1;
            }
        }
        Ok((
            total,
            Gradients {
                a: DVector::from_vec(ga),
                w: DMatrix::from_row_slice(n, kc, &gw),
                u: DMatrix::from_row_slice(n, d, &gu),
            },
        ))
    }
}

#[inline]
fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn row_major(params: &ModelParams) -> (Vec<f64>, Vec<f64>) {
    let ub = params.u.transpose().as_slice().to_vec();
    let wb = params.w.transpose().as_slice().to_vec();
    (ub, wb)
}

/// Negative log-likelihood over the masked cells.
pub fn neg_log_likelihood(
    params: &ModelParams,
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
) -> Result<f64> {
    check_net(params, net)?;
    Observed::new(net, mask)?.objective(params)
}

/// Gradients of [`neg_log_likelihood`] with respect to `a`, `W` and `U`.
pub fn gradients(
    params: &ModelParams,
    net: &MultiEdgeNetwork,
    mask: &ObservationMask,
) -> Result<Gradients> {
    check_net(params, net)?;
    Ok(Observed::new(net, mask)?.objective_and_gradients(params)?.1)
}

pub(crate) fn check_net(params: &ModelParams, net: &MultiEdgeNetwork) -> Result<()> {
    if params.n() != net.n() || params.n_topics() != net.n_topics() {
        return Err(PlsmError::Shape(format!(
            "parameters are for n = {}, K = {}; network has n = {}, K = {}",
            params.n(),
            params.n_topics(),
            net.n(),
            net.n_topics()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::sigmoid;
    use crate::network::NetworkBuilder;
    use nalgebra::{dmatrix, dvector};

    fn single_cell() -> (ModelParams, MultiEdgeNetwork) {
        let p = ModelParams::new(
            dvector![0.0, 0.0],
            dmatrix![1.0; 1.0],
            dmatrix![1.0, 0.0; 1.0, 0.0],
        )
        .unwrap();
        let mut b = NetworkBuilder::new(2, 1).unwrap();
        b.pair(0, 1, vec![1]).unwrap();
        (p, b.build().unwrap())
    }

    #[test]
    fn single_cell_value() {
        let (p, net) = single_cell();
        let v = neg_log_likelihood(&p, &net, &ObservationMask::full(&net)).unwrap();
        // log(1 + e) - 1
        assert!((v - 0.313_261_687_518_222_8).abs() < 1e-12, "{v}");
    }

    #[test]
    fn single_cell_gradient() {
        let (p, net) = single_cell();
        let g = gradients(&p, &net, &ObservationMask::full(&net)).unwrap();
        let expect = sigmoid(1.0) - 1.0;
        assert!((expect - (-0.268_941_421_369_995_1)).abs() < 1e-15);
        assert!((g.a[0] - expect).abs() < 1e-15);
        assert!((g.a[1] - expect).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_is_zero() {
        let (p, net) = single_cell();
        let v = neg_log_likelihood(&p, &net, &ObservationMask::none(&net)).unwrap();
        assert_eq!(v, 0.0);
        let g = gradients(&p, &net, &ObservationMask::none(&net)).unwrap();
        assert!(g.a.iter().chain(g.w.iter()).chain(g.u.iter()).all(|&x| x == 0.0));
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let p = ModelParams::new(
            dvector![-0.4, 0.2, -1.0],
            dmatrix![1.0, 0.0; 0.5, 2.0; 1.5, 0.7],
            dmatrix![1.0, 0.0; 0.6, 0.8; 0.0, -1.0],
        )
        .unwrap();
        let mut weight = Vec::new();
        let mut ones = Vec::new();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            for k in 0..2 {
                weight.push(1.0);
                ones.push(sigmoid(p.log_odds(i, j, k).unwrap()));
            }
        }
        let obs = Observed::from_stats(3, 2, weight, ones).unwrap();
        let (_, g) = obs.objective_and_gradients(&p).unwrap();
        for x in g.a.iter().chain(g.w.iter()).chain(g.u.iter()) {
            assert!(x.abs() < 1e-15, "{x}");
        }
    }

    #[test]
    fn extreme_log_odds_stay_finite() {
        for a in [-250.0, 250.0] {
            let p = ModelParams::new(
                dvector![a, a],
                dmatrix![0.0; 0.0],
                dmatrix![1.0; 1.0],
            )
            .unwrap();
            for y in [0u8, 1] {
                let mut b = NetworkBuilder::new(2, 1).unwrap();
                b.pair(0, 1, vec![y]).unwrap();
                let net = b.build().unwrap();
                let v = neg_log_likelihood(&p, &net, &ObservationMask::full(&net)).unwrap();
                assert!(v.is_finite(), "a={a} y={y}");
                let g = gradients(&p, &net, &ObservationMask::full(&net)).unwrap();
                assert!(g.a.iter().all(|x| x.is_finite()));
            }
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let (p, _) = single_cell();
        let net = MultiEdgeNetwork::empty(3, 1).unwrap();
        assert!(neg_log_likelihood(&p, &net, &ObservationMask::full(&net)).is_err());
    }
}
