#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use plsm::{gradients, neg_log_likelihood, ModelParams, MultiEdgeNetwork, NetworkBuilder, ObservationMask};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Parameters with unit latent rows and a random sparse nonnegative W.
pub fn random_params(rng: &mut ChaCha8Rng, n: usize, k: usize, d: usize) -> ModelParams {
    let a = DVector::from_fn(n, |_, _| rng.gen_range(-2.0..0.5));
    let w = DMatrix::from_fn(n, k, |_, _| {
        if rng.gen_bool(0.6) {
            rng.gen_range(0.2..2.0)
        } else {
            0.0
        }
    });
    let mut u = DMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    for i in 0..n {
        let norm = u.row(i).norm();
        u.row_mut(i).unscale_mut(norm);
    }
    ModelParams::new(a, w, u).unwrap()
}

/// Network with between 1 and `max_m` documents per pair, outcomes uniform.
pub fn random_network(rng: &mut ChaCha8Rng, n: usize, k: usize, max_m: usize) -> MultiEdgeNetwork {
    let mut b = NetworkBuilder::new(n, k).unwrap();
    for i in 0..n {
        for j in i + 1..n {
            let m = rng.gen_range(1..=max_m);
            let rows = (0..m * k).map(|_| rng.gen_bool(0.3) as u8).collect();
            b.pair(i, j, rows).unwrap();
        }
    }
    b.build().unwrap()
}

/// Scalar negative log-likelihood straight from the definition.
pub fn naive_nll(p: &ModelParams, net: &MultiEdgeNetwork) -> f64 {
    let n = p.n();
    let k_count = p.n_topics();
    let mut total = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let m = net.docs(i, j).unwrap();
            for l in 0..m {
                for k in 0..k_count {
                    let mut dot = 0.0;
                    for c in 0..p.dim() {
                        dot += p.u[(i, c)] * p.u[(j, c)];
                    }
                    let lam = p.a[i] + p.a[j] + p.w[(i, k)] * p.w[(j, k)] * dot;
                    let y = net.block(i, j).unwrap()[l * k_count + k] as f64;
                    total += ((1.0 + lam.exp()).ln() - y * lam) / m as f64;
                }
            }
        }
    }
    total
}

const H: f64 = 1e-5;

fn central_difference(base: &ModelParams, net: &MultiEdgeNetwork, bump: impl Fn(&mut ModelParams, f64)) -> f64 {
    let mask = ObservationMask::full(net);
    let mut plus = base.clone();
    bump(&mut plus, H);
    let mut minus = base.clone();
    bump(&mut minus, -H);
    let fp = neg_log_likelihood(&plus, net, &mask).unwrap();
    let fm = neg_log_likelihood(&minus, net, &mask).unwrap();
    (fp - fm) / (2.0 * H)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

/// Worst coordinate relative error of the analytic gradient against central
/// differences on a random instance with n <= 6, K <= 4, d <= 3, m <= 3.
pub fn worst_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=6);
    let k = rng.gen_range(1..=4);
    let d = rng.gen_range(1..=3);
    let p = random_params(&mut rng, n, k, d);
    // The gradient is of the unconstrained objective, so move U off the sphere too.
    let u = DMatrix::from_fn(n, d, |i, c| p.u[(i, c)] * rng.gen_range(0.5..1.5));
    let p = ModelParams::from_raw(p.a.clone(), p.w.clone(), u).unwrap();
    let net = random_network(&mut rng, n, k, 3);
    let g = gradients(&p, &net, &ObservationMask::full(&net)).unwrap();

    let mut worst = 0.0f64;
    for i in 0..n {
        let fd = central_difference(&p, &net, |q, h| q.a[i] += h);
        worst = worst.max(rel_err(g.a[i], fd));
        for c in 0..k {
            let fd = central_difference(&p, &net, |q, h| q.w[(i, c)] += h);
            worst = worst.max(rel_err(g.w[(i, c)], fd));
        }
        for c in 0..d {
            let fd = central_difference(&p, &net, |q, h| q.u[(i, c)] += h);
            worst = worst.max(rel_err(g.u[(i, c)], fd));
        }
    }
    worst
}
