//! Latent positions are identified only up to rotation. The Procrustes
//! distance ignores it; a raw Frobenius difference does not.

use nalgebra::DMatrix;
use plsm::{procrustes_distance, relative_errors, simulate, SimConfig};

fn main() -> plsm::Result<()> {
    let (truth, _) = simulate(&SimConfig {
        n: 30,
        k: 4,
        d: 3,
        seed: 1,
        ..SimConfig::default()
    })?;

    let angle = 0.9f64;
    let (c, s) = (angle.cos(), angle.sin());
    let r = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
    let rotated = truth.rotated(&r)?;

    let raw = (&rotated.u - &truth.u).norm();
    let (dist, best) = procrustes_distance(&rotated.u, &truth.u)?;
    println!("Frobenius difference after rotation: {raw:.4}");
    println!("Procrustes distance:                 {dist:.2e}");
    println!("recovered rotation differs from the applied one by {:.1e}", (&best - &r).amax());

    // log odds are unchanged, so every relative error stays at zero
    let e = relative_errors(&rotated, &truth)?;
    println!("relative errors: a {:.1e}, W {:.1e}, U {:.1e}, P {:.1e}", e.rel_a, e.rel_w, e.rel_u, e.rel_prob);
    let lo = (rotated.log_odds_matrix(0)? - truth.log_odds_matrix(0)?).amax();
    println!("largest change in topic-0 log odds: {lo:.1e}");
    Ok(())
}
