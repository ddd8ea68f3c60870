//! Chooses the latent dimension and sparsity budget by edge cross-validation.
//! Takes a minute or so in release mode.

use plsm::tuning::{sparsity_from_proportions, DEFAULT_S_PROPORTIONS};
use plsm::{cross_validate, simulate, FitConfig, SimConfig};

fn main() -> plsm::Result<()> {
    let cfg = SimConfig {
        seed: 11,
        ..SimConfig::default()
    };
    let (_, net) = simulate(&cfg)?;

    let d_grid = [1, 2, 3];
    let s_grid = sparsity_from_proportions(&DEFAULT_S_PROPORTIONS[1..4], cfg.n, cfg.k)?;
    // a looser tolerance keeps the grid affordable
    let template = FitConfig {
        tol: 1e-6,
        max_iters: 500,
        ..FitConfig::new(2, s_grid[0])
    };
    let cv = cross_validate(&net, &d_grid, &s_grid, 5, &template, cfg.seed)?;

    println!("held-out cells per fold: {:?}", cv.predictions_per_fold);
    println!("  d     s   mean deviance");
    for c in &cv.candidates {
        let mark = if (c.d, c.s) == cv.selected { " <-" } else { "" };
        match c.mean_deviance {
            Some(m) => println!("{:>3} {:>5} {:>14.2}{mark}", c.d, c.s, m),
            None => println!("{:>3} {:>5}  failed: {}", c.d, c.s, c.failure.as_deref().unwrap_or("")),
        }
    }
    println!(
        "selected d = {}, s = {} (true d = {}, true support = {})",
        cv.selected.0,
        cv.selected.1,
        cfg.d,
        cfg.support_size()
    );
    Ok(())
}
