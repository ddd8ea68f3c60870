//! Fits the model by projected gradient descent from a spectral start and
//! compares the estimate with the generating parameters.

use plsm::{
    fit, initialize_svt, relative_errors, simulate, support_rates, FitConfig, ObservationMask,
    SimConfig,
};

fn main() -> plsm::Result<()> {
    let cfg = SimConfig {
        seed: 3,
        ..SimConfig::default()
    };
    let (truth, net) = simulate(&cfg)?;
    let s = cfg.support_size();

    let init = initialize_svt(&net, cfg.d, s, cfg.seed)?;
    let start = relative_errors(&init, &truth)?;

    let config = FitConfig::new(cfg.d, s);
    let report = fit(&net, &ObservationMask::full(&net), &config, init, Some(&truth))?;
    let end = relative_errors(&report.params, &truth)?;

    println!(
        "{} iterations, converged = {}, objective {:.3}",
        report.iterations,
        report.converged,
        report.objective()
    );
    println!("            rel_a    rel_W    rel_U    rel_P");
    for (name, e) in [("spectral", start), ("fitted", end)] {
        println!(
            "{name:<10} {:8.4} {:8.4} {:8.4} {:8.4}",
            e.rel_a, e.rel_w, e.rel_u, e.rel_prob
        );
    }
    let (tpr, fpr) = support_rates(&report.params.w, &truth.w)?;
    println!("support: TPR {tpr:.3}, FPR {fpr:.3}");

    let e = report.trace.error.as_deref().unwrap_or_default();
    for t in [0, 5, 10, 20, e.len().saturating_sub(1)] {
        if let Some(v) = e.get(t) {
            println!("e_{t:<3} = {v:.4e}");
        }
    }
    Ok(())
}
