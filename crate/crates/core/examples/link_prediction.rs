//! Hides a fifth of every layer, refits on the rest and ranks the hidden
//! cells by predicted probability.

use plsm::experiment::{evaluate_predictions, holdout_mask, predict_cells};
use plsm::init::initialize_svt_masked;
use plsm::{fit, simulate, FitConfig, SimConfig};

fn main() -> plsm::Result<()> {
    let cfg = SimConfig {
        seed: 5,
        ..SimConfig::default()
    };
    let (_, net) = simulate(&cfg)?;
    let s = cfg.support_size();

    let hidden = holdout_mask(&net, 0.2, 99)?;
    let train = hidden.complement();
    let init = initialize_svt_masked(&net, &train, cfg.d, s, cfg.seed)?;
    let report = fit(&net, &train, &FitConfig::new(cfg.d, s), init, None)?;

    let mut preds = predict_cells(&report.params, &net, &hidden)?;
    let curve = evaluate_predictions(&preds, &net)?;
    let positives = preds.iter().filter(|p| matches!(net.y(p.cell()), Ok(1))).count();
    let base_rate = positives as f64 / preds.len() as f64;

    println!("held out {} cells, {} edges", preds.len(), positives);
    println!("PR-AUC {:.3} vs base rate {:.3}", curve.auc, base_rate);

    preds.sort_by(|a, b| b.prob.total_cmp(&a.prob));
    println!("top-ranked hidden cells:");
    for p in preds.iter().take(8) {
        let y = net.y(p.cell())?;
        println!("  ({:>2}, {:>2}) doc {} topic {}  p = {:.3}  y = {y}", p.i, p.j, p.l, p.k, p.prob);
    }
    Ok(())
}
