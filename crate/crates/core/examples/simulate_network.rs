//! Draws a sparse preference model and a multi-edge network from it, then
//! writes both to disk.
//!
//! ```text
//! cargo run --example simulate_network -- [seed] [out-dir]
//! ```

use std::path::PathBuf;

use plsm::io::{save_model, save_network, ModelFile};
use plsm::{simulate, SimConfig};

fn main() -> plsm::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(std::env::temp_dir);

    let cfg = SimConfig {
        m: 2,
        seed,
        ..SimConfig::default()
    };
    let (truth, net) = simulate(&cfg)?;

    println!("n = {}, K = {}, documents per pair = {}", net.n(), net.n_topics(), cfg.m);
    println!("cells: {}", net.cell_count());
    println!("density: {:.4}", net.density());
    println!("nonzero preferences: {} of {}", truth.w_nnz(), cfg.n * cfg.k);

    // edges per topic layer
    let mut per_topic = vec![0usize; net.n_topics()];
    for (cell, y) in net.cells() {
        per_topic[cell.k] += y as usize;
    }
    println!("edges per topic: {per_topic:?}");

    let net_path = dir.join(format!("plsm-sim-{seed}.net"));
    let model_path = dir.join(format!("plsm-sim-{seed}.model"));
    save_network(&net, &net_path)?;
    save_model(&ModelFile::new(truth).with_meta("seed", seed.to_string()), &model_path)?;
    println!("wrote {} and {}", net_path.display(), model_path.display());
    Ok(())
}
