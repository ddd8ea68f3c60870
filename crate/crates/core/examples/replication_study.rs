//! Small replication study over the number of topics, written as a raw
//! table and an aggregate with 95% quantile intervals.
//!
//! ```text
//! cargo run --release --example replication_study -- [reps] [out-dir]
//! ```

use std::path::PathBuf;

use plsm::experiment::{run_experiment, ExperimentSpec, Sweep};
use plsm::SimConfig;

fn main() -> plsm::Result<()> {
    let mut args = std::env::args().skip(1);
    let reps = args.next().and_then(|s| s.parse().ok()).unwrap_or(4);
    let dir = args.next().map(PathBuf::from).unwrap_or_else(std::env::temp_dir);

    let base = SimConfig {
        n: 60,
        ..SimConfig::default()
    };
    let mut spec = ExperimentSpec::new(base, Sweep::K, vec![5.0, 10.0, 20.0]);
    spec.reps = reps;
    spec.seed = 2;
    let table = run_experiment(&spec)?;

    println!("level  metric     mean     2.5%    97.5%  failed");
    for row in table.aggregate() {
        if ["rel_a", "rel_u", "tpr", "fpr"].contains(&row.metric) {
            println!(
                "{:>5}  {:<8} {:7.4}  {:7.4}  {:7.4}  {:>6}",
                row.level, row.metric, row.mean, row.q025, row.q975, row.failures
            );
        }
    }
    let raw = dir.join("plsm-replication.csv");
    let agg = dir.join("plsm-replication.agg.csv");
    table.write(&raw, &agg)?;
    println!("wrote {} and {}", raw.display(), agg.display());
    Ok(())
}
