//! Checks simulated parameters against the bounded parameter space of the
//! convergence theory and prints the step sizes it prescribes.
//!
//! The default simulation has strong preferences and sits outside the
//! space; a weak-signal setting with baselines near `−M1/4` sits inside.

use plsm::{check_parameter_space, simulate, theoretical_steps, SimConfig};

fn report(label: &str, cfg: &SimConfig, m1: f64, c: f64) -> plsm::Result<()> {
    let (truth, _) = simulate(cfg)?;
    let check = check_parameter_space(&truth, m1, c)?;
    println!("{label}: M1 = {m1}, C = {c}, passes = {}", check.passes());
    println!(
        "  |a| bounded {}, W rows bounded {}, sparse {}, unit rows {}, log odds bounded {} (max {:.3})",
        check.baseline_bounded,
        check.preference_bounded,
        check.has_zero_preference,
        check.unit_rows,
        check.log_odds_bounded,
        check.max_log_odds,
    );

    let wmax = truth.w.max();
    let sigma1 = truth.u.singular_values().max();
    let steps = theoretical_steps(sigma1, wmax, cfg.k, cfg.n, m1, 0.5, 1.0);
    println!(
        "  sigma1 {sigma1:.3}, w_max {wmax:.3}, steps a {:.3e} W {:.3e} U {:.3e}",
        steps.a, steps.w, steps.u
    );
    Ok(())
}

fn main() -> plsm::Result<()> {
    report("default", &SimConfig::default(), 16.0, 0.6)?;
    let weak = SimConfig {
        a_low: -3.0,
        a_high: -2.8,
        w_low: 0.2,
        w_high: 0.5,
        ..SimConfig::default()
    };
    report("weak signal", &weak, 12.0, 0.6)
}
