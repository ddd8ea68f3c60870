use plsm::simulate::{derive_seed, DENSITY_LEVELS};
use plsm::{gen_network, gen_params, simulate, SimConfig};

#[test]
fn edge_frequencies_match_probabilities() {
    let cfg = SimConfig {
        n: 5,
        k: 3,
        q0: 0.6,
        a_low: -1.5,
        a_high: 0.5,
        seed: 11,
        ..SimConfig::default()
    };
    let truth = gen_params(&cfg).unwrap();
    let m = 10_000;
    let net = gen_network(&truth, m, derive_seed(cfg.seed, 1)).unwrap();
    for i in 0..5 {
        for j in i + 1..5 {
            let block = net.block(i, j).unwrap();
            for k in 0..3 {
                let p = truth.edge_probability(i, j, k).unwrap();
                let hits = (0..m).filter(|&l| block[l * 3 + k] == 1).count();
                let freq = hits as f64 / m as f64;
                let se = (p * (1.0 - p) / m as f64).sqrt();
                assert!(
                    (freq - p).abs() <= 3.0 * se,
                    "({i}, {j}, {k}): frequency {freq} vs probability {p}"
                );
            }
        }
    }
}

#[test]
fn default_setting_has_reference_density() {
    let mut total = 0.0;
    for seed in 0..5 {
        let (_, net) = simulate(&SimConfig {
            seed,
            ..SimConfig::default()
        })
        .unwrap();
        total += net.density();
    }
    let mean = total / 5.0;
    assert!((mean - 0.08).abs() <= 0.02, "mean density {mean}");
}

#[test]
fn density_levels_are_ordered() {
    let mut last = 0.0;
    for (nominal, (lo, hi)) in DENSITY_LEVELS {
        let (_, net) = simulate(&SimConfig {
            a_low: lo,
            a_high: hi,
            seed: 3,
            ..SimConfig::default()
        })
        .unwrap();
        let dens = net.density();
        assert!(dens > last, "density {dens} at level {nominal} not above {last}");
        last = dens;
    }
}

#[test]
fn same_seed_same_network() {
    let cfg = SimConfig {
        n: 30,
        k: 5,
        m: 2,
        seed: 99,
        ..SimConfig::default()
    };
    assert_eq!(simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
}
