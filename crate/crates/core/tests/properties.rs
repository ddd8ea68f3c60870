mod common;

use nalgebra::{DMatrix, DVector};
use plsm::metrics::precision_recall;
use plsm::{
    check_parameter_space, procrustes_distance, project_rows_to_sphere, relative_errors, truncate,
    ModelParams,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, lo: f64, hi: f64) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(lo..hi, rows * cols).prop_map(move |v| DMatrix::from_vec(rows, cols, v))
}

fn sized_matrix(lo: f64, hi: f64) -> impl Strategy<Value = DMatrix<f64>> {
    (1usize..8, 1usize..6).prop_flat_map(move |(r, c)| matrix(r, c, lo, hi))
}

/// Random orthogonal matrix from the QR factors of a Gaussian matrix.
fn orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
    g.qr().q()
}

proptest! {
    #[test]
    fn truncate_is_idempotent_sparse_and_nonnegative(w in sized_matrix(-3.0, 3.0), frac in 0.0f64..=1.0) {
        let s = (frac * w.len() as f64).floor() as usize;
        let t = truncate(&w, s).unwrap();
        prop_assert!(t.iter().filter(|&&v| v != 0.0).count() <= s);
        prop_assert!(t.iter().all(|&v| v >= 0.0 && v.is_sign_positive()));
        prop_assert_eq!(&truncate(&t, s).unwrap(), &t);
        // every kept positive entry is at least as large as every dropped one
        let kept_min = t.iter().copied().filter(|&v| v > 0.0).fold(f64::INFINITY, f64::min);
        for (a, b) in w.iter().zip(t.iter()) {
            if *b == 0.0 && *a > 0.0 {
                prop_assert!(*a <= kept_min);
            }
        }
    }

    #[test]
    fn projection_is_idempotent(u in sized_matrix(-2.0, 2.0)) {
        prop_assume!((0..u.nrows()).all(|i| u.row(i).norm() > 1e-6));
        let p = project_rows_to_sphere(&u).unwrap();
        for i in 0..p.nrows() {
            prop_assert!((p.row(i).norm() - 1.0).abs() < 1e-12);
        }
        let pp = project_rows_to_sphere(&p).unwrap();
        prop_assert!((&pp - &p).amax() < 1e-15);
    }

    #[test]
    fn bounded_parameters_bound_the_log_odds(
        n in 2usize..7, k in 1usize..4, d in 1usize..3, m1 in 0.5f64..8.0, seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DVector::from_fn(n, |_, _| rng.gen_range(-m1 / 4.0..=m1 / 4.0));
        // row norms of W at most sqrt(M1/2)
        let mut w = DMatrix::from_fn(n, k, |_, _| rng.gen_range(0.0..1.0));
        w[(0, 0)] = 0.0;
        for i in 0..n {
            let norm = w.row(i).norm();
            let target = rng.gen_range(0.0..=1.0) * (m1 / 2.0).sqrt();
            if norm > 0.0 {
                w.row_mut(i).scale_mut(target / norm);
            }
        }
        let u = project_rows_to_sphere(&DMatrix::from_fn(n, d, |_, _| rng.gen_range(0.1..1.0))).unwrap();
        let p = ModelParams::new(a, w, u).unwrap();
        let chk = check_parameter_space(&p, m1, 0.5).unwrap();
        prop_assert!(chk.baseline_bounded && chk.preference_bounded && chk.unit_rows);
        prop_assert!(chk.max_abs_log_odds <= m1 * (1.0 + 1e-12), "{} > {}", chk.max_abs_log_odds, m1);
    }

    #[test]
    fn procrustes_is_symmetric_and_rotation_blind(
        u1 in matrix(6, 3, -1.0, 1.0), u2 in matrix(6, 3, -1.0, 1.0), seed in any::<u64>(),
    ) {
        let (d12, r) = procrustes_distance(&u1, &u2).unwrap();
        let (d21, _) = procrustes_distance(&u2, &u1).unwrap();
        prop_assert!((d12 - d21).abs() < 1e-9 * (1.0 + d12));
        prop_assert!(((&u1 - &u2 * &r).norm() - d12).abs() < 1e-12);
        prop_assert!(d12 <= (&u1 - &u2).norm() + 1e-12);
        let q = orthogonal(3, seed);
        let (dq, _) = procrustes_distance(&u1, &(&u2 * q)).unwrap();
        prop_assert!((dq - d12).abs() < 1e-9 * (1.0 + d12));
    }

    #[test]
    fn pr_curve_matches_brute_force(
        data in prop::collection::vec((0u8..6, any::<bool>()), 1..40),
    ) {
        let scores: Vec<f64> = data.iter().map(|(s, _)| *s as f64 / 5.0).collect();
        let ys: Vec<u8> = data.iter().map(|(_, y)| *y as u8).collect();
        let pos = ys.iter().filter(|&&y| y == 1).count();
        prop_assume!(pos > 0);
        let curve = precision_recall(&scores, &ys).unwrap();

        let mut thresholds = scores.clone();
        thresholds.sort_by(f64::total_cmp);
        thresholds.dedup();
        prop_assert_eq!(curve.points.len(), thresholds.len());
        let mut brute = Vec::new();
        for (pt, &t) in curve.points.iter().zip(&thresholds) {
            let predicted: Vec<usize> = (0..scores.len()).filter(|&i| scores[i] >= t).collect();
            let tp = predicted.iter().filter(|&&i| ys[i] == 1).count();
            let precision = tp as f64 / predicted.len() as f64;
            let recall = tp as f64 / pos as f64;
            prop_assert_eq!(pt.threshold, t);
            prop_assert!((pt.precision - precision).abs() < 1e-15);
            prop_assert!((pt.recall - recall).abs() < 1e-15);
            brute.push((recall, precision));
        }
        // trapezoids from the highest threshold downwards, anchored flat at recall 0
        brute.reverse();
        let mut auc = brute[0].0 * brute[0].1;
        for w in brute.windows(2) {
            auc += (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0;
        }
        prop_assert!((curve.auc - auc).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&curve.auc));
    }
}

#[test]
fn log_odds_and_errors_are_rotation_invariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let truth = common::random_params(&mut rng, 12, 4, 3);
    let est = common::random_params(&mut rng, 12, 4, 3);
    let base = relative_errors(&est, &truth).unwrap().rel_u;
    for seed in 0..20 {
        let q = orthogonal(3, seed);
        let rotated = est.rotated(&q).unwrap();
        for k in 0..4 {
            let diff = (est.log_odds_matrix(k).unwrap() - rotated.log_odds_matrix(k).unwrap()).amax();
            assert!(diff <= 1e-10, "rotation {seed}: {diff}");
        }
        let rel = relative_errors(&rotated, &truth).unwrap().rel_u;
        assert!((rel - base).abs() <= 1e-8, "rotation {seed}: {rel} vs {base}");
    }
}
