use dipls_core::evaluation::{compute_metrics, exact_w1};
use dipls_core::model::{covariance, dipls_weight};
use dipls_core::spectral::{band_rms, to_db};
use dipls_core::{fit, Domain, DomainDataset, FitConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(rng: &mut ChaCha8Rng, n: usize, p: usize, shift: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, j| rng.random_range(-1.0..1.0) * (1.0 + j as f64 * 0.3) + shift)
}

fn centered(x: &DMatrix<f64>) -> DMatrix<f64> {
    let means = x.row_mean();
    let mut out = x.clone();
    for mut row in out.row_iter_mut() {
        row -= &means;
    }
    out
}

struct Problem {
    xs: DMatrix<f64>,
    y: DVector<f64>,
    xt: DMatrix<f64>,
}

fn problem(seed: u64, ns: usize, nt: usize, p: usize) -> Problem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs = matrix(&mut rng, ns, p, 0.0);
    let xt = matrix(&mut rng, nt, p, 0.7);
    let beta = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    let y = &xs * &beta + DVector::from_fn(ns, |_, _| 45.0 + rng.random_range(-0.2..0.2));
    Problem { xs, y, xt }
}

fn predict(pr: &Problem, config: &FitConfig) -> DVector<f64> {
    let s = DomainDataset::from_matrix(pr.xs.clone(), Some(pr.y.clone()), "s").unwrap();
    let t = DomainDataset::from_matrix(pr.xt.clone(), None, "t").unwrap();
    fit(config, &s, &t).unwrap().predict(&pr.xt, Domain::Target).unwrap()
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        idx.swap(i, rng.random_range(0..=i));
    }
    idx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// The closed-form weight zeroes the gradient of the objective with the
    /// penalty weighted by lambda / 2, where the gap term is non-negative.
    #[test]
    fn closed_form_is_stationary_for_half_lambda(seed in any::<u64>(), lambda in 0.01f64..50.0) {
        let pr = problem(seed, 30, 30, 5);
        let (xs, xt) = (centered(&pr.xs), centered(&pr.xt));
        let y = &pr.y - DVector::from_element(pr.y.len(), pr.y.mean());
        let d = covariance(&xs) - covariance(&xt);
        let w = dipls_weight(&xs, &y, &xs, &xt, lambda, 1e-10).unwrap().weight;
        let xty = xs.tr_mul(&y);
        // (y'y I + lambda/2 D) w must be parallel to X'y
        let lhs = y.dot(&y) * &w + 0.5 * lambda * (&d * &w);
        let cos = lhs.dot(&xty) / (lhs.norm() * xty.norm());
        prop_assert!((cos - 1.0).abs() < 1e-10, "cos {}", cos);
    }

    #[test]
    fn predictions_follow_row_permutations(seed in any::<u64>(), lambda in 0.0f64..100.0, k in 1usize..5) {
        let pr = problem(seed, 25, 20, 6);
        let config = FitConfig::default().with_components(k).with_lambda(lambda);
        let base = predict(&pr, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let ps = permutation(&mut rng, pr.xs.nrows());
        let pt = permutation(&mut rng, pr.xt.nrows());
        let shuffled = Problem {
            xs: pr.xs.select_rows(&ps),
            y: pr.y.select_rows(&ps),
            xt: pr.xt.select_rows(&pt),
        };
        let moved = predict(&shuffled, &config);
        for (i, &r) in pt.iter().enumerate() {
            prop_assert!((moved[i] - base[r]).abs() < 1e-8);
        }
    }

    #[test]
    fn predictions_ignore_feature_order(seed in any::<u64>(), lambda in 0.0f64..100.0) {
        let pr = problem(seed, 25, 20, 6);
        let config = FitConfig::default().with_components(3).with_lambda(lambda);
        let base = predict(&pr, &config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xdef);
        let pc = permutation(&mut rng, 6);
        let swapped = Problem {
            xs: pr.xs.select_columns(&pc),
            y: pr.y.clone(),
            xt: pr.xt.select_columns(&pc),
        };
        let moved = predict(&swapped, &config);
        prop_assert!((moved - base).amax() < 1e-8);
    }

    /// Per-domain centering makes predictions blind to constant offsets of
    /// either block; a label offset shifts every prediction by the same amount.
    #[test]
    fn offsets_are_absorbed_by_centering(seed in any::<u64>(), lambda in 0.0f64..100.0, shift in -20.0f64..20.0) {
        let pr = problem(seed, 25, 20, 6);
        let config = FitConfig::default().with_components(3).with_lambda(lambda);
        let base = predict(&pr, &config);
        let offset = DMatrix::from_fn(1, 6, |_, j| shift * (j as f64 - 2.5));
        let add = |x: &DMatrix<f64>| {
            let mut out = x.clone();
            for mut row in out.row_iter_mut() {
                row += &offset;
            }
            out
        };
        let moved = predict(&Problem { xs: add(&pr.xs), y: pr.y.add_scalar(shift), xt: add(&pr.xt) }, &config);
        prop_assert!((moved - base.add_scalar(shift)).amax() < 1e-8);
    }

    #[test]
    fn wasserstein_axioms(seed in any::<u64>(), na in 1usize..8, nb in 1usize..8, nc in 1usize..8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = matrix(&mut rng, na, 2, 0.0);
        let b = matrix(&mut rng, nb, 2, 0.5);
        let c = matrix(&mut rng, nc, 2, -0.5);
        let (ab, ba) = (exact_w1(&a, &b), exact_w1(&b, &a));
        prop_assert!(exact_w1(&a, &a).abs() < 1e-12);
        prop_assert!(ab >= 0.0 && (ab - ba).abs() < 1e-12);
        prop_assert!(exact_w1(&a, &c) <= ab + exact_w1(&b, &c) + 1e-12);
    }

    #[test]
    fn wasserstein_of_a_translate_is_the_shift(seed in any::<u64>(), n in 1usize..10, tx in -3.0f64..3.0, ty in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = matrix(&mut rng, n, 2, 0.0);
        let mut b = a.clone();
        for mut row in b.row_iter_mut() {
            row[0] += tx;
            row[1] += ty;
        }
        prop_assert!((exact_w1(&a, &b) - (tx * tx + ty * ty).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn metric_invariants(errors in prop::collection::vec(-6.0f64..6.0, 1..80), level in 38.0f64..57.0) {
        let n = errors.len();
        let t: Vec<f64> = (0..n).map(|i| level + (i % 7) as f64 * 0.5).collect();
        let p: Vec<f64> = t.iter().zip(&errors).map(|(a, e)| a + e).collect();
        let m = compute_metrics(&t, &p).unwrap();
        prop_assert!(m.acc_lt2db <= m.acc_lt3db);
        prop_assert!(m.mse >= 0.0 && (m.rmse * m.rmse - m.mse).abs() <= 1e-12 * m.mse.max(1.0));
        if let Some(r2) = m.r2 {
            prop_assert!(r2 <= 1.0);
        }
        prop_assert_eq!(m.r2.is_some(), n > 1);
    }

    #[test]
    fn band_level_is_scale_equivariant(seed in any::<u64>(), alpha in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.3).sin() + rng.random_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let a = band_rms(&x, 1000.0, 100.0, 3.0).unwrap();
        let b = band_rms(&scaled, 1000.0, 100.0, 3.0).unwrap();
        prop_assert!((b / a - alpha).abs() < 1e-12 * alpha);
        let shift = to_db(b, 1e-3).unwrap() - to_db(a, 1e-3).unwrap();
        prop_assert!((shift - 20.0 * alpha.log10()).abs() < 1e-9);
    }
}
