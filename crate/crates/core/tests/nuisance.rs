mod support;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use siprop::linalg::prepend_ones;
use siprop::nuisance::{
    build_neighborhoods, counterfactual_surrogates, estimate_error_variance, fit_logistic,
    fit_logistic_propensity, SurrogateKind,
};
use siprop::model::one_hot;
use siprop::Error;
use support::{normal_matrix, normal_vector, rng};

#[test]
fn logistic_recovers_coefficients_within_three_standard_errors() {
    let mut r = rng(51);
    let n = 5000;
    let x = normal_matrix(&mut r, n, 3);
    let truth = [-0.4, 1.0, -0.7, 0.0];
    let treated: Vec<bool> = (0..n)
        .map(|i| {
            let link = truth[0] + truth[1] * x[(i, 0)] + truth[2] * x[(i, 1)] + truth[3] * x[(i, 2)];
            r.random_bool(1.0 / (1.0 + (-link).exp()))
        })
        .collect();
    let fit = fit_logistic(&treated, &x).unwrap();
    for (k, &b) in truth.iter().enumerate() {
        let se = fit.covariance[(k, k)].sqrt();
        assert!((fit.coefficients[k] - b).abs() < 3.0 * se, "coef {k}: {} vs {b} (se {se})", fit.coefficients[k]);
    }
}

#[test]
fn logistic_propensity_rows_sum_to_one() {
    let mut r = rng(52);
    let x = normal_matrix(&mut r, 300, 2);
    let labels: Vec<usize> = (0..300).map(|i| usize::from(r.random_bool(if x[(i, 0)] > 0.0 { 0.7 } else { 0.3 }))).collect();
    let e = fit_logistic_propensity(&one_hot(&labels, 2), &x).unwrap();
    for i in 0..300 {
        assert!((e[(i, 0)] + e[(i, 1)] - 1.0).abs() < 1e-15);
        assert!(e[(i, 1)] > 0.0 && e[(i, 1)] < 1.0);
    }
}

#[test]
fn perfectly_separated_arms_are_reported() {
    let x = DMatrix::from_column_slice(8, 1, &[-4.0, -3.0, -2.0, -1.0, 1.0, 2.0, 3.0, 4.0]);
    let treated: Vec<bool> = (0..8).map(|i| i >= 4).collect();
    assert!(matches!(fit_logistic(&treated, &x), Err(Error::Separation(_))));
    assert!(matches!(fit_logistic(&[true; 8], &x), Err(Error::Separation(_))));
}

#[test]
fn neighborhoods_on_a_line() {
    // Points 0, 0.5, 2, 5 with radius 1: only the first two are neighbors.
    let x = DMatrix::from_column_slice(4, 1, &[0.0, 0.5, 2.0, 5.0]);
    let labels = [0, 1, 0, 1];
    let nb = build_neighborhoods(&x, &labels, 2, 1.0).unwrap();
    assert_eq!(nb.get(1, 0), &[1]);
    assert!(nb.get(0, 0).is_empty());
    assert_eq!(nb.get(0, 1), &[0]);
    assert!(nb.get(0, 2).is_empty() && nb.get(1, 2).is_empty());
    let filled = nb.fill_empty(&x, &labels).unwrap();
    assert_eq!(filled.get(0, 0), &[2]);
    assert_eq!(filled.get(1, 1), &[3]);
    assert_eq!(filled.get(1, 2), &[1]);
    assert_eq!(filled.get(0, 3), &[2]);
    assert_eq!(filled.filled(0), &[0, 2, 3]);
    assert_eq!(filled.filled(1), &[1, 2, 3]);
}

#[test]
fn a_lone_unit_has_no_donor_in_its_own_arm() {
    let x = DMatrix::from_column_slice(3, 1, &[0.0, 0.5, 2.0]);
    let nb = build_neighborhoods(&x, &[0, 1, 0], 2, 1.0).unwrap();
    assert!(matches!(nb.fill_empty(&x, &[0, 1, 0]), Err(Error::NoEligibleDonor { arm: 1 })));
}

#[test]
fn variance_excludes_neighbors_exactly_at_the_radius() {
    // Integer grid: every distinct pair sits at distance >= 1.
    let mut r = rng(53);
    let n = 200;
    let x = DMatrix::from_fn(n, 2, |_, _| r.random_range(0..4) as f64);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
    let y = normal_vector(&mut r, n);
    let at = estimate_error_variance(&y, &x, &labels, 1.0).unwrap();
    let below = estimate_error_variance(&y, &x, &labels, 1.0 - 1e-9).unwrap();
    let above = estimate_error_variance(&y, &x, &labels, 1.0 + 1e-9).unwrap();
    assert_eq!(at, below);
    assert_ne!(at, above);
}

#[test]
fn variance_is_consistent_without_confounding_signal() {
    let mut r = rng(54);
    let n = 4000;
    let x = DMatrix::from_fn(n, 2, |_, _| r.random_range(0..2) as f64);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
    let y = normal_vector(&mut r, n) * 0.25 + DVector::from_fn(n, |i, _| 2.0 * x[(i, 0)] + labels[i] as f64);
    let est = estimate_error_variance(&y, &x, &labels, 0.5).unwrap();
    assert!((est - 0.0625).abs() < 0.006, "estimate {est}");
}

/// Outcomes linear in `x` in each arm, with no noise.
fn linear_outcomes(x: &DMatrix<f64>, labels: &[usize]) -> (DVector<f64>, [DVector<f64>; 2]) {
    let n = x.nrows();
    let arm0 = DVector::from_fn(n, |i, _| 1.0 + 2.0 * x[(i, 0)] - x[(i, 1)]);
    let arm1 = DVector::from_fn(n, |i, _| arm0[i] + 0.5 + 1.5 * x[(i, 1)]);
    let y = DVector::from_fn(n, |i, _| if labels[i] == 1 { arm1[i] } else { arm0[i] });
    (y, [arm0, arm1])
}

#[test]
fn noiseless_linear_outcomes_are_reproduced() {
    let mut r = rng(55);
    let n = 120;
    let x = normal_matrix(&mut r, n, 2);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
    let (y, truth) = linear_outcomes(&x, &labels);
    let nb = build_neighborhoods(&x, &labels, 2, 0.8).unwrap().fill_empty(&x, &labels).unwrap();
    let design = prepend_ones(&x);
    let effect = &truth[1] - &truth[0];
    for (kind, eff) in [(SurrogateKind::Plain, None), (SurrogateKind::Pooled, Some(&effect))] {
        let s = counterfactual_surrogates(&y, &design, &labels, &nb, kind, eff).unwrap();
        for h in 0..2 {
            assert!((&s.ystar[h] - &truth[h]).amax() < 1e-9, "{kind:?} arm {h}");
        }
    }
}

#[test]
fn pooled_surrogates_need_an_effect() {
    let mut r = rng(56);
    let x = normal_matrix(&mut r, 30, 2);
    let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
    let (y, _) = linear_outcomes(&x, &labels);
    let nb = build_neighborhoods(&x, &labels, 2, 1.0).unwrap().fill_empty(&x, &labels).unwrap();
    let design = prepend_ones(&x);
    assert!(counterfactual_surrogates(&y, &design, &labels, &nb, SurrogateKind::Pooled, None).is_err());
    let short = DVector::zeros(29);
    assert!(matches!(
        counterfactual_surrogates(&y, &design, &labels, &nb, SurrogateKind::Pooled, Some(&short)),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn surrogates_follow_a_permutation_of_the_units() {
    let mut r = rng(57);
    let n = 80;
    let x = normal_matrix(&mut r, n, 2);
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
    let y = DVector::from_fn(n, |i, _| (x[(i, 0)] * 2.0).sin() + labels[i] as f64) + normal_vector(&mut r, n) * 0.1;
    let effect = DVector::from_element(n, 1.0);
    let run = |order: &[usize]| {
        let xp = DMatrix::from_fn(n, 2, |i, j| x[(order[i], j)]);
        let lp: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let yp = DVector::from_fn(n, |i, _| y[order[i]]);
        let nb = build_neighborhoods(&xp, &lp, 2, 0.7).unwrap().fill_empty(&xp, &lp).unwrap();
        counterfactual_surrogates(&yp, &prepend_ones(&xp), &lp, &nb, SurrogateKind::Pooled, Some(&effect)).unwrap()
    };
    let ident: Vec<usize> = (0..n).collect();
    let mut perm = ident.clone();
    perm.shuffle(&mut r);
    let base = run(&ident);
    let moved = run(&perm);
    for h in 0..2 {
        for (k, &i) in perm.iter().enumerate() {
            assert!((moved.ystar[h][k] - base.ystar[h][i]).abs() < 1e-10);
            assert_eq!(moved.counts[h][k], base.counts[h][i]);
        }
    }
}

#[test]
fn surrogate_error_shrinks_with_sample_size() {
    let mse = |n: usize, seed: u64| {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(n, 2, |_, _| r.random_range(0.0f64..1.0));
        let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..2)).collect();
        let f = DVector::from_fn(n, |i, _| 3.0 * (x[(i, 0)] * x[(i, 1)]).sqrt());
        let y = DVector::from_fn(n, |i, _| f[i] + labels[i] as f64) + normal_vector(&mut r, n) * 0.25;
        let nb = build_neighborhoods(&x, &labels, 2, 0.15).unwrap().fill_empty(&x, &labels).unwrap();
        let s = counterfactual_surrogates(&y, &prepend_ones(&x), &labels, &nb, SurrogateKind::Plain, None).unwrap();
        (0..2).map(|h| (&s.ystar[h] - f.add_scalar(h as f64)).norm_squared()).sum::<f64>() / (2 * n) as f64
    };
    let small: f64 = (0..4).map(|s| mse(200, 60 + s)).sum();
    let large: f64 = (0..4).map(|s| mse(2000, 70 + s)).sum();
    assert!(large < small, "mse {large} at n=2000 vs {small} at n=200");
}
