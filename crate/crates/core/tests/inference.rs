mod support;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use siprop::geometry::{decompose, eta_vector, sign_union_region};
use siprop::inference::{naive_interval, pivot, rho, selective_interval, tau, zeta};
use siprop::lasso::solve_ipw_lasso;
use siprop::model::{one_hot, Contrast};
use siprop::truncnorm::TruncationRegion;
use support::{eta_dense, normal_matrix, normal_vector, random_instance, rho_dense, rng, tau_dense, zeta_dense};

/// Random multi-arm nuisance inputs: assignments, propensity rows, surrogates,
/// neighborhood counts and a zero-sum contrast.
struct ArmInputs {
    t: DMatrix<f64>,
    e: DMatrix<f64>,
    ystar: Vec<DVector<f64>>,
    counts: Vec<Vec<usize>>,
    c: Vec<f64>,
}

fn arm_inputs<R: Rng>(r: &mut R, n: usize, arms: usize) -> ArmInputs {
    let labels: Vec<usize> = (0..n).map(|_| r.random_range(0..arms)).collect();
    let t = one_hot(&labels, arms);
    let mut e = DMatrix::from_fn(n, arms, |_, _| r.random_range(0.2..1.0));
    for i in 0..n {
        let s: f64 = e.row(i).sum();
        e.row_mut(i).scale_mut(1.0 / s);
    }
    let ystar = (0..arms).map(|_| normal_vector(r, n)).collect();
    let counts = (0..arms).map(|_| (0..n).map(|_| r.random_range(1..8)).collect()).collect();
    let mut c: Vec<f64> = (0..arms).map(|_| r.random_range(-1.0..1.0)).collect();
    let mean = c.iter().sum::<f64>() / arms as f64;
    c.iter_mut().for_each(|v| *v -= mean);
    ArmInputs { t, e, ystar, counts, c }
}

#[test]
fn corrections_match_dense_matrix_forms() {
    let mut r = rng(41);
    for case in 0..60 {
        let n = r.random_range(15..50);
        let p = r.random_range(2..6);
        let arms = 2 + case % 3;
        let x = normal_matrix(&mut r, n, p);
        let w = normal_vector(&mut r, n);
        let m = r.random_range(1..=p);
        let active: Vec<usize> = (0..m).collect();
        let k = r.random_range(0..m);
        let sigma2 = r.random_range(0.1..3.0);
        let inp = arm_inputs(&mut r, n, arms);
        let c = Contrast::new(inp.c.clone()).unwrap();

        let eta = eta_vector(&x, &active, active[k]).unwrap();
        assert!((&eta - eta_dense(&x, &active, k)).amax() < 1e-10);

        let z = zeta(&x, &active, active[k], &w, sigma2).unwrap();
        let zd = zeta_dense(&x, &active, k, &w, sigma2);
        assert!((z - zd).abs() <= 1e-10 * zd.abs().max(1.0), "zeta {z} vs {zd}");

        let t = tau(&inp.ystar, &inp.t, &inp.e, &eta, &c);
        let td = tau_dense(&eta, &inp.t, &inp.e, &inp.ystar, &inp.c);
        assert!((t - td).abs() <= 1e-10 * td.abs().max(1.0), "tau {t} vs {td}");

        let rh = rho(z, &eta, sigma2, &inp.counts, &inp.e, &c).unwrap();
        let rd = rho_dense(z, &eta, sigma2, &inp.counts, &inp.e, &inp.c);
        assert!((rh - rd).abs() <= 1e-10 * rd.abs().max(1.0), "rho {rh} vs {rd}");
    }
}

#[test]
fn empty_neighborhood_is_rejected_by_rho() {
    let mut r = rng(42);
    let mut inp = arm_inputs(&mut r, 10, 2);
    inp.counts[1][3] = 0;
    let eta = normal_vector(&mut r, 10);
    let c = Contrast::treated_minus_control();
    assert!(rho(1.0, &eta, 1.0, &inp.counts, &inp.e, &c).is_err());
}

#[test]
fn untruncated_selective_interval_equals_naive() {
    let mut r = rng(43);
    for _ in 0..200 {
        let stat = r.random_range(-10.0..10.0);
        let t = r.random_range(-3.0..3.0);
        let var = 10f64.powf(r.random_range(-2.0..2.0));
        let alpha = r.random_range(0.01..0.3);
        let si = selective_interval(stat, t, var, &TruncationRegion::whole_line(), alpha).unwrap();
        let naive = naive_interval(stat, t, var, alpha);
        assert!(!si.saturated);
        let tol = 1e-9 * var.sqrt().max(1.0);
        assert!((si.interval.lower - naive.lower).abs() < tol, "{si:?} vs {naive:?}");
        assert!((si.interval.upper - naive.upper).abs() < tol, "{si:?} vs {naive:?}");
    }
}

#[test]
fn far_away_truncation_approaches_naive() {
    // The cut sits 12 sds below the statistic, so it barely matters.
    let region = TruncationRegion::new(vec![(-12.0, f64::INFINITY)]).unwrap();
    let si = selective_interval(0.0, 0.0, 1.0, &region, 0.05).unwrap().interval;
    let naive = naive_interval(0.0, 0.0, 1.0, 0.05);
    assert!((si.lower - naive.lower).abs() < 1e-6 && (si.upper - naive.upper).abs() < 1e-6);
}

#[test]
fn truncation_near_the_statistic_widens_the_interval() {
    let region = TruncationRegion::new(vec![(0.9, f64::INFINITY)]).unwrap();
    let si = selective_interval(1.0, 0.0, 1.0, &region, 0.05).unwrap().interval;
    let naive = naive_interval(1.0, 0.0, 1.0, 0.05);
    assert!(si.lower < naive.lower);
    assert!(si.upper - si.lower > naive.upper - naive.lower);
}

#[test]
fn pivot_at_the_interval_ends_hits_the_quantiles() {
    let mut r = rng(44);
    for _ in 0..50 {
        let inst = random_instance(&mut r, 40, 4);
        let fit = solve_ipw_lasso(&inst.x, &inst.wy, inst.lambda).unwrap();
        if fit.is_empty() {
            continue;
        }
        let j = fit.active[0];
        let eta = eta_vector(&inst.x, &fit.active, j).unwrap();
        let dec = decompose(&inst.w, &inst.wy, &eta).unwrap();
        let region = sign_union_region(&inst.x, &fit.active, inst.lambda, &dec, 12).unwrap();
        let var = 1.3 * (inst.w.component_mul(&eta)).norm_squared();
        let t = 0.4;
        let si = selective_interval(dec.stat, t, var, &region, 0.1).unwrap();
        if si.saturated {
            continue;
        }
        let lo = pivot(dec.stat, si.interval.lower + t, var, &region).unwrap();
        let hi = pivot(dec.stat, si.interval.upper + t, var, &region).unwrap();
        assert!((lo - 0.95).abs() < 1e-7 && (hi - 0.05).abs() < 1e-7, "{lo} {hi}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rho_is_at_least_zeta(seed in 0u64..1_000_000, arms in 2usize..5) {
        let mut r = rng(seed);
        let n = 20;
        let inp = arm_inputs(&mut r, n, arms);
        let eta = normal_vector(&mut r, n);
        let c = Contrast::new(inp.c.clone()).unwrap();
        let z = r.random_range(0.0..5.0);
        prop_assert!(rho(z, &eta, 0.7, &inp.counts, &inp.e, &c).unwrap() >= z);
    }

    #[test]
    fn smaller_alpha_gives_a_wider_interval(
        stat in 0.5f64..4.0,
        a in -1.0f64..0.4,
        var in 0.1f64..4.0,
        alpha in 0.02f64..0.3,
    ) {
        let region = TruncationRegion::new(vec![(a, a + 0.2), (0.45, f64::INFINITY)]).unwrap();
        let wide = selective_interval(stat, 0.0, var, &region, alpha / 2.0).unwrap();
        let narrow = selective_interval(stat, 0.0, var, &region, alpha).unwrap();
        prop_assert!(wide.interval.lower <= narrow.interval.lower + 1e-9);
        prop_assert!(wide.interval.upper >= narrow.interval.upper - 1e-9);
    }

    #[test]
    fn tau_shifts_the_interval(stat in -3.0f64..3.0, t in -2.0f64..2.0) {
        let region = TruncationRegion::new(vec![(-4.0, -0.5), (0.5, 4.0)]).unwrap();
        prop_assume!(region.contains(stat));
        let base = selective_interval(stat, 0.0, 1.0, &region, 0.05).unwrap().interval;
        let moved = selective_interval(stat, t, 1.0, &region, 0.05).unwrap().interval;
        prop_assert!((base.lower - t - moved.lower).abs() < 1e-12);
        prop_assert!((base.upper - t - moved.upper).abs() < 1e-12);
    }
}
