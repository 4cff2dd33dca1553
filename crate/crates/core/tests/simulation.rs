mod support;

use siprop::inference::design_matrix;
use siprop::simulation::{
    aggregate, generate_dataset, pivot_check, projected_true_coefficients, run_replicates,
    CovariateLaw, Effect, Nuisance, PropensityLaw, ScenarioConfig,
};

fn small(f: Nuisance, mu: Effect, k: f64, n: usize, reps: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(5, CovariateLaw::Bernoulli, f, PropensityLaw::E1, mu, k);
    cfg.n = n;
    cfg.replications = reps;
    cfg.seed = 7;
    cfg
}

#[test]
fn fcr_matches_a_direct_count() {
    let cfg = small(Nuisance::F2, Effect::M1, 2.0, 400, 24);
    let records = run_replicates(&cfg, 1).unwrap();
    let report = aggregate(&cfg, &records);
    for naive in [false, true] {
        let mut total = 0.0;
        let mut count = 0;
        for r in records.iter().filter(|r| r.error.is_none()) {
            count += 1;
            if r.model_size == 0 {
                continue;
            }
            let missed = r
                .variables
                .iter()
                .filter(|v| !(if naive { v.naive_covers } else { v.si_covers }))
                .count();
            total += missed as f64 / r.model_size as f64;
        }
        let m = if naive { &report.naive } else { &report.si };
        assert_eq!(m.fcr.count, count);
        assert!((m.fcr.mean.unwrap() - total / count as f64).abs() < 1e-15);
    }
    assert_eq!(report.replicates, 24);
    assert_eq!(report.failed + records.iter().filter(|r| r.error.is_none()).count(), 24);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let cfg = small(Nuisance::F3, Effect::M2, 2.0, 300, 12);
    let one = run_replicates(&cfg, 1).unwrap();
    let three = run_replicates(&cfg, 3).unwrap();
    assert_eq!(one, three);
    let a = serde_json::to_string(&aggregate(&cfg, &one)).unwrap();
    let b = serde_json::to_string(&aggregate(&cfg, &three)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn projected_coefficients_match_least_squares() {
    let cfg = small(Nuisance::F3, Effect::M2, 1.0, 200, 1);
    let mut r = cfg.replicate_rng(0);
    let (ds, truth) = generate_dataset(&cfg, &mut r).unwrap();
    let design = design_matrix(&ds.x, true);
    for active in [vec![0], vec![1, 3], vec![0, 2, 4], vec![0, 1, 2, 3, 4]] {
        let got = projected_true_coefficients(&design, &active, &truth).unwrap();
        let xm = design.select_columns(&active);
        let want = xm.clone().svd(true, true).solve(truth.effect(), 1e-12).unwrap();
        assert!((&got - &want).amax() < 1e-9, "{active:?}");
    }
}

#[test]
fn unadjusted_intervals_miss_more_often_under_confounding() {
    let cfg = small(Nuisance::F2, Effect::M1, 2.0, 1000, 30);
    let report = aggregate(&cfg, &run_replicates(&cfg, 0).unwrap());
    let si = report.si.fcr.mean.unwrap();
    let naive = report.naive.fcr.mean.unwrap();
    assert!(naive > si + 0.3, "naive {naive} vs selective {si}");
}

#[test]
fn strong_effects_are_found() {
    let mut cfg = small(Nuisance::F1, Effect::M2, 5.0, 1000, 20);
    cfg.covariates = CovariateLaw::Uniform;
    let report = aggregate(&cfg, &run_replicates(&cfg, 0).unwrap());
    assert_eq!(report.failed, 0);
    assert!(report.si.true_positives.mean.unwrap() >= 4.0);
    assert!(report.si.fcr.mean.unwrap() <= 0.25);
}

#[test]
fn tiny_runs_report_counts_and_missing_spread() {
    let cfg = small(Nuisance::F1, Effect::M2, 2.0, 300, 1);
    let report = aggregate(&cfg, &run_replicates(&cfg, 1).unwrap());
    assert_eq!(report.replicates, 1);
    assert!(report.model_size.sd.is_none());
    let mut none = cfg.clone();
    none.replications = 0;
    assert!(run_replicates(&none, 1).is_err());
}

#[test]
fn shifted_pivots_are_not_uniform() {
    let mut cfg = ScenarioConfig::new(5, CovariateLaw::Uniform, Nuisance::F1, PropensityLaw::E1, Effect::M2, 2.0);
    cfg.n = 200;
    cfg.replications = 150;
    let honest = pivot_check(&cfg, 0.0, 0).unwrap();
    let shifted = pivot_check(&cfg, 1.0, 0).unwrap();
    assert!(honest.p_value > 0.001, "honest p = {}", honest.p_value);
    assert!(shifted.p_value < 1e-6, "shifted p = {}", shifted.p_value);
    assert_eq!(honest.histogram.iter().map(|b| b.count).sum::<usize>(), honest.pivots.len());
}
