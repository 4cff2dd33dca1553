//! Fixtures shared by the benchmarks.

use siprop::inference::design_matrix;
use siprop::model::{compute_weighted_outcome, Contrast, Dataset};
use siprop::simulation::{generate_dataset, CovariateLaw, Effect, Nuisance, PropensityLaw, ScenarioConfig};

/// A simulated dataset with the design matrix and weighted outcome the
/// Lasso sees.
pub struct Fixture {
    pub scenario: ScenarioConfig,
    pub dataset: Dataset,
    pub contrast: Contrast,
    pub x: nalgebra::DMatrix<f64>,
    pub w: nalgebra::DVector<f64>,
    pub wy: nalgebra::DVector<f64>,
}

pub fn fixture(n: usize, p: usize) -> Fixture {
    let mut scenario =
        ScenarioConfig::new(p, CovariateLaw::Uniform, Nuisance::F3, PropensityLaw::E2, Effect::M2, 2.0);
    scenario.n = n;
    let (dataset, _) = generate_dataset(&scenario, &mut scenario.replicate_rng(0)).expect("valid scenario");
    let contrast = Contrast::new(vec![-1.0, 1.0]).expect("two arms");
    let weighted = compute_weighted_outcome(&dataset, &contrast).expect("positive propensities");
    let x = design_matrix(&dataset.x, true);
    Fixture { scenario, dataset, contrast, x, w: weighted.w, wy: weighted.wy }
}
