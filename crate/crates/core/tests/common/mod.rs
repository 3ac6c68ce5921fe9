//! Helpers shared by the integration tests.
#![allow(dead_code)]

use clmda::data::Family;
use clmda::driver::{ModelParams, FitResult};
use clmda::linalg::Matrix;
use clmda::rng::keyed_rng;
use clmda::simulate::{gen_dataset, Generated, Population};
use clmda::{ModelConfig, ModelKind, ThresholdVector};

/// Data from the published study population.
pub fn appendix_data(family: Family, n: usize, r: usize, cats: usize, seed: u64) -> Generated {
    let pop = Population::appendix_c(family).with_variables(r).unwrap();
    let mut rng = keyed_rng(seed, &[n as u64, r as u64, cats as u64]);
    gen_dataset(&pop, n, cats, &mut rng).unwrap()
}

/// Adaptive Simpson quadrature.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn step<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Plain logistic CDF and density, written out independently of the library.
pub fn cdf(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn pdf(x: f64) -> f64 {
    let e = (-x.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// A hand-made fit result for geometry tests.
pub fn fake_fit(model: ModelKind, u: Matrix, v: Matrix, b: Option<Matrix>, thresholds: Vec<Vec<f64>>) -> FitResult {
    let dims = v.ncols();
    let config = ModelConfig::new(model, dims);
    let params = ModelParams { u, b, v };
    let theta_hat = params.theta(config.family);
    let r = params.v.nrows();
    FitResult {
        version: clmda::VERSION.into(),
        config,
        n: params.u.nrows(),
        var_names: (1..=r).map(|k| format!("Y{k}")).collect(),
        cats: thresholds.iter().map(|m| m.len() as u32 + 1).collect(),
        predictors: None,
        params,
        thresholds: thresholds.into_iter().map(|m| ThresholdVector::new(m).unwrap()).collect(),
        theta_hat,
        nll_trace: vec![0.0],
        nll: 0.0,
        deviance: 0.0,
        npar: 0,
        aic: 0.0,
        bic: 0.0,
        iterations: 0,
        converged: true,
        start_index: 0,
        starts: Vec::new(),
    }
}
