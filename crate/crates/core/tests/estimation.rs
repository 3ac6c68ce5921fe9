//! End-to-end fits, information criteria and model selection scans.

mod common;

use clmda::data::Family;
use clmda::driver::{baseline_row, dimension_scan, predictor_drop_scan};
use clmda::linalg::Matrix;
use clmda::{fit, Error, FitResult, ModelConfig, ModelKind, OrdinalDataset, PredictorMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::{appendix_data, cdf};

fn names(prefix: &str, k: usize) -> Vec<String> {
    (1..=k).map(|j| format!("{prefix}{j}")).collect()
}

fn noise_predictors(rng: &mut ChaCha8Rng, n: usize, p: usize) -> PredictorMatrix {
    let raw = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    PredictorMatrix::from_numeric(&raw, &names("N", p)).unwrap()
}

#[test]
fn zero_signal_gives_flat_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let truth = [-1.0, 0.0, 1.2];
    let rows: Vec<Vec<u32>> = (0..2000)
        .map(|_| {
            (0..6)
                .map(|_| {
                    let p: f64 = rng.random();
                    1 + truth.iter().filter(|&&m| p >= cdf(m)).count() as u32
                })
                .collect()
        })
        .collect();
    let ds = OrdinalDataset::new(rows, vec![4; 6], names("Y", 6)).unwrap();
    let x = noise_predictors(&mut rng, 2000, 2);
    let fitted = fit(&ds, &ModelConfig::new(ModelKind::Clrrr, 1), Some(&x)).unwrap();
    assert!(fitted.theta_hat.amax() < 0.3, "max |θ̂| {}", fitted.theta_hat.amax());
    for (r, m) in fitted.thresholds.iter().enumerate() {
        let col = ds.column(r);
        for c in 1..4 {
            let p = col.iter().filter(|&&y| y as usize <= c).count() as f64 / col.len() as f64;
            assert!((m.values()[c - 1] - (p / (1.0 - p)).ln()).abs() < 0.1);
        }
    }
}

#[test]
fn fit_statistics_are_consistent() {
    for model in [ModelKind::Clpca, ModelKind::Clrrr, ModelKind::Clmdu, ModelKind::Clrmdu] {
        let g = appendix_data(model.family(), 150, 4, 3, 21);
        let mut config = ModelConfig::new(model, 2);
        config.n_starts = 2;
        let fitted = fit(&g.data, &config, model.restricted().then_some(&g.x)).unwrap();
        let k = fitted.npar as f64;
        assert_eq!(fitted.deviance, 2.0 * fitted.nll);
        assert_eq!(fitted.aic, fitted.deviance + 2.0 * k);
        assert_eq!(fitted.bic, fitted.deviance + (150f64).ln() * k);
        assert_eq!(fitted.nll, *fitted.nll_trace.last().unwrap());
        assert_eq!(fitted.iterations, fitted.nll_trace.len() - 1);
        assert!((fitted.params.theta(model.family()) - &fitted.theta_hat).amax() < 1e-12);
        let best = fitted.starts.iter().filter_map(|s| s.nll).fold(f64::INFINITY, f64::min);
        assert_eq!(fitted.starts[fitted.start_index].nll, Some(best));
        assert_eq!(fitted.nll, best);
        let back = FitResult::from_json(&fitted.to_json().unwrap()).unwrap();
        assert_eq!(back, fitted);
    }
}

#[test]
fn unrestricted_unfolding_is_centered() {
    let g = appendix_data(Family::Proximity, 120, 4, 3, 2);
    let mut config = ModelConfig::new(ModelKind::Clmdu, 2);
    config.n_starts = 2;
    let fitted = fit(&g.data, &config, None).unwrap();
    assert!(fitted.params.u.row_mean().amax() < 1e-10);
}

#[test]
fn artifact_round_trips_through_file() {
    let g = appendix_data(Family::Dominance, 100, 4, 3, 4);
    let fitted = fit(&g.data, &ModelConfig::new(ModelKind::Clrrr, 2), Some(&g.x)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    std::fs::write(&path, fitted.to_json().unwrap()).unwrap();
    assert_eq!(FitResult::load(&path).unwrap(), fitted);
}

#[test]
fn invalid_configurations_are_rejected() {
    let g = appendix_data(Family::Dominance, 50, 4, 3, 5);
    let err = fit(&g.data, &ModelConfig::new(ModelKind::Clpca, 5), None).unwrap_err();
    assert!(matches!(err, Error::Dimension(_)), "{err}");
    let err = fit(&g.data, &ModelConfig::new(ModelKind::Clrrr, 2), None).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
    let err = fit(&g.data, &ModelConfig::new(ModelKind::Clpca, 2), Some(&g.x)).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err}");
}

#[test]
fn dimension_scan_selects_true_rank() {
    let g = appendix_data(Family::Dominance, 2000, 8, 5, 7);
    let rows = dimension_scan(&g.data, &ModelConfig::new(ModelKind::Clrrr, 1), &[3, 1, 2], Some(&g.x)).unwrap();
    assert_eq!(rows.iter().map(|r| r.dims).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert!(rows[1].aic_best, "{rows:?}");
    assert_eq!(rows.iter().filter(|r| r.aic_best).count(), 1);
    assert_eq!(rows.iter().filter(|r| r.bic_best).count(), 1);
    for w in rows.windows(2) {
        assert!(w[1].deviance <= w[0].deviance + 1e-6, "{rows:?}");
    }
    assert_eq!(rows.iter().map(|r| r.npar).collect::<Vec<_>>(), vec![4 * 8 + 12, 4 * 8 + 22, 4 * 8 + 30]);
}

#[test]
fn dropping_noise_costs_little_and_dropping_signal_costs_fit() {
    let g = appendix_data(Family::Dominance, 1500, 8, 5, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise: Vec<f64> = (0..1500).map(|_| rng.sample(StandardNormal)).collect();
    let raw = Matrix::from_fn(1500, 6, |i, j| if j < 5 { g.raw_x[(i, j)] } else { noise[i] });
    let mut cols = names("X", 5);
    cols.push("noise".into());
    let x = PredictorMatrix::from_numeric(&raw, &cols).unwrap();
    let config = ModelConfig::new(ModelKind::Clrrr, 2);
    let full = baseline_row(&fit(&g.data, &config, Some(&x)).unwrap());
    let groups = vec![
        ("noise".to_string(), vec!["noise".to_string()]),
        ("X4".to_string(), vec!["X4".to_string()]),
    ];
    let rows = predictor_drop_scan(&g.data, &config, &x, &groups).unwrap();
    assert_eq!(rows[0].label, "-noise");
    assert_eq!(rows[0].npar, full.npar - 2);
    assert!(rows[0].aic <= full.aic + 2.0, "{full:?} {rows:?}");
    assert!(rows[1].deviance > full.deviance + 10.0, "{full:?} {rows:?}");

    assert!(predictor_drop_scan(&g.data, &config, &x, &[]).unwrap().is_empty());
    let everything = vec![("all".to_string(), cols.clone())];
    let err = predictor_drop_scan(&g.data, &config, &x, &everything).unwrap_err();
    assert!(matches!(err, Error::EmptyDesign(_)), "{err}");
}
