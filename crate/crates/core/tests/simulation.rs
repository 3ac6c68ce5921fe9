//! Data generation and the recovery study harness.

mod common;

use std::collections::BTreeMap;

use clmda::data::Family;
use clmda::driver::ModelParams;
use clmda::linalg::Matrix;
use clmda::rng::keyed_rng;
use clmda::simulate::{
    extend_v_by_rotation, gen_dataset, records_to_csv, recovery_delta, run_replication, run_study, Population, StudyDesign,
    StudyOptions,
};
use clmda::{fit, Error, ModelConfig, ModelKind};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{appendix_data, cdf};

#[test]
fn category_frequencies_converge() {
    let mut pop = Population::appendix_c(Family::Dominance).with_variables(4).unwrap();
    pop.b = Matrix::zeros(5, 2);
    let n = 100_000;
    let g = gen_dataset(&pop, n, 5, &mut keyed_rng(3, &[1])).unwrap();
    let m = [-2.0, -1.5, -1.0, -0.5];
    let freqs = g.data.frequencies();
    for counts in freqs {
        for (c, &k) in counts.iter().enumerate() {
            let upper = if c < 4 { cdf(m[c]) } else { 1.0 };
            let lower = if c > 0 { cdf(m[c - 1]) } else { 0.0 };
            let pi = upper - lower;
            let se = (pi * (1.0 - pi) / n as f64).sqrt();
            assert!((k as f64 / n as f64 - pi).abs() < 3.0 * se, "category {} freq {} vs {pi}", c + 1, k);
        }
    }
}

#[test]
fn predictor_covariance_converges() {
    let g = appendix_data(Family::Dominance, 20_000, 4, 3, 12);
    let n = g.raw_x.nrows() as f64;
    let mean = g.raw_x.row_mean();
    let mut centered = g.raw_x.clone();
    for mut row in centered.row_iter_mut() {
        row -= &mean;
    }
    let cov = centered.transpose() * &centered / (n - 1.0);
    let pop = Population::appendix_c(Family::Dominance);
    assert!((cov - pop.sigma).amax() < 0.03);
}

#[test]
fn non_positive_definite_covariance_is_rejected() {
    let mut pop = Population::appendix_c(Family::Dominance);
    pop.sigma[(0, 0)] = -1.0;
    let err = gen_dataset(&pop, 10, 3, &mut keyed_rng(0, &[])).unwrap_err();
    assert!(matches!(err, Error::Cholesky), "{err}");
}

fn rotation(angle: f64) -> Matrix {
    Matrix::from_row_slice(2, 2, &[angle.cos(), -angle.sin(), angle.sin(), angle.cos()])
}

#[test]
fn delta_is_rotation_invariant() {
    for (family, model) in [(Family::Dominance, ModelKind::Clrrr), (Family::Proximity, ModelKind::Clrmdu)] {
        let g = appendix_data(family, 200, 4, 3, 13);
        let mut config = ModelConfig::new(model, 2);
        config.n_starts = 1;
        let fitted = fit(&g.data, &config, Some(&g.x)).unwrap();
        let base = recovery_delta(&g.theta, &fitted.theta_hat).unwrap();
        for angle in [0.3, 1.7, -2.4] {
            let q = rotation(angle);
            let p = &fitted.params;
            let rotated = ModelParams {
                u: &p.u * &q,
                b: p.b.as_ref().map(|b| b * &q),
                v: &p.v * &q,
            };
            let delta = recovery_delta(&g.theta, &rotated.theta(family)).unwrap();
            assert!((delta - base).abs() < 1e-12, "{family:?} {angle}: {delta} vs {base}");
        }
    }
}

proptest! {
    #[test]
    fn delta_matches_scalar_loop(n in 1usize..8, r in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Matrix::from_fn(n, r, |_, _| rng.random_range(-3.0..3.0));
        let b = Matrix::from_fn(n, r, |_, _| rng.random_range(-3.0..3.0));
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..n {
            for j in 0..r {
                num += (a[(i, j)] - b[(i, j)]).powi(2);
                den += b[(i, j)].powi(2);
            }
        }
        prop_assert!((recovery_delta(&a, &b).unwrap() - (num / den).sqrt()).abs() < 1e-12);
    }
}

#[test]
fn study_is_independent_of_condition_order() {
    let pop = Population::appendix_c(Family::Dominance);
    let forward = StudyDesign {
        n_levels: vec![60, 90],
        c_levels: vec![3, 5],
        r_levels: vec![4, 8],
        replications: 2,
        seed: 5,
    };
    let reversed = StudyDesign {
        n_levels: vec![90, 60],
        c_levels: vec![5, 3],
        r_levels: vec![8, 4],
        ..forward.clone()
    };
    let key = |design: &StudyDesign| -> BTreeMap<(usize, usize, usize, usize), Option<u64>> {
        run_study(&pop, design, &StudyOptions::default())
            .unwrap()
            .into_iter()
            .map(|rec| ((rec.n, rec.r, rec.c, rec.rep), rec.delta.map(f64::to_bits)))
            .collect()
    };
    let a = key(&forward);
    assert_eq!(a.len(), 16);
    assert_eq!(a, key(&reversed));
}

#[test]
fn replication_is_reproducible() {
    let pop = Population::appendix_c(Family::Proximity);
    let opts = StudyOptions::default();
    let a = run_replication(&pop, 100, 4, 3, 1, 42, &opts);
    let b = run_replication(&pop, 100, 4, 3, 1, 42, &opts);
    assert!(a.delta.is_some());
    assert_eq!(a, b);
    assert_ne!(a.delta, run_replication(&pop, 100, 4, 3, 2, 42, &opts).delta);
}

#[test]
fn study_csv_layout() {
    let pop = Population::appendix_c(Family::Dominance);
    let design = StudyDesign {
        n_levels: vec![80],
        c_levels: vec![3],
        r_levels: vec![4],
        replications: 2,
        seed: 1,
    };
    let csv = records_to_csv(&run_study(&pop, &design, &StudyOptions::default()).unwrap());
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "N,R,C,family,rep,delta,seconds,converged");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("80,4,3,dominance,1,"));
    assert_eq!(lines[1].split(',').nth(6), Some("NA"));
}

#[test]
fn rotation_extension_composes() {
    let v = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
    let once = extend_v_by_rotation(&v).unwrap();
    let twice = extend_v_by_rotation(&once.rows(1, 1).into_owned()).unwrap();
    assert!((once[(1, 0)] - 0.5f64.sqrt()).abs() < 1e-15);
    assert!((once[(1, 1)] - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(twice[(1, 0)].abs() < 1e-15 && (twice[(1, 1)] - 1.0).abs() < 1e-15);
}

/// The published table's last four rows are the first four turned by 45
/// radians (clockwise in the row-vector convention), not 45 degrees.
#[test]
fn population_table_rotation_reading() {
    let v = Population::appendix_c(Family::Dominance).v;
    let (c, s) = (45f64.cos(), 45f64.sin());
    for k in 0..4 {
        let (x, y) = (v[(k, 0)], v[(k, 1)]);
        let (rx, ry) = (x * c + y * s, -x * s + y * c);
        assert!((rx - v[(k + 4, 0)]).abs() < 0.012, "row {}", k + 5);
        assert!((ry - v[(k + 4, 1)]).abs() < 0.012, "row {}", k + 5);
    }
    let degrees = extend_v_by_rotation(&v.rows(0, 4).into_owned()).unwrap();
    assert!((degrees.rows(4, 4) - v.rows(4, 4)).amax() > 0.5);
}
