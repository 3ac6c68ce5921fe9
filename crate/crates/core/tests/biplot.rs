//! Biplot geometry on hand-made and fitted models.

mod common;

use clmda::biplot::{
    classify_regions, marker_positions, predicted_category, render, scene, scene_dominance, scene_proximity, BiplotScene,
    Format, Grid, SceneOptions,
};
use clmda::data::{ColumnKind, Family, PredictorColumn};
use clmda::linalg::Matrix;
use clmda::{fit, Error, ModelConfig, ModelKind};

use common::{appendix_data, fake_fit};

fn worked_example(model: ModelKind) -> clmda::FitResult {
    let u = Matrix::from_row_slice(3, 2, &[0.5, 0.5, -1.0, 0.2, 0.1, -1.5]);
    let v = Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 0.8]);
    fake_fit(model, u, v, None, vec![vec![-2.0, -1.5, -0.5], vec![-0.4, 0.6]])
}

#[test]
fn decision_lines_sit_on_thresholds() {
    let scene = scene_dominance(&worked_example(ModelKind::Clpca), (1, 2)).unwrap();
    assert_eq!(scene.variable_axes.len(), 2);
    for axis in &scene.variable_axes {
        let v = axis.direction;
        for marker in &axis.markers {
            let line = marker.decision_line.expect("inside the plot");
            for p in [line.from, line.to, marker.position] {
                assert!((p[0] * v[0] + p[1] * v[1] - marker.threshold).abs() < 1e-10);
            }
        }
    }
    let labels: Vec<&str> = scene.variable_axes[0].markers.iter().map(|m| m.label.as_str()).collect();
    assert_eq!(labels, ["1|2", "2|3", "3|4"]);
}

#[test]
fn circles_only_for_positive_radii() {
    let scene = scene_proximity(&worked_example(ModelKind::Clmdu), (1, 2)).unwrap();
    let second: Vec<f64> = scene.variable_points[1].circles.iter().map(|c| c.radius).collect();
    assert_eq!(second, [0.4]);
    assert_eq!(scene.variable_points[1].circles[0].label, "1|2");
    let opts = SceneOptions {
        circles: Some(vec!["Y2".into()]),
        ..SceneOptions::default()
    };
    let only = scene_with(&worked_example(ModelKind::Clmdu), &opts);
    assert!(only.variable_points[0].circles.is_empty());
    assert_eq!(only.variable_points[1].circles.len(), 1);
}

fn scene_with(fit: &clmda::FitResult, opts: &SceneOptions) -> BiplotScene {
    scene(fit, (1, 2), opts).unwrap()
}

/// Pointwise oracle: structural value from the full model, then the
/// category whose interval contains it (ties to the lower category).
fn oracle_category(family: Family, point: [f64; 2], v: [f64; 2], m: &[f64]) -> u32 {
    let theta = match family {
        Family::Dominance => point[0] * v[0] + point[1] * v[1],
        Family::Proximity => -((point[0] - v[0]).hypot(point[1] - v[1])),
    };
    let mut c = 1;
    while c <= m.len() && theta > m[c - 1] {
        c += 1;
    }
    c as u32
}

#[test]
fn regions_match_pointwise_classification() {
    for model in [ModelKind::Clpca, ModelKind::Clmdu] {
        let fitted = worked_example(model);
        let s = scene_with(
            &fitted,
            &SceneOptions {
                regions: vec!["Y1".into(), "Y2".into()],
                grid_size: 25,
                ..SceneOptions::default()
            },
        );
        for (r, field) in s.regions.iter().enumerate() {
            let v = [fitted.params.v[(r, 0)], fitted.params.v[(r, 1)]];
            let m = fitted.thresholds[r].values();
            assert_eq!(field.categories.len(), 25);
            for (j, &y) in field.y.iter().enumerate() {
                for (k, &x) in field.x.iter().enumerate() {
                    assert_eq!(field.categories[j][k], oracle_category(model.family(), [x, y], v, m));
                }
            }
        }
    }
}

#[test]
fn regions_use_projected_plane() {
    let u = Matrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -0.5, 0.4, 1.0]);
    let v = Matrix::from_row_slice(1, 3, &[1.0, 0.5, 2.0]);
    let fitted = fake_fit(ModelKind::Clpca, u, v, None, vec![vec![-0.5, 0.5]]);
    let grid = Grid {
        x: vec![-1.0, 0.0, 1.0],
        y: vec![0.0, 2.0],
    };
    let field = classify_regions(&fitted, 0, (1, 3), &grid).unwrap();
    for (j, &y) in grid.y.iter().enumerate() {
        for (k, &x) in grid.x.iter().enumerate() {
            assert_eq!(field[j][k], predicted_category(x + 2.0 * y, &[-0.5, 0.5]));
        }
    }
}

#[test]
fn ties_go_to_the_lower_category() {
    assert_eq!(predicted_category(-1.5, &[-2.0, -1.5, -0.5]), 2);
    assert_eq!(predicted_category(-1.49, &[-2.0, -1.5, -0.5]), 3);
    assert_eq!(predicted_category(5.0, &[-2.0, -1.5, -0.5]), 4);
}

#[test]
fn zero_direction_is_omitted_with_warning() {
    let u = Matrix::from_row_slice(2, 2, &[0.5, 0.1, -0.2, 0.3]);
    let v = Matrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
    let fitted = fake_fit(ModelKind::Clpca, u, v, None, vec![vec![0.0], vec![0.0]]);
    let s = scene_dominance(&fitted, (1, 2)).unwrap();
    assert_eq!(s.variable_axes.len(), 1);
    assert_eq!(s.warnings.len(), 1);
    assert!(marker_positions([0.0, 0.0], &[1.0]).is_none());
}

fn predictor_fit(b: Matrix, columns: Vec<PredictorColumn>) -> clmda::FitResult {
    let u = Matrix::from_row_slice(2, 2, &[0.1, 0.2, -0.3, 0.1]);
    let v = Matrix::from_row_slice(1, 2, &[1.0, 1.0]);
    let mut f = fake_fit(ModelKind::Clrrr, u, v, Some(b), vec![vec![0.0]]);
    f.predictors = Some(columns);
    f
}

#[test]
fn predictor_axes_span_observed_range() {
    let numeric = |name: &str| PredictorColumn {
        name: name.into(),
        kind: ColumnKind::Numeric { mean: 0.0, sd: 1.0 },
        min: -2.0,
        max: 2.0,
    };
    let b = Matrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
    let s = scene_dominance(&predictor_fit(b, vec![numeric("a"), numeric("b")]), (1, 2)).unwrap();
    let a = &s.predictor_axes[0];
    assert_eq!(a.solid.from, [-1.0, 0.0]);
    assert_eq!(a.solid.to, [1.0, 0.0]);
    assert_eq!(a.label_at[0], s.bbox.xmax);
    let b_axis = &s.predictor_axes[1];
    assert_eq!(b_axis.label_at[1], s.bbox.ymax);
    // dotted continuations run from the solid part to the plot edge
    for seg in &a.dotted {
        assert_eq!(seg.from[1], 0.0);
        assert!(seg.from[0].abs() >= 1.0 - 1e-12 || seg.to[0].abs() >= 1.0 - 1e-12);
    }
}

#[test]
fn dummy_levels_become_points_with_reference_at_origin() {
    let dummy = |level: &str| PredictorColumn {
        name: format!("sex:{level}"),
        kind: ColumnKind::Dummy {
            variable: "sex".into(),
            level: level.into(),
            reference: "male".into(),
        },
        min: 0.0,
        max: 1.0,
    };
    let b = Matrix::from_row_slice(1, 2, &[0.3, -0.4]);
    let s = scene_dominance(&predictor_fit(b, vec![dummy("female")]), (1, 2)).unwrap();
    assert_eq!(s.predictor_points.len(), 2);
    assert!(s.predictor_points[0].reference);
    assert_eq!(s.predictor_points[0].position, [0.0, 0.0]);
    assert_eq!(s.predictor_points[1].level, "female");
    assert_eq!(s.predictor_points[1].position, [0.3, -0.4]);
}

#[test]
fn dimension_pairs_are_checked() {
    let fitted = worked_example(ModelKind::Clpca);
    for pair in [(1, 1), (0, 2), (1, 3)] {
        let err = scene_dominance(&fitted, pair).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err}");
    }
    let one = fake_fit(ModelKind::Clpca, Matrix::from_element(2, 1, 1.0), Matrix::from_element(1, 1, 1.0), None, vec![vec![0.0]]);
    assert!(matches!(scene_dominance(&one, (1, 2)), Err(Error::Dimension(_))));
    assert!(matches!(scene_proximity(&fitted, (1, 2)), Err(Error::Config(_))));
}

#[test]
fn scene_files_round_trip_and_repeat() {
    let g = appendix_data(Family::Proximity, 80, 4, 3, 3);
    let mut config = ModelConfig::new(ModelKind::Clrmdu, 2);
    config.n_starts = 1;
    let fitted = fit(&g.data, &config, Some(&g.x)).unwrap();
    let s = scene_with(&fitted, &SceneOptions::default());
    assert_eq!(BiplotScene::from_json(&s.to_json().unwrap()).unwrap(), s);
    let dir = tempfile::tempdir().unwrap();
    for format in [Format::Svg, Format::Json] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        render(&s, format, &a).unwrap();
        render(&s, format, &b).unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    }
    let svg = std::fs::read_to_string(dir.path().join("a")).unwrap();
    assert!(svg.contains("\"schema\""));
    let mut bad = s.clone();
    bad.schema = "biplot/0".into();
    assert!(BiplotScene::from_json(&bad.to_json().unwrap()).is_err());
}
