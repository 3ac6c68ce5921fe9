//! Biplot and triplot geometry for fitted models, exported as a JSON scene
//! or a standalone SVG.
//!
//! Dominance variables are drawn as axes through the origin carrying one
//! marker per threshold at `m_c v / (v'v)`, with a decision line orthogonal
//! to the axis through every marker. Proximity variables are drawn as points
//! with a circle of radius `-m_c` per threshold (omitted when that radius is
//! not positive). Restricted models add predictor axes and dummy points.
//!
//! For more than two dimensions the scene shows the projection onto one
//! pair of dimensions; markers, circles and regions are computed from the
//! projected variable coordinates so that they agree with what is drawn.
//! Lines are clipped at the plot bounding box, which is the square hull of
//! the row points, variable points, predictor geometry and the origin,
//! padded by 10%.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_atomic, ColumnKind, Family};
use crate::driver::FitResult;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const SCHEMA: &str = "biplot/1";

/// Norms below this count as zero when drawing an axis.
const ZERO_NORM: f64 = 1e-12;
const PADDING: f64 = 0.1;

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub from: Point,
    pub to: Point,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub xmin: f64,
    pub xmax: f64,
    pub ymin: f64,
    pub ymax: f64,
}

impl BoundingBox {
    fn around(points: &[Point]) -> Self {
        let mut b = Self {
            xmin: 0.0,
            xmax: 0.0,
            ymin: 0.0,
            ymax: 0.0,
        };
        for p in points.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
            b.xmin = b.xmin.min(p[0]);
            b.xmax = b.xmax.max(p[0]);
            b.ymin = b.ymin.min(p[1]);
            b.ymax = b.ymax.max(p[1]);
        }
        let span = (b.xmax - b.xmin).max(b.ymax - b.ymin).max(1e-9) * (1.0 + 2.0 * PADDING);
        let (cx, cy) = ((b.xmin + b.xmax) / 2.0, (b.ymin + b.ymax) / 2.0);
        Self {
            xmin: cx - span / 2.0,
            xmax: cx + span / 2.0,
            ymin: cy - span / 2.0,
            ymax: cy + span / 2.0,
        }
    }

    /// The part of the line `p + t d` inside the box, ordered by `t`.
    pub fn clip_line(&self, p: Point, d: Point) -> Option<Segment> {
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for (pk, dk, min, max) in [(p[0], d[0], self.xmin, self.xmax), (p[1], d[1], self.ymin, self.ymax)] {
            if dk.abs() < ZERO_NORM {
                if pk < min || pk > max {
                    return None;
                }
                continue;
            }
            let (a, b) = ((min - pk) / dk, (max - pk) / dk);
            lo = lo.max(a.min(b));
            hi = hi.min(a.max(b));
        }
        (lo.is_finite() && hi.is_finite() && lo < hi).then(|| Segment {
            from: [p[0] + lo * d[0], p[1] + lo * d[1]],
            to: [p[0] + hi * d[0], p[1] + hi * d[1]],
        })
    }
}

/// Threshold marker on a dominance axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    /// `"c|c+1"`
    pub label: String,
    pub threshold: f64,
    pub position: Point,
    /// Boundary between the adjacent categories, clipped to the plot.
    pub decision_line: Option<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableAxis {
    pub name: String,
    pub direction: Point,
    pub line: Option<Segment>,
    pub label_at: Option<Point>,
    pub markers: Vec<Marker>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    /// `"c|c+1"`
    pub label: String,
    pub threshold: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariablePoint {
    pub name: String,
    pub position: Point,
    pub circles: Vec<Circle>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorAxis {
    pub name: String,
    pub direction: Point,
    /// Observed range of the predictor mapped onto the axis.
    pub solid: Segment,
    /// Continuation of the axis to the plot edge.
    pub dotted: Vec<Segment>,
    pub label_at: Point,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorPoint {
    pub variable: String,
    pub level: String,
    pub reference: bool,
    pub position: Point,
}

/// Predicted categories of one variable on a regular grid; `categories[j][k]`
/// belongs to the point `(x[k], y[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionField {
    pub variable: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub categories: Vec<Vec<u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiplotScene {
    pub schema: String,
    pub model: String,
    /// Displayed dimensions, 1-based.
    pub dims_shown: [usize; 2],
    pub bbox: BoundingBox,
    pub row_points: Vec<Point>,
    pub variable_axes: Vec<VariableAxis>,
    pub variable_points: Vec<VariablePoint>,
    pub predictor_axes: Vec<PredictorAxis>,
    pub predictor_points: Vec<PredictorPoint>,
    pub regions: Vec<RegionField>,
    pub warnings: Vec<String>,
}

impl BiplotScene {
    /// A scene with nothing but the frame.
    pub fn empty(model: &str, dims_shown: [usize; 2]) -> Self {
        Self {
            schema: SCHEMA.into(),
            model: model.into(),
            dims_shown,
            bbox: BoundingBox::around(&[]),
            row_points: Vec::new(),
            variable_axes: Vec::new(),
            variable_points: Vec::new(),
            predictor_axes: Vec::new(),
            predictor_points: Vec::new(),
            regions: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn warn(&mut self, msg: String) {
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let scene: Self = serde_json::from_str(s)?;
        if scene.schema != SCHEMA {
            return Err(Error::Validation(format!(
                "unsupported scene schema {:?}, expected {SCHEMA:?}",
                scene.schema
            )));
        }
        Ok(scene)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneOptions {
    /// Include the row points.
    pub rows: bool,
    /// Proximity variables that get circles; `None` means all.
    pub circles: Option<Vec<String>>,
    /// Variables with a category field.
    pub regions: Vec<String>,
    /// Grid points per side of a category field.
    pub grid_size: usize,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self {
            rows: true,
            circles: None,
            regions: Vec::new(),
            grid_size: 60,
        }
    }
}

/// Checks a 1-based dimension pair against a fit with `dims` dimensions and
/// returns it 0-based.
fn resolve_dims(pair: (usize, usize), dims: usize) -> Result<(usize, usize)> {
    if dims < 2 {
        return Err(Error::Dimension(format!("a biplot needs at least 2 dimensions, the model has {dims}")));
    }
    let (a, b) = pair;
    if a == b {
        return Err(Error::Dimension(format!("dimension pair ({a},{b}) repeats a dimension")));
    }
    for d in [a, b] {
        if d < 1 || d > dims {
            return Err(Error::Dimension(format!("dimension {d} outside 1..={dims}")));
        }
    }
    Ok((a - 1, b - 1))
}

fn project(m: &Matrix, (a, b): (usize, usize)) -> Vec<Point> {
    m.row_iter().map(|row| [row[a], row[b]]).collect()
}

fn dot(p: Point, q: Point) -> f64 {
    p[0] * q[0] + p[1] * q[1]
}

fn scale(p: Point, k: f64) -> Point {
    [p[0] * k, p[1] * k]
}

fn boundary_label(c: usize) -> String {
    format!("{}|{}", c + 1, c + 2)
}

/// Builds the full scene for `fit` on the 1-based dimension pair `dims`.
pub fn scene(fit: &FitResult, dims: (usize, usize), opts: &SceneOptions) -> Result<BiplotScene> {
    let pair = resolve_dims(dims, fit.dims())?;
    let mut scene = BiplotScene::empty(fit.model().name(), [dims.0, dims.1]);
    let rows = project(&fit.params.u, pair);
    let vars = project(&fit.params.v, pair);

    let predictors = if fit.model().restricted() {
        predictor_geometry(fit, pair)?
    } else {
        (Vec::new(), Vec::new())
    };
    let mut hull: Vec<Point> = rows.clone();
    if fit.config.family == Family::Proximity {
        hull.extend(&vars);
    }
    for (_, lo, hi) in &predictors.0 {
        hull.push(*lo);
        hull.push(*hi);
    }
    hull.extend(predictors.1.iter().map(|p| p.position));
    scene.bbox = BoundingBox::around(&hull);

    if opts.rows {
        scene.row_points = rows;
    }
    match fit.config.family {
        Family::Dominance => add_dominance(&mut scene, fit, &vars),
        Family::Proximity => add_proximity(&mut scene, fit, &vars, opts.circles.as_deref())?,
    }
    let bbox = scene.bbox;
    for (axis, lo, hi) in predictors.0 {
        if let Some(axis) = finish_predictor_axis(axis, lo, hi, &bbox, &mut scene) {
            scene.predictor_axes.push(axis);
        }
    }
    scene.predictor_points = predictors.1;
    for name in &opts.regions {
        let r = variable_index(fit, name)?;
        let grid = Grid::over(&scene.bbox, opts.grid_size.max(2));
        let categories = classify_regions(fit, r, dims, &grid)?;
        scene.regions.push(RegionField {
            variable: name.clone(),
            x: grid.x,
            y: grid.y,
            categories,
        });
    }
    Ok(scene)
}

fn variable_index(fit: &FitResult, name: &str) -> Result<usize> {
    fit.var_names
        .iter()
        .position(|v| v == name)
        .ok_or_else(|| Error::Validation(format!("unknown variable {name:?}")))
}

/// Dominance scene: variable axes with threshold markers and decision lines.
pub fn scene_dominance(fit: &FitResult, dims: (usize, usize)) -> Result<BiplotScene> {
    if fit.config.family != Family::Dominance {
        return Err(Error::Config(format!("{} is not a dominance model", fit.model())));
    }
    scene(fit, dims, &SceneOptions::default())
}

/// Proximity scene: variable points with category circles.
pub fn scene_proximity(fit: &FitResult, dims: (usize, usize)) -> Result<BiplotScene> {
    if fit.config.family != Family::Proximity {
        return Err(Error::Config(format!("{} is not a proximity model", fit.model())));
    }
    scene(fit, dims, &SceneOptions::default())
}

/// Marker positions `m_c v / (v'v)`; `None` for a zero-length `v`.
pub fn marker_positions(v: Point, thresholds: &[f64]) -> Option<Vec<Point>> {
    let vv = dot(v, v);
    (vv.sqrt() > ZERO_NORM).then(|| thresholds.iter().map(|&m| scale(v, m / vv)).collect())
}

/// Circle radii `-m_c` for the circles that are drawn (positive radius),
/// paired with the 0-based threshold index.
pub fn circle_radii(thresholds: &[f64]) -> Vec<(usize, f64)> {
    thresholds
        .iter()
        .enumerate()
        .filter(|(_, &m)| -m > 0.0)
        .map(|(c, &m)| (c, -m))
        .collect()
}

fn add_dominance(scene: &mut BiplotScene, fit: &FitResult, vars: &[Point]) {
    let bbox = scene.bbox;
    for (r, &v) in vars.iter().enumerate() {
        let name = &fit.var_names[r];
        let m = fit.thresholds[r].values();
        let Some(positions) = marker_positions(v, m) else {
            scene.warn(format!("variable {name}: zero-length direction in this plane, axis omitted"));
            continue;
        };
        let normal = [-v[1], v[0]];
        let markers = positions
            .into_iter()
            .zip(m)
            .enumerate()
            .map(|(c, (position, &threshold))| Marker {
                label: boundary_label(c),
                threshold,
                position,
                decision_line: bbox.clip_line(position, normal),
            })
            .collect();
        let line = bbox.clip_line([0.0, 0.0], v);
        let label_at = line.map(|s| if dot(s.to, v) >= dot(s.from, v) { s.to } else { s.from });
        scene.variable_axes.push(VariableAxis {
            name: name.clone(),
            direction: v,
            line,
            label_at,
            markers,
        });
    }
}

fn add_proximity(scene: &mut BiplotScene, fit: &FitResult, vars: &[Point], circles: Option<&[String]>) -> Result<()> {
    if let Some(names) = circles {
        for name in names {
            variable_index(fit, name)?;
        }
    }
    for (r, &v) in vars.iter().enumerate() {
        let name = &fit.var_names[r];
        let wanted = circles.is_none_or(|names| names.contains(name));
        let m = fit.thresholds[r].values();
        let circles = if wanted {
            circle_radii(m)
                .into_iter()
                .map(|(c, radius)| Circle {
                    label: boundary_label(c),
                    threshold: m[c],
                    radius,
                })
                .collect()
        } else {
            Vec::new()
        };
        scene.variable_points.push(VariablePoint {
            name: name.clone(),
            position: v,
            circles,
        });
    }
    Ok(())
}

/// Numeric axes (not yet clipped, with their solid range) and dummy points.
type PredictorGeometry = (Vec<(PredictorAxis, Point, Point)>, Vec<PredictorPoint>);

fn predictor_geometry(fit: &FitResult, pair: (usize, usize)) -> Result<PredictorGeometry> {
    let (Some(b), Some(columns)) = (&fit.params.b, &fit.predictors) else {
        return Err(Error::Config("restricted model artifact lacks predictor metadata".into()));
    };
    if b.nrows() != columns.len() {
        return Err(Error::Dimension(format!(
            "{} regression weight rows for {} predictor columns",
            b.nrows(),
            columns.len()
        )));
    }
    let weights = project(b, pair);
    let mut axes = Vec::new();
    let mut points = Vec::new();
    let mut references: Vec<&str> = Vec::new();
    for (col, &w) in columns.iter().zip(&weights) {
        match &col.kind {
            ColumnKind::Numeric { .. } => {
                let axis = PredictorAxis {
                    name: col.name.clone(),
                    direction: w,
                    solid: Segment {
                        from: scale(w, col.min),
                        to: scale(w, col.max),
                    },
                    dotted: Vec::new(),
                    label_at: [0.0, 0.0],
                };
                let (lo, hi) = (axis.solid.from, axis.solid.to);
                axes.push((axis, lo, hi));
            }
            ColumnKind::Dummy {
                variable,
                level,
                reference,
            } => {
                if !references.contains(&variable.as_str()) {
                    references.push(variable);
                    points.push(PredictorPoint {
                        variable: variable.clone(),
                        level: reference.clone(),
                        reference: true,
                        position: [0.0, 0.0],
                    });
                }
                points.push(PredictorPoint {
                    variable: variable.clone(),
                    level: level.clone(),
                    reference: false,
                    position: w,
                });
            }
        }
    }
    Ok((axes, points))
}

fn finish_predictor_axis(mut axis: PredictorAxis, lo: Point, hi: Point, bbox: &BoundingBox, scene: &mut BiplotScene) -> Option<PredictorAxis> {
    let d = axis.direction;
    let norm2 = dot(d, d);
    if norm2.sqrt() <= ZERO_NORM {
        scene.warn(format!("predictor {}: zero-length weights in this plane, axis omitted", axis.name));
        return None;
    }
    let full = bbox.clip_line([0.0, 0.0], d)?;
    let t = |p: Point| dot(p, d) / norm2;
    let (t_lo, t_hi) = (t(lo).min(t(hi)), t(lo).max(t(hi)));
    let (t0, t1) = (t(full.from), t(full.to));
    if t0 < t_lo {
        axis.dotted.push(Segment {
            from: full.from,
            to: scale(d, t_lo),
        });
    }
    if t1 > t_hi {
        axis.dotted.push(Segment {
            from: scale(d, t_hi),
            to: full.to,
        });
    }
    axis.label_at = full.to;
    Some(axis)
}

/// Regular grid of cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl Grid {
    pub fn over(bbox: &BoundingBox, size: usize) -> Self {
        let axis = |min: f64, max: f64| {
            let step = (max - min) / size as f64;
            (0..size).map(|k| min + (k as f64 + 0.5) * step).collect()
        };
        Self {
            x: axis(bbox.xmin, bbox.xmax),
            y: axis(bbox.ymin, bbox.ymax),
        }
    }
}

/// Predicted category `c` with `m_{c-1} < θ <= m_c`; a tie on a threshold
/// goes to the lower category.
pub fn predicted_category(theta: f64, thresholds: &[f64]) -> u32 {
    1 + thresholds.iter().filter(|&&m| theta > m).count() as u32
}

/// Predicted category of variable `r` at every grid point of the plane of
/// the 1-based dimension pair `dims`. The structural value of a grid point
/// is computed from the projected variable coordinates, which makes the
/// field agree with the drawn markers and circles.
pub fn classify_regions(fit: &FitResult, r: usize, dims: (usize, usize), grid: &Grid) -> Result<Vec<Vec<u32>>> {
    let pair = resolve_dims(dims, fit.dims())?;
    if r >= fit.var_names.len() {
        return Err(Error::Index(format!("variable {r} out of range")));
    }
    let v = [fit.params.v[(r, pair.0)], fit.params.v[(r, pair.1)]];
    let m = fit.thresholds[r].values();
    let family = fit.config.family;
    Ok(grid
        .y
        .iter()
        .map(|&y| {
            grid.x
                .iter()
                .map(|&x| {
                    let theta = match family {
                        Family::Dominance => dot([x, y], v),
                        Family::Proximity => -((x - v[0]).powi(2) + (y - v[1]).powi(2)).sqrt(),
                    };
                    predicted_category(theta, m)
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Svg,
    Json,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svg" => Ok(Self::Svg),
            "json" => Ok(Self::Json),
            other => Err(Error::Config(format!("unknown scene format {other:?}"))),
        }
    }
}

/// Writes the scene to `path` atomically.
pub fn render(scene: &BiplotScene, format: Format, path: &Path) -> Result<()> {
    let text = match format {
        Format::Svg => to_svg(scene),
        Format::Json => scene.to_json()?,
    };
    write_atomic(path, text.as_bytes())
}

const CANVAS: f64 = 640.0;
const MARGIN: f64 = 40.0;
const REGION_FILLS: [&str; 8] = [
    "#4477aa", "#66ccee", "#228833", "#ccbb44", "#ee6677", "#aa3377", "#bbbbbb", "#000000",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Canvas {
    bbox: BoundingBox,
    scale: f64,
}

impl Canvas {
    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.bbox.xmin) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.bbox.ymax - y) * self.scale
    }

    fn line(&self, out: &mut String, s: &Segment, style: &str) {
        let _ = writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" style="{style}"/>"#,
            self.x(s.from[0]),
            self.y(s.from[1]),
            self.x(s.to[0]),
            self.y(s.to[1])
        );
    }

    fn text(&self, out: &mut String, p: Point, label: &str, style: &str) {
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" style="{style}">{}</text>"#,
            self.x(p[0]),
            self.y(p[1]),
            escape(label)
        );
    }
}

/// Self-contained SVG 1.1 rendering of the scene.
pub fn to_svg(scene: &BiplotScene) -> String {
    let bbox = scene.bbox;
    let span = (bbox.xmax - bbox.xmin).max(bbox.ymax - bbox.ymin);
    let cv = Canvas {
        bbox,
        scale: (CANVAS - 2.0 * MARGIN) / span,
    };
    let inner = CANVAS - 2.0 * MARGIN;
    let font = "font-family:sans-serif;font-size:11px";
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="plot"><rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}"/></clipPath></defs>"#
    );
    let _ = writeln!(
        out,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{inner}" height="{inner}" style="fill:white;stroke:black;stroke-width:1"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="{:.3}" style="{font}">{} dimensions {} and {}</text>"#,
        MARGIN - 12.0,
        escape(&scene.model),
        scene.dims_shown[0],
        scene.dims_shown[1]
    );
    let _ = writeln!(out, r#"<g clip-path="url(#plot)">"#);

    for field in &scene.regions {
        let dx = field.x.get(1).map_or(span, |x1| x1 - field.x[0]) * cv.scale;
        let dy = field.y.get(1).map_or(span, |y1| y1 - field.y[0]) * cv.scale;
        for (j, row) in field.categories.iter().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                let fill = REGION_FILLS[(c as usize - 1) % REGION_FILLS.len()];
                let _ = writeln!(
                    out,
                    r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" style="fill:{fill};fill-opacity:0.15;stroke:none"/>"#,
                    cv.x(field.x[k]) - dx / 2.0,
                    cv.y(field.y[j]) - dy / 2.0,
                    dx,
                    dy
                );
            }
        }
    }

    for p in &scene.row_points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="1.5" style="fill:#888888;stroke:none"/>"#,
            cv.x(p[0]),
            cv.y(p[1])
        );
    }
    for axis in &scene.variable_axes {
        if let Some(line) = &axis.line {
            cv.line(&mut out, line, "stroke:#1f4e9a;stroke-width:1");
        }
        for m in &axis.markers {
            if let Some(d) = &m.decision_line {
                cv.line(&mut out, d, "stroke:#1f4e9a;stroke-width:0.5;stroke-dasharray:2,3");
            }
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" style="fill:#1f4e9a;stroke:none"/>"#,
                cv.x(m.position[0]),
                cv.y(m.position[1])
            );
            cv.text(&mut out, m.position, &m.label, "font-family:sans-serif;font-size:8px;fill:#1f4e9a");
        }
        if let Some(p) = axis.label_at {
            cv.text(&mut out, p, &axis.name, &format!("{font};fill:#1f4e9a"));
        }
    }
    for vp in &scene.variable_points {
        for c in &vp.circles {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.3}" cy="{:.3}" r="{:.3}" style="fill:none;stroke:#9a1f1f;stroke-width:0.75"/>"#,
                cv.x(vp.position[0]),
                cv.y(vp.position[1]),
                c.radius * cv.scale
            );
        }
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="5" height="5" style="fill:#9a1f1f;stroke:none"/>"#,
            cv.x(vp.position[0]) - 2.5,
            cv.y(vp.position[1]) - 2.5
        );
        cv.text(&mut out, vp.position, &vp.name, &format!("{font};fill:#9a1f1f"));
    }
    for axis in &scene.predictor_axes {
        cv.line(&mut out, &axis.solid, "stroke:#2b7a2b;stroke-width:1.5");
        for d in &axis.dotted {
            cv.line(&mut out, d, "stroke:#2b7a2b;stroke-width:1;stroke-dasharray:1,3");
        }
        cv.text(&mut out, axis.label_at, &axis.name, &format!("{font};fill:#2b7a2b"));
    }
    for p in &scene.predictor_points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.3}" cy="{:.3}" r="3" style="fill:#2b7a2b;stroke:none"/>"#,
            cv.x(p.position[0]),
            cv.y(p.position[1])
        );
        let label = format!("{}:{}", p.variable, p.level);
        cv.text(&mut out, p.position, &label, &format!("{font};fill:#2b7a2b"));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, "</svg>");
    out
}
