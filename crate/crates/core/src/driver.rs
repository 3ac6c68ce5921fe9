//! The outer expectation / majorization / minimization loop for all four
//! models, multi-start orchestration and model-selection statistics.
//!
//! Each outer iteration computes working responses from the current
//! structural matrix, minimizes the least squares majorizer (an SVD for the
//! dominance models, a SMACOF inner loop for the proximity models), refits
//! the thresholds and evaluates the observed negative log-likelihood. The
//! loop stops when the relative decrease of that likelihood drops below
//! `tol_outer`.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bilinear::{pca_update, rrr_update, BilinearParams};
use crate::data::{Family, ModelConfig, ModelKind, OrdinalDataset, PredictorColumn, PredictorMatrix};
use crate::error::{Error, Result};
use crate::linalg::{self, svd, Matrix};
use crate::loglik::{cumulative_log_odds, observed_nll, working_responses, ThresholdVector};
use crate::rng::keyed_rng;
use crate::thresholds::fit_thresholds;
use crate::unfolding::{distances, smacof, UnfoldingConfig};

/// Configuration matrices of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// N×S row scores or ideal points (`X B` for restricted models).
    #[serde(with = "linalg::rows_serde")]
    pub u: Matrix,
    /// P×S regression weights of restricted models.
    #[serde(with = "linalg::opt_rows_serde", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Matrix>,
    /// R×S loadings or variable points.
    #[serde(with = "linalg::rows_serde")]
    pub v: Matrix,
}

impl ModelParams {
    /// Structural matrix under `family`.
    pub fn theta(&self, family: Family) -> Matrix {
        match family {
            Family::Dominance => &self.u * self.v.transpose(),
            Family::Proximity => -distances(&self.u, &self.v),
        }
    }
}

impl From<BilinearParams> for ModelParams {
    fn from(p: BilinearParams) -> Self {
        Self { u: p.u, b: p.b, v: p.v }
    }
}

impl From<UnfoldingConfig> for ModelParams {
    fn from(p: UnfoldingConfig) -> Self {
        Self { u: p.u, b: p.b, v: p.v }
    }
}

impl From<ModelParams> for UnfoldingConfig {
    fn from(p: ModelParams) -> Self {
        Self { u: p.u, b: p.b, v: p.v }
    }
}

/// Outcome of one start, kept for diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub index: usize,
    pub nll: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// A fitted model; serializes to the JSON model artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub version: String,
    pub config: ModelConfig,
    pub n: usize,
    pub var_names: Vec<String>,
    pub cats: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictors: Option<Vec<PredictorColumn>>,
    pub params: ModelParams,
    pub thresholds: Vec<ThresholdVector>,
    #[serde(with = "linalg::rows_serde")]
    pub theta_hat: Matrix,
    pub nll_trace: Vec<f64>,
    pub nll: f64,
    pub deviance: f64,
    pub npar: usize,
    pub aic: f64,
    pub bic: f64,
    pub iterations: usize,
    pub converged: bool,
    pub start_index: usize,
    pub starts: Vec<StartSummary>,
}

impl FitResult {
    pub fn model(&self) -> ModelKind {
        self.config.model
    }

    pub fn dims(&self) -> usize {
        self.config.dims
    }

    /// Structural matrix recomputed from the configuration.
    pub fn structural_matrix(&self) -> Matrix {
        self.params.theta(self.config.family)
    }

    /// Fitted `log(P(y_ir <= c) / P(y_ir > c))`.
    pub fn cumulative_log_odds(&self, i: usize, r: usize, c: usize) -> Result<f64> {
        cumulative_log_odds(self.theta_hat[(i, r)], &self.thresholds[r], c)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let fit: Self = serde_json::from_str(s)?;
        fit.check_shapes()?;
        Ok(fit)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let fit: Self = serde_json::from_reader(BufReader::new(File::open(path)?))?;
        fit.check_shapes()?;
        Ok(fit)
    }

    fn check_shapes(&self) -> Result<()> {
        let (n, r, s) = (self.n, self.var_names.len(), self.config.dims);
        let ok = self.params.u.shape() == (n, s)
            && self.params.v.shape() == (r, s)
            && self.theta_hat.shape() == (n, r)
            && self.thresholds.len() == r
            && self.cats.len() == r;
        if !ok {
            return Err(Error::Dimension("model artifact has inconsistent shapes".into()));
        }
        Ok(())
    }
}

/// Number of free parameters: `Σ_r (C_r - 1)` thresholds plus the
/// structural part, `(N + R - S) S` for CLPCA, `(P + R - S) S` for CLRRR,
/// `(N + R) S - S (S - 1) / 2` for CLMDU and `(P + R) S - S (S - 1) / 2`
/// for CLRMDU.
pub fn npar(model: ModelKind, n: usize, r: usize, p: usize, dims: usize, cats: &[u32]) -> usize {
    let thresholds: usize = cats.iter().map(|&c| c as usize - 1).sum();
    let rows = if model.restricted() { p } else { n };
    let structural = match model.family() {
        Family::Dominance => (rows + r - dims) * dims,
        Family::Proximity => (rows + r) * dims - dims * (dims - 1) / 2,
    };
    thresholds + structural
}

/// Fits `config` to `ds` (with predictors `x` for restricted models),
/// keeping the best of `config.n_starts` starts by final NLL.
pub fn fit(ds: &OrdinalDataset, config: &ModelConfig, x: Option<&PredictorMatrix>) -> Result<FitResult> {
    fit_traced(ds, config, x).map(|(fit, _)| fit)
}

/// [`fit`], also returning the inner-loop STRESS traces of the winning start
/// (one per outer iteration; empty for dominance models).
pub fn fit_traced(ds: &OrdinalDataset, config: &ModelConfig, x: Option<&PredictorMatrix>) -> Result<(FitResult, Vec<Vec<f64>>)> {
    config.check(ds.n(), ds.r(), x.map(PredictorMatrix::p))?;
    ds.require_all_observed()?;
    if let Some(x) = x {
        if x.n() != ds.n() {
            return Err(Error::Dimension(format!(
                "predictors have {} rows, responses {}",
                x.n(),
                ds.n()
            )));
        }
    }
    let problem = Problem { ds, config, x };
    let runs: Vec<Result<Run>> = (0..config.n_starts)
        .into_par_iter()
        .map(|k| problem.run(k))
        .collect();

    let starts: Vec<StartSummary> = runs
        .iter()
        .enumerate()
        .map(|(index, run)| match run {
            Ok(run) => StartSummary {
                index,
                nll: Some(run.nll()),
                iterations: run.nll_trace.len() - 1,
                converged: run.converged,
                error: None,
            },
            Err(e) => StartSummary {
                index,
                nll: None,
                iterations: 0,
                converged: false,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<(usize, Run)> = None;
    let mut failures = Vec::new();
    for (index, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                let better = best.as_ref().is_none_or(|(_, b)| run.nll() < b.nll());
                if better {
                    best = Some((index, run));
                }
            }
            Err(e) => failures.push(format!("start {index}: {e}")),
        }
    }
    let Some((start_index, run)) = best else {
        return Err(Error::FitFailure(failures));
    };
    for f in &failures {
        log::warn!("{f}");
    }

    let mut params = run.params;
    if config.model == ModelKind::Clmdu {
        // report with the row centroid at the origin
        let centroid = params.u.row_mean();
        for mut row in params.u.row_iter_mut() {
            row -= &centroid;
        }
        for mut row in params.v.row_iter_mut() {
            row -= &centroid;
        }
    }
    let theta_hat = params.theta(config.family);
    let nll = *run.nll_trace.last().expect("trace starts with the initial value");
    let deviance = 2.0 * nll;
    let k = npar(
        config.model,
        ds.n(),
        ds.r(),
        x.map_or(0, PredictorMatrix::p),
        config.dims,
        ds.cats(),
    );
    let fit = FitResult {
        version: crate::VERSION.to_string(),
        config: config.clone(),
        n: ds.n(),
        var_names: ds.var_names().to_vec(),
        cats: ds.cats().to_vec(),
        predictors: x.map(|x| x.columns().to_vec()),
        params,
        thresholds: run.thresholds,
        theta_hat,
        iterations: run.nll_trace.len() - 1,
        nll_trace: run.nll_trace,
        nll,
        deviance,
        npar: k,
        aic: deviance + 2.0 * k as f64,
        bic: deviance + (ds.n() as f64).ln() * k as f64,
        converged: run.converged,
        start_index,
        starts,
    };
    Ok((fit, run.inner_traces))
}

struct Run {
    params: ModelParams,
    thresholds: Vec<ThresholdVector>,
    nll_trace: Vec<f64>,
    inner_traces: Vec<Vec<f64>>,
    converged: bool,
}

impl Run {
    fn nll(&self) -> f64 {
        *self.nll_trace.last().expect("nonempty")
    }
}

struct OuterStep {
    params: ModelParams,
    theta: Matrix,
    thresholds: Vec<ThresholdVector>,
    inner_trace: Option<Vec<f64>>,
    nll: f64,
}

struct Problem<'a> {
    ds: &'a OrdinalDataset,
    config: &'a ModelConfig,
    x: Option<&'a PredictorMatrix>,
}

impl Problem<'_> {
    fn run(&self, start: usize) -> Result<Run> {
        let cfg = self.config;
        let ds = self.ds;
        let mut params = self.initial_params(start)?;
        let mut theta = params.theta(cfg.family);
        let mut thresholds = self.update_thresholds(&theta, None)?;
        let mut nll = observed_nll(&theta, &thresholds, ds)?;
        let mut nll_trace = vec![nll];
        let mut inner_traces = Vec::new();
        let mut converged = false;

        for _ in 0..cfg.max_outer {
            let lambda = working_responses(&theta, ds, &thresholds)?;
            let mut step = self.outer_step(&lambda, &params, &thresholds)?;
            if step.nll > nll + 8.0 * f64::EPSILON * nll.abs() {
                // λ = θ - 4ξ assumes curvature at most 1/4, which fails for
                // narrow middle categories. θ - 2ξ uses the valid bound 1/2
                // and cannot increase the NLL.
                log::debug!("NLL rose from {nll} to {}; retrying with the conservative majorizer", step.nll);
                let conservative = (&lambda + &theta) * 0.5;
                step = self.outer_step(&conservative, &params, &thresholds)?;
            }
            if !step.nll.is_finite() {
                return Err(Error::Numerical("negative log-likelihood became non-finite".into()));
            }
            params = step.params;
            theta = step.theta;
            thresholds = step.thresholds;
            inner_traces.extend(step.inner_trace);
            nll_trace.push(step.nll);
            let decrease = nll - step.nll;
            nll = step.nll;
            if decrease < cfg.tol_outer * nll.abs() {
                converged = true;
                break;
            }
        }
        Ok(Run {
            params,
            thresholds,
            nll_trace,
            inner_traces,
            converged,
        })
    }

    /// Least squares fit to the working responses, then thresholds.
    fn outer_step(&self, lambda: &Matrix, params: &ModelParams, thresholds: &[ThresholdVector]) -> Result<OuterStep> {
        let cfg = self.config;
        let mut inner_trace = None;
        let params: ModelParams = match cfg.family {
            Family::Dominance => match self.x {
                None => pca_update(lambda, cfg.dims)?.into(),
                Some(x) => rrr_update(lambda, x.matrix(), cfg.dims, &x.column_names())?.into(),
            },
            Family::Proximity => {
                let delta = -lambda;
                let inner = smacof(
                    &delta,
                    self.x.map(PredictorMatrix::matrix),
                    params.clone().into(),
                    cfg.max_inner,
                    cfg.tol_inner,
                )?;
                inner_trace = Some(inner.trace);
                inner.config.into()
            }
        };
        let theta = params.theta(cfg.family);
        let thresholds = self.update_thresholds(&theta, Some(thresholds))?;
        let nll = observed_nll(&theta, &thresholds, self.ds)?;
        Ok(OuterStep {
            params,
            theta,
            thresholds,
            inner_trace,
            nll,
        })
    }

    fn update_thresholds(&self, theta: &Matrix, previous: Option<&[ThresholdVector]>) -> Result<Vec<ThresholdVector>> {
        (0..self.ds.r())
            .map(|r| {
                let y = self.ds.column(r);
                let offsets: Vec<f64> = theta.column(r).iter().copied().collect();
                let init = previous.map(|p| &p[r]);
                let fit = fit_thresholds(&y, &offsets, self.ds.cats()[r] as usize, init)?;
                if fit.separated {
                    log::warn!("variable {}: separation in threshold fit", self.ds.var_names()[r]);
                }
                Ok(fit.m)
            })
            .collect()
    }

    fn initial_params(&self, start: usize) -> Result<ModelParams> {
        let cfg = self.config;
        if start > 0 {
            return Ok(self.random_params(start));
        }
        match cfg.family {
            Family::Dominance => {
                let centered = centered_codes(self.ds);
                Ok(match self.x {
                    None => pca_update(&centered, cfg.dims)?.into(),
                    Some(x) => rrr_update(&centered, x.matrix(), cfg.dims, &x.column_names())?.into(),
                })
            }
            Family::Proximity => {
                let (u, v) = correspondence_start(self.ds, cfg.dims)?;
                Ok(match self.x {
                    None => ModelParams { u, b: None, v },
                    Some(x) => {
                        let xm = x.matrix();
                        let gram = xm.transpose() * xm;
                        let b = gram
                            .cholesky()
                            .ok_or_else(|| Error::SingularDesign("X'X is not positive definite".into()))?
                            .solve(&(xm.transpose() * &u));
                        ModelParams {
                            u: xm * &b,
                            b: Some(b),
                            v,
                        }
                    }
                })
            }
        }
    }

    /// Coordinates (or regression weights) uniform on (-1, 1).
    fn random_params(&self, start: usize) -> ModelParams {
        let cfg = self.config;
        let mut rng = keyed_rng(cfg.seed, &[start as u64]);
        let mut draw = |rows: usize| Matrix::from_fn(rows, cfg.dims, |_, _| rng.random_range(-1.0..1.0));
        let (u, b) = match self.x {
            None => (draw(self.ds.n()), None),
            Some(x) => {
                let b = draw(x.p());
                (x.matrix() * &b, Some(b))
            }
        };
        let v = draw(self.ds.r());
        ModelParams { u, b, v }
    }
}

/// Integer codes with column means removed.
fn centered_codes(ds: &OrdinalDataset) -> Matrix {
    let mut y = Matrix::from_fn(ds.n(), ds.r(), |i, r| ds.get(i, r) as f64);
    for mut col in y.column_iter_mut() {
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    y
}

/// Correspondence-analysis start for the distance models.
///
/// Rows are placed at their principal coordinates from the CA of the
/// indicator-coded responses; each variable is placed at the principal
/// coordinate of its highest category. The joint configuration is scaled so
/// that the distances have unit standard deviation.
fn correspondence_start(ds: &OrdinalDataset, dims: usize) -> Result<(Matrix, Matrix)> {
    let (n, r) = (ds.n(), ds.r());
    let offsets: Vec<usize> = ds
        .cats()
        .iter()
        .scan(0usize, |acc, &c| {
            let o = *acc;
            *acc += c as usize;
            Some(o)
        })
        .collect();
    let j_total: usize = ds.cats().iter().map(|&c| c as usize).sum();
    let total = (n * r) as f64;
    let freq = ds.frequencies();
    let col_mass: Vec<f64> = freq.iter().flatten().map(|&f| f as f64 / total).collect();
    let row_mass = 1.0 / n as f64;
    // standardized residuals of the indicator matrix
    let mut resid = Matrix::zeros(n, j_total);
    for i in 0..n {
        for q in 0..r {
            resid[(i, offsets[q] + ds.get(i, q) as usize - 1)] = 1.0 / total;
        }
    }
    for j in 0..j_total {
        for i in 0..n {
            let expected = row_mass * col_mass[j];
            resid[(i, j)] = (resid[(i, j)] - expected) / (row_mass * col_mass[j]).sqrt();
        }
    }
    let dec = svd(&resid)?;
    let available = dec.values.len();
    let mut u = Matrix::zeros(n, dims);
    let mut v = Matrix::zeros(r, dims);
    for s in 0..dims.min(available) {
        let sigma = dec.values[s];
        for i in 0..n {
            u[(i, s)] = dec.left[(i, s)] * sigma / row_mass.sqrt();
        }
        for q in 0..r {
            let j = offsets[q] + ds.cats()[q] as usize - 1;
            v[(q, s)] = dec.right[(j, s)] * sigma / col_mass[j].sqrt();
        }
    }
    let d = distances(&u, &v);
    let mean = d.mean();
    let sd = (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
    if sd > 1e-12 {
        u /= sd;
        v /= sd;
    }
    Ok((u, v))
}

/// One row of a dimensionality or predictor-selection table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub label: String,
    pub dims: usize,
    pub deviance: f64,
    pub npar: usize,
    pub aic: f64,
    pub bic: f64,
    pub converged: bool,
    pub aic_best: bool,
    pub bic_best: bool,
}

impl ScanRow {
    fn from_fit(label: String, fit: &FitResult) -> Self {
        Self {
            label,
            dims: fit.dims(),
            deviance: fit.deviance,
            npar: fit.npar,
            aic: fit.aic,
            bic: fit.bic,
            converged: fit.converged,
            aic_best: false,
            bic_best: false,
        }
    }
}

fn flag_minima(rows: &mut [ScanRow]) {
    let argmin = |key: fn(&ScanRow) -> f64, rows: &[ScanRow]| {
        rows.iter()
            .enumerate()
            .min_by(|a, b| key(a.1).total_cmp(&key(b.1)))
            .map(|(k, _)| k)
    };
    if let Some(k) = argmin(|r| r.aic, rows) {
        rows[k].aic_best = true;
    }
    if let Some(k) = argmin(|r| r.bic, rows) {
        rows[k].bic_best = true;
    }
}

/// One fit per dimensionality in `dims`, sorted by dimensionality, with the
/// AIC- and BIC-minimal rows flagged.
pub fn dimension_scan(ds: &OrdinalDataset, base: &ModelConfig, dims: &[usize], x: Option<&PredictorMatrix>) -> Result<Vec<ScanRow>> {
    if dims.is_empty() {
        return Err(Error::Config("empty dimension range".into()));
    }
    let mut dims = dims.to_vec();
    dims.sort_unstable();
    dims.dedup();
    let fits: Vec<Result<FitResult>> = dims
        .par_iter()
        .map(|&s| fit(ds, &base.with_dims(s), x))
        .collect();
    let mut rows = fits
        .into_iter()
        .zip(&dims)
        .map(|(f, s)| f.map(|f| ScanRow::from_fit(s.to_string(), &f)))
        .collect::<Result<Vec<_>>>()?;
    flag_minima(&mut rows);
    Ok(rows)
}

/// Refits with each named group of predictor columns removed.
pub fn predictor_drop_scan(
    ds: &OrdinalDataset,
    config: &ModelConfig,
    x: &PredictorMatrix,
    groups: &[(String, Vec<String>)],
) -> Result<Vec<ScanRow>> {
    let reduced = groups
        .iter()
        .map(|(_, cols)| x.drop_columns(cols))
        .collect::<Result<Vec<_>>>()?;
    let fits: Vec<Result<FitResult>> = reduced
        .par_iter()
        .map(|xr| fit(ds, config, Some(xr)))
        .collect();
    let mut rows = fits
        .into_iter()
        .zip(groups)
        .map(|(f, (name, _))| f.map(|f| ScanRow::from_fit(format!("-{name}"), &f)))
        .collect::<Result<Vec<_>>>()?;
    flag_minima(&mut rows);
    Ok(rows)
}

/// Baseline row for a predictor-selection table.
pub fn baseline_row(fit: &FitResult) -> ScanRow {
    ScanRow::from_fit("full".into(), fit)
}
