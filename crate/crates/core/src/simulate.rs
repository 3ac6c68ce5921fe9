//! Data generation from known population parameters and the recovery study.
//!
//! Predictors are drawn from `N(0, Σ)`, row coordinates are `U = X B`, the
//! structural part follows the population family, and every response is an
//! independent multinomial draw with the cumulative-logit category
//! probabilities. The study crosses sample size, number of categories and
//! number of response variables and reports the recovery measure `δ` of the
//! matched restricted model per replication.
//!
//! Randomness is keyed by `(seed, N, R, C, family, replication)`, so results
//! do not depend on execution order or thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Family, ModelConfig, ModelKind, OrdinalDataset, PredictorMatrix};
use crate::driver::fit;
use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::loglik::{logistic_cdf, ThresholdVector};
use crate::rng::keyed_rng;
use crate::unfolding::distances;

/// Population parameters of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub family: Family,
    /// P×S regression weights.
    #[serde(with = "linalg::rows_serde")]
    pub b: Matrix,
    /// R×S variable coordinates.
    #[serde(with = "linalg::rows_serde")]
    pub v: Matrix,
    /// P×P predictor covariance.
    #[serde(with = "linalg::rows_serde")]
    pub sigma: Matrix,
    /// Shared thresholds, one vector per supported number of categories;
    /// a vector applies to every response variable.
    pub thresholds: Vec<ThresholdVector>,
}

const APPENDIX_SIGMA: [f64; 25] = [
    1.00, 0.01, -0.02, 0.01, 0.04, //
    0.01, 1.00, -0.59, 0.19, 0.16, //
    -0.02, -0.59, 1.00, -0.00, -0.00, //
    0.01, 0.19, -0.00, 1.00, 0.25, //
    0.04, 0.16, -0.00, 0.25, 1.00,
];

const APPENDIX_B: [f64; 10] = [
    -0.16, 0.19, //
    -0.37, 0.04, //
    -0.17, 0.19, //
    -0.40, -0.17, //
    -0.28, 0.12,
];

const APPENDIX_V: [f64; 16] = [
    0.44, -0.45, //
    0.34, 2.35, //
    -1.68, 0.05, //
    -1.55, 0.08, //
    -0.16, -0.61, //
    2.18, 0.94, //
    -0.84, 1.45, //
    -0.74, 1.36,
];

impl Population {
    /// The published population used for the recovery study: five
    /// correlated predictors, two dimensions, eight response variables and
    /// threshold sets for three and five categories.
    pub fn appendix_c(family: Family) -> Self {
        Self {
            family,
            b: Matrix::from_row_slice(5, 2, &APPENDIX_B),
            v: Matrix::from_row_slice(8, 2, &APPENDIX_V),
            sigma: Matrix::from_row_slice(5, 5, &APPENDIX_SIGMA),
            thresholds: vec![
                ThresholdVector::new(vec![-1.0, -0.5]).expect("increasing"),
                ThresholdVector::new(vec![-2.0, -1.5, -1.0, -0.5]).expect("increasing"),
            ],
        }
    }

    pub fn p(&self) -> usize {
        self.b.nrows()
    }

    pub fn r(&self) -> usize {
        self.v.nrows()
    }

    pub fn dims(&self) -> usize {
        self.b.ncols()
    }

    pub fn check(&self) -> Result<()> {
        let (p, s) = self.b.shape();
        if s == 0 || p == 0 || self.v.ncols() != s || self.v.nrows() == 0 {
            return Err(Error::Dimension("population B and V must be nonempty with equal columns".into()));
        }
        if self.sigma.shape() != (p, p) {
            return Err(Error::Dimension(format!("Sigma must be {p}x{p}")));
        }
        if (&self.sigma - self.sigma.transpose()).amax() > 1e-12 {
            return Err(Error::Validation("Sigma is not symmetric".into()));
        }
        let all = [&self.b, &self.v, &self.sigma];
        if all.iter().any(|m| m.iter().any(|x| !x.is_finite())) {
            return Err(Error::Domain("non-finite population parameter".into()));
        }
        if Cholesky::new(self.sigma.clone()).is_none() {
            return Err(Error::Cholesky);
        }
        Ok(())
    }

    /// The first `r` variables only.
    pub fn with_variables(&self, r: usize) -> Result<Self> {
        if r == 0 || r > self.r() {
            return Err(Error::Dimension(format!(
                "{r} variables requested, population has {}",
                self.r()
            )));
        }
        Ok(Self {
            v: self.v.rows(0, r).into_owned(),
            ..self.clone()
        })
    }

    /// The shared thresholds for `cats` categories.
    pub fn thresholds_for(&self, cats: usize) -> Result<&ThresholdVector> {
        self.thresholds
            .iter()
            .find(|m| m.categories() == cats)
            .ok_or_else(|| Error::Config(format!("population has no thresholds for {cats} categories")))
    }

    /// Structural matrix of the rows `u` under this population.
    pub fn theta(&self, u: &Matrix) -> Matrix {
        match self.family {
            Family::Dominance => u * self.v.transpose(),
            Family::Proximity => -distances(u, &self.v),
        }
    }
}

/// A generated dataset together with its true structural matrix.
#[derive(Debug, Clone)]
pub struct Generated {
    pub x: PredictorMatrix,
    /// Predictors as drawn, before standardization.
    pub raw_x: Matrix,
    pub data: OrdinalDataset,
    pub theta: Matrix,
}

/// Draws `n` rows from `pop` with `cats` categories per variable.
///
/// The returned predictor matrix is standardized like any loaded predictor
/// file; `theta` is computed from the raw draws.
pub fn gen_dataset<R: Rng>(pop: &Population, n: usize, cats: usize, rng: &mut R) -> Result<Generated> {
    pop.check()?;
    if n < 2 {
        return Err(Error::Config(format!("sample size {n} below 2")));
    }
    let m = pop.thresholds_for(cats)?;
    let chol = Cholesky::new(pop.sigma.clone()).ok_or(Error::Cholesky)?;
    let p = pop.p();
    let z = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let raw_x = z * chol.l().transpose();
    let theta = pop.theta(&(&raw_x * &pop.b));
    let rows: Vec<Vec<u32>> = (0..n)
        .map(|i| (0..pop.r()).map(|r| draw_category(theta[(i, r)], m.values(), rng)).collect())
        .collect();
    let names: Vec<String> = (1..=pop.r()).map(|r| format!("Y{r}")).collect();
    let data = OrdinalDataset::new(rows, vec![cats as u32; pop.r()], names)?;
    let x_names: Vec<String> = (1..=p).map(|j| format!("X{j}")).collect();
    let x = PredictorMatrix::from_numeric(&raw_x, &x_names)?;
    Ok(Generated { x, raw_x, data, theta })
}

/// Inverse-CDF draw from the category distribution at `theta`.
fn draw_category<R: Rng>(theta: f64, m: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    m.iter()
        .position(|&mc| u < logistic_cdf(mc - theta))
        .map_or(m.len() as u32 + 1, |c| c as u32 + 1)
}

/// Appends the rows of `v` rotated counterclockwise by 45 degrees.
pub fn extend_v_by_rotation(v: &Matrix) -> Result<Matrix> {
    if v.ncols() != 2 {
        return Err(Error::Dimension(format!("rotation needs 2 columns, got {}", v.ncols())));
    }
    let (c, s) = (std::f64::consts::FRAC_PI_4.cos(), std::f64::consts::FRAC_PI_4.sin());
    let r = v.nrows();
    let mut out = Matrix::zeros(2 * r, 2);
    out.rows_mut(0, r).copy_from(v);
    for i in 0..r {
        let (x, y) = (v[(i, 0)], v[(i, 1)]);
        out[(r + i, 0)] = c * x - s * y;
        out[(r + i, 1)] = s * x + c * y;
    }
    Ok(out)
}

/// `δ = sqrt(Σ (θ - θ̂)² / Σ θ̂²)`.
pub fn recovery_delta(theta: &Matrix, theta_hat: &Matrix) -> Result<f64> {
    if theta.shape() != theta_hat.shape() {
        return Err(Error::Dimension(format!(
            "true {:?} and fitted {:?} structural matrices differ",
            theta.shape(),
            theta_hat.shape()
        )));
    }
    let denom = theta_hat.norm_squared();
    if denom == 0.0 {
        return Err(Error::DegenerateFit("fitted structural matrix is identically zero".into()));
    }
    Ok(((theta - theta_hat).norm_squared() / denom).sqrt())
}

/// Factorial design of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyDesign {
    pub n_levels: Vec<usize>,
    pub c_levels: Vec<usize>,
    pub r_levels: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
}

impl StudyDesign {
    pub fn check(&self, pop: &Population) -> Result<()> {
        if self.n_levels.is_empty() || self.c_levels.is_empty() || self.r_levels.is_empty() {
            return Err(Error::Config("every design factor needs at least one level".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        for &c in &self.c_levels {
            pop.thresholds_for(c)?;
        }
        if let Some(&r) = self.r_levels.iter().find(|&&r| r == 0 || r > pop.r()) {
            return Err(Error::Config(format!("R = {r} outside 1..={}", pop.r())));
        }
        if let Some(&n) = self.n_levels.iter().find(|&&n| n < 2) {
            return Err(Error::Config(format!("N = {n} below 2")));
        }
        Ok(())
    }
}

/// Fitting options of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// Starts per fit; the deterministic start is always the first.
    pub n_starts: usize,
    /// Record wall-clock seconds per replication. Off by default because
    /// timings make otherwise identical result files differ.
    pub record_timing: bool,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            n_starts: 1,
            record_timing: false,
        }
    }
}

/// One replication of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub n: usize,
    pub r: usize,
    pub c: usize,
    pub family: Family,
    pub rep: usize,
    pub delta: Option<f64>,
    pub seconds: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

fn family_key(family: Family) -> u64 {
    match family {
        Family::Dominance => 0,
        Family::Proximity => 1,
    }
}

fn family_name(family: Family) -> &'static str {
    match family {
        Family::Dominance => "dominance",
        Family::Proximity => "proximity",
    }
}

/// Runs one replication: generate, fit the matched restricted model,
/// compare structural matrices.
pub fn run_replication(pop: &Population, n: usize, r: usize, c: usize, rep: usize, seed: u64, opts: &StudyOptions) -> StudyRecord {
    let started = Instant::now();
    let key = [n as u64, r as u64, c as u64, family_key(pop.family), rep as u64];
    let outcome = (|| {
        let pop = pop.with_variables(r)?;
        let mut rng = keyed_rng(seed, &key);
        let generated = gen_dataset(&pop, n, c, &mut rng)?;
        let mut config = ModelConfig::new(ModelKind::new(pop.family, true), pop.dims());
        config.n_starts = opts.n_starts.max(1);
        config.seed = rng.random();
        let fitted = fit(&generated.data, &config, Some(&generated.x))?;
        let delta = recovery_delta(&generated.theta, &fitted.theta_hat)?;
        Ok::<_, Error>((delta, fitted.converged))
    })();
    let seconds = opts.record_timing.then(|| started.elapsed().as_secs_f64());
    match outcome {
        Ok((delta, converged)) => StudyRecord {
            n,
            r,
            c,
            family: pop.family,
            rep,
            delta: Some(delta),
            seconds,
            converged,
            error: None,
        },
        Err(e) => {
            log::warn!("N={n} R={r} C={c} rep={rep}: {e}");
            StudyRecord {
                n,
                r,
                c,
                family: pop.family,
                rep,
                delta: None,
                seconds,
                converged: false,
                error: Some(e.to_string()),
            }
        }
    }
}

/// Runs every replication of every condition in parallel. Records are
/// sorted by `(N, R, C, rep)`; failed replications are kept with no `δ`.
pub fn run_study(pop: &Population, design: &StudyDesign, opts: &StudyOptions) -> Result<Vec<StudyRecord>> {
    pop.check()?;
    design.check(pop)?;
    let mut jobs = Vec::new();
    for &n in &design.n_levels {
        for &r in &design.r_levels {
            for &c in &design.c_levels {
                for rep in 1..=design.replications {
                    jobs.push((n, r, c, rep));
                }
            }
        }
    }
    jobs.sort_unstable();
    jobs.dedup();
    Ok(jobs
        .into_par_iter()
        .map(|(n, r, c, rep)| run_replication(pop, n, r, c, rep, design.seed, opts))
        .collect())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v}"))
}

/// Study records as CSV with columns `N,R,C,family,rep,delta,seconds,converged`.
pub fn records_to_csv(records: &[StudyRecord]) -> String {
    let mut out = String::from("N,R,C,family,rep,delta,seconds,converged\n");
    for rec in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            rec.n,
            rec.r,
            rec.c,
            family_name(rec.family),
            rec.rep,
            fmt_opt(rec.delta),
            fmt_opt(rec.seconds),
            rec.converged
        );
    }
    out
}

/// Median `δ` of one design cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub n: usize,
    pub r: usize,
    pub c: usize,
    pub family: Family,
    pub median_delta: Option<f64>,
    pub replications: usize,
    pub failures: usize,
}

pub fn summarize(records: &[StudyRecord]) -> Vec<ConditionSummary> {
    let mut cells: BTreeMap<(u64, usize, usize, usize), (Family, Vec<f64>, usize, usize)> = BTreeMap::new();
    for rec in records {
        let cell = cells
            .entry((family_key(rec.family), rec.n, rec.r, rec.c))
            .or_insert((rec.family, Vec::new(), 0, 0));
        cell.2 += 1;
        match rec.delta {
            Some(d) => cell.1.push(d),
            None => cell.3 += 1,
        }
    }
    cells
        .into_iter()
        .map(|((_, n, r, c), (family, deltas, replications, failures))| ConditionSummary {
            n,
            r,
            c,
            family,
            median_delta: median(deltas),
            replications,
            failures,
        })
        .collect()
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let k = xs.len() / 2;
    Some(if xs.len() % 2 == 1 { xs[k] } else { (xs[k - 1] + xs[k]) / 2.0 })
}
