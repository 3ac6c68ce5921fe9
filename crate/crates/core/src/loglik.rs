//! Logistic-distribution mathematics shared by all estimators: category
//! probabilities, the observed-data negative log-likelihood, the closed-form
//! E-step and the working responses of the majorizing least squares problem.

use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::data::OrdinalDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Probabilities are clamped at this value inside logarithms.
pub const PROB_FLOOR: f64 = 1e-300;

static CLAMP_EVENTS: AtomicUsize = AtomicUsize::new(0);

/// Number of probability clamps performed by [`observed_nll`] since start-up.
pub fn clamp_events() -> usize {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

/// Logistic CDF `1 / (1 + exp(-eta))`, with `F(-inf) = 0` and `F(inf) = 1`.
#[inline]
pub fn logistic_cdf(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `log F(eta)`, accurate in both tails.
#[inline]
pub fn log_logistic_cdf(eta: f64) -> f64 {
    if eta >= 0.0 {
        -(-eta).exp().ln_1p()
    } else {
        eta - eta.exp().ln_1p()
    }
}

/// Log density `-eta - 2 log(1 + exp(-eta))` of the standard logistic.
#[inline]
pub fn logistic_logpdf(eta: f64) -> f64 {
    let a = eta.abs();
    -a - 2.0 * (-a).exp().ln_1p()
}

#[inline]
pub fn logistic_pdf(eta: f64) -> f64 {
    let e = (-eta.abs()).exp();
    e / ((1.0 + e) * (1.0 + e))
}

/// Strictly increasing, finite thresholds `m_1 < ... < m_{C-1}` of one
/// ordinal variable. The conceptual `m_0 = -inf` and `m_C = inf` are implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdVector(Vec<f64>);

impl ThresholdVector {
    pub fn new(m: Vec<f64>) -> Result<Self> {
        if m.is_empty() {
            return Err(Error::Domain("a threshold vector needs at least one value".into()));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite threshold in {m:?}")));
        }
        if m.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain(format!("thresholds {m:?} are not strictly increasing")));
        }
        Ok(Self(m))
    }

    /// Number of categories `C`.
    pub fn categories(&self) -> usize {
        self.0.len() + 1
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Boundaries `(m_{y-1}, m_y)` of category `y` (1-based).
    #[inline]
    pub fn bounds(&self, y: usize) -> Result<(f64, f64)> {
        let c = self.categories();
        if y < 1 || y > c {
            return Err(Error::Index(format!("category {y} outside 1..={c}")));
        }
        let lower = if y == 1 { f64::NEG_INFINITY } else { self.0[y - 2] };
        let upper = if y == c { f64::INFINITY } else { self.0[y - 1] };
        Ok((lower, upper))
    }
}

impl TryFrom<Vec<f64>> for ThresholdVector {
    type Error = Error;

    fn try_from(m: Vec<f64>) -> Result<Self> {
        Self::new(m)
    }
}

impl From<ThresholdVector> for Vec<f64> {
    fn from(m: ThresholdVector) -> Self {
        m.0
    }
}

/// `F(b) - F(a)` for `a < b`, evaluated on whichever tail keeps precision.
#[inline]
pub fn interval_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        logistic_cdf(-a) - logistic_cdf(-b)
    } else {
        logistic_cdf(b) - logistic_cdf(a)
    }
}

/// `pi_c = F(m_c - theta) - F(m_{c-1} - theta)`.
pub fn category_prob(theta: f64, m: &ThresholdVector, c: usize) -> Result<f64> {
    let (lo, hi) = m.bounds(c)?;
    Ok(interval_prob(lo - theta, hi - theta))
}

/// Negative log-likelihood `-sum_i sum_r log pi_{i,r,y_ir}`.
///
/// Probabilities below [`PROB_FLOOR`] are clamped (and counted, see
/// [`clamp_events`]); a negative or NaN probability is reported as a
/// numerical error.
pub fn observed_nll(theta: &Matrix, thresholds: &[ThresholdVector], ds: &OrdinalDataset) -> Result<f64> {
    check_shapes(theta, thresholds, ds)?;
    let mut nll = 0.0;
    for r in 0..ds.r() {
        nll += variable_nll(theta, r, &thresholds[r], ds)?;
    }
    Ok(nll)
}

/// Contribution of variable `r` to [`observed_nll`].
pub fn variable_nll(theta: &Matrix, r: usize, m: &ThresholdVector, ds: &OrdinalDataset) -> Result<f64> {
    let mut nll = 0.0;
    for i in 0..ds.n() {
        nll -= log_prob(theta[(i, r)], m, ds.get(i, r) as usize)?;
    }
    Ok(nll)
}

/// Clamped `log pi_y`.
#[inline]
pub fn log_prob(theta: f64, m: &ThresholdVector, y: usize) -> Result<f64> {
    let p = category_prob(theta, m, y)?;
    if p.is_nan() || p < 0.0 {
        return Err(Error::Numerical(format!(
            "category probability {p} for theta {theta}, category {y}"
        )));
    }
    if p < PROB_FLOOR {
        CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
        return Ok(PROB_FLOOR.ln());
    }
    Ok(p.ln())
}

/// `E(p | y, theta, m)` where `p = F(z - theta)` and `z = theta + eps` is
/// truncated to `[m_{y-1}, m_y)`.
///
/// The integral of `F f` over the interval is `(F(b)^2 - F(a)^2) / 2`, so the
/// conditional mean is `(F(a) + F(b)) / 2` with `a = m_{y-1} - theta` and
/// `b = m_y - theta`.
pub fn expected_p(y: usize, theta: f64, m: &ThresholdVector) -> Result<f64> {
    let (lo, hi) = m.bounds(y)?;
    Ok(0.5 * (logistic_cdf(lo - theta) + logistic_cdf(hi - theta)))
}

/// Expected complete-data score `xi = 1 - 2 E(p | y, theta, m)`.
pub fn xi(y: usize, theta: f64, m: &ThresholdVector) -> Result<f64> {
    // 1 - F(a) - F(b) written as (F(-a) - F(b)) keeps precision when both are near 1
    let (lo, hi) = m.bounds(y)?;
    let (a, b) = (lo - theta, hi - theta);
    Ok(logistic_cdf(-a) - logistic_cdf(b))
}

/// Working responses `lambda_ir = theta_ir - 4 xi_ir`, evaluated at the
/// current structural matrix.
pub fn working_responses(theta: &Matrix, ds: &OrdinalDataset, thresholds: &[ThresholdVector]) -> Result<Matrix> {
    check_shapes(theta, thresholds, ds)?;
    let mut lambda = Matrix::zeros(ds.n(), ds.r());
    for r in 0..ds.r() {
        for i in 0..ds.n() {
            let t = theta[(i, r)];
            lambda[(i, r)] = t - 4.0 * xi(ds.get(i, r) as usize, t, &thresholds[r])?;
        }
    }
    Ok(lambda)
}

/// `log(P(y <= c) / P(y > c)) = m_c - theta`, computed from the model's
/// cumulative probabilities.
pub fn cumulative_log_odds(theta: f64, m: &ThresholdVector, c: usize) -> Result<f64> {
    if c < 1 || c >= m.categories() {
        return Err(Error::Index(format!(
            "cumulative split {c} outside 1..{}",
            m.categories()
        )));
    }
    let eta = m.values()[c - 1] - theta;
    Ok(log_logistic_cdf(eta) - log_logistic_cdf(-eta))
}

fn check_shapes(theta: &Matrix, thresholds: &[ThresholdVector], ds: &OrdinalDataset) -> Result<()> {
    if theta.nrows() != ds.n() || theta.ncols() != ds.r() || thresholds.len() != ds.r() {
        return Err(Error::Dimension(format!(
            "theta is {}x{} with {} threshold vectors for a {}x{} dataset",
            theta.nrows(),
            theta.ncols(),
            thresholds.len(),
            ds.n(),
            ds.r()
        )));
    }
    for (r, m) in thresholds.iter().enumerate() {
        if m.categories() != ds.cats()[r] as usize {
            return Err(Error::Dimension(format!(
                "variable {} has {} categories but {} thresholds",
                ds.var_names()[r],
                ds.cats()[r],
                m.values().len()
            )));
        }
    }
    Ok(())
}
