//! Maximum-likelihood thresholds of one ordinal variable with the structural
//! part as a fixed offset (a proportional-odds fit with no predictors).
//!
//! Ordering is enforced by the parameterization `m_1 = t_1`,
//! `m_c = m_{c-1} + exp(t_c)`; the unconstrained `t` are optimized by a
//! damped Newton method with step halving.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::loglik::{interval_prob, log_prob, logistic_cdf, logistic_pdf, ThresholdVector};

/// Thresholds beyond this magnitude signal separation.
pub const SEPARATION_BOUND: f64 = 30.0;
/// Convergence tolerance on the ∞-norm of the gradient in threshold space.
pub const GRADIENT_TOL: f64 = 1e-8;
pub const MAX_ITER: usize = 200;
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdFit {
    pub m: ThresholdVector,
    pub nll: f64,
    pub iterations: usize,
    pub converged: bool,
    /// A threshold ran past `±SEPARATION_BOUND` and was capped.
    pub separated: bool,
}

/// `m_c = logit(P̂(y ≤ c)) + mean(θ)`.
pub fn initial_thresholds(y: &[u32], theta: &[f64], cats: usize) -> Result<ThresholdVector> {
    let n = y.len() as f64;
    let mut counts = vec![0usize; cats];
    for &v in y {
        counts[v as usize - 1] += 1;
    }
    let mean_theta = theta.iter().sum::<f64>() / n;
    let mut cum = 0usize;
    let m = counts[..cats - 1]
        .iter()
        .map(|&c| {
            cum += c;
            let p = cum as f64 / n;
            (p / (1.0 - p)).ln() + mean_theta
        })
        .collect();
    ThresholdVector::new(m)
}

/// Fits the thresholds of one variable with codes `y` (1-based) and offsets
/// `theta`, starting from `init` when given.
pub fn fit_thresholds(y: &[u32], theta: &[f64], cats: usize, init: Option<&ThresholdVector>) -> Result<ThresholdFit> {
    if y.len() != theta.len() {
        return Err(Error::Dimension(format!(
            "{} codes but {} offsets",
            y.len(),
            theta.len()
        )));
    }
    if cats < 2 {
        return Err(Error::Domain(format!("{cats} categories")));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Numerical("non-finite structural offset".into()));
    }
    let mut counts = vec![0usize; cats];
    for &v in y {
        if v < 1 || v as usize > cats {
            return Err(Error::Domain(format!("code {v} outside 1..={cats}")));
        }
        counts[v as usize - 1] += 1;
    }
    if let Some(c) = counts.iter().position(|&k| k == 0) {
        return Err(Error::Validation(format!("category {} unobserved", c + 1)));
    }
    let start = match init {
        Some(m) if m.categories() == cats => m.clone(),
        Some(m) => {
            return Err(Error::Dimension(format!(
                "initial thresholds for {} categories, expected {cats}",
                m.categories()
            )))
        }
        None => initial_thresholds(y, theta, cats)?,
    };

    let problem = Problem { y, theta };
    let mut t = to_unconstrained(start.values());
    let mut state = problem.evaluate(&to_thresholds(&t))?;
    let start_nll = state.nll;
    let mut iterations = 0;
    let mut converged = false;
    let mut separated = false;

    while iterations < MAX_ITER {
        if state.grad.amax() < GRADIENT_TOL {
            converged = true;
            break;
        }
        iterations += 1;
        let step = newton_direction(&t, &state);
        let slack = 8.0 * f64::EPSILON * state.nll.abs();
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = t.iter().zip(step.iter()).map(|(a, d)| a + scale * d).collect();
            let trial_m = to_thresholds(&trial);
            if trial_m.iter().all(|x| x.is_finite()) && trial_m.windows(2).all(|w| w[1] > w[0]) {
                let next = problem.evaluate(&trial_m)?;
                if next.nll.is_finite() && next.nll <= state.nll + slack {
                    accepted = Some((trial, next));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((trial, next)) = accepted else {
            break;
        };
        t = trial;
        state = next;
        if to_thresholds(&t).iter().any(|x| x.abs() > SEPARATION_BOUND) {
            break;
        }
    }
    if state.grad.amax() < GRADIENT_TOL {
        converged = true;
    }
    let mut m = to_thresholds(&t);
    if state.nll > start_nll {
        // only reachable through roundoff-level slack in the line search
        m = start.values().to_vec();
        state = problem.evaluate(&m)?;
    }
    if m.iter().any(|x| x.abs() > SEPARATION_BOUND) {
        separated = true;
        converged = false;
        for c in 0..m.len() {
            m[c] = m[c].clamp(-SEPARATION_BOUND, SEPARATION_BOUND);
            if c > 0 && m[c] <= m[c - 1] {
                m[c] = m[c - 1] + 1e-6;
            }
        }
        log::warn!("threshold diverged past ±{SEPARATION_BOUND}; capped (separation)");
        state = problem.evaluate(&m)?;
    }
    Ok(ThresholdFit {
        m: ThresholdVector::new(m)?,
        nll: state.nll,
        iterations,
        converged,
        separated,
    })
}

struct Problem<'a> {
    y: &'a [u32],
    theta: &'a [f64],
}

struct State {
    nll: f64,
    /// Gradient in threshold space.
    grad: DVector<f64>,
    /// Hessian in threshold space.
    hess: DMatrix<f64>,
}

impl Problem<'_> {
    fn evaluate(&self, m: &[f64]) -> Result<State> {
        let k = m.len();
        let tv = ThresholdVector::new(m.to_vec())?;
        let mut nll = 0.0;
        let mut grad = DVector::zeros(k);
        let mut hess = DMatrix::zeros(k, k);
        for (&y, &theta) in self.y.iter().zip(self.theta) {
            let y = y as usize;
            nll -= log_prob(theta, &tv, y)?;
            let lower = (y >= 2).then(|| y - 2);
            let upper = (y <= k).then(|| y - 1);
            let a = lower.map_or(f64::NEG_INFINITY, |c| m[c] - theta);
            let b = upper.map_or(f64::INFINITY, |c| m[c] - theta);
            let pi = interval_prob(a, b).max(f64::MIN_POSITIVE);
            let (fa, fb) = (density(a), density(b));
            let (dfa, dfb) = (density_slope(a), density_slope(b));
            if let Some(c) = upper {
                grad[c] -= fb / pi;
                hess[(c, c)] += -dfb / pi + (fb / pi).powi(2);
            }
            if let Some(c) = lower {
                grad[c] += fa / pi;
                hess[(c, c)] += dfa / pi + (fa / pi).powi(2);
            }
            if let (Some(l), Some(u)) = (lower, upper) {
                let cross = -fa * fb / (pi * pi);
                hess[(l, u)] += cross;
                hess[(u, l)] += cross;
            }
        }
        Ok(State { nll, grad, hess })
    }
}

fn density(x: f64) -> f64 {
    if x.is_finite() {
        logistic_pdf(x)
    } else {
        0.0
    }
}

fn density_slope(x: f64) -> f64 {
    if x.is_finite() {
        logistic_pdf(x) * (1.0 - 2.0 * logistic_cdf(x))
    } else {
        0.0
    }
}

/// Newton direction in `t`, with diagonal damping when the Hessian is not
/// positive definite.
fn newton_direction(t: &[f64], state: &State) -> DVector<f64> {
    let k = t.len();
    // dm_c/dt_j = 1 for j = 0, exp(t_j) for 1 <= j <= c, 0 otherwise
    let jac = DMatrix::from_fn(k, k, |c, j| match j {
        0 => 1.0,
        _ if j <= c => t[j].exp(),
        _ => 0.0,
    });
    let grad_t = jac.transpose() * &state.grad;
    let mut hess_t = jac.transpose() * &state.hess * &jac;
    // curvature of the exp map: d²m_c/dt_j² = exp(t_j) for 1 <= j <= c
    for j in 1..k {
        let tail: f64 = state.grad.rows(j, k - j).sum();
        hess_t[(j, j)] += t[j].exp() * tail;
    }
    let scale = hess_t.diagonal().amax().max(1e-12);
    let mut damping = 0.0;
    loop {
        let mut h = hess_t.clone();
        for j in 0..k {
            h[(j, j)] += damping;
        }
        if let Some(chol) = Cholesky::new(h) {
            return -chol.solve(&grad_t);
        }
        damping = if damping == 0.0 { 1e-8 * scale } else { damping * 10.0 };
        if damping > 1e12 * scale {
            return -grad_t / scale;
        }
    }
}

fn to_unconstrained(m: &[f64]) -> Vec<f64> {
    std::iter::once(m[0])
        .chain(m.windows(2).map(|w| (w[1] - w[0]).ln()))
        .collect()
}

fn to_thresholds(t: &[f64]) -> Vec<f64> {
    let mut m = Vec::with_capacity(t.len());
    let mut acc = t[0];
    m.push(acc);
    for x in &t[1..] {
        acc += x.exp();
        m.push(acc);
    }
    m
}
