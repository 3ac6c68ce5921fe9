//! SMACOF engine for the proximity (distance) models.
//!
//! The majorizing least squares problem `Σ (θ_ir - λ_ir)²` with
//! `θ_ir = -d(u_i, v_r)` is raw STRESS with dissimilarities `δ = -λ`, which
//! may be negative. Negative dissimilarities are handled by reweighting:
//! the cells contribute to `W` instead of `A`, after which the usual
//! alternating unfolding updates apply.
//!
//! `A` and `W` depend on the current distances, so they are rebuilt before
//! every row update and again before every column update. Each half-step
//! then minimizes a majorizer that touches the loss at the current
//! configuration, and the loss never increases.

use nalgebra::Cholesky;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Constant used in the weight of a negative dissimilarity at zero distance.
pub const WEIGHT_EPS: f64 = 1e-8;

/// Distances at or below this are treated as zero.
pub const ZERO_DISTANCE: f64 = 1e-12;

/// Ideal points (or their regression weights) and variable points.
#[derive(Debug, Clone, PartialEq)]
pub struct UnfoldingConfig {
    /// N×S ideal points; `X B` for the restricted model.
    pub u: Matrix,
    /// P×S regression weights (restricted model only).
    pub b: Option<Matrix>,
    /// R×S variable points.
    pub v: Matrix,
}

impl UnfoldingConfig {
    /// Structural matrix `-d(u_i, v_r)`.
    pub fn theta(&self) -> Matrix {
        -distances(&self.u, &self.v)
    }
}

/// Euclidean distances between the rows of `u` (N×S) and `v` (R×S).
pub fn distances(u: &Matrix, v: &Matrix) -> Matrix {
    assert_eq!(u.ncols(), v.ncols(), "configurations differ in dimensionality");
    Matrix::from_fn(u.nrows(), v.nrows(), |i, r| {
        let mut ss = 0.0;
        for s in 0..u.ncols() {
            let diff = u[(i, s)] - v[(r, s)];
            ss += diff * diff;
        }
        ss.sqrt()
    })
}

/// Weighted raw STRESS `Σ w (δ - d)²`.
pub fn stress(delta: &Matrix, d: &Matrix, w: &Matrix) -> f64 {
    delta
        .iter()
        .zip(d.iter())
        .zip(w.iter())
        .map(|((dl, di), wi)| wi * (dl - di) * (dl - di))
        .sum()
}

/// `A`, the reweighted `W`, and their row and column sums.
#[derive(Debug, Clone, PartialEq)]
pub struct MajorizationMatrices {
    pub a: Matrix,
    pub w: Matrix,
    /// `w_{i+}`
    pub row_w: Vec<f64>,
    /// `w_{+r}`
    pub col_w: Vec<f64>,
    /// `a_{i+}`
    pub row_a: Vec<f64>,
    /// `a_{+r}`
    pub col_a: Vec<f64>,
}

/// Builds `A` and `W` for dissimilarities `delta` at current distances `d`:
///
/// * `δ ≥ 0, d > 0`: `a = w δ / d`, weight unchanged;
/// * `δ ≥ 0, d = 0`: `a = 0`, weight unchanged;
/// * `δ < 0, d > 0`: `a = 0`, weight `w (d + |δ|) / d`;
/// * `δ < 0, d = 0`: `a = 0`, weight `w (ε + δ²) / ε`.
pub fn build_majorization(delta: &Matrix, d: &Matrix, base_w: &Matrix, eps: f64) -> Result<MajorizationMatrices> {
    if delta.shape() != d.shape() || delta.shape() != base_w.shape() {
        return Err(Error::Dimension("delta, distances and weights differ in shape".into()));
    }
    let (n, r) = delta.shape();
    let mut a = Matrix::zeros(n, r);
    let mut w = base_w.clone();
    for j in 0..r {
        for i in 0..n {
            let (dl, di, wi) = (delta[(i, j)], d[(i, j)], base_w[(i, j)]);
            let positive = di > ZERO_DISTANCE;
            if dl >= 0.0 {
                if positive {
                    a[(i, j)] = wi * dl / di;
                }
            } else if positive {
                w[(i, j)] = wi * (di + dl.abs()) / di;
            } else {
                w[(i, j)] = wi * (eps + dl * dl) / eps;
            }
        }
    }
    let row_w: Vec<f64> = w.row_iter().map(|row| row.sum()).collect();
    let col_w: Vec<f64> = w.column_iter().map(|col| col.sum()).collect();
    if let Some(i) = row_w.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateWeights(format!("row {} of W sums to zero", i + 1)));
    }
    if let Some(j) = col_w.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateWeights(format!("column {} of W sums to zero", j + 1)));
    }
    let row_a = a.row_iter().map(|row| row.sum()).collect();
    let col_a = a.column_iter().map(|col| col.sum()).collect();
    Ok(MajorizationMatrices {
        a,
        w,
        row_w,
        col_w,
        row_a,
        col_a,
    })
}

/// `R^{-1} (P U - A V + W V)`.
pub fn update_rows(u: &Matrix, v: &Matrix, m: &MajorizationMatrices) -> Matrix {
    let mut rhs = (&m.w - &m.a) * v;
    for i in 0..u.nrows() {
        let scale = m.row_w[i];
        for s in 0..u.ncols() {
            rhs[(i, s)] = (rhs[(i, s)] + m.row_a[i] * u[(i, s)]) / scale;
        }
    }
    rhs
}

/// `C^{-1} (Q V - A' U + W' U)`.
pub fn update_columns(u: &Matrix, v: &Matrix, m: &MajorizationMatrices) -> Matrix {
    let mut rhs = (&m.w - &m.a).transpose() * u;
    for j in 0..v.nrows() {
        let scale = m.col_w[j];
        for s in 0..v.ncols() {
            rhs[(j, s)] = (rhs[(j, s)] + m.col_a[j] * v[(j, s)]) / scale;
        }
    }
    rhs
}

/// `(X' R X)^{-1} X' (P U - A V + W V)`, the row update under `U = X B`.
pub fn rmdu_update_b(x: &Matrix, u: &Matrix, v: &Matrix, m: &MajorizationMatrices) -> Result<Matrix> {
    let mut rhs = (&m.w - &m.a) * v;
    for i in 0..u.nrows() {
        for s in 0..u.ncols() {
            rhs[(i, s)] += m.row_a[i] * u[(i, s)];
        }
    }
    solve_b(x, &rhs, &m.row_w)
}

/// `(X' R X)^{-1} X' rhs` with `R = diag(row_w)`.
fn solve_b(x: &Matrix, rhs: &Matrix, row_w: &[f64]) -> Result<Matrix> {
    let mut xr = x.clone();
    for (i, mut row) in xr.row_iter_mut().enumerate() {
        row *= row_w[i];
    }
    let gram = x.transpose() * &xr;
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::SingularDesign("X'RX is not positive definite".into())
    })?;
    Ok(chol.solve(&(x.transpose() * rhs)))
}

/// `(a, w)` of one cell with unit base weight.
fn unit_cell(dl: f64, di: f64) -> (f64, f64) {
    let positive = di > ZERO_DISTANCE;
    if dl >= 0.0 {
        (if positive { dl / di } else { 0.0 }, 1.0)
    } else if positive {
        (0.0, (di + dl.abs()) / di)
    } else {
        (0.0, (WEIGHT_EPS + dl * dl) / WEIGHT_EPS)
    }
}

/// Rows of `m` as one contiguous row-major buffer.
fn row_major(m: &Matrix) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Sums of one half-step with unit base weights, computed without forming
/// `A` and `W`.
struct HalfStep {
    /// `P U - A V + W V` (rows) or `Q V - A' U + W' U` (columns).
    rhs: Matrix,
    /// `w_{i+}` (rows) or `w_{+r}` (columns).
    wsum: Vec<f64>,
    /// Unweighted raw STRESS at the configuration the sums were taken at.
    stress: f64,
}

fn unit_half_step(delta: &Matrix, u: &Matrix, v: &Matrix, rows: bool) -> HalfStep {
    let n = delta.nrows();
    let dims = u.ncols();
    let (own, other) = if rows { (u, v) } else { (v, u) };
    let (own_rm, other_rm) = (row_major(own), row_major(other));
    let cells = delta.as_slice();
    let mut rhs = Matrix::zeros(own.nrows(), dims);
    let mut wsum = vec![0.0; own.nrows()];
    let mut acc = vec![0.0; dims];
    let mut total = 0.0;
    for k in 0..own.nrows() {
        let ok = &own_rm[k * dims..(k + 1) * dims];
        acc.iter_mut().for_each(|x| *x = 0.0);
        let mut asum = 0.0;
        for (l, ol) in other_rm.chunks_exact(dims).enumerate() {
            let dl = if rows { cells[k + l * n] } else { cells[l + k * n] };
            let di = ok.iter().zip(ol).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt();
            total += (dl - di) * (dl - di);
            let (a, w) = unit_cell(dl, di);
            asum += a;
            wsum[k] += w;
            for (x, q) in acc.iter_mut().zip(ol) {
                *x += (w - a) * q;
            }
        }
        for s in 0..dims {
            rhs[(k, s)] = acc[s] + asum * ok[s];
        }
    }
    HalfStep { rhs, wsum, stress: total }
}

/// Completes one unit-weight alternating step from the row sums taken at
/// `config`.
fn unit_update(delta: &Matrix, x: Option<&Matrix>, config: &UnfoldingConfig, row_pass: HalfStep) -> Result<UnfoldingConfig> {
    let HalfStep { mut rhs, wsum: row_w, .. } = row_pass;
    let (u, b) = match x {
        None => {
            for (i, mut row) in rhs.row_iter_mut().enumerate() {
                row /= row_w[i];
            }
            (rhs, None)
        }
        Some(x) => {
            let b = solve_b(x, &rhs, &row_w)?;
            (x * &b, Some(b))
        }
    };
    let HalfStep { rhs: mut v, wsum: col_w, .. } = unit_half_step(delta, &u, &config.v, false);
    for (j, mut row) in v.row_iter_mut().enumerate() {
        row /= col_w[j];
    }
    Ok(UnfoldingConfig { u, b, v })
}

/// One alternating step: rows (or `B`) first, then columns, rebuilding the
/// majorization matrices at the current configuration before each half.
pub fn mdu_update(delta: &Matrix, base_w: &Matrix, x: Option<&Matrix>, config: &UnfoldingConfig) -> Result<UnfoldingConfig> {
    let m = build_majorization(delta, &distances(&config.u, &config.v), base_w, WEIGHT_EPS)?;
    let (u, b) = match x {
        None => (update_rows(&config.u, &config.v, &m), None),
        Some(x) => {
            let b = rmdu_update_b(x, &config.u, &config.v, &m)?;
            (x * &b, Some(b))
        }
    };
    let m = build_majorization(delta, &distances(&u, &config.v), base_w, WEIGHT_EPS)?;
    let v = update_columns(&u, &config.v, &m);
    Ok(UnfoldingConfig { u, b, v })
}

/// Outcome of an inner SMACOF loop.
#[derive(Debug, Clone)]
pub struct InnerResult {
    pub config: UnfoldingConfig,
    /// Unweighted STRESS `Σ (δ - d)²` before the first step and after each
    /// step.
    pub trace: Vec<f64>,
}

/// Minimizes `Σ (δ - d)²` from `start` until the relative decrease drops
/// below `tol` or `max_iter` steps were taken. A step that would increase
/// the loss is rejected and ends the loop, so the trace never increases.
pub fn smacof(delta: &Matrix, x: Option<&Matrix>, start: UnfoldingConfig, max_iter: usize, tol: f64) -> Result<InnerResult> {
    let mut config = start;
    // The row pass at a configuration also yields its STRESS, so each step
    // costs two passes over the cells.
    let mut pass = unit_half_step(delta, &config.u, &config.v, true);
    let mut current = pass.stress;
    let mut trace = vec![current];
    for _ in 0..max_iter {
        let next = unit_update(delta, x, &config, pass)?;
        let next_pass = unit_half_step(delta, &next.u, &next.v, true);
        let value = next_pass.stress;
        if !value.is_finite() {
            return Err(Error::Numerical("STRESS became non-finite".into()));
        }
        if value > current {
            // Only happens at the rounding floor, when an ideal point sits on
            // a variable point and the reweighting produces huge weights.
            break;
        }
        config = next;
        pass = next_pass;
        trace.push(value);
        let decrease = current - value;
        current = value;
        if decrease <= tol * current.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    Ok(InnerResult { config, trace })
}
