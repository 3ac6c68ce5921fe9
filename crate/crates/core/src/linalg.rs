//! Dense linear-algebra helpers on top of `nalgebra`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;

/// Relative eigenvalue floor for inverse square roots of Gram matrices.
pub const EIGEN_FLOOR: f64 = 1e-10;

/// Thin SVD `A = P Φ Q'` with singular values in decreasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub left: Matrix,
    pub values: DVector<f64>,
    pub right: Matrix,
}

/// Thin SVD with a deterministic layout: singular values sorted in
/// decreasing order (ties keep column order) and each left singular vector
/// flipped so that its largest-magnitude entry is positive.
///
/// Computed by one-sided Jacobi rotations, which stay accurate for the
/// tall, thin and often nearly rank-deficient matrices met here.
/// Left vectors belonging to zero singular values are completed to an
/// orthonormal set.
pub fn svd(a: &Matrix) -> Result<Svd> {
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("SVD input has non-finite entries".into()));
    }
    if a.nrows() < a.ncols() {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(canonical(t.right, t.values, t.left));
    }
    let t = jacobi_svd(a)?;
    Ok(canonical(t.left, t.values, t.right))
}

const JACOBI_SWEEPS: usize = 80;

/// Hestenes one-sided Jacobi for `m >= n`.
fn jacobi_svd(a: &Matrix) -> Result<Svd> {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut v = Matrix::identity(n, n);
    let tol = f64::EPSILON * (m as f64).sqrt();
    // columns this small are numerically zero singular directions
    let negligible = (f64::EPSILON * a.norm()).powi(2);
    let mut converged = n < 2;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = w.column(p).norm_squared();
                let beta = w.column(q).norm_squared();
                let gamma = w.column(p).dot(&w.column(q));
                if alpha <= negligible || beta <= negligible || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }
    let values = DVector::from_fn(n, |j, _| w.column(j).norm());
    let scale = values.max();
    let mut left = Matrix::zeros(m, n);
    let mut missing = Vec::new();
    for j in 0..n {
        if values[j] > scale * f64::EPSILON * n as f64 && values[j] > 0.0 {
            left.set_column(j, &(w.column(j) / values[j]));
        } else {
            missing.push(j);
        }
    }
    complete_orthonormal(&mut left, &missing);
    Ok(Svd {
        left,
        values,
        right: v,
    })
}

fn rotate(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    for i in 0..m.nrows() {
        let (x, y) = (m[(i, p)], m[(i, q)]);
        m[(i, p)] = c * x - s * y;
        m[(i, q)] = s * x + c * y;
    }
}

/// Fills the listed columns with unit vectors orthogonal to all others,
/// by Gram-Schmidt on the standard basis.
fn complete_orthonormal(left: &mut Matrix, missing: &[usize]) {
    let m = left.nrows();
    let mut filled: Vec<usize> = (0..left.ncols()).filter(|j| !missing.contains(j)).collect();
    let mut candidate = 0;
    for &j in missing {
        while candidate < m {
            let mut e = DVector::zeros(m);
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &k in &filled {
                    let proj = left.column(k).dot(&e);
                    e -= left.column(k) * proj;
                }
            }
            let norm = e.norm();
            if norm > 1e-8 {
                left.set_column(j, &(e / norm));
                filled.push(j);
                break;
            }
        }
    }
}

fn canonical(u: Matrix, values: DVector<f64>, v: Matrix) -> Svd {
    let k = values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
    let mut left = Matrix::zeros(u.nrows(), k);
    let mut right = Matrix::zeros(v.nrows(), k);
    let mut sorted = DVector::zeros(k);
    for (dst, &src) in order.iter().enumerate() {
        let mut l = u.column(src).clone_owned();
        let mut r = v.column(src).clone_owned();
        let pivot = l
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            l.neg_mut();
            r.neg_mut();
        }
        left.set_column(dst, &l);
        right.set_column(dst, &r);
        sorted[dst] = values[src];
    }
    Svd {
        left,
        values: sorted,
        right,
    }
}

/// `G^{-1/2}` for a symmetric positive definite Gram matrix via its
/// eigendecomposition. Eigenvalues below `EIGEN_FLOOR * max` are rejected;
/// the error names the columns loading on the offending eigenvectors.
pub fn inv_sqrt_sym(gram: &Matrix, names: &[String]) -> Result<Matrix> {
    let eig = SymmetricEigen::new(gram.clone());
    let max = eig.eigenvalues.iter().copied().fold(0.0f64, f64::max);
    if !(max > 0.0) {
        return Err(Error::SingularDesign("design matrix is zero".into()));
    }
    let floor = EIGEN_FLOOR * max;
    let mut collinear = Vec::new();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda < floor {
            let v = eig.eigenvectors.column(k);
            for (j, x) in v.iter().enumerate() {
                if x.abs() > 1e-3 {
                    let name = names.get(j).cloned().unwrap_or_else(|| format!("#{}", j + 1));
                    if !collinear.contains(&name) {
                        collinear.push(name);
                    }
                }
            }
        }
    }
    if !collinear.is_empty() {
        return Err(Error::SingularDesign(format!(
            "X'X is rank deficient; collinear columns: {}",
            collinear.join(", ")
        )));
    }
    let d = eig.eigenvalues.map(|l| 1.0 / l.sqrt());
    let q = &eig.eigenvectors;
    Ok(q * Matrix::from_diagonal(&d) * q.transpose())
}

/// Row-major nested vectors, the on-disk layout for matrices.
pub fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

pub fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<Matrix> {
    if let Some(bad) = rows.iter().find(|r| r.len() != ncols) {
        return Err(Error::Dimension(format!(
            "matrix row has {} entries, expected {ncols}",
            bad.len()
        )));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

/// Serde adapter storing a matrix as row-major nested arrays.
pub mod rows_serde {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Matrix, s: S) -> Result<S::Ok, S::Error> {
        super::to_rows(m).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Matrix, D::Error> {
        let rows: Vec<Vec<f64>> = Vec::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        super::from_rows(&rows, ncols).map_err(serde::de::Error::custom)
    }
}

/// `rows_serde` for optional matrices.
pub mod opt_rows_serde {
    use super::Matrix;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &Option<Matrix>, s: S) -> Result<S::Ok, S::Error> {
        m.as_ref().map(super::to_rows).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Matrix>, D::Error> {
        let rows: Option<Vec<Vec<f64>>> = Option::deserialize(d)?;
        rows.map(|rows| {
            let ncols = rows.first().map_or(0, Vec::len);
            super::from_rows(&rows, ncols).map_err(serde::de::Error::custom)
        })
        .transpose()
    }
}
