//! Least-squares updates for the dominance (inner-product) models.
//!
//! Both updates minimize `||Λ - U V'||²` globally: CLPCA by a truncated SVD
//! of the working responses, CLRRR by the SVD of `(X'X)^{-1/2} X'Λ` under
//! the constraint `U = X B`. Scores are scaled so that `U'U / N = I`.

use crate::error::{Error, Result};
use crate::linalg::{inv_sqrt_sym, svd, Matrix};

/// Row scores (or regression weights) and loadings of a dominance model.
#[derive(Debug, Clone, PartialEq)]
pub struct BilinearParams {
    /// N×S row scores; `X B` for the restricted model.
    pub u: Matrix,
    /// P×S regression weights (restricted model only).
    pub b: Option<Matrix>,
    /// R×S loadings.
    pub v: Matrix,
}

impl BilinearParams {
    /// Structural matrix `U V'`.
    pub fn theta(&self) -> Matrix {
        &self.u * self.v.transpose()
    }
}

/// Rank-`dims` update `U = √N P_S`, `V = Q_S Φ_S / √N` from the SVD
/// `Λ = P Φ Q'`.
pub fn pca_update(lambda: &Matrix, dims: usize) -> Result<BilinearParams> {
    let (n, r) = lambda.shape();
    if dims < 1 || dims > n.min(r) {
        return Err(Error::Dimension(format!(
            "dims {dims} outside 1..={} for a {n}x{r} matrix",
            n.min(r)
        )));
    }
    let dec = svd(lambda)?;
    let root_n = (n as f64).sqrt();
    let u = dec.left.columns(0, dims) * root_n;
    let v = Matrix::from_fn(r, dims, |j, s| dec.right[(j, s)] * dec.values[s] / root_n);
    Ok(BilinearParams { u, b: None, v })
}

/// Reduced-rank regression update from the SVD
/// `(X'X)^{-1/2} X'Λ = P Φ Q'`: `B = √N (X'X)^{-1/2} P_S`,
/// `V = Q_S Φ_S / √N`.
///
/// `names` labels the predictor columns in a rank-deficiency error.
pub fn rrr_update(lambda: &Matrix, x: &Matrix, dims: usize, names: &[String]) -> Result<BilinearParams> {
    let (n, r) = lambda.shape();
    let p = x.ncols();
    if x.nrows() != n {
        return Err(Error::Dimension(format!(
            "X has {} rows, working responses {n}",
            x.nrows()
        )));
    }
    if dims < 1 || dims > p.min(r) {
        return Err(Error::Dimension(format!(
            "dims {dims} outside 1..={} for P = {p}, R = {r}",
            p.min(r)
        )));
    }
    let root = inv_sqrt_sym(&(x.transpose() * x), names)?;
    let dec = svd(&(&root * x.transpose() * lambda))?;
    let root_n = (n as f64).sqrt();
    let b = &root * dec.left.columns(0, dims) * root_n;
    let v = Matrix::from_fn(r, dims, |j, s| dec.right[(j, s)] * dec.values[s] / root_n);
    let u = x * &b;
    Ok(BilinearParams { u, b: Some(b), v })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.random_range(-2.0..2.0))
    }

    #[test]
    fn exact_rank_one() {
        let u = Matrix::from_column_slice(5, 1, &[1., -2., 0.5, 3., 1.]);
        let v = Matrix::from_column_slice(3, 1, &[0.2, -1., 2.]);
        let lambda = &u * v.transpose();
        let fit = pca_update(&lambda, 1).unwrap();
        assert!((fit.theta() - &lambda).abs().max() < 1e-10);
    }

    #[test]
    fn zero_matrix() {
        let fit = pca_update(&Matrix::zeros(6, 3), 2).unwrap();
        assert_eq!(fit.v.abs().max(), 0.0);
        assert_eq!(fit.theta().abs().max(), 0.0);
    }

    #[test]
    fn scores_are_orthonormal() {
        let lambda = random(30, 5, 1);
        let fit = pca_update(&lambda, 3).unwrap();
        let gram = fit.u.transpose() * &fit.u / 30.0;
        assert!((gram - Matrix::identity(3, 3)).abs().max() < 1e-10);

        let x = random(30, 4, 2);
        let fit = rrr_update(&lambda, &x, 2, &[]).unwrap();
        let b = fit.b.as_ref().unwrap();
        let gram = b.transpose() * x.transpose() * &x * b / 30.0;
        assert!((gram - Matrix::identity(2, 2)).abs().max() < 1e-10);
        assert!((&fit.u - &x * b).abs().max() < 1e-12);
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(pca_update(&Matrix::zeros(4, 3), 4), Err(Error::Dimension(_))));
        assert!(matches!(pca_update(&Matrix::zeros(4, 3), 0), Err(Error::Dimension(_))));
        assert!(matches!(
            rrr_update(&Matrix::zeros(4, 3), &Matrix::identity(4, 2), 3, &[]),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn rrr_with_identity_design_is_pca() {
        let lambda = random(8, 4, 3);
        let a = pca_update(&lambda, 2).unwrap();
        let b = rrr_update(&lambda, &Matrix::identity(8, 8), 2, &[]).unwrap();
        assert!((a.theta() - b.theta()).abs().max() < 1e-10);
        assert!((a.u - b.u).abs().max() < 1e-10);
        assert!((a.v - b.v).abs().max() < 1e-10);
    }

    #[test]
    fn rrr_recovers_exact_low_rank_signal() {
        let x = random(40, 5, 4);
        let b0 = random(5, 2, 5);
        let v0 = random(6, 2, 6);
        let lambda = &x * &b0 * v0.transpose();
        let fit = rrr_update(&lambda, &x, 2, &[]).unwrap();
        let err = (fit.theta() - &lambda).abs().max();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn singular_design_is_rejected() {
        let mut x = random(10, 3, 7);
        let c0 = x.column(0).clone_owned();
        x.set_column(2, &(c0 * 2.0));
        let names = vec!["a".into(), "b".into(), "c".into()];
        let err = rrr_update(&random(10, 3, 8), &x, 1, &names).unwrap_err();
        assert!(matches!(err, Error::SingularDesign(_)));
        assert!(err.to_string().contains("c"));
    }

    #[test]
    fn update_never_increases_loss() {
        for seed in 0..10 {
            let lambda = random(15, 5, 100 + seed);
            let start_u = random(15, 2, 200 + seed);
            let start_v = random(5, 2, 300 + seed);
            let before = (&lambda - &start_u * start_v.transpose()).norm_squared();
            let after = (&lambda - pca_update(&lambda, 2).unwrap().theta()).norm_squared();
            assert!(after <= before);
        }
    }
}
