//! Dense complex SVD on nalgebra matrices, computed by faer.
//!
//! nalgebra's own complex SVD can return factors whose product misses the
//! input by far more than rounding, so every decomposition goes through here.

use faer::Mat;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Thin SVD `m = U·diag(σ)·Vᴴ` with `σ` sorted in decreasing order.
pub struct ThinSvd {
    pub u: DMatrix<Complex64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<Complex64>,
}

fn to_faer(m: &DMatrix<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn thin_svd(m: &DMatrix<Complex64>) -> ThinSvd {
    let k = m.nrows().min(m.ncols());
    if k == 0 {
        return ThinSvd { u: DMatrix::zeros(m.nrows(), 0), sigma: Vec::new(), v: DMatrix::zeros(m.ncols(), 0) };
    }
    let svd = to_faer(m).thin_svd().expect("SVD of a finite matrix converges");
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    ThinSvd {
        u: DMatrix::from_fn(m.nrows(), k, |i, j| u[(i, j)]),
        sigma: (0..k).map(|i| s[i].re).collect(),
        v: DMatrix::from_fn(m.ncols(), k, |i, j| v[(i, j)]),
    }
}

/// Singular values in decreasing order.
pub fn singular_values(m: &DMatrix<Complex64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    to_faer(m).singular_values().expect("SVD of a finite matrix converges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factors_reproduce_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (r, c) in [(1, 1), (7, 3), (3, 7), (60, 25)] {
            let m = DMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let s = thin_svd(&m);
            let d = DMatrix::from_fn(s.sigma.len(), s.sigma.len(), |i, j| {
                Complex64::new(if i == j { s.sigma[i] } else { 0.0 }, 0.0)
            });
            let back = &s.u * d * s.v.adjoint();
            assert!((back - &m).norm() < 1e-12 * m.norm(), "{r}x{c}");
            assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
            let values = singular_values(&m);
            assert!(values.iter().zip(&s.sigma).all(|(a, b)| (a - b).abs() < 1e-12));
        }
    }

    #[test]
    fn empty_matrix() {
        let s = thin_svd(&DMatrix::zeros(0, 4));
        assert!(s.sigma.is_empty());
        assert_eq!(s.v.nrows(), 4);
    }
}
