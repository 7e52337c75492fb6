//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

/// Relative singular-value cutoff used for pseudo-inverses.
pub const PINV_RTOL: f64 = 1e-10;

/// Moore-Penrose pseudo-inverse, dropping singular values below `rtol * sigma_max`.
pub fn pinv(a: &DMatrix<f64>, rtol: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.ncols(), a.nrows());
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = rtol * smax;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            out += (vt.row(k).transpose() * u.column(k).transpose()) / s;
        }
    }
    out
}

pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Numerical rank at tolerance `rtol * sigma_max`.
pub fn rank(a: &DMatrix<f64>, rtol: f64) -> usize {
    let s = singular_values(a);
    let Some(&smax) = s.first() else { return 0 };
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&v| v > rtol * smax).count()
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(a)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Smallest eigenvalue of the symmetric part; `+inf` for an empty matrix.
pub fn lambda_min(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).first().copied().unwrap_or(f64::INFINITY)
}

pub fn lambda_max(a: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(a).last().copied().unwrap_or(f64::NEG_INFINITY)
}

/// Inverse of a symmetric positive-definite matrix through its eigendecomposition,
/// together with its 2-norm condition number.
pub fn spd_inverse(a: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let eig = SymmetricEigen::new(symmetrize(a));
    let lmin = eig.eigenvalues.min();
    let lmax = eig.eigenvalues.max();
    let cond = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    let inv_diag = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l));
    let inv = &eig.eigenvectors * inv_diag * eig.eigenvectors.transpose();
    (symmetrize(&inv), cond)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_of_full_row_rank() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 1.0]);
        let p = pinv(&a, PINV_RTOL);
        assert!((&a * &p - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!((&a * &p * &a - &a).amax() < 1e-12);
    }

    #[test]
    fn rank_of_duplicated_columns() {
        let a = DMatrix::from_fn(3, 5, |i, _| i as f64 + 1.0);
        assert_eq!(rank(&a, 1e-8), 1);
        assert_eq!(rank(&DMatrix::zeros(2, 2), 1e-8), 0);
    }

    #[test]
    fn spd_inverse_and_condition() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let (inv, cond) = spd_inverse(&a);
        assert!((inv[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((cond - 4.0).abs() < 1e-12);
        assert_eq!(lambda_min(&a), 0.5);
    }
}
