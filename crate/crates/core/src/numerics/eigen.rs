//! Dense symmetric eigenvalue utilities (desk-scale only).

use nalgebra::{SymmetricEigen, SVD};

use super::dense::{Cholesky, DenseMatrix};
use super::{NumericsError, Result};

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    if m.rows() == 0 {
        return Vec::new();
    }
    let mut sym = m.to_nalgebra();
    let t = sym.transpose();
    sym = (sym + t) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Eigenvalues `μ` of `a·v = μ·b·v` for symmetric `a` and SPD `b`, ascending.
pub fn generalized_eigenvalues(a: &DenseMatrix, b: &DenseMatrix) -> Result<Vec<f64>> {
    if a.rows() != b.rows() || !a.is_square() || !b.is_square() {
        return Err(NumericsError::DimensionMismatch("generalized eigenproblem".into()));
    }
    let n = a.rows();
    let chol = Cholesky::factor(b)?;
    // C = L⁻¹ A L⁻ᵀ, built column by column: X = L⁻¹A then C = (L⁻¹ Xᵀ)ᵀ.
    let mut x = DenseMatrix::zeros(n, n);
    for j in 0..n {
        x.set_column(j, &chol.lower_solve(&a.column(j)));
    }
    let xt = x.transpose();
    let mut c = DenseMatrix::zeros(n, n);
    for j in 0..n {
        c.set_column(j, &chol.lower_solve(&xt.column(j)));
    }
    Ok(symmetric_eigenvalues(&c.transpose()))
}

/// Singular values at or below `RANK·σ_max` count as zero.
pub fn numerical_rank(m: &DenseMatrix) -> usize {
    if m.rows() == 0 || m.cols() == 0 {
        return 0;
    }
    let sv = SVD::new(m.to_nalgebra(), false, false).singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > crate::tolerances::RANK * smax).count()
}

/// Orthonormal basis (as columns) of `ker(m)`.
pub fn null_space(m: &DenseMatrix) -> DenseMatrix {
    let n = m.cols();
    if m.rows() == 0 || m.max_abs() == 0.0 {
        return DenseMatrix::identity(n);
    }
    let gram = m.transpose().matmul(m);
    let eig = SymmetricEigen::new({
        let g = gram.to_nalgebra();
        let t = g.transpose();
        (g + t) * 0.5
    });
    let lmax = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
    // Eigenvalues of NᵀN are squared singular values.
    let threshold = crate::tolerances::RANK * lmax;
    let cols: Vec<Vec<f64>> = (0..n)
        .filter(|&j| eig.eigenvalues[j] <= threshold)
        .map(|j| eig.eigenvectors.column(j).iter().copied().collect())
        .collect();
    DenseMatrix::from_columns(n, &cols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigenvalues_of_diagonal() {
        let m = DenseMatrix::from_rows(&[&[3.0, 0.0], &[0.0, 1.0]]);
        assert_eq!(symmetric_eigenvalues(&m), vec![1.0, 3.0]);
    }

    #[test]
    fn generalized_matches_scaled_problem() {
        let a = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 8.0]]);
        let b = DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]);
        let ev = generalized_eigenvalues(&a, &b).unwrap();
        assert!((ev[0] - 1.0).abs() < 1e-14 && (ev[1] - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rank_and_null_space() {
        let g = DenseMatrix::from_rows(&[&[-1.0, 1.0]]);
        assert_eq!(numerical_rank(&g), 1);
        let ns = null_space(&g);
        assert_eq!(ns.cols(), 1);
        let v = ns.column(0);
        assert!((v[0] - v[1]).abs() < 1e-14);
        assert!((v[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-14);
    }
}
