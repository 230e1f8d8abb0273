//! Extreme-eigenvalue estimates from a CG history via the Lanczos connection.

use super::cg::CgHistory;
use super::dense::DenseMatrix;
use super::eigen::symmetric_eigenvalues;
use super::{NumericsError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimate {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
}

/// Builds the Lanczos tridiagonal matrix from CG step lengths `α_j` and
/// updates `β_j`.
pub fn lanczos_tridiagonal(history: &CgHistory) -> Result<DenseMatrix> {
    let m = history.alphas.len();
    if m == 0 {
        return Err(NumericsError::InsufficientHistory(0));
    }
    if history.betas.len() + 1 < m {
        return Err(NumericsError::DimensionMismatch(format!(
            "{} step lengths but only {} updates",
            m,
            history.betas.len()
        )));
    }
    let a = &history.alphas;
    let b = &history.betas;
    if a.iter().any(|x| !(x.is_finite() && *x > 0.0)) || b.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
        return Err(NumericsError::NonFinite("CG history"));
    }
    let mut t = DenseMatrix::zeros(m, m);
    for j in 0..m {
        t[(j, j)] = if j == 0 { 1.0 / a[0] } else { 1.0 / a[j] + b[j - 1] / a[j - 1] };
        if j + 1 < m {
            let off = b[j].sqrt() / a[j];
            t[(j, j + 1)] = off;
            t[(j + 1, j)] = off;
        }
    }
    Ok(t)
}

/// Ritz-value bounds on the spectrum of the (preconditioned) operator.
pub fn lanczos_condition_estimate(history: &CgHistory) -> Result<ConditionEstimate> {
    let t = lanczos_tridiagonal(history)?;
    let ev = symmetric_eigenvalues(&t);
    let lambda_min = ev[0];
    let lambda_max = ev[ev.len() - 1];
    let kappa = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
    Ok(ConditionEstimate { lambda_min, lambda_max, kappa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cg::{cg_solve, CgOptions};
    use std::convert::Infallible;

    #[test]
    fn recovers_spectrum_of_diagonal_operator() {
        let d = [1.0, 2.0, 5.0, 10.0];
        let op = |x: &[f64]| -> std::result::Result<Vec<f64>, Infallible> {
            Ok(x.iter().zip(&d).map(|(a, b)| a * b).collect())
        };
        let out = cg_solve(&op, None, &[1.0; 4], &CgOptions::new(1e-14, 20)).unwrap();
        let est = lanczos_condition_estimate(&out.history).unwrap();
        assert!((est.lambda_min - 1.0).abs() < 1e-8, "{est:?}");
        assert!((est.lambda_max - 10.0).abs() < 1e-8, "{est:?}");
        assert!((est.kappa - 10.0).abs() < 1e-7);
    }

    #[test]
    fn single_step_gives_unit_condition() {
        let h = CgHistory { alphas: vec![0.5], betas: vec![] };
        let est = lanczos_condition_estimate(&h).unwrap();
        assert_eq!(est.kappa, 1.0);
        assert_eq!(est.lambda_min, 2.0);
    }

    #[test]
    fn empty_history_is_rejected() {
        assert!(matches!(
            lanczos_condition_estimate(&CgHistory::default()),
            Err(NumericsError::InsufficientHistory(0))
        ));
    }
}
