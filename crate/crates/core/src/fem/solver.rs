use std::sync::Arc;

use crate::coupling::{BlackBoxSolver, SolverFailure};
use crate::numerics::{BorderedFactorization, BorderedSystem, DenseMatrix, SparseMatrix};

use super::Result;

/// Galerkin pseudo-inverse of a symmetric stiffness: the kernel-orthogonal
/// solution of `A·x = g − N·μ`, computed through a factorized bordered
/// system. Loads outside `Range(A)` are projected first.
#[derive(Debug, Clone)]
pub struct GalerkinPseudoInverse {
    factorization: BorderedFactorization,
}

impl GalerkinPseudoInverse {
    pub fn new(stiffness: SparseMatrix, kernel_basis: DenseMatrix) -> Result<Self> {
        let sys = BorderedSystem::new(stiffness, kernel_basis)?;
        Ok(Self { factorization: BorderedFactorization::new(&sys)? })
    }

    pub fn dim(&self) -> usize {
        self.factorization.dim()
    }
}

impl BlackBoxSolver for GalerkinPseudoInverse {
    fn apply(&self, g: &[f64]) -> std::result::Result<Vec<f64>, SolverFailure> {
        self.factorization
            .solve(g)
            .map(|(x, _)| x)
            .map_err(|e| SolverFailure::new(e.to_string(), f64::NAN))
    }
}

pub fn galerkin_pseudo_inverse(
    stiffness: &SparseMatrix,
    kernel_basis: &DenseMatrix,
) -> Result<Arc<GalerkinPseudoInverse>> {
    Ok(Arc::new(GalerkinPseudoInverse::new(stiffness.clone(), kernel_basis.clone())?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble_local, SubdomainMesh};
    use crate::numerics::vector::dot;
    use crate::numerics::{solve_dense, symmetric_eigenvalues};

    #[test]
    fn nonsingular_stiffness_is_inverted() {
        let m = SubdomainMesh::segment([0.0, 0.0], [1.0, 0.0], 6, true, false).unwrap();
        let (a, k) = assemble_local(&m, 1.5);
        let p = galerkin_pseudo_inverse(&a, &k).unwrap();
        let g: Vec<f64> = (0..6).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = p.apply(&g).unwrap();
        let y = solve_dense(&a.to_dense(), &g).unwrap();
        for (u, v) in x.iter().zip(&y) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn range_load_recovers_the_kernel_free_part() {
        let m = SubdomainMesh::segment([0.0, 0.0], [1.0, 0.0], 7, false, false).unwrap();
        let (a, k) = assemble_local(&m, 1.0);
        let p = galerkin_pseudo_inverse(&a, &k).unwrap();
        let x0: Vec<f64> = (0..8).map(|i| (i as f64 * 1.3).cos() + 2.0).collect();
        let mean = x0.iter().sum::<f64>() / 8.0;
        let x = p.apply(&a.matvec(&x0)).unwrap();
        for (u, v) in x.iter().zip(&x0) {
            assert!((u - (v - mean)).abs() < 1e-11);
        }
    }

    #[test]
    fn constant_load_is_projected_onto_the_range() {
        let m = SubdomainMesh::segment([0.0, 0.0], [1.0, 0.0], 5, false, false).unwrap();
        let (a, k) = assemble_local(&m, 1.0);
        let p = galerkin_pseudo_inverse(&a, &k).unwrap();
        let g: Vec<f64> = (0..6).map(|i| 1.0 + 0.1 * i as f64).collect();
        let ax = a.matvec(&p.apply(&g).unwrap());
        // Range(A) projection from the eigendecomposition: remove the
        // component along the normalized eigenvector of the zero eigenvalue.
        let ev = symmetric_eigenvalues(&a.to_dense());
        assert!(ev[0].abs() < 1e-12 && ev[1] > 1e-3);
        let e = vec![1.0 / 6f64.sqrt(); 6];
        let c = dot(&g, &e);
        for i in 0..6 {
            assert!((ax[i] - (g[i] - c * e[i])).abs() < 1e-12);
        }
    }
}
