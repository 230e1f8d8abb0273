//! Monolithic reference solve of the coupled saddle system
//! `[[A, −Bᵀ], [B, 0]]·(u, λ) = (f, 0)` by dense LU. Shares no code path
//! with the reduced solver beyond the assembled matrices.

use crate::coupling::{BlockVector, CoupledProblem};
use crate::numerics::{Cholesky, DenseMatrix, Lu};
use crate::reduction::{ReductionError, Result};
use crate::tolerances;

#[derive(Debug, Clone)]
pub struct MonolithicSolution {
    pub u_blocks: BlockVector,
    pub lambda: Vec<f64>,
}

/// Dense saddle matrix and right-hand side in the order `(u_1, …, u_K, λ)`.
pub fn assemble_saddle(problem: &CoupledProblem) -> Result<(DenseMatrix, Vec<f64>)> {
    let counts = problem.dof_counts();
    let n_u: usize = counts.iter().sum();
    let m = problem.multiplier_dim();
    let n = n_u + m;
    if n > tolerances::DENSE_SCHUR_LIMIT {
        return Err(ReductionError::TooLarge(format!("monolithic system of dimension {n}")));
    }
    let mut k = DenseMatrix::zeros(n, n);
    let mut rhs = vec![0.0; n];
    let mut offset = 0;
    for (s, b) in problem.subproblems.iter().zip(problem.coupling.blocks()) {
        for i in 0..s.dof_count() {
            for (j, v) in s.stiffness.row(i) {
                k[(offset + i, offset + j)] += v;
            }
            rhs[offset + i] = s.load[i];
        }
        for r in 0..m {
            for (j, v) in b.row(r) {
                k[(n_u + r, offset + j)] += v;
                k[(offset + j, n_u + r)] -= v;
            }
        }
        offset += s.dof_count();
    }
    Ok((k, rhs))
}

pub fn solve_monolithic(problem: &CoupledProblem) -> Result<MonolithicSolution> {
    let (k, rhs) = assemble_saddle(problem)?;
    let x = Lu::factor(&k)?.solve(&rhs);
    let mut u_blocks = Vec::with_capacity(problem.subproblems.len());
    let mut offset = 0;
    for c in problem.dof_counts() {
        u_blocks.push(x[offset..offset + c].to_vec());
        offset += c;
    }
    Ok(MonolithicSolution { u_blocks, lambda: x[offset..].to_vec() })
}

/// Kernel coefficients of `u`: per floating subdomain, the least-squares
/// fit `N_k·c ≈ u_k`.
pub fn kernel_component(problem: &CoupledProblem, u: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(problem.kernel_dim());
    for (s, uk) in problem.subproblems.iter().zip(u) {
        if s.kernel_dim() == 0 {
            continue;
        }
        let n = &s.kernel_basis;
        let gram = n.transpose().matmul(n);
        out.extend(Cholesky::factor(&gram)?.solve(&n.transpose_matvec(uk)));
    }
    Ok(out)
}
