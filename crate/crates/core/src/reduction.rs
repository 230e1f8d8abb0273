//! Solution of the reduced multiplier problem by projected (deflated) PCG.
//!
//! With `Σ` the Riesz matrix of the multiplier scalar product, the projector
//! `Π_σ = I − Σ⁻¹G(GᵀΣ⁻¹G)⁻¹Gᵀ` maps onto `Λ̂ = ker Gᵀ`. The multiplier is
//! split as `λ = λ⁰ + λ̂` where `λ⁰` carries the kernel constraint, and `λ̂`
//! solves `Π_σᵀ·S·λ̂ = Π_σᵀ(g − S·λ⁰)` by CG preconditioned with
//! `M̂ = Π_σ·(B⁺)ᵀ·A·B⁺·Π_σᵀ`, `B⁺ = D⁻¹Bᵀ(BD⁻¹Bᵀ)⁻¹`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{BlockVector, CoupledProblem, CouplingError};
use crate::numerics::vector::{dot, norm_inf};
use crate::numerics::{
    cg_solve, generalized_eigenvalues, lanczos_condition_estimate, null_space, numerical_rank,
    CgError, CgHistory, CgOptions, Cholesky, ConditionEstimate, DenseMatrix, NumericsError,
    SkylineCholesky, SparseMatrix,
};
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReductionError {
    #[error("coarse matrix GᵀΣ⁻¹G is singular: {0}")]
    CoarseSingular(String),
    #[error("multiplier space is not surjective onto the traces: {0}")]
    NotSurjective(String),
    #[error("problem too large for a dense factorization: {0}")]
    TooLarge(String),
    #[error("reduced operator is indefinite at iteration {iteration} (pᵀSp = {curvature:e})")]
    IndefiniteOperator { iteration: usize, curvature: f64 },
    #[error("PCG did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("condition estimate needs at least one PCG iteration")]
    InsufficientHistory,
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, ReductionError>;

/// Riesz matrix of the multiplier scalar product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaChoice {
    /// Skeleton mass (interface `L²` product); identity for point multipliers.
    #[default]
    SkeletonMass,
    Identity,
}

/// Diagonal scalar product on the primal space used by the preconditioner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DChoice {
    /// Lumped local mass divided by `h^dim`, as supplied in the subproblem
    /// dof weights.
    #[default]
    LumpedMass,
    Identity,
}

pub fn skeleton_mass(problem: &CoupledProblem) -> SparseMatrix {
    let d: Vec<f64> = problem.multipliers.iter().map(|m| m.measure).collect();
    SparseMatrix::from_diagonal(&d)
}

#[derive(Debug, Clone)]
pub struct MultiplierSpace {
    sigma: SparseMatrix,
    sigma_factor: SkylineCholesky,
    g: DenseMatrix,
    sigma_inv_g: DenseMatrix,
    /// Cholesky of `GᵀΣ⁻¹G`; `None` without floating subdomains.
    coarse: Option<Cholesky>,
}

impl MultiplierSpace {
    pub fn new(problem: &CoupledProblem, choice: SigmaChoice) -> Result<Self> {
        let sigma = match choice {
            SigmaChoice::SkeletonMass => skeleton_mass(problem),
            SigmaChoice::Identity => SparseMatrix::identity(problem.multiplier_dim()),
        };
        Self::with_sigma(problem, sigma)
    }

    pub fn with_sigma(problem: &CoupledProblem, sigma: SparseMatrix) -> Result<Self> {
        let n = problem.multiplier_dim();
        if sigma.rows() != n || sigma.cols() != n {
            return Err(NumericsError::DimensionMismatch(format!(
                "Σ is {}x{} for {n} multipliers",
                sigma.rows(),
                sigma.cols()
            ))
            .into());
        }
        let sigma_factor = SkylineCholesky::factor(&sigma)?;
        let g = problem.kernel_trace_matrix();
        let p = g.cols();
        if p > tolerances::DENSE_COARSE_LIMIT {
            return Err(ReductionError::TooLarge(format!("kernel dimension {p}")));
        }
        let cols: Vec<Vec<f64>> = (0..p).map(|j| sigma_factor.solve(&g.column(j))).collect();
        let sigma_inv_g = DenseMatrix::from_columns(n, &cols);
        let coarse = if p > 0 {
            let rank = numerical_rank(&g);
            if rank < p {
                return Err(ReductionError::CoarseSingular(format!(
                    "G has rank {rank} for {p} kernel modes"
                )));
            }
            let c = g.transpose().matmul(&sigma_inv_g);
            Some(Cholesky::factor(&c).map_err(|e| ReductionError::CoarseSingular(e.to_string()))?)
        } else {
            None
        };
        Ok(Self { sigma, sigma_factor, g, sigma_inv_g, coarse })
    }

    pub fn dim(&self) -> usize {
        self.sigma.rows()
    }

    pub fn kernel_dim(&self) -> usize {
        self.g.cols()
    }

    pub fn sigma(&self) -> &SparseMatrix {
        &self.sigma
    }

    pub fn g(&self) -> &DenseMatrix {
        &self.g
    }

    pub fn sigma_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(&self.sigma.matvec(a), b)
    }

    pub fn apply_sigma_inverse(&self, v: &[f64]) -> Vec<f64> {
        self.sigma_factor.solve(v)
    }

    fn coarse_solve(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.coarse {
            Some(c) => c.solve(rhs),
            None => Vec::new(),
        }
    }

    /// `Π_σ·λ`.
    pub fn project_sigma(&self, lambda: &[f64]) -> Vec<f64> {
        let mut out = lambda.to_vec();
        if self.coarse.is_some() {
            let c = self.coarse_solve(&self.g.transpose_matvec(lambda));
            for (o, v) in out.iter_mut().zip(self.sigma_inv_g.matvec(&c)) {
                *o -= v;
            }
        }
        out
    }

    /// `Π_σᵀ·φ`, the representative of `φ` restricted to `ker Gᵀ` with
    /// minimal dual `σ`-norm.
    pub fn lift_representative(&self, phi: &[f64]) -> Vec<f64> {
        let mut out = phi.to_vec();
        if self.coarse.is_some() {
            let c = self.coarse_solve(&self.sigma_inv_g.transpose_matvec(phi));
            for (o, v) in out.iter_mut().zip(self.g.matvec(&c)) {
                *o -= v;
            }
        }
        out
    }

    /// The `σ`-minimal multiplier with `Gᵀλ⁰ = −f_Z`.
    pub fn compute_lambda0(&self, f_z: &[f64]) -> Result<Vec<f64>> {
        if f_z.len() != self.kernel_dim() {
            return Err(NumericsError::DimensionMismatch(format!(
                "{} kernel loads for {} kernel modes",
                f_z.len(),
                self.kernel_dim()
            ))
            .into());
        }
        if self.coarse.is_none() {
            return Ok(vec![0.0; self.dim()]);
        }
        let c = self.coarse_solve(f_z);
        Ok(self.sigma_inv_g.matvec(&c).into_iter().map(|v| -v).collect())
    }

    /// Coefficients `z` of the `Σ⁻¹`-weighted least-squares fit `G·z ≈ r`.
    pub fn kernel_fit(&self, r: &[f64]) -> Vec<f64> {
        self.coarse_solve(&self.sigma_inv_g.transpose_matvec(r))
    }

    /// Orthonormal basis of `ker Gᵀ` (desk scale).
    pub fn constrained_basis(&self) -> DenseMatrix {
        if self.kernel_dim() == 0 {
            return DenseMatrix::identity(self.dim());
        }
        null_space(&self.g.transpose())
    }
}

/// Data of the multiplier preconditioner `M = (B⁺)ᵀ·A·B⁺`.
pub struct PreconditionerData<'a> {
    problem: &'a CoupledProblem,
    d_inv: BlockVector,
    bdb: Cholesky,
}

impl<'a> PreconditionerData<'a> {
    pub fn new(problem: &'a CoupledProblem, choice: DChoice) -> Result<Self> {
        let d: BlockVector = match choice {
            DChoice::LumpedMass => problem.subproblems.iter().map(|s| s.dof_weights.clone()).collect(),
            DChoice::Identity => problem.subproblems.iter().map(|s| vec![1.0; s.dof_count()]).collect(),
        };
        Self::with_weights(problem, d)
    }

    pub fn with_weights(problem: &'a CoupledProblem, d: BlockVector) -> Result<Self> {
        let n = problem.multiplier_dim();
        if n > tolerances::DENSE_COARSE_LIMIT {
            return Err(ReductionError::TooLarge(format!("multiplier dimension {n}")));
        }
        if d.len() != problem.subproblems.len()
            || d.iter().zip(&problem.subproblems).any(|(dk, s)| dk.len() != s.dof_count())
        {
            return Err(NumericsError::DimensionMismatch("preconditioner weights".into()).into());
        }
        if d.iter().flatten().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(NumericsError::NonFinite("preconditioner weights").into());
        }
        let d_inv: BlockVector = d.iter().map(|dk| dk.iter().map(|w| 1.0 / w).collect()).collect();
        let mut bdb = DenseMatrix::zeros(n, n);
        for (b, dk) in problem.coupling.blocks().iter().zip(&d_inv) {
            let bt = b.transpose();
            for j in 0..bt.rows() {
                let entries: Vec<(usize, f64)> = bt.row(j).collect();
                for &(r, vr) in &entries {
                    for &(c, vc) in &entries {
                        bdb[(r, c)] += vr * dk[j] * vc;
                    }
                }
            }
        }
        let bdb = Cholesky::factor(&bdb).map_err(|e| {
            ReductionError::NotSurjective(format!("B·D⁻¹·Bᵀ is not positive definite ({e})"))
        })?;
        Ok(Self { problem, d_inv, bdb })
    }

    /// `B⁺·φ = D⁻¹Bᵀ(BD⁻¹Bᵀ)⁻¹φ`.
    pub fn apply_bdelta_plus(&self, phi: &[f64]) -> Result<BlockVector> {
        let y = self.bdb.solve(phi);
        let mut v = self.problem.apply_b_transpose(&y)?;
        for (vk, dk) in v.iter_mut().zip(&self.d_inv) {
            for (x, w) in vk.iter_mut().zip(dk) {
                *x *= w;
            }
        }
        Ok(v)
    }

    /// `(B⁺)ᵀ·w = (BD⁻¹Bᵀ)⁻¹·B·D⁻¹·w`.
    pub fn apply_bdelta_plus_transpose(&self, w: &[Vec<f64>]) -> Result<Vec<f64>> {
        let scaled: BlockVector = w
            .iter()
            .zip(&self.d_inv)
            .map(|(wk, dk)| wk.iter().zip(dk).map(|(a, b)| a * b).collect())
            .collect();
        Ok(self.bdb.solve(&self.problem.apply_b(&scaled)?))
    }

    /// `M·φ = (B⁺)ᵀ·A·B⁺·φ`.
    pub fn apply_m(&self, phi: &[f64]) -> Result<Vec<f64>> {
        let v = self.apply_bdelta_plus(phi)?;
        let av: BlockVector =
            self.problem.subproblems.iter().zip(&v).map(|(s, vk)| s.stiffness.matvec(vk)).collect();
        self.apply_bdelta_plus_transpose(&av)
    }

    /// `M̂·φ = Π_σ·M·Π_σᵀ·φ`.
    pub fn apply_preconditioner(&self, space: &MultiplierSpace, phi: &[f64]) -> Result<Vec<f64>> {
        let lifted = space.lift_representative(phi);
        Ok(space.project_sigma(&self.apply_m(&lifted)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub tol: f64,
    /// Defaults to `10·dim Λ̂`.
    pub max_iter: Option<usize>,
    pub record_iterates: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { tol: tolerances::KRYLOV, max_iter: None, record_iterates: false }
    }
}

#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub lambda: Vec<f64>,
    pub lambda0: Vec<f64>,
    pub z_star: Vec<f64>,
    pub u_blocks: BlockVector,
    pub iterations: usize,
    pub condition_estimate: Option<ConditionEstimate>,
    pub residual_history: Vec<f64>,
    pub history: CgHistory,
    /// Iterates of the constrained component `λ̂`, when requested.
    pub iterates: Vec<Vec<f64>>,
    /// `‖Gᵀλ + f_Z‖∞`, relative.
    pub constraint_residual: f64,
    /// `‖B·u‖∞`.
    pub continuity_residual: f64,
    /// `‖g‖∞`, the scale for the continuity residual.
    pub rhs_scale: f64,
}

impl ReducedSolution {
    /// Continuity residual relative to `‖g‖∞` (absolute when `g = 0`).
    pub fn relative_continuity(&self) -> f64 {
        if self.rhs_scale > 0.0 {
            self.continuity_residual / self.rhs_scale
        } else {
            self.continuity_residual
        }
    }
}

fn cg_error(e: CgError<ReductionError>) -> ReductionError {
    match e {
        CgError::IndefiniteOperator { iteration, curvature } => {
            ReductionError::IndefiniteOperator { iteration, curvature }
        }
        CgError::IndefinitePreconditioner { iteration, value } => ReductionError::NotSurjective(
            format!("preconditioner indefinite at iteration {iteration} (rᵀMr = {value:e})"),
        ),
        CgError::MaxIterations { iterations, residual, .. } => {
            ReductionError::MaxIterations { iterations, residual }
        }
        CgError::Operator(e) => e,
    }
}

/// Solves the reduced system by deflated PCG and reconstructs the primal
/// solution. `precond = None` runs plain projected CG.
pub fn solve_reduced(
    problem: &CoupledProblem,
    space: &MultiplierSpace,
    precond: Option<&PreconditionerData<'_>>,
    cfg: &SolveConfig,
) -> Result<ReducedSolution> {
    let n = problem.multiplier_dim();
    let g = problem.assemble_g()?;
    let f_z = problem.kernel_load();
    let lambda0 = space.compute_lambda0(&f_z)?;

    let s_lambda0 = problem.apply_schur(&lambda0)?;
    let residual0: Vec<f64> = g.iter().zip(&s_lambda0).map(|(a, b)| a - b).collect();
    let mut rhs = space.lift_representative(&residual0);
    let scale = norm_inf(&g).max(norm_inf(&s_lambda0));
    if norm_inf(&rhs) <= tolerances::NOISE_RHS * scale {
        rhs.iter_mut().for_each(|v| *v = 0.0);
    }

    let op = |x: &[f64]| -> Result<Vec<f64>> { Ok(space.lift_representative(&problem.apply_schur(x)?)) };
    let pc_full = |r: &[f64]| -> Result<Vec<f64>> {
        precond.expect("checked by caller").apply_preconditioner(space, r)
    };
    let pc_plain = |r: &[f64]| -> Result<Vec<f64>> { Ok(space.project_sigma(r)) };
    let pc: &dyn Fn(&[f64]) -> Result<Vec<f64>> =
        if precond.is_some() { &pc_full } else { &pc_plain };

    let constrained_dim = n - space.kernel_dim();
    let options = CgOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter.unwrap_or(tolerances::KRYLOV_MAX_ITER_FACTOR * constrained_dim.max(1)),
        record_iterates: cfg.record_iterates,
    };
    let outcome = cg_solve(&op, Some(pc), &rhs, &options).map_err(cg_error)?;

    let lambda: Vec<f64> = lambda0.iter().zip(&outcome.x).map(|(a, b)| a + b).collect();
    let s_lambda = problem.apply_schur(&lambda)?;
    let r: Vec<f64> = g.iter().zip(&s_lambda).map(|(a, b)| a - b).collect();
    let z_star = space.kernel_fit(&r);
    let u_blocks = reconstruct(problem, &lambda, &z_star)?;

    let gt_lambda = space.g().transpose_matvec(&lambda);
    let constraint_scale =
        (space.g().max_abs() * norm_inf(&lambda)).max(norm_inf(&f_z)).max(f64::MIN_POSITIVE);
    let constraint_residual = gt_lambda.iter().zip(&f_z).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max)
        / constraint_scale;
    let continuity_residual = norm_inf(&problem.apply_b(&u_blocks)?);

    let condition_estimate =
        if outcome.iterations > 0 { lanczos_condition_estimate(&outcome.history).ok() } else { None };

    Ok(ReducedSolution {
        lambda,
        lambda0,
        z_star,
        u_blocks,
        iterations: outcome.iterations,
        condition_estimate,
        residual_history: outcome.residuals,
        history: outcome.history,
        iterates: outcome.iterates,
        constraint_residual,
        continuity_residual,
        rhs_scale: norm_inf(&g),
    })
}

/// `u = A⁺(f + Bᵀλ) + Z·z`.
pub fn reconstruct(problem: &CoupledProblem, lambda: &[f64], z: &[f64]) -> Result<BlockVector> {
    let bt = problem.apply_b_transpose(lambda)?;
    let rhs: BlockVector = problem
        .subproblems
        .iter()
        .zip(bt)
        .map(|(s, b)| s.load.iter().zip(b).map(|(f, v)| f + v).collect())
        .collect();
    let mut u = problem.local_solve(&rhs)?;
    for (uk, zk) in u.iter_mut().zip(problem.expand_kernel(z)?) {
        for (a, b) in uk.iter_mut().zip(zk) {
            *a += b;
        }
    }
    Ok(u)
}

/// Lanczos estimate of `κ(M̂·Ŝ)` from the recorded PCG coefficients.
pub fn estimate_condition(solution: &ReducedSolution) -> Result<ConditionEstimate> {
    if solution.history.iterations() == 0 {
        return Err(ReductionError::InsufficientHistory);
    }
    Ok(lanczos_condition_estimate(&solution.history)?)
}

/// Generalized eigenvalues of `op` restricted to `ker Gᵀ`, relative to the
/// diagonal weight `w` (ascending).
pub fn restricted_spectrum(space: &MultiplierSpace, op: &DenseMatrix, w: &[f64]) -> Result<Vec<f64>> {
    let q = space.constrained_basis();
    let oq = op.matmul(&q);
    let restricted = q.transpose().matmul(&oq);
    let mut wq = q.clone();
    for i in 0..wq.rows() {
        for j in 0..wq.cols() {
            wq[(i, j)] *= w[i];
        }
    }
    let weight = q.transpose().matmul(&wq);
    Ok(generalized_eigenvalues(&restricted, &weight)?)
}
