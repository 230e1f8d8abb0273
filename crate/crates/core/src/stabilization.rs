//! Coarse-projection stabilization for multiplier spaces that are too rich
//! for the primal traces.
//!
//! The penalty `j(λ, μ) = ⟨W(I − π̃)λ, (I − π̃)μ⟩` acts on the part of the
//! multiplier outside a coarse space `Range(P)`, with `π̃` the mass-orthogonal
//! projection onto it and `W` the skeleton mass scaled by the local multiplier
//! mesh size.

use thiserror::Error;

use crate::coupling::{CoupledProblem, CouplingError};
use crate::numerics::vector::norm_inf;
use crate::numerics::{solve_dense, Cholesky, DenseMatrix, NumericsError, SparseMatrix, TripletBuilder};
use crate::reduction::{reconstruct, MultiplierSpace, ReducedSolution, ReductionError};
use crate::tolerances;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilizationError {
    #[error("stabilization weight must be positive and finite, got {0}")]
    InvalidGamma(f64),
    #[error("coarse multiplier space is invalid: {0}")]
    InvalidCoarseSpace(String),
    #[error("stabilized system is singular: {0}")]
    SingularStabilizedSystem(String),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error(transparent)]
    Coupling(#[from] CouplingError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, StabilizationError>;

/// Coarse multipliers embedded in the fine multiplier space by `P`.
#[derive(Debug, Clone)]
pub struct CoarseMultiplierSpace {
    pub prolongation: SparseMatrix,
    /// Largest coarse cell size.
    pub delta_tilde: f64,
}

impl CoarseMultiplierSpace {
    /// Groups `factor` consecutive cells of each interface into one coarse
    /// cell; a short remainder is merged into the last group.
    pub fn by_grouping(problem: &CoupledProblem, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(StabilizationError::InvalidCoarseSpace("coarsening factor 0".into()));
        }
        let dofs = &problem.multipliers;
        let mut interfaces: Vec<usize> = dofs.iter().map(|d| d.interface).collect();
        interfaces.sort_unstable();
        interfaces.dedup();

        let mut group_of = vec![0usize; dofs.len()];
        let mut sizes: Vec<f64> = Vec::new();
        for iface in interfaces {
            let mut members: Vec<usize> = (0..dofs.len()).filter(|&i| dofs[i].interface == iface).collect();
            members.sort_by_key(|&i| dofs[i].cell);
            let groups = (members.len() / factor).max(1);
            let first = sizes.len();
            sizes.extend(std::iter::repeat_n(0.0, groups));
            for (pos, &i) in members.iter().enumerate() {
                let gi = first + (pos / factor).min(groups - 1);
                group_of[i] = gi;
                sizes[gi] += dofs[i].measure;
            }
        }
        let mut b = TripletBuilder::new(dofs.len(), sizes.len());
        for (i, &gi) in group_of.iter().enumerate() {
            b.push(i, gi, 1.0);
        }
        let delta_tilde = sizes.iter().copied().fold(0.0, f64::max);
        Ok(Self { prolongation: b.build(), delta_tilde })
    }

    pub fn dim(&self) -> usize {
        self.prolongation.cols()
    }
}

#[derive(Debug, Clone)]
pub struct StabilizationForm {
    mass: Vec<f64>,
    weight: Vec<f64>,
    prolongation: DenseMatrix,
    coarse_mass: Cholesky,
    pub gamma: f64,
}

impl StabilizationForm {
    pub fn new(problem: &CoupledProblem, coarse: &CoarseMultiplierSpace, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(StabilizationError::InvalidGamma(gamma));
        }
        let p = coarse.prolongation.to_dense();
        if p.rows() != problem.multiplier_dim() {
            return Err(StabilizationError::InvalidCoarseSpace(format!(
                "prolongation has {} rows for {} multipliers",
                p.rows(),
                problem.multiplier_dim()
            )));
        }
        let mass: Vec<f64> = problem.multipliers.iter().map(|m| m.measure).collect();
        let weight: Vec<f64> = problem.multipliers.iter().map(|m| m.delta * m.measure).collect();
        let mut mp = p.clone();
        for i in 0..mp.rows() {
            for j in 0..mp.cols() {
                mp[(i, j)] *= mass[i];
            }
        }
        let coarse_mass = Cholesky::factor(&p.transpose().matmul(&mp)).map_err(|_| {
            StabilizationError::InvalidCoarseSpace("prolongation is not of full column rank".into())
        })?;
        Ok(Self { mass, weight, prolongation: p, coarse_mass, gamma })
    }

    /// `π̃·λ = P(PᵀMP)⁻¹PᵀM·λ`.
    pub fn project_coarse(&self, lambda: &[f64]) -> Vec<f64> {
        let ml: Vec<f64> = lambda.iter().zip(&self.mass).map(|(a, m)| a * m).collect();
        let c = self.coarse_mass.solve(&self.prolongation.transpose_matvec(&ml));
        self.prolongation.matvec(&c)
    }

    fn fine_part(&self, lambda: &[f64]) -> Vec<f64> {
        let c = self.project_coarse(lambda);
        lambda.iter().zip(c).map(|(a, b)| a - b).collect()
    }

    /// `j(λ, μ)` (without the factor `γ`).
    pub fn apply_j(&self, lambda: &[f64], mu: &[f64]) -> f64 {
        let a = self.fine_part(lambda);
        let b = self.fine_part(mu);
        a.iter().zip(&b).zip(&self.weight).map(|((x, y), w)| w * x * y).sum()
    }

    /// Matrix `J` of `j`.
    pub fn matrix(&self) -> DenseMatrix {
        let n = self.mass.len();
        // Columns of I − π̃.
        let mut q = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            q.set_column(j, &self.fine_part(&e));
            e[j] = 0.0;
        }
        let mut wq = q.clone();
        for i in 0..n {
            for j in 0..n {
                wq[(i, j)] *= self.weight[i];
            }
        }
        q.transpose().matmul(&wq)
    }
}

/// Solves `(S + γJ)λ + G·z = g`, `Gᵀλ = −f_Z` directly.
pub fn solve_stabilized(
    problem: &CoupledProblem,
    space: &MultiplierSpace,
    form: &StabilizationForm,
) -> Result<ReducedSolution> {
    let n = problem.multiplier_dim();
    let p = space.kernel_dim();
    if n + p > tolerances::DENSE_SCHUR_LIMIT {
        return Err(ReductionError::TooLarge(format!("stabilized system of size {}", n + p)).into());
    }
    let mut s = problem.dense_schur()?;
    s.add_scaled(form.gamma, &form.matrix());
    let g_mat = space.g();
    let mut k = DenseMatrix::zeros(n + p, n + p);
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] = s[(i, j)];
        }
        for j in 0..p {
            k[(i, n + j)] = g_mat[(i, j)];
            k[(n + j, i)] = g_mat[(i, j)];
        }
    }
    let g = problem.assemble_g()?;
    let f_z = problem.kernel_load();
    let mut rhs = g.clone();
    rhs.extend(f_z.iter().map(|v| -v));
    let x = solve_dense(&k, &rhs).map_err(|e| StabilizationError::SingularStabilizedSystem(e.to_string()))?;
    let lambda = x[..n].to_vec();
    let z_star = x[n..].to_vec();
    let u_blocks = reconstruct(problem, &lambda, &z_star)?;

    let gt_lambda = g_mat.transpose_matvec(&lambda);
    let scale = (g_mat.max_abs() * norm_inf(&lambda)).max(norm_inf(&f_z)).max(f64::MIN_POSITIVE);
    let constraint_residual =
        gt_lambda.iter().zip(&f_z).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max) / scale;
    let continuity_residual = norm_inf(&problem.apply_b(&u_blocks)?);
    Ok(ReducedSolution {
        lambda,
        lambda0: vec![0.0; n],
        z_star,
        u_blocks,
        iterations: 0,
        condition_estimate: None,
        residual_history: Vec::new(),
        history: Default::default(),
        iterates: Vec::new(),
        constraint_residual,
        continuity_residual,
        rhs_scale: norm_inf(&g),
    })
}
