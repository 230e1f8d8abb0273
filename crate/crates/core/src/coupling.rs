//! Subproblems coupled through Lagrange multipliers, and the matrix-free
//! multiplier-space operators built on black-box local solvers.
//!
//! The coupled system is `A·u − Bᵀ·λ = f`, `B·u = 0` with `A` block diagonal.
//! Eliminating `u = A⁺(f + Bᵀλ) + Z·z` gives the reduced system
//! `S·λ + G·z = g`, `Gᵀ·λ = −⟨f, Z⟩` with `S = B·A⁺·Bᵀ` and `g = −B·A⁺·f`.

use std::fmt;
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use thiserror::Error;

use crate::numerics::{symmetric_eigenvalues, DenseMatrix, NumericsError, SparseMatrix};
use crate::tolerances;

/// One vector per subdomain.
pub type BlockVector = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CouplingError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("local solver on subdomain {subdomain} failed: {message} (residual {residual:e})")]
    Solver { subdomain: usize, message: String, residual: f64 },
    #[error("invalid subproblem {index}: {reason}")]
    InvalidSubproblem { index: usize, reason: String },
    #[error("invalid coupling: {0}")]
    InvalidCoupling(String),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T> = std::result::Result<T, CouplingError>;

#[derive(Debug, Clone, PartialEq)]
pub struct SolverFailure {
    pub message: String,
    pub residual: f64,
}

impl SolverFailure {
    pub fn new(message: impl Into<String>, residual: f64) -> Self {
        Self { message: message.into(), residual }
    }
}

/// A local pseudo-inverse given only by its action.
///
/// `apply(g)` must be linear in `g` and orthogonal to the subproblem's kernel
/// basis. Implementations may be called concurrently for different
/// subdomains; calls for the same subdomain are serialized by
/// [`LocalSubproblem`].
pub trait BlackBoxSolver: Send + Sync {
    fn apply(&self, g: &[f64]) -> std::result::Result<Vec<f64>, SolverFailure>;
}

impl<F> BlackBoxSolver for F
where
    F: Fn(&[f64]) -> std::result::Result<Vec<f64>, SolverFailure> + Send + Sync,
{
    fn apply(&self, g: &[f64]) -> std::result::Result<Vec<f64>, SolverFailure> {
        self(g)
    }
}

pub struct LocalSubproblem {
    pub index: usize,
    pub stiffness: SparseMatrix,
    pub load: Vec<f64>,
    /// Columns span the kernel of `stiffness`; zero columns if nonsingular.
    pub kernel_basis: DenseMatrix,
    /// Positive dof weights used by the default preconditioner scaling.
    pub dof_weights: Vec<f64>,
    solver: Arc<dyn BlackBoxSolver>,
    lock: Mutex<()>,
}

impl fmt::Debug for LocalSubproblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalSubproblem")
            .field("index", &self.index)
            .field("dofs", &self.dof_count())
            .field("kernel_dim", &self.kernel_dim())
            .finish()
    }
}

impl LocalSubproblem {
    /// Validates symmetry, kernel consistency and dimensions. Small problems
    /// additionally get a numerical rank check of the supplied kernel.
    pub fn new(
        index: usize,
        stiffness: SparseMatrix,
        load: Vec<f64>,
        kernel_basis: DenseMatrix,
        solver: Arc<dyn BlackBoxSolver>,
    ) -> Result<Self> {
        let invalid = |reason: String| CouplingError::InvalidSubproblem { index, reason };
        let n = stiffness.rows();
        if stiffness.cols() != n || load.len() != n || kernel_basis.rows() != n {
            return Err(invalid(format!(
                "stiffness {}x{}, load {}, kernel basis {} rows",
                n,
                stiffness.cols(),
                load.len(),
                kernel_basis.rows()
            )));
        }
        if load.iter().any(|x| !x.is_finite()) {
            return Err(invalid("non-finite load".into()));
        }
        if stiffness.asymmetry() > tolerances::SYMMETRY {
            return Err(invalid(format!("stiffness asymmetry {:e}", stiffness.asymmetry())));
        }
        if kernel_basis.cols() > 0 {
            let ak = stiffness.mul_dense(&kernel_basis)?;
            let scale = stiffness.max_abs() * kernel_basis.max_abs();
            if ak.max_abs() > tolerances::KERNEL_VERIFY * scale {
                return Err(invalid(format!(
                    "kernel basis is not annihilated by the stiffness (‖A·N‖ = {:e})",
                    ak.max_abs()
                )));
            }
        }
        if cfg!(debug_assertions) && n > 0 && n <= 300 {
            let ev = symmetric_eigenvalues(&stiffness.to_dense());
            let top = ev.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            let small = ev.iter().filter(|v| v.abs() <= tolerances::RANK * top).count();
            if small != kernel_basis.cols() {
                return Err(invalid(format!(
                    "stiffness has {small} near-zero eigenvalues but the kernel basis has {} columns",
                    kernel_basis.cols()
                )));
            }
        }
        Ok(Self {
            index,
            stiffness,
            load,
            kernel_basis,
            dof_weights: vec![1.0; n],
            solver,
            lock: Mutex::new(()),
        })
    }

    pub fn with_dof_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.dof_count() || weights.iter().any(|w| !(w.is_finite() && *w > 0.0))
        {
            return Err(CouplingError::InvalidSubproblem {
                index: self.index,
                reason: "dof weights must be positive, one per dof".into(),
            });
        }
        self.dof_weights = weights;
        Ok(self)
    }

    pub fn dof_count(&self) -> usize {
        self.stiffness.rows()
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel_basis.cols()
    }

    pub fn is_floating(&self) -> bool {
        self.kernel_dim() > 0
    }

    /// Applies the black-box pseudo-inverse, annotating failures with the
    /// subdomain index.
    pub fn solve(&self, g: &[f64]) -> Result<Vec<f64>> {
        if g.len() != self.dof_count() {
            return Err(CouplingError::DimensionMismatch(format!(
                "subdomain {}: right-hand side of length {} for {} dofs",
                self.index,
                g.len(),
                self.dof_count()
            )));
        }
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let x = self.solver.apply(g).map_err(|e| CouplingError::Solver {
            subdomain: self.index,
            message: e.message,
            residual: e.residual,
        })?;
        if x.len() != self.dof_count() || x.iter().any(|v| !v.is_finite()) {
            return Err(CouplingError::Solver {
                subdomain: self.index,
                message: "solver returned a malformed vector".into(),
                residual: f64::NAN,
            });
        }
        Ok(x)
    }
}

/// Signed trace pairings `B_k`, one `dim Λ × n_k` block per subdomain.
#[derive(Debug, Clone)]
pub struct CouplingMap {
    multiplier_dim: usize,
    blocks: Vec<SparseMatrix>,
}

impl CouplingMap {
    /// Every multiplier row must be reached, with at least one subdomain on
    /// each side of the orientation.
    pub fn new(multiplier_dim: usize, blocks: Vec<SparseMatrix>) -> Result<Self> {
        for (k, b) in blocks.iter().enumerate() {
            if b.rows() != multiplier_dim {
                return Err(CouplingError::InvalidCoupling(format!(
                    "block {k} has {} rows, expected {multiplier_dim}",
                    b.rows()
                )));
            }
        }
        let mut positive = vec![false; multiplier_dim];
        let mut negative = vec![false; multiplier_dim];
        for b in &blocks {
            for (i, (pos, neg)) in positive.iter_mut().zip(negative.iter_mut()).enumerate() {
                let s: f64 = b.row(i).map(|(_, v)| v).sum();
                *pos |= s > 0.0;
                *neg |= s < 0.0;
            }
        }
        if let Some(i) = (0..multiplier_dim).find(|&i| !(positive[i] && negative[i])) {
            return Err(CouplingError::InvalidCoupling(format!(
                "multiplier {i} is not paired with opposite orientations"
            )));
        }
        Ok(Self { multiplier_dim, blocks })
    }

    pub fn multiplier_dim(&self) -> usize {
        self.multiplier_dim
    }

    pub fn block(&self, k: usize) -> &SparseMatrix {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[SparseMatrix] {
        &self.blocks
    }
}

/// A column of the global kernel basis: column `column` of subdomain
/// `subdomain`'s local kernel basis, zero elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelMode {
    pub subdomain: usize,
    pub column: usize,
}

#[derive(Debug, Clone, Default)]
pub struct KernelSpace {
    pub modes: Vec<KernelMode>,
}

impl KernelSpace {
    pub fn from_subproblems(subproblems: &[LocalSubproblem]) -> Self {
        let modes = subproblems
            .iter()
            .flat_map(|s| (0..s.kernel_dim()).map(move |c| KernelMode { subdomain: s.index, column: c }))
            .collect();
        Self { modes }
    }

    pub fn dim(&self) -> usize {
        self.modes.len()
    }
}

/// Geometry attached to each multiplier coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultiplierDof {
    pub interface: usize,
    /// Position of the cell within its interface.
    pub cell: usize,
    /// Skeleton measure of the support (1 for point multipliers).
    pub measure: f64,
    /// Local multiplier mesh size used as the stabilization weight.
    pub delta: f64,
}

pub struct CoupledProblem {
    pub subproblems: Vec<LocalSubproblem>,
    pub coupling: CouplingMap,
    pub kernel: KernelSpace,
    pub multipliers: Vec<MultiplierDof>,
}

impl fmt::Debug for CoupledProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoupledProblem")
            .field("subdomains", &self.subproblems.len())
            .field("multiplier_dim", &self.multiplier_dim())
            .field("kernel_dim", &self.kernel_dim())
            .finish()
    }
}

impl CoupledProblem {
    pub fn new(
        subproblems: Vec<LocalSubproblem>,
        coupling: CouplingMap,
        multipliers: Vec<MultiplierDof>,
    ) -> Result<Self> {
        if subproblems.len() != coupling.blocks.len() {
            return Err(CouplingError::DimensionMismatch(format!(
                "{} subproblems but {} coupling blocks",
                subproblems.len(),
                coupling.blocks.len()
            )));
        }
        for (k, s) in subproblems.iter().enumerate() {
            if s.index != k {
                return Err(CouplingError::InvalidSubproblem {
                    index: s.index,
                    reason: format!("stored at position {k}"),
                });
            }
            if coupling.blocks[k].cols() != s.dof_count() {
                return Err(CouplingError::DimensionMismatch(format!(
                    "coupling block {k} has {} columns for {} dofs",
                    coupling.blocks[k].cols(),
                    s.dof_count()
                )));
            }
        }
        if multipliers.len() != coupling.multiplier_dim {
            return Err(CouplingError::DimensionMismatch(format!(
                "{} multiplier descriptors for dimension {}",
                multipliers.len(),
                coupling.multiplier_dim
            )));
        }
        if multipliers.iter().any(|m| !(m.measure > 0.0 && m.delta > 0.0)) {
            return Err(CouplingError::InvalidCoupling("non-positive multiplier measure".into()));
        }
        let kernel = KernelSpace::from_subproblems(&subproblems);
        if kernel.dim() >= coupling.multiplier_dim {
            return Err(CouplingError::InvalidCoupling(format!(
                "kernel dimension {} is not below the multiplier dimension {}",
                kernel.dim(),
                coupling.multiplier_dim
            )));
        }
        Ok(Self { subproblems, coupling, kernel, multipliers })
    }

    pub fn multiplier_dim(&self) -> usize {
        self.coupling.multiplier_dim
    }

    pub fn kernel_dim(&self) -> usize {
        self.kernel.dim()
    }

    pub fn dof_counts(&self) -> Vec<usize> {
        self.subproblems.iter().map(|s| s.dof_count()).collect()
    }

    pub fn zero_blocks(&self) -> BlockVector {
        self.subproblems.iter().map(|s| vec![0.0; s.dof_count()]).collect()
    }

    pub fn loads(&self) -> BlockVector {
        self.subproblems.iter().map(|s| s.load.clone()).collect()
    }

    fn check_blocks(&self, v: &[Vec<f64>]) -> Result<()> {
        if v.len() != self.subproblems.len() {
            return Err(CouplingError::DimensionMismatch(format!(
                "{} blocks for {} subdomains",
                v.len(),
                self.subproblems.len()
            )));
        }
        for (k, (b, s)) in v.iter().zip(&self.subproblems).enumerate() {
            if b.len() != s.dof_count() {
                return Err(CouplingError::DimensionMismatch(format!(
                    "block {k} has length {} for {} dofs",
                    b.len(),
                    s.dof_count()
                )));
            }
        }
        Ok(())
    }

    fn check_multiplier(&self, mu: &[f64]) -> Result<()> {
        if mu.len() != self.multiplier_dim() {
            return Err(CouplingError::DimensionMismatch(format!(
                "multiplier vector of length {} for dimension {}",
                mu.len(),
                self.multiplier_dim()
            )));
        }
        Ok(())
    }

    /// `Σ_k B_k·v_k`.
    pub fn apply_b(&self, v: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_blocks(v)?;
        let mut out = vec![0.0; self.multiplier_dim()];
        for (b, vk) in self.coupling.blocks.iter().zip(v) {
            for (o, x) in out.iter_mut().zip(b.matvec(vk)) {
                *o += x;
            }
        }
        Ok(out)
    }

    /// Block `k` is `B_kᵀ·μ`.
    pub fn apply_b_transpose(&self, mu: &[f64]) -> Result<BlockVector> {
        self.check_multiplier(mu)?;
        Ok(self.coupling.blocks.iter().map(|b| b.transpose_matvec(mu)).collect())
    }

    /// Applies every local solver to its block, concurrently across
    /// subdomains.
    pub fn local_solve(&self, g: &[Vec<f64>]) -> Result<BlockVector> {
        self.check_blocks(g)?;
        self.subproblems.par_iter().zip(g.par_iter()).map(|(s, gk)| s.solve(gk)).collect()
    }

    /// Sums per-subdomain multiplier contributions in subdomain order so the
    /// result does not depend on thread scheduling.
    fn reduce_in_order(&self, parts: Vec<Vec<f64>>) -> Vec<f64> {
        let mut out = vec![0.0; self.multiplier_dim()];
        for p in parts {
            for (o, x) in out.iter_mut().zip(p) {
                *o += x;
            }
        }
        out
    }

    /// `S·λ = Σ_k B_k·A_k⁺·B_kᵀ·λ`, without forming `S`.
    pub fn apply_schur(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_multiplier(lambda)?;
        if lambda.iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite("multiplier").into());
        }
        let parts: Vec<Vec<f64>> = self
            .subproblems
            .par_iter()
            .zip(self.coupling.blocks.par_iter())
            .map(|(s, b)| {
                let x = s.solve(&b.transpose_matvec(lambda))?;
                Ok(b.matvec(&x))
            })
            .collect::<Result<_>>()?;
        Ok(self.reduce_in_order(parts))
    }

    /// `g = −Σ_k B_k·A_k⁺·f_k`.
    pub fn assemble_g(&self) -> Result<Vec<f64>> {
        let parts: Vec<Vec<f64>> = self
            .subproblems
            .par_iter()
            .zip(self.coupling.blocks.par_iter())
            .map(|(s, b)| {
                let x = s.solve(&s.load)?;
                Ok(b.matvec(&x).into_iter().map(|v| -v).collect())
            })
            .collect::<Result<_>>()?;
        Ok(self.reduce_in_order(parts))
    }

    /// The global kernel mode `j` as a block vector.
    pub fn kernel_mode(&self, j: usize) -> BlockVector {
        let m = self.kernel.modes[j];
        let mut v = self.zero_blocks();
        v[m.subdomain] = self.subproblems[m.subdomain].kernel_basis.column(m.column);
        v
    }

    /// `Z·c`.
    pub fn expand_kernel(&self, coeffs: &[f64]) -> Result<BlockVector> {
        if coeffs.len() != self.kernel_dim() {
            return Err(CouplingError::DimensionMismatch(format!(
                "{} kernel coefficients for dimension {}",
                coeffs.len(),
                self.kernel_dim()
            )));
        }
        let mut v = self.zero_blocks();
        for (m, c) in self.kernel.modes.iter().zip(coeffs) {
            let col = self.subproblems[m.subdomain].kernel_basis.column(m.column);
            for (x, z) in v[m.subdomain].iter_mut().zip(col) {
                *x += c * z;
            }
        }
        Ok(v)
    }

    /// Euclidean kernel coordinates `Zᵀ·v`.
    pub fn kernel_coordinates(&self, v: &[Vec<f64>]) -> Result<Vec<f64>> {
        self.check_blocks(v)?;
        Ok(self
            .kernel
            .modes
            .iter()
            .map(|m| {
                let col = self.subproblems[m.subdomain].kernel_basis.column(m.column);
                col.iter().zip(&v[m.subdomain]).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    /// `G`, with column `j` equal to `B·z_j`.
    pub fn kernel_trace_matrix(&self) -> DenseMatrix {
        let cols: Vec<Vec<f64>> = self
            .kernel
            .modes
            .iter()
            .map(|m| {
                let z = self.subproblems[m.subdomain].kernel_basis.column(m.column);
                self.coupling.blocks[m.subdomain].matvec(&z)
            })
            .collect();
        DenseMatrix::from_columns(self.multiplier_dim(), &cols)
    }

    /// `⟨f, z_j⟩` for each kernel mode.
    pub fn kernel_load(&self) -> Vec<f64> {
        self.kernel_coordinates(&self.loads()).expect("loads match the dof layout")
    }

    /// Right-hand side of the kernel constraint `Gᵀλ = −⟨f, z_j⟩`.
    pub fn kernel_compatibility_rhs(&self) -> Vec<f64> {
        self.kernel_load().into_iter().map(|v| -v).collect()
    }

    /// Dense `S`, assembled column by column. Intended for oracles and small
    /// desk-scale problems only.
    pub fn dense_schur(&self) -> Result<DenseMatrix> {
        let n = self.multiplier_dim();
        if n > tolerances::DENSE_SCHUR_LIMIT {
            return Err(CouplingError::DimensionMismatch(format!(
                "dense Schur assembly requested for dimension {n}"
            )));
        }
        let mut s = DenseMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            s.set_column(j, &self.apply_schur(&e)?);
            e[j] = 0.0;
        }
        Ok(s)
    }
}
