//! Bordered solves `[[A, N], [Nᵀ, 0]]·(x, μ) = (b, 0)` for symmetric positive
//! semidefinite `A` whose kernel is spanned by the columns of `N`.
//!
//! The `x` component is the kernel-orthogonal solution: `A·x` is the
//! Euclidean projection of `b` onto `Range(A)` and `Nᵀx = 0`. The system is
//! eliminated blockwise. A set of `p` fixing rows `F` with nonsingular `N[F,:]`
//! is chosen by complete pivoting on `N`; `A` with those rows and columns
//! removed is then SPD and factorized by a skyline Cholesky. Nothing in this
//! module ever forms an explicit pseudo-inverse matrix.

use super::dense::{Cholesky, DenseMatrix};
use super::skyline::SkylineCholesky;
use super::sparse::{SparseMatrix, TripletBuilder};
use super::vector::norm_inf;
use super::{NumericsError, Result};
use crate::tolerances;

/// A possibly singular symmetric core bordered by a kernel basis.
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    pub core: SparseMatrix,
    pub border: DenseMatrix,
}

impl BorderedSystem {
    pub fn new(core: SparseMatrix, border: DenseMatrix) -> Result<Self> {
        if core.rows() != core.cols() {
            return Err(NumericsError::DimensionMismatch(format!(
                "bordered core is {}x{}",
                core.rows(),
                core.cols()
            )));
        }
        if border.rows() != core.rows() {
            return Err(NumericsError::DimensionMismatch(format!(
                "border has {} rows, core has {}",
                border.rows(),
                core.rows()
            )));
        }
        Ok(Self { core, border })
    }

    pub fn dim(&self) -> usize {
        self.core.rows()
    }

    pub fn kernel_dim(&self) -> usize {
        self.border.cols()
    }
}

/// Factorized bordered system, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct BorderedFactorization {
    n: usize,
    border: DenseMatrix,
    /// Cholesky of `NᵀN`; `None` when the border is empty.
    gram: Option<Cholesky>,
    /// Free (non-fixing) rows, in increasing order.
    interior: Vec<usize>,
    reduced: SkylineCholesky,
}

impl BorderedFactorization {
    pub fn new(sys: &BorderedSystem) -> Result<Self> {
        let n = sys.dim();
        let p = sys.kernel_dim();
        if p > n {
            return Err(NumericsError::SingularBorderedSystem(format!(
                "{p} border columns exceed dimension {n}"
            )));
        }
        if sys.border.as_slice().iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite("border"));
        }

        let fixing = if p > 0 { select_fixing_rows(&sys.border)? } else { Vec::new() };

        if p > 0 {
            let an = sys.core.mul_dense(&sys.border)?;
            let scale = sys.core.max_abs() * sys.border.max_abs();
            if an.max_abs() > tolerances::KERNEL_VERIFY * scale {
                return Err(NumericsError::SingularBorderedSystem(format!(
                    "border is not in the kernel of the core: ‖A·N‖ = {:e} vs scale {:e}",
                    an.max_abs(),
                    scale
                )));
            }
        }

        let mut is_fixed = vec![false; n];
        for &f in &fixing {
            is_fixed[f] = true;
        }
        let interior: Vec<usize> = (0..n).filter(|&i| !is_fixed[i]).collect();
        let mut position = vec![usize::MAX; n];
        for (k, &i) in interior.iter().enumerate() {
            position[i] = k;
        }
        let mut b = TripletBuilder::new(interior.len(), interior.len());
        for &i in &interior {
            for (j, v) in sys.core.row(i) {
                if !is_fixed[j] {
                    b.push(position[i], position[j], v);
                }
            }
        }
        let reduced = SkylineCholesky::factor(&b.build()).map_err(|e| {
            NumericsError::SingularBorderedSystem(format!(
                "core restricted to the complement of the fixing rows is singular ({e}); \
                 the kernel basis is likely incomplete"
            ))
        })?;

        let gram = if p > 0 {
            let g = sys.border.transpose().matmul(&sys.border);
            Some(Cholesky::factor(&g).map_err(|_| {
                NumericsError::SingularBorderedSystem("border columns are dependent".into())
            })?)
        } else {
            None
        };

        Ok(Self { n, border: sys.border.clone(), gram, interior, reduced })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kernel_dim(&self) -> usize {
        self.border.cols()
    }

    /// Coefficients `c` minimizing `‖v − N·c‖₂`.
    fn kernel_coefficients(&self, v: &[f64]) -> Vec<f64> {
        match &self.gram {
            Some(g) => g.solve(&self.border.transpose_matvec(v)),
            None => Vec::new(),
        }
    }

    /// Returns `(x, μ)`.
    pub fn solve(&self, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if rhs.len() != self.n {
            return Err(NumericsError::DimensionMismatch(format!(
                "rhs of length {} for a bordered system of dimension {}",
                rhs.len(),
                self.n
            )));
        }
        if rhs.iter().any(|x| !x.is_finite()) {
            return Err(NumericsError::NonFinite("bordered rhs"));
        }
        let mu = self.kernel_coefficients(rhs);
        let mut range_part = rhs.to_vec();
        if !mu.is_empty() {
            let nm = self.border.matvec(&mu);
            for (r, v) in range_part.iter_mut().zip(&nm) {
                *r -= v;
            }
        }
        let reduced_rhs: Vec<f64> = self.interior.iter().map(|&i| range_part[i]).collect();
        let yi = self.reduced.solve(&reduced_rhs);
        let mut x = vec![0.0; self.n];
        for (k, &i) in self.interior.iter().enumerate() {
            x[i] = yi[k];
        }
        let c = self.kernel_coefficients(&x);
        if !c.is_empty() {
            let nc = self.border.matvec(&c);
            for (xi, v) in x.iter_mut().zip(&nc) {
                *xi -= v;
            }
        }
        Ok((x, mu))
    }
}

/// Picks `p` rows of `n` (n×p) by Gaussian elimination with complete pivoting.
fn select_fixing_rows(n_mat: &DenseMatrix) -> Result<Vec<usize>> {
    let (rows, p) = (n_mat.rows(), n_mat.cols());
    let mut work = n_mat.clone();
    let scale = work.max_abs();
    if scale == 0.0 {
        return Err(NumericsError::SingularBorderedSystem("border is identically zero".into()));
    }
    let mut row_used = vec![false; rows];
    let mut col_used = vec![false; p];
    let mut chosen = Vec::with_capacity(p);
    for _ in 0..p {
        let mut best = (0, 0, -1.0);
        for i in (0..rows).filter(|&i| !row_used[i]) {
            for j in (0..p).filter(|&j| !col_used[j]) {
                let v = work[(i, j)].abs();
                if v > best.2 {
                    best = (i, j, v);
                }
            }
        }
        let (pi, pj, pv) = best;
        if pv <= tolerances::RANK * scale {
            return Err(NumericsError::SingularBorderedSystem(
                "border columns are linearly dependent".into(),
            ));
        }
        row_used[pi] = true;
        col_used[pj] = true;
        chosen.push(pi);
        let pivot = work[(pi, pj)];
        for j in (0..p).filter(|&j| !col_used[j]) {
            let factor = work[(pi, j)] / pivot;
            if factor == 0.0 {
                continue;
            }
            for i in 0..rows {
                let v = work[(i, pj)];
                work[(i, j)] -= factor * v;
            }
        }
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// One-shot bordered solve; see [`BorderedFactorization`] to reuse the factors.
pub fn solve_bordered(sys: &BorderedSystem, rhs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    BorderedFactorization::new(sys)?.solve(rhs)
}

/// `‖Nᵀx‖∞ / (‖N‖·‖x‖∞)`, the relative kernel-orthogonality defect.
pub fn orthogonality_defect(border: &DenseMatrix, x: &[f64]) -> f64 {
    if border.cols() == 0 {
        return 0.0;
    }
    let ntx = border.transpose_matvec(x);
    let scale = border.max_abs() * norm_inf(x) * border.rows() as f64;
    if scale == 0.0 {
        0.0
    } else {
        norm_inf(&ntx) / scale
    }
}
