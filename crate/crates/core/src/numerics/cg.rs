//! Preconditioned conjugate gradients on operators given by their action.

use super::vector::{axpy, dot};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgOptions {
    /// Stop when `sqrt(rᵀz / r₀ᵀz₀) ≤ tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep every iterate in [`CgOutcome::iterates`].
    pub record_iterates: bool,
}

impl CgOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self { tol, max_iter, record_iterates: false }
    }
}

/// Step lengths and direction updates of a CG run; they define the Lanczos
/// tridiagonal matrix of the (preconditioned) operator.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CgHistory {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
}

impl CgHistory {
    pub fn iterations(&self) -> usize {
        self.alphas.len()
    }
}

#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub history: CgHistory,
    /// Preconditioned relative residual after each iteration.
    pub residuals: Vec<f64>,
    pub iterates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CgError<E> {
    /// `pᵀ(A·p) ≤ 0` for a search direction.
    IndefiniteOperator { iteration: usize, curvature: f64 },
    /// `rᵀ(M·r) < 0` for a residual.
    IndefinitePreconditioner { iteration: usize, value: f64 },
    MaxIterations { iterations: usize, residual: f64, history: CgHistory },
    Operator(E),
}

impl<E: std::fmt::Display> std::fmt::Display for CgError<E> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CgError::IndefiniteOperator { iteration, curvature } => {
                write!(f, "indefinite operator at iteration {iteration} (pᵀAp = {curvature:e})")
            }
            CgError::IndefinitePreconditioner { iteration, value } => {
                write!(f, "indefinite preconditioner at iteration {iteration} (rᵀMr = {value:e})")
            }
            CgError::MaxIterations { iterations, residual, .. } => {
                write!(f, "no convergence after {iterations} iterations (residual {residual:e})")
            }
            CgError::Operator(e) => write!(f, "operator failure: {e}"),
        }
    }
}

type Action<'a, E> = &'a dyn Fn(&[f64]) -> Result<Vec<f64>, E>;

/// Solves `op·x = rhs` from `x₀ = 0`. `precond = None` is the identity.
pub fn cg_solve<E>(
    op: Action<'_, E>,
    precond: Option<Action<'_, E>>,
    rhs: &[f64],
    options: &CgOptions,
) -> Result<CgOutcome, CgError<E>> {
    let n = rhs.len();
    let apply_precond = |r: &[f64]| -> Result<Vec<f64>, CgError<E>> {
        match precond {
            Some(m) => m(r).map_err(CgError::Operator),
            None => Ok(r.to_vec()),
        }
    };

    let mut x = vec![0.0; n];
    let mut history = CgHistory::default();
    let mut residuals = Vec::new();
    let mut iterates = Vec::new();

    let mut r = rhs.to_vec();
    let mut z = apply_precond(&r)?;
    let mut rz = dot(&r, &z);
    if rz < 0.0 {
        return Err(CgError::IndefinitePreconditioner { iteration: 0, value: rz });
    }
    let rz0 = rz;
    if rz0 == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, history, residuals, iterates });
    }
    let mut p = z.clone();

    for k in 0..options.max_iter {
        let q = op(&p).map_err(CgError::Operator)?;
        let curvature = dot(&p, &q);
        if !(curvature > 0.0) {
            return Err(CgError::IndefiniteOperator { iteration: k, curvature });
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &q, &mut r);
        history.alphas.push(alpha);
        if options.record_iterates {
            iterates.push(x.clone());
        }

        z = apply_precond(&r)?;
        let rz_new = dot(&r, &z);
        // A tiny negative value at convergence is rounding, not indefiniteness.
        let res = (rz_new.abs() / rz0).sqrt();
        if rz_new < 0.0 && res > options.tol {
            return Err(CgError::IndefinitePreconditioner { iteration: k + 1, value: rz_new });
        }
        residuals.push(res);
        if res <= options.tol {
            return Ok(CgOutcome { x, iterations: k + 1, history, residuals, iterates });
        }
        let beta = rz_new / rz;
        history.betas.push(beta);
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
        rz = rz_new;
    }
    let residual = residuals.last().copied().unwrap_or(1.0);
    Err(CgError::MaxIterations { iterations: options.max_iter, residual, history })
}
