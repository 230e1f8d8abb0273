//! Central table of numerical tolerances.
//!
//! Every threshold below is relative to a natural scale of the quantity it
//! guards (matrix norm, vector norm, largest pivot). Solvers and tests read
//! from this table so that they agree on what "zero" means.

/// Pivots smaller than this times the largest matrix entry are treated as zero.
pub const PIVOT: f64 = 1e-14;

/// `‖A·N‖ ≤ KERNEL_VERIFY · ‖A‖·‖N‖` accepts `N` as a kernel basis of `A`.
pub const KERNEL_VERIFY: f64 = 1e-8;

/// Residual and orthogonality checks on direct solves.
pub const RESIDUAL: f64 = 1e-10;

/// Singular values below this times the largest one count as zero when
/// computing ranks.
pub const RANK: f64 = 1e-10;

/// `‖A − Aᵀ‖ ≤ SYMMETRY · ‖A‖` accepts a matrix as symmetric.
pub const SYMMETRY: f64 = 1e-12;

/// Default stopping tolerance of the reduced Krylov solve (preconditioned
/// relative residual).
pub const KRYLOV: f64 = 1e-10;

/// Default iteration cap of the reduced Krylov solve, as a multiple of the
/// dimension of the deflated multiplier space.
pub const KRYLOV_MAX_ITER_FACTOR: usize = 10;

/// Coarse systems up to this dimension are factorized densely.
pub const DENSE_COARSE_LIMIT: usize = 2000;

/// Largest multiplier dimension for which dense assembly of the Schur
/// operator is allowed (oracles and stabilized direct solves).
pub const DENSE_SCHUR_LIMIT: usize = 2000;

/// Geometric coincidence of interface traces.
pub const GEOMETRY: f64 = 1e-12;

/// A reduced operator whose smallest generalized eigenvalue falls below this
/// fraction of its largest one is reported as not coercive.
pub const COERCIVITY: f64 = 1e-10;

/// Errors at or below this level are flagged as exact (machine precision).
pub const EXACT_ERROR: f64 = 1e-10;

/// A deflated right-hand side this small relative to `‖g‖` and `‖S·λ⁰‖` is
/// rounding noise; the Krylov solve is skipped.
pub const NOISE_RHS: f64 = 1e-14;

/// `‖B·u‖∞ / ‖g‖∞` accepted after a converged unstabilized solve.
pub const CONTINUITY: f64 = 1e-8;

/// Agreement of the reduced solve with the monolithic reference, and the
/// relative junction flux balance of fracture networks.
pub const ORACLE_MATCH: f64 = 1e-8;
