//! Randomized invariants, checked against dense nalgebra computations.

use std::convert::Infallible;

use lagrange_coupling::fem::{build_scenario, CaseId, ScenarioConfig};
use lagrange_coupling::numerics::{
    cg_solve, lanczos_condition_estimate, BorderedFactorization, BorderedSystem, CgOptions, DenseMatrix,
    SparseMatrix,
};
use lagrange_coupling::reduction::{solve_reduced, DChoice, MultiplierSpace, PreconditionerData, SigmaChoice, SolveConfig};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// `QᵀDQ` with `Q` from a QR of a random matrix and eigenvalues in
/// `[1, cond]`.
fn spd(n: usize, entries: &[f64], cond: f64) -> DMatrix<f64> {
    let q = DMatrix::from_column_slice(n, n, &entries[..n * n]).qr().q();
    let d = DVector::from_fn(n, |i, _| 1.0 + (cond - 1.0) * i as f64 / (n.max(2) - 1) as f64);
    &q * DMatrix::from_diagonal(&d) * q.transpose()
}

/// Weighted path-graph Laplacian plus random extra edges; connected, so
/// the kernel is exactly the constants.
fn floating_laplacian(n: usize, weights: &[f64], extra: &[(usize, usize)]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(n, n);
    let mut add = |i: usize, j: usize, w: f64| {
        a[(i, i)] += w;
        a[(j, j)] += w;
        a[(i, j)] -= w;
        a[(j, i)] -= w;
    };
    for i in 0..n - 1 {
        add(i, i + 1, weights[i]);
    }
    for &(i, j) in extra {
        let (i, j) = (i % n, j % n);
        if i != j {
            add(i, j, 0.5);
        }
    }
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn cg_matches_a_dense_solve(
        n in 2usize..30,
        entries in prop::collection::vec(-1.0f64..1.0, 900),
        rhs in prop::collection::vec(-1.0f64..1.0, 30),
        cond in 1.0f64..1e3,
    ) {
        let a = spd(n, &entries, cond);
        let b = &rhs[..n];
        let dense = from_na(&a);
        let op = |x: &[f64]| -> Result<Vec<f64>, Infallible> { Ok(dense.matvec(x)) };
        let out = cg_solve(&op, None, b, &CgOptions::new(1e-12, 10 * n)).unwrap();
        let exact = a.clone().lu().solve(&DVector::from_column_slice(b)).unwrap();
        let scale = exact.amax().max(1e-300);
        for (x, y) in out.x.iter().zip(exact.iter()) {
            prop_assert!((x - y).abs() <= 1e-8 * cond * scale);
        }
        // Ritz values lie inside the spectrum.
        let est = lanczos_condition_estimate(&out.history).unwrap();
        let ev = a.symmetric_eigenvalues();
        let (lo, hi) = (ev.min(), ev.max());
        prop_assert!(est.lambda_min >= lo * (1.0 - 1e-8) && est.lambda_max <= hi * (1.0 + 1e-8));
        prop_assert!(est.kappa <= hi / lo * (1.0 + 1e-8));
    }

    #[test]
    fn bordered_solve_is_the_kernel_orthogonal_pseudo_inverse(
        n in 2usize..40,
        weights in prop::collection::vec(0.1f64..10.0, 40),
        extra in prop::collection::vec((0usize..40, 0usize..40), 0..10),
        rhs in prop::collection::vec(-1.0f64..1.0, 40),
    ) {
        let a = floating_laplacian(n, &weights, &extra);
        let b = &rhs[..n];
        let sys = BorderedSystem::new(
            SparseMatrix::from_dense(&from_na(&a)),
            DenseMatrix::from_columns(n, &[vec![1.0; n]]),
        ).unwrap();
        let (x, mu) = BorderedFactorization::new(&sys).unwrap().solve(b).unwrap();
        // Moore–Penrose solution from an SVD.
        let pinv = a.clone().pseudo_inverse(1e-10).unwrap();
        let expected = &pinv * DVector::from_column_slice(b);
        let scale = expected.amax().max(1.0);
        for (u, v) in x.iter().zip(expected.iter()) {
            prop_assert!((u - v).abs() <= 1e-8 * scale);
        }
        prop_assert!(x.iter().sum::<f64>().abs() <= 1e-10 * scale * n as f64);
        let mean = b.iter().sum::<f64>() / n as f64;
        prop_assert!((mu[0] - mean).abs() <= 1e-12);
    }

    #[test]
    fn piecewise_linear_chains_are_exact(
        cuts in prop::collection::btree_set(1usize..24, 1..5),
        kappa in prop::collection::vec(0.1f64..10.0, 5),
        ratio in prop::sample::select(vec![1.0, 2.0, 3.0]),
    ) {
        let breaks: Vec<f64> = cuts.iter().map(|&c| c as f64 / 24.0).collect();
        let k = breaks.len() + 1;
        let mut cfg = ScenarioConfig::chain1d(k, 1.0 / 24.0, CaseId::Linear)
            .with_kappa(kappa[..k].to_vec())
            .with_ratio(ratio);
        cfg.breaks = breaks;
        let s = build_scenario(&cfg).unwrap();
        let space = MultiplierSpace::new(&s.problem, SigmaChoice::SkeletonMass).unwrap();
        let pre = PreconditionerData::new(&s.problem, DChoice::LumpedMass).unwrap();
        let sol = solve_reduced(&s.problem, &space, Some(&pre), &SolveConfig::default()).unwrap();
        prop_assert!(s.max_nodal_error(&sol.u_blocks) < 1e-9);
        // Unit flux across every interface.
        for l in &sol.lambda {
            prop_assert!((l - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn sigma_projection_is_a_sigma_orthogonal_projector(
        k in 3usize..7,
        v in prop::collection::vec(-1.0f64..1.0, 6),
        w in prop::collection::vec(-1.0f64..1.0, 6),
        sigma_identity in any::<bool>(),
    ) {
        let s = build_scenario(&ScenarioConfig::chain1d(k, 1.0 / (4 * k) as f64, CaseId::Quadratic)).unwrap();
        let choice = if sigma_identity { SigmaChoice::Identity } else { SigmaChoice::SkeletonMass };
        let space = MultiplierSpace::new(&s.problem, choice).unwrap();
        let n = space.dim();
        let (v, w) = (&v[..n], &w[..n]);
        let pv = space.project_sigma(v);
        let ppv = space.project_sigma(&pv);
        for (a, b) in pv.iter().zip(&ppv) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        // Range in ker Gᵀ.
        for c in space.g().transpose_matvec(&pv) {
            prop_assert!(c.abs() < 1e-12);
        }
        // Self-adjoint in the σ inner product.
        let pw = space.project_sigma(w);
        prop_assert!((space.sigma_inner(&pv, w) - space.sigma_inner(v, &pw)).abs() < 1e-12);
        // The lifted representative is the transpose action.
        let lift = space.lift_representative(w);
        let lhs: f64 = pv.iter().zip(w).map(|(a, b)| a * b).sum();
        let rhs: f64 = v.iter().zip(&lift).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() < 1e-12);
    }
}

