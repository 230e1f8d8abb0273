//! End-to-end checks on the reference scenarios against closed-form
//! solutions and an independent dense saddle solve.

use lagrange_coupling::coupling::CoupledProblem;
use lagrange_coupling::fem::{build_scenario, CaseId, FemError, Scenario, ScenarioConfig, SegmentConfig};
use lagrange_coupling::reduction::{
    solve_reduced, DChoice, MultiplierSpace, PreconditionerData, ReducedSolution, SigmaChoice, SolveConfig,
};
use nalgebra::{DMatrix, DVector};

fn solve(s: &Scenario, precondition: bool) -> ReducedSolution {
    let space = MultiplierSpace::new(&s.problem, SigmaChoice::SkeletonMass).unwrap();
    let pre = precondition.then(|| PreconditionerData::new(&s.problem, DChoice::LumpedMass).unwrap());
    solve_reduced(&s.problem, &space, pre.as_ref(), &SolveConfig::default()).unwrap()
}

/// Dense `[[A, −Bᵀ], [B, 0]]` solve with nalgebra, written independently of
/// the library's own reference solver.
fn saddle_reference(p: &CoupledProblem) -> (Vec<Vec<f64>>, Vec<f64>) {
    let counts = p.dof_counts();
    let nu: usize = counts.iter().sum();
    let m = p.multiplier_dim();
    let mut k = DMatrix::<f64>::zeros(nu + m, nu + m);
    let mut rhs = DVector::<f64>::zeros(nu + m);
    let mut off = 0;
    for (s, b) in p.subproblems.iter().zip(p.coupling.blocks()) {
        let a = s.stiffness.to_dense();
        let bd = b.to_dense();
        for i in 0..s.dof_count() {
            rhs[off + i] = s.load[i];
            for j in 0..s.dof_count() {
                k[(off + i, off + j)] = a[(i, j)];
            }
            for r in 0..m {
                k[(nu + r, off + i)] = bd[(r, i)];
                k[(off + i, nu + r)] = -bd[(r, i)];
            }
        }
        off += s.dof_count();
    }
    let x = k.lu().solve(&rhs).expect("saddle system is nonsingular");
    let mut blocks = Vec::new();
    let mut off = 0;
    for c in counts {
        blocks.push(x.as_slice()[off..off + c].to_vec());
        off += c;
    }
    (blocks, x.as_slice()[nu..].to_vec())
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn split_interval_flux_is_one_over_24() {
    // u = (x − x³)/6 has u'(1/2) = 1/24.
    for n in [4, 16, 64] {
        let s = build_scenario(&ScenarioConfig::chain1d(2, 1.0 / n as f64, CaseId::Cubic)).unwrap();
        let sol = solve(&s, true);
        assert_eq!(sol.lambda.len(), 1);
        assert!((sol.lambda[0] - 1.0 / 24.0).abs() < 1e-12, "n = {n}: {}", sol.lambda[0]);
    }
}

#[test]
fn floating_middle_reproduces_the_compatibility_value() {
    let s = build_scenario(&ScenarioConfig::chain1d(3, 1.0 / 12.0, CaseId::Quadratic)).unwrap();
    let p = &s.problem;
    let g = p.kernel_trace_matrix();
    assert_eq!((g.rows(), g.cols()), (2, 1));
    assert_eq!((g[(0, 0)], g[(1, 0)]), (-1.0, 1.0));
    // ∫ f over the middle third with f = 1.
    assert!((p.kernel_compatibility_rhs()[0] + 1.0 / 3.0).abs() < 1e-14);
    let sol = solve(&s, true);
    let gt = -sol.lambda[0] + sol.lambda[1];
    assert!((gt + 1.0 / 3.0).abs() < 1e-12);
    // Exact fluxes 1/2 − x at the breakpoints.
    assert!((sol.lambda[0] - 1.0 / 6.0).abs() < 1e-12 && (sol.lambda[1] + 1.0 / 6.0).abs() < 1e-12);
}

#[test]
fn reduced_and_dense_saddle_solves_agree() {
    let configs = [
        ScenarioConfig::chain1d(2, 1.0 / 16.0, CaseId::Cubic),
        ScenarioConfig::chain1d(3, 1.0 / 12.0, CaseId::Quadratic),
        ScenarioConfig::chain1d(5, 1.0 / 20.0, CaseId::Linear).with_kappa(vec![1.0, 3.0, 0.5, 2.0, 1.0]),
        ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::SinSin),
        ScenarioConfig::grid2d(3, 3, 1.0 / 9.0, CaseId::SinSin),
        ScenarioConfig::fracture_star(0.125, vec![2.0, 1.0, 1.0], vec![]),
    ];
    for cfg in configs {
        let s = build_scenario(&cfg).unwrap();
        let (u, l) = saddle_reference(&s.problem);
        for pre in [true, false] {
            let sol = solve(&s, pre);
            let du = u.iter().zip(&sol.u_blocks).map(|(a, b)| max_diff(a, b)).fold(0.0, f64::max);
            assert!(du < 1e-8, "{:?}: u differs by {du:e}", cfg.kind);
            assert!(max_diff(&l, &sol.lambda) < 1e-8, "{:?}: λ differs", cfg.kind);
        }
    }
}

#[test]
fn kernel_coefficient_matches_the_reference_mean() {
    let s = build_scenario(&ScenarioConfig::chain1d(3, 1.0 / 12.0, CaseId::Quadratic)).unwrap();
    let (u, _) = saddle_reference(&s.problem);
    let sol = solve(&s, true);
    // The kernel basis is the constant vector and A⁺ returns vectors with
    // zero dof sum, so z* is the dof mean of the middle block.
    let mean = u[1].iter().sum::<f64>() / u[1].len() as f64;
    assert!((sol.z_star[0] - mean).abs() < 1e-8);
}

#[test]
fn patch_tests_are_exact() {
    let configs = [
        ScenarioConfig::chain1d(4, 1.0 / 16.0, CaseId::Linear).with_kappa(vec![1.0, 4.0, 0.25, 2.0]),
        ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::Linear),
        ScenarioConfig::grid2d(3, 2, 1.0 / 6.0, CaseId::Linear),
    ];
    for cfg in configs {
        let s = build_scenario(&cfg).unwrap();
        let sol = solve(&s, true);
        assert!(s.max_nodal_error(&sol.u_blocks) < 1e-10, "{:?}", cfg.kind);
        assert!(s.broken_h1_error(&sol.u_blocks) < 1e-10);
        assert!(sol.continuity_residual < 1e-10);
    }
}

#[test]
fn broken_h1_error_halves_under_refinement() {
    let errors: Vec<f64> = [8, 16, 32, 64]
        .iter()
        .map(|&n| {
            let s = build_scenario(&ScenarioConfig::chain1d(2, 1.0 / n as f64, CaseId::Quadratic)).unwrap();
            s.broken_h1_error(&solve(&s, true).u_blocks)
        })
        .collect();
    for w in errors.windows(2) {
        let rate = (w[0] / w[1]).log2();
        assert!(rate >= 0.9, "{errors:?}");
    }
}

#[test]
fn multiplier_error_decreases_with_h_and_delta() {
    let errors: Vec<f64> = [12, 24, 48]
        .iter()
        .map(|&n| {
            let s = build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / n as f64, CaseId::SinSin)).unwrap();
            s.multiplier_error(&solve(&s, true).lambda)
        })
        .collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
}

#[test]
fn sign_flip_flips_the_multiplier() {
    let s = build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::SinSin)).unwrap();
    let sol = solve(&s, true);
    let e = s.multiplier_error(&sol.lambda);
    let flipped = Scenario { case: s.case.scaled(-1.0), ..s };
    let neg: Vec<f64> = sol.lambda.iter().map(|v| -v).collect();
    assert!((flipped.multiplier_error(&neg) - e).abs() < 1e-15);
}

#[test]
fn kappa_scaling_scales_the_multiplier() {
    // f = 2π²κ·u: scaling κ scales f and leaves u unchanged.
    let base = build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::SinSin)).unwrap();
    let scaled =
        build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::SinSin).with_kappa(vec![4.0])).unwrap();
    let (a, b) = (solve(&base, true), solve(&scaled, true));
    for (x, y) in a.lambda.iter().zip(&b.lambda) {
        assert!((4.0 * x - y).abs() < 1e-9 * y.abs().max(1e-3));
    }
    for (x, y) in a.u_blocks.iter().flatten().zip(b.u_blocks.iter().flatten()) {
        assert!((x - y).abs() < 1e-10);
    }
}

/// Outward junction flux of each segment, from the residual `A·u − f`.
fn junction_fluxes(s: &Scenario, sol: &ReducedSolution) -> Vec<f64> {
    s.problem
        .subproblems
        .iter()
        .zip(&sol.u_blocks)
        .map(|(sp, u)| {
            let au = sp.stiffness.matvec(u);
            let last = u.len() - 1;
            au[last] - sp.load[last]
        })
        .collect()
}

#[test]
fn fracture_fluxes_balance_and_match_the_network_solution() {
    let segs = vec![
        SegmentConfig { outer: [-1.0, 0.0], junction: None, load: 1.0 },
        SegmentConfig { outer: [0.5, 0.0], junction: None, load: 2.0 },
        SegmentConfig { outer: [0.0, 1.5], junction: None, load: 0.5 },
    ];
    let kappa = [2.0, 1.0, 3.0];
    let s = build_scenario(&ScenarioConfig::fracture_star(0.125, kappa.to_vec(), segs.clone())).unwrap();
    let sol = solve(&s, true);
    let q = junction_fluxes(&s, &sol);
    let scale = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    assert!(q.iter().sum::<f64>().abs() <= 1e-8 * scale);
    // Series network: U·Σ κ/L = Σ f·L/2 and q_k = κ_k·U/L_k − f_k·L_k/2.
    let lengths = [1.0, 0.5, 1.5];
    let u_j = segs.iter().zip(&lengths).map(|(s, l)| s.load * l / 2.0).sum::<f64>()
        / kappa.iter().zip(&lengths).map(|(k, l)| k / l).sum::<f64>();
    for k in 0..3 {
        let exact = kappa[k] * u_j / lengths[k] - segs[k].load * lengths[k] / 2.0;
        assert!((q[k] - exact).abs() < 1e-10, "segment {k}: {} vs {exact}", q[k]);
        assert!((sol.u_blocks[k].last().unwrap() - u_j).abs() < 1e-10);
    }
    // The multipliers are the outward fluxes of the end segments.
    assert!((sol.lambda[0] - q[0]).abs() < 1e-10 && (sol.lambda[1] + q[2]).abs() < 1e-10);
}

#[test]
fn equal_conductances_split_by_conductance() {
    let s = build_scenario(&ScenarioConfig::fracture_star(0.0625, vec![2.0, 1.0, 1.0], vec![])).unwrap();
    let sol = solve(&s, true);
    let q = junction_fluxes(&s, &sol);
    // Unit lengths and loads: the conductance-driven parts q_k + 1/2 split
    // 2:1:1.
    let driven: Vec<f64> = q.iter().map(|v| v + 0.5).collect();
    assert!((driven[0] - 2.0 * driven[1]).abs() < 1e-10 && (driven[1] - driven[2]).abs() < 1e-10);
}

#[test]
fn unloaded_star_has_zero_solution() {
    let mut cfg = ScenarioConfig::fracture_star(0.25, vec![], vec![]);
    cfg.case = CaseId::Zero;
    let s = build_scenario(&cfg).unwrap();
    let sol = solve(&s, true);
    assert_eq!(sol.iterations, 0);
    assert!(sol.lambda.iter().chain(sol.u_blocks.iter().flatten()).all(|v| *v == 0.0));
}

#[test]
fn mismatched_junction_is_a_config_error() {
    let segs = vec![
        SegmentConfig { outer: [-1.0, 0.0], junction: None, load: 1.0 },
        SegmentConfig { outer: [1.0, 0.0], junction: Some([0.0, 1e-6]), load: 1.0 },
        SegmentConfig { outer: [0.0, 1.0], junction: None, load: 1.0 },
    ];
    let err = build_scenario(&ScenarioConfig::fracture_star(0.25, vec![], segs)).unwrap_err();
    assert!(matches!(err, FemError::ConfigInvalid { ref field, .. } if field == "segments"));
}

#[test]
fn preconditioned_ritz_values_are_stable_at_fixed_ratio() {
    let mins: Vec<f64> = [12, 24, 48]
        .iter()
        .map(|&n| {
            let s = build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / n as f64, CaseId::SinSin)).unwrap();
            solve(&s, true).condition_estimate.unwrap().lambda_min
        })
        .collect();
    let (lo, hi) = mins.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!((hi - lo) / hi <= 0.2, "{mins:?}");
}

#[test]
fn preconditioner_reduces_the_condition_estimate() {
    for m in [2, 4] {
        let s = build_scenario(&ScenarioConfig::grid2d(m, m, 1.0 / (6 * m) as f64, CaseId::SinSin)).unwrap();
        let pre = solve(&s, true).condition_estimate.unwrap().kappa;
        let plain = solve(&s, false).condition_estimate.unwrap().kappa;
        assert!(pre < plain, "{m}x{m}: {pre} vs {plain}");
    }
}
