use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::config::{PreconditionerSettings, SolverSettings, StabilizationSettings, Study, StudyConfig};
use super::report::{ExperimentReport, RunRecord, Value};
use super::HarnessError;
use crate::coupling::{BlockVector, CoupledProblem};
use crate::fem::{build_scenario, Scenario, ScenarioConfig};
use crate::numerics::vector::{dot, norm_inf};
use crate::numerics::{orthogonality_defect, DenseMatrix};
use crate::oracle::{kernel_component, solve_monolithic};
use crate::reduction::{
    restricted_spectrum, solve_reduced, MultiplierSpace, PreconditionerData, ReducedSolution, SolveConfig,
};
use crate::stabilization::{solve_stabilized, CoarseMultiplierSpace, StabilizationForm};
use crate::tolerances;

const STANDARD: [&str; 13] = [
    "h",
    "delta",
    "dim_lambda",
    "dim_z",
    "iterations",
    "kappa_estimate",
    "ritz_min",
    "ritz_max",
    "h1_error",
    "multiplier_error",
    "max_nodal_error",
    "constraint_residual",
    "continuity_residual",
];

fn columns(extra: &[&'static str]) -> Vec<&'static str> {
    STANDARD.iter().chain(extra).copied().collect()
}

/// How a scenario is solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Method {
    pub solver: SolverSettings,
    pub preconditioner: PreconditionerSettings,
    pub stabilization: StabilizationSettings,
}

impl Method {
    pub fn from_config(cfg: &StudyConfig) -> Self {
        Self { solver: cfg.solver, preconditioner: cfg.preconditioner, stabilization: cfg.stabilization }
    }

    pub fn preconditioned(mut self, on: bool) -> Self {
        self.preconditioner.enabled = on;
        self
    }

    pub fn stabilized(mut self, on: bool) -> Self {
        self.stabilization.enabled = on;
        self
    }
}

fn spec_json(scenario: &ScenarioConfig, method: &Method) -> String {
    #[derive(Serialize)]
    struct RunSpec<'a> {
        scenario: &'a ScenarioConfig,
        #[serde(flatten)]
        method: &'a Method,
    }
    serde_json::to_string(&RunSpec { scenario, method }).expect("run configuration serializes")
}

/// Solves a built scenario with `method`; the multiplier space is returned
/// for follow-up diagnostics.
pub fn solve_scenario(s: &Scenario, method: &Method) -> Result<(ReducedSolution, MultiplierSpace), String> {
    let problem = &s.problem;
    let space = MultiplierSpace::new(problem, method.preconditioner.sigma).map_err(|e| e.to_string())?;
    let solution = if method.stabilization.enabled {
        let coarse =
            CoarseMultiplierSpace::by_grouping(problem, method.stabilization.coarsen).map_err(|e| e.to_string())?;
        let form =
            StabilizationForm::new(problem, &coarse, method.stabilization.gamma).map_err(|e| e.to_string())?;
        solve_stabilized(problem, &space, &form).map_err(|e| e.to_string())?
    } else {
        let pre = if method.preconditioner.enabled {
            Some(PreconditionerData::new(problem, method.preconditioner.d).map_err(|e| e.to_string())?)
        } else {
            None
        };
        let cfg = SolveConfig { tol: method.solver.tol, max_iter: method.solver.max_iter, record_iterates: false };
        solve_reduced(problem, &space, pre.as_ref(), &cfg).map_err(|e| e.to_string())?
    };
    Ok((solution, space))
}

fn fill_scenario(rec: &mut RunRecord, s: &Scenario) {
    rec.set("h", s.h());
    rec.set("delta", s.delta());
    rec.set("dim_lambda", s.problem.multiplier_dim());
    rec.set("dim_z", s.problem.kernel_dim());
}

/// Records the solution metrics and fails the row if its residuals miss
/// the tolerances.
fn fill_solution(rec: &mut RunRecord, s: &Scenario, sol: &ReducedSolution, stabilized: bool) {
    if !stabilized {
        rec.set("iterations", sol.iterations);
    }
    if let Some(c) = sol.condition_estimate {
        rec.set("kappa_estimate", c.kappa);
        rec.set("ritz_min", c.lambda_min);
        rec.set("ritz_max", c.lambda_max);
    }
    rec.set("h1_error", s.broken_h1_error(&sol.u_blocks));
    rec.set("multiplier_error", s.multiplier_error(&sol.lambda));
    rec.set("max_nodal_error", s.max_nodal_error(&sol.u_blocks));
    rec.set("constraint_residual", sol.constraint_residual);
    rec.set("continuity_residual", sol.relative_continuity());
    if s.problem.kernel_dim() > 0 && !(sol.constraint_residual <= tolerances::RESIDUAL) {
        rec.fail(format!("kernel constraint residual {:e}", sol.constraint_residual));
    }
    // The stabilized problem relaxes continuity by design.
    if !stabilized && !(sol.relative_continuity() <= tolerances::CONTINUITY) {
        rec.fail(format!("continuity residual {:e}", sol.relative_continuity()));
    }
}

fn build(cfg: &ScenarioConfig) -> Result<Scenario, String> {
    build_scenario(cfg).map_err(|e| e.to_string())
}

/// Runs one scenario with `method` into a fresh record.
fn standard_run(
    label: String,
    cfg: &ScenarioConfig,
    method: &Method,
    cols: &[&str],
) -> (RunRecord, Option<(Scenario, ReducedSolution, MultiplierSpace)>) {
    let start = Instant::now();
    let mut rec = RunRecord::new(label, spec_json(cfg, method), cols);
    let out = match build(cfg) {
        Ok(s) => {
            fill_scenario(&mut rec, &s);
            match solve_scenario(&s, method) {
                Ok((sol, space)) => {
                    fill_solution(&mut rec, &s, &sol, method.stabilization.enabled);
                    Some((s, sol, space))
                }
                Err(e) => {
                    rec.fail(e);
                    None
                }
            }
        }
        Err(e) => {
            rec.fail(e);
            None
        }
    };
    rec.wall_time = start.elapsed().as_secs_f64();
    (rec, out)
}

/// Least-squares slope of `log e` against `log h`; `None` with fewer than
/// three usable points.
pub fn fit_order(h: &[f64], e: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        h.iter().zip(e).filter(|(h, e)| **h > 0.0 && **e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fitted order, `"exact"` when every error is at machine precision.
fn order_value(h: &[f64], e: &[f64]) -> Value {
    if !e.is_empty() && e.iter().all(|&v| v <= tolerances::EXACT_ERROR) {
        return Value::from("exact");
    }
    let (hs, es): (Vec<f64>, Vec<f64>) =
        h.iter().zip(e).filter(|(_, e)| **e > tolerances::EXACT_ERROR).map(|(a, b)| (*a, *b)).unzip();
    fit_order(&hs, &es).into()
}

fn monotone_decreasing(e: &[f64]) -> bool {
    e.windows(2).all(|w| w[1] < w[0] || w[1] <= tolerances::EXACT_ERROR)
}

pub fn run_convergence(cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate(Study::Converge)?;
    let cols = columns(&[]);
    let mut report = ExperimentReport::new("converge", cfg.clone(), &cols);
    let method = Method::from_config(cfg);
    for (i, sc) in cfg.level_scenarios(Study::Converge).iter().enumerate() {
        let label = format!("level {i}");
        let (mut rec, _) = standard_run(label, sc, &method, &cols);
        if !rec.passed() {
            rec.message = format!("level {i} (h = {}): {}", sc.h, rec.message);
        }
        report.records.push(rec);
    }
    let complete = report.records.iter().all(RunRecord::passed);
    let series = |c: &str| -> Vec<f64> { report.records.iter().filter_map(|r| r.get(c)).collect() };
    let (h, eu, el) = (series("h"), series("h1_error"), series("multiplier_error"));
    let (u_order, l_order) = if complete {
        (order_value(&h, &eu), order_value(&h, &el))
    } else {
        (Value::Missing, Value::Missing)
    };
    report.summary.push(("u_order".into(), u_order.clone()));
    report.summary.push(("lambda_order".into(), l_order));
    report.summary.push((
        "multiplier_error_monotone".into(),
        Value::from(if complete && monotone_decreasing(&el) { "yes" } else { "no" }),
    ));
    if let Some(min) = cfg.converge.as_ref().and_then(|c| c.min_order) {
        let ok = match u_order {
            Value::Float(o) => o >= min,
            Value::Text(ref t) => t == "exact",
            _ => false,
        };
        report.checks.push((format!("u_order >= {min}"), ok));
    }
    Ok(report)
}

/// Smallest and largest generalized eigenvalue ratio of `op` on `ker Gᵀ`
/// relative to the `δ`-weighted skeleton mass.
fn coercivity(problem: &CoupledProblem, space: &MultiplierSpace, op: &DenseMatrix) -> Result<f64, String> {
    let w: Vec<f64> = problem.multipliers.iter().map(|m| m.delta * m.measure).collect();
    let ev = restricted_spectrum(space, op, &w).map_err(|e| e.to_string())?;
    let max = ev.last().copied().unwrap_or(0.0);
    Ok(if max > 0.0 { ev[0] / max } else { 0.0 })
}

fn sweep_run(label: String, sc: &ScenarioConfig, method: &Method, cols: &[&str]) -> RunRecord {
    let start = Instant::now();
    let (mut rec, out) = standard_run(label, sc, method, cols);
    // The spectral check needs only the assembled problem, so it also runs
    // when the solve failed.
    let built = match out {
        Some((s, _, space)) => Some((s, Ok(space))),
        None => build(sc).ok().map(|s| {
            let space = MultiplierSpace::new(&s.problem, method.preconditioner.sigma).map_err(|e| e.to_string());
            (s, space)
        }),
    };
    if let Some((s, Ok(space))) = built {
        if s.problem.multiplier_dim() <= tolerances::DENSE_SCHUR_LIMIT {
            let op = s.problem.dense_schur().map_err(|e| e.to_string()).and_then(|mut op| {
                if method.stabilization.enabled {
                    let st = &method.stabilization;
                    let coarse = CoarseMultiplierSpace::by_grouping(&s.problem, st.coarsen).map_err(|e| e.to_string())?;
                    let form = StabilizationForm::new(&s.problem, &coarse, st.gamma).map_err(|e| e.to_string())?;
                    op.add_scaled(st.gamma, &form.matrix());
                }
                Ok(op)
            });
            match op.and_then(|op| coercivity(&s.problem, &space, &op)) {
                Ok(c) => {
                    rec.set("coercivity", c);
                    if !(c > tolerances::COERCIVITY) {
                        rec.fail(format!("reduced operator is not coercive on ker Gᵀ (λ_min/λ_max = {c:e})"));
                    }
                }
                Err(e) => rec.fail(e),
            }
        }
    }
    rec.set("ratio", sc.ratio);
    rec.set("stabilized", if method.stabilization.enabled { "yes" } else { "no" });
    rec.wall_time = start.elapsed().as_secs_f64();
    rec
}

pub fn run_stability_sweep(cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate(Study::Sweep)?;
    let cols = columns(&["ratio", "stabilized", "coercivity"]);
    let mut report = ExperimentReport::new("sweep", cfg.clone(), &cols);
    let method = Method::from_config(cfg);
    let levels = cfg.level_scenarios(Study::Sweep);
    for sc in &levels {
        report.records.push(sweep_run(format!("ratio {}", sc.ratio), sc, &method.stabilized(false), &cols));
    }
    if cfg.stabilization.enabled {
        for sc in &levels {
            report.records.push(sweep_run(format!("ratio {} stabilized", sc.ratio), sc, &method, &cols));
        }
    }
    let plain: Vec<&RunRecord> =
        report.records.iter().filter(|r| r.value("stabilized") == Some(&Value::from("no"))).collect();
    let mut ratios: Vec<(f64, bool)> = plain.iter().map(|r| (r.get("ratio").unwrap(), r.passed())).collect();
    ratios.sort_by(|a, b| b.0.total_cmp(&a.0));
    // Smallest ratio above which every unstabilized run succeeded.
    let boundary = ratios.iter().take_while(|r| r.1).last().map(|r| r.0);
    report.summary.push(("stability_boundary".into(), boundary.into()));
    let reference_ratio = cfg.sweep.as_ref().map_or(3.0, |s| s.reference_ratio);
    let reference = plain
        .iter()
        .find(|r| r.get("ratio") == Some(reference_ratio) && r.passed())
        .and_then(|r| r.get("h1_error"));
    let worst = report
        .records
        .iter()
        .filter(|r| r.value("stabilized") == Some(&Value::from("yes")) && r.passed())
        .filter_map(|r| Some(r.get("h1_error")? / reference?))
        .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
    report.summary.push(("reference_h1_error".into(), reference.into()));
    report.summary.push(("max_stabilized_error_ratio".into(), worst.into()));
    Ok(report)
}

fn level_name(d: &[usize]) -> String {
    d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("x")
}

fn growth(it: &[f64]) -> Vec<Option<f64>> {
    it.windows(2).map(|w| (w[0] > 0.0).then(|| w[1] / w[0])).collect()
}

fn max_growth(g: &[Option<f64>]) -> Option<f64> {
    if g.iter().any(Option::is_none) {
        return None;
    }
    g.iter().flatten().copied().reduce(f64::max)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn run_preconditioner_study(cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate(Study::Precond)?;
    let cols = columns(&["subdomains", "preconditioned"]);
    let mut report = ExperimentReport::new("precond", cfg.clone(), &cols);
    let method = Method::from_config(cfg).stabilized(false);
    for sc in cfg.level_scenarios(Study::Precond) {
        for on in [true, false] {
            let name = level_name(&sc.subdomains);
            let label = format!("{name} {}", if on { "preconditioned" } else { "unpreconditioned" });
            let (mut rec, _) = standard_run(label, &sc, &method.preconditioned(on), &cols);
            rec.set("subdomains", name);
            rec.set("preconditioned", if on { "yes" } else { "no" });
            report.records.push(rec);
        }
    }
    let pick = |on: &str, c: &str| -> Vec<f64> {
        report
            .records
            .iter()
            .filter(|r| r.value("preconditioned") == Some(&Value::from(on)))
            .map(|r| r.get(c).unwrap_or(f64::NAN))
            .collect()
    };
    let (pre, plain) = (pick("yes", "iterations"), pick("no", "iterations"));
    let (gp, gu) = (growth(&pre), growth(&plain));
    let kappa = pick("yes", "kappa_estimate");
    let faster = gp.len() == gu.len()
        && gp.iter().zip(&gu).all(|(p, u)| matches!((p, u), (Some(p), Some(u)) if u > p));
    report.summary.push(("preconditioned_iterations".into(), join(&pre).into()));
    report.summary.push(("unpreconditioned_iterations".into(), join(&plain).into()));
    report.summary.push(("preconditioned_kappa".into(), join(&kappa).into()));
    report.summary.push(("unpreconditioned_kappa".into(), join(&pick("no", "kappa_estimate")).into()));
    report.summary.push(("max_preconditioned_growth".into(), max_growth(&gp).into()));
    report.summary.push(("max_unpreconditioned_growth".into(), max_growth(&gu).into()));
    let kappa_ratio = match (kappa.first(), kappa.last()) {
        (Some(a), Some(b)) if a.is_finite() && b.is_finite() && *a > 0.0 => Some(b / a),
        _ => None,
    };
    report.summary.push(("preconditioned_kappa_ratio".into(), kappa_ratio.into()));
    report.summary.push(("unpreconditioned_grows_faster".into(), Value::from(if faster { "yes" } else { "no" })));
    Ok(report)
}

fn max_block_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Outward flux of each segment at its junction vertex, recovered from the
/// discrete residual `A·u − f`.
fn junction_fluxes(s: &Scenario, u: &BlockVector) -> Vec<f64> {
    s.problem
        .subproblems
        .iter()
        .zip(&s.meshes)
        .zip(u)
        .map(|((sp, mesh), uk)| {
            let d = mesh.dof_of(mesh.vertices.len() - 1).expect("junction vertex is free");
            let au = sp.stiffness.matvec(uk);
            au[d] - sp.load[d]
        })
        .collect()
}

fn junction_values(s: &Scenario, u: &BlockVector) -> Vec<f64> {
    s.meshes
        .iter()
        .zip(u)
        .map(|(mesh, uk)| uk[mesh.dof_of(mesh.vertices.len() - 1).expect("junction vertex is free")])
        .collect()
}

pub fn run_fracture(cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate(Study::Fracture)?;
    let cols = columns(&[
        "junction_value",
        "junction_value_exact",
        "flux_0",
        "flux_1",
        "flux_2",
        "flux_error",
        "flux_balance",
        "junction_continuity",
        "oracle_u_diff",
        "oracle_lambda_diff",
    ]);
    let mut report = ExperimentReport::new("fracture", cfg.clone(), &cols);
    let method = Method::from_config(cfg);
    let start = Instant::now();
    let (mut rec, out) = standard_run("star".into(), &cfg.scenario, &method, &cols);
    if let Some((s, sol, _)) = out {
        let q = junction_fluxes(&s, &sol.u_blocks);
        let exact_q = s.case.junction_fluxes().expect("star case");
        let scale = q.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let balance = q.iter().sum::<f64>().abs() / if scale > 0.0 { scale } else { 1.0 };
        let values = junction_values(&s, &sol.u_blocks);
        let continuity = values.iter().map(|v| (v - values[0]).abs()).fold(0.0, f64::max);
        for (k, v) in q.iter().enumerate() {
            rec.set(&format!("flux_{k}"), *v);
        }
        rec.set("junction_value", values[0]);
        rec.set("junction_value_exact", s.case.junction_value());
        rec.set("flux_error", max_diff(&q, &exact_q));
        rec.set("flux_balance", balance);
        rec.set("junction_continuity", continuity);
        if !(balance <= tolerances::ORACLE_MATCH) {
            rec.fail(format!("junction flux balance {balance:e}"));
        }
        match solve_monolithic(&s.problem) {
            Ok(m) => {
                let (du, dl) = (max_block_diff(&sol.u_blocks, &m.u_blocks), max_diff(&sol.lambda, &m.lambda));
                rec.set("oracle_u_diff", du);
                rec.set("oracle_lambda_diff", dl);
                if !(du <= tolerances::ORACLE_MATCH && dl <= tolerances::ORACLE_MATCH) {
                    rec.fail(format!("reduced and monolithic solutions differ ({du:e}, {dl:e})"));
                }
            }
            Err(e) => rec.fail(format!("monolithic reference: {e}")),
        }
    }
    rec.wall_time = start.elapsed().as_secs_f64();
    report.records.push(rec);
    Ok(report)
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn rel(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

/// Largest relative defects of the local pseudo-inverse contract:
/// `A·A⁺g = g` on `Range(A)` and kernel orthogonality of `A⁺g`.
fn pseudo_inverse_defects(problem: &CoupledProblem, rng: &mut ChaCha8Rng, probes: usize) -> Result<(f64, f64), String> {
    let (mut range, mut orth) = (0.0_f64, 0.0_f64);
    for s in &problem.subproblems {
        for _ in 0..probes {
            let g = s.stiffness.matvec(&random_vec(rng, s.dof_count()));
            let x = s.solve(&g).map_err(|e| e.to_string())?;
            let ax = s.stiffness.matvec(&x);
            range = range.max(rel(max_diff(&ax, &g), norm_inf(&g)));
            orth = orth.max(orthogonality_defect(&s.kernel_basis, &x));
        }
    }
    Ok((range, orth))
}

struct ProjectionDefects {
    idempotence: f64,
    self_adjointness: f64,
    bbplus: f64,
    bplusb: f64,
}

fn projection_defects(
    problem: &CoupledProblem,
    space: &MultiplierSpace,
    pre: &PreconditionerData<'_>,
    rng: &mut ChaCha8Rng,
    probes: usize,
) -> Result<ProjectionDefects, String> {
    let n = problem.multiplier_dim();
    let mut d = ProjectionDefects { idempotence: 0.0, self_adjointness: 0.0, bbplus: 0.0, bplusb: 0.0 };
    for _ in 0..probes {
        let (x, y) = (random_vec(rng, n), random_vec(rng, n));
        let px = space.project_sigma(&x);
        let ppx = space.project_sigma(&px);
        d.idempotence = d.idempotence.max(rel(max_diff(&ppx, &px), norm_inf(&x)));
        let py = space.project_sigma(&y);
        let norm = (space.sigma_inner(&x, &x) * space.sigma_inner(&y, &y)).sqrt();
        d.self_adjointness =
            d.self_adjointness.max(rel((space.sigma_inner(&px, &y) - space.sigma_inner(&x, &py)).abs(), norm));

        let phi = random_vec(rng, n);
        let bbp = problem.apply_b(&pre.apply_bdelta_plus(&phi).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        d.bbplus = d.bbplus.max(rel(max_diff(&bbp, &phi), norm_inf(&phi)));

        let v: BlockVector = problem.dof_counts().into_iter().map(|c| random_vec(rng, c)).collect();
        let p = |w: &BlockVector| -> Result<BlockVector, String> {
            pre.apply_bdelta_plus(&problem.apply_b(w).map_err(|e| e.to_string())?).map_err(|e| e.to_string())
        };
        let pv = p(&v)?;
        let ppv = p(&pv)?;
        let scale = v.iter().map(|b| norm_inf(b)).fold(0.0, f64::max);
        d.bplusb = d.bplusb.max(rel(max_block_diff(&ppv, &pv), scale));
    }
    Ok(d)
}

pub fn run_oracle(cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    cfg.validate(Study::Oracle)?;
    let cols = columns(&[
        "u_diff",
        "lambda_diff",
        "z_diff",
        "pseudo_inverse_range",
        "pseudo_inverse_orthogonality",
        "projection_idempotence",
        "projection_self_adjointness",
        "bbplus_identity",
        "bplusb_idempotence",
        "min_schur_quadratic_form",
    ]);
    let probes = cfg.oracle.as_ref().map_or(4, |o| o.probes);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = ExperimentReport::new("oracle", cfg.clone(), &cols);
    let method = Method::from_config(cfg).stabilized(false);
    for (i, sc) in cfg.level_scenarios(Study::Oracle).iter().enumerate() {
        let start = Instant::now();
        let kind = serde_json::to_value(sc.kind).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        let label = format!("{i} {kind} {}", level_name(&sc.subdomains));
        let (mut rec, out) = standard_run(label.trim_end().to_string(), sc, &method, &cols);
        if let Some((s, sol, space)) = out {
            let p = &s.problem;
            match solve_monolithic(p) {
                Ok(m) => {
                    let du = max_block_diff(&sol.u_blocks, &m.u_blocks);
                    let dl = max_diff(&sol.lambda, &m.lambda);
                    rec.set("u_diff", du);
                    rec.set("lambda_diff", dl);
                    if !(du <= tolerances::ORACLE_MATCH && dl <= tolerances::ORACLE_MATCH) {
                        rec.fail(format!("reduced and monolithic solutions differ ({du:e}, {dl:e})"));
                    }
                    if p.kernel_dim() > 0 {
                        match kernel_component(p, &m.u_blocks) {
                            Ok(z) => {
                                let dz = max_diff(&z, &sol.z_star);
                                rec.set("z_diff", dz);
                                if !(dz <= tolerances::ORACLE_MATCH) {
                                    rec.fail(format!("kernel component differs by {dz:e}"));
                                }
                            }
                            Err(e) => rec.fail(e.to_string()),
                        }
                    }
                }
                Err(e) => rec.fail(format!("monolithic reference: {e}")),
            }
            match pseudo_inverse_defects(p, &mut rng, probes) {
                Ok((range, orth)) => {
                    rec.set("pseudo_inverse_range", range);
                    rec.set("pseudo_inverse_orthogonality", orth);
                    if !(range <= tolerances::RESIDUAL && orth <= tolerances::RESIDUAL) {
                        rec.fail(format!("pseudo-inverse contract defects ({range:e}, {orth:e})"));
                    }
                }
                Err(e) => rec.fail(e),
            }
            let algebra = PreconditionerData::new(p, method.preconditioner.d)
                .map_err(|e| e.to_string())
                .and_then(|pre| projection_defects(p, &space, &pre, &mut rng, probes));
            match algebra {
                Ok(d) => {
                    rec.set("projection_idempotence", d.idempotence);
                    rec.set("projection_self_adjointness", d.self_adjointness);
                    rec.set("bbplus_identity", d.bbplus);
                    rec.set("bplusb_idempotence", d.bplusb);
                    let worst = d.idempotence.max(d.self_adjointness).max(d.bbplus).max(d.bplusb);
                    if !(worst <= tolerances::RESIDUAL) {
                        rec.fail(format!("projection algebra defect {worst:e}"));
                    }
                }
                Err(e) => rec.fail(e),
            }
            // xᵀSx over random probes, relative to ‖S‖·‖x‖².
            let mut min_q = f64::INFINITY;
            for _ in 0..probes {
                let x = random_vec(&mut rng, p.multiplier_dim());
                match p.apply_schur(&x) {
                    Ok(sx) => {
                        let scale = norm_inf(&sx).max(f64::MIN_POSITIVE) * norm_inf(&x) * x.len() as f64;
                        min_q = min_q.min(dot(&x, &sx) / scale);
                    }
                    Err(e) => rec.fail(e.to_string()),
                }
            }
            rec.set("min_schur_quadratic_form", min_q);
            if !(min_q >= -1e-12) {
                rec.fail(format!("Schur operator is not positive semidefinite ({min_q:e})"));
            }
        }
        rec.wall_time = start.elapsed().as_secs_f64();
        report.records.push(rec);
    }
    Ok(report)
}

pub fn run_study(study: Study, cfg: &StudyConfig) -> Result<ExperimentReport, HarnessError> {
    match study {
        Study::Converge => run_convergence(cfg),
        Study::Sweep => run_stability_sweep(cfg),
        Study::Precond => run_preconditioner_study(cfg),
        Study::Fracture => run_fracture(cfg),
        Study::Oracle => run_oracle(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_fit_recovers_a_power_law() {
        let h = [0.1, 0.05, 0.025, 0.0125];
        let e: Vec<f64> = h.iter().map(|h| 3.0 * h * h).collect();
        assert!((fit_order(&h, &e).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(fit_order(&h[..2], &e[..2]), None);
    }

    #[test]
    fn exact_errors_are_flagged() {
        assert_eq!(order_value(&[0.1, 0.05, 0.025], &[1e-14, 1e-13, 2e-14]), Value::from("exact"));
        assert!(monotone_decreasing(&[1e-3, 1e-4, 1e-12, 1e-11]));
        assert!(!monotone_decreasing(&[1e-3, 1e-4, 2e-4]));
    }

    #[test]
    fn growth_needs_nonzero_counts() {
        assert_eq!(growth(&[2.0, 4.0, 0.0]), vec![Some(2.0), Some(0.0)]);
        assert_eq!(max_growth(&growth(&[0.0, 1.0, 1.0])), None);
    }
}
