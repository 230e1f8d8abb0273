//! Scenario geometry: chains of intervals, grids of subsquares and a star of
//! 1D fracture segments, wired into a [`CoupledProblem`].

use serde::{Deserialize, Serialize};

use super::assembly::LocalAssembly;
use super::cases::{CaseId, FractureSegment, ManufacturedCase};
use super::mesh::{InterfaceTrace, SubdomainMesh};
use super::norms;
use super::skeleton::{build_coupling, FluxSide, InterfaceShape, SkeletonInterface, SkeletonSpace};
use super::solver::galerkin_pseudo_inverse;
use super::{distance, FemError, Point, Result};
use crate::coupling::{BlockVector, CoupledProblem, LocalSubproblem};
use crate::tolerances;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// `[0, 1]` split into `K` intervals, Dirichlet data at both ends.
    Chain1d,
    /// The unit square split into `m×n` subsquares, Dirichlet data on the
    /// outer boundary.
    Grid2d,
    /// Three segments meeting at a junction, zero values at the outer ends.
    FractureStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentConfig {
    pub outer: Point,
    #[serde(default)]
    pub junction: Option<Point>,
    #[serde(default)]
    pub load: f64,
}

fn default_ratio() -> f64 {
    3.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    /// `[K]` for chains, `[m, n]` for grids; ignored by the star.
    #[serde(default)]
    pub subdomains: Vec<usize>,
    /// Fine mesh size; must divide every subdomain width.
    pub h: f64,
    /// Multiplier cell size over `h` on segment interfaces.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// One conductivity per subdomain, a single broadcast value, or empty
    /// for all ones.
    #[serde(default)]
    pub kappa: Vec<f64>,
    pub case: CaseId,
    /// Interior chain breakpoints; uniform when empty.
    #[serde(default)]
    pub breaks: Vec<f64>,
    #[serde(default)]
    pub segments: Vec<SegmentConfig>,
    #[serde(default)]
    pub junction: Option<Point>,
}

impl ScenarioConfig {
    pub fn chain1d(k: usize, h: f64, case: CaseId) -> Self {
        Self {
            kind: ScenarioKind::Chain1d,
            subdomains: vec![k],
            h,
            ratio: default_ratio(),
            kappa: Vec::new(),
            case,
            breaks: Vec::new(),
            segments: Vec::new(),
            junction: None,
        }
    }

    pub fn grid2d(m: usize, n: usize, h: f64, case: CaseId) -> Self {
        Self { kind: ScenarioKind::Grid2d, subdomains: vec![m, n], ..Self::chain1d(0, h, case) }
    }

    pub fn fracture_star(h: f64, kappa: Vec<f64>, segments: Vec<SegmentConfig>) -> Self {
        Self {
            kind: ScenarioKind::FractureStar,
            subdomains: Vec::new(),
            kappa,
            segments,
            ..Self::chain1d(0, h, CaseId::ConstantLoads)
        }
    }

    pub fn with_ratio(mut self, ratio: f64) -> Self {
        self.ratio = ratio;
        self
    }

    pub fn with_kappa(mut self, kappa: Vec<f64>) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn subdomain_count(&self) -> usize {
        match self.kind {
            ScenarioKind::Chain1d => self.subdomains.first().copied().unwrap_or(0),
            ScenarioKind::Grid2d => self.subdomains.iter().product(),
            ScenarioKind::FractureStar => 3,
        }
    }

    fn kappas(&self) -> Result<Vec<f64>> {
        let count = self.subdomain_count();
        let kappa = match self.kappa.len() {
            0 => vec![1.0; count],
            1 => vec![self.kappa[0]; count],
            n if n == count => self.kappa.clone(),
            n => return Err(FemError::config("kappa", format!("{n} values for {count} subdomains"))),
        };
        if kappa.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(FemError::config("kappa", "values must be positive"));
        }
        Ok(kappa)
    }

    /// Field-level checks that do not need any assembly.
    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(FemError::config("h", "must be positive"));
        }
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(FemError::config("ratio", "must be positive"));
        }
        match self.kind {
            ScenarioKind::Chain1d => {
                if self.subdomains.len() != 1 || self.subdomains[0] < 2 {
                    return Err(FemError::config("subdomains", "chain1d needs [K] with K ≥ 2"));
                }
                if !self.breaks.is_empty() && self.breaks.len() != self.subdomains[0] - 1 {
                    return Err(FemError::config("breaks", "need K − 1 interior breakpoints"));
                }
                let b = self.chain_breaks();
                if b.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(FemError::config("breaks", "must increase strictly inside (0, 1)"));
                }
                if !self.segments.is_empty() || self.junction.is_some() {
                    return Err(FemError::config("segments", "only used by fracture_star"));
                }
            }
            ScenarioKind::Grid2d => {
                if self.subdomains.len() != 2
                    || self.subdomains.contains(&0)
                    || self.subdomain_count() < 2
                {
                    return Err(FemError::config("subdomains", "grid2d needs [m, n] with m·n ≥ 2"));
                }
                if !self.breaks.is_empty() {
                    return Err(FemError::config("breaks", "only used by chain1d"));
                }
                if !self.segments.is_empty() || self.junction.is_some() {
                    return Err(FemError::config("segments", "only used by fracture_star"));
                }
            }
            ScenarioKind::FractureStar => {
                if !self.subdomains.is_empty() && self.subdomains != [3] {
                    return Err(FemError::config("subdomains", "the star has exactly three segments"));
                }
                if !self.segments.is_empty() && self.segments.len() != 3 {
                    return Err(FemError::config("segments", "the star has exactly three segments"));
                }
                if !self.breaks.is_empty() {
                    return Err(FemError::config("breaks", "only used by chain1d"));
                }
            }
        }
        let widths: Vec<f64> = match self.kind {
            ScenarioKind::Chain1d => self.chain_breaks().windows(2).map(|w| w[1] - w[0]).collect(),
            ScenarioKind::Grid2d => self.subdomains.iter().map(|&s| 1.0 / s as f64).collect(),
            ScenarioKind::FractureStar => star_segments(self)?.iter().map(|s| s.length()).collect(),
        };
        for w in widths {
            element_count(w, self.h)?;
        }
        let kappa = self.kappas()?;
        let uniform = kappa.iter().all(|&k| k == kappa[0]);
        let ok = match (self.kind, self.case) {
            (_, CaseId::Zero) => true,
            (ScenarioKind::Chain1d, CaseId::Quadratic | CaseId::Cubic) => uniform,
            (ScenarioKind::Chain1d, CaseId::Linear) => true,
            (ScenarioKind::Grid2d, CaseId::SinSin | CaseId::Linear) => uniform,
            (ScenarioKind::FractureStar, CaseId::ConstantLoads) => true,
            _ => false,
        };
        if !ok {
            return Err(FemError::config(
                "case",
                format!("{:?} is not available for {:?} with these conductivities", self.case, self.kind),
            ));
        }
        Ok(())
    }

    fn chain_breaks(&self) -> Vec<f64> {
        let k = self.subdomains.first().copied().unwrap_or(1).max(1);
        let mut b = vec![0.0];
        if self.breaks.is_empty() {
            b.extend((1..k).map(|i| i as f64 / k as f64));
        } else {
            b.extend(&self.breaks);
        }
        b.push(1.0);
        b
    }
}

/// Number of elements of size `h` across `width`; `width/h` must be an
/// integer up to roundoff.
fn element_count(width: f64, h: f64) -> Result<usize> {
    let n = (width / h).round();
    if n < 1.0 || (n * h - width).abs() > 1e-9 * width {
        return Err(FemError::config("h", format!("{h} does not divide the subdomain width {width}")));
    }
    Ok(n as usize)
}

/// Multiplier cells on an interface with `edges` fine edges.
fn cell_count(edges: usize, ratio: f64) -> usize {
    ((edges as f64 / ratio + 1e-9).floor() as usize).max(1)
}

/// A fully wired scenario with the meshes and exact solution kept for error
/// measurement.
#[derive(Debug)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub meshes: Vec<SubdomainMesh>,
    pub skeleton: SkeletonSpace,
    pub case: ManufacturedCase,
    pub problem: CoupledProblem,
}

impl Scenario {
    pub fn h(&self) -> f64 {
        self.meshes.iter().map(|m| m.h).fold(0.0, f64::max)
    }

    /// Largest multiplier cell size, 0 for point interfaces only.
    pub fn delta(&self) -> f64 {
        self.skeleton.delta()
    }

    pub fn interpolant(&self) -> BlockVector {
        self.meshes.iter().enumerate().map(|(k, m)| norms::nodal_values(m, k, &self.case)).collect()
    }

    pub fn exact_multipliers(&self) -> Vec<f64> {
        self.skeleton.exact_cell_means(&self.case)
    }

    pub fn broken_h1_error(&self, u_blocks: &[Vec<f64>]) -> f64 {
        norms::broken_h1_error(&self.meshes, u_blocks, &self.case)
    }

    pub fn max_nodal_error(&self, u_blocks: &[Vec<f64>]) -> f64 {
        norms::max_nodal_error(&self.meshes, u_blocks, &self.case)
    }

    pub fn multiplier_error(&self, lambda: &[f64]) -> f64 {
        norms::multiplier_error(&self.skeleton, lambda, &self.case)
    }
}

fn chain_geometry(cfg: &ScenarioConfig) -> Result<(Vec<SubdomainMesh>, Vec<SkeletonInterface>)> {
    let b = cfg.chain_breaks();
    let k = b.len() - 1;
    let mut meshes = Vec::with_capacity(k);
    for i in 0..k {
        let n = element_count(b[i + 1] - b[i], cfg.h)?;
        let mut traces = Vec::new();
        if i > 0 {
            traces.push(InterfaceTrace { interface: i - 1, vertices: vec![0] });
        }
        if i + 1 < k {
            traces.push(InterfaceTrace { interface: i, vertices: vec![n] });
        }
        let mesh = SubdomainMesh::segment([b[i], 0.0], [b[i + 1], 0.0], n, i == 0, i + 1 == k)?
            .with_interfaces(traces)?;
        meshes.push(mesh);
    }
    let interfaces = (0..k - 1)
        .map(|i| SkeletonInterface {
            lo: i,
            hi: i + 1,
            shape: InterfaceShape::Point([b[i + 1], 0.0]),
            normal_lo: [1.0, 0.0],
            normal_hi: [-1.0, 0.0],
            flux_side: FluxSide::Lo,
        })
        .collect();
    Ok((meshes, interfaces))
}

fn grid_geometry(cfg: &ScenarioConfig) -> Result<(Vec<SubdomainMesh>, Vec<SkeletonInterface>)> {
    let (m, n) = (cfg.subdomains[0], cfg.subdomains[1]);
    let nx = element_count(1.0 / m as f64, cfg.h)?;
    let ny = element_count(1.0 / n as f64, cfg.h)?;
    let id = |i: usize, j: usize| j * m + i;
    let vid = |a: usize, b: usize| b * (nx + 1) + a;
    let mut interfaces = Vec::new();
    let mut traces: Vec<Vec<InterfaceTrace>> = vec![Vec::new(); m * n];
    let xs = |i: usize| i as f64 / m as f64;
    let ys = |j: usize| j as f64 / n as f64;
    for j in 0..n {
        for i in 0..m {
            if i + 1 < m {
                let f = interfaces.len();
                interfaces.push(SkeletonInterface {
                    lo: id(i, j),
                    hi: id(i + 1, j),
                    shape: InterfaceShape::Segment {
                        a: [xs(i + 1), ys(j)],
                        b: [xs(i + 1), ys(j + 1)],
                        cells: cell_count(ny, cfg.ratio),
                    },
                    normal_lo: [1.0, 0.0],
                    normal_hi: [-1.0, 0.0],
                    flux_side: FluxSide::Lo,
                });
                traces[id(i, j)]
                    .push(InterfaceTrace { interface: f, vertices: (0..=ny).map(|b| vid(nx, b)).collect() });
                traces[id(i + 1, j)]
                    .push(InterfaceTrace { interface: f, vertices: (0..=ny).map(|b| vid(0, b)).collect() });
            }
            if j + 1 < n {
                let f = interfaces.len();
                interfaces.push(SkeletonInterface {
                    lo: id(i, j),
                    hi: id(i, j + 1),
                    shape: InterfaceShape::Segment {
                        a: [xs(i), ys(j + 1)],
                        b: [xs(i + 1), ys(j + 1)],
                        cells: cell_count(nx, cfg.ratio),
                    },
                    normal_lo: [0.0, 1.0],
                    normal_hi: [0.0, -1.0],
                    flux_side: FluxSide::Lo,
                });
                traces[id(i, j)]
                    .push(InterfaceTrace { interface: f, vertices: (0..=nx).map(|a| vid(a, ny)).collect() });
                traces[id(i, j + 1)]
                    .push(InterfaceTrace { interface: f, vertices: (0..=nx).map(|a| vid(a, 0)).collect() });
            }
        }
    }
    let mut meshes = Vec::with_capacity(m * n);
    for (k, t) in traces.into_iter().enumerate() {
        let (i, j) = (k % m, k / m);
        let mesh = SubdomainMesh::rectangle(xs(i), xs(i + 1), ys(j), ys(j + 1), nx, ny)?;
        let dirichlet = (0..=ny)
            .flat_map(|b| (0..=nx).map(move |a| (a, b)))
            .map(|(a, b)| {
                (i == 0 && a == 0) || (i + 1 == m && a == nx) || (j == 0 && b == 0) || (j + 1 == n && b == ny)
            })
            .collect();
        meshes.push(mesh.with_dirichlet(dirichlet)?.with_interfaces(t)?);
    }
    Ok((meshes, interfaces))
}

fn star_segments(cfg: &ScenarioConfig) -> Result<Vec<FractureSegment>> {
    let junction = cfg.junction.unwrap_or([0.0, 0.0]);
    let configs = if cfg.segments.is_empty() {
        [[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]
            .into_iter()
            .map(|outer| SegmentConfig { outer, junction: None, load: 1.0 })
            .collect()
    } else {
        cfg.segments.clone()
    };
    let tol = tolerances::GEOMETRY * 10.0;
    configs
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if let Some(j) = s.junction {
                if distance(j, junction) > tol {
                    return Err(FemError::config(
                        "segments",
                        format!("segment {k} ends at {j:?}, not at the junction {junction:?}"),
                    ));
                }
            }
            if distance(s.outer, junction) <= tol {
                return Err(FemError::config("segments", format!("segment {k} has zero length")));
            }
            if !s.load.is_finite() {
                return Err(FemError::config("segments", format!("segment {k} has a non-finite load")));
            }
            let load = if cfg.case == CaseId::Zero { 0.0 } else { s.load };
            Ok(FractureSegment { outer: s.outer, junction, load })
        })
        .collect()
}

fn star_geometry(
    cfg: &ScenarioConfig,
    segments: &[FractureSegment],
) -> Result<(Vec<SubdomainMesh>, Vec<SkeletonInterface>)> {
    let mut meshes = Vec::with_capacity(3);
    for (k, s) in segments.iter().enumerate() {
        let n = element_count(s.length(), cfg.h)?;
        let traces = match k {
            0 => vec![InterfaceTrace { interface: 0, vertices: vec![n] }],
            1 => vec![
                InterfaceTrace { interface: 0, vertices: vec![n] },
                InterfaceTrace { interface: 1, vertices: vec![n] },
            ],
            _ => vec![InterfaceTrace { interface: 1, vertices: vec![n] }],
        };
        meshes.push(SubdomainMesh::segment(s.outer, s.junction, n, true, false)?.with_interfaces(traces)?);
    }
    let outward = |s: &FractureSegment| {
        let l = s.length();
        [(s.junction[0] - s.outer[0]) / l, (s.junction[1] - s.outer[1]) / l]
    };
    let junction = segments[0].junction;
    // The middle segment carries both multipliers, so each exact multiplier
    // is read from the segment it alone touches.
    let interfaces = vec![
        SkeletonInterface {
            lo: 0,
            hi: 1,
            shape: InterfaceShape::Point(junction),
            normal_lo: outward(&segments[0]),
            normal_hi: outward(&segments[1]),
            flux_side: FluxSide::Lo,
        },
        SkeletonInterface {
            lo: 1,
            hi: 2,
            shape: InterfaceShape::Point(junction),
            normal_lo: outward(&segments[1]),
            normal_hi: outward(&segments[2]),
            flux_side: FluxSide::Hi,
        },
    ];
    Ok((meshes, interfaces))
}

pub fn build_scenario(config: &ScenarioConfig) -> Result<Scenario> {
    config.validate()?;
    let kappa = config.kappas()?;
    let (meshes, interfaces, case) = match config.kind {
        ScenarioKind::Chain1d => {
            let (meshes, interfaces) = chain_geometry(config)?;
            let case = match config.case {
                CaseId::Zero => ManufacturedCase::zero(kappa),
                CaseId::Quadratic => ManufacturedCase::quadratic_1d(kappa),
                CaseId::Cubic => ManufacturedCase::cubic_1d(kappa),
                _ => ManufacturedCase::linear_1d(kappa, &config.chain_breaks()),
            };
            (meshes, interfaces, case)
        }
        ScenarioKind::Grid2d => {
            let (meshes, interfaces) = grid_geometry(config)?;
            let case = match config.case {
                CaseId::Zero => ManufacturedCase::zero(kappa),
                CaseId::SinSin => ManufacturedCase::sin_sin_2d(kappa),
                _ => ManufacturedCase::linear_2d(kappa),
            };
            (meshes, interfaces, case)
        }
        ScenarioKind::FractureStar => {
            let segments = star_segments(config)?;
            let (meshes, interfaces) = star_geometry(config, &segments)?;
            (meshes, interfaces, ManufacturedCase::star(kappa, segments))
        }
    };
    let skeleton = SkeletonSpace::new(interfaces)?;
    let assembly = build_coupling(&meshes, &skeleton)?;

    // Dirichlet vertices on interface traces must pair to zero across sides.
    let mut boundary_trace = vec![0.0; skeleton.dim()];
    let mut boundary_scale = vec![0.0_f64; skeleton.dim()];
    for (k, entries) in assembly.dirichlet_traces.iter().enumerate() {
        for &(row, v, value) in entries {
            let c = value * case.u(k, meshes[k].vertices[v]);
            boundary_trace[row] += c;
            boundary_scale[row] = boundary_scale[row].max(c.abs());
        }
    }
    if let Some(row) = boundary_trace
        .iter()
        .zip(&boundary_scale)
        .position(|(r, s)| r.abs() > tolerances::RESIDUAL * s.max(1.0))
    {
        return Err(FemError::config(
            "case",
            format!("boundary data does not match across multiplier {row} (defect {:e})", boundary_trace[row]),
        ));
    }

    let mut subproblems = Vec::with_capacity(meshes.len());
    for (k, mesh) in meshes.iter().enumerate() {
        let local = LocalAssembly::new(mesh, k, &case);
        let solver = galerkin_pseudo_inverse(&local.stiffness, &local.kernel_basis)?;
        subproblems.push(
            LocalSubproblem::new(k, local.stiffness, local.load, local.kernel_basis, solver)?
                .with_dof_weights(local.dof_weights)?,
        );
    }
    let problem = CoupledProblem::new(subproblems, assembly.map, skeleton.multiplier_dofs())?;
    Ok(Scenario { config: config.clone(), meshes, skeleton, case, problem })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_dimensions() {
        let s = build_scenario(&ScenarioConfig::chain1d(2, 0.25, CaseId::Cubic)).unwrap();
        assert_eq!((s.problem.multiplier_dim(), s.problem.kernel_dim()), (1, 0));
        let s = build_scenario(&ScenarioConfig::chain1d(3, 1.0 / 6.0, CaseId::Quadratic)).unwrap();
        assert_eq!((s.problem.multiplier_dim(), s.problem.kernel_dim()), (2, 1));
    }

    #[test]
    fn grid_dimensions_follow_the_ratio() {
        let s = build_scenario(&ScenarioConfig::grid2d(2, 2, 1.0 / 12.0, CaseId::SinSin)).unwrap();
        // Four interfaces of 6 edges, 2 cells each at ratio 3.
        assert_eq!(s.problem.multiplier_dim(), 8);
        assert_eq!(s.problem.kernel_dim(), 0);
        let s = build_scenario(&ScenarioConfig::grid2d(3, 3, 1.0 / 6.0, CaseId::SinSin)).unwrap();
        assert_eq!(s.problem.kernel_dim(), 1);
        assert!((s.delta() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn star_has_two_junction_multipliers() {
        let s = build_scenario(&ScenarioConfig::fracture_star(0.25, vec![], vec![])).unwrap();
        assert_eq!((s.problem.multiplier_dim(), s.problem.kernel_dim()), (2, 0));
        let q = s.case.junction_fluxes().unwrap();
        let exact = s.exact_multipliers();
        assert!((exact[0] - q[0]).abs() < 1e-15 && (exact[1] + q[2]).abs() < 1e-15);
    }

    #[test]
    fn bad_fields_are_reported() {
        let mut c = ScenarioConfig::chain1d(2, 0.3, CaseId::Cubic);
        assert!(matches!(build_scenario(&c), Err(FemError::ConfigInvalid { ref field, .. }) if field == "h"));
        c.h = 0.25;
        c.kappa = vec![1.0, 2.0];
        assert!(matches!(build_scenario(&c), Err(FemError::ConfigInvalid { ref field, .. }) if field == "case"));
        c.case = CaseId::SinSin;
        c.kappa.clear();
        assert!(build_scenario(&c).is_err());
        let g = ScenarioConfig::grid2d(1, 1, 0.25, CaseId::SinSin);
        assert!(matches!(build_scenario(&g), Err(FemError::ConfigInvalid { ref field, .. }) if field == "subdomains"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"{"kind": "chain1d", "subdomains": [2], "h": 0.25, "case": "cubic", "bogus": 1}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(text).is_err());
    }
}
