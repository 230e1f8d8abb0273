//! Piecewise-constant multipliers on the skeleton and the signed trace
//! pairing with the P1 subdomain spaces.

use super::cases::ManufacturedCase;
use super::mesh::SubdomainMesh;
use super::quadrature::{lerp, line_rule};
use super::{distance, FemError, Point, Result};
use crate::coupling::{CouplingMap, MultiplierDof};
use crate::numerics::TripletBuilder;
use crate::tolerances;

#[derive(Debug, Clone, PartialEq)]
pub enum InterfaceShape {
    /// A single point multiplier.
    Point(Point),
    /// Straight segment from `a` to `b` split into `cells` equal P0 cells.
    Segment { a: Point, b: Point, cells: usize },
}

/// Which side's conormal flux defines the exact multiplier. It must be a
/// side whose boundary at the interface belongs to this interface alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FluxSide {
    Lo,
    Hi,
}

/// An interface between subdomains `lo < hi`. The multiplier orientation is
/// `+1` on `lo` and `−1` on `hi`, so the multiplier equals the conormal flux
/// `κ∇u·ν` with `ν` pointing from `lo` into `hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonInterface {
    pub lo: usize,
    pub hi: usize,
    pub shape: InterfaceShape,
    /// Outward unit normal of `lo` on the interface.
    pub normal_lo: Point,
    /// Outward unit normal of `hi` on the interface.
    pub normal_hi: Point,
    pub flux_side: FluxSide,
}

impl SkeletonInterface {
    pub fn cells(&self) -> usize {
        match self.shape {
            InterfaceShape::Point(_) => 1,
            InterfaceShape::Segment { cells, .. } => cells,
        }
    }

    pub fn length(&self) -> f64 {
        match self.shape {
            InterfaceShape::Point(_) => 0.0,
            InterfaceShape::Segment { a, b, .. } => distance(a, b),
        }
    }

    /// Parameter interval of cell `c`.
    pub fn cell_interval(&self, c: usize) -> (f64, f64) {
        let m = self.cells() as f64;
        (c as f64 / m, (c + 1) as f64 / m)
    }

    /// Length of cell `c`; 1 for point multipliers.
    pub fn cell_measure(&self) -> f64 {
        match self.shape {
            InterfaceShape::Point(_) => 1.0,
            InterfaceShape::Segment { .. } => self.length() / self.cells() as f64,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkeletonSpace {
    pub interfaces: Vec<SkeletonInterface>,
    offsets: Vec<usize>,
}

impl SkeletonSpace {
    pub fn new(interfaces: Vec<SkeletonInterface>) -> Result<Self> {
        let mut offsets = vec![0];
        for (i, f) in interfaces.iter().enumerate() {
            if f.lo >= f.hi {
                return Err(FemError::InterfaceMismatch(format!(
                    "interface {i} must join a lower to a higher subdomain ({} → {})",
                    f.lo, f.hi
                )));
            }
            if let InterfaceShape::Segment { a, b, cells } = f.shape {
                if cells == 0 || distance(a, b) <= 0.0 {
                    return Err(FemError::InterfaceMismatch(format!("interface {i} is empty")));
                }
            }
            offsets.push(offsets[i] + f.cells());
        }
        Ok(Self { interfaces, offsets })
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn index(&self, interface: usize, cell: usize) -> usize {
        self.offsets[interface] + cell
    }

    pub fn multiplier_dofs(&self) -> Vec<MultiplierDof> {
        self.interfaces
            .iter()
            .enumerate()
            .flat_map(|(i, f)| {
                let m = f.cell_measure();
                (0..f.cells()).map(move |c| MultiplierDof { interface: i, cell: c, measure: m, delta: m })
            })
            .collect()
    }

    /// Largest multiplier cell size over segment interfaces (0 without any).
    pub fn delta(&self) -> f64 {
        self.interfaces
            .iter()
            .filter(|f| matches!(f.shape, InterfaceShape::Segment { .. }))
            .map(|f| f.cell_measure())
            .fold(0.0, f64::max)
    }

    fn exact_flux(&self, f: &SkeletonInterface, case: &ManufacturedCase, p: Point) -> f64 {
        match f.flux_side {
            FluxSide::Lo => case.flux(f.lo, p, f.normal_lo),
            FluxSide::Hi => -case.flux(f.hi, p, f.normal_hi),
        }
    }

    /// Cell means of the exact multiplier, in multiplier numbering.
    pub fn exact_cell_means(&self, case: &ManufacturedCase) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for f in &self.interfaces {
            match f.shape {
                InterfaceShape::Point(p) => out.push(self.exact_flux(f, case, p)),
                InterfaceShape::Segment { a, b, .. } => {
                    const SUB: usize = 4;
                    for c in 0..f.cells() {
                        let (s0, s1) = f.cell_interval(c);
                        let mut mean = 0.0;
                        for j in 0..SUB {
                            let (t0, t1) = (
                                s0 + (s1 - s0) * j as f64 / SUB as f64,
                                s0 + (s1 - s0) * (j + 1) as f64 / SUB as f64,
                            );
                            for (t, w) in line_rule() {
                                let p = lerp(a, b, t0 + t * (t1 - t0));
                                mean += w * self.exact_flux(f, case, p) / SUB as f64;
                            }
                        }
                        out.push(mean);
                    }
                }
            }
        }
        out
    }
}

/// The coupling map plus the trace pairing of Dirichlet vertices, which must
/// cancel across each interface for the constraint `B·u = 0` to hold.
#[derive(Debug, Clone)]
pub struct CouplingAssembly {
    pub map: CouplingMap,
    /// Per subdomain: `(multiplier, vertex, value)` for Dirichlet vertices.
    pub dirichlet_traces: Vec<Vec<(usize, usize, f64)>>,
}

fn geometry_tolerance(meshes: &[SubdomainMesh]) -> f64 {
    let scale = meshes
        .iter()
        .flat_map(|m| m.vertices.iter())
        .fold(1.0_f64, |s, p| s.max(p[0].abs()).max(p[1].abs()));
    tolerances::GEOMETRY * scale * 10.0
}

/// Assembles `B_k` entries `(ν·ν^k)·∫ φ_v·μ_c` with exact integration of the
/// P1 trace against P0 cells.
pub fn build_coupling(meshes: &[SubdomainMesh], skeleton: &SkeletonSpace) -> Result<CouplingAssembly> {
    let tol = geometry_tolerance(meshes);
    let dim = skeleton.dim();
    let mut blocks = Vec::with_capacity(meshes.len());
    let mut dirichlet_traces = Vec::with_capacity(meshes.len());
    let mut seen = vec![[false; 2]; skeleton.interfaces.len()];

    for (k, mesh) in meshes.iter().enumerate() {
        let mut b = TripletBuilder::new(dim, mesh.dof_count());
        let mut boundary = Vec::new();
        let mut push = |row: usize, vertex: usize, value: f64| match mesh.dof_of(vertex) {
            Some(d) => b.push(row, d, value),
            None => boundary.push((row, vertex, value)),
        };
        for trace in &mesh.interfaces {
            let i = trace.interface;
            let f = skeleton.interfaces.get(i).ok_or_else(|| {
                FemError::InterfaceMismatch(format!("subdomain {k} references unknown interface {i}"))
            })?;
            let (sign, side) = if f.lo == k {
                (1.0, 0)
            } else if f.hi == k {
                (-1.0, 1)
            } else {
                return Err(FemError::InterfaceMismatch(format!(
                    "subdomain {k} is not adjacent to interface {i}"
                )));
            };
            if seen[i][side] {
                return Err(FemError::InterfaceMismatch(format!(
                    "interface {i} traced twice from subdomain {k}"
                )));
            }
            seen[i][side] = true;
            match f.shape {
                InterfaceShape::Point(p) => {
                    let [v] = trace.vertices[..] else {
                        return Err(FemError::InterfaceMismatch(format!(
                            "point interface {i} needs exactly one trace vertex on subdomain {k}"
                        )));
                    };
                    if distance(mesh.vertices[v], p) > tol {
                        return Err(FemError::InterfaceMismatch(format!(
                            "subdomain {k} trace vertex is {:e} away from point interface {i}",
                            distance(mesh.vertices[v], p)
                        )));
                    }
                    push(skeleton.index(i, 0), v, sign);
                }
                InterfaceShape::Segment { a, b: end, cells } => {
                    let len = distance(a, end);
                    let dir = [(end[0] - a[0]) / len, (end[1] - a[1]) / len];
                    let param: Vec<f64> = trace
                        .vertices
                        .iter()
                        .map(|&v| {
                            let q = mesh.vertices[v];
                            let rel = [q[0] - a[0], q[1] - a[1]];
                            let along = rel[0] * dir[0] + rel[1] * dir[1];
                            let off = (rel[0] * dir[1] - rel[1] * dir[0]).abs();
                            if off > tol || along < -tol || along > len + tol {
                                Err(FemError::InterfaceMismatch(format!(
                                    "subdomain {k} trace vertex {v} is off interface {i}"
                                )))
                            } else {
                                Ok(along / len)
                            }
                        })
                        .collect::<Result<_>>()?;
                    let covered: f64 = param.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
                    if (covered - 1.0).abs() > tol / len {
                        return Err(FemError::InterfaceMismatch(format!(
                            "subdomain {k} covers a fraction {covered} of interface {i}"
                        )));
                    }
                    for (w, vw) in param.windows(2).zip(trace.vertices.windows(2)) {
                        let (t0, t1, v0, v1) =
                            if w[0] <= w[1] { (w[0], w[1], vw[0], vw[1]) } else { (w[1], w[0], vw[1], vw[0]) };
                        let first = ((t0 * cells as f64).floor() as usize).min(cells - 1);
                        for c in first..cells {
                            let (s0, s1) = f.cell_interval(c);
                            if s0 >= t1 {
                                break;
                            }
                            let (lo, hi) = (s0.max(t0), s1.min(t1));
                            if hi <= lo {
                                continue;
                            }
                            let mid = 0.5 * (lo + hi);
                            let seg = len * (hi - lo);
                            let h1 = (mid - t0) / (t1 - t0);
                            let row = skeleton.index(i, c);
                            push(row, v0, sign * seg * (1.0 - h1));
                            push(row, v1, sign * seg * h1);
                        }
                    }
                }
            }
        }
        blocks.push(b.build());
        dirichlet_traces.push(boundary);
    }
    if let Some(i) = seen.iter().position(|s| !(s[0] && s[1])) {
        return Err(FemError::InterfaceMismatch(format!("interface {i} is missing a side")));
    }
    let map = CouplingMap::new(dim, blocks)?;
    Ok(CouplingAssembly { map, dirichlet_traces })
}
