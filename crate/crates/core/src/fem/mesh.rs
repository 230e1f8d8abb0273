use super::{distance, FemError, Point, Result};

/// Vertices of a subdomain boundary lying on one skeleton interface. Point
/// interfaces have a single vertex; segment interfaces list the trace
/// vertices in order along the interface.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceTrace {
    pub interface: usize,
    pub vertices: Vec<usize>,
}

/// A conforming P1 mesh of one subdomain: line elements (`dim = 1`, possibly
/// embedded in the plane) or triangles (`dim = 2`).
#[derive(Debug, Clone)]
pub struct SubdomainMesh {
    pub dim: usize,
    pub vertices: Vec<Point>,
    pub elements: Vec<Vec<usize>>,
    pub dirichlet: Vec<bool>,
    pub interfaces: Vec<InterfaceTrace>,
    /// Nominal mesh size.
    pub h: f64,
    dof_of: Vec<Option<usize>>,
    dof_vertex: Vec<usize>,
}

impl SubdomainMesh {
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        elements: Vec<Vec<usize>>,
        dirichlet: Vec<bool>,
        interfaces: Vec<InterfaceTrace>,
        h: f64,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(FemError::InvalidMesh(format!("dimension {dim}")));
        }
        if dirichlet.len() != vertices.len() {
            return Err(FemError::InvalidMesh("one Dirichlet flag per vertex required".into()));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(FemError::InvalidMesh(format!("mesh size {h}")));
        }
        for (e, el) in elements.iter().enumerate() {
            if el.len() != dim + 1 || el.iter().any(|&v| v >= vertices.len()) {
                return Err(FemError::InvalidMesh(format!("element {e} has bad connectivity")));
            }
        }
        let mut tagged_edges = std::collections::HashSet::new();
        for t in &interfaces {
            if t.vertices.is_empty() || t.vertices.iter().any(|&v| v >= vertices.len()) {
                return Err(FemError::InvalidMesh(format!("bad trace for interface {}", t.interface)));
            }
            if dim == 2 {
                for w in t.vertices.windows(2) {
                    if !tagged_edges.insert((w[0].min(w[1]), w[0].max(w[1]))) {
                        return Err(FemError::InvalidMesh(format!(
                            "edge ({}, {}) tagged with more than one interface",
                            w[0], w[1]
                        )));
                    }
                }
            }
        }
        let mut dof_of = vec![None; vertices.len()];
        let mut dof_vertex = Vec::new();
        for (v, &d) in dirichlet.iter().enumerate() {
            if !d {
                dof_of[v] = Some(dof_vertex.len());
                dof_vertex.push(v);
            }
        }
        let mesh = Self { dim, vertices, elements, dirichlet, interfaces, h, dof_of, dof_vertex };
        for e in 0..mesh.elements.len() {
            let m = mesh.signed_measure(e);
            if !(m > 0.0) {
                return Err(FemError::DegenerateElement { element: e, measure: m });
            }
        }
        Ok(mesh)
    }

    /// Uniform mesh of the segment from `a` to `b` with `n` elements.
    pub fn segment(a: Point, b: Point, n: usize, dirichlet_a: bool, dirichlet_b: bool) -> Result<Self> {
        if n == 0 {
            return Err(FemError::InvalidMesh("segment with no elements".into()));
        }
        let vertices: Vec<Point> =
            (0..=n).map(|i| super::quadrature::lerp(a, b, i as f64 / n as f64)).collect();
        let elements = (0..n).map(|e| vec![e, e + 1]).collect();
        let mut dirichlet = vec![false; n + 1];
        dirichlet[0] = dirichlet_a;
        dirichlet[n] = dirichlet_b;
        Self::new(1, vertices, elements, dirichlet, Vec::new(), distance(a, b) / n as f64)
    }

    /// Structured triangulation of `[x0,x1]×[y0,y1]` with `nx×ny` cells, each
    /// split along its lower-left to upper-right diagonal. Vertex `(a, b)` has
    /// index `b·(nx+1) + a`.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(FemError::InvalidMesh("rectangle with no cells".into()));
        }
        let id = |a: usize, b: usize| b * (nx + 1) + a;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
        for b in 0..=ny {
            for a in 0..=nx {
                vertices.push([
                    x0 + (x1 - x0) * a as f64 / nx as f64,
                    y0 + (y1 - y0) * b as f64 / ny as f64,
                ]);
            }
        }
        let mut elements = Vec::with_capacity(2 * nx * ny);
        for b in 0..ny {
            for a in 0..nx {
                elements.push(vec![id(a, b), id(a + 1, b), id(a + 1, b + 1)]);
                elements.push(vec![id(a, b), id(a + 1, b + 1), id(a, b + 1)]);
            }
        }
        let h = ((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64);
        let n = vertices.len();
        Self::new(2, vertices, elements, vec![false; n], Vec::new(), h)
    }

    pub fn with_dirichlet(self, dirichlet: Vec<bool>) -> Result<Self> {
        Self::new(self.dim, self.vertices, self.elements, dirichlet, self.interfaces, self.h)
    }

    pub fn with_interfaces(self, interfaces: Vec<InterfaceTrace>) -> Result<Self> {
        Self::new(self.dim, self.vertices, self.elements, self.dirichlet, interfaces, self.h)
    }

    pub fn dof_count(&self) -> usize {
        self.dof_vertex.len()
    }

    pub fn dof_of(&self, vertex: usize) -> Option<usize> {
        self.dof_of[vertex]
    }

    pub fn dof_vertex(&self, dof: usize) -> usize {
        self.dof_vertex[dof]
    }

    pub fn has_dirichlet(&self) -> bool {
        self.dirichlet.iter().any(|&d| d)
    }

    pub fn element_vertices(&self, e: usize) -> Vec<Point> {
        self.elements[e].iter().map(|&v| self.vertices[v]).collect()
    }

    /// Length or signed area of element `e`.
    pub fn signed_measure(&self, e: usize) -> f64 {
        let p = self.element_vertices(e);
        if self.dim == 1 {
            distance(p[0], p[1])
        } else {
            0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
        }
    }

    /// Gradients of the element's P1 basis functions (constant per element).
    pub fn basis_gradients(&self, e: usize) -> Vec<Point> {
        let p = self.element_vertices(e);
        if self.dim == 1 {
            let len = distance(p[0], p[1]);
            let t = [(p[1][0] - p[0][0]) / len, (p[1][1] - p[0][1]) / len];
            vec![[-t[0] / len, -t[1] / len], [t[0] / len, t[1] / len]]
        } else {
            let two_area = 2.0 * self.signed_measure(e);
            (0..3)
                .map(|i| {
                    let a = p[(i + 1) % 3];
                    let b = p[(i + 2) % 3];
                    [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area]
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_has_positive_triangles() {
        let m = SubdomainMesh::rectangle(0.0, 1.0, 0.0, 0.5, 4, 2).unwrap();
        assert_eq!(m.elements.len(), 16);
        let total: f64 = (0..16).map(|e| m.signed_measure(e)).sum();
        assert!((total - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inverted_triangle_is_degenerate() {
        let err = SubdomainMesh::new(
            2,
            vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
            vec![vec![0, 2, 1]],
            vec![false; 3],
            Vec::new(),
            1.0,
        )
        .unwrap_err();
        assert!(matches!(err, FemError::DegenerateElement { element: 0, .. }));
    }

    #[test]
    fn basis_gradients_sum_to_zero() {
        let m = SubdomainMesh::rectangle(0.0, 1.0, 0.0, 1.0, 2, 3).unwrap();
        for e in 0..m.elements.len() {
            let g = m.basis_gradients(e);
            let s = [g.iter().map(|v| v[0]).sum::<f64>(), g.iter().map(|v| v[1]).sum::<f64>()];
            assert!(s[0].abs() < 1e-12 && s[1].abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_vertices_are_not_dofs() {
        let m = SubdomainMesh::segment([0.0, 0.0], [0.5, 0.0], 2, true, false).unwrap();
        assert_eq!(m.dof_count(), 2);
        assert_eq!(m.dof_of(0), None);
        assert_eq!(m.dof_of(1), Some(0));
        assert_eq!(m.dof_vertex(1), 2);
    }
}
