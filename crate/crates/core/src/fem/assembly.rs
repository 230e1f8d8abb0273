use super::cases::ManufacturedCase;
use super::mesh::SubdomainMesh;
use super::quadrature::{barycentric_point, lerp, line_rule, triangle_rule};
use crate::numerics::{DenseMatrix, SparseMatrix, TripletBuilder};

/// P1 stiffness over all vertices, Dirichlet vertices included.
pub fn full_stiffness(mesh: &SubdomainMesh, kappa: f64) -> SparseMatrix {
    let n = mesh.vertices.len();
    let mut b = TripletBuilder::new(n, n);
    for (e, el) in mesh.elements.iter().enumerate() {
        let grads = mesh.basis_gradients(e);
        let scale = kappa * mesh.signed_measure(e);
        for (i, gi) in el.iter().zip(&grads) {
            for (j, gj) in el.iter().zip(&grads) {
                b.push(*i, *j, scale * (gi[0] * gj[0] + gi[1] * gj[1]));
            }
        }
    }
    b.build()
}

fn restrict_to_dofs(mesh: &SubdomainMesh, full: &SparseMatrix) -> SparseMatrix {
    let n = mesh.dof_count();
    let mut b = TripletBuilder::new(n, n);
    for i in 0..n {
        for (vj, v) in full.row(mesh.dof_vertex(i)) {
            if let Some(j) = mesh.dof_of(vj) {
                b.push(i, j, v);
            }
        }
    }
    b.build()
}

/// Stiffness on the free dofs and the kernel basis: the constant vector when
/// the subdomain has no Dirichlet vertex, empty otherwise.
pub fn assemble_local(mesh: &SubdomainMesh, kappa: f64) -> (SparseMatrix, DenseMatrix) {
    let a = restrict_to_dofs(mesh, &full_stiffness(mesh, kappa));
    let n = mesh.dof_count();
    let kernel = if mesh.has_dirichlet() {
        DenseMatrix::zeros(n, 0)
    } else {
        DenseMatrix::from_columns(n, &[vec![1.0; n]])
    };
    (a, kernel)
}

/// `∫ f·φ_i` on the free dofs, minus the stiffness coupling to the Dirichlet
/// values `u(x_d)` of the case.
pub fn assemble_load(mesh: &SubdomainMesh, k: usize, case: &ManufacturedCase) -> Vec<f64> {
    let mut full = vec![0.0; mesh.vertices.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        let p = mesh.element_vertices(e);
        let m = mesh.signed_measure(e);
        if mesh.dim == 1 {
            for (t, w) in line_rule() {
                let f = case.source(k, lerp(p[0], p[1], t));
                full[el[0]] += m * w * f * (1.0 - t);
                full[el[1]] += m * w * f * t;
            }
        } else {
            for (l, w) in triangle_rule() {
                let f = case.source(k, barycentric_point([p[0], p[1], p[2]], l));
                for i in 0..3 {
                    full[el[i]] += m * w * f * l[i];
                }
            }
        }
    }
    let g: Vec<f64> = mesh
        .vertices
        .iter()
        .zip(&mesh.dirichlet)
        .map(|(p, &d)| if d { case.u(k, *p) } else { 0.0 })
        .collect();
    let lift = full_stiffness(mesh, case.kappa(k)).matvec(&g);
    (0..mesh.dof_count())
        .map(|i| {
            let v = mesh.dof_vertex(i);
            full[v] - lift[v]
        })
        .collect()
}

/// Lumped mass of each free dof divided by `h^dim`.
pub fn lumped_dof_weights(mesh: &SubdomainMesh) -> Vec<f64> {
    let mut lumped = vec![0.0; mesh.vertices.len()];
    for (e, el) in mesh.elements.iter().enumerate() {
        let share = mesh.signed_measure(e) / el.len() as f64;
        for &v in el {
            lumped[v] += share;
        }
    }
    let scale = mesh.h.powi(mesh.dim as i32);
    (0..mesh.dof_count()).map(|i| lumped[mesh.dof_vertex(i)] / scale).collect()
}

/// Everything a local subproblem needs from the mesh.
#[derive(Debug, Clone)]
pub struct LocalAssembly {
    pub stiffness: SparseMatrix,
    pub kernel_basis: DenseMatrix,
    pub load: Vec<f64>,
    pub dof_weights: Vec<f64>,
}

impl LocalAssembly {
    pub fn new(mesh: &SubdomainMesh, k: usize, case: &ManufacturedCase) -> Self {
        let (stiffness, kernel_basis) = assemble_local(mesh, case.kappa(k));
        Self {
            stiffness,
            kernel_basis,
            load: assemble_load(mesh, k, case),
            dof_weights: lumped_dof_weights(mesh),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_interval_with_left_dirichlet() {
        let m = SubdomainMesh::segment([0.0, 0.0], [0.5, 0.0], 2, true, false).unwrap();
        let (a, k) = assemble_local(&m, 1.0);
        let d = a.to_dense();
        assert_eq!(d, DenseMatrix::from_rows(&[&[8.0, -4.0], &[-4.0, 4.0]]));
        assert_eq!(k.cols(), 0);
    }

    #[test]
    fn floating_interval_has_constant_kernel() {
        let m = SubdomainMesh::segment([0.0, 0.0], [1.0, 0.0], 5, false, false).unwrap();
        let (a, k) = assemble_local(&m, 1.0);
        for s in a.matvec(&[1.0; 6]) {
            assert!(s.abs() < 1e-12);
        }
        assert_eq!(k.cols(), 1);
    }

    #[test]
    fn stiffness_is_linear_in_kappa() {
        let m = SubdomainMesh::rectangle(0.0, 0.5, 0.0, 0.5, 3, 3).unwrap();
        let (a1, _) = assemble_local(&m, 1.0);
        let (a2, _) = assemble_local(&m, 2.0);
        assert_eq!(a1.scaled(2.0), a2);
    }

    #[test]
    fn unit_square_laplacian_rows() {
        let m = SubdomainMesh::rectangle(0.0, 1.0, 0.0, 1.0, 2, 2).unwrap();
        let a = full_stiffness(&m, 1.0);
        // Centre vertex of the diagonal-split mesh: 4 on the diagonal, −1 to
        // the four axis neighbours.
        assert!((a.get(4, 4) - 4.0).abs() < 1e-14);
        for nb in [1, 3, 5, 7] {
            assert!((a.get(4, nb) + 1.0).abs() < 1e-14);
        }
        assert!(a.get(4, 0).abs() < 1e-14 && a.get(4, 8).abs() < 1e-14);
    }

    #[test]
    fn lumped_weights_are_one_inside() {
        let m = SubdomainMesh::rectangle(0.0, 1.0, 0.0, 1.0, 4, 4).unwrap();
        let w = lumped_dof_weights(&m);
        assert!((w[12] - 1.0).abs() < 1e-14);
        let total: f64 = w.iter().sum::<f64>() * m.h * m.h;
        assert!((total - 1.0).abs() < 1e-14);
    }
}
