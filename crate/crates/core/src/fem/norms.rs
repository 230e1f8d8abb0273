use super::cases::ManufacturedCase;
use super::mesh::SubdomainMesh;
use super::quadrature::{barycentric_point, lerp, line_rule, triangle_rule};
use super::skeleton::SkeletonSpace;

/// Nodal interpolant of the exact solution on the free dofs of subdomain `k`.
pub fn nodal_values(mesh: &SubdomainMesh, k: usize, case: &ManufacturedCase) -> Vec<f64> {
    (0..mesh.dof_count()).map(|d| case.u(k, mesh.vertices[mesh.dof_vertex(d)])).collect()
}

/// Vertex values of the discrete solution, Dirichlet vertices taking the
/// exact boundary data.
fn vertex_values(mesh: &SubdomainMesh, k: usize, u: &[f64], case: &ManufacturedCase) -> Vec<f64> {
    (0..mesh.vertices.len())
        .map(|v| match mesh.dof_of(v) {
            Some(d) => u[d],
            None => case.u(k, mesh.vertices[v]),
        })
        .collect()
}

/// `sqrt(Σ_k |u − u_h|²_{H¹(Ω_k)})`.
pub fn broken_h1_error(meshes: &[SubdomainMesh], u_blocks: &[Vec<f64>], case: &ManufacturedCase) -> f64 {
    let mut total = 0.0;
    for (k, (mesh, u)) in meshes.iter().zip(u_blocks).enumerate() {
        let vals = vertex_values(mesh, k, u, case);
        for (e, el) in mesh.elements.iter().enumerate() {
            let grads = mesh.basis_gradients(e);
            let mut gh = [0.0, 0.0];
            for (v, g) in el.iter().zip(&grads) {
                gh[0] += vals[*v] * g[0];
                gh[1] += vals[*v] * g[1];
            }
            let p = mesh.element_vertices(e);
            let m = mesh.signed_measure(e);
            let sq = |q| {
                let g = case.grad(k, q);
                (g[0] - gh[0]).powi(2) + (g[1] - gh[1]).powi(2)
            };
            total += if mesh.dim == 1 {
                line_rule().into_iter().map(|(t, w)| m * w * sq(lerp(p[0], p[1], t))).sum::<f64>()
            } else {
                triangle_rule()
                    .into_iter()
                    .map(|(l, w)| m * w * sq(barycentric_point([p[0], p[1], p[2]], l)))
                    .sum::<f64>()
            };
        }
    }
    total.sqrt()
}

/// Largest nodal deviation from the exact solution over all free dofs.
pub fn max_nodal_error(meshes: &[SubdomainMesh], u_blocks: &[Vec<f64>], case: &ManufacturedCase) -> f64 {
    meshes
        .iter()
        .zip(u_blocks)
        .enumerate()
        .flat_map(|(k, (mesh, u))| {
            nodal_values(mesh, k, case).into_iter().zip(u).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max)
}

/// `sqrt(Σ_cells δ_cell·(λ_δ − cell mean of exact λ)²)`, with unit weight
/// for point multipliers.
pub fn multiplier_error(skeleton: &SkeletonSpace, lambda: &[f64], case: &ManufacturedCase) -> f64 {
    skeleton
        .multiplier_dofs()
        .iter()
        .zip(lambda)
        .zip(skeleton.exact_cell_means(case))
        .map(|((dof, l), exact)| dof.delta * (l - exact).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolant_of_linear_is_exact() {
        let m = SubdomainMesh::rectangle(0.0, 1.0, 0.0, 1.0, 3, 3).unwrap();
        let m = m.clone().with_dirichlet((0..16).map(|v| v % 4 == 0).collect()).unwrap();
        let case = ManufacturedCase::linear_2d(vec![1.0]);
        let u = nodal_values(&m, 0, &case);
        assert!(broken_h1_error(std::slice::from_ref(&m), std::slice::from_ref(&u), &case) < 1e-12);
        assert_eq!(max_nodal_error(&[m], &[u], &case), 0.0);
    }

    #[test]
    fn error_is_homogeneous() {
        let m = SubdomainMesh::segment([0.0, 0.0], [1.0, 0.0], 4, true, true).unwrap();
        let case = ManufacturedCase::cubic_1d(vec![1.0]);
        let zero = vec![vec![0.0; 3]];
        let e1 = broken_h1_error(std::slice::from_ref(&m), &zero, &case);
        let e3 = broken_h1_error(&[m], &zero, &case.scaled(-3.0));
        assert!((e3 - 3.0 * e1).abs() < 1e-14 * e3);
        // |u|_{H¹}² = ∫ ((1 − 3x²)/6)² = 1/45.
        assert!((e1 - (1.0f64 / 45.0).sqrt()).abs() < 1e-12);
    }
}
