//! Integral and quality measurements on the deformed configuration.
//!
//! The tracked quantities of a run — particle centroid, solid area, mean solid
//! velocity — are integrals over the *deformed* solid region, i.e. over
//! elements whose nodes have been displaced by the current ALE map. Everything
//! here evaluates those integrals with the same degree-6 rule the assembly
//! uses, plus the deformed-mesh quality numbers that drive remesh decisions.

use crate::fem::quadrature::{P2_AT_QP, P2_GRAD_AT_QP, TRI_QUADRATURE};
use crate::fem::DofMap;
use crate::mesh::{triangle_min_angle_deg, QuadraticMesh};
use crate::vec2::{Mat2, Vec2};

/// The six node coordinates of element `e` displaced by the nodal field `disp`.
pub fn deformed_elem_coords(mesh: &QuadraticMesh, disp: &[Vec2], e: usize) -> [Vec2; 6] {
    let nodes = mesh.elem_nodes(e);
    let coords = mesh.elem_coords(e);
    std::array::from_fn(|i| coords[i] + disp[nodes[i]])
}

/// Area and centroid of the deformed solid region.
pub fn solid_area_centroid(mesh: &QuadraticMesh, disp: &[Vec2]) -> (f64, Vec2) {
    let mut area = 0.0;
    let mut moment = Vec2::ZERO;
    for e in 0..mesh.n_elems() {
        if !mesh.elems[e].is_solid() {
            continue;
        }
        let nodes = deformed_elem_coords(mesh, disp, e);
        for (q, qp) in TRI_QUADRATURE.iter().enumerate() {
            let mut jac = Mat2::ZERO;
            let mut pos = Vec2::ZERO;
            for i in 0..6 {
                jac += Mat2::outer(nodes[i], P2_GRAD_AT_QP[q][i]);
                pos += P2_AT_QP[q][i] * nodes[i];
            }
            let dv = qp.w * jac.det();
            area += dv;
            moment += dv * pos;
        }
    }
    (area, moment / area)
}

/// Centroid of the deformed solid region.
pub fn solid_centroid(mesh: &QuadraticMesh, disp: &[Vec2]) -> Vec2 {
    solid_area_centroid(mesh, disp).1
}

/// Area-weighted mean of a nodal P2 vector field over the deformed solid.
pub fn solid_mean_velocity(mesh: &QuadraticMesh, disp: &[Vec2], u: &[Vec2]) -> Vec2 {
    let mut area = 0.0;
    let mut total = Vec2::ZERO;
    for e in 0..mesh.n_elems() {
        if !mesh.elems[e].is_solid() {
            continue;
        }
        let ids = mesh.elem_nodes(e);
        let nodes = deformed_elem_coords(mesh, disp, e);
        for (q, qp) in TRI_QUADRATURE.iter().enumerate() {
            let mut jac = Mat2::ZERO;
            let mut val = Vec2::ZERO;
            for i in 0..6 {
                jac += Mat2::outer(nodes[i], P2_GRAD_AT_QP[q][i]);
                val += P2_AT_QP[q][i] * u[ids[i]];
            }
            let dv = qp.w * jac.det();
            area += dv;
            total += dv * val;
        }
    }
    total / area
}

/// Largest Frobenius-norm deviation of the conformation tensor from the
/// identity over all solid vertices — the rigidity measure of a run.
pub fn max_b_deviation(dm: &DofMap, mesh: &QuadraticMesh, x: &[f64]) -> f64 {
    let mut worst: f64 = 0.0;
    for v in 0..mesh.n_vertices() {
        if dm.b(v).is_some() {
            worst = worst.max((dm.b_at(x, v) - Mat2::IDENTITY).norm());
        }
    }
    worst
}

/// Net outward flux of the nodal P2 field `u` through the deformed boundary
/// facets carrying `tag` (all facets when `tag` is `None`). Boundary edges
/// are quadratic curves; a 3-point Gauss rule integrates the (cubic) flux
/// integrand exactly. Outward orientation is resolved against the adjacent
/// element's centroid.
pub fn boundary_flux(
    mesh: &QuadraticMesh,
    disp: &[Vec2],
    u: &[Vec2],
    tag: Option<usize>,
) -> f64 {
    // adjacent element of each boundary edge
    let mut edge_elem = vec![usize::MAX; mesh.n_edges()];
    for e in 0..mesh.n_elems() {
        for &k in &mesh.elems[e].e {
            edge_elem[k] = e;
        }
    }
    // 3-point Gauss on [0, 1]
    let g = (0.15_f64).sqrt();
    let pts = [(0.5 - g, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + g, 5.0 / 18.0)];

    let nv = mesh.n_vertices();
    let mut flux = 0.0;
    for facet in &mesh.boundary {
        if tag.is_some_and(|t| facet.tag != t) {
            continue;
        }
        let [a, b] = mesh.edges[facet.edge];
        let m = nv + facet.edge;
        let p = [
            mesh.node_coord(a) + disp[a],
            mesh.node_coord(b) + disp[b],
            mesh.node_coord(m) + disp[m],
        ];
        let uu = [u[a], u[b], u[m]];
        // outward = away from the adjacent element's straight centroid
        let e = edge_elem[facet.edge];
        let c = deformed_elem_coords(mesh, disp, e);
        let centroid = (c[0] + c[1] + c[2]) / 3.0;
        let mid = p[2];
        let tangent_mid = p[1] - p[0];
        let sign = if tangent_mid.perp().dot(mid - centroid) >= 0.0 {
            1.0
        } else {
            -1.0
        };
        for (s, w) in pts {
            // 1d quadratic shapes on [0, 1] in order (a, b, mid)
            let n = [(1.0 - s) * (1.0 - 2.0 * s), s * (2.0 * s - 1.0), 4.0 * s * (1.0 - s)];
            let dn = [4.0 * s - 3.0, 4.0 * s - 1.0, 4.0 - 8.0 * s];
            let mut val = Vec2::ZERO;
            let mut tan = Vec2::ZERO;
            for i in 0..3 {
                val += n[i] * uu[i];
                tan += dn[i] * p[i];
            }
            // perp(tangent) carries the arclength factor
            flux += w * sign * val.dot(tan.perp());
        }
    }
    flux
}

/// Quality of the mesh displaced by `disp`.
#[derive(Debug, Clone, Copy)]
pub struct MeshQuality {
    /// Smallest corner angle (degrees) over the straight corner triangles.
    pub min_angle_deg: f64,
    /// Smallest over elements of (min quadrature-point Jacobian determinant)
    /// divided by the element's mean determinant; <= 0 flags inversion.
    pub min_detj_ratio: f64,
    pub worst_elem: usize,
}

/// Measures angle and Jacobian-uniformity quality of the deformed mesh.
pub fn deformed_quality(mesh: &QuadraticMesh, disp: &[Vec2]) -> MeshQuality {
    let mut min_angle = f64::INFINITY;
    let mut min_ratio = f64::INFINITY;
    let mut worst = 0;
    for e in 0..mesh.n_elems() {
        let nodes = deformed_elem_coords(mesh, disp, e);
        let angle = triangle_min_angle_deg(nodes[0], nodes[1], nodes[2]);
        min_angle = min_angle.min(angle);
        let mut lo = f64::INFINITY;
        let mut sum = 0.0;
        for q in 0..TRI_QUADRATURE.len() {
            let mut jac = Mat2::ZERO;
            for i in 0..6 {
                jac += Mat2::outer(nodes[i], P2_GRAD_AT_QP[q][i]);
            }
            let d = jac.det();
            lo = lo.min(d);
            sum += d;
        }
        let mean = sum / TRI_QUADRATURE.len() as f64;
        let ratio = if mean > 0.0 { lo / mean } else { -1.0 };
        if ratio < min_ratio {
            min_ratio = ratio;
            worst = e;
        }
    }
    MeshQuality {
        min_angle_deg: min_angle,
        min_detj_ratio: min_ratio,
        worst_elem: worst,
    }
}
