//! Shape functions on the reference triangle and the isoparametric element map.
//!
//! Quadratic (6-node) elements use the node order `[v0, v1, v2, m01, m12, m20]`:
//! three corners followed by the mid-edge nodes of edges (v0,v1), (v1,v2),
//! (v2,v0). Linear (3-node) functions live on the corners only. Reference
//! coordinates are (xi, eta) with barycentric l0 = 1 - xi - eta, l1 = xi,
//! l2 = eta.

use crate::vec2::{Mat2, Vec2};

/// Values of the six quadratic shape functions at (xi, eta).
#[inline]
pub fn p2_values(xi: f64, eta: f64) -> [f64; 6] {
    let l0 = 1.0 - xi - eta;
    let l1 = xi;
    let l2 = eta;
    [
        l0 * (2.0 * l0 - 1.0),
        l1 * (2.0 * l1 - 1.0),
        l2 * (2.0 * l2 - 1.0),
        4.0 * l0 * l1,
        4.0 * l1 * l2,
        4.0 * l2 * l0,
    ]
}

/// Gradients of the six quadratic shape functions with respect to (xi, eta).
#[inline]
pub fn p2_gradients(xi: f64, eta: f64) -> [Vec2; 6] {
    let l0 = 1.0 - xi - eta;
    let l1 = xi;
    let l2 = eta;
    // dl0 = (-1,-1), dl1 = (1,0), dl2 = (0,1)
    [
        Vec2::new(1.0 - 4.0 * l0, 1.0 - 4.0 * l0),
        Vec2::new(4.0 * l1 - 1.0, 0.0),
        Vec2::new(0.0, 4.0 * l2 - 1.0),
        Vec2::new(4.0 * (l0 - l1), -4.0 * l1),
        Vec2::new(4.0 * l2, 4.0 * l1),
        Vec2::new(-4.0 * l2, 4.0 * (l0 - l2)),
    ]
}

/// Values of the three linear shape functions at (xi, eta).
#[inline]
pub fn p1_values(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

/// Gradients of the three linear shape functions (constant over the element).
#[inline]
pub fn p1_gradients() -> [Vec2; 3] {
    [Vec2::new(-1.0, -1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]
}

/// Isoparametric image of a reference point under the quadratic map with the
/// given physical node positions.
#[inline]
pub fn p2_map(nodes: &[Vec2; 6], xi: f64, eta: f64) -> Vec2 {
    let n = p2_values(xi, eta);
    let mut p = Vec2::ZERO;
    for a in 0..6 {
        p += n[a] * nodes[a];
    }
    p
}

/// Jacobian of the quadratic map at a reference point; column j holds the
/// derivative of the image with respect to reference coordinate j.
#[inline]
pub fn p2_jacobian(nodes: &[Vec2; 6], xi: f64, eta: f64) -> Mat2 {
    let g = p2_gradients(xi, eta);
    let mut j = Mat2::ZERO;
    for a in 0..6 {
        j += Mat2::outer(nodes[a], g[a]);
    }
    j
}

/// Inverts the quadratic map by Newton iteration: finds (xi, eta) with
/// `p2_map(nodes, xi, eta) = target`. Returns `None` when the iteration fails
/// to reduce the residual below `tol` (length units) within 20 steps.
///
/// The returned point may lie outside the reference triangle; callers decide
/// how much overshoot to accept.
pub fn p2_inverse_map(nodes: &[Vec2; 6], target: Vec2, tol: f64) -> Option<(f64, f64)> {
    // Affine initial guess from the corner triangle.
    let j0 = Mat2::from_cols(nodes[1] - nodes[0], nodes[2] - nodes[0]);
    if j0.det().abs() < 1e-300 {
        return None;
    }
    let g0 = j0.inverse().mul_vec(target - nodes[0]);
    let (mut xi, mut eta) = (g0.x, g0.y);
    for _ in 0..20 {
        let r = p2_map(nodes, xi, eta) - target;
        if r.norm() <= tol {
            return Some((xi, eta));
        }
        let j = p2_jacobian(nodes, xi, eta);
        if j.det().abs() < 1e-300 {
            return None;
        }
        let d = j.inverse().mul_vec(r);
        xi -= d.x;
        eta -= d.y;
        // Inverse iterations that wander far from the element never recover.
        if !(xi.is_finite() && eta.is_finite()) || xi.abs() + eta.abs() > 1e3 {
            return None;
        }
    }
    let r = p2_map(nodes, xi, eta) - target;
    (r.norm() <= tol).then_some((xi, eta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::TRI_QUADRATURE;

    fn straight_nodes(p0: Vec2, p1: Vec2, p2: Vec2) -> [Vec2; 6] {
        [
            p0,
            p1,
            p2,
            0.5 * (p0 + p1),
            0.5 * (p1 + p2),
            0.5 * (p2 + p0),
        ]
    }

    #[test]
    fn partition_of_unity_and_kronecker() {
        let ref_nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ];
        for (a, &(xi, eta)) in ref_nodes.iter().enumerate() {
            let n = p2_values(xi, eta);
            for (b, &nb) in n.iter().enumerate() {
                let expect = if a == b { 1.0 } else { 0.0 };
                assert!((nb - expect).abs() < 1e-15, "N{b}({xi},{eta}) = {nb}");
            }
        }
        for q in TRI_QUADRATURE {
            let n = p2_values(q.xi, q.eta);
            let s: f64 = n.iter().sum();
            assert!((s - 1.0).abs() < 1e-14);
            let g = p2_gradients(q.xi, q.eta);
            let gs = g.iter().fold(Vec2::ZERO, |acc, v| acc + *v);
            assert!(gs.norm() < 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (xi, eta) = (0.31, 0.24);
        let h = 1e-6;
        let g = p2_gradients(xi, eta);
        let vx1 = p2_values(xi + h, eta);
        let vx0 = p2_values(xi - h, eta);
        let vy1 = p2_values(xi, eta + h);
        let vy0 = p2_values(xi, eta - h);
        for a in 0..6 {
            assert!((g[a].x - (vx1[a] - vx0[a]) / (2.0 * h)).abs() < 1e-9);
            assert!((g[a].y - (vy1[a] - vy0[a]) / (2.0 * h)).abs() < 1e-9);
        }
    }

    #[test]
    fn straight_element_map_is_affine() {
        let nodes = straight_nodes(
            Vec2::new(1.0, 2.0),
            Vec2::new(3.0, 2.5),
            Vec2::new(1.5, 4.0),
        );
        let j_a = p2_jacobian(&nodes, 0.2, 0.3);
        let j_b = p2_jacobian(&nodes, 0.6, 0.1);
        assert!((j_a.m[0][0] - j_b.m[0][0]).abs() < 1e-13);
        assert!((j_a.m[1][1] - j_b.m[1][1]).abs() < 1e-13);
        // and equals the corner-edge matrix
        assert!((j_a.m[0][0] - 2.0).abs() < 1e-13);
        assert!((j_a.m[1][0] - 0.5).abs() < 1e-13);
    }

    #[test]
    fn quadratic_field_reproduced_exactly() {
        // A P2 interpolant of f(x,y) = x^2 + 2xy - y + 1 on a straight element
        // must reproduce f at arbitrary interior points.
        let nodes = straight_nodes(
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(0.0, 2.0),
        );
        let f = |p: Vec2| p.x * p.x + 2.0 * p.x * p.y - p.y + 1.0;
        let coef: Vec<f64> = nodes.iter().map(|&p| f(p)).collect();
        for &(xi, eta) in &[(0.3, 0.3), (0.1, 0.7), (0.45, 0.05)] {
            let n = p2_values(xi, eta);
            let val: f64 = (0..6).map(|a| coef[a] * n[a]).sum();
            let p = p2_map(&nodes, xi, eta);
            assert!((val - f(p)).abs() < 1e-13);
        }
    }

    #[test]
    fn inverse_map_roundtrip_on_curved_element() {
        // Curve one edge outward and invert the map at interior points.
        let mut nodes = straight_nodes(
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(0.0, 1.0),
        );
        nodes[4] = Vec2::new(0.58, 0.58); // bulge the hypotenuse midpoint
        for &(xi, eta) in &[(0.25, 0.25), (0.1, 0.6), (0.7, 0.2)] {
            let p = p2_map(&nodes, xi, eta);
            let (xi2, eta2) = p2_inverse_map(&nodes, p, 1e-13).expect("inverse");
            assert!((xi - xi2).abs() < 1e-10 && (eta - eta2).abs() < 1e-10);
        }
    }
}
