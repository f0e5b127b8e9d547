//! Discrete ALE map support.
//!
//! The solver never moves the mesh: the domain motion is a displacement field
//! `a` on the fixed reference mesh, and every integral sees it only through
//! the deformation gradient `F = I + grad a`, its inverse transpose, and its
//! determinant, sampled at quadrature points. This module computes and caches
//! those per-quadrature-point quantities and provides the health probes
//! (Jacobian range) used to decide when the map has degraded enough to
//! trigger a remesh.

use crate::fem::quadrature::N_QP;
use crate::fem::GeometryCache;
use crate::mesh::QuadraticMesh;
use crate::vec2::{Mat2, Vec2};

#[derive(Debug, thiserror::Error)]
pub enum AleError {
    #[error("ALE map tangled in element {elem}: det F = {jac:.3e}")]
    Tangled { elem: usize, jac: f64 },
}

/// Per-quadrature-point ALE map data.
#[derive(Clone, Copy)]
pub struct QpMap {
    /// Inverse transpose of the deformation gradient.
    pub f_inv_t: Mat2,
    /// Determinant of the deformation gradient.
    pub jac: f64,
}

impl QpMap {
    pub const IDENTITY: QpMap = QpMap {
        f_inv_t: Mat2::IDENTITY,
        jac: 1.0,
    };
}

/// ALE map sampled at all quadrature points, element-major.
pub struct AleCache {
    qp: Vec<QpMap>,
}

impl AleCache {
    /// Identity map (undeformed domain).
    pub fn identity(n_elems: usize) -> Self {
        AleCache {
            qp: vec![QpMap::IDENTITY; n_elems * N_QP],
        }
    }

    /// Builds the cache for the map `x -> x + disp(x)`, `disp` given at the
    /// P2 nodes. Fails if the map is tangled (non-positive Jacobian) anywhere.
    pub fn from_displacement(
        mesh: &QuadraticMesh,
        geo: &GeometryCache,
        disp: &[Vec2],
    ) -> Result<Self, AleError> {
        assert_eq!(disp.len(), mesh.n_nodes());
        let mut qp = Vec::with_capacity(mesh.n_elems() * N_QP);
        for e in 0..mesh.n_elems() {
            let nodes = mesh.elem_nodes(e);
            for g in geo.elem(e) {
                let mut grad_a = Mat2::ZERO;
                for b in 0..6 {
                    grad_a = grad_a + Mat2::outer(disp[nodes[b]], g.grad_n[b]);
                }
                let f = Mat2::IDENTITY + grad_a;
                let jac = f.det();
                if jac <= 1e-12 {
                    return Err(AleError::Tangled { elem: e, jac });
                }
                qp.push(QpMap {
                    f_inv_t: f.inverse().transpose(),
                    jac,
                });
            }
        }
        Ok(AleCache { qp })
    }

    /// The `N_QP` map records of element `e`.
    #[inline]
    pub fn elem(&self, e: usize) -> &[QpMap] {
        &self.qp[e * N_QP..(e + 1) * N_QP]
    }

    pub fn n_elems(&self) -> usize {
        self.qp.len() / N_QP
    }

    /// (min, max) of det F over all quadrature points.
    pub fn jac_range(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for q in &self.qp {
            lo = lo.min(q.jac);
            hi = hi.max(q.jac);
        }
        (lo, hi)
    }
}

/// Jacobian range of a displacement field without building a cache and
/// without failing on tangled maps; used by remesh triggers.
pub fn displacement_jac_range(
    mesh: &QuadraticMesh,
    geo: &GeometryCache,
    disp: &[Vec2],
) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for e in 0..mesh.n_elems() {
        let nodes = mesh.elem_nodes(e);
        for g in geo.elem(e) {
            let mut grad_a = Mat2::ZERO;
            for b in 0..6 {
                grad_a = grad_a + Mat2::outer(disp[nodes[b]], g.grad_n[b]);
            }
            let jac = (Mat2::IDENTITY + grad_a).det();
            lo = lo.min(jac);
            hi = hi.max(jac);
        }
    }
    (lo, hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Curve, GeometryModel, SizeField, TaggedCurve};
    use crate::mesh::{generate_mesh, MeshOrder};

    fn unit_square() -> QuadraticMesh {
        let c = |a: Vec2, b: Vec2| TaggedCurve {
            curve: Curve::Segment { a, b },
            tag: "wall".to_string(),
        };
        let geom = GeometryModel {
            outer: vec![
                c(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)),
                c(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0)),
                c(Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0)),
                c(Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.0)),
            ],
            holes: vec![],
            particles: vec![],
            size: SizeField::uniform(0.2),
        };
        generate_mesh(&geom, MeshOrder::Curved).unwrap()
    }

    #[test]
    fn affine_stretch_has_exact_jacobian() {
        let mesh = unit_square();
        let geo = GeometryCache::new(&mesh).unwrap();
        // x -> (1.3 x, 0.8 y): F = diag(1.3, 0.8), det = 1.04
        let disp: Vec<Vec2> = (0..mesh.n_nodes())
            .map(|n| {
                let p = mesh.node_coord(n);
                Vec2::new(0.3 * p.x, -0.2 * p.y)
            })
            .collect();
        let cache = AleCache::from_displacement(&mesh, &geo, &disp).unwrap();
        let (lo, hi) = cache.jac_range();
        assert!((lo - 1.04).abs() < 1e-12 && (hi - 1.04).abs() < 1e-12);
        for e in 0..mesh.n_elems() {
            for q in cache.elem(e) {
                let expect = Mat2::new(1.0 / 1.3, 0.0, 0.0, 1.0 / 0.8);
                assert!((q.f_inv_t - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn tangled_map_is_rejected_but_probed() {
        let mesh = unit_square();
        let geo = GeometryCache::new(&mesh).unwrap();
        // fold the domain: x -> x - 2x = -x on the right half
        let disp: Vec<Vec2> = (0..mesh.n_nodes())
            .map(|n| {
                let p = mesh.node_coord(n);
                Vec2::new(-2.0 * p.x, 0.0)
            })
            .collect();
        assert!(AleCache::from_displacement(&mesh, &geo, &disp).is_err());
        let (lo, _) = displacement_jac_range(&mesh, &geo, &disp);
        assert!(lo < 0.0);
    }

    #[test]
    fn identity_cache_matches_zero_displacement() {
        let mesh = unit_square();
        let geo = GeometryCache::new(&mesh).unwrap();
        let disp = vec![Vec2::ZERO; mesh.n_nodes()];
        let cache = AleCache::from_displacement(&mesh, &geo, &disp).unwrap();
        let (lo, hi) = cache.jac_range();
        assert!((lo - 1.0).abs() < 1e-14 && (hi - 1.0).abs() < 1e-14);
        assert_eq!(cache.n_elems(), mesh.n_elems());
    }
}
