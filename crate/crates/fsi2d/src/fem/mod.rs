//! Discrete spaces on quadratic meshes: degree-of-freedom layout, cached
//! element geometry, Dirichlet constraints, quadrature and basis evaluation,
//! and (in submodules) assembly of the coupled systems.
//!
//! The monolithic unknown vector is laid out as
//!
//! ```text
//! [ u | ps | pf | b ]
//! ```
//!
//! where `u` holds two interleaved velocity components per P2 node
//! (`2 * node + comp`), `ps` one solid pressure per solid vertex, `pf` one
//! fluid pressure per fluid vertex (interface vertices carry both, which is
//! what allows the pressure to jump across the interface), and `b` three
//! components per solid vertex storing the symmetric conformation tensor as
//! `(b11, b22, b12)`.

pub mod assembly;
pub mod basis;
pub mod harmonic;
pub mod quadrature;

use crate::mesh::QuadraticMesh;
use crate::vec2::{Mat2, Vec2};
use quadrature::{N_QP, TRI_QUADRATURE};

#[derive(Debug, thiserror::Error)]
pub enum FemError {
    #[error("degenerate element {elem}: isoparametric detJ = {detj:.3e}")]
    DegenerateElement { elem: usize, detj: f64 },
    #[error("conflicting Dirichlet values at dof {dof}: {a} vs {b}")]
    ConflictingConstraint { dof: usize, a: f64, b: f64 },
    #[error(transparent)]
    Sparse(#[from] crate::sparse::SparseError),
}

/// Degree-of-freedom map for the monolithic system on one mesh.
#[derive(Debug, Clone)]
pub struct DofMap {
    pub n_nodes: usize,
    pub n_vertices: usize,
    /// Vertex -> solid pressure dof.
    ps: Vec<Option<usize>>,
    /// Vertex -> fluid pressure dof.
    pf: Vec<Option<usize>>,
    /// Vertex -> first of the three conformation dofs `(b11, b22, b12)`.
    b: Vec<Option<usize>>,
    pub n_dofs: usize,
}

impl DofMap {
    pub fn new(mesh: &QuadraticMesh) -> Self {
        let nv = mesh.n_vertices();
        let mut solid_vertex = vec![false; nv];
        let mut fluid_vertex = vec![false; nv];
        for el in &mesh.elems {
            let mark = if el.is_solid() {
                &mut solid_vertex
            } else {
                &mut fluid_vertex
            };
            for &v in &el.v {
                mark[v] = true;
            }
        }
        let n_nodes = mesh.n_nodes();
        let mut next = 2 * n_nodes;
        let mut ps = vec![None; nv];
        for v in 0..nv {
            if solid_vertex[v] {
                ps[v] = Some(next);
                next += 1;
            }
        }
        let mut pf = vec![None; nv];
        for v in 0..nv {
            if fluid_vertex[v] {
                pf[v] = Some(next);
                next += 1;
            }
        }
        let mut b = vec![None; nv];
        for v in 0..nv {
            if solid_vertex[v] {
                b[v] = Some(next);
                next += 3;
            }
        }
        DofMap {
            n_nodes,
            n_vertices: nv,
            ps,
            pf,
            b,
            n_dofs: next,
        }
    }

    /// Velocity dof of `comp` (0 = x, 1 = y) at P2 node `node`.
    #[inline]
    pub fn u(&self, node: usize, comp: usize) -> usize {
        2 * node + comp
    }

    pub fn n_u(&self) -> usize {
        2 * self.n_nodes
    }

    #[inline]
    pub fn ps(&self, vertex: usize) -> Option<usize> {
        self.ps[vertex]
    }

    #[inline]
    pub fn pf(&self, vertex: usize) -> Option<usize> {
        self.pf[vertex]
    }

    /// First conformation dof at `vertex`; components are `(b11, b22, b12)`.
    #[inline]
    pub fn b(&self, vertex: usize) -> Option<usize> {
        self.b[vertex]
    }

    pub fn is_solid_vertex(&self, vertex: usize) -> bool {
        self.ps[vertex].is_some()
    }

    pub fn is_fluid_vertex(&self, vertex: usize) -> bool {
        self.pf[vertex].is_some()
    }

    /// Fluid pressure dofs in vertex order.
    pub fn pf_dofs(&self) -> Vec<usize> {
        (0..self.n_vertices).filter_map(|v| self.pf[v]).collect()
    }

    /// All dofs of one element (velocities, then pressures, then conformation).
    pub fn elem_dofs(&self, mesh: &QuadraticMesh, e: usize) -> Vec<usize> {
        let el = &mesh.elems[e];
        let nodes = mesh.elem_nodes(e);
        let mut dofs = Vec::with_capacity(24);
        for n in nodes {
            dofs.push(self.u(n, 0));
            dofs.push(self.u(n, 1));
        }
        if el.is_solid() {
            for &v in &el.v {
                dofs.push(self.ps[v].expect("solid element corner without ps dof"));
            }
            for &v in &el.v {
                let b0 = self.b[v].expect("solid element corner without b dofs");
                dofs.extend_from_slice(&[b0, b0 + 1, b0 + 2]);
            }
        } else {
            for &v in &el.v {
                dofs.push(self.pf[v].expect("fluid element corner without pf dof"));
            }
        }
        dofs
    }

    /// Extracts nodal velocities from a monolithic state vector.
    pub fn u_at(&self, x: &[f64], node: usize) -> Vec2 {
        Vec2::new(x[2 * node], x[2 * node + 1])
    }

    pub fn set_u(&self, x: &mut [f64], node: usize, v: Vec2) {
        x[2 * node] = v.x;
        x[2 * node + 1] = v.y;
    }

    /// Conformation tensor at a solid vertex, as a symmetric matrix.
    pub fn b_at(&self, x: &[f64], vertex: usize) -> Mat2 {
        let b0 = self.b[vertex].expect("vertex has no conformation dofs");
        Mat2::new(x[b0], x[b0 + 2], x[b0 + 2], x[b0 + 1])
    }

    pub fn set_b(&self, x: &mut [f64], vertex: usize, b: Mat2) {
        let b0 = self.b[vertex].expect("vertex has no conformation dofs");
        x[b0] = b.m[0][0];
        x[b0 + 1] = b.m[1][1];
        x[b0 + 2] = 0.5 * (b.m[0][1] + b.m[1][0]);
    }
}

/// Per-quadrature-point element geometry on the reference mesh,
/// precomputed once per mesh.
#[derive(Clone, Copy)]
pub struct QpGeom {
    /// Gradients of the six P2 basis functions with respect to the reference
    /// mesh coordinates.
    pub grad_n: [Vec2; 6],
    /// Gradients of the three P1 basis functions (reference-triangle linear,
    /// pulled through the isoparametric map).
    pub grad_m: [Vec2; 3],
    /// Quadrature weight times isoparametric detJ.
    pub dv: f64,
    /// Physical position of the quadrature point (reference configuration).
    pub pos: Vec2,
}

pub struct GeometryCache {
    qp: Vec<QpGeom>,
}

impl GeometryCache {
    pub fn new(mesh: &QuadraticMesh) -> Result<Self, FemError> {
        let mut qp = Vec::with_capacity(mesh.n_elems() * N_QP);
        for e in 0..mesh.n_elems() {
            let nodes = mesh.elem_coords(e);
            for q in TRI_QUADRATURE {
                let jac = basis::p2_jacobian(&nodes, q.xi, q.eta);
                let detj = jac.det();
                if detj <= 0.0 {
                    return Err(FemError::DegenerateElement { elem: e, detj });
                }
                let jinv = jac.inverse();
                let gn_ref = basis::p2_gradients(q.xi, q.eta);
                let gm_ref = basis::p1_gradients();
                let mut grad_n = [Vec2::ZERO; 6];
                for a in 0..6 {
                    grad_n[a] = jinv.tr_mul_vec(gn_ref[a]);
                }
                let mut grad_m = [Vec2::ZERO; 3];
                for a in 0..3 {
                    grad_m[a] = jinv.tr_mul_vec(gm_ref[a]);
                }
                qp.push(QpGeom {
                    grad_n,
                    grad_m,
                    dv: q.w * detj,
                    pos: basis::p2_map(&nodes, q.xi, q.eta),
                });
            }
        }
        Ok(GeometryCache { qp })
    }

    /// The `N_QP` quadrature records of element `e`.
    #[inline]
    pub fn elem(&self, e: usize) -> &[QpGeom] {
        &self.qp[e * N_QP..(e + 1) * N_QP]
    }
}

/// A set of Dirichlet constraints `x[dof] = value`, resolved to identity rows
/// during assembly.
#[derive(Debug, Clone, Default)]
pub struct Constraints {
    items: Vec<(usize, f64)>,
}

impl Constraints {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, dof: usize, value: f64) {
        self.items.push((dof, value));
    }

    /// Sorts, merges duplicates, and rejects contradictory values.
    pub fn finalize(mut self) -> Result<Self, FemError> {
        self.items
            .sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let mut out: Vec<(usize, f64)> = Vec::with_capacity(self.items.len());
        for (dof, v) in self.items {
            match out.last() {
                Some(&(d, w)) if d == dof => {
                    if (v - w).abs() > 1e-9 * (1.0 + v.abs().max(w.abs())) {
                        return Err(FemError::ConflictingConstraint { dof, a: w, b: v });
                    }
                }
                _ => out.push((dof, v)),
            }
        }
        Ok(Constraints { items: out })
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.items.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Boolean mask over `n` dofs (true = constrained).
    pub fn mask(&self, n: usize) -> Vec<bool> {
        let mut m = vec![false; n];
        for &(dof, _) in &self.items {
            m[dof] = true;
        }
        m
    }

    /// Overwrites constrained entries of `x` with their prescribed values.
    pub fn enforce(&self, x: &mut [f64]) {
        for &(dof, v) in &self.items {
            x[dof] = v;
        }
    }
}
