//! Harmonic extension of interface/solid velocities into the fluid mesh.
//!
//! The ALE mesh velocity `w` equals the material velocity on every solid node
//! (the solid region moves with the material), is zero on the outer and hole
//! boundaries, and is extended into the fluid interior by a componentwise
//! Laplace solve on the reference mesh. The Laplacian matrix and its LU
//! factorization depend only on the mesh, so they are built once and reused
//! for every extension (two triangular solves per call).

use super::{FemError, GeometryCache};
use crate::mesh::QuadraticMesh;
use crate::sparse::{LuSolver, SparseMatrix};
use crate::vec2::Vec2;

pub struct HarmonicExtension {
    solver: LuSolver,
    n_nodes: usize,
    /// True at fixed nodes that take the input velocity (solid nodes);
    /// boundary nodes are fixed at zero, everything else is harmonic.
    takes_velocity: Vec<bool>,
    /// All Dirichlet nodes of the extension solve (solid and boundary).
    is_fixed: Vec<bool>,
}

impl HarmonicExtension {
    pub fn new(mesh: &QuadraticMesh, geo: &GeometryCache) -> Result<Self, FemError> {
        let n_nodes = mesh.n_nodes();
        let nv = mesh.n_vertices();
        let mut takes_velocity = vec![false; n_nodes];
        for nd in mesh.solid_nodes() {
            takes_velocity[nd] = true;
        }
        let mut is_fixed = takes_velocity.clone();
        for f in &mesh.boundary {
            let [a, b] = mesh.edges[f.edge];
            is_fixed[a] = true;
            is_fixed[b] = true;
            is_fixed[nv + f.edge] = true;
        }

        let mut pairs = Vec::new();
        for e in 0..mesh.n_elems() {
            let nodes = mesh.elem_nodes(e);
            for &r in &nodes {
                for &c in &nodes {
                    pairs.push((r, c));
                }
            }
        }
        let mut mat = SparseMatrix::from_pairs(n_nodes, &mut pairs);
        for e in 0..mesh.n_elems() {
            let nodes = mesh.elem_nodes(e);
            for g in geo.elem(e) {
                for (a, &ra) in nodes.iter().enumerate() {
                    if is_fixed[ra] {
                        continue;
                    }
                    for (b, &cb) in nodes.iter().enumerate() {
                        mat.add(ra, cb, g.dv * g.grad_n[a].dot(g.grad_n[b]));
                    }
                }
            }
        }
        for (nd, &fixed) in is_fixed.iter().enumerate() {
            if fixed {
                mat.set(nd, nd, 1.0);
            }
        }
        let mut solver = LuSolver::analyze(&mat)?;
        solver.factor(&mat)?;
        Ok(HarmonicExtension {
            solver,
            n_nodes,
            takes_velocity,
            is_fixed,
        })
    }

    /// Extends the nodal velocity field: returns `w` with `w = u` on solid
    /// nodes, `w = 0` on non-solid boundary nodes, harmonic in between.
    pub fn extend(&self, u: &[Vec2]) -> Result<Vec<Vec2>, FemError> {
        assert_eq!(u.len(), self.n_nodes);
        let mut wx = vec![0.0; self.n_nodes];
        let mut wy = vec![0.0; self.n_nodes];
        for nd in 0..self.n_nodes {
            if self.takes_velocity[nd] {
                wx[nd] = u[nd].x;
                wy[nd] = u[nd].y;
            }
        }
        self.solver.solve_in_place(&mut wx)?;
        self.solver.solve_in_place(&mut wy)?;
        Ok((0..self.n_nodes)
            .map(|nd| {
                // prescribed values exactly, bypassing solver rounding
                if self.takes_velocity[nd] {
                    u[nd]
                } else if self.is_fixed[nd] {
                    Vec2::ZERO
                } else {
                    Vec2::new(wx[nd], wy[nd])
                }
            })
            .collect())
    }

    /// Nodes whose extension value is copied from the input field.
    pub fn velocity_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_nodes).filter(|&nd| self.takes_velocity[nd])
    }
}
