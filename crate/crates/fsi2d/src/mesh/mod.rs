//! Isoparametric quadratic triangle meshes.
//!
//! A mesh stores straight-corner topology (vertices, edges, elements) plus one
//! mid-edge node per edge. Mid-edge nodes of interior edges sit at chord
//! midpoints; mid-edge nodes of boundary/interface edges are snapped onto the
//! exact geometry curves, which is what makes elements curved. P2 fields place
//! one node per vertex and one per edge; node `i` is vertex `i` for
//! `i < n_vertices` and edge `i - n_vertices` otherwise.
//!
//! Element node order follows the basis convention `[v0, v1, v2, m01, m12, m20]`;
//! `Element::e[k]` is the edge between corners `k` and `(k+1) % 3`.

mod delaunay;
mod generate;
mod io;
mod locate;

pub use generate::{generate_mesh, snap_mesh_to_curves, MeshOrder};
pub use io::{mesh_from_text, mesh_to_text, read_mesh, write_mesh};
pub use locate::{Located, Locator};

use crate::fem::basis;
use crate::fem::quadrature::TRI_QUADRATURE;
use crate::vec2::Vec2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subdomain {
    Fluid,
    Solid,
}

#[derive(Debug, Clone, Copy)]
pub struct Element {
    pub v: [usize; 3],
    pub e: [usize; 3],
    pub subdomain: Subdomain,
}

impl Element {
    pub fn is_solid(&self) -> bool {
        self.subdomain == Subdomain::Solid
    }
}

/// Boundary facet: an edge lying on a tagged piece of the domain boundary.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryFacet {
    pub edge: usize,
    pub tag: usize,
}

#[derive(Debug, Clone)]
pub struct QuadraticMesh {
    pub vertices: Vec<Vec2>,
    /// Mid-edge node coordinates, parallel to `edges`.
    pub midpoints: Vec<Vec2>,
    /// Unordered vertex pairs, stored `(min, max)`.
    pub edges: Vec<[usize; 2]>,
    pub elems: Vec<Element>,
    pub boundary: Vec<BoundaryFacet>,
    /// Edges separating fluid and solid elements.
    pub interface: Vec<usize>,
    /// Tag registry; `BoundaryFacet::tag` indexes into this.
    pub tags: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("geometry rejected: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("refinement stalled: {n_bad} elements below quality floor after {iters} passes")]
    RefinementStall { iters: usize, n_bad: usize },
    #[error("curve projection failed for {what}")]
    ProjectionDiverged { what: String },
    #[error("inverted element {elem}: detJ = {detj:.3e} at a quadrature point")]
    InvertedElement { elem: usize, detj: f64 },
    #[error("point ({x:.6}, {y:.6}) not found in mesh")]
    NotFound { x: f64, y: f64 },
    #[error("mesh is not conforming: {0}")]
    NotConforming(String),
    #[error("mesh file format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl QuadraticMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_elems(&self) -> usize {
        self.elems.len()
    }

    /// Total P2 node count (vertices + mid-edge nodes).
    pub fn n_nodes(&self) -> usize {
        self.vertices.len() + self.edges.len()
    }

    pub fn node_coord(&self, node: usize) -> Vec2 {
        if node < self.vertices.len() {
            self.vertices[node]
        } else {
            self.midpoints[node - self.vertices.len()]
        }
    }

    /// P2 node ids of an element in basis order.
    pub fn elem_nodes(&self, e: usize) -> [usize; 6] {
        let el = &self.elems[e];
        let nv = self.vertices.len();
        [
            el.v[0],
            el.v[1],
            el.v[2],
            nv + el.e[0],
            nv + el.e[1],
            nv + el.e[2],
        ]
    }

    /// Physical positions of an element's six nodes (reference configuration).
    pub fn elem_coords(&self, e: usize) -> [Vec2; 6] {
        let el = &self.elems[e];
        [
            self.vertices[el.v[0]],
            self.vertices[el.v[1]],
            self.vertices[el.v[2]],
            self.midpoints[el.e[0]],
            self.midpoints[el.e[1]],
            self.midpoints[el.e[2]],
        ]
    }

    pub fn tag_id(&self, name: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == name)
    }

    /// Vertex -> incident elements adjacency.
    pub fn vertex_elems(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertices.len()];
        for (i, el) in self.elems.iter().enumerate() {
            for &v in &el.v {
                adj[v].push(i);
            }
        }
        adj
    }

    /// Element -> neighbor element across each local edge (None on boundary).
    pub fn elem_neighbors(&self) -> Vec<[Option<usize>; 3]> {
        let mut edge_elems: Vec<[Option<usize>; 2]> = vec![[None, None]; self.edges.len()];
        for (i, el) in self.elems.iter().enumerate() {
            for &e in &el.e {
                let slot = &mut edge_elems[e];
                if slot[0].is_none() {
                    slot[0] = Some(i);
                } else {
                    slot[1] = Some(i);
                }
            }
        }
        let mut nbr = vec![[None; 3]; self.elems.len()];
        for (i, el) in self.elems.iter().enumerate() {
            for k in 0..3 {
                let [a, b] = edge_elems[el.e[k]];
                nbr[i][k] = match (a, b) {
                    (Some(x), Some(y)) => Some(if x == i { y } else { x }),
                    _ => None,
                };
            }
        }
        nbr
    }

    /// Smallest corner angle over all elements, degrees (straight corners;
    /// snapping only moves mid-edge nodes).
    pub fn min_angle_deg(&self) -> f64 {
        self.elems
            .iter()
            .map(|el| {
                triangle_min_angle_deg(
                    self.vertices[el.v[0]],
                    self.vertices[el.v[1]],
                    self.vertices[el.v[2]],
                )
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Per-element isoparametric Jacobian determinant range over quadrature
    /// points; `min <= 0` means the curved element is inverted.
    pub fn elem_detj_range(&self, e: usize) -> (f64, f64) {
        detj_range(&self.elem_coords(e))
    }

    /// Structural validation: conforming connectivity, positive orientation,
    /// positive isoparametric Jacobians, boundary facets on exactly one
    /// element, interface edges between differing subdomains.
    pub fn validate(&self) -> Result<(), MeshError> {
        let mut edge_use = vec![0usize; self.edges.len()];
        for (i, el) in self.elems.iter().enumerate() {
            for k in 0..3 {
                let pair = [el.v[k], el.v[(k + 1) % 3]];
                let stored = self.edges[el.e[k]];
                if !(stored == [pair[0].min(pair[1]), pair[0].max(pair[1])]) {
                    return Err(MeshError::NotConforming(format!(
                        "element {i} edge {k} does not match edge table"
                    )));
                }
                edge_use[el.e[k]] += 1;
            }
            let a = self.vertices[el.v[0]];
            let b = self.vertices[el.v[1]];
            let c = self.vertices[el.v[2]];
            if (b - a).cross(c - a) <= 0.0 {
                return Err(MeshError::NotConforming(format!(
                    "element {i} is not counterclockwise"
                )));
            }
            let (dmin, _) = self.elem_detj_range(i);
            if dmin <= 0.0 {
                return Err(MeshError::InvertedElement { elem: i, detj: dmin });
            }
        }
        if let Some(e) = edge_use.iter().position(|&u| u == 0 || u > 2) {
            return Err(MeshError::NotConforming(format!(
                "edge {e} used by {} elements",
                edge_use[e]
            )));
        }
        for f in &self.boundary {
            if edge_use[f.edge] != 1 {
                return Err(MeshError::NotConforming(format!(
                    "boundary facet on interior edge {}",
                    f.edge
                )));
            }
        }
        let mut edge_sub: Vec<[Option<Subdomain>; 2]> = vec![[None, None]; self.edges.len()];
        for el in &self.elems {
            for &e in &el.e {
                let s = &mut edge_sub[e];
                if s[0].is_none() {
                    s[0] = Some(el.subdomain);
                } else {
                    s[1] = Some(el.subdomain);
                }
            }
        }
        for &e in &self.interface {
            match edge_sub[e] {
                [Some(a), Some(b)] if a != b => {}
                _ => {
                    return Err(MeshError::NotConforming(format!(
                        "interface edge {e} does not separate fluid and solid"
                    )))
                }
            }
        }
        Ok(())
    }

    /// Nodes (P2 ids) lying on boundary facets with the given tag.
    pub fn boundary_nodes(&self, tag: usize) -> Vec<usize> {
        let nv = self.vertices.len();
        let mut nodes = Vec::new();
        for f in &self.boundary {
            if f.tag == tag {
                let [a, b] = self.edges[f.edge];
                nodes.push(a);
                nodes.push(b);
                nodes.push(nv + f.edge);
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    /// All P2 nodes of solid elements (interface nodes included).
    pub fn solid_nodes(&self) -> Vec<usize> {
        let mut nodes = Vec::new();
        for (i, el) in self.elems.iter().enumerate() {
            if el.is_solid() {
                nodes.extend_from_slice(&self.elem_nodes(i));
            }
        }
        nodes.sort_unstable();
        nodes.dedup();
        nodes
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &p in &self.vertices {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        (lo, hi)
    }
}

/// Smallest angle of the straight triangle (a, b, c) in degrees.
pub fn triangle_min_angle_deg(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let la = (c - b).norm();
    let lb = (a - c).norm();
    let lc = (b - a).norm();
    let angle = |opp: f64, s1: f64, s2: f64| {
        ((s1 * s1 + s2 * s2 - opp * opp) / (2.0 * s1 * s2))
            .clamp(-1.0, 1.0)
            .acos()
    };
    let aa = angle(la, lb, lc);
    let ab = angle(lb, lc, la);
    let ac = std::f64::consts::PI - aa - ab;
    aa.min(ab).min(ac).to_degrees()
}

/// Isoparametric detJ range over the quadrature points of one element.
pub fn detj_range(nodes: &[Vec2; 6]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for q in TRI_QUADRATURE {
        let d = basis::p2_jacobian(nodes, q.xi, q.eta).det();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    (lo, hi)
}

/// Deformed node coordinates: reference coordinates plus a per-node
/// displacement (P2 layout: vertices then mid-edge nodes).
pub fn deformed_coords(mesh: &QuadraticMesh, disp: &[Vec2]) -> (Vec<Vec2>, Vec<Vec2>) {
    let nv = mesh.vertices.len();
    assert_eq!(disp.len(), mesh.n_nodes());
    let verts = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| p + disp[i])
        .collect();
    let mids = mesh
        .midpoints
        .iter()
        .enumerate()
        .map(|(i, &p)| p + disp[nv + i])
        .collect();
    (verts, mids)
}
