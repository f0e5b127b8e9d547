//! Point location on (possibly deformed) quadratic meshes.
//!
//! A uniform grid over the vertices seeds a cell walk on the straight corner
//! triangles; the final candidate is refined by Newton inversion of the
//! isoparametric map, which also handles curvature. Points that the walk
//! cannot place (curved meshes can defeat the affine walk near strongly bent
//! elements) fall back to a brute-force scan. Queries slightly outside the
//! mesh are clamped onto the nearest element within a caller-supplied physical
//! tolerance; anything farther away is `NotFound`.

use super::{MeshError, QuadraticMesh};
use crate::fem::basis;
use crate::vec2::Vec2;

/// Result of a successful location: element plus reference coordinates
/// (clamped into the reference triangle when the query was snapped).
#[derive(Debug, Clone, Copy)]
pub struct Located {
    pub elem: usize,
    pub xi: f64,
    pub eta: f64,
}

/// Reusable locator over one coordinate configuration of a mesh. Construction
/// is O(n); queries are O(1) amortized. The locator borrows nothing mutable
/// and is safe to share across threads.
pub struct Locator {
    /// Six node positions per element, basis order.
    elem_nodes: Vec<[Vec2; 6]>,
    neighbors: Vec<[Option<usize>; 3]>,
    /// Grid of vertex -> one incident element.
    grid_lo: Vec2,
    grid_cell: f64,
    grid_nx: usize,
    grid_ny: usize,
    grid: Vec<Vec<(Vec2, usize)>>,
    bbox_diag: f64,
}

impl Locator {
    /// Builds a locator for the mesh in its reference configuration.
    pub fn new(mesh: &QuadraticMesh) -> Self {
        let coords: Vec<[Vec2; 6]> = (0..mesh.n_elems()).map(|e| mesh.elem_coords(e)).collect();
        Self::with_coords(mesh, coords)
    }

    /// Builds a locator for displaced coordinates (e.g. the deformed
    /// configuration during field transfer). `disp` has P2 node layout.
    pub fn deformed(mesh: &QuadraticMesh, disp: &[Vec2]) -> Self {
        let nv = mesh.vertices.len();
        let coords: Vec<[Vec2; 6]> = (0..mesh.n_elems())
            .map(|e| {
                let el = &mesh.elems[e];
                [
                    mesh.vertices[el.v[0]] + disp[el.v[0]],
                    mesh.vertices[el.v[1]] + disp[el.v[1]],
                    mesh.vertices[el.v[2]] + disp[el.v[2]],
                    mesh.midpoints[el.e[0]] + disp[nv + el.e[0]],
                    mesh.midpoints[el.e[1]] + disp[nv + el.e[1]],
                    mesh.midpoints[el.e[2]] + disp[nv + el.e[2]],
                ]
            })
            .collect();
        Self::with_coords(mesh, coords)
    }

    fn with_coords(mesh: &QuadraticMesh, elem_nodes: Vec<[Vec2; 6]>) -> Self {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for nodes in &elem_nodes {
            for p in nodes {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let diag = (hi - lo).norm().max(1e-12);
        let n_target = (mesh.n_elems() as f64).sqrt().ceil().max(1.0) as usize;
        let cell = ((hi.x - lo.x).max(hi.y - lo.y) / n_target as f64).max(1e-12);
        let nx = ((hi.x - lo.x) / cell).ceil() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).ceil() as usize + 1;
        let mut grid = vec![Vec::new(); nx * ny];
        for (e, nodes) in elem_nodes.iter().enumerate() {
            // register corner positions; one entry per corner is enough for seeding
            for &p in &nodes[..3] {
                let ix = (((p.x - lo.x) / cell) as usize).min(nx - 1);
                let iy = (((p.y - lo.y) / cell) as usize).min(ny - 1);
                grid[iy * nx + ix].push((p, e));
            }
        }
        Locator {
            elem_nodes,
            neighbors: mesh.elem_neighbors(),
            grid_lo: lo,
            grid_cell: cell,
            grid_nx: nx,
            grid_ny: ny,
            grid,
            bbox_diag: diag,
        }
    }

    fn seed(&self, p: Vec2) -> usize {
        let ix = (((p.x - self.grid_lo.x) / self.grid_cell).max(0.0) as usize).min(self.grid_nx - 1);
        let iy = (((p.y - self.grid_lo.y) / self.grid_cell).max(0.0) as usize).min(self.grid_ny - 1);
        let mut best = (f64::INFINITY, 0usize);
        for ring in 0..self.grid_nx.max(self.grid_ny) {
            let x0 = ix.saturating_sub(ring);
            let x1 = (ix + ring).min(self.grid_nx - 1);
            let y0 = iy.saturating_sub(ring);
            let y1 = (iy + ring).min(self.grid_ny - 1);
            for gy in y0..=y1 {
                for gx in x0..=x1 {
                    for &(q, e) in &self.grid[gy * self.grid_nx + gx] {
                        let d = (q - p).norm_sq();
                        if d < best.0 {
                            best = (d, e);
                        }
                    }
                }
            }
            if best.0.is_finite() && ring >= 1 {
                break;
            }
        }
        best.1
    }

    /// Locates `p`, clamping queries within `clamp_tol` (physical distance) of
    /// the mesh onto it. A `clamp_tol` of `None` uses 1e-8 x bounding-box
    /// diagonal.
    pub fn locate(&self, p: Vec2, clamp_tol: Option<f64>) -> Result<Located, MeshError> {
        let tol = clamp_tol.unwrap_or(1e-8 * self.bbox_diag);
        let inv_tol = 1e-12 * self.bbox_diag;
        // walk on straight corners
        let mut e = self.seed(p);
        let max_steps = 2 * self.elem_nodes.len() + 64;
        let mut last = usize::MAX;
        for _ in 0..max_steps {
            let n = &self.elem_nodes[e];
            let mut worst = (0.0f64, usize::MAX);
            for k in 0..3 {
                let a = n[k];
                let b = n[(k + 1) % 3];
                let s = (b - a).cross(p - a);
                if s < worst.0 {
                    worst = (s, k);
                }
            }
            if worst.1 == usize::MAX {
                break; // inside the straight corner triangle
            }
            match self.neighbors[e][worst.1] {
                Some(nb) if nb != last => {
                    last = e;
                    e = nb;
                }
                _ => break, // hit the hull or would bounce; try Newton here
            }
        }
        // Newton refinement on the candidate and its neighbors
        if let Some(loc) = self.try_newton(e, p, tol, inv_tol) {
            return Ok(loc);
        }
        for k in 0..3 {
            if let Some(nb) = self.neighbors[e][k] {
                if let Some(loc) = self.try_newton(nb, p, tol, inv_tol) {
                    return Ok(loc);
                }
            }
        }
        // brute force fallback
        let mut best: Option<(f64, Located)> = None;
        for e in 0..self.elem_nodes.len() {
            if let Some((xi, eta)) = basis::p2_inverse_map(&self.elem_nodes[e], p, inv_tol) {
                let slack = bary_slack(xi, eta);
                let dist = self.clamp_distance(e, xi, eta, p);
                if slack >= 0.0 {
                    return Ok(Located { elem: e, xi, eta });
                }
                if dist <= tol && best.as_ref().map(|b| dist < b.0).unwrap_or(true) {
                    let (cxi, ceta) = clamp_ref(xi, eta);
                    best = Some((dist, Located { elem: e, xi: cxi, eta: ceta }));
                }
            }
        }
        best.map(|(_, l)| l)
            .ok_or(MeshError::NotFound { x: p.x, y: p.y })
    }

    fn try_newton(&self, e: usize, p: Vec2, tol: f64, inv_tol: f64) -> Option<Located> {
        let (xi, eta) = basis::p2_inverse_map(&self.elem_nodes[e], p, inv_tol)?;
        if bary_slack(xi, eta) >= -1e-12 {
            return Some(Located { elem: e, xi, eta });
        }
        if self.clamp_distance(e, xi, eta, p) <= tol {
            let (cxi, ceta) = clamp_ref(xi, eta);
            return Some(Located { elem: e, xi: cxi, eta: ceta });
        }
        None
    }

    /// Physical distance between `p` and the element image of the clamped
    /// reference point.
    fn clamp_distance(&self, e: usize, xi: f64, eta: f64, p: Vec2) -> f64 {
        let (cxi, ceta) = clamp_ref(xi, eta);
        (basis::p2_map(&self.elem_nodes[e], cxi, ceta) - p).norm()
    }

    /// Locates `p` considering only elements accepted by `filter`, by brute
    /// force. Intended for small subsets such as the solid subdomain during
    /// field transfer, where the containing element's subdomain matters.
    pub fn locate_filtered(
        &self,
        p: Vec2,
        clamp_tol: Option<f64>,
        filter: impl Fn(usize) -> bool,
    ) -> Result<Located, MeshError> {
        let tol = clamp_tol.unwrap_or(1e-8 * self.bbox_diag);
        let inv_tol = 1e-12 * self.bbox_diag;
        let mut best: Option<(f64, Located)> = None;
        for e in (0..self.elem_nodes.len()).filter(|&e| filter(e)) {
            if let Some((xi, eta)) = basis::p2_inverse_map(&self.elem_nodes[e], p, inv_tol) {
                if bary_slack(xi, eta) >= 0.0 {
                    return Ok(Located { elem: e, xi, eta });
                }
                let dist = self.clamp_distance(e, xi, eta, p);
                if dist <= tol && best.as_ref().map(|b| dist < b.0).unwrap_or(true) {
                    let (cxi, ceta) = clamp_ref(xi, eta);
                    best = Some((dist, Located { elem: e, xi: cxi, eta: ceta }));
                }
            }
        }
        best.map(|(_, l)| l)
            .ok_or(MeshError::NotFound { x: p.x, y: p.y })
    }

    /// Evaluates a P2 scalar field (coefficients in mesh node order) at a
    /// located point.
    pub fn eval_p2(&self, mesh: &QuadraticMesh, coef: &[f64], loc: Located) -> f64 {
        let nodes = mesh.elem_nodes(loc.elem);
        let n = basis::p2_values(loc.xi, loc.eta);
        (0..6).map(|a| coef[nodes[a]] * n[a]).sum()
    }

    /// Evaluates a P1 vertex field at a located point via the barycentric
    /// coordinates of the reference triangle. The lookup closure maps a
    /// vertex id to its coefficient.
    pub fn eval_p1(
        &self,
        mesh: &QuadraticMesh,
        loc: Located,
        coef: impl Fn(usize) -> f64,
    ) -> f64 {
        let el = &mesh.elems[loc.elem];
        let lambda = [1.0 - loc.xi - loc.eta, loc.xi, loc.eta];
        (0..3).map(|i| lambda[i] * coef(el.v[i])).sum()
    }

    /// Position of a located point in this locator's coordinates.
    pub fn position(&self, loc: Located) -> Vec2 {
        basis::p2_map(&self.elem_nodes[loc.elem], loc.xi, loc.eta)
    }
}

/// Smallest barycentric coordinate (negative = outside the reference triangle).
fn bary_slack(xi: f64, eta: f64) -> f64 {
    xi.min(eta).min(1.0 - xi - eta)
}

fn clamp_ref(xi: f64, eta: f64) -> (f64, f64) {
    // project onto the reference triangle (componentwise clamp then fix the
    // hypotenuse; exact projection is unnecessary at clamp tolerances)
    let mut x = xi.max(0.0);
    let mut y = eta.max(0.0);
    if x + y > 1.0 {
        let over = (x + y - 1.0) * 0.5;
        x = (x - over).max(0.0);
        y = (y - over).max(0.0);
        let s = x + y;
        if s > 1.0 {
            x /= s;
            y /= s;
        }
    }
    (x, y)
}
