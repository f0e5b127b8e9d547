//! Constrained Delaunay triangulation kernel.
//!
//! Bowyer-Watson point insertion with exact orientation/in-circle predicates,
//! Sloan-style constraint enforcement by edge flipping, region labeling by
//! flood fill bounded by constrained edges, and flip-based Delaunay restoration
//! after vertex smoothing. The structure keeps a super-triangle alive until the
//! caller extracts the labeled triangulation, so point-location walks always
//! terminate inside the convex hull.

use super::Subdomain;
use crate::vec2::Vec2;
use std::collections::{HashSet, VecDeque};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Unset,
    Outside,
    Hole,
    Kept(Subdomain),
}

#[derive(Debug, Clone)]
pub struct Tri {
    pub v: [usize; 3],
    /// Neighbor across edge k = (v[k], v[k+1]); None on the hull.
    pub n: [Option<usize>; 3],
    pub alive: bool,
    pub region: Region,
}

pub struct Delaunay {
    pub points: Vec<Vec2>,
    pub tris: Vec<Tri>,
    /// One alive incident triangle per vertex (walk seed).
    vert_tri: Vec<usize>,
    constrained: HashSet<(usize, usize)>,
    free: Vec<usize>,
    /// Vertices that may not be moved by smoothing (chain points).
    pub fixed: Vec<bool>,
    n_super: usize,
}

#[inline]
fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

#[inline]
fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    robust::orient2d(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
    )
}

#[inline]
fn incircle(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> f64 {
    robust::incircle(
        robust::Coord { x: a.x, y: a.y },
        robust::Coord { x: b.x, y: b.y },
        robust::Coord { x: c.x, y: c.y },
        robust::Coord { x: d.x, y: d.y },
    )
}

impl Delaunay {
    /// Creates the structure with a super-triangle comfortably enclosing the
    /// given bounding box.
    pub fn new(lo: Vec2, hi: Vec2) -> Self {
        let c = 0.5 * (lo + hi);
        let r = 10.0 * ((hi - lo).norm().max(1e-12));
        let p0 = c + Vec2::new(-2.0 * r, -r);
        let p1 = c + Vec2::new(2.0 * r, -r);
        let p2 = c + Vec2::new(0.0, 2.0 * r);
        Delaunay {
            points: vec![p0, p1, p2],
            tris: vec![Tri {
                v: [0, 1, 2],
                n: [None, None, None],
                alive: true,
                region: Region::Unset,
            }],
            vert_tri: vec![0, 0, 0],
            constrained: HashSet::new(),
            free: Vec::new(),
            fixed: vec![true, true, true],
            n_super: 3,
        }
    }

    pub fn n_super(&self) -> usize {
        self.n_super
    }

    pub fn is_constrained(&self, a: usize, b: usize) -> bool {
        self.constrained.contains(&key(a, b))
    }

    fn alloc_tri(&mut self, t: Tri) -> usize {
        if let Some(i) = self.free.pop() {
            self.tris[i] = t;
            i
        } else {
            self.tris.push(t);
            self.tris.len() - 1
        }
    }

    /// Walks from a hint to the triangle containing `p` (ties on edges resolve
    /// to either side).
    pub fn locate(&self, p: Vec2, hint: usize) -> usize {
        let mut t = if self.tris.get(hint).map(|t| t.alive).unwrap_or(false) {
            hint
        } else {
            self.tris.iter().position(|t| t.alive).expect("empty triangulation")
        };
        let max_steps = 4 * self.tris.len() + 64;
        let mut last = usize::MAX;
        for _ in 0..max_steps {
            let tri = &self.tris[t];
            let mut moved = false;
            for k in 0..3 {
                let a = self.points[tri.v[k]];
                let b = self.points[tri.v[(k + 1) % 3]];
                if orient(a, b, p) < 0.0 {
                    if let Some(n) = tri.n[k] {
                        if n != last {
                            last = t;
                            t = n;
                            moved = true;
                            break;
                        }
                    }
                }
            }
            if !moved {
                // re-check all edges without the "don't go back" shortcut
                let tri = &self.tris[t];
                let inside = (0..3).all(|k| {
                    orient(
                        self.points[tri.v[k]],
                        self.points[tri.v[(k + 1) % 3]],
                        p,
                    ) >= 0.0
                });
                if inside {
                    return t;
                }
                // fall through: pick any outward neighbor
                let mut next = None;
                for k in 0..3 {
                    let a = self.points[tri.v[k]];
                    let b = self.points[tri.v[(k + 1) % 3]];
                    if orient(a, b, p) < 0.0 {
                        next = tri.n[k];
                        break;
                    }
                }
                match next {
                    Some(n) => {
                        last = t;
                        t = n;
                    }
                    None => return t, // on the hull; super-triangle makes this unreachable
                }
            }
        }
        t
    }

    /// Inserts a point, returns its vertex index. If the point coincides with
    /// an existing vertex of the containing triangle (within `merge_tol`), the
    /// existing index is returned and nothing is inserted.
    pub fn insert(&mut self, p: Vec2, hint: usize, merge_tol: f64) -> usize {
        let t0 = self.locate(p, hint);
        for &v in &self.tris[t0].v {
            if (self.points[v] - p).norm() <= merge_tol {
                return v;
            }
        }
        let pi = self.points.len();
        self.points.push(p);
        self.fixed.push(false);
        self.vert_tri.push(usize::MAX);

        // Bowyer-Watson cavity: triangles whose circumcircle contains p,
        // grown from t0 without crossing constrained edges.
        let mut bad: Vec<usize> = vec![t0];
        let mut in_bad = HashSet::from([t0]);
        let mut queue = VecDeque::from([t0]);
        while let Some(t) = queue.pop_front() {
            let tri = self.tris[t].clone();
            for k in 0..3 {
                let Some(n) = tri.n[k] else { continue };
                if in_bad.contains(&n) {
                    continue;
                }
                if self.is_constrained(tri.v[k], tri.v[(k + 1) % 3]) {
                    continue;
                }
                let nt = &self.tris[n];
                if incircle(
                    self.points[nt.v[0]],
                    self.points[nt.v[1]],
                    self.points[nt.v[2]],
                    p,
                ) > 0.0
                {
                    in_bad.insert(n);
                    bad.push(n);
                    queue.push_back(n);
                }
            }
        }

        // Cavity boundary: directed edges of bad triangles facing non-bad space.
        struct Wall {
            a: usize,
            b: usize,
            outer: Option<usize>,
        }
        let mut walls: Vec<Wall> = Vec::new();
        for &t in &bad {
            let tri = &self.tris[t];
            for k in 0..3 {
                let keep = match tri.n[k] {
                    Some(n) => !in_bad.contains(&n),
                    None => true,
                };
                if keep {
                    walls.push(Wall {
                        a: tri.v[k],
                        b: tri.v[(k + 1) % 3],
                        outer: tri.n[k],
                    });
                }
            }
        }
        let region = self.tris[t0].region;
        for &t in &bad {
            self.tris[t].alive = false;
            self.free.push(t);
        }
        // Fan triangles (a, b, p); wire adjacency via shared endpoints.
        let mut new_ids = Vec::with_capacity(walls.len());
        for w in &walls {
            let id = self.alloc_tri(Tri {
                v: [w.a, w.b, pi],
                n: [w.outer, None, None],
                alive: true,
                region,
            });
            new_ids.push(id);
        }
        for (i, w) in walls.iter().enumerate() {
            let id = new_ids[i];
            // patch outer neighbor to point at the new triangle
            if let Some(o) = w.outer {
                let ot = &mut self.tris[o];
                for k in 0..3 {
                    let (a, b) = (ot.v[k], ot.v[(k + 1) % 3]);
                    if key(a, b) == key(w.a, w.b) {
                        ot.n[k] = Some(id);
                    }
                }
            }
            // sibling fans: edge 1 = (b, p), edge 2 = (p, a)
            for (j, w2) in walls.iter().enumerate() {
                if w2.a == w.b {
                    self.tris[id].n[1] = Some(new_ids[j]);
                }
                if w2.b == w.a {
                    self.tris[id].n[2] = Some(new_ids[j]);
                }
            }
            self.vert_tri[w.a] = id;
            self.vert_tri[w.b] = id;
            self.vert_tri[pi] = id;
        }
        pi
    }

    /// All alive triangles incident to vertex `v`.
    fn triangles_around(&self, v: usize) -> Vec<usize> {
        let start = self.vert_tri[v];
        let mut out = Vec::new();
        if !self.tris.get(start).map(|t| t.alive).unwrap_or(false) {
            // stale seed: fall back to scan (rare)
            for (i, t) in self.tris.iter().enumerate() {
                if t.alive && t.v.contains(&v) {
                    out.push(i);
                }
            }
            return out;
        }
        // BFS over incident triangles (handles hull fans)
        let mut seen = HashSet::from([start]);
        let mut queue = VecDeque::from([start]);
        while let Some(t) = queue.pop_front() {
            out.push(t);
            let tri = &self.tris[t];
            for k in 0..3 {
                if let Some(n) = tri.n[k] {
                    if !seen.contains(&n) && self.tris[n].v.contains(&v) {
                        seen.insert(n);
                        queue.push_back(n);
                    }
                }
            }
        }
        out
    }

    fn edge_triangles(&self, a: usize, b: usize) -> Option<(usize, usize)> {
        for t in self.triangles_around(a) {
            let tri = &self.tris[t];
            for k in 0..3 {
                if key(tri.v[k], tri.v[(k + 1) % 3]) == key(a, b) {
                    return Some((t, k));
                }
            }
        }
        None
    }

    pub fn edge_exists(&self, a: usize, b: usize) -> bool {
        self.edge_triangles(a, b).is_some()
    }

    /// Flips the edge shared by `t` (local edge k) and its neighbor. Returns
    /// the new diagonal. Caller guarantees the surrounding quad is strictly
    /// convex.
    fn flip(&mut self, t: usize, k: usize) -> (usize, usize) {
        let n = self.tris[t].n[k].expect("flip on hull edge");
        let tv = self.tris[t].v;
        let (a, b, c) = (tv[k], tv[(k + 1) % 3], tv[(k + 2) % 3]);
        let nt = self.tris[n].clone();
        let kk = (0..3)
            .find(|&j| key(nt.v[j], nt.v[(j + 1) % 3]) == key(a, b))
            .expect("neighbor edge");
        let d = nt.v[(kk + 2) % 3];
        // quad (a, d, b, c); new diagonal (c, d)
        // t  becomes (a, d, c), n becomes (d, b, c)
        let t_ab = self.tris[t].n[k]; // = n
        let t_bc = self.tris[t].n[(k + 1) % 3];
        let t_ca = self.tris[t].n[(k + 2) % 3];
        let n_ad = nt.n[(kk + 1) % 3];
        let n_db = nt.n[(kk + 2) % 3];
        debug_assert_eq!(t_ab, Some(n));
        let region = self.tris[t].region;
        self.tris[t] = Tri {
            v: [a, d, c],
            n: [n_ad, Some(n), t_ca],
            alive: true,
            region,
        };
        self.tris[n] = Tri {
            v: [d, b, c],
            n: [n_db, t_bc, Some(t)],
            alive: true,
            region,
        };
        // patch outer neighbors
        let mut patch = |outer: Option<usize>, a: usize, b: usize, newt: usize| {
            if let Some(o) = outer {
                let ot = &mut self.tris[o];
                for j in 0..3 {
                    if key(ot.v[j], ot.v[(j + 1) % 3]) == key(a, b) {
                        ot.n[j] = Some(newt);
                    }
                }
            }
        };
        patch(n_ad, a, d, t);
        patch(t_ca, c, a, t);
        patch(n_db, d, b, n);
        patch(t_bc, b, c, n);
        for &v in &[a, d, c] {
            self.vert_tri[v] = t;
        }
        for &v in &[d, b, c] {
            self.vert_tri[v] = n;
        }
        (c, d)
    }

    /// Registers segment (a, b) as constrained, flipping crossing edges until
    /// the segment appears in the triangulation. Assumes no vertex lies in the
    /// open segment.
    pub fn enforce(&mut self, a: usize, b: usize) {
        if !self.edge_exists(a, b) {
            let pa = self.points[a];
            let pb = self.points[b];
            // Walk the triangulation from a to b, collecting every edge the
            // open segment crosses. Start at the fan triangle of `a` whose
            // opposite edge the segment exits through.
            let mut crossing: VecDeque<(usize, usize)> = VecDeque::new();
            let mut cur: Option<(usize, usize)> = None; // (tri, exit edge)
            for t in self.triangles_around(a) {
                let tri = &self.tris[t];
                let j = (0..3).find(|&j| tri.v[j] == a).unwrap();
                let k = (j + 1) % 3; // edge opposite `a`
                let (u, v) = (tri.v[k], tri.v[(k + 1) % 3]);
                if segments_cross(pa, pb, self.points[u], self.points[v]) {
                    cur = Some((t, k));
                    break;
                }
            }
            let mut steps = 0usize;
            while let Some((t, k)) = cur {
                steps += 1;
                assert!(
                    steps <= self.tris.len() + 16,
                    "segment walk did not terminate"
                );
                let tri = &self.tris[t];
                let (u, v) = (tri.v[k], tri.v[(k + 1) % 3]);
                crossing.push_back((u, v));
                let n = tri.n[k].expect("segment walk crossed the hull");
                let nt = &self.tris[n];
                let kk = (0..3)
                    .find(|&j| key(nt.v[j], nt.v[(j + 1) % 3]) == key(u, v))
                    .expect("neighbor edge");
                let d = nt.v[(kk + 2) % 3];
                cur = if d == b {
                    None
                } else {
                    // the segment leaves `n` through one of its two far edges
                    let k1 = (kk + 1) % 3;
                    let k2 = (kk + 2) % 3;
                    let crosses = |e: usize| {
                        segments_cross(
                            pa,
                            pb,
                            self.points[nt.v[e]],
                            self.points[nt.v[(e + 1) % 3]],
                        )
                    };
                    if crosses(k1) {
                        Some((n, k1))
                    } else {
                        debug_assert!(crosses(k2), "segment grazes a vertex");
                        Some((n, k2))
                    }
                };
            }
            // Flip the collected edges; a non-convex quad goes to the back of
            // the queue and unlocks once its neighborhood has been flipped.
            let mut guard = 0usize;
            while let Some((u, v)) = crossing.pop_front() {
                guard += 1;
                assert!(
                    guard < 100_000,
                    "constraint enforcement did not terminate"
                );
                if !segments_cross(pa, pb, self.points[u], self.points[v]) {
                    continue;
                }
                let Some((t, k)) = self.edge_triangles(u, v) else { continue };
                // flip if the surrounding quad is strictly convex
                let tv = self.tris[t].v;
                let c = tv[(k + 2) % 3];
                let n = self.tris[t].n[k].expect("crossing edge on hull");
                let nt = &self.tris[n];
                let kk = (0..3)
                    .find(|&j| key(nt.v[j], nt.v[(j + 1) % 3]) == key(u, v))
                    .unwrap();
                let d = nt.v[(kk + 2) % 3];
                let (p1, p2) = (tv[k], tv[(k + 1) % 3]);
                let convex = orient(self.points[c], self.points[p1], self.points[d]) > 0.0
                    && orient(self.points[d], self.points[p2], self.points[c]) > 0.0;
                if convex {
                    let (x, y) = self.flip(t, k);
                    if key(x, y) != key(a, b)
                        && segments_cross(pa, pb, self.points[x], self.points[y])
                    {
                        crossing.push_back((x, y));
                    }
                } else {
                    crossing.push_back((u, v));
                }
            }
            debug_assert!(self.edge_exists(a, b), "segment not recovered");
        }
        self.constrained.insert(key(a, b));
    }

    /// Removes the constraint marker from (a, b); used when splitting a
    /// constrained edge.
    pub fn unconstrain(&mut self, a: usize, b: usize) {
        self.constrained.remove(&key(a, b));
    }

    /// Labels triangle regions: flood from the super-triangle marks Outside;
    /// each remaining component (bounded by constrained edges) is classified
    /// by the caller through `classify` on a representative centroid.
    pub fn label_regions(&mut self, classify: impl Fn(Vec2) -> Region) {
        for t in &mut self.tris {
            t.region = Region::Unset;
        }
        // component fill helper over non-constrained edges
        let fill = |tris: &mut Vec<Tri>, points: &[Vec2], constrained: &HashSet<(usize, usize)>, start: usize, region: Region| {
            let mut queue = VecDeque::from([start]);
            tris[start].region = region;
            while let Some(t) = queue.pop_front() {
                let tri = tris[t].clone();
                for k in 0..3 {
                    let Some(n) = tri.n[k] else { continue };
                    if tris[n].region != Region::Unset {
                        continue;
                    }
                    if constrained.contains(&key(tri.v[k], tri.v[(k + 1) % 3])) {
                        continue;
                    }
                    tris[n].region = region;
                    queue.push_back(n);
                }
            }
            let _ = points;
        };
        // all triangles touching a super vertex are outside
        for i in 0..self.tris.len() {
            if !self.tris[i].alive || self.tris[i].region != Region::Unset {
                continue;
            }
            if self.tris[i].v.iter().any(|&v| v < self.n_super) {
                fill(&mut self.tris, &self.points, &self.constrained, i, Region::Outside);
            }
        }
        for i in 0..self.tris.len() {
            if !self.tris[i].alive || self.tris[i].region != Region::Unset {
                continue;
            }
            let c = (self.points[self.tris[i].v[0]]
                + self.points[self.tris[i].v[1]]
                + self.points[self.tris[i].v[2]])
                / 3.0;
            fill(&mut self.tris, &self.points, &self.constrained, i, classify(c));
        }
    }

    /// One pass of Lawson flips restoring the (constrained) Delaunay property
    /// after vertex moves. Returns the number of flips performed.
    pub fn restore_delaunay_pass(&mut self) -> usize {
        let mut flips = 0;
        for t in 0..self.tris.len() {
            if !self.tris[t].alive {
                continue;
            }
            for k in 0..3 {
                let tri = &self.tris[t];
                let Some(n) = tri.n[k] else { continue };
                if n < t {
                    continue; // each edge once
                }
                let (a, b) = (tri.v[k], tri.v[(k + 1) % 3]);
                if self.is_constrained(a, b) {
                    continue;
                }
                if self.tris[t].region != self.tris[n].region {
                    continue;
                }
                let c = tri.v[(k + 2) % 3];
                let nt = &self.tris[n];
                let kk = (0..3)
                    .find(|&j| key(nt.v[j], nt.v[(j + 1) % 3]) == key(a, b))
                    .unwrap();
                let d = nt.v[(kk + 2) % 3];
                let (pa, pb, pc, pd) = (
                    self.points[a],
                    self.points[b],
                    self.points[c],
                    self.points[d],
                );
                if incircle(pa, pb, pc, pd) > 0.0 {
                    // quad must be strictly convex for a valid flip
                    if orient(pc, pa, pd) > 0.0 && orient(pd, pb, pc) > 0.0 {
                        self.flip(t, k);
                        flips += 1;
                    }
                }
            }
        }
        flips
    }

    /// Alive triangles with a Kept region label.
    pub fn kept_triangles(&self) -> impl Iterator<Item = (usize, &Tri)> {
        self.tris
            .iter()
            .enumerate()
            .filter(|(_, t)| t.alive && matches!(t.region, Region::Kept(_)))
    }

    /// A triangle incident to `v`, usable as a locate hint.
    pub fn vert_tri_hint(&self, v: usize) -> usize {
        self.vert_tri[v]
    }

    /// Alive triangles incident to `v` (used by smoothing; free vertices only
    /// ever touch one region because constrained chains pin their endpoints).
    pub fn kept_triangles_around(&self, v: usize) -> Vec<usize> {
        self.triangles_around(v)
            .into_iter()
            .filter(|&t| self.tris[t].alive)
            .collect()
    }
}

/// Proper segment crossing test (shared endpoints do not count).
fn segments_cross(a: Vec2, b: Vec2, u: Vec2, v: Vec2) -> bool {
    let o1 = orient(a, b, u);
    let o2 = orient(a, b, v);
    let o3 = orient(u, v, a);
    let o4 = orient(u, v, b);
    (o1 > 0.0) != (o2 > 0.0)
        && (o3 > 0.0) != (o4 > 0.0)
        && o1 != 0.0
        && o2 != 0.0
        && o3 != 0.0
        && o4 != 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delaunay_of(points: &[Vec2]) -> Delaunay {
        let mut d = Delaunay::new(Vec2::new(-1.0, -1.0), Vec2::new(2.0, 2.0));
        let mut hint = 0;
        for &p in points {
            let i = d.insert(p, hint, 1e-12);
            hint = d.vert_tri[i];
        }
        d
    }

    #[test]
    fn grid_insertion_is_delaunay() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                // jitter breaks cocircular ties
                let dx = ((i * 7 + j * 3) % 5) as f64 * 1e-3;
                pts.push(Vec2::new(i as f64 * 0.2 + dx, j as f64 * 0.2 - dx));
            }
        }
        let d = delaunay_of(&pts);
        // empty circumcircle property over non-super triangles
        for t in d.tris.iter().filter(|t| t.alive) {
            if t.v.iter().any(|&v| v < d.n_super()) {
                continue;
            }
            let (a, b, c) = (d.points[t.v[0]], d.points[t.v[1]], d.points[t.v[2]]);
            for (i, &p) in d.points.iter().enumerate().skip(d.n_super()) {
                if t.v.contains(&i) {
                    continue;
                }
                assert!(
                    incircle(a, b, c, p) <= 0.0,
                    "point {i} inside circumcircle of {:?}",
                    t.v
                );
            }
        }
    }

    #[test]
    fn constraint_edge_recovered() {
        // A ring of points so (left, right) is initially not an edge.
        let mut pts = vec![Vec2::new(0.0, 0.5), Vec2::new(2.0, 0.5)];
        for k in 0..8 {
            let x = 0.25 + 1.5 * (k as f64 + 0.5) / 8.0;
            pts.push(Vec2::new(x, 0.75 + 0.05 * (k % 2) as f64));
            pts.push(Vec2::new(x, 0.25 - 0.05 * (k % 2) as f64));
        }
        let mut d = delaunay_of(&pts);
        let (a, b) = (3, 4); // first two inserted points
        assert!(!d.edge_exists(a, b));
        d.enforce(a, b);
        assert!(d.edge_exists(a, b));
        assert!(d.is_constrained(a, b));
    }

    #[test]
    fn duplicate_point_merges() {
        let pts = vec![Vec2::new(0.3, 0.3), Vec2::new(0.7, 0.4), Vec2::new(0.5, 0.8)];
        let mut d = delaunay_of(&pts);
        let before = d.points.len();
        let i = d.insert(Vec2::new(0.3, 0.3), 0, 1e-12);
        assert_eq!(i, 3); // first non-super vertex
        assert_eq!(d.points.len(), before);
    }

    #[test]
    fn region_labels_partition_square_with_hole() {
        // square [0,1]^2 with constrained inner square hole [0.4,0.6]^2
        let mut d = Delaunay::new(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0));
        let outer = [
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        let inner = [
            Vec2::new(0.4, 0.4),
            Vec2::new(0.6, 0.4),
            Vec2::new(0.6, 0.6),
            Vec2::new(0.4, 0.6),
        ];
        let oi: Vec<usize> = outer.iter().map(|&p| d.insert(p, 0, 1e-12)).collect();
        let ii: Vec<usize> = inner.iter().map(|&p| d.insert(p, 0, 1e-12)).collect();
        for k in 0..4 {
            d.enforce(oi[k], oi[(k + 1) % 4]);
            d.enforce(ii[k], ii[(k + 1) % 4]);
        }
        d.label_regions(|c| {
            let inside_outer = c.x > 0.0 && c.x < 1.0 && c.y > 0.0 && c.y < 1.0;
            let inside_inner = c.x > 0.4 && c.x < 0.6 && c.y > 0.4 && c.y < 0.6;
            if inside_inner {
                Region::Hole
            } else if inside_outer {
                Region::Kept(Subdomain::Fluid)
            } else {
                Region::Outside
            }
        });
        let kept = d.kept_triangles().count();
        assert!(kept >= 8, "kept {kept}");
        // total kept area = 1 - 0.04
        let area: f64 = d
            .kept_triangles()
            .map(|(_, t)| {
                let (a, b, c) = (d.points[t.v[0]], d.points[t.v[1]], d.points[t.v[2]]);
                0.5 * (b - a).cross(c - a)
            })
            .sum();
        assert!((area - 0.96).abs() < 1e-12, "area {area}");
    }
}
