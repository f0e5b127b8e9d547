//! Mesh generation: curve sampling, constrained Delaunay triangulation,
//! quality/size-driven refinement, Laplacian smoothing, and quadratic upgrade
//! with mid-edge snapping onto the exact curves.
//!
//! The pipeline:
//! 1. sample every boundary/hole/interface curve into chords sized by the
//!    local size field, insert the samples, and constrain the chords;
//! 2. seed the interior with a culled fine lattice (greedy disk packing
//!    against accepted points, deterministic scan order);
//! 3. label triangle regions (outside / hole / fluid / solid) by flood fill;
//! 4. alternate smoothing + Delaunay restoration with targeted insertion
//!    (curve-split for constrained edges, circumcenter or longest-edge
//!    midpoint otherwise) until angle and size floors hold;
//! 5. extract the quadratic mesh and optionally snap curved-facet mid-edge
//!    nodes onto the exact curves.

use super::delaunay::{Delaunay, Region};
use super::{BoundaryFacet, Element, MeshError, QuadraticMesh, Subdomain};
use crate::geometry::{Curve, GeometryModel};
use crate::vec2::Vec2;
use std::collections::HashMap;

/// Whether mid-edge nodes of curved facets are snapped onto the exact curves
/// (`Curved`) or left at chord midpoints (`Straight`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshOrder {
    Straight,
    Curved,
}

/// Quality floors enforced by generation.
const MIN_ANGLE_DEG: f64 = 20.0;
/// Refinement targets a slightly higher angle so the floor survives smoothing.
const REFINE_ANGLE_DEG: f64 = 21.0;
/// Longest-edge-to-size ratio that triggers refinement (final sizes must stay
/// within a factor of 2 of the size field).
const MAX_EDGE_FACTOR: f64 = 1.8;
const MAX_PASSES: usize = 60;

struct Chain {
    curve: Curve,
    tag: Option<usize>,
    /// Delaunay vertex ids along the curve (closed chains wrap).
    verts: Vec<usize>,
    closed: bool,
}

pub fn generate_mesh(geom: &GeometryModel, order: MeshOrder) -> Result<QuadraticMesh, MeshError> {
    geom.validate().map_err(MeshError::Geometry)?;
    let (lo, hi) = geom.bounding_box();
    let diag = (hi - lo).norm();
    let merge_tol = 1e-9 * diag;

    let mut tags: Vec<String> = Vec::new();
    let tag_id = |tags: &mut Vec<String>, name: &str| -> usize {
        if let Some(i) = tags.iter().position(|t| t == name) {
            i
        } else {
            tags.push(name.to_string());
            tags.len() - 1
        }
    };

    let mut del = Delaunay::new(lo, hi);
    let mut chains: Vec<Chain> = Vec::new();

    // 1. chain sampling ----------------------------------------------------
    let mut hint = 0usize;
    let mut add_chain = |del: &mut Delaunay, curve: &Curve, tag: Option<usize>| {
        let params = sample_params(curve, geom);
        let closed = curve.is_closed();
        let mut verts = Vec::with_capacity(params.len());
        for &t in &params {
            let p = curve.point_at(t);
            let v = del.insert(p, hint, merge_tol);
            del.fixed[v] = true;
            hint = del.locate(p, hint);
            verts.push(v);
        }
        chains.push(Chain { curve: curve.clone(), tag, verts, closed });
    };

    for tc in &geom.outer {
        let t = tag_id(&mut tags, &tc.tag);
        add_chain(&mut del, &tc.curve, Some(t));
    }
    for hole in &geom.holes {
        for tc in hole {
            let t = tag_id(&mut tags, &tc.tag);
            add_chain(&mut del, &tc.curve, Some(t));
        }
    }
    for disk in &geom.particles {
        let c = Curve::Circle { center: disk.center, radius: disk.radius };
        add_chain(&mut del, &c, None);
    }

    for c in 0..chains.len() {
        let n = chains[c].verts.len();
        let last = if chains[c].closed { n } else { n - 1 };
        for k in 0..last {
            let (a, b) = (chains[c].verts[k], chains[c].verts[(k + 1) % n]);
            if a != b {
                del.enforce(a, b);
            }
        }
    }

    // 2. interior lattice ---------------------------------------------------
    seed_interior(&mut del, geom, lo, hi, merge_tol);

    // 3. region labels ------------------------------------------------------
    let relabel = |del: &mut Delaunay| {
        del.label_regions(|c| {
            if !geom.contains(c) {
                if chain_hole_contains(geom, c) {
                    Region::Hole
                } else {
                    Region::Outside
                }
            } else if geom.in_solid(c) {
                Region::Kept(Subdomain::Solid)
            } else {
                Region::Kept(Subdomain::Fluid)
            }
        });
    };
    relabel(&mut del);

    // 4. smoothing / refinement loop ---------------------------------------
    let mut constraint_of: HashMap<(usize, usize), usize> = HashMap::new();
    for (ci, ch) in chains.iter().enumerate() {
        let n = ch.verts.len();
        let last = if ch.closed { n } else { n - 1 };
        for k in 0..last {
            let (a, b) = (ch.verts[k], ch.verts[(k + 1) % n]);
            constraint_of.insert((a.min(b), a.max(b)), ci);
        }
    }

    let mut stalled_bad = 0usize;
    for pass in 0..MAX_PASSES {
        smooth_pass(&mut del);
        for _ in 0..6 {
            if del.restore_delaunay_pass() == 0 {
                break;
            }
        }
        let bad = collect_bad(&del, geom);
        if bad.is_empty() {
            stalled_bad = 0;
            break;
        }
        stalled_bad = bad.len();
        if pass == MAX_PASSES - 1 {
            break;
        }
        for (t, _score) in bad {
            if !del.tris[t].alive {
                continue; // consumed by an earlier insertion this pass
            }
            treat_bad_triangle(&mut del, geom, t, &mut chains, &mut constraint_of, merge_tol);
        }
        relabel(&mut del); // splits add chain vertices; labels stay but cheap to refresh
    }
    if stalled_bad > 0 {
        return Err(MeshError::RefinementStall { iters: MAX_PASSES, n_bad: stalled_bad });
    }

    // 5. extraction ---------------------------------------------------------
    let mut mesh = extract(&del, &chains, &tags)?;
    if order == MeshOrder::Curved {
        snap_mesh_to_curves(&mut mesh, geom)?;
    }
    mesh.validate()?;
    let n_below = mesh
        .elems
        .iter()
        .filter(|el| {
            crate::mesh::triangle_min_angle_deg(
                mesh.vertices[el.v[0]],
                mesh.vertices[el.v[1]],
                mesh.vertices[el.v[2]],
            ) < MIN_ANGLE_DEG
        })
        .count();
    if n_below > 0 {
        return Err(MeshError::RefinementStall {
            iters: MAX_PASSES,
            n_bad: n_below,
        });
    }
    Ok(mesh)
}

/// Adaptive parameter sampling of a curve with local spacing ~0.95 x size.
fn sample_params(curve: &Curve, geom: &GeometryModel) -> Vec<f64> {
    let len = curve.length();
    let mut raw = vec![0.0f64];
    let mut t = 0.0;
    loop {
        let s = geom.size.eval(curve.point_at(t));
        let dt = 0.95 * s / len;
        t += dt;
        if t >= 1.0 - 0.5 * dt {
            break;
        }
        raw.push(t);
    }
    // rescale so the last interval matches the others instead of being short
    let end = *raw.last().unwrap()
        + 0.95 * geom.size.eval(curve.point_at(*raw.last().unwrap())) / len;
    for v in &mut raw {
        *v /= end;
    }
    if curve.is_closed() {
        while raw.len() < 8 {
            // very coarse size fields still need a recognizable circle
            let n = raw.len() + 1;
            raw = (0..n).map(|k| k as f64 / n as f64).collect();
        }
    } else {
        raw.push(1.0);
    }
    raw
}

/// Greedy deterministic disk packing on a fine staggered lattice.
fn seed_interior(del: &mut Delaunay, geom: &GeometryModel, lo: Vec2, hi: Vec2, merge_tol: f64) {
    let finest = geom
        .size
        .features
        .iter()
        .map(|f| f.size)
        .fold(geom.size.base, f64::min);
    let step = 0.45 * finest;
    let cell = step.max(1e-12);
    let inv_cell = 1.0 / cell;
    let mut grid: HashMap<(i64, i64), Vec<Vec2>> = HashMap::new();
    let key = |p: Vec2| ((p.x * inv_cell).floor() as i64, (p.y * inv_cell).floor() as i64);
    // chain samples repel lattice points
    for i in del.n_super()..del.points.len() {
        let p = del.points[i];
        grid.entry(key(p)).or_default().push(p);
    }
    let clearance_ok = |grid: &HashMap<(i64, i64), Vec<Vec2>>, p: Vec2, r: f64| -> bool {
        let reach = (r * inv_cell).ceil() as i64 + 1;
        let (cx, cy) = key(p);
        for gx in (cx - reach)..=(cx + reach) {
            for gy in (cy - reach)..=(cy + reach) {
                if let Some(pts) = grid.get(&(gx, gy)) {
                    for &q in pts {
                        if (p - q).norm() < r {
                            return false;
                        }
                    }
                }
            }
        }
        true
    };
    let ny = ((hi.y - lo.y) / (step * 0.866)).ceil() as usize + 1;
    let nx = ((hi.x - lo.x) / step).ceil() as usize + 2;
    let mut hint = 0usize;
    for j in 0..ny {
        let y = lo.y + (j as f64 + 0.5) * step * 0.866;
        let xoff = if j % 2 == 0 { 0.25 } else { 0.75 };
        for i in 0..nx {
            let p = Vec2::new(lo.x + (i as f64 + xoff) * step, y);
            if p.x >= hi.x || p.y >= hi.y {
                continue;
            }
            if !geom.contains(p) {
                continue;
            }
            let s = geom.size.eval(p);
            if !clearance_ok(&grid, p, 0.82 * s) {
                continue;
            }
            let v = del.insert(p, hint, merge_tol);
            hint = del.vert_tri_hint(v);
            grid.entry(key(p)).or_default().push(p);
        }
    }
}

/// True if `p` is inside one of the geometry's hole chains.
fn chain_hole_contains(geom: &GeometryModel, p: Vec2) -> bool {
    geom.holes.iter().any(|h| {
        // quick test against circles, polyline test otherwise
        if h.len() == 1 {
            if let Curve::Circle { center, radius } = h[0].curve {
                return (p - center).norm() < radius;
            }
        }
        let probe = GeometryModel {
            outer: h.clone(),
            holes: vec![],
            particles: vec![],
            size: geom.size.clone(),
        };
        probe.contains(p)
    })
}

/// Bad-triangle collection: (triangle, badness) sorted worst-first.
fn collect_bad(del: &Delaunay, geom: &GeometryModel) -> Vec<(usize, f64)> {
    let mut bad = Vec::new();
    for (t, tri) in del.kept_triangles() {
        let (a, b, c) = (del.points[tri.v[0]], del.points[tri.v[1]], del.points[tri.v[2]]);
        let ang = super::triangle_min_angle_deg(a, b, c);
        let centroid = (a + b + c) / 3.0;
        let s = geom.size.eval(centroid);
        let lmax = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        let mut score = 0.0f64;
        if ang < REFINE_ANGLE_DEG {
            score = score.max(REFINE_ANGLE_DEG / ang.max(1e-3));
        }
        if lmax > MAX_EDGE_FACTOR * s {
            score = score.max(lmax / s);
        }
        if score > 0.0 {
            bad.push((t, score));
        }
    }
    bad.sort_by(|x, y| y.1.total_cmp(&x.1));
    bad
}

/// One refinement action on a bad triangle.
fn treat_bad_triangle(
    del: &mut Delaunay,
    geom: &GeometryModel,
    t: usize,
    chains: &mut Vec<Chain>,
    constraint_of: &mut HashMap<(usize, usize), usize>,
    merge_tol: f64,
) {
    let tri = del.tris[t].clone();
    let pts = [del.points[tri.v[0]], del.points[tri.v[1]], del.points[tri.v[2]]];
    // longest edge
    let mut lk = 0;
    let mut lmax = 0.0;
    for k in 0..3 {
        let l = (pts[(k + 1) % 3] - pts[k]).norm();
        if l > lmax {
            lmax = l;
            lk = k;
        }
    }
    let (ea, eb) = (tri.v[lk], tri.v[(lk + 1) % 3]);
    if del.is_constrained(ea, eb) {
        split_constrained_edge(del, chains, constraint_of, ea, eb, merge_tol);
        return;
    }
    // try circumcenter; fall back to longest-edge midpoint when it lands in a
    // different region (behind a constraint) or outside
    let cc = circumcenter(pts[0], pts[1], pts[2]);
    let target = {
        let loc = del.locate(cc, t);
        if del.tris[loc].region == tri.region && geom.contains(cc) == matches!(tri.region, Region::Kept(_)) {
            cc
        } else {
            0.5 * (pts[lk] + pts[(lk + 1) % 3])
        }
    };
    // a constrained edge may still sit between t and the insertion cavity; in
    // that case insert the midpoint of the triangle's own longest edge
    let loc = del.locate(target, t);
    let p = if del.tris[loc].region == tri.region {
        target
    } else {
        0.5 * (pts[lk] + pts[(lk + 1) % 3])
    };
    del.insert(p, t, merge_tol);
}

/// Splits constrained edge (a, b) at the on-curve parameter midpoint.
fn split_constrained_edge(
    del: &mut Delaunay,
    chains: &mut Vec<Chain>,
    constraint_of: &mut HashMap<(usize, usize), usize>,
    a: usize,
    b: usize,
    merge_tol: f64,
) {
    let k = (a.min(b), a.max(b));
    let Some(&ci) = constraint_of.get(&k) else { return };
    let chain = &chains[ci];
    // position of the segment in the chain
    let n = chain.verts.len();
    let last = if chain.closed { n } else { n - 1 };
    let mut seg = None;
    for i in 0..last {
        let (u, v) = (chain.verts[i], chain.verts[(i + 1) % n]);
        if (u.min(v), u.max(v)) == k {
            seg = Some(i);
            break;
        }
    }
    let Some(i) = seg else { return };
    let chord_mid = 0.5 * (del.points[a] + del.points[b]);
    let (_, m) = chain.curve.project(chord_mid);
    del.unconstrain(a, b);
    constraint_of.remove(&k);
    let vm = del.insert(m, 0, merge_tol);
    del.fixed[vm] = true;
    let (u, v) = (chains[ci].verts[i], chains[ci].verts[(i + 1) % chains[ci].verts.len()]);
    del.enforce(u, vm);
    del.enforce(vm, v);
    constraint_of.insert((u.min(vm), u.max(vm)), ci);
    constraint_of.insert((vm.min(v), vm.max(v)), ci);
    chains[ci].verts.insert(i + 1, vm);
}

fn circumcenter(a: Vec2, b: Vec2, c: Vec2) -> Vec2 {
    let d = 2.0 * (a.x * (b.y - c.y) + b.x * (c.y - a.y) + c.x * (a.y - b.y));
    if d.abs() < 1e-300 {
        return (a + b + c) / 3.0;
    }
    let ux = (a.norm_sq() * (b.y - c.y) + b.norm_sq() * (c.y - a.y) + c.norm_sq() * (a.y - b.y)) / d;
    let uy = (a.norm_sq() * (c.x - b.x) + b.norm_sq() * (a.x - c.x) + c.norm_sq() * (b.x - a.x)) / d;
    Vec2::new(ux, uy)
}

/// One Laplacian smoothing sweep over free vertices; a move is kept only when
/// it does not invert or worsen the local minimum angle.
fn smooth_pass(del: &mut Delaunay) {
    let npts = del.points.len();
    for v in del.n_super()..npts {
        if del.fixed[v] {
            continue;
        }
        let around = del.kept_triangles_around(v);
        if around.is_empty() {
            continue;
        }
        let mut sum = Vec2::ZERO;
        let mut count = 0.0;
        let mut old_min = f64::INFINITY;
        for &t in &around {
            let tv = del.tris[t].v;
            for &u in &tv {
                if u != v {
                    sum += del.points[u];
                    count += 1.0;
                }
            }
            old_min = old_min.min(super::triangle_min_angle_deg(
                del.points[tv[0]],
                del.points[tv[1]],
                del.points[tv[2]],
            ));
        }
        let candidate = sum / count;
        let old = del.points[v];
        del.points[v] = candidate;
        let mut new_min = f64::INFINITY;
        let mut ok = true;
        for &t in &around {
            let tv = del.tris[t].v;
            let (a, b, c) = (del.points[tv[0]], del.points[tv[1]], del.points[tv[2]]);
            if (b - a).cross(c - a) <= 0.0 {
                ok = false;
                break;
            }
            new_min = new_min.min(super::triangle_min_angle_deg(a, b, c));
        }
        if !ok || new_min < old_min - 1e-9 {
            del.points[v] = old;
        }
    }
}

/// Builds the quadratic mesh from the labeled triangulation.
fn extract(del: &Delaunay, chains: &[Chain], tags: &[String]) -> Result<QuadraticMesh, MeshError> {
    let mut vmap: HashMap<usize, usize> = HashMap::new();
    let mut vertices: Vec<Vec2> = Vec::new();
    let mut elems: Vec<Element> = Vec::new();
    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
    let mut edges: Vec<[usize; 2]> = Vec::new();
    let mut edge_subs: Vec<[Option<Subdomain>; 2]> = Vec::new();

    let mut kept: Vec<(usize, Subdomain)> = Vec::new();
    for (t, tri) in del.kept_triangles() {
        let Region::Kept(sub) = tri.region else { unreachable!() };
        kept.push((t, sub));
    }
    // deterministic element order: delaunay triangle index
    kept.sort_by_key(|&(t, _)| t);
    for &(t, sub) in &kept {
        let tri = &del.tris[t];
        let mut v = [0usize; 3];
        for k in 0..3 {
            let g = tri.v[k];
            let id = *vmap.entry(g).or_insert_with(|| {
                vertices.push(del.points[g]);
                vertices.len() - 1
            });
            v[k] = id;
        }
        let mut e = [0usize; 3];
        for k in 0..3 {
            let (a, b) = (v[k], v[(k + 1) % 3]);
            let ek = (a.min(b), a.max(b));
            let id = *edge_map.entry(ek).or_insert_with(|| {
                edges.push([ek.0, ek.1]);
                edge_subs.push([None, None]);
                edges.len() - 1
            });
            let s = &mut edge_subs[id];
            if s[0].is_none() {
                s[0] = Some(sub);
            } else {
                s[1] = Some(sub);
            }
            e[k] = id;
        }
        elems.push(Element { v, e, subdomain: sub });
    }

    let midpoints: Vec<Vec2> = edges
        .iter()
        .map(|&[a, b]| 0.5 * (vertices[a] + vertices[b]))
        .collect();

    // boundary facets from tagged chain segments
    let mut boundary = Vec::new();
    for ch in chains {
        let Some(tag) = ch.tag else { continue };
        let n = ch.verts.len();
        let last = if ch.closed { n } else { n - 1 };
        for k in 0..last {
            let (ga, gb) = (ch.verts[k], ch.verts[(k + 1) % n]);
            let (Some(&a), Some(&b)) = (vmap.get(&ga), vmap.get(&gb)) else {
                continue; // chain segment fully outside the kept region
            };
            if let Some(&e) = edge_map.get(&(a.min(b), a.max(b))) {
                // only keep true boundary edges (one kept side)
                if edge_subs[e][1].is_none() {
                    boundary.push(BoundaryFacet { edge: e, tag });
                }
            }
        }
    }
    boundary.sort_by_key(|f| f.edge);
    boundary.dedup_by_key(|f| f.edge);

    let interface: Vec<usize> = edge_subs
        .iter()
        .enumerate()
        .filter(|(_, s)| matches!(s, [Some(a), Some(b)] if a != b))
        .map(|(i, _)| i)
        .collect();

    if elems.is_empty() {
        return Err(MeshError::NotConforming("no elements kept".into()));
    }
    Ok(QuadraticMesh {
        vertices,
        midpoints,
        edges,
        elems,
        boundary,
        interface,
        tags: tags.to_vec(),
    })
}

/// Projects the mid-edge nodes of boundary and interface facets onto the
/// nearest exact curve of the geometry. Returns the number of nodes moved.
/// Facet endpoints already lie on their curves, so the curve is identified by
/// the smaller endpoint distance; ambiguity beyond `1e-6 x` diagonal is an
/// error.
pub fn snap_mesh_to_curves(
    mesh: &mut QuadraticMesh,
    geom: &GeometryModel,
) -> Result<usize, MeshError> {
    let (lo, hi) = geom.bounding_box();
    let accept = 1e-6 * (hi - lo).norm();
    let mut curves: Vec<Curve> = Vec::new();
    for tc in geom.outer.iter().chain(geom.holes.iter().flatten()) {
        curves.push(tc.curve.clone());
    }
    for d in &geom.particles {
        curves.push(Curve::Circle { center: d.center, radius: d.radius });
    }
    let mut moved = 0usize;
    let mut snap_edge = |mesh: &mut QuadraticMesh, e: usize| -> Result<(), MeshError> {
        let [a, b] = mesh.edges[e];
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let chord_mid = 0.5 * (pa + pb);
        let mut best: Option<(f64, Vec2)> = None;
        for c in &curves {
            let d = c.distance(pa).max(c.distance(pb));
            if d < best.as_ref().map(|x| x.0).unwrap_or(f64::INFINITY) {
                best = Some((d, c.project(chord_mid).1));
            }
        }
        match best {
            Some((d, m)) if d <= accept => {
                if (mesh.midpoints[e] - m).norm() > 0.0 {
                    mesh.midpoints[e] = m;
                    moved += 1;
                }
                Ok(())
            }
            _ => Err(MeshError::ProjectionDiverged {
                what: format!("edge {e} endpoints not on any curve"),
            }),
        }
    };
    let facet_edges: Vec<usize> = mesh
        .boundary
        .iter()
        .map(|f| f.edge)
        .chain(mesh.interface.iter().copied())
        .collect();
    for e in facet_edges {
        snap_edge(mesh, e)?;
    }
    // Snapping must not invert adjacent elements.
    for i in 0..mesh.n_elems() {
        let (dmin, _) = mesh.elem_detj_range(i);
        if dmin <= 0.0 {
            return Err(MeshError::InvertedElement { elem: i, detj: dmin });
        }
    }
    Ok(moved)
}
