//! Plain-text mesh serialization.
//!
//! Format (whitespace separated, `#` starts a comment line):
//!
//! ```text
//! fsimesh 1
//! tags <n>            # n lines: <id> <name>
//! vertices <n>        # n lines: <x> <y>
//! midpoints <n>       # n lines: <x> <y>   (one per edge)
//! edges <n>           # n lines: <v0> <v1>
//! elements <n>        # n lines: <v0> <v1> <v2> <e0> <e1> <e2> <subdomain>
//! boundary <n>        # n lines: <edge> <tag-id>
//! interface <n>       # n lines: <edge>
//! ```
//!
//! Subdomains are serialized as 0 = fluid, 1 = solid. Coordinates use enough
//! digits to round-trip f64 exactly.

use std::fs;
use std::path::Path;

use super::{BoundaryFacet, Element, MeshError, QuadraticMesh, Subdomain};
use crate::vec2::Vec2;

const MAGIC: &str = "fsimesh";
const VERSION: u32 = 1;

/// Writes `mesh` to `path`, overwriting any existing file.
pub fn write_mesh(mesh: &QuadraticMesh, path: &Path) -> Result<(), MeshError> {
    fs::write(path, mesh_to_text(mesh))?;
    Ok(())
}

/// Serializes `mesh` in the plain-text format (also embedded by other cache
/// files).
pub fn mesh_to_text(mesh: &QuadraticMesh) -> String {
    let mut s = String::new();
    s.push_str(&format!("{MAGIC} {VERSION}\n"));
    s.push_str(&format!("tags {}\n", mesh.tags.len()));
    for (i, t) in mesh.tags.iter().enumerate() {
        s.push_str(&format!("{i} {t}\n"));
    }
    s.push_str(&format!("vertices {}\n", mesh.vertices.len()));
    for v in &mesh.vertices {
        s.push_str(&format!("{:?} {:?}\n", v.x, v.y));
    }
    s.push_str(&format!("midpoints {}\n", mesh.midpoints.len()));
    for m in &mesh.midpoints {
        s.push_str(&format!("{:?} {:?}\n", m.x, m.y));
    }
    s.push_str(&format!("edges {}\n", mesh.edges.len()));
    for e in &mesh.edges {
        s.push_str(&format!("{} {}\n", e[0], e[1]));
    }
    s.push_str(&format!("elements {}\n", mesh.elems.len()));
    for el in &mesh.elems {
        let r = match el.subdomain {
            Subdomain::Fluid => 0,
            Subdomain::Solid => 1,
        };
        s.push_str(&format!(
            "{} {} {} {} {} {} {}\n",
            el.v[0], el.v[1], el.v[2], el.e[0], el.e[1], el.e[2], r
        ));
    }
    s.push_str(&format!("boundary {}\n", mesh.boundary.len()));
    for f in &mesh.boundary {
        s.push_str(&format!("{} {}\n", f.edge, f.tag));
    }
    s.push_str(&format!("interface {}\n", mesh.interface.len()));
    for &e in &mesh.interface {
        s.push_str(&format!("{e}\n"));
    }
    s
}

/// Reads a mesh previously written by [`write_mesh`] and validates it.
pub fn read_mesh(path: &Path) -> Result<QuadraticMesh, MeshError> {
    let text = fs::read_to_string(path)?;
    mesh_from_text(&text)
}

/// Parses the plain-text format produced by [`mesh_to_text`] and validates
/// the result.
pub fn mesh_from_text(text: &str) -> Result<QuadraticMesh, MeshError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let bad = |what: &str| MeshError::Format(what.to_string());

    let header = lines.next().ok_or_else(|| bad("empty file"))?;
    let mut it = header.split_whitespace();
    if it.next() != Some(MAGIC) {
        return Err(bad("missing fsimesh header"));
    }
    let ver: u32 = it
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("missing version"))?;
    if ver != VERSION {
        return Err(MeshError::Format(format!("unsupported version {ver}")));
    }

    fn section<'a>(
        lines: &mut impl Iterator<Item = &'a str>,
        name: &str,
    ) -> Result<usize, MeshError> {
        let line = lines
            .next()
            .ok_or_else(|| MeshError::Format(format!("missing section {name}")))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(name) {
            return Err(MeshError::Format(format!(
                "expected section {name}, got {line:?}"
            )));
        }
        it.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| MeshError::Format(format!("bad count in section {name}")))
    }
    fn fields<'a>(
        lines: &mut impl Iterator<Item = &'a str>,
        n: usize,
        what: &str,
    ) -> Result<Vec<&'a str>, MeshError> {
        let line = lines
            .next()
            .ok_or_else(|| MeshError::Format(format!("truncated {what} section")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() < n {
            return Err(MeshError::Format(format!("short {what} line {line:?}")));
        }
        Ok(f)
    }
    fn num<T: std::str::FromStr>(tok: &str, what: &str) -> Result<T, MeshError> {
        tok.parse()
            .map_err(|_| MeshError::Format(format!("bad {what} token {tok:?}")))
    }

    let n_tags = section(&mut lines, "tags")?;
    let mut tags = vec![String::new(); n_tags];
    for _ in 0..n_tags {
        let f = fields(&mut lines, 2, "tags")?;
        let id: usize = num(f[0], "tag id")?;
        if id >= n_tags {
            return Err(bad("tag id out of range"));
        }
        tags[id] = f[1].to_string();
    }

    let n_verts = section(&mut lines, "vertices")?;
    let mut vertices = Vec::with_capacity(n_verts);
    for _ in 0..n_verts {
        let f = fields(&mut lines, 2, "vertices")?;
        vertices.push(Vec2::new(num(f[0], "coord")?, num(f[1], "coord")?));
    }

    let n_mids = section(&mut lines, "midpoints")?;
    let mut midpoints = Vec::with_capacity(n_mids);
    for _ in 0..n_mids {
        let f = fields(&mut lines, 2, "midpoints")?;
        midpoints.push(Vec2::new(num(f[0], "coord")?, num(f[1], "coord")?));
    }

    let n_edges = section(&mut lines, "edges")?;
    if n_edges != n_mids {
        return Err(bad("edge/midpoint count mismatch"));
    }
    let mut edges = Vec::with_capacity(n_edges);
    for _ in 0..n_edges {
        let f = fields(&mut lines, 2, "edges")?;
        edges.push([num(f[0], "edge vertex")?, num(f[1], "edge vertex")?]);
    }

    let n_elems = section(&mut lines, "elements")?;
    let mut elems = Vec::with_capacity(n_elems);
    for _ in 0..n_elems {
        let f = fields(&mut lines, 7, "elements")?;
        let subdomain = match num::<u32>(f[6], "subdomain")? {
            0 => Subdomain::Fluid,
            1 => Subdomain::Solid,
            r => return Err(MeshError::Format(format!("unknown subdomain code {r}"))),
        };
        elems.push(Element {
            v: [
                num(f[0], "element vertex")?,
                num(f[1], "element vertex")?,
                num(f[2], "element vertex")?,
            ],
            e: [
                num(f[3], "element edge")?,
                num(f[4], "element edge")?,
                num(f[5], "element edge")?,
            ],
            subdomain,
        });
    }

    let n_bnd = section(&mut lines, "boundary")?;
    let mut boundary = Vec::with_capacity(n_bnd);
    for _ in 0..n_bnd {
        let f = fields(&mut lines, 2, "boundary")?;
        boundary.push(BoundaryFacet {
            edge: num(f[0], "facet edge")?,
            tag: num(f[1], "facet tag")?,
        });
    }

    let n_ifc = section(&mut lines, "interface")?;
    let mut interface = Vec::with_capacity(n_ifc);
    for _ in 0..n_ifc {
        let f = fields(&mut lines, 1, "interface")?;
        interface.push(num(f[0], "interface edge")?);
    }

    let mesh = QuadraticMesh {
        vertices,
        midpoints,
        edges,
        elems,
        boundary,
        interface,
        tags,
    };
    mesh.validate()?;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Curve, GeometryModel, SizeField, TaggedCurve};
    use crate::mesh::generate::{generate_mesh, MeshOrder};

    fn square_geom(size: f64) -> GeometryModel {
        let c = |a: Vec2, b: Vec2, tag: &str| TaggedCurve {
            curve: Curve::Segment { a, b },
            tag: tag.to_string(),
        };
        GeometryModel {
            outer: vec![
                c(Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), "bottom"),
                c(Vec2::new(1.0, 0.0), Vec2::new(1.0, 1.0), "right"),
                c(Vec2::new(1.0, 1.0), Vec2::new(0.0, 1.0), "top"),
                c(Vec2::new(0.0, 1.0), Vec2::new(0.0, 0.0), "left"),
            ],
            holes: vec![],
            particles: vec![],
            size: SizeField::uniform(size),
        }
    }

    #[test]
    fn roundtrip_exact() {
        let mesh = generate_mesh(&square_geom(0.3), MeshOrder::Curved).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mesh.txt");
        write_mesh(&mesh, &path).unwrap();
        let back = read_mesh(&path).unwrap();
        assert_eq!(mesh.vertices.len(), back.vertices.len());
        assert_eq!(mesh.elems.len(), back.elems.len());
        for (a, b) in mesh.vertices.iter().zip(&back.vertices) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
        for (a, b) in mesh.midpoints.iter().zip(&back.midpoints) {
            assert_eq!(a.x, b.x);
            assert_eq!(a.y, b.y);
        }
        for (a, b) in mesh.elems.iter().zip(&back.elems) {
            assert_eq!(a.v, b.v);
            assert_eq!(a.e, b.e);
            assert_eq!(a.subdomain, b.subdomain);
        }
        assert_eq!(mesh.boundary.len(), back.boundary.len());
        assert_eq!(mesh.tags, back.tags);
    }

    #[test]
    fn rejects_garbage() {
        assert!(mesh_from_text("").is_err());
        assert!(mesh_from_text("fsimesh 2\n").is_err());
        assert!(mesh_from_text("fsimesh 1\ntags 0\nvertices 1\nnot numbers\n").is_err());
    }
}
