//! Exact domain geometry: curves, tagged boundary chains, solid inclusions,
//! and the mesh size field.
//!
//! Domains are built from straight segments and circular arcs only. Each curve
//! carries a tag used later for boundary-condition assignment; particle disks
//! are carried separately because they bound the solid subdomain rather than a
//! hole. All curves are exact: mesh generation first works with polyline
//! approximations and then snaps mid-edge nodes back onto these curves.

use crate::vec2::Vec2;
use std::f64::consts::TAU;

/// A parametric curve, t in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub enum Curve {
    /// Straight segment from `a` to `b`.
    Segment { a: Vec2, b: Vec2 },
    /// Circular arc from angle `a0` to `a1` (radians): counterclockwise when
    /// `a1 > a0`, clockwise when `a1 < a0` (as needed for inner walls of
    /// annular regions traversed against the outer wall's direction).
    Arc { center: Vec2, radius: f64, a0: f64, a1: f64 },
    /// Full circle, parameterized counterclockwise from angle 0.
    Circle { center: Vec2, radius: f64 },
}

impl Curve {
    pub fn point_at(&self, t: f64) -> Vec2 {
        match *self {
            Curve::Segment { a, b } => a + t * (b - a),
            Curve::Arc { center, radius, a0, a1 } => {
                let th = a0 + t * (a1 - a0);
                center + radius * Vec2::new(th.cos(), th.sin())
            }
            Curve::Circle { center, radius } => {
                let th = t * TAU;
                center + radius * Vec2::new(th.cos(), th.sin())
            }
        }
    }

    pub fn start(&self) -> Vec2 {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Vec2 {
        self.point_at(1.0)
    }

    pub fn length(&self) -> f64 {
        match *self {
            Curve::Segment { a, b } => (b - a).norm(),
            Curve::Arc { radius, a0, a1, .. } => radius * (a1 - a0).abs(),
            Curve::Circle { radius, .. } => radius * TAU,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, Curve::Circle { .. })
    }

    /// Closest point on the curve; returns (parameter, point).
    pub fn project(&self, p: Vec2) -> (f64, Vec2) {
        match *self {
            Curve::Segment { a, b } => {
                let ab = b - a;
                let t = ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0);
                (t, a + t * ab)
            }
            Curve::Arc { center, radius, a0, a1 } => {
                if a1 < a0 {
                    // clockwise arc: project onto its reversal and flip t
                    let rev = Curve::Arc { center, radius, a0: a1, a1: a0 };
                    let (t, q) = rev.project(p);
                    return (1.0 - t, q);
                }
                let d = p - center;
                let th = d.y.atan2(d.x);
                // shift th into [a0, a0 + 2pi) and clamp into the sweep
                let mut s = (th - a0).rem_euclid(TAU);
                if s > a1 - a0 {
                    // outside the sweep: snap to the nearer endpoint
                    let mid_gap = (a1 - a0 + TAU) / 2.0;
                    s = if s - (a1 - a0) < mid_gap - (a1 - a0) { a1 - a0 } else { 0.0 };
                }
                let t = s / (a1 - a0);
                (t, self.point_at(t))
            }
            Curve::Circle { center, radius } => {
                let d = p - center;
                let n = d.norm();
                if n < 1e-300 {
                    return (0.0, center + Vec2::new(radius, 0.0));
                }
                let th = d.y.atan2(d.x).rem_euclid(TAU);
                (th / TAU, center + (radius / n) * d)
            }
        }
    }

    /// Distance from `p` to the curve.
    pub fn distance(&self, p: Vec2) -> f64 {
        (p - self.project(p).1).norm()
    }
}

/// A curve with a boundary-condition tag.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedCurve {
    pub curve: Curve,
    pub tag: String,
}

impl TaggedCurve {
    pub fn new(curve: Curve, tag: impl Into<String>) -> Self {
        TaggedCurve { curve, tag: tag.into() }
    }
}

/// A solid circular inclusion (particle). Its boundary is the fluid-solid
/// interface, not a domain boundary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disk {
    pub center: Vec2,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm_sq() < self.radius * self.radius
    }
}

/// Target-size field for mesh generation: a base size reduced near registered
/// circular features, growing back linearly over a transition band.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SizeField {
    pub base: f64,
    pub features: Vec<SizeFeature>,
}

/// Size reduction around a circle of radius `radius` centered at `center`:
/// `size` within distance `band0` of the circle, then a linear ramp back to
/// the base size at distance `band1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SizeFeature {
    pub center: Vec2,
    pub radius: f64,
    pub size: f64,
    pub band0: f64,
    pub band1: f64,
}

impl SizeField {
    pub fn uniform(base: f64) -> Self {
        SizeField { base, features: Vec::new() }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        let mut s = self.base;
        for f in &self.features {
            let d = ((p - f.center).norm() - f.radius).abs();
            let fs = if d <= f.band0 {
                f.size
            } else if d < f.band1 {
                let t = (d - f.band0) / (f.band1 - f.band0);
                f.size + t * (self.base - f.size)
            } else {
                self.base
            };
            s = s.min(fs);
        }
        s
    }

    /// Uniform scaling of every target size, used by convergence studies to
    /// build a mesh family from one layout.
    pub fn scaled(&self, factor: f64) -> SizeField {
        SizeField {
            base: self.base * factor,
            features: self
                .features
                .iter()
                .map(|f| SizeFeature { size: f.size * factor, ..*f })
                .collect(),
        }
    }
}

/// Full domain description handed to the mesh generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryModel {
    /// Closed counterclockwise outer boundary chain (or a single circle).
    pub outer: Vec<TaggedCurve>,
    /// Closed hole chains (pillars, obstacles); interiors are removed.
    pub holes: Vec<Vec<TaggedCurve>>,
    /// Solid inclusions; interiors are meshed and labeled solid.
    pub particles: Vec<Disk>,
    pub size: SizeField,
}

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("chain is not closed: gap of {gap:.3e} after curve {index}")]
    OpenChain { index: usize, gap: f64 },
    #[error("particle {index} is not strictly inside the fluid region (clearance {clearance:.3e})")]
    ParticlePlacement { index: usize, clearance: f64 },
    #[error("geometry has no outer boundary")]
    NoOuterBoundary,
}

impl GeometryModel {
    /// Structural validation: chains close up, particles sit strictly inside
    /// the fluid region with positive clearance from walls, holes and each
    /// other.
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.outer.is_empty() {
            return Err(GeometryError::NoOuterBoundary);
        }
        check_chain_closed(&self.outer)?;
        for h in &self.holes {
            check_chain_closed(h)?;
        }
        for (i, p) in self.particles.iter().enumerate() {
            let mut clearance = f64::INFINITY;
            for tc in self.outer.iter().chain(self.holes.iter().flatten()) {
                clearance = clearance.min(tc.curve.distance(p.center) - p.radius);
            }
            for (j, q) in self.particles.iter().enumerate() {
                if i != j {
                    clearance =
                        clearance.min((p.center - q.center).norm() - p.radius - q.radius);
                }
            }
            if !self.contains(p.center) || clearance <= 0.0 {
                return Err(GeometryError::ParticlePlacement { index: i, clearance });
            }
        }
        Ok(())
    }

    /// Point-in-domain test (inside outer, outside all holes; particles are
    /// part of the domain). Points on boundaries are classified arbitrarily.
    pub fn contains(&self, p: Vec2) -> bool {
        chain_contains(&self.outer, p) && !self.holes.iter().any(|h| chain_contains(h, p))
    }

    /// Subdomain label helper: true if inside some particle disk.
    pub fn in_solid(&self, p: Vec2) -> bool {
        self.particles.iter().any(|d| d.contains(p))
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for tc in &self.outer {
            for k in 0..=32 {
                let p = tc.curve.point_at(k as f64 / 32.0);
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        (lo, hi)
    }
}

fn check_chain_closed(chain: &[TaggedCurve]) -> Result<(), GeometryError> {
    if chain.len() == 1 && chain[0].curve.is_closed() {
        return Ok(());
    }
    for (i, tc) in chain.iter().enumerate() {
        let next = &chain[(i + 1) % chain.len()];
        let gap = (tc.curve.end() - next.curve.start()).norm();
        if gap > 1e-9 {
            return Err(GeometryError::OpenChain { index: i, gap });
        }
    }
    Ok(())
}

/// Even-odd point-in-chain test on a fine polyline approximation.
fn chain_contains(chain: &[TaggedCurve], p: Vec2) -> bool {
    let mut crossings = 0usize;
    for tc in chain {
        let n = match tc.curve {
            Curve::Segment { .. } => 1,
            _ => 256,
        };
        let mut prev = tc.curve.point_at(0.0);
        for k in 1..=n {
            let cur = tc.curve.point_at(k as f64 / n as f64);
            // horizontal ray to +x
            if (prev.y > p.y) != (cur.y > p.y) {
                let t = (p.y - prev.y) / (cur.y - prev.y);
                let x = prev.x + t * (cur.x - prev.x);
                if x > p.x {
                    crossings += 1;
                }
            }
            prev = cur;
        }
    }
    crossings % 2 == 1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect_chain(w: f64, h: f64) -> Vec<TaggedCurve> {
        let c = |a: Vec2, b: Vec2, tag: &str| TaggedCurve::new(Curve::Segment { a, b }, tag);
        vec![
            c(Vec2::new(0.0, 0.0), Vec2::new(w, 0.0), "bottom"),
            c(Vec2::new(w, 0.0), Vec2::new(w, h), "right"),
            c(Vec2::new(w, h), Vec2::new(0.0, h), "top"),
            c(Vec2::new(0.0, h), Vec2::new(0.0, 0.0), "left"),
        ]
    }

    #[test]
    fn rectangle_contains() {
        let g = GeometryModel {
            outer: rect_chain(2.0, 1.0),
            holes: vec![],
            particles: vec![],
            size: SizeField::uniform(0.1),
        };
        assert!(g.contains(Vec2::new(1.0, 0.5)));
        assert!(!g.contains(Vec2::new(-0.1, 0.5)));
        assert!(!g.contains(Vec2::new(1.0, 1.2)));
        g.validate().unwrap();
    }

    #[test]
    fn hole_excluded() {
        let g = GeometryModel {
            outer: rect_chain(2.0, 1.0),
            holes: vec![vec![TaggedCurve::new(
                Curve::Circle { center: Vec2::new(1.0, 0.5), radius: 0.2 },
                "pillar",
            )]],
            particles: vec![],
            size: SizeField::uniform(0.1),
        };
        assert!(!g.contains(Vec2::new(1.0, 0.5)));
        assert!(g.contains(Vec2::new(0.3, 0.5)));
    }

    #[test]
    fn particle_clearance_enforced() {
        let mut g = GeometryModel {
            outer: rect_chain(2.0, 1.0),
            holes: vec![],
            particles: vec![Disk { center: Vec2::new(0.5, 0.5), radius: 0.1 }],
            size: SizeField::uniform(0.1),
        };
        g.validate().unwrap();
        g.particles[0].center = Vec2::new(0.05, 0.5); // overlaps the left wall
        assert!(matches!(
            g.validate(),
            Err(GeometryError::ParticlePlacement { .. })
        ));
    }

    #[test]
    fn arc_projection_clamps_to_sweep() {
        let arc = Curve::Arc {
            center: Vec2::ZERO,
            radius: 1.0,
            a0: 0.0,
            a1: std::f64::consts::FRAC_PI_2,
        };
        // point near the arc interior projects radially
        let (_, q) = arc.project(Vec2::new(0.8, 0.7));
        assert!((q.norm() - 1.0).abs() < 1e-14);
        // point far outside the sweep snaps to an endpoint
        let (_, q) = arc.project(Vec2::new(0.9, -0.5));
        assert!((q - Vec2::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn clockwise_arc_runs_backwards() {
        let cw = Curve::Arc {
            center: Vec2::ZERO,
            radius: 2.0,
            a0: std::f64::consts::FRAC_PI_2,
            a1: 0.0,
        };
        assert!((cw.start() - Vec2::new(0.0, 2.0)).norm() < 1e-14);
        assert!((cw.end() - Vec2::new(2.0, 0.0)).norm() < 1e-14);
        assert!((cw.length() - std::f64::consts::PI).abs() < 1e-14);
        let (t, q) = cw.project(Vec2::new(1.0, 1.0));
        assert!((q.norm() - 2.0).abs() < 1e-14);
        assert!((t - 0.5).abs() < 1e-12);
        assert!((cw.point_at(t) - q).norm() < 1e-12);
    }

    #[test]
    fn size_field_ramp() {
        let sf = SizeField {
            base: 0.1,
            features: vec![SizeFeature {
                center: Vec2::ZERO,
                radius: 0.5,
                size: 0.025,
                band0: 0.05,
                band1: 0.3,
            }],
        };
        assert!((sf.eval(Vec2::new(0.5, 0.0)) - 0.025).abs() < 1e-15);
        assert!((sf.eval(Vec2::new(2.0, 0.0)) - 0.1).abs() < 1e-15);
        let mid = sf.eval(Vec2::new(0.5 + 0.175, 0.0));
        assert!(mid > 0.025 && mid < 0.1);
    }
}
