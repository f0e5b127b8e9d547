//! Scenario configuration and the concrete geometries/boundary conditions
//! built from it.
//!
//! A [`ScenarioConfig`] is a plain TOML document describing one transport
//! problem: channel shape (straight duct or annular loop), obstacles, the
//! elastic particle, physical parameters, time stepping, mesh sizes, and the
//! localized-update controls. The default configuration is the double-pillar
//! benchmark channel. Builders turn a config into a [`GeometryModel`] for the
//! mesh generator and into Dirichlet [`Constraints`] for the solver.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::path::Path;

use crate::fem::assembly::{Physics, ViscousForm};
use crate::fem::{Constraints, DofMap};
use crate::geometry::{Curve, Disk, GeometryModel, SizeField, SizeFeature, TaggedCurve};
use crate::mesh::{MeshOrder, QuadraticMesh};
use crate::stepping::Scheme;
use crate::vec2::Vec2;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Parabolic inflow profile of a straight channel of width `w`: zero on the
/// walls, peak `u0/8` on the centerline, directed along the channel axis.
pub fn inflow_profile(y: f64, w: f64, u0: f64) -> Vec2 {
    Vec2::new(0.5 * u0 * y * (w - y) / (w * w), 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemeChoice {
    Fo,
    Prk2,
}

impl std::str::FromStr for SchemeChoice {
    type Err = ScenarioError;
    fn from_str(s: &str) -> Result<Self, ScenarioError> {
        match s {
            "fo" => Ok(SchemeChoice::Fo),
            "prk2" => Ok(SchemeChoice::Prk2),
            other => Err(ScenarioError::Invalid(format!(
                "unknown scheme {other:?} (expected \"fo\" or \"prk2\")"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ViscousChoice {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysicsSection {
    pub reynolds: f64,
    pub elasticity: f64,
    pub viscous_form: ViscousChoice,
}

impl Default for PhysicsSection {
    fn default() -> Self {
        PhysicsSection {
            reynolds: 3.0,
            elasticity: 1e9,
            viscous_form: ViscousChoice::Discrete,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSection {
    /// Inflow amplitude; the parabolic profile peaks at `u0/8`.
    pub u0: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        FlowSection { u0: 8.0 }
    }
}

/// A circle given by center and radius (pillars, obstacles, the particle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiskSection {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl DiskSection {
    pub fn disk(&self) -> Disk {
        Disk { center: Vec2::new(self.x, self.y), radius: self.r }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub width: f64,
    pub length: f64,
    pub pillars: Vec<DiskSection>,
}

impl Default for ChannelSection {
    fn default() -> Self {
        ChannelSection {
            width: 1.0,
            length: 1.8,
            pillars: vec![
                DiskSection { x: 1.0, y: 0.15, r: 0.10 },
                DiskSection { x: 1.0, y: 0.85, r: 0.10 },
            ],
        }
    }
}

/// Annular loop channel (the miniature focusing demo). The loop spans the
/// full circle minus an opening of `gap_deg` degrees centered on the positive
/// x axis; flow enters at the face below the axis and exits at the face above
/// it after one loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpiralSection {
    pub r_inner: f64,
    pub r_outer: f64,
    pub gap_deg: f64,
    pub obstacles: Vec<DiskSection>,
}

impl Default for SpiralSection {
    fn default() -> Self {
        SpiralSection {
            r_inner: 0.5,
            r_outer: 0.9,
            gap_deg: 20.0,
            obstacles: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParticleSection {
    pub x: f64,
    pub y: f64,
    pub r: f64,
}

impl Default for ParticleSection {
    fn default() -> Self {
        ParticleSection { x: 0.60, y: 0.76, r: 0.08 }
    }
}

impl ParticleSection {
    pub fn disk(&self) -> Disk {
        Disk { center: Vec2::new(self.x, self.y), radius: self.r }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: SchemeChoice,
}

impl Default for TimeSection {
    fn default() -> Self {
        TimeSection { dt: 3.0 / 800.0, t_end: 0.75, scheme: SchemeChoice::Prk2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshSection {
    /// Base target edge length.
    pub h: f64,
    /// Geometric order of the mesh: 1 = straight edges, 2 = curved
    /// (mid-edge nodes snapped onto boundary arcs).
    pub order: u32,
    /// Target size near the particle rim, as a fraction of `h`.
    pub particle_size_factor: f64,
}

impl Default for MeshSection {
    fn default() -> Self {
        MeshSection { h: 0.04, order: 2, particle_size_factor: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LocalSection {
    /// Run in localized-update mode instead of one global monolithic solve.
    pub enabled: bool,
    /// Local-domain half-width along the channel, in particle radii.
    pub half_width_factor: f64,
    /// Target size near the particle inside the local domain, fraction of `mesh.h`.
    pub near_size_factor: f64,
    /// Target size in the rest of the local domain, fraction of `mesh.h`.
    pub far_size_factor: f64,
    /// Remesh when the centroid has moved this many particle radii.
    pub max_travel_factor: f64,
    /// Remesh when the worst deformed Jacobian ratio falls below this.
    pub min_detj_ratio: f64,
    /// Remesh when the worst deformed angle falls below this (degrees).
    pub min_angle_deg: f64,
}

impl Default for LocalSection {
    fn default() -> Self {
        LocalSection {
            enabled: false,
            half_width_factor: 10.0,
            near_size_factor: 0.5,
            far_size_factor: 1.5,
            max_travel_factor: 0.3,
            min_detj_ratio: 0.2,
            min_angle_deg: 12.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory for trajectory / field / log files.
    pub dir: String,
    /// Write a VTK snapshot every this many steps (0 = never).
    pub fields_every: usize,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: "out".to_string(), fields_every: 0 }
    }
}

/// One complete scenario. The default value is the double-pillar benchmark.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub physics: PhysicsSection,
    pub flow: FlowSection,
    pub channel: ChannelSection,
    /// When present, the annular loop replaces the straight channel.
    pub spiral: Option<SpiralSection>,
    pub particle: ParticleSection,
    pub time: TimeSection,
    pub mesh: MeshSection,
    pub local: LocalSection,
    pub output: OutputSection,
}

/// The channel's coordinate frame, shared by boundary-condition builders and
/// the localized-update driver: a cross-channel coordinate (0 on one wall,
/// `width` on the other), an along-channel coordinate, and the local flow
/// direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelLayout {
    Straight { width: f64, length: f64 },
    /// Annulus sector from `theta0` to `theta1` (radians, counterclockwise).
    Annular { r_inner: f64, r_outer: f64, theta0: f64, theta1: f64 },
}

impl ChannelLayout {
    pub fn width(&self) -> f64 {
        match *self {
            ChannelLayout::Straight { width, .. } => width,
            ChannelLayout::Annular { r_inner, r_outer, .. } => r_outer - r_inner,
        }
    }

    /// Distance across the channel: 0 at the bottom/inner wall, `width` at
    /// the top/outer wall.
    pub fn cross_coordinate(&self, p: Vec2) -> f64 {
        match *self {
            ChannelLayout::Straight { .. } => p.y,
            ChannelLayout::Annular { r_inner, .. } => p.norm() - r_inner,
        }
    }

    /// Arc length along the channel centerline from the inflow face to the
    /// cross-section through `p`.
    pub fn along_coordinate(&self, p: Vec2) -> f64 {
        match *self {
            ChannelLayout::Straight { .. } => p.x,
            ChannelLayout::Annular { r_inner, r_outer, theta0, .. } => {
                let mid = 0.5 * (r_inner + r_outer);
                let th = p.y.atan2(p.x);
                // unwrap into [theta0, theta0 + 2pi)
                let rel = (th - theta0).rem_euclid(TAU);
                rel * mid
            }
        }
    }

    /// Unit vector along the flow direction at `p`.
    pub fn flow_direction(&self, p: Vec2) -> Vec2 {
        match *self {
            ChannelLayout::Straight { .. } => Vec2::new(1.0, 0.0),
            ChannelLayout::Annular { .. } => {
                let th = p.y.atan2(p.x);
                Vec2::new(-th.sin(), th.cos())
            }
        }
    }

    /// Total centerline length of the channel.
    pub fn along_length(&self) -> f64 {
        match *self {
            ChannelLayout::Straight { length, .. } => length,
            ChannelLayout::Annular { r_inner, r_outer, theta0, theta1 } => {
                0.5 * (r_inner + r_outer) * (theta1 - theta0)
            }
        }
    }

    /// Inflow velocity at a boundary point `p`: parabolic across the channel,
    /// along the local flow direction.
    pub fn inflow_velocity(&self, p: Vec2, u0: f64) -> Vec2 {
        let s = self.cross_coordinate(p).clamp(0.0, self.width());
        let mag = inflow_profile(s, self.width(), u0).x;
        mag * self.flow_direction(p)
    }
}

impl ScenarioConfig {
    /// The double-pillar transport benchmark (also the `Default` value).
    pub fn benchmark() -> Self {
        ScenarioConfig::default()
    }

    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialization cannot fail")
    }

    pub fn load(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::from_toml(&text).map_err(crate::Error::from)?)
    }

    pub fn save(&self, path: &Path) -> crate::Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let bad = |m: String| Err(ScenarioError::Invalid(m));
        let pos = |v: f64, name: &str| -> Result<(), ScenarioError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(ScenarioError::Invalid(format!("{name} must be positive, got {v}")))
            }
        };
        pos(self.physics.reynolds, "physics.reynolds")?;
        pos(self.physics.elasticity, "physics.elasticity")?;
        pos(self.time.dt, "time.dt")?;
        pos(self.time.t_end, "time.t_end")?;
        pos(self.mesh.h, "mesh.h")?;
        pos(self.mesh.particle_size_factor, "mesh.particle_size_factor")?;
        pos(self.particle.r, "particle.r")?;
        if !self.flow.u0.is_finite() {
            return bad(format!("flow.u0 must be finite, got {}", self.flow.u0));
        }
        if self.mesh.order != 1 && self.mesh.order != 2 {
            return bad(format!("mesh.order must be 1 or 2, got {}", self.mesh.order));
        }
        pos(self.local.half_width_factor, "local.half_width_factor")?;
        pos(self.local.near_size_factor, "local.near_size_factor")?;
        pos(self.local.far_size_factor, "local.far_size_factor")?;
        pos(self.local.max_travel_factor, "local.max_travel_factor")?;
        if !(0.0 < self.local.min_detj_ratio && self.local.min_detj_ratio < 1.0) {
            return bad(format!(
                "local.min_detj_ratio must lie in (0, 1), got {}",
                self.local.min_detj_ratio
            ));
        }
        if !(0.0 < self.local.min_angle_deg && self.local.min_angle_deg < 60.0) {
            return bad(format!(
                "local.min_angle_deg must lie in (0, 60), got {}",
                self.local.min_angle_deg
            ));
        }

        let p = self.particle.disk();
        match &self.spiral {
            None => {
                pos(self.channel.width, "channel.width")?;
                pos(self.channel.length, "channel.length")?;
                for pil in &self.channel.pillars {
                    pos(pil.r, "pillar radius")?;
                    if pil.y - pil.r <= 0.0
                        || pil.y + pil.r >= self.channel.width
                        || pil.x - pil.r <= 0.0
                        || pil.x + pil.r >= self.channel.length
                    {
                        return bad(format!(
                            "pillar at ({}, {}) r = {} touches the channel boundary",
                            pil.x, pil.y, pil.r
                        ));
                    }
                }
                if p.center.y - p.radius <= 0.0
                    || p.center.y + p.radius >= self.channel.width
                    || p.center.x - p.radius <= 0.0
                    || p.center.x + p.radius >= self.channel.length
                {
                    return bad("particle touches the channel boundary".to_string());
                }
                for pil in &self.channel.pillars {
                    if (p.center - pil.disk().center).norm() <= p.radius + pil.r {
                        return bad("particle touches a pillar".to_string());
                    }
                }
            }
            Some(sp) => {
                pos(sp.r_inner, "spiral.r_inner")?;
                if sp.r_outer <= sp.r_inner {
                    return bad(format!(
                        "spiral.r_outer ({}) must exceed spiral.r_inner ({})",
                        sp.r_outer, sp.r_inner
                    ));
                }
                if !(0.0 < sp.gap_deg && sp.gap_deg < 180.0) {
                    return bad(format!("spiral.gap_deg must lie in (0, 180), got {}", sp.gap_deg));
                }
                let layout = self.layout();
                let rho = p.center.norm();
                if rho - p.radius <= sp.r_inner || rho + p.radius >= sp.r_outer {
                    return bad("particle touches an annulus wall".to_string());
                }
                let along = layout.along_coordinate(p.center);
                if along <= p.radius || along >= layout.along_length() - p.radius {
                    return bad("particle touches an annulus end face".to_string());
                }
                for ob in &sp.obstacles {
                    pos(ob.r, "obstacle radius")?;
                    let oc = ob.disk().center;
                    if oc.norm() - ob.r <= sp.r_inner || oc.norm() + ob.r >= sp.r_outer {
                        return bad(format!(
                            "obstacle at ({}, {}) r = {} touches an annulus wall",
                            ob.x, ob.y, ob.r
                        ));
                    }
                    if (p.center - oc).norm() <= p.radius + ob.r {
                        return bad("particle touches an obstacle".to_string());
                    }
                }
            }
        }
        Ok(())
    }

    pub fn physics(&self) -> Physics {
        Physics {
            reynolds: self.physics.reynolds,
            elasticity: self.physics.elasticity,
            viscous_form: match self.physics.viscous_form {
                ViscousChoice::Discrete => ViscousForm::Discrete,
                ViscousChoice::Continuous => ViscousForm::Continuous,
            },
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.time.scheme {
            SchemeChoice::Fo => Scheme::FirstOrder,
            SchemeChoice::Prk2 => Scheme::ImexPrk2,
        }
    }

    pub fn mesh_order(&self) -> MeshOrder {
        if self.mesh.order == 1 {
            MeshOrder::Straight
        } else {
            MeshOrder::Curved
        }
    }

    pub fn particle_disk(&self) -> Disk {
        self.particle.disk()
    }

    pub fn layout(&self) -> ChannelLayout {
        match &self.spiral {
            None => ChannelLayout::Straight {
                width: self.channel.width,
                length: self.channel.length,
            },
            Some(sp) => {
                let half_gap = 0.5 * sp.gap_deg.to_radians();
                ChannelLayout::Annular {
                    r_inner: sp.r_inner,
                    r_outer: sp.r_outer,
                    theta0: half_gap,
                    theta1: TAU - half_gap,
                }
            }
        }
    }

    /// Obstacles in the flow (pillars of the straight channel or posts of the
    /// annular loop).
    pub fn obstacles(&self) -> &[DiskSection] {
        match &self.spiral {
            None => &self.channel.pillars,
            Some(sp) => &sp.obstacles,
        }
    }

    /// Mesh size field: base `h`, refined near the particle rim and near
    /// obstacle rims. All sizes scale together with `h`, so a mesh family for
    /// a convergence study is produced by varying `h` alone.
    pub fn size_field(&self, with_particle: bool) -> SizeField {
        let h = self.mesh.h;
        let mut features = Vec::new();
        if with_particle {
            let p = self.particle.disk();
            features.push(SizeFeature {
                center: p.center,
                radius: p.radius,
                size: self.mesh.particle_size_factor * h,
                band0: p.radius,
                band1: 3.0 * p.radius,
            });
        }
        for ob in self.obstacles() {
            features.push(SizeFeature {
                center: ob.disk().center,
                radius: ob.r,
                size: 0.7 * h,
                band0: 0.5 * ob.r,
                band1: 2.0 * ob.r,
            });
        }
        SizeField { base: h, features }
    }

    /// Domain description for the mesh generator. With `with_particle` the
    /// elastic disk is embedded as a solid subdomain; without it the builder
    /// yields the particle-free background geometry.
    pub fn geometry(&self, with_particle: bool) -> GeometryModel {
        let particles = if with_particle { vec![self.particle.disk()] } else { vec![] };
        let holes: Vec<Vec<TaggedCurve>> = self
            .obstacles()
            .iter()
            .map(|ob| {
                vec![TaggedCurve::new(
                    Curve::Circle { center: ob.disk().center, radius: ob.r },
                    "pillar",
                )]
            })
            .collect();
        let outer = match self.layout() {
            ChannelLayout::Straight { width, length } => {
                let c = Vec2::new;
                vec![
                    TaggedCurve::new(Curve::Segment { a: c(0.0, 0.0), b: c(length, 0.0) }, "wall"),
                    TaggedCurve::new(
                        Curve::Segment { a: c(length, 0.0), b: c(length, width) },
                        "outflow",
                    ),
                    TaggedCurve::new(
                        Curve::Segment { a: c(length, width), b: c(0.0, width) },
                        "wall",
                    ),
                    TaggedCurve::new(Curve::Segment { a: c(0.0, width), b: c(0.0, 0.0) }, "inflow"),
                ]
            }
            ChannelLayout::Annular { r_inner, r_outer, theta0, theta1 } => {
                let at = |r: f64, th: f64| r * Vec2::new(th.cos(), th.sin());
                let origin = Vec2::ZERO;
                vec![
                    TaggedCurve::new(
                        Curve::Segment { a: at(r_inner, theta0), b: at(r_outer, theta0) },
                        "inflow",
                    ),
                    TaggedCurve::new(
                        Curve::Arc { center: origin, radius: r_outer, a0: theta0, a1: theta1 },
                        "wall",
                    ),
                    TaggedCurve::new(
                        Curve::Segment { a: at(r_outer, theta1), b: at(r_inner, theta1) },
                        "outflow",
                    ),
                    TaggedCurve::new(
                        Curve::Arc { center: origin, radius: r_inner, a0: theta1, a1: theta0 },
                        "wall",
                    ),
                ]
            }
        };
        GeometryModel { outer, holes, particles, size: self.size_field(with_particle) }
    }
}

/// How the downstream end of the channel is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutflowTreatment {
    /// Traction-free outflow (the transport setting).
    Natural,
    /// The inflow profile is prescribed on the outflow face too, closing the
    /// boundary; the fluid pressure gauge is then pinned at one vertex.
    Profile,
}

/// Dirichlet data for a channel mesh: the parabolic profile on the inflow,
/// no slip on walls and pillar rims, and optionally the profile on the
/// outflow face (with a pressure pin to fix the gauge of the then
/// all-Dirichlet problem).
pub fn channel_constraints(
    mesh: &QuadraticMesh,
    layout: ChannelLayout,
    u0: f64,
    outflow: OutflowTreatment,
) -> crate::Result<Constraints> {
    let mut cons = Constraints::new();
    let set = |node: usize, v: Vec2, cons: &mut Constraints| {
        cons.push(2 * node, v.x);
        cons.push(2 * node + 1, v.y);
    };
    for tag_name in ["inflow", "outflow"] {
        if tag_name == "outflow" && outflow == OutflowTreatment::Natural {
            continue;
        }
        if let Some(tag) = mesh.tag_id(tag_name) {
            for node in mesh.boundary_nodes(tag) {
                let v = layout.inflow_velocity(mesh.node_coord(node), u0);
                set(node, v, &mut cons);
            }
        }
    }
    for tag_name in ["wall", "pillar"] {
        if let Some(tag) = mesh.tag_id(tag_name) {
            for node in mesh.boundary_nodes(tag) {
                set(node, Vec2::ZERO, &mut cons);
            }
        }
    }
    if outflow == OutflowTreatment::Profile {
        let dm = DofMap::new(mesh);
        let pf = dm.pf_dofs();
        assert!(!pf.is_empty(), "channel mesh has no fluid pressure dofs");
        cons.push(pf[0], 0.0);
    }
    Ok(cons.finalize()?)
}
