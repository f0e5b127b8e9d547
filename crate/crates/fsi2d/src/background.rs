//! Steady background flow on the full channel.
//!
//! The localized-update driver needs the channel's steady laminar flow,
//! computed once on a particle-free mesh and then sampled as Dirichlet data
//! for the moving local domain. Steadiness is reached by pseudo-time
//! stepping with the first-order scheme and a growing step size (the large
//! final steps contract hard onto the fixed point), declared when successive
//! iterates agree to a relative tolerance. The result can be cached in a
//! plain-text file so repeated runs skip the solve.

use std::path::Path;

use crate::fem::assembly::Physics;
use crate::fem::Constraints;
use crate::mesh::{mesh_from_text, mesh_to_text, Locator, MeshError, QuadraticMesh};
use crate::stepping::{PrkCoefficients, Scheme, Simulation};
use crate::vec2::Vec2;
use crate::Result;

const MAGIC: &str = "fsibg";
const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum BackgroundError {
    #[error("pseudo-time march not steady after {steps} steps (last change {change:.3e})")]
    NoSteadyState { steps: usize, change: f64 },
    #[error("background cache: {0}")]
    Format(String),
    #[error("background cache field count {found} does not match mesh ({expected})")]
    SizeMismatch { found: usize, expected: usize },
}

/// Pseudo-time march controls. The step grows geometrically so late steps
/// behave like a damped steady solve.
#[derive(Debug, Clone, Copy)]
pub struct SteadyMarch {
    pub dt0: f64,
    pub growth: f64,
    pub dt_max: f64,
    /// Relative velocity change between successive iterates that counts as
    /// steady.
    pub rel_tol: f64,
    pub max_steps: usize,
}

impl Default for SteadyMarch {
    fn default() -> Self {
        SteadyMarch {
            dt0: 0.05,
            growth: 1.6,
            dt_max: 100.0,
            rel_tol: 1e-8,
            max_steps: 120,
        }
    }
}

/// Steady flow on a particle-free channel mesh, with point-evaluation access.
pub struct BackgroundFlow {
    pub mesh: QuadraticMesh,
    /// Velocity components per P2 node.
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    /// Fluid pressure per vertex.
    pub pf: Vec<f64>,
    /// Relative change of the final accepted march step.
    pub residual: f64,
    locator: Locator,
}

impl BackgroundFlow {
    /// Wraps precomputed fields (cache loading, synthetic test flows). Sizes
    /// must match the mesh; a fresh locator is built.
    pub fn from_fields(
        mesh: QuadraticMesh,
        ux: Vec<f64>,
        uy: Vec<f64>,
        pf: Vec<f64>,
        residual: f64,
    ) -> Result<Self> {
        if ux.len() != mesh.n_nodes() || uy.len() != mesh.n_nodes() {
            return Err(BackgroundError::SizeMismatch {
                found: ux.len().min(uy.len()),
                expected: mesh.n_nodes(),
            }
            .into());
        }
        if pf.len() != mesh.n_vertices() {
            return Err(BackgroundError::SizeMismatch {
                found: pf.len(),
                expected: mesh.n_vertices(),
            }
            .into());
        }
        let locator = Locator::new(&mesh);
        Ok(BackgroundFlow {
            mesh,
            ux,
            uy,
            pf,
            residual,
            locator,
        })
    }

    /// Marches the channel flow to steadiness. The mesh must be fluid-only
    /// (any solid subdomain would advect and never reach a fixed point).
    pub fn solve(
        mesh: QuadraticMesh,
        physics: Physics,
        constraints: Constraints,
        march: SteadyMarch,
    ) -> Result<Self> {
        assert!(
            mesh.elems.iter().all(|e| !e.is_solid()),
            "background mesh must be fluid-only"
        );
        let mut sim = Simulation::new(mesh, physics, constraints)?;
        let coeffs = PrkCoefficients::standard();
        let mut dt = march.dt0;
        let mut change = f64::INFINITY;
        for step in 0..march.max_steps {
            let prev = sim.nodal_velocity();
            sim.advance(dt, Scheme::FirstOrder, &coeffs)?;
            let cur = sim.nodal_velocity();
            let mut diff = 0.0f64;
            let mut scale = 0.0f64;
            for (a, b) in cur.iter().zip(&prev) {
                diff = diff.max((*a - *b).norm());
                scale = scale.max(a.norm());
            }
            change = diff / scale.max(1e-30);
            if change < march.rel_tol {
                let n = sim.mesh.n_nodes();
                let mut ux = vec![0.0; n];
                let mut uy = vec![0.0; n];
                for (nd, v) in cur.iter().enumerate() {
                    ux[nd] = v.x;
                    uy[nd] = v.y;
                }
                let dm = sim.dof_map();
                let pf = (0..sim.mesh.n_vertices())
                    .map(|v| dm.pf(v).map_or(0.0, |d| sim.x[d]))
                    .collect();
                let _ = step;
                return Self::from_fields(sim.mesh, ux, uy, pf, change);
            }
            dt = (dt * march.growth).min(march.dt_max);
        }
        Err(BackgroundError::NoSteadyState {
            steps: march.max_steps,
            change,
        }
        .into())
    }

    /// Velocity at a point of the channel. Points within `clamp_tol` of the
    /// mesh (`None`: a tight default) are clamped onto it.
    pub fn velocity_at(&self, p: Vec2, clamp_tol: Option<f64>) -> std::result::Result<Vec2, MeshError> {
        let loc = self.locator.locate(p, clamp_tol)?;
        Ok(Vec2::new(
            self.locator.eval_p2(&self.mesh, &self.ux, loc),
            self.locator.eval_p2(&self.mesh, &self.uy, loc),
        ))
    }

    /// Largest nodal speed (P2 fields attain their extrema close to nodes;
    /// used by smoke checks and demo scaling).
    pub fn max_speed(&self) -> f64 {
        self.ux
            .iter()
            .zip(&self.uy)
            .map(|(&x, &y)| Vec2::new(x, y).norm())
            .fold(0.0, f64::max)
    }

    /// Writes the cache file (mesh + fields, plain text, versioned).
    pub fn save(&self, path: &Path) -> Result<()> {
        let mesh_text = mesh_to_text(&self.mesh);
        let mut s = String::new();
        s.push_str(&format!("{MAGIC} {VERSION}\n"));
        s.push_str(&format!("residual {:?}\n", self.residual));
        s.push_str(&format!("mesh_lines {}\n", mesh_text.lines().count()));
        s.push_str(&mesh_text);
        s.push_str(&format!("velocity {}\n", self.ux.len()));
        for (x, y) in self.ux.iter().zip(&self.uy) {
            s.push_str(&format!("{x:?} {y:?}\n"));
        }
        s.push_str(&format!("pressure {}\n", self.pf.len()));
        for p in &self.pf {
            s.push_str(&format!("{p:?}\n"));
        }
        std::fs::write(path, s)?;
        Ok(())
    }

    /// Reads a cache file written by [`BackgroundFlow::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_text(&text)
    }

    fn from_text(text: &str) -> Result<Self> {
        let bad = |what: &str| BackgroundError::Format(what.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file"))?;
        let mut it = header.split_whitespace();
        if it.next() != Some(MAGIC) {
            return Err(bad("missing fsibg header").into());
        }
        match it.next().and_then(|t| t.parse::<u32>().ok()) {
            Some(VERSION) => {}
            Some(v) => return Err(BackgroundError::Format(format!("unsupported version {v}")).into()),
            None => return Err(bad("missing version").into()),
        }
        let residual: f64 = expect_kv(lines.next(), "residual")?;
        let n_mesh: usize = expect_kv(lines.next(), "mesh_lines")?;
        let mut mesh_text = String::new();
        for _ in 0..n_mesh {
            let l = lines.next().ok_or_else(|| bad("truncated mesh block"))?;
            mesh_text.push_str(l);
            mesh_text.push('\n');
        }
        let mesh = mesh_from_text(&mesh_text)?;
        let n_vel: usize = expect_kv(lines.next(), "velocity")?;
        let mut ux = Vec::with_capacity(n_vel);
        let mut uy = Vec::with_capacity(n_vel);
        for _ in 0..n_vel {
            let l = lines.next().ok_or_else(|| bad("truncated velocity block"))?;
            let mut f = l.split_whitespace();
            let x: f64 = parse_tok(f.next(), "velocity")?;
            let y: f64 = parse_tok(f.next(), "velocity")?;
            ux.push(x);
            uy.push(y);
        }
        let n_p: usize = expect_kv(lines.next(), "pressure")?;
        let mut pf = Vec::with_capacity(n_p);
        for _ in 0..n_p {
            let l = lines.next().ok_or_else(|| bad("truncated pressure block"))?;
            pf.push(parse_tok(l.split_whitespace().next(), "pressure")?);
        }
        Self::from_fields(mesh, ux, uy, pf, residual)
    }
}

fn expect_kv<T: std::str::FromStr>(line: Option<&str>, key: &str) -> Result<T> {
    let line = line.ok_or_else(|| BackgroundError::Format(format!("missing {key} line")))?;
    let mut it = line.split_whitespace();
    if it.next() != Some(key) {
        return Err(BackgroundError::Format(format!("expected {key}, got {line:?}")).into());
    }
    parse_tok(it.next(), key)
}

fn parse_tok<T: std::str::FromStr>(tok: Option<&str>, what: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| BackgroundError::Format(format!("bad {what} value")).into())
}
