//! Time integration of the coupled system.
//!
//! A [`Simulation`] owns everything bound to one reference mesh: geometry and
//! dof caches, the assembler, the harmonic mesh-velocity extension, the Newton
//! driver, boundary constraints, and the evolving unknowns — the state vector
//! `x`, the map displacement (physical position minus reference position per
//! node), and the nodal mesh velocity `w`.
//!
//! Two schemes advance it. The first-order scheme solves the backward
//! difference over `dt` with the map and mesh velocity frozen at their
//! start-of-step values, then extends the new solid velocity and moves the
//! map. The second-order scheme is a two-stage implicit-explicit partitioned
//! Runge-Kutta method: each stage freezes a freshly extrapolated map and mesh
//! velocity, and the stage combination constants reproduce second order for
//! the coupled unknown-and-domain evolution. Both schemes share the same
//! implicit stage executor, so a stage differs only in its effective rate
//! `dt_eff`, its history vector, and the frozen map data.
//!
//! A step that fails to converge (or tangles the map) is rolled back and
//! retried once as two half steps; a second failure aborts the run.

use crate::ale::{displacement_jac_range, AleCache};
use crate::fem::assembly::{Assembler, Physics, StageContext, TimeRate};
use crate::fem::harmonic::HarmonicExtension;
use crate::fem::{Constraints, GeometryCache};
use crate::mesh::QuadraticMesh;
use crate::newton::{NewtonConfig, NewtonError, NewtonSolver, NewtonStats};
use crate::vec2::Vec2;
use crate::{Error, Result};

/// Constants of the two-stage implicit-explicit partitioned Runge-Kutta
/// scheme. `blend` constants combine states across stages; `velocity`
/// constants extrapolate the mesh velocity for the second stage.
#[derive(Debug, Clone, Copy)]
pub struct PrkCoefficients {
    pub gamma: f64,
    pub beta0: f64,
    pub beta_star: f64,
    pub c0: f64,
    pub c_star: f64,
}

impl PrkCoefficients {
    /// The second-order coefficient set.
    pub fn standard() -> Self {
        let s2 = std::f64::consts::SQRT_2;
        let c = PrkCoefficients {
            gamma: 1.0 - 1.0 / s2,
            beta0: -s2,
            beta_star: 1.0 + s2,
            c0: -1.0 / s2,
            c_star: 1.0 + 1.0 / s2,
        };
        debug_assert!((c.beta0 + c.beta_star - 1.0).abs() < 1e-15);
        debug_assert!((c.c0 + c.c_star - 1.0).abs() < 1e-15);
        debug_assert!(((c.beta_star + 1.0) * c.gamma - 1.0).abs() < 1e-15);
        debug_assert!(((2.0 * c.beta_star + 1.0) * c.gamma * c.gamma - 0.5).abs() < 1e-15);
        c
    }

    /// History vector of the second stage: `beta0 * xn + beta_star * xs`.
    pub fn blend_states(&self, xn: &[f64], xs: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] = self.beta0 * xn[i] + self.beta_star * xs[i];
        }
    }

    /// Mesh-velocity boundary data of the second stage:
    /// `c0 * un + c_star * us` per node.
    pub fn blend_velocities(&self, un: &[Vec2], us: &[Vec2]) -> Vec<Vec2> {
        un.iter()
            .zip(us)
            .map(|(&a, &b)| self.c0 * a + self.c_star * b)
            .collect()
    }
}

impl Default for PrkCoefficients {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    FirstOrder,
    ImexPrk2,
}

/// Outcome of one accepted time step.
#[derive(Debug, Clone, Default)]
pub struct StepReport {
    /// Newton statistics per implicit stage (two entries when the step was
    /// retried as half steps of the first-order scheme, up to four for the
    /// second-order scheme).
    pub stages: Vec<NewtonStats>,
    /// Map Jacobian-determinant range after the step.
    pub jac_range: (f64, f64),
    /// True when the step only succeeded as two half steps.
    pub halved: bool,
}

/// One coupled problem on one reference mesh, with its evolving state.
pub struct Simulation {
    pub mesh: QuadraticMesh,
    pub geo: GeometryCache,
    assembler: Assembler,
    pub harmonic: HarmonicExtension,
    newton: NewtonSolver,
    pub physics: Physics,
    pub constraints: Constraints,
    pub newton_cfg: NewtonConfig,
    /// Unknown vector `[u | ps | pf | b]`.
    pub x: Vec<f64>,
    /// Map displacement per node (deformed position minus reference).
    pub disp: Vec<Vec2>,
    /// Mesh velocity per node.
    pub w: Vec<Vec2>,
    pub t: f64,
}

impl Simulation {
    pub fn new(mesh: QuadraticMesh, physics: Physics, constraints: Constraints) -> Result<Self> {
        let geo = GeometryCache::new(&mesh)?;
        let assembler = Assembler::new(&mesh);
        let newton = NewtonSolver::new(assembler.pattern())?;
        let harmonic = HarmonicExtension::new(&mesh, &geo)?;
        let n_nodes = mesh.n_nodes();
        let mut x = vec![0.0; assembler.dm.n_dofs];
        // undeformed conformation: B = I at every solid vertex
        for v in 0..mesh.n_vertices() {
            if let Some(b0) = assembler.dm.b(v) {
                x[b0] = 1.0;
                x[b0 + 1] = 1.0;
            }
        }
        Ok(Simulation {
            mesh,
            geo,
            assembler,
            harmonic,
            newton,
            physics,
            constraints,
            newton_cfg: NewtonConfig::default(),
            x,
            disp: vec![Vec2::ZERO; n_nodes],
            w: vec![Vec2::ZERO; n_nodes],
            t: 0.0,
        })
    }

    pub fn dof_map(&self) -> &crate::fem::DofMap {
        &self.assembler.dm
    }

    pub fn n_dofs(&self) -> usize {
        self.assembler.dm.n_dofs
    }

    /// Velocity components of the state as one vector per node.
    pub fn nodal_velocity(&self) -> Vec<Vec2> {
        (0..self.mesh.n_nodes())
            .map(|nd| self.assembler.dm.u_at(&self.x, nd))
            .collect()
    }

    /// Overwrites the velocity part of the state from a function of the
    /// reference node position.
    pub fn set_velocity(&mut self, f: impl Fn(Vec2) -> Vec2) {
        for nd in 0..self.mesh.n_nodes() {
            let v = f(self.mesh.node_coord(nd));
            self.assembler.dm.set_u(&mut self.x, nd, v);
        }
    }

    /// Recomputes the mesh velocity from the current solid velocity; call
    /// once after setting the initial state (the first-order scheme reads the
    /// lagged mesh velocity on its first step).
    pub fn init_mesh_velocity(&mut self) -> Result<()> {
        self.w = self.harmonic.extend(&self.nodal_velocity())?;
        Ok(())
    }

    /// Solves one implicit stage: the monolithic system with the supplied
    /// frozen map, mesh velocity and backward-difference history. Both time
    /// schemes and the steady solver funnel through here.
    fn implicit_stage(
        &mut self,
        ale: &AleCache,
        w: &[Vec2],
        time: Option<TimeRate<'_>>,
    ) -> std::result::Result<NewtonStats, NewtonError> {
        let ctx = StageContext {
            physics: self.physics,
            mesh_velocity: w,
            time,
        };
        let assembler = &mut self.assembler;
        let geo = &self.geo;
        let constraints = &self.constraints;
        self.newton.solve(&mut self.x, &self.newton_cfg, |x, r, jac| {
            assembler.assemble(geo, ale, &ctx, x, constraints, r, jac);
            Ok(())
        })
    }

    /// Solves the steady problem (no time derivative) on the current map.
    pub fn solve_steady(&mut self) -> Result<NewtonStats> {
        let ale = AleCache::from_displacement(&self.mesh, &self.geo, &self.disp)?;
        let w = self.w.clone();
        Ok(self.implicit_stage(&ale, &w, None)?)
    }

    fn step_first_order(&mut self, dt: f64) -> Result<NewtonStats> {
        let xn = self.x.clone();
        // map and mesh velocity enter lagged: both frozen at start of step
        let ale = AleCache::from_displacement(&self.mesh, &self.geo, &self.disp)?;
        let w = self.w.clone();
        let stats = self.implicit_stage(&ale, &w, Some(TimeRate { dt_eff: dt, prev: &xn }))?;
        let w_new = self.harmonic.extend(&self.nodal_velocity())?;
        for nd in 0..self.disp.len() {
            self.disp[nd] += dt * w_new[nd];
        }
        self.w = w_new;
        self.t += dt;
        Ok(stats)
    }

    fn step_prk2(&mut self, dt: f64, coeffs: &PrkCoefficients) -> Result<Vec<NewtonStats>> {
        let xn = self.x.clone();
        let disp_n = self.disp.clone();
        let un = self.nodal_velocity();

        // stage one: extend the old solid velocity, advance the map by
        // gamma*dt, solve the backward difference over gamma*dt
        let w_star = self.harmonic.extend(&un)?;
        let disp_star: Vec<Vec2> = disp_n
            .iter()
            .zip(&w_star)
            .map(|(&d, &w)| d + coeffs.gamma * dt * w)
            .collect();
        let ale_star = AleCache::from_displacement(&self.mesh, &self.geo, &disp_star)?;
        let s1 = self.implicit_stage(
            &ale_star,
            &w_star,
            Some(TimeRate {
                dt_eff: coeffs.gamma * dt,
                prev: &xn,
            }),
        )?;

        // stage two: extrapolated mesh velocity moves the map over the full
        // step; the history is the stage combination of old and stage states
        let u_star = self.nodal_velocity();
        let w_new = self.harmonic.extend(&coeffs.blend_velocities(&un, &u_star))?;
        let disp_new: Vec<Vec2> = disp_n
            .iter()
            .zip(&w_new)
            .map(|(&d, &w)| d + dt * w)
            .collect();
        let ale_new = AleCache::from_displacement(&self.mesh, &self.geo, &disp_new)?;
        let mut hist = vec![0.0; xn.len()];
        coeffs.blend_states(&xn, &self.x, &mut hist);
        let s2 = self.implicit_stage(
            &ale_new,
            &w_new,
            Some(TimeRate {
                dt_eff: coeffs.gamma * dt,
                prev: &hist,
            }),
        )?;

        self.disp = disp_new;
        self.w = w_new;
        self.t += dt;
        Ok(vec![s1, s2])
    }

    fn step_once(&mut self, dt: f64, scheme: Scheme, coeffs: &PrkCoefficients) -> Result<Vec<NewtonStats>> {
        match scheme {
            Scheme::FirstOrder => Ok(vec![self.step_first_order(dt)?]),
            Scheme::ImexPrk2 => self.step_prk2(dt, coeffs),
        }
    }

    /// Advances one step of size `dt`, retrying once as two half steps when
    /// the implicit solve fails or the map tangles. The state is rolled back
    /// before any retry, so a returned error leaves the pre-step state.
    pub fn advance(&mut self, dt: f64, scheme: Scheme, coeffs: &PrkCoefficients) -> Result<StepReport> {
        let snapshot = (self.x.clone(), self.disp.clone(), self.w.clone(), self.t);
        match self.step_once(dt, scheme, coeffs) {
            Ok(stages) => {
                let jac_range = displacement_jac_range(&self.mesh, &self.geo, &self.disp);
                Ok(StepReport {
                    stages,
                    jac_range,
                    halved: false,
                })
            }
            Err(err) if is_retryable(&err) => {
                self.x = snapshot.0.clone();
                self.disp = snapshot.1.clone();
                self.w = snapshot.2.clone();
                self.t = snapshot.3;
                let mut stages = Vec::new();
                for _ in 0..2 {
                    match self.step_once(0.5 * dt, scheme, coeffs) {
                        Ok(s) => stages.extend(s),
                        Err(e2) => {
                            self.x = snapshot.0;
                            self.disp = snapshot.1;
                            self.w = snapshot.2;
                            self.t = snapshot.3;
                            return Err(e2);
                        }
                    }
                }
                let jac_range = displacement_jac_range(&self.mesh, &self.geo, &self.disp);
                Ok(StepReport {
                    stages,
                    jac_range,
                    halved: true,
                })
            }
            Err(err) => Err(err),
        }
    }

    /// Runs `n_steps` uniform steps, invoking the hook after each accepted
    /// step.
    pub fn run(
        &mut self,
        dt: f64,
        n_steps: usize,
        scheme: Scheme,
        coeffs: &PrkCoefficients,
        mut hook: impl FnMut(usize, &Simulation, &StepReport) -> Result<()>,
    ) -> Result<()> {
        for step in 0..n_steps {
            let report = self.advance(dt, scheme, coeffs)?;
            hook(step, self, &report)?;
        }
        Ok(())
    }
}

/// Failures worth one halved retry: a stalled implicit solve or a tangled
/// map update. Everything else (dimension errors, conflicting constraints,
/// I/O) aborts immediately.
fn is_retryable(err: &Error) -> bool {
    match err {
        Error::Newton(
            NewtonError::NonConvergence { .. }
            | NewtonError::LineSearchStalled { .. }
            | NewtonError::Linear(crate::sparse::SparseError::Factorization),
        ) => true,
        Error::Ale(crate::ale::AleError::Tangled { .. }) => true,
        _ => false,
    }
}
