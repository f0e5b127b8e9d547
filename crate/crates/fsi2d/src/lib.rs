//! Two-dimensional monolithic arbitrary Lagrangian-Eulerian (ALE) finite-element
//! solver for fluid-structure interaction, aimed at rigid-ish elastic particles
//! transported through microfluidic channels.
//!
//! The discretization works entirely on a fixed reference mesh: an incompressible
//! Newtonian fluid and an incompressible neo-Hookean solid share one velocity field
//! (Taylor-Hood P2/P1), the solid carries its left Cauchy-Green tensor as an extra
//! transported unknown, and the domain motion is a discrete ALE map driven by a
//! harmonic extension of the interface velocity. Two implicit-explicit time
//! integrators are provided (first order, and a two-stage second-order partitioned
//! Runge-Kutta scheme). On top of the monolithic core sits a localized-update
//! driver that follows one small particle through a large channel by re-solving
//! only a moving window of the domain against a precomputed steady background flow,
//! remeshing the window whenever the ALE map degrades.
//!
//! Module map:
//! - [`geometry`]: exact curve descriptions (segments, arcs, circles), domain
//!   models built from tagged loops, and mesh size fields.
//! - [`mesh`]: isoparametric quadratic triangle meshes; constrained Delaunay
//!   generation with quality refinement, mid-edge snapping to curved boundaries,
//!   point location, quality measures, plain-text I/O.
//! - [`fem`]: discrete spaces and degree-of-freedom maps, quadrature, basis
//!   evaluation, assembly of the monolithic residual/Jacobian, harmonic extension.
//! - [`ale`]: the discrete ALE map (displacement field plus per-quadrature-point
//!   deformation cache) and its update/validity logic.
//! - [`sparse`]: CSR matrices and the sparse direct LU solver used everywhere.
//! - [`newton`]: damped Newton iteration on the assembled nonlinear systems.
//! - [`stepping`]: the two time integrators and the shared time loop.
//! - [`background`]: steady background channel flow solves and their cache files.
//! - [`local_update`]: localized moving-window runner (remesh triggers, field
//!   transfer, trajectory bookkeeping) plus the equivalent global-domain runner.
//! - [`scenario`]: runtime configuration, channel geometries, boundary conditions.
//! - [`convergence`]: trajectory error metrics, convergence rates, study drivers.
//! - [`output`]: VTK / CSV / log writers.

pub mod ale;
pub mod background;
pub mod convergence;
pub mod fem;
pub mod geometry;
pub mod local_update;
pub mod measure;
pub mod mesh;
pub mod newton;
pub mod scenario;
pub mod sparse;
pub mod stepping;
pub mod vec2;

pub use vec2::{Mat2, Vec2};

/// Crate-wide error type aggregating the per-subsystem errors.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Mesh(#[from] mesh::MeshError),
    #[error(transparent)]
    Fem(#[from] fem::FemError),
    #[error(transparent)]
    Ale(#[from] ale::AleError),
    #[error(transparent)]
    Sparse(#[from] sparse::SparseError),
    #[error(transparent)]
    Newton(#[from] newton::NewtonError),
    #[error(transparent)]
    Background(#[from] background::BackgroundError),
    #[error(transparent)]
    Scenario(#[from] scenario::ScenarioError),
    #[error(transparent)]
    Local(#[from] local_update::LocalError),
    #[error(transparent)]
    Convergence(#[from] convergence::ConvergenceError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
