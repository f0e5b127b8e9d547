//! Assembly of the monolithic residual and Jacobian.
//!
//! One nonlinear solve advances the coupled state `x = [u | ps | pf | b]` on a
//! frozen ALE map: the deformation gradient data (from [`crate::ale`]) and the
//! mesh velocity are inputs, never unknowns, so the Jacobian is exact without
//! shape derivatives. Writing `F` for the ALE deformation gradient, `J` for
//! its determinant, `gamma_a = F^-T grad N_a` for basis gradients pushed to
//! the deformed configuration, and `L = sum_b u_b gamma_b^T` for the deformed
//! velocity gradient, the element contributions are:
//!
//! - momentum (all elements): `J (du/dt + L (u - w)) . v - J p tr(L_v)`
//!   plus `2/Re J D(u) : D(v)` on fluid elements and
//!   `E/Re J (B - I) : L_v` on solid elements;
//! - continuity (all elements): `J tr(L) q`, with `q` the fluid or solid
//!   pressure test function depending on the element's side;
//! - conformation transport (solid elements):
//!   `J (dB/dt + ((u - w) . grad) B - L B - B L^T) : W` for symmetric `W`,
//!   stored in the three components `(b11, b22, b12)`; the off-diagonal test
//!   row carries a factor 2 from the symmetric contraction.
//!
//! Time derivatives are backward differences `(x - prev) / dt_eff` against a
//! caller-supplied history vector, which is what the Runge-Kutta stages feed;
//! `time = None` drops them (steady solves).
//!
//! Integration runs per element into dense blocks (parallelizable across
//! elements), then a single ordered scatter pass accumulates blocks into the
//! global system, so results are bit-identical for any thread count.

use rayon::prelude::*;

use super::quadrature::{N_QP, P1_AT_QP, P2_AT_QP};
use super::{Constraints, DofMap, GeometryCache};
use crate::ale::AleCache;
use crate::mesh::QuadraticMesh;
use crate::sparse::SparseMatrix;
use crate::vec2::{Mat2, Vec2};

/// Which pullback the viscous term uses. `Discrete` contracts symmetrized
/// deformed-configuration gradients `sym(L)` directly; `Continuous` carries
/// the extra `F^-T` factor that appears when the term is derived by mapping
/// the current-configuration form, and is provided for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViscousForm {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Copy)]
pub struct Physics {
    pub reynolds: f64,
    /// Dimensionless solid elasticity; the stress coefficient is
    /// `elasticity / reynolds`.
    pub elasticity: f64,
    pub viscous_form: ViscousForm,
}

impl Physics {
    pub fn viscosity(&self) -> f64 {
        1.0 / self.reynolds
    }

    pub fn stress_coeff(&self) -> f64 {
        self.elasticity / self.reynolds
    }
}

/// Backward-difference time derivative data for one stage solve.
pub struct TimeRate<'a> {
    pub dt_eff: f64,
    /// History state, same layout as the unknown vector.
    pub prev: &'a [f64],
}

/// Everything the residual depends on besides the unknown vector.
pub struct StageContext<'a> {
    pub physics: Physics,
    /// Mesh velocity at the P2 nodes.
    pub mesh_velocity: &'a [Vec2],
    pub time: Option<TimeRate<'a>>,
}

const MAX_DOFS: usize = 24;

#[derive(Clone)]
struct ElemBlock {
    r: [f64; MAX_DOFS],
    k: [f64; MAX_DOFS * MAX_DOFS],
}

impl Default for ElemBlock {
    fn default() -> Self {
        ElemBlock {
            r: [0.0; MAX_DOFS],
            k: [0.0; MAX_DOFS * MAX_DOFS],
        }
    }
}

/// Residual/Jacobian assembler bound to one mesh and dof map.
pub struct Assembler {
    pub dm: DofMap,
    nodes: Vec<[usize; 6]>,
    dofs: Vec<Vec<usize>>,
    solid: Vec<bool>,
    scratch: Vec<ElemBlock>,
}

impl Assembler {
    pub fn new(mesh: &QuadraticMesh) -> Self {
        let dm = DofMap::new(mesh);
        let nodes = (0..mesh.n_elems()).map(|e| mesh.elem_nodes(e)).collect();
        let dofs: Vec<Vec<usize>> = (0..mesh.n_elems())
            .map(|e| dm.elem_dofs(mesh, e))
            .collect();
        let solid = mesh.elems.iter().map(|el| el.is_solid()).collect();
        let scratch = vec![ElemBlock::default(); mesh.n_elems()];
        Assembler {
            dm,
            nodes,
            dofs,
            solid,
            scratch,
        }
    }

    /// Sparsity pattern of the monolithic Jacobian (all dofs of an element
    /// couple; the diagonal is always present).
    pub fn pattern(&self) -> SparseMatrix {
        let mut pairs = Vec::new();
        for dofs in &self.dofs {
            for &r in dofs {
                for &c in dofs {
                    pairs.push((r, c));
                }
            }
        }
        SparseMatrix::from_pairs(self.dm.n_dofs, &mut pairs)
    }

    /// Assembles the residual (and, if `jac` is given, the Jacobian) at `x`.
    /// Rows of constrained dofs become `x[dof] - value` with identity Jacobian
    /// rows, so the constrained system stays square and exactly enforces the
    /// boundary values after one Newton update.
    pub fn assemble(
        &mut self,
        geo: &GeometryCache,
        ale: &AleCache,
        ctx: &StageContext,
        x: &[f64],
        constraints: &Constraints,
        r: &mut [f64],
        mut jac: Option<&mut SparseMatrix>,
    ) {
        assert_eq!(x.len(), self.dm.n_dofs);
        assert_eq!(r.len(), self.dm.n_dofs);
        assert_eq!(ctx.mesh_velocity.len(), self.dm.n_nodes);
        if let Some(t) = &ctx.time {
            assert_eq!(t.prev.len(), self.dm.n_dofs);
            assert!(t.dt_eff > 0.0);
        }
        let want_jac = jac.is_some();
        let mut scratch = std::mem::take(&mut self.scratch);
        let this: &Assembler = self;
        scratch
            .par_iter_mut()
            .enumerate()
            .for_each(|(e, blk)| this.element_block(e, geo, ale, ctx, x, blk, want_jac));

        r.fill(0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }
        let mask = constraints.mask(self.dm.n_dofs);
        for (e, blk) in scratch.iter().enumerate() {
            let dofs = &self.dofs[e];
            for (lr, &gr) in dofs.iter().enumerate() {
                if mask[gr] {
                    continue;
                }
                r[gr] += blk.r[lr];
                if let Some(j) = jac.as_deref_mut() {
                    let row = &blk.k[lr * MAX_DOFS..lr * MAX_DOFS + dofs.len()];
                    for (lc, &gc) in dofs.iter().enumerate() {
                        j.add(gr, gc, row[lc]);
                    }
                }
            }
        }
        for (dof, g) in constraints.iter() {
            r[dof] = x[dof] - g;
            if let Some(j) = jac.as_deref_mut() {
                j.set(dof, dof, 1.0);
            }
        }
        self.scratch = scratch;
    }

    #[allow(clippy::too_many_arguments)]
    fn element_block(
        &self,
        e: usize,
        geo: &GeometryCache,
        ale: &AleCache,
        ctx: &StageContext,
        x: &[f64],
        blk: &mut ElemBlock,
        want_jac: bool,
    ) {
        let dofs = &self.dofs[e];
        let nodes = &self.nodes[e];
        let solid = self.solid[e];
        blk.r = [0.0; MAX_DOFS];
        if want_jac {
            blk.k = [0.0; MAX_DOFS * MAX_DOFS];
        }

        let mu = ctx.physics.viscosity();
        let kappa = ctx.physics.stress_coeff();
        let continuous = ctx.physics.viscous_form == ViscousForm::Continuous;
        let (inv_dt, prev) = match &ctx.time {
            Some(t) => (1.0 / t.dt_eff, Some(t.prev)),
            None => (0.0, None),
        };

        let gq = geo.elem(e);
        let aq = ale.elem(e);
        for q in 0..N_QP {
            let g = &gq[q];
            let mp = &aq[q];
            let nn = &P2_AT_QP[q];
            let mm = &P1_AT_QP[q];
            let jw = mp.jac * g.dv;

            let mut gamma = [Vec2::ZERO; 6];
            for a in 0..6 {
                gamma[a] = mp.f_inv_t.mul_vec(g.grad_n[a]);
            }

            let mut ub = [Vec2::ZERO; 6];
            let mut u = Vec2::ZERO;
            let mut w = Vec2::ZERO;
            let mut up = Vec2::ZERO;
            let mut l = Mat2::ZERO;
            for b in 0..6 {
                ub[b] = Vec2::new(x[dofs[2 * b]], x[dofs[2 * b + 1]]);
                u += ub[b] * nn[b];
                w += ctx.mesh_velocity[nodes[b]] * nn[b];
                l = l + Mat2::outer(ub[b], gamma[b]);
                if let Some(pv) = prev {
                    up += Vec2::new(pv[dofs[2 * b]], pv[dofs[2 * b + 1]]) * nn[b];
                }
            }
            let urel = u - w;
            let udot = (u - up) * inv_dt;
            let lurel = l.mul_vec(urel);
            let p = mm[0] * x[dofs[12]] + mm[1] * x[dofs[13]] + mm[2] * x[dofs[14]];

            // basis vectors of the viscous contraction; with the extra F^-T
            // factor these are the columns of F^-T instead of e_k
            let phi = if continuous {
                [
                    Vec2::new(mp.f_inv_t.m[0][0], mp.f_inv_t.m[1][0]),
                    Vec2::new(mp.f_inv_t.m[0][1], mp.f_inv_t.m[1][1]),
                ]
            } else {
                [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)]
            };
            let d_visc = if solid {
                Mat2::ZERO
            } else if continuous {
                let mut lv = Mat2::ZERO;
                for b in 0..6 {
                    lv = lv + Mat2::outer(mp.f_inv_t.mul_vec(ub[b]), gamma[b]);
                }
                lv.sym()
            } else {
                l.sym()
            };

            // solid state at the quadrature point
            let mut qv = [Vec2::ZERO; 3];
            let (mut b00, mut b11, mut b01) = (0.0, 0.0, 0.0);
            let (mut bt00, mut bt11, mut bt01) = (0.0, 0.0, 0.0);
            let (mut g11, mut g22, mut g12) = (Vec2::ZERO, Vec2::ZERO, Vec2::ZERO);
            if solid {
                for i in 0..3 {
                    qv[i] = mp.f_inv_t.mul_vec(g.grad_m[i]);
                    let c11 = x[dofs[15 + 3 * i]];
                    let c22 = x[dofs[16 + 3 * i]];
                    let c12 = x[dofs[17 + 3 * i]];
                    b00 += mm[i] * c11;
                    b11 += mm[i] * c22;
                    b01 += mm[i] * c12;
                    g11 += qv[i] * c11;
                    g22 += qv[i] * c22;
                    g12 += qv[i] * c12;
                    if let Some(pv) = prev {
                        bt00 += mm[i] * pv[dofs[15 + 3 * i]];
                        bt11 += mm[i] * pv[dofs[16 + 3 * i]];
                        bt01 += mm[i] * pv[dofs[17 + 3 * i]];
                    }
                }
                bt00 = (b00 - bt00) * inv_dt;
                bt11 = (b11 - bt11) * inv_dt;
                bt01 = (b01 - bt01) * inv_dt;
            }
            let bq = Mat2::new(b00, b01, b01, b11);

            // residual: momentum rows
            for a in 0..6 {
                let ga = gamma[a];
                let mut fa = (udot + lurel) * nn[a] - ga * p;
                if solid {
                    let stress = Mat2::new(b00 - 1.0, b01, b01, b11 - 1.0);
                    fa += stress.mul_vec(ga) * kappa;
                } else {
                    let dvg = d_visc.mul_vec(ga);
                    fa += Vec2::new(2.0 * mu * dvg.dot(phi[0]), 2.0 * mu * dvg.dot(phi[1]));
                }
                blk.r[2 * a] += jw * fa.x;
                blk.r[2 * a + 1] += jw * fa.y;
            }

            // residual: continuity rows
            let trl = l.trace();
            for i in 0..3 {
                blk.r[12 + i] += jw * mm[i] * trl;
            }

            // residual: conformation rows
            if solid {
                let s11 = bt00 + g11.dot(urel) - 2.0 * (l.m[0][0] * b00 + l.m[0][1] * b01);
                let s22 = bt11 + g22.dot(urel) - 2.0 * (l.m[1][0] * b01 + l.m[1][1] * b11);
                let s12 = bt01 + g12.dot(urel)
                    - (l.m[0][0] * b01 + l.m[0][1] * b11 + b00 * l.m[1][0] + b01 * l.m[1][1]);
                for j in 0..3 {
                    blk.r[15 + 3 * j] += jw * mm[j] * s11;
                    blk.r[16 + 3 * j] += jw * mm[j] * s22;
                    blk.r[17 + 3 * j] += 2.0 * jw * mm[j] * s12;
                }
            }

            if !want_jac {
                continue;
            }

            let mut g_urel = [0.0; 6];
            for b in 0..6 {
                g_urel[b] = gamma[b].dot(urel);
            }
            let pp = [
                [phi[0].dot(phi[0]), phi[0].dot(phi[1])],
                [phi[1].dot(phi[0]), phi[1].dot(phi[1])],
            ];

            // momentum rows
            for a in 0..6 {
                let ga = gamma[a];
                for k in 0..2 {
                    let off = (2 * a + k) * MAX_DOFS;
                    for b in 0..6 {
                        let nab = nn[a] * nn[b];
                        let gab = ga.dot(gamma[b]);
                        for m in 0..2 {
                            let mut val = l.m[k][m] * nab;
                            if k == m {
                                val += nn[a] * (nn[b] * inv_dt + g_urel[b]);
                            }
                            if !solid {
                                val += mu
                                    * (pp[k][m] * gab
                                        + phi[m].dot(ga) * phi[k].dot(gamma[b]));
                            }
                            blk.k[off + 2 * b + m] += jw * val;
                        }
                    }
                    for i in 0..3 {
                        blk.k[off + 12 + i] -= jw * mm[i] * ga.comp(k);
                    }
                    if solid {
                        let c = jw * kappa;
                        for i in 0..3 {
                            let base = off + 15 + 3 * i;
                            if k == 0 {
                                blk.k[base] += c * mm[i] * ga.x;
                                blk.k[base + 2] += c * mm[i] * ga.y;
                            } else {
                                blk.k[base + 1] += c * mm[i] * ga.y;
                                blk.k[base + 2] += c * mm[i] * ga.x;
                            }
                        }
                    }
                }
            }

            // continuity rows
            for i in 0..3 {
                let off = (12 + i) * MAX_DOFS;
                for b in 0..6 {
                    blk.k[off + 2 * b] += jw * mm[i] * gamma[b].x;
                    blk.k[off + 2 * b + 1] += jw * mm[i] * gamma[b].y;
                }
            }

            // conformation rows
            if solid {
                for j in 0..3 {
                    for (c, fac) in [(0usize, 1.0), (1, 1.0), (2, 2.0)] {
                        let off = (15 + 3 * j + c) * MAX_DOFS;
                        let cj = fac * jw * mm[j];
                        for i in 0..3 {
                            let adv = mm[i] * inv_dt + qv[i].dot(urel);
                            match c {
                                0 => {
                                    blk.k[off + 15 + 3 * i] +=
                                        cj * (adv - 2.0 * l.m[0][0] * mm[i]);
                                    blk.k[off + 17 + 3 * i] += cj * (-2.0 * l.m[0][1] * mm[i]);
                                }
                                1 => {
                                    blk.k[off + 16 + 3 * i] +=
                                        cj * (adv - 2.0 * l.m[1][1] * mm[i]);
                                    blk.k[off + 17 + 3 * i] += cj * (-2.0 * l.m[1][0] * mm[i]);
                                }
                                _ => {
                                    blk.k[off + 15 + 3 * i] += cj * (-l.m[1][0] * mm[i]);
                                    blk.k[off + 16 + 3 * i] += cj * (-l.m[0][1] * mm[i]);
                                    blk.k[off + 17 + 3 * i] +=
                                        cj * (adv - (l.m[0][0] + l.m[1][1]) * mm[i]);
                                }
                            }
                        }
                        for b in 0..6 {
                            let bgb = bq.mul_vec(gamma[b]);
                            match c {
                                0 => {
                                    blk.k[off + 2 * b] += cj * (nn[b] * g11.x - 2.0 * bgb.x);
                                    blk.k[off + 2 * b + 1] += cj * (nn[b] * g11.y);
                                }
                                1 => {
                                    blk.k[off + 2 * b] += cj * (nn[b] * g22.x);
                                    blk.k[off + 2 * b + 1] += cj * (nn[b] * g22.y - 2.0 * bgb.y);
                                }
                                _ => {
                                    blk.k[off + 2 * b] += cj * (nn[b] * g12.x - bgb.y);
                                    blk.k[off + 2 * b + 1] += cj * (nn[b] * g12.y - bgb.x);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
}
