//! Damped Newton iteration on the assembled nonlinear systems.
//!
//! The caller supplies one closure that evaluates the residual and, when
//! asked, the exact Jacobian at a state; the solver owns the matrix storage
//! and the LU machinery so the symbolic factorization is computed once per
//! sparsity pattern and reused across iterations, stages and time steps. A
//! backtracking line search (Armijo condition on the squared residual norm)
//! guards steps that would increase the residual; a step that cannot be
//! damped into decrease is reported as non-convergence so the time stepper
//! can retry with a smaller step — unless the residual has already reached
//! the round-off floor, in which case the iterate is accepted.

use crate::sparse::{LuSolver, SparseError, SparseMatrix};

#[derive(Debug, thiserror::Error)]
pub enum NewtonError {
    #[error("Newton did not converge: {iters} iterations, residual {residual:.3e}")]
    NonConvergence { iters: usize, residual: f64 },
    #[error("line search stalled at iteration {iter}: residual {residual:.3e}")]
    LineSearchStalled { iter: usize, residual: f64 },
    #[error(transparent)]
    Linear(#[from] SparseError),
    #[error(transparent)]
    Assembly(#[from] crate::fem::FemError),
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonConfig {
    /// Absolute residual-norm target.
    pub abs_tol: f64,
    /// Convergence relative to the initial residual norm.
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Maximum step halvings in the line search.
    pub max_backtracks: usize,
    /// Residual norm below which a stalled line search counts as converged
    /// rather than as an error. Near a solution the residual bottoms out at
    /// the round-off floor of the assembly and the factorization; once there,
    /// no damped step can decrease it further even though the iterate is as
    /// good as the arithmetic allows.
    pub stall_accept: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 20,
            max_backtracks: 8,
            stall_accept: 1e-7,
        }
    }
}

/// Convergence record of one solve.
#[derive(Debug, Clone, Default)]
pub struct NewtonStats {
    pub iters: usize,
    pub initial_norm: f64,
    pub final_norm: f64,
    /// Residual norm after every accepted iteration (starting with the
    /// initial norm) — machine-readable convergence history.
    pub history: Vec<f64>,
    pub backtracks: usize,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Newton driver bound to one sparsity pattern.
pub struct NewtonSolver {
    jac: SparseMatrix,
    lu: LuSolver,
    r: Vec<f64>,
    dx: Vec<f64>,
    trial: Vec<f64>,
}

impl NewtonSolver {
    /// Takes ownership of the (zero-valued) pattern matrix and runs the
    /// symbolic analysis.
    pub fn new(pattern: SparseMatrix) -> Result<Self, SparseError> {
        let lu = LuSolver::analyze(&pattern)?;
        let n = pattern.n();
        Ok(NewtonSolver {
            jac: pattern,
            lu,
            r: vec![0.0; n],
            dx: vec![0.0; n],
            trial: vec![0.0; n],
        })
    }

    /// Solves `R(x) = 0` in place. `assemble(x, r, jac)` must fill the
    /// residual and, when `jac` is `Some`, the Jacobian at `x`; both use the
    /// constrained convention (identity rows at Dirichlet dofs).
    pub fn solve<F>(
        &mut self,
        x: &mut [f64],
        cfg: &NewtonConfig,
        mut assemble: F,
    ) -> Result<NewtonStats, NewtonError>
    where
        F: FnMut(&[f64], &mut [f64], Option<&mut SparseMatrix>) -> Result<(), crate::fem::FemError>,
    {
        let mut stats = NewtonStats::default();
        assemble(x, &mut self.r, Some(&mut self.jac))?;
        let mut rn = norm(&self.r);
        stats.initial_norm = rn;
        stats.history.push(rn);
        let target = cfg.abs_tol.max(cfg.rel_tol * rn);

        while rn > target {
            if stats.iters >= cfg.max_iter {
                return Err(NewtonError::NonConvergence {
                    iters: stats.iters,
                    residual: rn,
                });
            }
            self.lu.factor(&self.jac)?;
            self.dx.copy_from_slice(&self.r);
            self.lu.solve_in_place(&mut self.dx)?;

            // Backtracking: accept x - alpha*dx under the Armijo decrease
            // condition on |R|^2 with slope constant 1e-4.
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..=cfg.max_backtracks {
                for i in 0..x.len() {
                    self.trial[i] = x[i] - alpha * self.dx[i];
                }
                assemble(&self.trial, &mut self.r, None)?;
                let tn = norm(&self.r);
                if tn * tn <= (1.0 - 2e-4 * alpha) * rn * rn {
                    x.copy_from_slice(&self.trial);
                    rn = tn;
                    accepted = true;
                    break;
                }
                alpha *= 0.5;
                stats.backtracks += 1;
            }
            if !accepted {
                // `x` is untouched (only trials were evaluated); `rn` is
                // still its residual norm
                if rn <= cfg.stall_accept {
                    stats.final_norm = rn;
                    return Ok(stats);
                }
                return Err(NewtonError::LineSearchStalled {
                    iter: stats.iters,
                    residual: rn,
                });
            }
            stats.iters += 1;
            stats.history.push(rn);
            if rn <= target {
                break;
            }
            // fresh Jacobian for the next iteration
            assemble(x, &mut self.r, Some(&mut self.jac))?;
            rn = norm(&self.r);
        }
        stats.final_norm = rn;
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// R(x) = A x - b + nonlinearity; small dense-ish systems through the
    /// sparse path.
    fn tridiag_pattern(n: usize) -> SparseMatrix {
        let mut pairs = Vec::new();
        for i in 0..n - 1 {
            pairs.push((i, i + 1));
            pairs.push((i + 1, i));
        }
        SparseMatrix::from_pairs(n, &mut pairs)
    }

    #[test]
    fn linear_system_converges_in_one_iteration() {
        let n = 12;
        let mut solver = NewtonSolver::new(tridiag_pattern(n)).unwrap();
        let mut x = vec![0.0; n];
        let stats = solver
            .solve(&mut x, &NewtonConfig::default(), |x, r, jac| {
                if let Some(j) = jac {
                    j.clear();
                    for i in 0..n {
                        j.set(i, i, 2.0);
                        if i > 0 {
                            j.set(i, i - 1, -1.0);
                        }
                        if i + 1 < n {
                            j.set(i, i + 1, -1.0);
                        }
                    }
                }
                for i in 0..n {
                    let left = if i > 0 { x[i - 1] } else { 0.0 };
                    let right = if i + 1 < n { x[i + 1] } else { 0.0 };
                    r[i] = 2.0 * x[i] - left - right - 1.0;
                }
                Ok(())
            })
            .unwrap();
        assert_eq!(stats.iters, 1);
        assert!(stats.final_norm < 1e-10);
    }

    #[test]
    fn scalar_quadratic_shows_fast_tail() {
        // R(x) = x^2 - 4 with x0 = 3: classic quadratic convergence to 2.
        let pattern = SparseMatrix::from_pairs(1, &mut vec![]);
        let mut solver = NewtonSolver::new(pattern).unwrap();
        let mut x = vec![3.0];
        let stats = solver
            .solve(&mut x, &NewtonConfig::default(), |x, r, jac| {
                r[0] = x[0] * x[0] - 4.0;
                if let Some(j) = jac {
                    j.set(0, 0, 2.0 * x[0]);
                }
                Ok(())
            })
            .unwrap();
        assert!((x[0] - 2.0).abs() < 1e-9);
        // quadratic tail: last residual much smaller than square root of
        // the one before it
        let h = &stats.history;
        assert!(h.len() >= 3);
        let last = h[h.len() - 1];
        let prev = h[h.len() - 2];
        assert!(last <= prev.powf(1.5), "history {h:?}");
    }

    #[test]
    fn root_start_returns_immediately() {
        let pattern = SparseMatrix::from_pairs(1, &mut vec![]);
        let mut solver = NewtonSolver::new(pattern).unwrap();
        let mut x = vec![2.0];
        let stats = solver
            .solve(&mut x, &NewtonConfig::default(), |x, r, jac| {
                r[0] = x[0] * x[0] - 4.0;
                if let Some(j) = jac {
                    j.set(0, 0, 2.0 * x[0]);
                }
                Ok(())
            })
            .unwrap();
        assert_eq!(stats.iters, 0);
        assert_eq!(x[0], 2.0);
    }

    #[test]
    fn line_search_rescues_overshoot() {
        // R(x) = atan(x): full Newton overshoots badly from x0 = 20 and
        // diverges without damping.
        let pattern = SparseMatrix::from_pairs(1, &mut vec![]);
        let mut solver = NewtonSolver::new(pattern).unwrap();
        let mut x = vec![20.0];
        let stats = solver
            .solve(&mut x, &NewtonConfig::default(), |x, r, jac| {
                r[0] = x[0].atan();
                if let Some(j) = jac {
                    j.set(0, 0, 1.0 / (1.0 + x[0] * x[0]));
                }
                Ok(())
            })
            .unwrap();
        assert!(x[0].abs() < 1e-8, "x = {}", x[0]);
        assert!(stats.backtracks > 0);
    }

    #[test]
    fn stall_at_the_round_off_floor_is_accepted() {
        // synthetic residual with a hard floor at 1e-8: below it no step can
        // decrease the norm, mimicking assembly round-off near a solution
        let floor_residual = |x: &[f64], r: &mut [f64], jac: Option<&mut SparseMatrix>| {
            r[0] = if x[0].abs() < 1e-8 { 1e-8 } else { x[0] };
            if let Some(j) = jac {
                j.set(0, 0, 1.0);
            }
            Ok(())
        };

        let pattern = SparseMatrix::from_pairs(1, &mut vec![]);
        let mut solver = NewtonSolver::new(pattern).unwrap();
        let mut x = vec![1.0];
        let stats = solver
            .solve(&mut x, &NewtonConfig::default(), floor_residual)
            .unwrap();
        assert!(stats.final_norm <= 1e-8, "final {}", stats.final_norm);
        assert!(x[0].abs() < 1e-7);

        // with the acceptance floor below the problem's floor, the same
        // stall is a hard error
        let mut solver = NewtonSolver::new(SparseMatrix::from_pairs(1, &mut vec![])).unwrap();
        let mut x = vec![1.0];
        let err = solver
            .solve(
                &mut x,
                &NewtonConfig {
                    stall_accept: 1e-12,
                    ..NewtonConfig::default()
                },
                floor_residual,
            )
            .unwrap_err();
        assert!(matches!(err, NewtonError::LineSearchStalled { .. }));
    }

    #[test]
    fn divergent_problem_reports_nonconvergence() {
        // R(x) = exp(x) has no root; Newton walks x to -inf, residual
        // decreases monotonically, so max_iter triggers.
        let pattern = SparseMatrix::from_pairs(1, &mut vec![]);
        let mut solver = NewtonSolver::new(pattern).unwrap();
        let mut x = vec![1.0];
        let err = solver
            .solve(
                &mut x,
                &NewtonConfig {
                    max_iter: 5,
                    ..NewtonConfig::default()
                },
                |x, r, jac| {
                    r[0] = x[0].exp();
                    if let Some(j) = jac {
                        j.set(0, 0, x[0].exp());
                    }
                    Ok(())
                },
            )
            .unwrap_err();
        assert!(matches!(err, NewtonError::NonConvergence { .. }));
    }
}
