//! Kernels for the implicit equations of the one-step methods.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Bound on `‖Δx‖_∞` (fixed point) or `‖r(x)‖_∞` (Newton).
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Iteration is abandoned once the update grows past this multiple of
    /// the first update.
    pub divergence_factor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100,
            divergence_factor: 1e6,
        }
    }
}

impl SolverConfig {
    pub fn with_tolerance(tolerance: f64) -> Self {
        Self {
            tolerance,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || !(self.divergence_factor > 1.0) {
            return Err(Error::Config(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub solution: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub diverged: bool,
}

/// Iterates `x ← map(x)` until the successive update is below tolerance.
pub fn fixed_point_solve<F>(mut map: F, guess: DVector<f64>, config: &SolverConfig) -> SolveOutcome
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut x = guess;
    let mut first: Option<f64> = None;
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iterations {
        let next = map(&x);
        if next.iter().any(|v| !v.is_finite()) {
            return SolveOutcome {
                solution: x,
                iterations: it,
                residual: f64::INFINITY,
                converged: false,
                diverged: true,
            };
        }
        residual = (&next - &x).amax();
        x = next;
        let reference = *first.get_or_insert(residual);
        if residual <= config.tolerance {
            return SolveOutcome {
                solution: x,
                iterations: it,
                residual,
                converged: true,
                diverged: false,
            };
        }
        if residual > config.divergence_factor * reference {
            return SolveOutcome {
                solution: x,
                iterations: it,
                residual,
                converged: false,
                diverged: true,
            };
        }
    }
    SolveOutcome {
        solution: x,
        iterations: config.max_iterations,
        residual,
        converged: false,
        diverged: false,
    }
}

/// Full-step Newton with a dense LU factorization per iteration.
/// `iterations` counts Newton updates.
pub fn newton_solve<R, J>(
    mut residual: R,
    mut jacobian: J,
    guess: DVector<f64>,
    config: &SolverConfig,
) -> Result<SolveOutcome>
where
    R: FnMut(&DVector<f64>) -> DVector<f64>,
    J: FnMut(&DVector<f64>) -> DMatrix<f64>,
{
    let mut x = guess;
    let mut r = residual(&x);
    let mut norm = r.amax();
    let initial = norm;
    let mut updates = 0;
    loop {
        if !norm.is_finite() {
            return Ok(SolveOutcome {
                solution: x,
                iterations: updates,
                residual: f64::INFINITY,
                converged: false,
                diverged: true,
            });
        }
        if norm <= config.tolerance {
            return Ok(SolveOutcome {
                solution: x,
                iterations: updates,
                residual: norm,
                converged: true,
                diverged: false,
            });
        }
        if updates > 0 && norm > config.divergence_factor * initial {
            return Ok(SolveOutcome {
                solution: x,
                iterations: updates,
                residual: norm,
                converged: false,
                diverged: true,
            });
        }
        if updates == config.max_iterations {
            return Ok(SolveOutcome {
                solution: x,
                iterations: updates,
                residual: norm,
                converged: false,
                diverged: false,
            });
        }
        let jac = jacobian(&x);
        let delta = jac.lu().solve(&r).ok_or(Error::SingularJacobian)?;
        if delta.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularJacobian);
        }
        x -= delta;
        updates += 1;
        r = residual(&x);
        norm = r.amax();
    }
}
