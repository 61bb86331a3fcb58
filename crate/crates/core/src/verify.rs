//! Executable checks: Poisson structure of a step map, energy drift, the
//! discrete gradient condition, convergence orders and max-timestep sweeps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrators::{DisrkScheme, Integrator, Method, SolverKind};
use crate::psystem::{PoissonSystem, State};
use crate::solvers::SolverConfig;

/// Mantissas of the timestep grid, per decade.
pub const GRID_MANTISSAS: [u32; 6] = [1, 2, 4, 5, 6, 8];

pub const SWEEP_MIN_STEPS: usize = 100;
/// Simulated time each sweep point must cover. KdV fixed-point failures of
/// the exponential methods only appear once the wave has steepened (t ≈ 1).
pub const SWEEP_HORIZON_TIME: f64 = 5.0;
pub const SWEEP_TOLERANCE: f64 = 1e-10;

/// Length of a sweep run: `max(min_steps, ⌈time / h⌉)` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepHorizon {
    pub min_steps: usize,
    /// Zero makes the horizon a plain step count.
    pub time: f64,
}

impl Default for SweepHorizon {
    fn default() -> Self {
        Self {
            min_steps: SWEEP_MIN_STEPS,
            time: SWEEP_HORIZON_TIME,
        }
    }
}

impl SweepHorizon {
    pub fn steps(min_steps: usize) -> Self {
        Self { min_steps, time: 0.0 }
    }

    pub fn steps_for(&self, h: f64) -> usize {
        // the small slack keeps T/h at an exact ratio from rounding up
        let by_time = (self.time / h * (1.0 - 1e-12)).ceil();
        self.min_steps.max(by_time as usize)
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_steps == 0 || !(self.time >= 0.0 && self.time.is_finite()) {
            return Err(Error::Config(format!("invalid sweep horizon {self:?}")));
        }
        Ok(())
    }
}

/// `‖M J Mᵀ − J‖_max` with `M` the central finite-difference Jacobian of `step` at `q`.
pub fn poisson_check<F>(mut step: F, j: &DMatrix<f64>, q: &DVector<f64>, fd_eps: f64) -> Result<f64>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    if !(fd_eps > 0.0) {
        return Err(Error::Probe(format!("finite-difference step must be positive, got {fd_eps}")));
    }
    let dim = q.len();
    if j.shape() != (dim, dim) {
        return Err(Error::Shape {
            expected: dim,
            got: j.nrows(),
        });
    }
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut probe = q.clone();
    for col in 0..dim {
        probe[col] = q[col] + fd_eps;
        let plus = step(&probe).map_err(|e| Error::Probe(format!("column {col} (+): {e}")))?;
        probe[col] = q[col] - fd_eps;
        let minus = step(&probe).map_err(|e| Error::Probe(format!("column {col} (-): {e}")))?;
        probe[col] = q[col];
        m.set_column(col, &((plus - minus) / (2.0 * fd_eps)));
    }
    Ok((&m * j * m.transpose() - j).amax())
}

/// The step map `q ↦ q'` of an integrator, failing on non-convergence.
pub fn step_map<'a, S: PoissonSystem + ?Sized>(
    integrator: &'a Integrator,
    system: &'a S,
    h: f64,
) -> impl FnMut(&DVector<f64>) -> Result<DVector<f64>> + 'a {
    move |q| {
        let out = integrator.step(system, &State::new(q.clone(), 0.0)?, h)?;
        if !out.converged {
            return Err(Error::Probe(format!(
                "{} did not converge (residual {:e})",
                integrator.method(),
                out.residual
            )));
        }
        Ok(out.state.into_q())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDrift {
    pub initial: f64,
    /// `|H(q_k) − H(q₀)|` per state.
    pub series: Vec<f64>,
    pub max_abs: f64,
}

impl EnergyDrift {
    /// `max_abs / max(1, |H₀|)`.
    pub fn max_relative(&self) -> f64 {
        self.max_abs / self.initial.abs().max(1.0)
    }
}

pub fn energy_drift<S: PoissonSystem + ?Sized>(system: &S, trajectory: &[State]) -> Result<EnergyDrift> {
    let first = trajectory
        .first()
        .ok_or_else(|| Error::Probe("energy drift of an empty trajectory".into()))?;
    let initial = system.hamiltonian(first.q());
    let series: Vec<f64> = trajectory
        .iter()
        .map(|s| (system.hamiltonian(s.q()) - initial).abs())
        .collect();
    let max_abs = series.iter().copied().fold(0.0, f64::max);
    Ok(EnergyDrift {
        initial,
        series,
        max_abs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DgResidual {
    /// `|⟨∇̄V(q,q'), q'−q⟩ − (V(q') − V(q))|`
    pub potential: f64,
    /// Same with `∇̄H = D(q+q')/2 + ∇̄V`.
    pub hamiltonian: f64,
    /// `max(|V(q)|, |V(q')|, |H(q)|, |H(q')|, 1)`.
    pub scale: f64,
}

pub fn dg_condition_check<S: PoissonSystem + ?Sized>(system: &S, q: &DVector<f64>, q_next: &DVector<f64>) -> Result<DgResidual> {
    if q.len() != system.dim() || q_next.len() != system.dim() {
        return Err(Error::Shape {
            expected: system.dim(),
            got: if q.len() != system.dim() { q.len() } else { q_next.len() },
        });
    }
    let dq = q_next - q;
    let dg_v = system.discrete_grad_potential(q, q_next);
    let (v0, v1) = (system.potential(q), system.potential(q_next));
    let potential = (dg_v.dot(&dq) - (v1 - v0)).abs();
    let dg_h = system.apply_d(&((q + q_next) * 0.5)) + dg_v;
    let (h0, h1) = (system.hamiltonian(q), system.hamiltonian(q_next));
    let hamiltonian = (dg_h.dot(&dq) - (h1 - h0)).abs();
    let scale = [v0, v1, h0, h1].iter().fold(1.0f64, |m, x| m.max(x.abs()));
    Ok(DgResidual {
        potential,
        hamiltonian,
        scale,
    })
}

/// `‖a − b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

fn step_count(horizon: f64, h: f64) -> Result<usize> {
    let n = horizon / h;
    let rounded = n.round();
    if !(h > 0.0) || rounded < 1.0 || (n - rounded).abs() > 1e-8 * rounded {
        return Err(Error::Probe(format!("horizon {horizon} is not a multiple of h = {h}")));
    }
    Ok(rounded as usize)
}

/// Runs `integrator` to `horizon` with step `h`; `None` if a step fails.
pub fn solve_to<S: PoissonSystem + ?Sized>(
    integrator: &Integrator,
    system: &S,
    initial: &State,
    horizon: f64,
    h: f64,
) -> Result<Option<State>> {
    let steps = step_count(horizon, h)?;
    let mut state = initial.clone();
    for _ in 0..steps {
        let out = integrator.step(system, &state, h)?;
        if !out.converged {
            return Ok(None);
        }
        state = out.state;
    }
    Ok(Some(state))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub slope: f64,
    /// `(h, relative L² error at the horizon)` for the surviving runs.
    pub points: Vec<(f64, f64)>,
    /// Timesteps whose run failed to converge.
    pub excluded: Vec<f64>,
}

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (num, den) = points.iter().fold((0.0, 0.0), |(num, den), &(x, y)| {
        let dx = x.ln() - mx;
        (num + dx * (y.ln() - my), den + dx * dx)
    });
    num / den
}

/// Observed order of `integrator` from the error at `horizon` against a
/// reference computed with `reference` at `min(h_list) / 20`.
pub fn estimate_order<S: PoissonSystem + ?Sized>(
    integrator: &Integrator,
    system: &S,
    initial: &State,
    horizon: f64,
    h_list: &[f64],
    reference: Method,
) -> Result<OrderEstimate> {
    if h_list.len() < 4 {
        return Err(Error::Probe(format!("need at least 4 timesteps, got {}", h_list.len())));
    }
    if !matches!(reference, Method::ExpMidpoint | Method::Disex6) {
        return Err(Error::Config(format!("reference must be exp_midpoint or disex6, not {reference}")));
    }
    let h_min = h_list.iter().copied().fold(f64::INFINITY, f64::min);
    let ref_integrator = Integrator::fixed_point(reference, SolverConfig::with_tolerance(1e-13));
    let exact = solve_to(&ref_integrator, system, initial, horizon, h_min / 20.0)?
        .ok_or_else(|| Error::Probe("reference run did not converge".into()))?;

    let runs: Vec<(f64, Option<State>)> = h_list
        .par_iter()
        .map(|&h| solve_to(integrator, system, initial, horizon, h).map(|s| (h, s)))
        .collect::<Result<_>>()?;
    let mut points = Vec::new();
    let mut excluded = Vec::new();
    for (h, end) in runs {
        match end {
            Some(s) => points.push((h, relative_l2(s.q(), exact.q()))),
            None => excluded.push(h),
        }
    }
    if points.len() < 3 {
        return Err(Error::Probe(format!(
            "only {} converged runs for {} (excluded h = {excluded:?})",
            points.len(),
            integrator.method()
        )));
    }
    Ok(OrderEstimate {
        slope: loglog_slope(&points),
        points,
        excluded,
    })
}

/// `{1,2,4,5,6,8} × 10^e` within `[lo, hi]`, ascending.
pub fn timestep_grid(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(lo > 0.0) || !(hi >= lo) {
        return out;
    }
    let first = lo.log10().floor() as i32 - 1;
    let last = hi.log10().ceil() as i32;
    for e in first..=last {
        for m in GRID_MANTISSAS {
            // parse the decimal literal so grid values are the nearest doubles
            let v: f64 = format!("{m}e{e}").parse().expect("valid literal");
            if v >= lo * (1.0 - 1e-12) && v <= hi * (1.0 + 1e-12) {
                out.push(v);
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub h: f64,
    pub converged: bool,
    /// Largest per-step iteration count seen before stopping.
    pub max_iterations: usize,
    pub steps_completed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub method: Method,
    pub solver: SolverKind,
    pub resolution: usize,
    /// Largest grid `h` such that it and every smaller grid `h` converged.
    pub h_max: Option<f64>,
    pub points: Vec<SweepPoint>,
}

pub fn sweep_point<S: PoissonSystem + ?Sized>(
    integrator: &Integrator,
    system: &S,
    initial: &State,
    h: f64,
    horizon_steps: usize,
) -> Result<SweepPoint> {
    let mut state = initial.clone();
    let mut max_iterations = 0;
    for k in 0..horizon_steps {
        let out = match integrator.step(system, &state, h) {
            Ok(out) => out,
            // a singular Newton matrix is a failed point, not a failed sweep
            Err(Error::SingularJacobian) => {
                return Ok(SweepPoint {
                    h,
                    converged: false,
                    max_iterations,
                    steps_completed: k,
                })
            }
            Err(e) => return Err(e),
        };
        max_iterations = max_iterations.max(out.iterations);
        if !out.converged {
            return Ok(SweepPoint {
                h,
                converged: false,
                max_iterations,
                steps_completed: k,
            });
        }
        state = out.state;
    }
    Ok(SweepPoint {
        h,
        converged: true,
        max_iterations,
        steps_completed: horizon_steps,
    })
}

/// Runs every grid point (in parallel) and reports the monotone `h_max`.
pub fn sweep_max_timestep<S: PoissonSystem + ?Sized>(
    integrator: &Integrator,
    system: &S,
    resolution: usize,
    initial: &State,
    h_grid: &[f64],
    horizon: &SweepHorizon,
) -> Result<SweepResult> {
    if h_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("timestep grid must be strictly ascending".into()));
    }
    horizon.validate()?;
    let points: Vec<SweepPoint> = h_grid
        .par_iter()
        .map(|&h| sweep_point(integrator, system, initial, h, horizon.steps_for(h)))
        .collect::<Result<_>>()?;
    let h_max = points.iter().take_while(|p| p.converged).last().map(|p| p.h);
    Ok(SweepResult {
        method: integrator.method(),
        solver: integrator.solver_kind(),
        resolution,
        h_max,
        points,
    })
}

/// DISEX step evaluated from its tableau: all stages
/// `Q_i = e^{A c_i h} q + h Σ_{j<i} b_j e^{A(c_i−c_j)h} f(Q_j) + (b_i/2) h f(Q_i)`
/// are iterated jointly, then `q' = e^{Ah} q + h Σ b_i e^{A(1−c_i)h} f(Q_i)`.
pub fn disex_tableau_step<S: PoissonSystem + ?Sized>(
    scheme: &DisrkScheme,
    system: &S,
    q: &DVector<f64>,
    h: f64,
    config: &SolverConfig,
) -> Result<DVector<f64>> {
    let b = scheme.weights();
    let c = scheme.abscissae();
    let s = b.len();
    let free: Vec<DVector<f64>> = c.iter().map(|&ci| system.apply_exp(ci * h, q)).collect();
    let mut stages = free.clone();
    let mut converged = false;
    for _ in 0..config.max_iterations {
        let f: Vec<DVector<f64>> = stages.iter().map(|x| system.nonlinearity(x)).collect();
        let mut next = Vec::with_capacity(s);
        for i in 0..s {
            let mut qi = free[i].clone() + &f[i] * (0.5 * b[i] * h);
            for j in 0..i {
                qi += system.apply_exp((c[i] - c[j]) * h, &f[j]) * (b[j] * h);
            }
            next.push(qi);
        }
        let delta = next
            .iter()
            .zip(&stages)
            .map(|(a, b)| (a - b).amax())
            .fold(0.0, f64::max);
        stages = next;
        if !delta.is_finite() {
            break;
        }
        if delta <= config.tolerance {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Probe("tableau stage iteration did not converge".into()));
    }
    let mut out = system.apply_exp(h, q);
    for i in 0..s {
        out += system.apply_exp((1.0 - c[i]) * h, &system.nonlinearity(&stages[i])) * (b[i] * h);
    }
    Ok(out)
}
