//! One-step methods for `q̇ = Aq + f(q)`, `A = JD`, `f = J∇V`.
//!
//! | method              | update                                                     |
//! |---------------------|------------------------------------------------------------|
//! | `exp_euler`         | `q' = Sq + T f(q)`                                         |
//! | `midpoint`          | `q' = q + h J∇H((q + q')/2)`                               |
//! | `discrete_gradient` | `q' = q + h J(D(q + q')/2 + ∇̄V(q, q'))`                   |
//! | `exp_midpoint`      | `q' = Sq + h S_{1/2} f((S_{1/2} q + S_{-1/2} q')/2)`       |
//! | `disex`             | exp_midpoint substeps of length `b₁h, …, b_sh`             |
//! | `energy_exp`        | `q' = Sq + T J∇̄V(q, q')`                                  |
//!
//! with `S = e^{Ah}`, `S_{±1/2} = e^{±Ah/2}` and `T = ∫₀^h e^{Aτ} dτ`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::psystem::{PoissonSystem, State};
use crate::solvers::{fixed_point_solve, newton_solve, SolveOutcome, SolverConfig};

/// Weights of the six-stage DISEX composition.
#[allow(clippy::excessive_precision)]
pub const DISEX6_WEIGHTS: [f64; 6] = [
    0.5080048194000274,
    1.360107162294827,
    2.019293359181722,
    0.5685658926458250,
    -1.459852049586439,
    -1.996119183935963,
];

/// Tolerance on `Σ b_i = 1`.
pub const CONSISTENCY_TOL: f64 = 1e-8;

/// Diagonally implicit symplectic scheme given by its weights; the stage
/// matrix and abscissae are derived from them.
#[derive(Debug, Clone, PartialEq)]
pub struct DisrkScheme {
    weights: Vec<f64>,
}

impl DisrkScheme {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|b| !b.is_finite()) || (sum - 1.0).abs() > CONSISTENCY_TOL {
            return Err(Error::InconsistentScheme(sum));
        }
        Ok(Self { weights })
    }

    pub fn disex6() -> Self {
        Self::new(DISEX6_WEIGHTS.to_vec()).expect("compiled-in weights are consistent")
    }

    pub fn stages(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `c_i = b₁ + … + b_{i-1} + b_i / 2`.
    pub fn abscissae(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.weights
            .iter()
            .map(|&b| {
                let c = acc + 0.5 * b;
                acc += b;
                c
            })
            .collect()
    }

    /// Lower-triangular `a_ij`: `b_j` below the diagonal, `b_i / 2` on it.
    pub fn stage_matrix(&self) -> DMatrix<f64> {
        let s = self.stages();
        DMatrix::from_fn(s, s, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.weights[j],
            std::cmp::Ordering::Equal => 0.5 * self.weights[i],
            std::cmp::Ordering::Less => 0.0,
        })
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    /// Total solver iterations (map evaluations or Newton updates).
    pub iterations: usize,
    /// Last `‖Δx‖_∞` (fixed point) or `‖r‖_∞` (Newton); max over substeps.
    pub residual: f64,
    pub converged: bool,
    /// Composition substep whose solve failed, counted from 0.
    pub failed_substep: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Midpoint,
    DiscreteGradient,
    ExpEuler,
    ExpMidpoint,
    Disex6,
    EnergyExp,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Midpoint,
        Method::DiscreteGradient,
        Method::ExpEuler,
        Method::ExpMidpoint,
        Method::Disex6,
        Method::EnergyExp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Midpoint => "midpoint",
            Self::DiscreteGradient => "dg",
            Self::ExpEuler => "exp_euler",
            Self::ExpMidpoint => "exp_midpoint",
            Self::Disex6 => "disex6",
            Self::EnergyExp => "energy_exp",
        }
    }

    pub fn is_exponential(&self) -> bool {
        matches!(self, Self::ExpEuler | Self::ExpMidpoint | Self::Disex6 | Self::EnergyExp)
    }

    pub fn supports_newton(&self) -> bool {
        matches!(self, Self::Midpoint | Self::DiscreteGradient)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "midpoint" => Ok(Self::Midpoint),
            "dg" | "discrete_gradient" => Ok(Self::DiscreteGradient),
            "exp_euler" => Ok(Self::ExpEuler),
            "exp_midpoint" => Ok(Self::ExpMidpoint),
            "disex6" => Ok(Self::Disex6),
            "energy_exp" => Ok(Self::EnergyExp),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected midpoint|dg|exp_euler|exp_midpoint|disex6|energy_exp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SolverKind {
    FixedPoint,
    Newton,
}

impl SolverKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedPoint => "fixed_point",
            Self::Newton => "newton",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed_point" | "fixed-point" | "fp" => Ok(Self::FixedPoint),
            "newton" => Ok(Self::Newton),
            other => Err(Error::Config(format!("unknown solver `{other}` (expected fixed_point|newton)"))),
        }
    }
}

fn check_timestep(h: f64) -> Result<()> {
    if h > 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTimestep(h))
    }
}

fn outcome(start: &State, h: f64, solve: SolveOutcome) -> StepOutcome {
    let q = if solve.solution.iter().all(|v| v.is_finite()) {
        solve.solution
    } else {
        start.q().clone()
    };
    StepOutcome {
        state: State::new(q, start.t() + h).expect("finite by construction"),
        iterations: solve.iterations,
        residual: solve.residual,
        converged: solve.converged,
        failed_substep: None,
    }
}

/// `e^{Ah}q + T f(q)`; also the predictor for the implicit exponential methods.
fn exp_euler_update<S: PoissonSystem + ?Sized>(system: &S, q: &DVector<f64>, h: f64) -> DVector<f64> {
    system.apply_exp(h, q) + system.apply_int_exp(h, &system.nonlinearity(q))
}

pub fn exp_euler_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    _solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = exp_euler_update(system, state.q(), h);
    Ok(StepOutcome {
        state: State::new(q, state.t() + h)?,
        iterations: 0,
        residual: 0.0,
        converged: true,
        failed_substep: None,
    })
}

fn midpoint_map<'a, S: PoissonSystem + ?Sized>(
    system: &'a S,
    q: &'a DVector<f64>,
    h: f64,
) -> impl Fn(&DVector<f64>) -> DVector<f64> + 'a {
    move |x| {
        let mid = (q + x) * 0.5;
        let grad_h = system.apply_d(&mid) + system.grad_potential(&mid);
        q + system.apply_j(&grad_h) * h
    }
}

pub fn midpoint_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = state.q();
    let solve = fixed_point_solve(midpoint_map(system, q, h), q.clone(), solver);
    Ok(outcome(state, h, solve))
}

/// `I - c J B`, with `J` applied column by column.
fn identity_minus_j_times<S: PoissonSystem + ?Sized>(system: &S, b: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let dim = b.nrows();
    let mut m = DMatrix::identity(dim, dim);
    for (j, col) in b.column_iter().enumerate() {
        let jc = system.apply_j(&col.into_owned());
        let mut target = m.column_mut(j);
        target.axpy(-c, &jc, 1.0);
    }
    m
}

pub fn midpoint_newton_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = state.q();
    let map = midpoint_map(system, q, h);
    let d = system.dense_d();
    let solve = newton_solve(
        |x| x - map(x),
        |x| {
            let mid = (q + x) * 0.5;
            identity_minus_j_times(system, &(&d + system.hess_potential(&mid)), 0.5 * h)
        },
        q.clone(),
        solver,
    )?;
    Ok(outcome(state, h, solve))
}

fn discrete_gradient_map<'a, S: PoissonSystem + ?Sized>(
    system: &'a S,
    q: &'a DVector<f64>,
    h: f64,
) -> impl Fn(&DVector<f64>) -> DVector<f64> + 'a {
    move |x| {
        let mid = (q + x) * 0.5;
        let grad_h = system.apply_d(&mid) + system.discrete_grad_potential(q, x);
        q + system.apply_j(&grad_h) * h
    }
}

pub fn discrete_gradient_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = state.q();
    let solve = fixed_point_solve(discrete_gradient_map(system, q, h), q.clone(), solver);
    Ok(outcome(state, h, solve))
}

pub fn discrete_gradient_newton_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = state.q();
    let map = discrete_gradient_map(system, q, h);
    let half_d = system.dense_d() * 0.5;
    let solve = newton_solve(
        |x| x - map(x),
        |x| identity_minus_j_times(system, &(&half_d + system.discrete_grad_jacobian(q, x)), h),
        q.clone(),
        solver,
    )?;
    Ok(outcome(state, h, solve))
}

/// One exponential midpoint solve for any nonzero `h`, including the negative
/// substeps of a composition.
pub(crate) fn exp_midpoint_solve<S: PoissonSystem + ?Sized>(
    system: &S,
    q: &DVector<f64>,
    h: f64,
    solver: &SolverConfig,
) -> SolveOutcome {
    let full = system.apply_exp(h, q);
    let half = system.apply_exp(0.5 * h, q);
    let guess = &full + system.apply_int_exp(h, &system.nonlinearity(q));
    let map = |x: &DVector<f64>| {
        let mid = (&half + system.apply_exp(-0.5 * h, x)) * 0.5;
        &full + system.apply_exp(0.5 * h, &system.nonlinearity(&mid)) * h
    };
    fixed_point_solve(map, guess, solver)
}

pub fn exp_midpoint_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let solve = exp_midpoint_solve(system, state.q(), h, solver);
    Ok(outcome(state, h, solve))
}

/// Composition of exponential midpoint substeps with lengths `b_i h`.
pub fn disex_step<S: PoissonSystem + ?Sized>(
    scheme: &DisrkScheme,
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let mut q = state.q().clone();
    let mut iterations = 0;
    let mut residual: f64 = 0.0;
    for (i, &b) in scheme.weights().iter().enumerate() {
        let solve = exp_midpoint_solve(system, &q, b * h, solver);
        iterations += solve.iterations;
        residual = residual.max(solve.residual);
        if !solve.converged {
            let mut out = outcome(state, h, solve);
            out.iterations = iterations;
            out.residual = residual;
            out.failed_substep = Some(i);
            return Ok(out);
        }
        q = solve.solution;
    }
    Ok(StepOutcome {
        state: State::new(q, state.t() + h)?,
        iterations,
        residual,
        converged: true,
        failed_substep: None,
    })
}

pub fn energy_exp_step<S: PoissonSystem + ?Sized>(
    system: &S,
    state: &State,
    h: f64,
    solver: &SolverConfig,
) -> Result<StepOutcome> {
    check_timestep(h)?;
    let q = state.q();
    let full = system.apply_exp(h, q);
    let guess = &full + system.apply_int_exp(h, &system.nonlinearity(q));
    let map = |x: &DVector<f64>| {
        let dg = system.discrete_grad_potential(q, x);
        &full + system.apply_int_exp(h, &system.apply_j(&dg))
    };
    let solve = fixed_point_solve(map, guess, solver);
    Ok(outcome(state, h, solve))
}

/// A method bound to its nonlinear solver.
#[derive(Debug, Clone, PartialEq)]
pub struct Integrator {
    method: Method,
    solver_kind: SolverKind,
    solver: SolverConfig,
    scheme: DisrkScheme,
}

impl Integrator {
    pub fn new(method: Method, solver_kind: SolverKind, solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        if solver_kind == SolverKind::Newton && !method.supports_newton() {
            return Err(Error::Config(format!(
                "newton iteration is only available for midpoint and dg, not {method}"
            )));
        }
        Ok(Self {
            method,
            solver_kind,
            solver,
            scheme: DisrkScheme::disex6(),
        })
    }

    pub fn fixed_point(method: Method, solver: SolverConfig) -> Self {
        Self::new(method, SolverKind::FixedPoint, solver).expect("fixed point works for every method")
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn solver_kind(&self) -> SolverKind {
        self.solver_kind
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn step<S: PoissonSystem + ?Sized>(&self, system: &S, state: &State, h: f64) -> Result<StepOutcome> {
        let cfg = &self.solver;
        match (self.method, self.solver_kind) {
            (Method::Midpoint, SolverKind::Newton) => midpoint_newton_step(system, state, h, cfg),
            (Method::DiscreteGradient, SolverKind::Newton) => discrete_gradient_newton_step(system, state, h, cfg),
            (Method::Midpoint, _) => midpoint_step(system, state, h, cfg),
            (Method::DiscreteGradient, _) => discrete_gradient_step(system, state, h, cfg),
            (Method::ExpEuler, _) => exp_euler_step(system, state, h, cfg),
            (Method::ExpMidpoint, _) => exp_midpoint_step(system, state, h, cfg),
            (Method::Disex6, _) => disex_step(&self.scheme, system, state, h, cfg),
            (Method::EnergyExp, _) => energy_exp_step(system, state, h, cfg),
        }
    }

    /// Takes `steps` steps, stopping at the first unconverged one. Returns
    /// the visited states (initial state included) and whether all steps
    /// converged.
    pub fn integrate<S: PoissonSystem + ?Sized>(
        &self,
        system: &S,
        initial: &State,
        h: f64,
        steps: usize,
    ) -> Result<(Vec<State>, bool)> {
        let mut states = Vec::with_capacity(steps + 1);
        states.push(initial.clone());
        for _ in 0..steps {
            let out = self.step(system, states.last().expect("nonempty"), h)?;
            if !out.converged {
                return Ok((states, false));
            }
            states.push(out.state);
        }
        Ok((states, true))
    }
}
