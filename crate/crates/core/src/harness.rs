//! Experiment orchestration behind the CLI: configuration, trajectory runs,
//! timestep sweeps, verification suites and plot-script generation.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::integrators::{DisrkScheme, Integrator, Method, SolverKind};
use crate::models::{Model, ModelKind, DEFAULT_KDV_DISPERSION};
use crate::psystem::{check_structure, DenseTestSystem, ElementwisePotential, LinearPart, PoissonSystem, State};
use crate::solvers::SolverConfig;
use crate::verify;

pub const NLS_MAX_NODES: usize = 401;
pub const KDV_MAX_NODES: usize = 1401;
/// Newton assembles dense Jacobians; larger systems are refused.
pub const NEWTON_MAX_DIM: usize = 2 * 401;
/// Fine-step ratio of the reference run behind `traj_error`.
pub const REFERENCE_REFINEMENT: usize = 100;

pub const TRAJECTORY_HEADER: &str = "step,t,energy_error,traj_error,iterations,residual";
pub const SWEEP_HEADER: &str = "method,solver,N,h,converged,max_iterations_observed";
pub const SUMMARY_HEADER: &str = "method,solver,N,h_max";

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{raw}`", lineno + 1)))?;
        out.push((k.trim().to_ascii_lowercase(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("invalid value `{value}` for `{key}`"))),
    }
}

fn check_nodes(model: ModelKind, nodes: usize) -> Result<()> {
    let cap = match model {
        ModelKind::Nls => NLS_MAX_NODES,
        ModelKind::Kdv => KDV_MAX_NODES,
    };
    if nodes < 3 || nodes % 2 == 0 || nodes > cap {
        return Err(Error::Config(format!(
            "{model} needs an odd node count in 3..={cap}, got {nodes}"
        )));
    }
    Ok(())
}

fn model_dim(model: ModelKind, nodes: usize) -> usize {
    match model {
        ModelKind::Nls => 2 * nodes,
        ModelKind::Kdv => nodes,
    }
}

fn check_newton(model: ModelKind, nodes: usize, method: Method, solver: SolverKind) -> Result<()> {
    if solver == SolverKind::Newton {
        if !method.supports_newton() {
            return Err(Error::Config(format!(
                "newton iteration is only available for midpoint and dg, not {method}"
            )));
        }
        let dim = model_dim(model, nodes);
        if dim > NEWTON_MAX_DIM {
            return Err(Error::Config(format!(
                "newton needs a dense {dim}x{dim} jacobian; limit is {NEWTON_MAX_DIM}"
            )));
        }
    }
    Ok(())
}

/// The model, optionally with its potential switched off.
pub enum System {
    Full(Model),
    Linear(LinearPart<Model>),
}

impl System {
    pub fn build(model: ModelKind, nodes: usize, nu: f64, linear: bool) -> Result<Self> {
        let m = Model::build(model, nodes, nu)?;
        Ok(if linear { Self::Linear(LinearPart(m)) } else { Self::Full(m) })
    }

    pub fn model(&self) -> &Model {
        match self {
            Self::Full(m) => m,
            Self::Linear(l) => &l.0,
        }
    }

    pub fn as_dyn(&self) -> &dyn PoissonSystem {
        match self {
            Self::Full(m) => m,
            Self::Linear(l) => l,
        }
    }

    pub fn initial_state(&self) -> State {
        self.model().initial_state()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: ModelKind,
    pub nodes: usize,
    pub nu: f64,
    pub method: Method,
    pub solver: SolverKind,
    pub h: f64,
    pub steps: usize,
    pub tolerance: f64,
    pub output: PathBuf,
    pub seed: u64,
    /// Drop the potential (`V ≡ 0`).
    pub linear: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Nls,
            nodes: 41,
            nu: DEFAULT_KDV_DISPERSION,
            method: Method::ExpMidpoint,
            solver: SolverKind::FixedPoint,
            h: 0.01,
            steps: 1000,
            tolerance: 1e-12,
            output: PathBuf::from("trajectory.csv"),
            seed: 0,
            linear: false,
        }
    }
}

impl ExperimentConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "nodes" | "n" => self.nodes = parse(key, value)?,
            "nu" => self.nu = parse(key, value)?,
            "method" => self.method = value.parse()?,
            "solver" => self.solver = value.parse()?,
            "h" | "timestep" => self.h = parse(key, value)?,
            "steps" => self.steps = parse(key, value)?,
            "tol" | "tolerance" => self.tolerance = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "seed" => self.seed = parse(key, value)?,
            "linear" => self.linear = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        check_nodes(self.model, self.nodes)?;
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::Config(format!("h must be positive, got {}", self.h)));
        }
        if self.steps == 0 {
            return Err(Error::Config("steps must be positive".into()));
        }
        self.solver_config().validate()?;
        check_newton(self.model, self.nodes, self.method, self.solver)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig::with_tolerance(self.tolerance)
    }

    pub fn integrator(&self) -> Result<Integrator> {
        Integrator::new(self.method, self.solver, self.solver_config())
    }

    pub fn system(&self) -> Result<System> {
        System::build(self.model, self.nodes, self.nu, self.linear)
    }
}

pub fn timestamp_line() -> String {
    let secs = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    format!("# geomexp {} unix={secs}", env!("CARGO_PKG_VERSION"))
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrateSummary {
    pub steps_completed: usize,
    /// 1-based index of the step whose solve failed.
    pub failed_step: Option<usize>,
    pub max_energy_error: f64,
    pub final_energy_error: f64,
    pub max_traj_error: Option<f64>,
}

/// Integrates and streams one CSV row per state (flushed per row). The
/// energy error is `|H(q_k) − H(q₀)| / max(1, |H(q₀)|)`; `traj_error` is the
/// relative L² distance to an exp_midpoint run at `h / 100`.
pub fn run_integrate<W: Write>(config: &ExperimentConfig, reference: bool, out: &mut W) -> Result<IntegrateSummary> {
    config.validate()?;
    let system = config.system()?;
    let sys = system.as_dyn();
    let integrator = config.integrator()?;
    let ref_integrator = Integrator::fixed_point(Method::ExpMidpoint, config.solver_config());
    let h_ref = config.h / REFERENCE_REFINEMENT as f64;

    let mut state = system.initial_state();
    let mut ref_state = state.clone();
    let h0 = sys.hamiltonian(state.q());
    let scale = h0.abs().max(1.0);

    writeln!(out, "{}", timestamp_line())?;
    let header = if reference {
        TRAJECTORY_HEADER.to_string()
    } else {
        TRAJECTORY_HEADER.replace(",traj_error", "")
    };
    writeln!(out, "{header}")?;
    let write_row = |out: &mut W, k: usize, t: f64, e: f64, traj: Option<f64>, it: usize, res: f64| -> Result<()> {
        let mut row = format!("{k},{},{}", fmt_f64(t), fmt_f64(e));
        if let Some(tr) = traj {
            write!(row, ",{}", fmt_f64(tr)).expect("string write");
        }
        write!(row, ",{it},{}", fmt_f64(res)).expect("string write");
        writeln!(out, "{row}")?;
        out.flush()?;
        Ok(())
    };
    write_row(out, 0, state.t(), 0.0, reference.then_some(0.0), 0, 0.0)?;

    let mut summary = IntegrateSummary {
        steps_completed: 0,
        failed_step: None,
        max_energy_error: 0.0,
        final_energy_error: 0.0,
        max_traj_error: reference.then_some(0.0),
    };
    for k in 1..=config.steps {
        let step = integrator.step(sys, &state, config.h);
        let outcome = match step {
            Ok(o) if o.converged => o,
            Ok(o) => {
                writeln!(
                    out,
                    "# step {k} failed: solver residual {} after {} iterations",
                    fmt_f64(o.residual),
                    o.iterations
                )?;
                out.flush()?;
                summary.failed_step = Some(k);
                return Ok(summary);
            }
            Err(e) => {
                writeln!(out, "# step {k} failed: {e}")?;
                out.flush()?;
                summary.failed_step = Some(k);
                return Ok(summary);
            }
        };
        state = outcome.state;
        let traj = if reference {
            for _ in 0..REFERENCE_REFINEMENT {
                let r = ref_integrator.step(sys, &ref_state, h_ref)?;
                if !r.converged {
                    return Err(Error::Probe(format!("reference run failed near t = {}", ref_state.t())));
                }
                ref_state = r.state;
            }
            let e = verify::relative_l2(state.q(), ref_state.q());
            summary.max_traj_error = summary.max_traj_error.map(|m| m.max(e));
            Some(e)
        } else {
            None
        };
        let energy = (sys.hamiltonian(state.q()) - h0).abs() / scale;
        summary.max_energy_error = summary.max_energy_error.max(energy);
        summary.final_energy_error = energy;
        summary.steps_completed = k;
        // t as k h avoids accumulated rounding in the time column
        write_row(out, k, k as f64 * config.h, energy, traj, outcome.iterations, outcome.residual)?;
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub model: ModelKind,
    pub nodes: Vec<usize>,
    pub nu: f64,
    pub runs: Vec<(Method, SolverKind)>,
    /// Defaults to 1e-4 (NLS) or 1e-5 (KdV).
    pub h_min: Option<f64>,
    pub h_max: f64,
    pub horizon: verify::SweepHorizon,
    pub tolerance: f64,
    pub output: PathBuf,
    /// Defaults to `<output stem>_summary.csv`.
    pub summary: Option<PathBuf>,
    pub linear: bool,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::Nls,
            nodes: vec![11, 21, 41, 81],
            nu: DEFAULT_KDV_DISPERSION,
            runs: vec![
                (Method::Midpoint, SolverKind::FixedPoint),
                (Method::Midpoint, SolverKind::Newton),
                (Method::ExpMidpoint, SolverKind::FixedPoint),
                (Method::DiscreteGradient, SolverKind::FixedPoint),
                (Method::EnergyExp, SolverKind::FixedPoint),
            ],
            h_min: None,
            h_max: 0.1,
            horizon: verify::SweepHorizon::default(),
            tolerance: verify::SWEEP_TOLERANCE,
            output: PathBuf::from("sweep.csv"),
            summary: None,
            linear: false,
            seed: 0,
        }
    }
}

/// `method[:solver]`, comma separated.
pub fn parse_runs(value: &str) -> Result<Vec<(Method, SolverKind)>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|item| match item.split_once(':') {
            Some((m, s)) => Ok((m.parse()?, s.parse()?)),
            None => Ok((item.parse()?, SolverKind::FixedPoint)),
        })
        .collect()
}

impl SweepConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "model" => self.model = value.parse()?,
            "nodes" | "n" => {
                self.nodes = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| parse(key, s))
                    .collect::<Result<_>>()?
            }
            "nu" => self.nu = parse(key, value)?,
            "methods" | "method" => self.runs = parse_runs(value)?,
            "h_min" => self.h_min = Some(parse(key, value)?),
            "h_max" => self.h_max = parse(key, value)?,
            "horizon" | "steps" => self.horizon.min_steps = parse(key, value)?,
            "horizon_time" => self.horizon.time = parse(key, value)?,
            "tol" | "tolerance" => self.tolerance = parse(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "summary" => self.summary = Some(PathBuf::from(value)),
            "linear" => self.linear = parse_bool(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (k, v) in parse_key_values(text)? {
            self.set(&k, &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() || self.runs.is_empty() {
            return Err(Error::Config("sweep needs at least one node count and one method".into()));
        }
        for &n in &self.nodes {
            check_nodes(self.model, n)?;
            for &(m, s) in &self.runs {
                check_newton(self.model, n, m, s)?;
            }
        }
        if !(self.nu > 0.0) {
            return Err(Error::Config(format!("nu must be positive, got {}", self.nu)));
        }
        if self.grid().is_empty() {
            return Err(Error::Config(format!("empty timestep grid [{}, {}]", self.lower_h(), self.h_max)));
        }
        self.horizon.validate()?;
        SolverConfig::with_tolerance(self.tolerance).validate()
    }

    pub fn lower_h(&self) -> f64 {
        self.h_min.unwrap_or(match self.model {
            ModelKind::Nls => 1e-4,
            ModelKind::Kdv => 1e-5,
        })
    }

    pub fn grid(&self) -> Vec<f64> {
        verify::timestep_grid(self.lower_h(), self.h_max)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.summary.clone().unwrap_or_else(|| {
            let stem = self.output.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
            self.output.with_file_name(format!("{stem}_summary.csv"))
        })
    }
}

/// Runs every `(method, solver, N)` sweep in configuration order and writes
/// the per-point rows and the `h_max` summary.
pub fn run_sweep<W1: Write, W2: Write>(
    config: &SweepConfig,
    rows: &mut W1,
    summary: &mut W2,
) -> Result<Vec<verify::SweepResult>> {
    config.validate()?;
    let grid = config.grid();
    let stamp = timestamp_line();
    writeln!(rows, "{stamp}\n{SWEEP_HEADER}")?;
    writeln!(summary, "{stamp}\n{SUMMARY_HEADER}")?;
    let mut results = Vec::new();
    for &(method, solver) in &config.runs {
        let integrator = Integrator::new(method, solver, SolverConfig::with_tolerance(config.tolerance))?;
        for &n in &config.nodes {
            let system = System::build(config.model, n, config.nu, config.linear)?;
            let r = verify::sweep_max_timestep(
                &integrator,
                system.as_dyn(),
                n,
                &system.initial_state(),
                &grid,
                &config.horizon,
            )?;
            for p in &r.points {
                writeln!(
                    rows,
                    "{method},{solver},{n},{},{},{}",
                    fmt_f64(p.h),
                    p.converged,
                    p.max_iterations
                )?;
            }
            rows.flush()?;
            let h_max = r.h_max.map(fmt_f64).unwrap_or_default();
            writeln!(summary, "{method},{solver},{n},{h_max}")?;
            summary.flush()?;
            results.push(r);
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Structure,
    Order,
    Poisson,
    Composition,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "structure" => Ok(Self::Structure),
            "order" => Ok(Self::Order),
            "poisson" => Ok(Self::Poisson),
            "composition" => Ok(Self::Composition),
            other => Err(Error::Config(format!(
                "unknown suite `{other}` (expected structure|order|poisson|composition)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Human-readable acceptance rule, e.g. `<= 1e-10`.
    pub rule: String,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            rule: format!("<= {bound:e}"),
            passed: value <= bound,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            value,
            rule: format!(">= {bound:e}"),
            passed: value >= bound,
        }
    }

    pub fn within(name: impl Into<String>, value: f64, target: f64, tol: f64) -> Self {
        Self {
            name: name.into(),
            value,
            rule: format!("= {target} +- {tol}"),
            passed: (value - target).abs() <= tol,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {:e} ({})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.rule
        )
    }
}

pub const STRUCTURE_TOL: f64 = 1e-10;
pub const POISSON_BOUND: f64 = 1e-6;
pub const POISSON_CONTROL_BOUND: f64 = 1e-4;
pub const COMPOSITION_BOUND: f64 = 1e-10;

pub fn structure_suite(seed: u64) -> Result<Vec<Check>> {
    let nls = Model::build(ModelKind::Nls, 11, DEFAULT_KDV_DISPERSION)?;
    let kdv = Model::build(ModelKind::Kdv, 31, DEFAULT_KDV_DISPERSION)?;
    let dense = DenseTestSystem::coupled_oscillators(&[1.0, 2.0, 5.0], ElementwisePotential::Quartic(1.0))?;
    let systems: [(&str, &dyn PoissonSystem); 4] = [
        ("oscillator", &DenseTestSystem::harmonic_oscillator()),
        ("coupled", &dense),
        ("nls N=11", &nls),
        ("kdv N=31", &kdv),
    ];
    let mut checks = Vec::new();
    for (label, sys) in systems {
        let report = check_structure(sys, 10, STRUCTURE_TOL, seed);
        for d in &report.deviations {
            checks.push(Check::at_most(format!("{label}: {}", d.name), d.max_deviation, STRUCTURE_TOL));
        }
    }
    Ok(checks)
}

/// Timesteps and reference method used for the order study of `method` on
/// NLS with 21 nodes over `[0, 1]`.
pub fn order_study_plan(method: Method) -> (Vec<f64>, Method) {
    match method {
        // the exp_midpoint reference error (~1e-9) would mask a higher order
        Method::Disex6 => (vec![0.1, 0.05, 0.025, 0.0125], Method::Disex6),
        _ => (vec![0.01, 0.005, 0.0025, 0.00125], Method::ExpMidpoint),
    }
}

pub const ORDER_NODES: usize = 21;
pub const ORDER_HORIZON: f64 = 1.0;

pub fn expected_order(method: Method) -> (f64, Option<f64>) {
    match method {
        Method::ExpEuler => (1.0, Some(0.1)),
        Method::Disex6 => (2.0, None),
        _ => (2.0, Some(0.1)),
    }
}

pub fn order_suite() -> Result<Vec<Check>> {
    let sys = Model::build(ModelKind::Nls, ORDER_NODES, DEFAULT_KDV_DISPERSION)?;
    let initial = sys.initial_state();
    let mut checks = Vec::new();
    for method in Method::ALL {
        let integrator = Integrator::fixed_point(method, SolverConfig::with_tolerance(1e-13));
        let (hs, reference) = order_study_plan(method);
        let est = verify::estimate_order(&integrator, &sys, &initial, ORDER_HORIZON, &hs, reference)?;
        let name = format!("order {method}");
        checks.push(match expected_order(method) {
            (target, Some(tol)) => Check::within(name, est.slope, target, tol),
            (floor, None) => Check::at_least(name, est.slope, floor),
        });
    }
    Ok(checks)
}

pub fn poisson_suite() -> Result<Vec<Check>> {
    let sys = Model::build(ModelKind::Nls, 11, DEFAULT_KDV_DISPERSION)?;
    let q = sys.initial_state().into_q();
    let j = sys.dense_j();
    let cfg = SolverConfig::with_tolerance(1e-13);
    let mut checks = Vec::new();
    for method in [Method::ExpMidpoint, Method::Midpoint, Method::Disex6, Method::ExpEuler] {
        let integrator = Integrator::fixed_point(method, cfg);
        let dev = verify::poisson_check(verify::step_map(&integrator, &sys, 0.01), &j, &q, 1e-6)?;
        let name = format!("poisson {method}");
        checks.push(if method == Method::ExpEuler {
            Check::at_least(format!("{name} (negative control)"), dev, POISSON_CONTROL_BOUND)
        } else {
            Check::at_most(name, dev, POISSON_BOUND)
        });
    }
    Ok(checks)
}

pub fn composition_suite() -> Result<Vec<Check>> {
    let scheme = DisrkScheme::disex6();
    let sum: f64 = scheme.weights().iter().sum();
    let sys = Model::build(ModelKind::Nls, 11, DEFAULT_KDV_DISPERSION)?;
    let initial = sys.initial_state();
    let cfg = SolverConfig::with_tolerance(1e-13);
    let h = 0.01;
    let composed = crate::integrators::disex_step(&scheme, &sys, &initial, h, &cfg)?;
    let tableau = verify::disex_tableau_step(&scheme, &sys, initial.q(), h, &cfg)?;
    let diff: DVector<f64> = composed.state.q() - tableau;
    Ok(vec![
        Check::at_most("disex6 weight sum - 1", (sum - 1.0).abs(), 1e-8),
        Check::at_most("disex6 composition vs tableau", diff.amax(), COMPOSITION_BOUND),
    ])
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    match suite {
        Suite::Structure => structure_suite(seed),
        Suite::Order => order_suite(),
        Suite::Poisson => poisson_suite(),
        Suite::Composition => composition_suite(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CsvKind {
    Trajectory { traj_error: bool },
    Sweep,
    Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub path: PathBuf,
    pub kind: CsvKind,
    pub rows: Vec<Vec<String>>,
}

/// Reads one of the harness CSVs and identifies its schema from the header.
pub fn read_csv(path: &Path) -> Result<CsvTable> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{}: empty CSV", path.display())))?;
    let kind = match header.trim() {
        SWEEP_HEADER => CsvKind::Sweep,
        SUMMARY_HEADER => CsvKind::Summary,
        TRAJECTORY_HEADER => CsvKind::Trajectory { traj_error: true },
        h if h == TRAJECTORY_HEADER.replace(",traj_error", "") => CsvKind::Trajectory { traj_error: false },
        other => return Err(Error::Config(format!("{}: unrecognized header `{other}`", path.display()))),
    };
    let width = header.split(',').count();
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    if rows.is_empty() {
        return Err(Error::Config(format!("{}: no data rows", path.display())));
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != width) {
        return Err(Error::Config(format!("{}: row {} has the wrong width", path.display(), bad + 1)));
    }
    Ok(CsvTable {
        path: path.to_path_buf(),
        kind,
        rows,
    })
}

fn py_str(s: &str) -> String {
    format!("{s:?}")
}

/// A standalone matplotlib script plotting `h_max` against `N` (log-log, one
/// series per method/solver) and error-versus-time panels for trajectories.
pub fn plot_script(csv_paths: &[PathBuf]) -> Result<String> {
    if csv_paths.is_empty() {
        return Err(Error::Config("plot-script needs at least one CSV".into()));
    }
    let tables: Vec<CsvTable> = csv_paths.iter().map(|p| read_csv(p)).collect::<Result<_>>()?;
    let mut s = String::new();
    s.push_str(
        r##"#!/usr/bin/env python3
"""Plots for geomexp sweep and trajectory CSVs. Run: python3 <this file>"""
import csv
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(line for line in fh if not line.startswith("#")))


def h_max_by_resolution(rows, series, from_summary):
    out = {}
    if from_summary:
        for r in rows:
            if f"{r['method']}/{r['solver']}" == series and r["h_max"]:
                out[int(r["N"])] = float(r["h_max"])
        return out
    grouped = {}
    for r in rows:
        if f"{r['method']}/{r['solver']}" == series:
            grouped.setdefault(int(r["N"]), []).append((float(r["h"]), r["converged"] == "true"))
    for n, pts in grouped.items():
        best = None
        for h, ok in sorted(pts):
            if not ok:
                break
            best = h
        if best is not None:
            out[n] = best
    return out


def plot_sweep(path, series, from_summary):
    rows = read_rows(path)
    fig, ax = plt.subplots()
    for name in series:
        data = sorted(h_max_by_resolution(rows, name, from_summary).items())
        if data:
            ax.loglog([n for n, _ in data], [h for _, h in data], "o-", label=name)
    ax.set_xlabel("N")
    ax.set_ylabel("h_max")
    ax.legend()
    fig.savefig(os.path.splitext(path)[0] + "_hmax.png", dpi=150)


def plot_trajectory(path, traj_panel):
    rows = read_rows(path)
    t = [float(r["t"]) for r in rows]
    panels = ["energy_error"] + (["traj_error"] if traj_panel else [])
    fig, axes = plt.subplots(len(panels), 1, squeeze=False)
    for ax, col in zip(axes[:, 0], panels):
        ax.semilogy(t[1:], [max(float(r[col]), 1e-300) for r in rows[1:]])
        ax.set_xlabel("t")
        ax.set_ylabel(col)
    fig.tight_layout()
    fig.savefig(os.path.splitext(path)[0] + "_errors.png", dpi=150)


"##,
    );
    for t in &tables {
        let path = fs::canonicalize(&t.path).unwrap_or_else(|_| t.path.clone());
        let path = py_str(&path.display().to_string());
        match t.kind {
            CsvKind::Sweep | CsvKind::Summary => {
                let series: BTreeSet<String> = t.rows.iter().map(|r| format!("{}/{}", r[0], r[1])).collect();
                let list = series.iter().map(|x| py_str(x)).collect::<Vec<_>>().join(", ");
                let from_summary = if t.kind == CsvKind::Summary { "True" } else { "False" };
                writeln!(s, "plot_sweep({path}, [{list}], {from_summary})").expect("string write");
            }
            CsvKind::Trajectory { traj_error } => {
                let flag = if traj_error { "True" } else { "False" };
                writeln!(s, "plot_trajectory({path}, {flag})").expect("string write");
            }
        }
    }
    Ok(s)
}
