//! Semilinear Poisson systems `q̇ = J(Dq + ∇V(q))` with constant skew `J`,
//! symmetric `D` and `JD = DJ`.
//!
//! Integrators never see `A = JD` as a matrix; they only use the actions of
//! `S = e^{Ah}` and `T = ∫₀^h e^{Aτ} dτ`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{assemble, expm, expm_integral};

/// Finite-difference step used by the default Hessian/Jacobian fallbacks.
const FD_STEP: f64 = 1e-6;

pub trait PoissonSystem: Send + Sync {
    fn dim(&self) -> usize;

    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64>;

    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64>;

    fn potential(&self, q: &DVector<f64>) -> f64;

    fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64>;

    /// Two-point gradient `∇̄V(q, q')` with
    /// `⟨∇̄V(q, q'), q' - q⟩ = V(q') - V(q)`.
    fn discrete_grad_potential(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DVector<f64>;

    /// `e^{Ah} v`.
    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64>;

    /// `(∫₀^h e^{Aτ} dτ) v`.
    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64>;

    fn hamiltonian(&self, q: &DVector<f64>) -> f64 {
        0.5 * q.dot(&self.apply_d(q)) + self.potential(q)
    }

    /// `A v = J D v`.
    fn apply_generator(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_j(&self.apply_d(v))
    }

    /// `f(q) = J ∇V(q)`.
    fn nonlinearity(&self, q: &DVector<f64>) -> DVector<f64> {
        self.apply_j(&self.grad_potential(q))
    }

    /// `∇²V(q)`; central differences of the gradient unless overridden.
    fn hess_potential(&self, q: &DVector<f64>) -> DMatrix<f64> {
        central_jacobian(q, |x| self.grad_potential(x))
    }

    /// Jacobian of `q' ↦ ∇̄V(q, q')`.
    fn discrete_grad_jacobian(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DMatrix<f64> {
        central_jacobian(q_next, |x| self.discrete_grad_potential(q, x))
    }

    fn dense_j(&self) -> DMatrix<f64> {
        assemble(self.dim(), |e| self.apply_j(e))
    }

    fn dense_d(&self) -> DMatrix<f64> {
        assemble(self.dim(), |e| self.apply_d(e))
    }
}

fn central_jacobian<F>(x: &DVector<f64>, mut f: F) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let dim = x.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let mut probe = x.clone();
    for j in 0..dim {
        let step = FD_STEP * x[j].abs().max(1.0);
        probe[j] = x[j] + step;
        let plus = f(&probe);
        probe[j] = x[j] - step;
        let minus = f(&probe);
        probe[j] = x[j];
        jac.set_column(j, &((plus - minus) / (2.0 * step)));
    }
    jac
}

/// Solution vector at model time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    q: DVector<f64>,
    t: f64,
}

impl State {
    pub fn new(q: DVector<f64>, t: f64) -> Result<Self> {
        if !t.is_finite() || q.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self { q, t })
    }

    pub fn q(&self) -> &DVector<f64> {
        &self.q
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn into_q(self) -> DVector<f64> {
        self.q
    }
}

/// The same system with `V ≡ 0`, leaving only the linear flow `q̇ = Aq`.
#[derive(Debug, Clone)]
pub struct LinearPart<S>(pub S);

impl<S: PoissonSystem> PoissonSystem for LinearPart<S> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        self.0.apply_j(v)
    }
    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        self.0.apply_d(v)
    }
    fn potential(&self, _q: &DVector<f64>) -> f64 {
        0.0
    }
    fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }
    fn discrete_grad_potential(&self, q: &DVector<f64>, _q_next: &DVector<f64>) -> DVector<f64> {
        DVector::zeros(q.len())
    }
    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.0.apply_exp(h, v)
    }
    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.0.apply_int_exp(h, v)
    }
    fn hess_potential(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(q.len(), q.len())
    }
    fn discrete_grad_jacobian(&self, q: &DVector<f64>, _q_next: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::zeros(q.len(), q.len())
    }
    fn dense_j(&self) -> DMatrix<f64> {
        self.0.dense_j()
    }
    fn dense_d(&self) -> DMatrix<f64> {
        self.0.dense_d()
    }
}

/// Separable potentials `V(q) = Σ_i v(q_i)` for the dense test systems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementwisePotential {
    Zero,
    /// `v(x) = c x³ / 6`
    Cubic(f64),
    /// `v(x) = c x⁴ / 4`
    Quartic(f64),
}

impl ElementwisePotential {
    fn value(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic(c) => c * x.powi(3) / 6.0,
            Self::Quartic(c) => c * x.powi(4) / 4.0,
        }
    }

    fn derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic(c) => c * x * x / 2.0,
            Self::Quartic(c) => c * x.powi(3),
        }
    }

    fn second_derivative(&self, x: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic(c) => c * x,
            Self::Quartic(c) => 3.0 * c * x * x,
        }
    }

    /// Exact divided difference `(v(y) - v(x)) / (y - x)` in factored form.
    fn divided_difference(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic(c) => c * (x * x + x * y + y * y) / 6.0,
            Self::Quartic(c) => c * (x.powi(3) + x * x * y + x * y * y + y.powi(3)) / 4.0,
        }
    }

    fn divided_difference_dy(&self, x: f64, y: f64) -> f64 {
        match *self {
            Self::Zero => 0.0,
            Self::Cubic(c) => c * (x + 2.0 * y) / 6.0,
            Self::Quartic(c) => c * (x * x + 2.0 * x * y + 3.0 * y * y) / 4.0,
        }
    }
}

/// Small system with explicit dense `J` and `D`, used as an oracle backend.
#[derive(Debug, Clone)]
pub struct DenseTestSystem {
    j: DMatrix<f64>,
    d: DMatrix<f64>,
    a: DMatrix<f64>,
    potential: ElementwisePotential,
}

impl DenseTestSystem {
    pub const MAX_DIM: usize = 16;

    /// Only shapes are validated; structural properties are what
    /// [`check_structure`] is for.
    pub fn new(j: DMatrix<f64>, d: DMatrix<f64>, potential: ElementwisePotential) -> Result<Self> {
        let dim = j.nrows();
        if !j.is_square() || d.shape() != j.shape() {
            return Err(Error::Shape {
                expected: dim,
                got: d.nrows(),
            });
        }
        if dim == 0 || dim > Self::MAX_DIM {
            return Err(Error::Config(format!(
                "dense test systems are limited to 1..={} dimensions, got {dim}",
                Self::MAX_DIM
            )));
        }
        let a = &j * &d;
        Ok(Self { j, d, a, potential })
    }

    /// `J = [[0, 1], [-1, 0]]`, `D = I`, `V = 0`.
    pub fn harmonic_oscillator() -> Self {
        Self::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]),
            DMatrix::identity(2, 2),
            ElementwisePotential::Zero,
        )
        .expect("valid 2x2 system")
    }

    /// Canonical `J` on `2m` coordinates with a diagonal frequency matrix
    /// `D = diag(ω, ω)`.
    pub fn coupled_oscillators(frequencies: &[f64], potential: ElementwisePotential) -> Result<Self> {
        let m = frequencies.len();
        let mut j = DMatrix::zeros(2 * m, 2 * m);
        let mut d = DMatrix::zeros(2 * m, 2 * m);
        for (i, &w) in frequencies.iter().enumerate() {
            j[(i, m + i)] = 1.0;
            j[(m + i, i)] = -1.0;
            d[(i, i)] = w;
            d[(m + i, m + i)] = w;
        }
        Self::new(j, d, potential)
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn with_potential(&self, potential: ElementwisePotential) -> Self {
        Self {
            potential,
            ..self.clone()
        }
    }
}

impl PoissonSystem for DenseTestSystem {
    fn dim(&self) -> usize {
        self.j.nrows()
    }
    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.j * v
    }
    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.d * v
    }
    fn potential(&self, q: &DVector<f64>) -> f64 {
        q.iter().map(|&x| self.potential.value(x)).sum()
    }
    fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        q.map(|x| self.potential.derivative(x))
    }
    fn discrete_grad_potential(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DVector<f64> {
        q.zip_map(q_next, |x, y| self.potential.divided_difference(x, y))
    }
    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        expm(&(&self.a * h)) * v
    }
    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        expm_integral(&self.a, h) * v
    }
    fn hess_potential(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&q.map(|x| self.potential.second_derivative(x)))
    }
    fn discrete_grad_jacobian(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&q.zip_map(q_next, |x, y| self.potential.divided_difference_dy(x, y)))
    }
    fn dense_j(&self) -> DMatrix<f64> {
        self.j.clone()
    }
    fn dense_d(&self) -> DMatrix<f64> {
        self.d.clone()
    }
}

/// Timesteps at which the exponential identities are probed.
pub const STRUCTURE_TIMESTEPS: [f64; 3] = [0.01, 0.1, 1.0];

/// Largest dimension for which [`check_structure`] also compares `S` and `T`
/// against dense exponentials of the assembled generator.
pub const DENSE_ORACLE_MAX_DIM: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityDeviation {
    pub name: &'static str,
    pub max_deviation: f64,
}

#[derive(Debug, Clone)]
pub struct StructureReport {
    pub seed: u64,
    pub trials: usize,
    pub tolerance: f64,
    pub deviations: Vec<IdentityDeviation>,
}

impl StructureReport {
    pub fn violations(&self) -> Vec<&IdentityDeviation> {
        self.deviations
            .iter()
            .filter(|d| !(d.max_deviation <= self.tolerance))
            .collect()
    }

    pub fn passed(&self) -> bool {
        self.violations().is_empty()
    }

    pub fn deviation(&self, name: &str) -> Option<f64> {
        self.deviations
            .iter()
            .find(|d| d.name == name)
            .map(|d| d.max_deviation)
    }
}

struct Tracker(Vec<IdentityDeviation>);

impl Tracker {
    fn record(&mut self, name: &'static str, value: f64) {
        let value = if value.is_nan() { f64::INFINITY } else { value };
        match self.0.iter_mut().find(|d| d.name == name) {
            Some(d) => d.max_deviation = d.max_deviation.max(value),
            None => self.0.push(IdentityDeviation {
                name,
                max_deviation: value,
            }),
        }
    }
}

fn rel(num: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        num / scale
    } else {
        num
    }
}

/// Randomized check of the structural assumptions and of the `S`/`T`
/// identities the energy-preserving method relies on:
///
/// * `SᵀS = I` and `⟨Sv, Su⟩ = ⟨v, u⟩`
/// * `A T = S - I`
/// * `A Tᵀ = I - Sᵀ`
/// * `Sᵀ T = Tᵀ`
///
/// Transposes are realized as `Sᵀ = S(-h)` and `Tᵀ = -T(-h)`; both
/// realizations are themselves checked through inner products.
pub fn check_structure<S: PoissonSystem + ?Sized>(
    system: &S,
    trials: usize,
    tol: f64,
    seed: u64,
) -> StructureReport {
    let dim = system.dim();
    let trials = trials.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let mut t = Tracker(Vec::new());

    let dense_oracle = (dim <= DENSE_ORACLE_MAX_DIM).then(|| assemble(dim, |e| system.apply_generator(e)));

    for _ in 0..trials {
        let u = draw();
        let v = draw();
        let q = draw();
        let q2 = draw();

        let ju = system.apply_j(&u);
        let jv = system.apply_j(&v);
        t.record(
            "J skew",
            rel((u.dot(&jv) + ju.dot(&v)).abs(), u.norm() * jv.norm() + ju.norm() * v.norm()),
        );

        let du = system.apply_d(&u);
        let dv = system.apply_d(&v);
        t.record(
            "D symmetric",
            rel((u.dot(&dv) - du.dot(&v)).abs(), u.norm() * dv.norm() + du.norm() * v.norm()),
        );

        let jdv = system.apply_j(&dv);
        let djv = system.apply_d(&jv);
        t.record("JD = DJ", rel((&jdv - &djv).norm(), jdv.norm().max(djv.norm())));

        let h_direct = 0.5 * q.dot(&system.apply_d(&q)) + system.potential(&q);
        let h_sys = system.hamiltonian(&q);
        t.record("hamiltonian", rel((h_sys - h_direct).abs(), h_direct.abs().max(1.0)));

        let dg = system.discrete_grad_potential(&q, &q2);
        let dq = &q2 - &q;
        let dv_pot = system.potential(&q2) - system.potential(&q);
        let scale = dg.component_mul(&dq).abs().sum() + system.potential(&q2).abs() + system.potential(&q).abs();
        t.record("discrete gradient condition", rel((dg.dot(&dq) - dv_pot).abs(), scale));

        let dg_swapped = system.discrete_grad_potential(&q2, &q);
        t.record("discrete gradient symmetry", rel((&dg - &dg_swapped).norm(), dg.norm()));

        let diag = system.discrete_grad_potential(&q, &q);
        let grad = system.grad_potential(&q);
        t.record("discrete gradient diagonal", rel((&diag - &grad).norm(), grad.norm().max(1.0)));

        t.record("exp(0) = I", rel((system.apply_exp(0.0, &v) - &v).norm(), v.norm()));
        t.record("int exp(0) = 0", rel(system.apply_int_exp(0.0, &v).norm(), v.norm()));

        for &h in &STRUCTURE_TIMESTEPS {
            let sv = system.apply_exp(h, &v);
            let su = system.apply_exp(h, &u);
            let st_u = system.apply_exp(-h, &u);
            let tv = system.apply_int_exp(h, &v);
            let tt_v = -system.apply_int_exp(-h, &v);
            let tt_u = -system.apply_int_exp(-h, &u);
            let uv = u.norm() * v.norm();

            t.record("S isometry", rel((sv.dot(&su) - v.dot(&u)).abs(), uv));
            t.record("S^T S = I", rel((system.apply_exp(-h, &sv) - &v).norm(), v.norm()));
            t.record("S^T = S(-h)", rel((u.dot(&sv) - st_u.dot(&v)).abs(), uv));
            t.record("T^T = -T(-h)", rel((u.dot(&tv) - tt_u.dot(&v)).abs(), uv * h));
            t.record(
                "A T = S - I",
                rel((system.apply_generator(&tv) - (&sv - &v)).norm(), v.norm()),
            );
            t.record(
                "A T^T = I - S^T",
                rel(
                    (system.apply_generator(&tt_v) - (&v - system.apply_exp(-h, &v))).norm(),
                    v.norm(),
                ),
            );
            t.record(
                "S^T T = T^T",
                rel((system.apply_exp(-h, &tv) - &tt_v).norm(), v.norm()),
            );

            if let Some(a) = &dense_oracle {
                let s_dense = expm(&(a * h)) * &v;
                t.record("S vs dense expm", rel((&sv - s_dense).norm(), v.norm()));
                let t_dense = expm_integral(a, h) * &v;
                t.record("T vs dense integral", rel((&tv - t_dense).norm(), v.norm()));
            }
        }
    }

    StructureReport {
        seed,
        trials,
        tolerance: tol,
        deviations: t.0,
    }
}
