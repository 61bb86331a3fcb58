//! Pseudospectral semi-discretizations of the cubic nonlinear Schrödinger
//! and KdV equations on `[0, 2π)`, written as semilinear Poisson systems.
//!
//! NLS, `iψ_t + ψ_xx - 2|ψ|²ψ = 0`, with state `z = (q | p)`, `ψ = q + ip`:
//!
//! ```text
//! J = [[0, I], [-I, 0]],  D = diag(-D₂, -D₂),  V = ½ Σ (q² + p²)²
//! ```
//!
//! KdV, `u_t + u u_x + ν u_xxx = 0`:
//!
//! ```text
//! J = -D₁,  D = ν D₂,  A = -ν D₃,  V = Σ q³ / 6
//! ```
//!
//! Hamiltonians are plain nodal sums, without a `Δx` quadrature weight.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::psystem::{PoissonSystem, State};
use crate::spectral::{phi1, SpectralGrid};

pub const DEFAULT_KDV_DISPERSION: f64 = 5e-4;

#[derive(Debug, Clone)]
pub struct NlsSystem {
    grid: SpectralGrid,
}

impl NlsSystem {
    pub fn new(grid: SpectralGrid) -> Self {
        Self { grid }
    }

    pub fn with_nodes(nodes: usize) -> Result<Self> {
        Ok(Self::new(SpectralGrid::new(nodes)?))
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    fn split<'a>(&self, z: &'a DVector<f64>) -> (&'a [f64], &'a [f64]) {
        z.as_slice().split_at(self.grid.len())
    }

    /// Applies a Fourier multiplier to `ψ = q + ip`. The multipliers used
    /// here are even in `k`, so real and imaginary parts stay decoupled
    /// exactly when the multiplier is real.
    fn apply_packed<F>(&self, z: &DVector<f64>, factor: F) -> DVector<f64>
    where
        F: Fn(i64) -> Complex64,
    {
        let len = self.grid.len();
        assert_eq!(z.len(), 2 * len, "NLS state has length 2N");
        let (q, p) = self.split(z);
        let mut psi: Vec<Complex64> = q.iter().zip(p).map(|(&a, &b)| Complex64::new(a, b)).collect();
        self.grid
            .apply_multiplier(&mut psi, factor)
            .expect("length checked above");
        let mut out = DVector::zeros(2 * len);
        for (j, c) in psi.iter().enumerate() {
            out[j] = c.re;
            out[len + j] = c.im;
        }
        out
    }

    /// `e^{Ah} z`: per mode, `q̂' = cos(k²h) q̂ + sin(k²h) p̂`,
    /// `p̂' = cos(k²h) p̂ - sin(k²h) q̂`, i.e. `ψ̂' = e^{-ik²h} ψ̂`.
    pub fn exp_action(&self, h: f64, z: &DVector<f64>) -> DVector<f64> {
        self.apply_packed(z, |k| Complex64::from_polar(1.0, -((k * k) as f64) * h))
    }

    /// `(∫₀^h e^{Aτ} dτ) z`, i.e. `ψ̂' = h φ₁(-ik²h) ψ̂`; the `k = 0` mode
    /// reduces to `h`.
    pub fn int_exp_action(&self, h: f64, z: &DVector<f64>) -> DVector<f64> {
        self.apply_packed(z, |k| h * phi1(Complex64::new(0.0, -((k * k) as f64) * h)))
    }

    /// Average-based two-point gradient
    /// `(2(q̄² + p̄²) q̄, 2(q̄² + p̄²) p̄)` with `q̄ = (q + q')/2` and
    /// `q̄² = (q² + q'²)/2`.
    pub fn discrete_grad(&self, z: &DVector<f64>, z_next: &DVector<f64>) -> DVector<f64> {
        let len = self.grid.len();
        let (q0, p0) = self.split(z);
        let (q1, p1) = self.split(z_next);
        let mut out = DVector::zeros(2 * len);
        for j in 0..len {
            let s = 0.5 * (q0[j] * q0[j] + q1[j] * q1[j]) + 0.5 * (p0[j] * p0[j] + p1[j] * p1[j]);
            out[j] = 2.0 * s * 0.5 * (q0[j] + q1[j]);
            out[len + j] = 2.0 * s * 0.5 * (p0[j] + p1[j]);
        }
        out
    }
}

impl PoissonSystem for NlsSystem {
    fn dim(&self) -> usize {
        2 * self.grid.len()
    }

    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        let len = self.grid.len();
        let (q, p) = self.split(v);
        let mut out = DVector::zeros(2 * len);
        out.rows_mut(0, len).copy_from_slice(p);
        for j in 0..len {
            out[len + j] = -q[j];
        }
        out
    }

    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        // -D₂ has symbol k²
        self.apply_packed(v, |k| Complex64::new((k * k) as f64, 0.0))
    }

    fn potential(&self, z: &DVector<f64>) -> f64 {
        let (q, p) = self.split(z);
        0.5 * q
            .iter()
            .zip(p)
            .map(|(a, b)| (a * a + b * b).powi(2))
            .sum::<f64>()
    }

    fn grad_potential(&self, z: &DVector<f64>) -> DVector<f64> {
        let len = self.grid.len();
        let (q, p) = self.split(z);
        let mut out = DVector::zeros(2 * len);
        for j in 0..len {
            let r = 2.0 * (q[j] * q[j] + p[j] * p[j]);
            out[j] = r * q[j];
            out[len + j] = r * p[j];
        }
        out
    }

    fn discrete_grad_potential(&self, z: &DVector<f64>, z_next: &DVector<f64>) -> DVector<f64> {
        self.discrete_grad(z, z_next)
    }

    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.exp_action(h, v)
    }

    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.int_exp_action(h, v)
    }

    fn hess_potential(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let len = self.grid.len();
        let (q, p) = self.split(z);
        let mut m = DMatrix::zeros(2 * len, 2 * len);
        for j in 0..len {
            let (a, b) = (q[j], p[j]);
            m[(j, j)] = 2.0 * (3.0 * a * a + b * b);
            m[(len + j, len + j)] = 2.0 * (a * a + 3.0 * b * b);
            m[(j, len + j)] = 4.0 * a * b;
            m[(len + j, j)] = 4.0 * a * b;
        }
        m
    }

    fn discrete_grad_jacobian(&self, z: &DVector<f64>, z_next: &DVector<f64>) -> DMatrix<f64> {
        let len = self.grid.len();
        let (q0, p0) = self.split(z);
        let (q1, p1) = self.split(z_next);
        let mut m = DMatrix::zeros(2 * len, 2 * len);
        for j in 0..len {
            let s = 0.5 * (q0[j] * q0[j] + q1[j] * q1[j] + p0[j] * p0[j] + p1[j] * p1[j]);
            let qm = 0.5 * (q0[j] + q1[j]);
            let pm = 0.5 * (p0[j] + p1[j]);
            m[(j, j)] = 2.0 * q1[j] * qm + s;
            m[(j, len + j)] = 2.0 * p1[j] * qm;
            m[(len + j, j)] = 2.0 * q1[j] * pm;
            m[(len + j, len + j)] = 2.0 * p1[j] * pm + s;
        }
        m
    }
}

#[derive(Debug, Clone)]
pub struct KdvSystem {
    grid: SpectralGrid,
    nu: f64,
}

impl KdvSystem {
    pub fn new(grid: SpectralGrid, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::Config(format!("dispersion must be positive, got {nu}")));
        }
        Ok(Self { grid, nu })
    }

    pub fn with_nodes(nodes: usize, nu: f64) -> Result<Self> {
        Self::new(SpectralGrid::new(nodes)?, nu)
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn dispersion(&self) -> f64 {
        self.nu
    }

    fn apply_real<F>(&self, v: &DVector<f64>, factor: F) -> DVector<f64>
    where
        F: Fn(i64) -> Complex64,
    {
        assert_eq!(v.len(), self.grid.len(), "KdV state has length N");
        let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.grid
            .apply_multiplier(&mut data, factor)
            .expect("length checked above");
        DVector::from_iterator(data.len(), data.iter().map(|c| c.re))
    }

    fn cubic(&self, k: i64) -> f64 {
        self.nu * (k * k * k) as f64
    }

    /// `e^{Ah} q` with per-mode factor `e^{iνk³h}`.
    pub fn exp_action(&self, h: f64, q: &DVector<f64>) -> DVector<f64> {
        self.apply_real(q, |k| Complex64::from_polar(1.0, self.cubic(k) * h))
    }

    /// `(∫₀^h e^{Aτ} dτ) q` with per-mode factor `h φ₁(iνk³h)`.
    pub fn int_exp_action(&self, h: f64, q: &DVector<f64>) -> DVector<f64> {
        self.apply_real(q, |k| h * phi1(Complex64::new(0.0, self.cubic(k) * h)))
    }

    /// `(q² + q q' + q'²) / 6`, elementwise.
    pub fn discrete_grad(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DVector<f64> {
        q.zip_map(q_next, |a, b| (a * a + a * b + b * b) / 6.0)
    }
}

impl PoissonSystem for KdvSystem {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        // -D₁ has symbol -ik
        self.apply_real(v, |k| Complex64::new(0.0, -(k as f64)))
    }

    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_real(v, |k| Complex64::new(-self.nu * (k * k) as f64, 0.0))
    }

    fn apply_generator(&self, v: &DVector<f64>) -> DVector<f64> {
        self.apply_real(v, |k| Complex64::new(0.0, self.cubic(k)))
    }

    fn potential(&self, q: &DVector<f64>) -> f64 {
        q.iter().map(|x| x.powi(3)).sum::<f64>() / 6.0
    }

    fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        q.map(|x| 0.5 * x * x)
    }

    fn discrete_grad_potential(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DVector<f64> {
        self.discrete_grad(q, q_next)
    }

    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.exp_action(h, v)
    }

    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.int_exp_action(h, v)
    }

    fn hess_potential(&self, q: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(q)
    }

    fn discrete_grad_jacobian(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&q.zip_map(q_next, |a, b| (a + 2.0 * b) / 6.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Nls,
    Kdv,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Nls => "nls",
            Self::Kdv => "kdv",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nls" => Ok(Self::Nls),
            "kdv" => Ok(Self::Kdv),
            other => Err(Error::Config(format!("unknown model `{other}` (expected nls|kdv)"))),
        }
    }
}

/// Either pseudospectral model behind one type.
#[derive(Debug, Clone)]
pub enum Model {
    Nls(NlsSystem),
    Kdv(KdvSystem),
}

impl Model {
    pub fn build(kind: ModelKind, nodes: usize, nu: f64) -> Result<Self> {
        Ok(match kind {
            ModelKind::Nls => Self::Nls(NlsSystem::with_nodes(nodes)?),
            ModelKind::Kdv => Self::Kdv(KdvSystem::with_nodes(nodes, nu)?),
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Nls(_) => ModelKind::Nls,
            Self::Kdv(_) => ModelKind::Kdv,
        }
    }

    pub fn grid(&self) -> &SpectralGrid {
        match self {
            Self::Nls(m) => m.grid(),
            Self::Kdv(m) => m.grid(),
        }
    }

    pub fn initial_state(&self) -> State {
        standard_initial_condition(self.kind(), self.grid())
    }

    fn inner(&self) -> &dyn PoissonSystem {
        match self {
            Self::Nls(m) => m,
            Self::Kdv(m) => m,
        }
    }
}

impl PoissonSystem for Model {
    fn dim(&self) -> usize {
        self.inner().dim()
    }
    fn apply_j(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner().apply_j(v)
    }
    fn apply_d(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner().apply_d(v)
    }
    fn apply_generator(&self, v: &DVector<f64>) -> DVector<f64> {
        self.inner().apply_generator(v)
    }
    fn potential(&self, q: &DVector<f64>) -> f64 {
        self.inner().potential(q)
    }
    fn grad_potential(&self, q: &DVector<f64>) -> DVector<f64> {
        self.inner().grad_potential(q)
    }
    fn discrete_grad_potential(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DVector<f64> {
        self.inner().discrete_grad_potential(q, q_next)
    }
    fn apply_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.inner().apply_exp(h, v)
    }
    fn apply_int_exp(&self, h: f64, v: &DVector<f64>) -> DVector<f64> {
        self.inner().apply_int_exp(h, v)
    }
    fn hess_potential(&self, q: &DVector<f64>) -> DMatrix<f64> {
        self.inner().hess_potential(q)
    }
    fn discrete_grad_jacobian(&self, q: &DVector<f64>, q_next: &DVector<f64>) -> DMatrix<f64> {
        self.inner().discrete_grad_jacobian(q, q_next)
    }
}

/// Smooth single-mode data: NLS `q = 0.5 + 0.1 cos x`, `p = 0`;
/// KdV `q = cos x`.
pub fn standard_initial_condition(kind: ModelKind, grid: &SpectralGrid) -> State {
    let nodes = grid.nodes();
    let q = match kind {
        ModelKind::Nls => {
            let len = grid.len();
            DVector::from_fn(2 * len, |i, _| if i < len { 0.5 + 0.1 * nodes[i].cos() } else { 0.0 })
        }
        ModelKind::Kdv => DVector::from_iterator(grid.len(), nodes.iter().map(|x| x.cos())),
    };
    State::new(q, 0.0).expect("finite initial data")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm, expm_integral};
    use crate::spectral::dense_diff_matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(dim: usize, seed: u64) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0))
    }

    /// Dense `A = [[0, -D₂], [D₂, 0]]` from the nodal matrices.
    fn dense_nls_generator(grid: &SpectralGrid) -> DMatrix<f64> {
        let len = grid.len();
        let d2 = dense_diff_matrix(grid, 2).unwrap();
        let mut a = DMatrix::zeros(2 * len, 2 * len);
        a.view_mut((0, len), (len, len)).copy_from(&(-&d2));
        a.view_mut((len, 0), (len, len)).copy_from(&d2);
        a
    }

    fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        (a - b).amax()
    }

    #[test]
    fn nls_exp_zero_step_is_identity() {
        let sys = NlsSystem::with_nodes(11).unwrap();
        let z = random(22, 1);
        assert!(max_abs_diff(&sys.exp_action(0.0, &z), &z) < 1e-15);
        assert!(sys.int_exp_action(0.0, &z).amax() < 1e-15);
    }

    #[test]
    fn nls_exp_single_mode() {
        let sys = NlsSystem::with_nodes(11).unwrap();
        let nodes = sys.grid().nodes();
        let h = 0.37;
        let z = DVector::from_fn(22, |i, _| if i < 11 { nodes[i].cos() } else { 0.0 });
        let out = sys.exp_action(h, &z);
        for j in 0..11 {
            assert!((out[j] - h.cos() * nodes[j].cos()).abs() < 1e-14);
            assert!((out[11 + j] + h.sin() * nodes[j].cos()).abs() < 1e-14);
        }
    }

    #[test]
    fn nls_actions_match_dense_oracle() {
        let sys = NlsSystem::with_nodes(11).unwrap();
        let a = dense_nls_generator(sys.grid());
        for (i, &h) in [0.01, 0.1, 0.7].iter().enumerate() {
            let z = random(22, 10 + i as u64);
            let dense = expm(&(&a * h)) * &z;
            assert!(max_abs_diff(&sys.exp_action(h, &z), &dense) < 1e-9);
            let dense_t = expm_integral(&a, h) * &z;
            assert!(max_abs_diff(&sys.int_exp_action(h, &z), &dense_t) < 1e-9);
        }
    }

    #[test]
    fn nls_int_exp_kernel_split_oracle() {
        // T = A⁺(e^{Ah} - I) on range(A) plus h on ker(A) (the constant modes)
        let sys = NlsSystem::with_nodes(11).unwrap();
        let a = dense_nls_generator(sys.grid());
        let h = 0.3;
        let z = random(22, 77);
        let svd = a.clone().svd(true, true);
        let pinv = svd.pseudo_inverse(1e-8).unwrap();
        let s_minus_i = expm(&(&a * h)) - DMatrix::identity(22, 22);
        let projector_range = &pinv * &a;
        let kernel = DMatrix::identity(22, 22) - &projector_range;
        let oracle = &pinv * &s_minus_i * &z + &kernel * &z * h;
        assert!(max_abs_diff(&sys.int_exp_action(h, &z), &oracle) < 1e-9);
    }

    #[test]
    fn nls_int_exp_block_formula() {
        let sys = NlsSystem::with_nodes(11).unwrap();
        let nodes = sys.grid().nodes();
        let h = 0.45;
        // single k = 2 mode in q and k = 2 mode in p
        let z = DVector::from_fn(22, |i, _| {
            if i < 11 {
                (2.0 * nodes[i]).cos()
            } else {
                (2.0 * nodes[i - 11]).sin()
            }
        });
        let lam: f64 = -4.0;
        let a11 = (lam * h).sin() / lam;
        let a12 = ((lam * h).cos() - 1.0) / lam;
        let out = sys.int_exp_action(h, &z);
        for j in 0..11 {
            let (qj, pj) = ((2.0 * nodes[j]).cos(), (2.0 * nodes[j]).sin());
            assert!((out[j] - (a11 * qj + a12 * pj)).abs() < 1e-14);
            assert!((out[11 + j] - (-a12 * qj + a11 * pj)).abs() < 1e-14);
        }

        let constant = DVector::from_element(22, 0.8);
        let out = sys.int_exp_action(h, &constant);
        assert!(max_abs_diff(&out, &(constant * h)) < 1e-15);
    }

    #[test]
    fn nls_exp_is_isometry() {
        let sys = NlsSystem::with_nodes(41).unwrap();
        let z = random(82, 4);
        for h in [0.01, 1.0, 13.0] {
            assert!((sys.exp_action(h, &z).norm() - z.norm()).abs() < 1e-11 * z.norm());
        }
    }

    #[test]
    fn nls_discrete_gradient_properties() {
        let sys = NlsSystem::with_nodes(11).unwrap();
        let z = random(22, 5);
        let z2 = random(22, 6);
        assert!(max_abs_diff(&sys.discrete_grad(&z, &z), &sys.grad_potential(&z)) < 1e-15);
        assert_eq!(sys.discrete_grad(&z, &z2), sys.discrete_grad(&z2, &z));
        let lhs = sys.discrete_grad(&z, &z2).dot(&(&z2 - &z));
        let rhs = sys.potential(&z2) - sys.potential(&z);
        assert!((lhs - rhs).abs() < 1e-12 * sys.potential(&z).abs().max(1.0));
    }

    #[test]
    fn nls_derivatives_match_finite_differences() {
        let sys = NlsSystem::with_nodes(7).unwrap();
        let z = random(14, 8);
        let z2 = random(14, 9);
        let hess = sys.hess_potential(&z);
        let fd = crate::linalg::assemble(14, |e| {
            let eps = 1e-6;
            (sys.grad_potential(&(&z + e * eps)) - sys.grad_potential(&(&z - e * eps))) / (2.0 * eps)
        });
        assert!((hess - fd).amax() < 1e-7);
        let jac = sys.discrete_grad_jacobian(&z, &z2);
        let fd = crate::linalg::assemble(14, |e| {
            let eps = 1e-6;
            (sys.discrete_grad(&z, &(&z2 + e * eps)) - sys.discrete_grad(&z, &(&z2 - e * eps))) / (2.0 * eps)
        });
        assert!((jac - fd).amax() < 1e-7);
    }

    #[test]
    fn kdv_actions() {
        let sys = KdvSystem::with_nodes(11, 1.0).unwrap();
        let q = random(11, 12);
        assert!(max_abs_diff(&sys.exp_action(0.0, &q), &q) < 1e-15);
        assert!(sys.int_exp_action(0.0, &q).amax() < 1e-15);
        let h = 0.2;
        assert!((sys.exp_action(h, &q).norm() - q.norm()).abs() < 1e-12 * q.norm());

        let d3 = dense_diff_matrix(sys.grid(), 3).unwrap();
        let a = -d3;
        let dense = expm(&(&a * h)) * &q;
        assert!(max_abs_diff(&sys.exp_action(h, &q), &dense) < 1e-9);
        let dense_t = expm_integral(&a, h) * &q;
        assert!(max_abs_diff(&sys.int_exp_action(h, &q), &dense_t) < 1e-9);
    }

    #[test]
    fn kdv_rhs_matches_dense_matrices() {
        let nu = 0.05;
        let sys = KdvSystem::with_nodes(31, nu).unwrap();
        let nodes = sys.grid().nodes();
        let q = DVector::from_iterator(31, nodes.iter().map(|x| x.sin() + 0.3 * (2.0 * x).cos()));
        let rhs = sys.apply_j(&(sys.apply_d(&q) + sys.grad_potential(&q)));
        let d1 = dense_diff_matrix(sys.grid(), 1).unwrap();
        let d2 = dense_diff_matrix(sys.grid(), 2).unwrap();
        let dense = -&d1 * (&d2 * &q * nu + q.map(|x| 0.5 * x * x));
        assert!(max_abs_diff(&rhs, &dense) < 1e-10 * dense.amax().max(1.0));
    }

    #[test]
    fn kdv_discrete_gradient() {
        let sys = KdvSystem::with_nodes(3, 1.0).unwrap();
        let q = DVector::from_vec(vec![1.0, 0.0, -1.0]);
        let q2 = DVector::from_vec(vec![2.0, 0.0, -1.0]);
        let g = sys.discrete_grad(&q, &q2);
        assert!((g[0] - 7.0 / 6.0).abs() < 1e-15);
        assert!((g[0] * 1.0 - (8.0 / 6.0 - 1.0 / 6.0)).abs() < 1e-15);
        assert!(max_abs_diff(&sys.discrete_grad(&q, &q), &sys.grad_potential(&q)) < 1e-15);

        let sys = KdvSystem::with_nodes(31, 5e-4).unwrap();
        let a = random(31, 13);
        let b = random(31, 14);
        let lhs = sys.discrete_grad(&a, &b).dot(&(&b - &a));
        let rhs = sys.potential(&b) - sys.potential(&a);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn kdv_rejects_bad_dispersion() {
        assert!(KdvSystem::with_nodes(11, 0.0).is_err());
        assert!(KdvSystem::with_nodes(11, f64::NAN).is_err());
    }

    #[test]
    fn initial_conditions() {
        let grid = SpectralGrid::new(11).unwrap();
        let nls = standard_initial_condition(ModelKind::Nls, &grid);
        assert!((nls.q()[0] - 0.6).abs() < 1e-15);
        assert_eq!(nls.q().len(), 22);
        assert!(nls.q().amax() <= 1.0);
        let kdv = standard_initial_condition(ModelKind::Kdv, &grid);
        assert!(kdv.q().sum().abs() < 1e-12);
        assert!(kdv.q().amax() <= 1.0);
        assert_eq!(nls.t(), 0.0);
    }

    #[test]
    fn model_kind_parsing() {
        assert_eq!("NLS".parse::<ModelKind>().unwrap(), ModelKind::Nls);
        assert_eq!("kdv".parse::<ModelKind>().unwrap(), ModelKind::Kdv);
        assert!("heat".parse::<ModelKind>().is_err());
        assert_eq!(ModelKind::Kdv.to_string(), "kdv");
    }
}
