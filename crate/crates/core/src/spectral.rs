//! Fourier pseudospectral machinery on odd-length periodic grids over `[0, 2π)`.
//!
//! The forward transform carries the `1/N` factor:
//!
//! ```text
//! v̂_k = (1/N) Σ_j v_j e^{-i k x_j},      v_j = Σ_k v̂_k e^{i k x_j},   k = -n..n
//! ```
//!
//! which is the opposite of the usual FFT library convention (unnormalized
//! forward, `1/N` on the inverse). Spectra are stored in FFT-natural order,
//! `k = 0, 1, .., n, -n, .., -1`; use [`Spectrum::get`] for logical indexing.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Relative bound on the imaginary part left over after applying a symbol to
/// real data.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

/// `|z|` below which [`phi1`] switches to its Taylor series.
const PHI1_SERIES_RADIUS: f64 = 1e-4;

/// Periodic grid with `N = 2n + 1` equispaced nodes `x_j = 2πj/N`.
#[derive(Clone)]
pub struct SpectralGrid {
    len: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralGrid").field("len", &self.len).finish()
    }
}

impl SpectralGrid {
    pub fn new(len: usize) -> Result<Self> {
        if len < 3 || len % 2 == 0 {
            return Err(Error::InvalidGrid(len));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            len,
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        })
    }

    /// Number of nodes `N`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `n = (N - 1) / 2`, the largest resolved wavenumber.
    pub fn half_width(&self) -> usize {
        (self.len - 1) / 2
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.len as f64
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.len).map(|j| self.node(j)).collect()
    }

    /// Logical wavenumber stored at `index`.
    pub fn wavenumber(&self, index: usize) -> i64 {
        wavenumber_at(self.len, index)
    }

    /// Storage index of logical wavenumber `k`, `-n <= k <= n`.
    pub fn index_of(&self, k: i64) -> usize {
        index_of(self.len, k)
    }

    /// Wavenumbers in storage order.
    pub fn wavenumbers(&self) -> impl Iterator<Item = i64> + '_ {
        (0..self.len).map(move |i| self.wavenumber(i))
    }

    fn check_len(&self, got: usize) -> Result<()> {
        if got != self.len {
            return Err(Error::Shape {
                expected: self.len,
                got,
            });
        }
        Ok(())
    }

    pub fn dft(&self, values: &[Complex64]) -> Result<Spectrum> {
        self.check_len(values.len())?;
        let mut buf = values.to_vec();
        self.forward.process(&mut buf);
        let scale = 1.0 / self.len as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        Ok(Spectrum { coeffs: buf })
    }

    pub fn idft(&self, spectrum: &Spectrum) -> Result<Vec<Complex64>> {
        self.check_len(spectrum.len())?;
        let mut buf = spectrum.coeffs.clone();
        self.inverse.process(&mut buf);
        Ok(buf)
    }

    /// In-place `F⁻¹ diag(factor(k)) F` on complex nodal data.
    pub fn apply_multiplier<F>(&self, data: &mut [Complex64], factor: F) -> Result<()>
    where
        F: Fn(i64) -> Complex64,
    {
        self.check_len(data.len())?;
        self.forward.process(data);
        let scale = 1.0 / self.len as f64;
        for (i, c) in data.iter_mut().enumerate() {
            *c *= factor(self.wavenumber(i)) * scale;
        }
        self.inverse.process(data);
        Ok(())
    }

    /// Real-to-real application of a diagonal Fourier operator. Fails if the
    /// symbol leaves an imaginary part larger than [`IMAG_RESIDUE_TOL`]
    /// relative to the output norm.
    pub fn apply_symbol(&self, symbol: &SpectralSymbol, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v.len())?;
        let mut data: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.apply_multiplier(&mut data, |k| symbol.eval(k))?;

        let out_norm = data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let imag_norm = data.iter().map(|c| c.im * c.im).sum::<f64>().sqrt();
        let in_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        // roundoff floor for outputs that cancel to ~0
        let floor = 1e-14 * in_norm;
        if imag_norm > IMAG_RESIDUE_TOL * out_norm && imag_norm > floor {
            return Err(Error::Symbol {
                label: symbol.label().to_owned(),
                residue: imag_norm / out_norm.max(f64::MIN_POSITIVE),
            });
        }
        Ok(data.into_iter().map(|c| c.re).collect())
    }
}

fn wavenumber_at(len: usize, index: usize) -> i64 {
    let n = (len - 1) / 2;
    if index <= n {
        index as i64
    } else {
        index as i64 - len as i64
    }
}

fn index_of(len: usize, k: i64) -> usize {
    if k >= 0 {
        k as usize
    } else {
        (len as i64 + k) as usize
    }
}

/// Fourier coefficients `v̂_k`, `k = -n..n`, in FFT-natural storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coeffs: Vec<Complex64>,
}

impl Spectrum {
    /// Wraps coefficients already laid out as `k = 0..n, -n..-1`.
    pub fn from_storage(coeffs: Vec<Complex64>) -> Self {
        Self { coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient of logical wavenumber `k`.
    pub fn get(&self, k: i64) -> Complex64 {
        self.coeffs[index_of(self.coeffs.len(), k)]
    }

    pub fn set(&mut self, k: i64, value: Complex64) {
        let i = index_of(self.coeffs.len(), k);
        self.coeffs[i] = value;
    }

    /// `max_k |v̂_{-k} - conj(v̂_k)|`; zero for the spectrum of real data.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = (self.coeffs.len() as i64 - 1) / 2;
        (0..=n)
            .map(|k| (self.get(-k) - self.get(k).conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// Diagonal Fourier-space operator `k ↦ λ(k)`.
#[derive(Clone)]
pub struct SpectralSymbol {
    label: String,
    rule: Arc<dyn Fn(i64) -> Complex64 + Send + Sync>,
}

impl fmt::Debug for SpectralSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralSymbol")
            .field("label", &self.label)
            .finish()
    }
}

impl SpectralSymbol {
    pub fn new<F>(label: impl Into<String>, rule: F) -> Self
    where
        F: Fn(i64) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            label: label.into(),
            rule: Arc::new(rule),
        }
    }

    /// Eigenvalues of `D_order`: `ik`, `-k²`, `-ik³`.
    pub fn derivative(order: u32) -> Result<Self> {
        if !(1..=3).contains(&order) {
            return Err(Error::InvalidOrder(order));
        }
        Ok(Self::new(format!("D{order}"), move |k| {
            Complex64::new(0.0, k as f64).powu(order)
        }))
    }

    /// `f(λ_k)` where `λ_k` are the eigenvalues of `D_order`.
    pub fn function_of_derivative<F>(order: u32, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Send + Sync + 'static,
    {
        let base = Self::derivative(order)?;
        let label = format!("f(D{order})");
        Ok(Self::new(label, move |k| f(base.eval(k))))
    }

    pub fn eval(&self, k: i64) -> Complex64 {
        (self.rule)(k)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Whether `λ(-k) = conj(λ(k))` for `|k| <= n`, the condition for the
    /// operator to map real vectors to real vectors.
    pub fn is_conjugate_symmetric(&self, n: usize, tol: f64) -> bool {
        (0..=n as i64).all(|k| {
            let a = self.eval(k);
            let b = self.eval(-k);
            (b - a.conj()).norm() <= tol * a.norm().max(1.0)
        })
    }
}

/// Dense nodal differentiation matrix of order 1, 2 or 3.
///
/// Orders 1 and 2 use the closed-form entries for odd `N`; order 3 is the
/// product `D₁D₂`.
pub fn dense_diff_matrix(grid: &SpectralGrid, order: u32) -> Result<DMatrix<f64>> {
    let len = grid.len();
    let h = grid.spacing();
    let n = grid.half_width() as f64;
    let sign = |m: i64| if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    match order {
        1 => Ok(DMatrix::from_fn(len, len, |k, j| {
            if k == j {
                0.0
            } else {
                let m = k as i64 - j as i64;
                sign(m) / (2.0 * (m as f64 * h / 2.0).sin())
            }
        })),
        2 => Ok(DMatrix::from_fn(len, len, |k, j| {
            if k == j {
                -n * (n + 1.0) / 3.0
            } else {
                let m = k as i64 - j as i64;
                let half = m as f64 * h / 2.0;
                sign(m + 1) * half.cos() / (2.0 * half.sin().powi(2))
            }
        })),
        3 => {
            let d1 = dense_diff_matrix(grid, 1)?;
            let d2 = dense_diff_matrix(grid, 2)?;
            Ok(d1 * d2)
        }
        other => Err(Error::InvalidOrder(other)),
    }
}

/// Direct `O(N²)` evaluation of the normalized forward transform.
pub fn direct_dft(values: &[Complex64]) -> Vec<Complex64> {
    let len = values.len();
    let h = 2.0 * PI / len as f64;
    (0..len)
        .map(|i| {
            let k = wavenumber_at(len, i) as f64;
            values
                .iter()
                .enumerate()
                .map(|(j, v)| v * Complex64::from_polar(1.0, -k * j as f64 * h))
                .sum::<Complex64>()
                / len as f64
        })
        .collect()
}

/// `φ₁(z) = (e^z - 1)/z`, with `φ₁(0) = 1`.
pub fn phi1(z: Complex64) -> Complex64 {
    if z.norm() < PHI1_SERIES_RADIUS {
        // Σ_{m=0}^{10} z^m / (m+1)!, Horner form
        let mut acc = Complex64::new(0.0, 0.0);
        for m in (0..=10u32).rev() {
            acc = acc * z + 1.0 / factorial(m + 1);
        }
        acc
    } else {
        expm1(z) / z
    }
}

/// `e^z - 1` without cancellation in the real part.
fn expm1(z: Complex64) -> Complex64 {
    let (s, c) = z.im.sin_cos();
    let half = (z.im / 2.0).sin();
    let em1 = z.re.exp_m1();
    Complex64::new(em1 * c - 2.0 * half * half, (em1 + 1.0) * s)
}

fn factorial(m: u32) -> f64 {
    (1..=m).map(f64::from).product()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::expm;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
    }

    fn random_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn grid_rejects_even_and_tiny() {
        assert!(matches!(SpectralGrid::new(10), Err(Error::InvalidGrid(10))));
        assert!(SpectralGrid::new(1).is_err());
        assert!(SpectralGrid::new(3).is_ok());
    }

    #[test]
    fn grid_bookkeeping() {
        let g = SpectralGrid::new(11).unwrap();
        assert_eq!(g.half_width(), 5);
        assert!((g.node(10) + g.spacing() - 2.0 * PI).abs() < 1e-14);
        let mut ks: Vec<i64> = g.wavenumbers().collect();
        assert_eq!(&ks[..6], &[0, 1, 2, 3, 4, 5]);
        assert_eq!(&ks[6..], &[-5, -4, -3, -2, -1]);
        ks.sort();
        assert_eq!(ks, (-5..=5).collect::<Vec<_>>());
        for k in -5..=5 {
            assert_eq!(g.wavenumber(g.index_of(k)), k);
        }
    }

    #[test]
    fn dft_of_constant_is_dc_only() {
        let g = SpectralGrid::new(9).unwrap();
        let s = g.dft(&real(&[2.5; 9])).unwrap();
        assert!((s.get(0) - Complex64::new(2.5, 0.0)).norm() < 1e-14);
        for k in 1..=4 {
            assert!(s.get(k).norm() < 1e-14 && s.get(-k).norm() < 1e-14);
        }
    }

    #[test]
    fn dft_of_cosine() {
        let g = SpectralGrid::new(11).unwrap();
        let v: Vec<f64> = g.nodes().iter().map(|x| x.cos()).collect();
        let s = g.dft(&real(&v)).unwrap();
        for k in -5..=5i64 {
            let expected = if k.abs() == 1 { 0.5 } else { 0.0 };
            assert!((s.get(k) - Complex64::new(expected, 0.0)).norm() < 1e-13, "k={k}");
        }
    }

    #[test]
    fn dft_matches_direct_sum_and_round_trips() {
        let g = SpectralGrid::new(31).unwrap();
        let v = real(&random_vec(31, 7));
        let fast = g.dft(&v).unwrap();
        let slow = direct_dft(&v);
        for (a, b) in fast.as_slice().iter().zip(&slow) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(fast.conjugate_asymmetry() < 1e-15);
        let back = g.idft(&fast).unwrap();
        let err: f64 = back.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-13);
    }

    #[test]
    fn idft_examples() {
        let g = SpectralGrid::new(11).unwrap();
        let mut s = Spectrum::from_storage(vec![Complex64::new(0.0, 0.0); 11]);
        s.set(0, Complex64::new(1.0, 0.0));
        assert!(g.idft(&s).unwrap().iter().all(|c| (c - 1.0).norm() < 1e-14));

        let mut s = Spectrum::from_storage(vec![Complex64::new(0.0, 0.0); 11]);
        s.set(1, Complex64::new(0.5, 0.0));
        s.set(-1, Complex64::new(0.5, 0.0));
        let v = g.idft(&s).unwrap();
        for (j, c) in v.iter().enumerate() {
            assert!((c - g.node(j).cos()).norm() < 1e-14);
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let g = SpectralGrid::new(11).unwrap();
        assert!(matches!(
            g.dft(&real(&[1.0; 10])),
            Err(Error::Shape { expected: 11, got: 10 })
        ));
        let sym = SpectralSymbol::derivative(2).unwrap();
        assert!(g.apply_symbol(&sym, &[0.0; 12]).is_err());
    }

    #[test]
    fn diff_matrix_structure() {
        for len in [3, 7, 11, 21] {
            let g = SpectralGrid::new(len).unwrap();
            let n = g.half_width() as f64;
            let d1 = dense_diff_matrix(&g, 1).unwrap();
            let d2 = dense_diff_matrix(&g, 2).unwrap();
            for i in 0..len {
                assert_eq!(d1[(i, i)], 0.0);
                assert!((d2[(i, i)] + n * (n + 1.0) / 3.0).abs() < 1e-12);
            }
            assert!((&d1 + d1.transpose()).amax() < 1e-12);
            assert!((&d2 - d2.transpose()).amax() < 1e-12);
        }
        let g = SpectralGrid::new(5).unwrap();
        assert!(matches!(dense_diff_matrix(&g, 4), Err(Error::InvalidOrder(4))));
    }

    #[test]
    fn d1_differentiates_sine() {
        let g = SpectralGrid::new(21).unwrap();
        let d1 = dense_diff_matrix(&g, 1).unwrap();
        let v = DVector::from_iterator(21, g.nodes().into_iter().map(f64::sin));
        let dv = d1 * v;
        for (j, x) in g.nodes().into_iter().enumerate() {
            assert!((dv[j] - x.cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn symbol_identity_and_heat() {
        let g = SpectralGrid::new(15).unwrap();
        let v = random_vec(15, 3);
        let id = SpectralSymbol::new("one", |_| Complex64::new(1.0, 0.0));
        let out = g.apply_symbol(&id, &v).unwrap();
        assert!(out.iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-14));

        let heat = SpectralSymbol::function_of_derivative(2, |l| (l * 0.1).exp()).unwrap();
        let c: Vec<f64> = g.nodes().iter().map(|x| x.cos()).collect();
        let out = g.apply_symbol(&heat, &c).unwrap();
        for (a, b) in out.iter().zip(&c) {
            assert!((a - (-0.1f64).exp() * b).abs() < 1e-14);
        }
    }

    #[test]
    fn symbol_exp_d3_matches_dense_expm() {
        let g = SpectralGrid::new(11).unwrap();
        let h = 0.3;
        let v = random_vec(11, 11);
        let sym = SpectralSymbol::function_of_derivative(3, move |l| (-l * h).exp()).unwrap();
        let fast = g.apply_symbol(&sym, &v).unwrap();
        let d3 = dense_diff_matrix(&g, 3).unwrap();
        let dense = expm(&(d3 * -h)) * DVector::from_column_slice(&v);
        let err = fast.iter().zip(dense.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-9 * dense.amax(), "err {err}");
    }

    #[test]
    fn non_conjugate_symmetric_symbol_is_rejected() {
        let g = SpectralGrid::new(11).unwrap();
        let bad = SpectralSymbol::new("ik_plus_i", |k| Complex64::new(0.0, 1.0 + k as f64));
        assert!(!bad.is_conjugate_symmetric(5, 1e-12));
        let v: Vec<f64> = g.nodes().iter().map(|x| 1.0 + x.sin()).collect();
        assert!(matches!(g.apply_symbol(&bad, &v), Err(Error::Symbol { .. })));
        for order in 1..=3 {
            assert!(SpectralSymbol::derivative(order)
                .unwrap()
                .is_conjugate_symmetric(20, 1e-14));
        }
    }

    #[test]
    fn phi1_values() {
        assert_eq!(phi1(Complex64::new(0.0, 0.0)), Complex64::new(1.0, 0.0));
        assert!((phi1(Complex64::new(1.0, 0.0)).re - (1f64.exp() - 1.0)).abs() < 1e-15);
        assert!((phi1(Complex64::new(1.0, 0.0)).re - 1.718281828).abs() < 1e-9);

        // 200-term series reference
        let z = Complex64::new(0.0, 1e-6);
        let mut term = Complex64::new(1.0, 0.0);
        let mut series = term;
        for m in 1..200u32 {
            term = term * z / f64::from(m + 1);
            series += term;
        }
        assert!((phi1(z) - series).norm() < 1e-15);
    }

    #[test]
    fn phi1_is_continuous_across_series_switch() {
        for &r in &[0.99e-4, 1.01e-4] {
            for &theta in &[0.0, 0.7, PI / 2.0, 2.5] {
                let z = Complex64::from_polar(r, theta);
                // reference: series to 30 terms
                let mut term = Complex64::new(1.0, 0.0);
                let mut series = term;
                for m in 1..30u32 {
                    term = term * z / f64::from(m + 1);
                    series += term;
                }
                assert!((phi1(z) - series).norm() < 1e-15, "r={r} theta={theta}");
            }
        }
    }
}
