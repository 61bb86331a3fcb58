//! Small dense helpers: matrix exponential by scaling and squaring, and the
//! `∫₀^h e^{Aτ} dτ` block obtained from an augmented exponential.

use nalgebra::{DMatrix, DVector};

const TAYLOR_DEGREE: usize = 18;

/// `e^A` via scaling and squaring with a degree-18 Taylor polynomial on
/// `A / 2^s`, `‖A / 2^s‖₁ <= 1/2`.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    assert!(a.is_square(), "expm needs a square matrix");
    let dim = a.nrows();
    let norm = one_norm(a);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(squarings);

    let mut result = DMatrix::<f64>::identity(dim, dim);
    let mut term = DMatrix::<f64>::identity(dim, dim);
    for m in 1..=TAYLOR_DEGREE {
        term = &term * &scaled / m as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `∫₀^h e^{Aτ} dτ`, read off the upper-right block of
/// `exp([[A h, h I], [0, 0]])`. Valid for singular `A`.
pub fn expm_integral(a: &DMatrix<f64>, h: f64) -> DMatrix<f64> {
    let dim = a.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * dim, 2 * dim);
    aug.view_mut((0, 0), (dim, dim)).copy_from(&(a * h));
    aug.view_mut((0, dim), (dim, dim))
        .copy_from(&(DMatrix::<f64>::identity(dim, dim) * h));
    expm(&aug).view((0, dim), (dim, dim)).into_owned()
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Dense matrix of a linear action, assembled column by column.
pub fn assemble<F>(dim: usize, mut action: F) -> DMatrix<f64>
where
    F: FnMut(&DVector<f64>) -> DVector<f64>,
{
    let mut m = DMatrix::<f64>::zeros(dim, dim);
    let mut e = DVector::<f64>::zeros(dim);
    for j in 0..dim {
        e[j] = 1.0;
        m.set_column(j, &action(&e));
        e[j] = 0.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.7;
        let a = DMatrix::from_row_slice(2, 2, &[0.0, t, -t, 0.0]);
        let e = expm(&a);
        let expected = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
        assert!((e - expected).amax() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.0, 1.5, 12.0]));
        let e = expm(&a);
        for (i, x) in [-3.0f64, 0.0, 1.5, 12.0].iter().enumerate() {
            assert!((e[(i, i)] - x.exp()).abs() < 1e-13 * x.exp());
        }
    }

    #[test]
    fn integral_with_singular_generator() {
        // A = [[0, 1], [0, 0]]: e^{Aτ} = [[1, τ], [0, 1]], integral = [[h, h²/2], [0, h]]
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let h = 0.4;
        let t = expm_integral(&a, h);
        let expected = DMatrix::from_row_slice(2, 2, &[h, h * h / 2.0, 0.0, h]);
        assert!((t - expected).amax() < 1e-15);
    }

    #[test]
    fn integral_satisfies_generator_identity() {
        // A T = e^{Ah} - I
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, -1.0, -2.0, 0.0, 3.0, 1.0, -3.0, 0.0]);
        let h = 0.8;
        let t = expm_integral(&a, h);
        let lhs = &a * t;
        let rhs = expm(&(&a * h)) - DMatrix::identity(3, 3);
        assert!((lhs - rhs).amax() < 1e-13);
    }
}
