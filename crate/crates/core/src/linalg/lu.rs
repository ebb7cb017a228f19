use num_complex::Complex64;

use crate::error::{Error, Result};

/// Solve `M x = b` for a dense complex row-major `n × n` matrix by Gaussian
/// elimination with partial pivoting. `m` is consumed as workspace.
pub fn solve_complex(mut m: Vec<Complex64>, mut b: Vec<Complex64>) -> Result<Vec<Complex64>> {
    let n = b.len();
    if m.len() != n * n {
        return Err(Error::DimensionMismatch {
            expected: n * n,
            got: m.len(),
        });
    }
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (piv, pval) = (k..n)
            .map(|i| (i, m[i * n + k].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pval <= scale * 1e-300 || !pval.is_finite() {
            return Err(Error::SolveFailed(format!("singular pivot at column {k}")));
        }
        if piv != k {
            for j in 0..n {
                m.swap(k * n + j, piv * n + j);
            }
            b.swap(k, piv);
        }
        let inv = m[k * n + k].inv();
        let (upper, lower) = m.split_at_mut((k + 1) * n);
        let pivot_row = &upper[k * n + k..k * n + n];
        for i in 0..n - k - 1 {
            let row = &mut lower[i * n + k..i * n + n];
            let f = row[0] * inv;
            if f == Complex64::new(0.0, 0.0) {
                continue;
            }
            row[0] = Complex64::new(0.0, 0.0);
            for (r, &p) in row.iter_mut().zip(pivot_row).skip(1) {
                *r -= f * p;
            }
            b[k + 1 + i] = b[k + 1 + i] - f * b[k];
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for k in (0..n).rev() {
        let row = &m[k * n..(k + 1) * n];
        let mut acc = b[k];
        for j in k + 1..n {
            acc -= row[j] * x[j];
        }
        x[k] = acc / row[k];
    }
    if x.iter().any(|z| !z.is_finite()) {
        return Err(Error::SolveFailed("non-finite solution".into()));
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let c = |re, im| Complex64::new(re, im);
        let m = vec![c(2.0, 1.0), c(1.0, 0.0), c(0.0, -1.0), c(3.0, 0.0)];
        let x_true = vec![c(1.0, 2.0), c(-0.5, 0.25)];
        let b = vec![
            m[0] * x_true[0] + m[1] * x_true[1],
            m[2] * x_true[0] + m[3] * x_true[1],
        ];
        let x = solve_complex(m, b).unwrap();
        for (a, e) in x.iter().zip(&x_true) {
            assert!((a - e).norm() < 1e-14);
        }
    }

    #[test]
    fn singular_is_reported() {
        let z = Complex64::new(0.0, 0.0);
        let o = Complex64::new(1.0, 0.0);
        assert!(solve_complex(vec![o, o, o, o], vec![o, z]).is_err());
    }
}
