//! Householder tridiagonalization followed by implicit-shift QL.
//!
//! The reduction touches only the lower triangle of a working copy and
//! applies each reflector as a symmetric rank-2 update. Eigenvectors are
//! accumulated transposed (one eigenvector per row) so that every Givens
//! rotation of the QL sweep combines two contiguous rows.

use super::SymMatrix;
use crate::error::{Error, Result};

/// Iteration cap per eigenvalue in the QL sweep.
const MAX_QL_ITERATIONS: usize = 60;

/// Eigenvalues in ascending order; `vectors` holds eigenvector `j` in row
/// `j` (`vectors[j * n .. (j + 1) * n]`).
#[derive(Clone, Debug)]
pub struct Eigen {
    pub n: usize,
    pub values: Vec<f64>,
    pub vectors: Vec<f64>,
}

struct Tridiagonal {
    diag: Vec<f64>,
    /// `sub[i] = T[i][i-1]` for `i ≥ 1`, `sub[0] = 0`.
    sub: Vec<f64>,
    /// Householder vectors stored below the diagonal, column `k` holding the
    /// reflector of step `k`, plus their `β` factors.
    work: Vec<f64>,
    betas: Vec<f64>,
}

fn tridiagonalize(a: &SymMatrix) -> Tridiagonal {
    let n = a.n();
    let mut w = a.as_slice().to_vec();
    let mut diag = vec![0.0; n];
    let mut sub = vec![0.0; n];
    let mut betas = vec![0.0; n.saturating_sub(2)];
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];

    for k in 0..n.saturating_sub(2) {
        diag[k] = w[k * n + k];
        let m = n - k - 1;
        let v = &mut v[..m];
        for i in 0..m {
            v[i] = w[(k + 1 + i) * n + k];
        }
        let scale: f64 = v.iter().map(|x| x.abs()).sum();
        if scale == 0.0 {
            sub[k + 1] = 0.0;
            betas[k] = 0.0;
            for i in 0..m {
                w[(k + 1 + i) * n + k] = 0.0;
            }
            continue;
        }
        let xnorm = v.iter().map(|x| (x / scale) * (x / scale)).sum::<f64>().sqrt() * scale;
        let alpha = if v[0] > 0.0 { -xnorm } else { xnorm };
        v[0] -= alpha;
        let vtv: f64 = v.iter().map(|x| x * x).sum();
        if vtv == 0.0 {
            sub[k + 1] = alpha;
            betas[k] = 0.0;
            continue;
        }
        let beta = 2.0 / vtv;
        sub[k + 1] = alpha;
        betas[k] = beta;

        // p = β A22 v using the lower triangle of A22 only.
        let p = &mut p[..m];
        p.fill(0.0);
        for i in 0..m {
            let row = &w[(k + 1 + i) * n + (k + 1)..(k + 1 + i) * n + (k + 1) + i + 1];
            let vi = v[i];
            let (off, d) = row.split_at(i);
            let mut acc = d[0] * vi;
            for (j, &aij) in off.iter().enumerate() {
                acc += aij * v[j];
                p[j] += aij * vi;
            }
            p[i] += acc;
        }
        for x in p.iter_mut() {
            *x *= beta;
        }
        let kcoef = 0.5 * beta * p.iter().zip(v.iter()).map(|(a, b)| a * b).sum::<f64>();
        for (pi, vi) in p.iter_mut().zip(v.iter()) {
            *pi -= kcoef * vi;
        }
        // A22 -= v pᵀ + p vᵀ on the lower triangle.
        for i in 0..m {
            let (vi, pi) = (v[i], p[i]);
            let base = (k + 1 + i) * n + (k + 1);
            let row = &mut w[base..base + i + 1];
            for (j, r) in row.iter_mut().enumerate() {
                *r -= vi * p[j] + pi * v[j];
            }
        }
        for i in 0..m {
            w[(k + 1 + i) * n + k] = v[i];
        }
    }
    if n >= 2 {
        diag[n - 2] = w[(n - 2) * n + (n - 2)];
        sub[n - 1] = w[(n - 1) * n + (n - 2)];
    }
    if n >= 1 {
        diag[n - 1] = w[(n - 1) * n + (n - 1)];
    }
    Tridiagonal {
        diag,
        sub,
        work: w,
        betas,
    }
}

/// Form `Qᵀ` (rows are the columns of `Q = H_0 H_1 ⋯ H_{n-3}`).
fn accumulate_transposed(t: &Tridiagonal, n: usize) -> Vec<f64> {
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        q[i * n + i] = 1.0;
    }
    let mut wrow = vec![0.0; n];
    for k in (0..n.saturating_sub(2)).rev() {
        let beta = t.betas[k];
        if beta == 0.0 {
            continue;
        }
        let lo = k + 1;
        let wrow = &mut wrow[lo..n];
        wrow.fill(0.0);
        // wᵀ = β vᵀ Q[lo.., lo..]
        for i in lo..n {
            let vi = t.work[i * n + k];
            if vi == 0.0 {
                continue;
            }
            let row = &q[i * n + lo..i * n + n];
            for (a, &b) in wrow.iter_mut().zip(row) {
                *a += vi * b;
            }
        }
        for x in wrow.iter_mut() {
            *x *= beta;
        }
        for i in lo..n {
            let vi = t.work[i * n + k];
            if vi == 0.0 {
                continue;
            }
            let row = &mut q[i * n + lo..i * n + n];
            for (r, &b) in row.iter_mut().zip(wrow.iter()) {
                *r -= vi * b;
            }
        }
    }
    // transpose in place
    for i in 0..n {
        for j in 0..i {
            q.swap(i * n + j, j * n + i);
        }
    }
    q
}

/// Implicit QL on the tridiagonal `(d, e)`; when `zt` is given the rotations
/// are applied to its rows.
fn tql(d: &mut [f64], e: &mut [f64], mut zt: Option<&mut [f64]>) -> Result<()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(Error::NoConvergence {
                        index: l,
                        iterations: iter - 1,
                    });
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(z) = zt.as_deref_mut() {
                        let (head, tail) = z.split_at_mut((i + 1) * n);
                        let zi = &mut head[i * n..];
                        let zi1 = &mut tail[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let hk = *b;
                            *b = s * *a + c * hk;
                            *a = c * *a - s * hk;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

fn ascending_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    order
}

/// Full eigendecomposition of a real symmetric matrix.
pub fn symmetric_eigen(a: &SymMatrix) -> Result<Eigen> {
    let n = a.n();
    let mut t = tridiagonalize(a);
    let mut zt = accumulate_transposed(&t, n);
    tql(&mut t.diag, &mut t.sub, Some(&mut zt))?;
    let order = ascending_order(&t.diag);
    let values = order.iter().map(|&i| t.diag[i]).collect();
    let mut vectors = Vec::with_capacity(n * n);
    for &i in &order {
        vectors.extend_from_slice(&zt[i * n..(i + 1) * n]);
    }
    Ok(Eigen { n, values, vectors })
}

/// Eigenvalues only, ascending.
pub fn symmetric_eigenvalues(a: &SymMatrix) -> Result<Vec<f64>> {
    let mut t = tridiagonalize(a);
    tql(&mut t.diag, &mut t.sub, None)?;
    let mut values = t.diag;
    values.sort_by(f64::total_cmp);
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(a: &SymMatrix, e: &Eigen) -> f64 {
        let n = e.n;
        (0..n)
            .map(|j| {
                let v = &e.vectors[j * n..(j + 1) * n];
                let av = a.matvec(v);
                av.iter()
                    .zip(v)
                    .map(|(x, y)| (x - e.values[j] * y).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    fn pseudo_random(n: usize, seed: u64) -> SymMatrix {
        let mut s = seed;
        SymMatrix::from_fn(n, |_, _| {
            s = crate::seed::splitmix64(s);
            (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        })
    }

    #[test]
    fn small_sizes() {
        let e = symmetric_eigen(&SymMatrix::from_fn(1, |_, _| 3.5)).unwrap();
        assert_eq!(e.values, vec![3.5]);
        assert_eq!(e.vectors, vec![1.0]);

        let a = SymMatrix::from_fn(2, |i, j| if i == j { 0.0 } else { -1.0 });
        let e = symmetric_eigen(&a).unwrap();
        assert!((e.values[0] + 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        assert!(residual(&a, &e) < 1e-15);
    }

    #[test]
    fn random_dense_matrices() {
        for (n, seed) in [(3, 1), (7, 2), (40, 3), (101, 4)] {
            let a = pseudo_random(n, seed);
            let e = symmetric_eigen(&a).unwrap();
            assert!(residual(&a, &e) < 1e-12 * n as f64, "n = {n}");
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
            for i in 0..n {
                for j in 0..=i {
                    let d = super::super::dot(
                        &e.vectors[i * n..(i + 1) * n],
                        &e.vectors[j * n..(j + 1) * n],
                    );
                    let expect = if i == j { 1.0 } else { 0.0 };
                    assert!((d - expect).abs() < 1e-12);
                }
            }
            let vals = symmetric_eigenvalues(&a).unwrap();
            for (x, y) in vals.iter().zip(&e.values) {
                assert!((x - y).abs() < 1e-12);
            }
            let tr: f64 = e.values.iter().sum();
            assert!((tr - a.trace()).abs() < 1e-12 * n as f64);
        }
    }

    #[test]
    fn diagonal_and_degenerate() {
        let a = SymMatrix::from_fn(5, |i, j| if i == j { [3.0, -1.0, 2.0, 2.0, 0.0][i] } else { 0.0 });
        let e = symmetric_eigen(&a).unwrap();
        assert_eq!(e.values, vec![-1.0, 0.0, 2.0, 2.0, 3.0]);
        assert!(residual(&a, &e) < 1e-15);

        let zero = SymMatrix::zeros(4);
        assert_eq!(symmetric_eigenvalues(&zero).unwrap(), vec![0.0; 4]);
    }
}
