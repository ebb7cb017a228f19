//! Eigendecompositions, eigenvalue counting, the rescaled point process and
//! Green-function estimates.

mod green;
mod window;

use std::io::Write;

pub use green::{
    decay_rate_fit, fractional_moment, fractional_moment_profile, green_column, green_entry,
    write_moment_csv, DecayFit, MomentPoint,
};
pub use window::{count_sorted, slice_sorted, Interval, RescaledWindow};

use crate::error::{Error, Result};
use crate::graph::VertexSet;
use crate::hamiltonian::Operator;
use crate::linalg::{self, dot};

/// Relative residual accepted from the eigensolver.
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;

/// Default relative tolerance under which two eigenvalues count as one level.
pub const DEGENERACY_TOLERANCE: f64 = 1e-12;

/// Ascending eigenvalues with orthonormal eigenvectors of an [`Operator`].
#[derive(Clone, Debug)]
pub struct EigenSystem {
    values: Vec<f64>,
    /// Row `j` is the eigenvector of `values[j]`, indexed like the operator.
    vectors: Vec<f64>,
    dim: usize,
    residual_sup: f64,
    support: VertexSet,
    scale: f64,
}

impl EigenSystem {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, j: usize) -> &[f64] {
        &self.vectors[j * self.dim..(j + 1) * self.dim]
    }

    pub fn residual_sup(&self) -> f64 {
        self.residual_sup
    }

    pub fn support(&self) -> &VertexSet {
        &self.support
    }

    /// Operator scale used for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn count(&self, j: Interval) -> usize {
        count_sorted(&self.values, j)
    }

    /// Indices `j` with `E_j ∈ interval`.
    pub fn indices_in(&self, j: Interval) -> std::ops::Range<usize> {
        let a = self.values.partition_point(|&v| v < j.lo);
        let b = self.values.partition_point(|&v| v < j.hi).max(a);
        a..b
    }

    /// Amplitude of eigenvector `j` at global vertex `x`, zero off the support.
    pub fn amplitude(&self, j: usize, x: usize) -> f64 {
        self.support
            .position(x)
            .map_or(0.0, |i| self.vectors[j * self.dim + i])
    }

    /// Index of the eigenvalue nearest to `lambda` (lowest index on ties).
    pub fn nearest(&self, lambda: f64) -> Option<usize> {
        if self.values.is_empty() {
            return None;
        }
        let p = self.values.partition_point(|&v| v < lambda);
        let mut best = p.min(self.values.len() - 1);
        if p > 0 && (lambda - self.values[p - 1]).abs() <= (self.values[best] - lambda).abs() {
            best = p - 1;
        }
        Some(best)
    }

    /// Number of distinct levels, merging eigenvalues closer than
    /// `DEGENERACY_TOLERANCE · scale`.
    pub fn distinct_levels(&self) -> usize {
        let tol = DEGENERACY_TOLERANCE * self.scale;
        let mut count = 0;
        let mut last = f64::NEG_INFINITY;
        for &v in &self.values {
            if v - last > tol {
                count += 1;
                last = v;
            }
        }
        count
    }
}

/// Full eigendecomposition of `h`, rejecting results whose residual exceeds
/// `RESIDUAL_TOLERANCE · ‖H‖`.
pub fn eigendecompose(h: &Operator) -> Result<EigenSystem> {
    let m = h.matrix();
    let eig = linalg::symmetric_eigen(m)?;
    let dim = eig.n;
    let mut residual_sup: f64 = 0.0;
    for j in 0..dim {
        let v = &eig.vectors[j * dim..(j + 1) * dim];
        let e = eig.values[j];
        let mut r2 = 0.0;
        for i in 0..dim {
            let hv = dot(m.row(i), v);
            r2 += (hv - e * v[i]).powi(2);
        }
        residual_sup = residual_sup.max(r2.sqrt());
    }
    let bound = RESIDUAL_TOLERANCE * m.norm_inf().max(1.0);
    if !(residual_sup <= bound) {
        return Err(Error::Inaccurate {
            residual: residual_sup,
            bound,
        });
    }
    Ok(EigenSystem {
        values: eig.values,
        vectors: eig.vectors,
        dim,
        residual_sup,
        support: h.support().clone(),
        scale: h.scale(),
    })
}

/// Eigenvalues of `h` only, ascending.
pub fn eigenvalues(h: &Operator) -> Result<Vec<f64>> {
    linalg::symmetric_eigenvalues(h.matrix())
}

pub fn count_in_interval(es: &EigenSystem, j: Interval) -> usize {
    es.count(j)
}

/// Points `n (E_j - E)` for `E_j ∈ I_n`, ascending.
pub fn rescaled_points(values: &[f64], w: &RescaledWindow) -> Vec<f64> {
    slice_sorted(values, w.scaled())
        .iter()
        .map(|&e| w.rescale(e))
        .collect()
}

/// Write `realization_index, j, eigenvalue` rows.
pub fn write_spectrum_csv<W: Write>(
    out: &mut W,
    spectra: impl IntoIterator<Item = (usize, Vec<f64>)>,
) -> Result<()> {
    writeln!(out, "realization_index,j,eigenvalue")?;
    for (idx, values) in spectra {
        for (j, v) in values.iter().enumerate() {
            writeln!(out, "{idx},{j},{v:.17e}")?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::hamiltonian::{assemble, restrict_neumann, sample_disorder, DisorderSpec};

    fn clean(g: &Graph) -> Operator {
        let w = sample_disorder(g.n(), DisorderSpec::uniform(1.0).unwrap(), 0.0, 0).unwrap();
        assemble(g, &w).unwrap()
    }

    fn assert_values(es: &EigenSystem, expected: &[f64]) {
        assert_eq!(es.len(), expected.len());
        for (a, b) in es.values().iter().zip(expected) {
            assert!((a - b).abs() < 1e-13, "{a} vs {b}");
        }
    }

    #[test]
    fn one_by_one() {
        let g = Graph::random_regular(10, 3, 1).unwrap();
        let w = sample_disorder(10, DisorderSpec::uniform(1.0).unwrap(), 2.0, 5).unwrap();
        let op = restrict_neumann(&g, &w, &g.vertex_set([3]).unwrap()).unwrap();
        let es = eigendecompose(&op).unwrap();
        assert_eq!(es.values(), &[2.0 * w.omega[3]]);
        assert_eq!(es.vector(0), &[1.0]);
    }

    #[test]
    fn triangle_and_edge_oracles() {
        // Negated K3 adjacency: eigenvalues of -(J - I) are -2, 1, 1.
        let es = eigendecompose(&clean(&Graph::complete(3).unwrap())).unwrap();
        assert_values(&es, &[-2.0, 1.0, 1.0]);
        assert_eq!(es.count(Interval::new(0.0, 2.0).unwrap()), 2);
        let es = eigendecompose(&clean(&Graph::path(2).unwrap())).unwrap();
        assert_values(&es, &[-1.0, 1.0]);
    }

    #[test]
    fn three_path_restriction() {
        let g = Graph::cycle(6).unwrap();
        let op = restrict_neumann(
            &g,
            &sample_disorder(6, DisorderSpec::uniform(1.0).unwrap(), 0.0, 0).unwrap(),
            &g.ball(0, 1).unwrap(),
        )
        .unwrap();
        let es = eigendecompose(&op).unwrap();
        let r2 = 2f64.sqrt();
        assert_values(&es, &[-r2, 0.0, r2]);
    }

    #[test]
    fn restriction_to_whole_graph_matches_full() {
        let g = Graph::random_regular(30, 3, 4).unwrap();
        let w = sample_disorder(30, DisorderSpec::uniform(1.0).unwrap(), 3.0, 6).unwrap();
        let a = eigendecompose(&assemble(&g, &w).unwrap()).unwrap();
        let b = eigendecompose(&restrict_neumann(&g, &w, &g.all_vertices()).unwrap()).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn rescaled_points_arithmetic() {
        let w = RescaledWindow::new(0.3, Interval::new(0.0, 1.0).unwrap(), 100, 0.0).unwrap();
        let pts = rescaled_points(&[0.1, 0.3, 0.305, 0.4], &w);
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0], 0.0);
        assert!((pts[1] - 0.5).abs() < 1e-12);
        assert!(rescaled_points(&[1.0, 2.0], &w).is_empty());
    }

    #[test]
    fn nearest_index() {
        let g = Graph::complete(3).unwrap();
        let es = eigendecompose(&clean(&g)).unwrap();
        assert_eq!(es.nearest(-5.0), Some(0));
        assert_eq!(es.nearest(0.9), Some(1));
        assert_eq!(es.nearest(-0.4), Some(1));
        assert_eq!(es.nearest(-0.6), Some(0));
        assert_eq!(es.distinct_levels(), 2);
    }

    #[test]
    fn spectrum_csv() {
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, [(0, vec![-1.0, 1.0])]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("realization_index,j,eigenvalue\n0,0,"));
        assert_eq!(s.lines().count(), 3);
    }
}
