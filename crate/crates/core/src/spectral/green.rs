//! Resolvent matrix elements and their fractional moments.

use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::hamiltonian::{assemble, Ensemble, Operator};
use crate::linalg::solve_complex;

fn check_upper_half_plane(z: Complex64) -> Result<()> {
    if z.im > 0.0 && z.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "spectral parameter {z} must have positive imaginary part"
        )))
    }
}

/// Column `y` of `(H - z)^{-1}`, indexed like the operator.
pub fn green_column(h: &Operator, y: usize, z: Complex64) -> Result<Vec<Complex64>> {
    check_upper_half_plane(z)?;
    let iy = h
        .local_index(y)
        .ok_or(Error::InvalidVertex { vertex: y, n: h.dim() })?;
    let n = h.dim();
    let m = h.matrix();
    let mut a = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let v = Complex64::new(m.get(i, j), 0.0);
            a.push(if i == j { v - z } else { v });
        }
    }
    let mut b = vec![Complex64::new(0.0, 0.0); n];
    b[iy] = Complex64::new(1.0, 0.0);
    solve_complex(a, b)
}

/// `⟨δ_x, (H - z)^{-1} δ_y⟩`.
pub fn green_entry(h: &Operator, x: usize, y: usize, z: Complex64) -> Result<Complex64> {
    let ix = h
        .local_index(x)
        .ok_or(Error::InvalidVertex { vertex: x, n: h.dim() })?;
    Ok(green_column(h, y, z)?[ix])
}

fn mean_stderr(samples: &[f64]) -> (f64, f64) {
    let m = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / m;
    if samples.len() < 2 {
        return (mean, 0.0);
    }
    let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn check_moment_args(s: f64, samples: usize) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidArgument(format!("moment exponent s = {s} not in (0,1)")));
    }
    if samples == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    Ok(())
}

/// Monte Carlo estimate of `E|G(x, y; z)|^s` over the first `samples`
/// realizations of `ensemble`. Returns `(mean, standard error)`.
pub fn fractional_moment(
    ensemble: &Ensemble,
    g: &Graph,
    x: usize,
    y: usize,
    z: Complex64,
    s: f64,
    samples: usize,
) -> Result<(f64, f64)> {
    check_moment_args(s, samples)?;
    g.check_vertex(x)?;
    g.check_vertex(y)?;
    let values = (0..samples)
        .map(|i| {
            let w = ensemble.realization(g.n(), i as u64)?;
            let h = assemble(g, &w)?;
            Ok(green_entry(&h, x, y, z)?.norm().powf(s))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(mean_stderr(&values))
}

/// One row of a fractional-moment scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentPoint {
    pub distance: usize,
    pub s: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Fractional moments from a fixed source `x` to every vertex at each of
/// `distances`. Per realization the moments are averaged over the sphere at
/// that distance; mean and standard error are taken across realizations.
/// Distances with an empty sphere are skipped.
pub fn fractional_moment_profile(
    ensemble: &Ensemble,
    g: &Graph,
    x: usize,
    distances: &[usize],
    z: Complex64,
    s: f64,
    samples: usize,
) -> Result<Vec<MomentPoint>> {
    check_moment_args(s, samples)?;
    let dist = g.distances_from(x)?;
    let spheres: Vec<(usize, Vec<usize>)> = distances
        .iter()
        .map(|&d| {
            let members: Vec<usize> = (0..g.n()).filter(|&y| dist[y] as usize == d).collect();
            (d, members)
        })
        .filter(|(_, m)| !m.is_empty())
        .collect();
    let mut per_distance = vec![Vec::with_capacity(samples); spheres.len()];
    for i in 0..samples {
        let w = ensemble.realization(g.n(), i as u64)?;
        let h = assemble(g, &w)?;
        // G is symmetric, so the column at x gives G(x, y) for every y.
        let col = green_column(&h, x, z)?;
        for (k, (_, members)) in spheres.iter().enumerate() {
            let avg = members.iter().map(|&y| col[y].norm().powf(s)).sum::<f64>()
                / members.len() as f64;
            per_distance[k].push(avg);
        }
    }
    Ok(spheres
        .iter()
        .zip(per_distance)
        .map(|((d, _), vals)| {
            let (mean, stderr) = mean_stderr(&vals);
            MomentPoint {
                distance: *d,
                s,
                mean,
                stderr,
            }
        })
        .collect())
}

pub fn write_moment_csv<W: Write>(out: &mut W, points: &[MomentPoint]) -> Result<()> {
    writeln!(out, "distance,s,mean,stderr")?;
    for p in points {
        writeln!(out, "{},{},{:.10e},{:.10e}", p.distance, p.s, p.mean, p.stderr)?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub mu_hat: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `-ln(mean) = c + μ d`.
pub fn decay_rate_fit(moments: &[(f64, f64)]) -> Result<DecayFit> {
    if moments.iter().any(|&(_, m)| !(m > 0.0 && m.is_finite())) {
        return Err(Error::InvalidArgument("moments must be positive and finite".into()));
    }
    let mut ds: Vec<f64> = moments.iter().map(|&(d, _)| d).collect();
    ds.sort_by(f64::total_cmp);
    ds.dedup();
    if ds.len() < 3 {
        return Err(Error::DegenerateDesign(format!(
            "need at least 3 distinct distances, got {}",
            ds.len()
        )));
    }
    let m = moments.len() as f64;
    let xbar = moments.iter().map(|&(d, _)| d).sum::<f64>() / m;
    let ys: Vec<f64> = moments.iter().map(|&(_, v)| -v.ln()).collect();
    let ybar = ys.iter().sum::<f64>() / m;
    let sxx: f64 = moments.iter().map(|&(d, _)| (d - xbar).powi(2)).sum();
    let sxy: f64 = moments
        .iter()
        .zip(&ys)
        .map(|(&(d, _), y)| (d - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = moments
        .iter()
        .zip(&ys)
        .map(|(&(d, _), y)| (y - intercept - slope * d).powi(2))
        .sum();
    let ss_tot: f64 = ys.iter().map(|y| (y - ybar).powi(2)).sum();
    let r_squared = if ss_tot <= f64::EPSILON * ybar.abs().max(1.0) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(DecayFit {
        mu_hat: slope,
        r_squared,
    })
}
