//! Eigenfunction correlators, localization envelopes and the deterministic
//! approximate-eigenvector estimates.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::hamiltonian::Operator;
use crate::linalg::{dot, norm};
use crate::spectral::{EigenSystem, Interval};

/// Absolute slack allowed on top of the proven bounds.
pub const BOUND_SLACK: f64 = 1e-8;

/// A value compared against a proven upper or lower bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn upper(value: f64, bound: f64) -> BoundCheck {
        BoundCheck {
            value,
            bound,
            holds: value <= bound + BOUND_SLACK,
        }
    }

    fn lower(value: f64, bound: f64) -> BoundCheck {
        BoundCheck {
            value,
            bound,
            holds: value >= bound - BOUND_SLACK,
        }
    }
}

/// `Q(x, y; I) = Σ_{E_j ∈ I} |φ_j(x)| |φ_j(y)|`.
pub fn correlator(es: &EigenSystem, x: usize, y: usize, interval: Interval) -> f64 {
    es.indices_in(interval)
        .map(|j| es.amplitude(j, x).abs() * es.amplitude(j, y).abs())
        .sum()
}

/// `Σ_{y ∈ ∂b} |ψ(y)|²` for `ψ` given on the members of `b`.
pub fn boundary_mass(g: &Graph, b: &VertexSet, psi: &[f64]) -> f64 {
    g.inner_boundary(b)
        .members()
        .iter()
        .map(|&y| psi[b.position(y).expect("boundary lies in b")].powi(2))
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApproxEigenReport {
    pub lambda: f64,
    /// `τ²`, the mass of `ψ` on the inner boundary of its support.
    pub boundary_mass: f64,
    pub index: usize,
    pub eigenvalue: f64,
    /// `|λ - E_j|` against `√K τ`.
    pub gap: BoundCheck,
    /// `‖(H - λ)ψ‖`, which always dominates the gap.
    pub residual: f64,
    pub epsilon: f64,
    /// Eigenvalues of `H` in `(λ - ε, λ + ε)`.
    pub nearby: usize,
    /// `|⟨ψ, φ_j⟩|²` against `1 - K τ² / ε²`, evaluated when `nearby ≤ 1`.
    pub overlap: Option<BoundCheck>,
}

impl ApproxEigenReport {
    pub fn holds(&self) -> bool {
        self.gap.holds && self.overlap.is_none_or(|o| o.holds)
    }
}

/// Entries of the ascending `values` in the open interval `(c - r, c + r)`.
fn count_open(values: &[f64], c: f64, r: f64) -> usize {
    let a = values.partition_point(|&v| v <= c - r);
    let b = values.partition_point(|&v| v < c + r);
    b.saturating_sub(a)
}

/// Embed `psi`, given on the members of `b`, into the index space of `h`.
fn embed(h: &Operator, b: &VertexSet, psi: &[f64]) -> Result<Vec<f64>> {
    if psi.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: b.len(),
            got: psi.len(),
        });
    }
    let mut full = vec![0.0; h.dim()];
    for (&x, &v) in b.members().iter().zip(psi) {
        let i = h.local_index(x).ok_or_else(|| {
            Error::Precondition(format!("vertex {x} of the trial support lies outside H"))
        })?;
        full[i] = v;
    }
    Ok(full)
}

/// Check `ψ`, an exact eigenvector of `H` on `b` with value `λ` that vanishes
/// off `b`, against the spectrum `es` of `h`.
pub fn check_approx_eigenvector(
    g: &Graph,
    h: &Operator,
    b: &VertexSet,
    psi: &[f64],
    lambda: f64,
    es: &EigenSystem,
    epsilon: f64,
) -> Result<ApproxEigenReport> {
    if es.dim() != h.dim() {
        return Err(Error::DimensionMismatch {
            expected: h.dim(),
            got: es.dim(),
        });
    }
    let v = embed(h, b, psi)?;
    let nv = norm(psi);
    if (nv - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("trial vector has norm {nv}")));
    }
    // ψ lives on b, so only those columns of H contribute.
    let cols: Vec<usize> = b
        .members()
        .iter()
        .map(|&x| h.local_index(x).expect("embedded above"))
        .collect();
    let hv: Vec<f64> = (0..h.dim())
        .map(|i| {
            let row = h.matrix().row(i);
            cols.iter().zip(psi).map(|(&c, p)| row[c] * p).sum()
        })
        .collect();
    let mut residual2 = 0.0;
    let tol = 1e-8 * h.scale();
    for i in 0..h.dim() {
        let r = hv[i] - lambda * v[i];
        if b.contains(h.global_vertex(i)) {
            if r.abs() > tol {
                return Err(Error::Precondition(format!(
                    "H psi differs from lambda psi by {r:.3e} at vertex {} inside the support",
                    h.global_vertex(i)
                )));
            }
        } else {
            residual2 += r * r;
        }
    }
    let tau2 = boundary_mass(g, b, psi);
    let k = g.branching() as f64;
    let index = es.nearest(lambda).ok_or(Error::EmptySupport)?;
    let eigenvalue = es.values()[index];
    let gap = BoundCheck::upper((lambda - eigenvalue).abs(), (k * tau2).sqrt());
    let nearby = count_open(es.values(), lambda, epsilon);
    let overlap = (nearby <= 1 && epsilon > 0.0).then(|| {
        let o = dot(&v, es.vector(index)).powi(2);
        BoundCheck::lower(o, 1.0 - k * tau2 / (epsilon * epsilon))
    });
    Ok(ApproxEigenReport {
        lambda,
        boundary_mass: tau2,
        index,
        eigenvalue,
        gap,
        residual: residual2.sqrt(),
        epsilon,
        nearby,
        overlap,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReverseApproxReport {
    /// Index in the restricted spectrum of the eigenvalue nearest to `E`.
    pub xi_index: usize,
    pub xi: f64,
    /// `|E - ξ|` against `√(3K) C e^{-μ_K (R+1)}`.
    pub gap: BoundCheck,
    /// `‖φ|_B‖²` against `1 - (3/2) C² e^{-2μ_K R} / (e^{2μ_K} - 1)`.
    pub restricted_norm: BoundCheck,
    /// Restricted eigenvalues in `(E - ε, E + ε)`.
    pub nearby: usize,
    /// `|⟨ψ, φ̃⟩|²` against `1 - 3K C² e^{-2μ_K(R+1)} / ε²` when `nearby ≤ 1`.
    pub overlap: Option<BoundCheck>,
}

impl ReverseApproxReport {
    pub fn holds(&self) -> bool {
        self.gap.holds && self.restricted_norm.holds && self.overlap.is_none_or(|o| o.holds)
    }
}

/// Largest envelope constant admitted by the reverse estimate.
pub fn reverse_constant_limit(k: f64, mu: f64, radius: usize) -> f64 {
    let mu_k = mu - k.ln() / 2.0;
    (((2.0 * mu_k).exp() - 1.0) / 3.0).sqrt() * (mu_k * radius as f64).exp()
}

/// Restrict the eigenvector `phi` of the full operator to `B_R(hat_x)` and
/// compare with the spectrum `es_restricted` of the Neumann restriction.
#[allow(clippy::too_many_arguments)]
pub fn check_reverse_approx(
    g: &Graph,
    phi: &[f64],
    energy: f64,
    hat_x: usize,
    radius: usize,
    c: f64,
    mu: f64,
    es_restricted: &EigenSystem,
    epsilon: f64,
) -> Result<ReverseApproxReport> {
    if phi.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: phi.len(),
        });
    }
    let k = g.branching() as f64;
    let mu_k = mu - k.ln() / 2.0;
    if !(mu_k > 0.0) {
        return Err(Error::Precondition(format!(
            "rate {mu} must exceed ln(K)/2"
        )));
    }
    let limit = reverse_constant_limit(k, mu, radius);
    if !(c > 0.0 && c <= limit) {
        return Err(Error::Precondition(format!(
            "envelope constant {c} outside (0, {limit}]"
        )));
    }
    let dist = g.distances_from(hat_x)?;
    for (x, (&p, &d)) in phi.iter().zip(dist).enumerate() {
        let bound = c * (-mu * d as f64).exp();
        if p.abs() > bound * (1.0 + 1e-12) {
            return Err(Error::EnvelopeViolated {
                vertex: x,
                value: p.abs(),
                bound,
            });
        }
    }
    let ball = g.ball(hat_x, radius)?;
    if es_restricted.support() != &ball {
        return Err(Error::Precondition(
            "restricted spectrum does not belong to the ball around hat_x".into(),
        ));
    }
    let xi_index = es_restricted.nearest(energy).ok_or(Error::EmptySupport)?;
    let xi = es_restricted.values()[xi_index];
    let r = radius as f64;
    let gap = BoundCheck::upper(
        (energy - xi).abs(),
        (3.0 * k).sqrt() * c * (-mu_k * (r + 1.0)).exp(),
    );
    let restricted: Vec<f64> = ball.members().iter().map(|&x| phi[x]).collect();
    let norm2 = dot(&restricted, &restricted);
    let restricted_norm = BoundCheck::lower(
        norm2,
        1.0 - 1.5 * c * c * (-2.0 * mu_k * r).exp() / ((2.0 * mu_k).exp() - 1.0),
    );
    let nearby = count_open(es_restricted.values(), energy, epsilon);
    let overlap = (nearby <= 1 && epsilon > 0.0 && norm2 > 0.0).then(|| {
        let o = dot(&restricted, es_restricted.vector(xi_index)).powi(2) / norm2;
        BoundCheck::lower(
            o,
            1.0 - 3.0 * k * c * c * (-2.0 * mu_k * (r + 1.0)).exp() / (epsilon * epsilon),
        )
    });
    Ok(ReverseApproxReport {
        xi_index,
        xi,
        gap,
        restricted_norm,
        nearby,
        overlap,
    })
}

fn check_unit(v: &[f64], what: &str) -> Result<()> {
    let n = norm(v);
    if (n - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!("{what} has norm {n}")));
    }
    Ok(())
}

fn check_overlap_with(psi: &[f64], es: &EigenSystem, j: usize, delta: f64) -> Result<()> {
    if psi.len() != es.dim() {
        return Err(Error::DimensionMismatch {
            expected: es.dim(),
            got: psi.len(),
        });
    }
    if j >= es.len() {
        return Err(Error::InvalidArgument(format!("eigen index {j} out of range")));
    }
    check_unit(psi, "trial vector")?;
    let o = dot(psi, es.vector(j)).powi(2);
    if o < 1.0 - delta * delta - 1e-12 {
        return Err(Error::Precondition(format!(
            "overlap {o} below 1 - delta^2 = {}",
            1.0 - delta * delta
        )));
    }
    Ok(())
}

/// `|⟨ψ_1, ψ_2⟩|` against `1 - 2δ²` for two vectors close to `φ_j`.
pub fn overlap_transfer(
    psi1: &[f64],
    psi2: &[f64],
    es: &EigenSystem,
    j: usize,
    delta: f64,
) -> Result<BoundCheck> {
    check_overlap_with(psi1, es, j, delta)?;
    check_overlap_with(psi2, es, j, delta)?;
    Ok(BoundCheck::lower(dot(psi1, psi2).abs(), 1.0 - 2.0 * delta * delta))
}

/// `|ψ(x)|` against `|φ_j(x)| + δ` for a vector close to `φ_j`.
pub fn pointwise_transfer(
    psi: &[f64],
    es: &EigenSystem,
    j: usize,
    delta: f64,
    x: usize,
) -> Result<BoundCheck> {
    check_overlap_with(psi, es, j, delta)?;
    let i = es.support().position(x).ok_or(Error::InvalidVertex {
        vertex: x,
        n: es.dim(),
    })?;
    Ok(BoundCheck::upper(psi[i].abs(), es.vector(j)[i].abs() + delta))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationProfile {
    pub j: usize,
    pub energy: f64,
    pub center: usize,
    /// Smallest `X` with `|φ_j(x)| ≤ X e^{-μ d(x, center)}` everywhere.
    pub envelope: f64,
    pub mu: f64,
    /// `max_x |φ_j(x)| - X e^{-μ d(x, center)}`.
    pub violation: f64,
}

/// `max_x |φ_j(x)| - X e^{-μ d(x, center)}` for an arbitrary constant `X`.
pub fn envelope_violation(
    es: &EigenSystem,
    g: &Graph,
    j: usize,
    center: usize,
    envelope: f64,
    mu: f64,
) -> Result<f64> {
    let dist = g.distances_from(center)?;
    let v = es.vector(j);
    Ok(es
        .support()
        .members()
        .iter()
        .zip(v)
        .map(|(&x, p)| p.abs() - envelope * (-mu * dist[x] as f64).exp())
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn localization_profile(
    es: &EigenSystem,
    g: &Graph,
    j: usize,
    mu: f64,
) -> Result<LocalizationProfile> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidArgument(format!("decay rate {mu} must be positive")));
    }
    if j >= es.len() {
        return Err(Error::InvalidArgument(format!("eigen index {j} out of range")));
    }
    let v = es.vector(j);
    let members = es.support().members();
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    let center = members[best];
    let dist = g.distances_from(center)?;
    let envelope = members
        .iter()
        .zip(v)
        .map(|(&x, p)| p.abs() * (mu * dist[x] as f64).exp())
        .fold(0.0, f64::max);
    let violation = envelope_violation(es, g, j, center, envelope, mu)?;
    Ok(LocalizationProfile {
        j,
        energy: es.values()[j],
        center,
        envelope,
        mu,
        violation,
    })
}

/// Profiles of every eigenvector with eigenvalue in `interval`.
pub fn localization_profiles(
    es: &EigenSystem,
    g: &Graph,
    interval: Interval,
    mu: f64,
) -> Result<Vec<LocalizationProfile>> {
    es.indices_in(interval)
        .into_par_iter()
        .map(|j| localization_profile(es, g, j, mu))
        .collect()
}

/// `X_n`: the largest envelope constant among `profiles`, zero if empty.
pub fn envelope_max(profiles: &[LocalizationProfile]) -> f64 {
    profiles.iter().map(|p| p.envelope).fold(0.0, f64::max)
}

/// Midpoint of `(ln K, μ_s - ln K)`.
pub fn default_mu(k: usize, mu_s: f64) -> Result<f64> {
    let lk = (k as f64).ln();
    if !(mu_s - lk > lk) {
        return Err(Error::Precondition(format!(
            "decay rate {mu_s} leaves no room above 2 ln K = {}",
            2.0 * lk
        )));
    }
    Ok(mu_s / 2.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub realization: usize,
    pub j: usize,
    #[serde(rename = "E_j")]
    pub energy: f64,
    pub center: usize,
    #[serde(rename = "X")]
    pub envelope: f64,
    pub mu: f64,
    pub violation: f64,
}

pub fn write_localization_jsonl<W: Write>(
    out: &mut W,
    realization: usize,
    profiles: &[LocalizationProfile],
) -> Result<()> {
    for p in profiles {
        let rec = LocalizationRecord {
            realization,
            j: p.j,
            energy: p.energy,
            center: p.center,
            envelope: p.envelope,
            mu: p.mu,
            violation: p.violation,
        };
        serde_json::to_writer(&mut *out, &rec)?;
        writeln!(out)?;
    }
    Ok(())
}
