//! The auxiliary Bernoulli process built from Neumann restrictions to balls,
//! and its comparison with the eigenvalue counting process.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::hamiltonian::{restrict_neumann, DisorderRealization};
use crate::localization::{boundary_mass, envelope_max, LocalizationProfile};
use crate::spectral::{eigendecompose, slice_sorted, EigenSystem, RescaledWindow};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamSource {
    Schedule,
    Manual,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxParams {
    /// Branching number `K`.
    pub k: usize,
    pub radius: usize,
    pub tau: f64,
    /// `6 √K τ`.
    pub epsilon: f64,
    /// Envelope budget compared against `X_n`.
    pub c: f64,
    pub source: ParamSource,
}

/// `6 √K τ`.
pub fn epsilon_of(k: usize, tau: f64) -> f64 {
    6.0 * (k as f64).sqrt() * tau
}

/// `τ² e^{(μ - ln K) R}`, the largest envelope budget compatible with the
/// lower comparison bound at rate `μ`.
pub fn secondary_constant(k: usize, tau: f64, mu: f64, radius: usize) -> f64 {
    tau * tau * ((mu - (k as f64).ln()) * radius as f64).exp()
}

impl AuxParams {
    pub fn manual(k: usize, radius: usize, tau: f64, c: f64) -> Result<AuxParams> {
        let p = AuxParams {
            k,
            radius,
            tau,
            epsilon: epsilon_of(k, tau),
            c,
            source: ParamSource::Manual,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::Precondition(format!("branching K = {} below 2", self.k)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!("tau {} must be positive", self.tau)));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "envelope budget {} must be positive",
                self.c
            )));
        }
        Ok(())
    }

    /// `1 / (6 √K n)`, the largest `τ` the comparison estimates allow.
    pub fn tau_max(k: usize, n: usize) -> f64 {
        1.0 / (6.0 * (k as f64).sqrt() * n as f64)
    }
}

/// Admissible interval `(1, 2 - ln K / (μ_s - ln K))` for the moment exponent.
pub fn exponent_range(k: usize, mu_s: f64) -> (f64, f64) {
    let lk = (k as f64).ln();
    (1.0, 2.0 - lk / (mu_s - lk))
}

fn check_schedule_inputs(k: usize, mu_s: f64, a: f64) -> Result<()> {
    if k < 2 {
        return Err(Error::Schedule(format!("branching K = {k} below 2")));
    }
    let lk = (k as f64).ln();
    if !(mu_s > 2.0 * lk) {
        return Err(Error::Precondition(format!(
            "mu_s = {mu_s} must exceed 2 ln K = {}",
            2.0 * lk
        )));
    }
    let (lo, hi) = exponent_range(k, mu_s);
    if !(a > lo && a < hi) {
        return Err(Error::Precondition(format!("exponent a = {a} outside ({lo}, {hi})")));
    }
    Ok(())
}

/// Radius, coupling tolerance and envelope budget from the optimized
/// schedule `R = ⌈(7a-6) ln n / ((a-1)μ_s + (18a-14) ln K)⌉`, `τ = K^{8R}/n³`,
/// `C = τ² e^{(μ_s - 2 ln K) R}`.
///
/// Fails with [`Error::Schedule`] when `τ > 1/(6√K n)`; the unchecked values
/// are available from [`schedule_params_unchecked`].
pub fn schedule_params(n: usize, k: usize, mu_s: f64, a: f64) -> Result<AuxParams> {
    let p = schedule_params_unchecked(n, k, mu_s, a)?;
    let tmax = AuxParams::tau_max(k, n);
    if p.tau > tmax {
        return Err(Error::Schedule(format!(
            "tau = {:.3e} exceeds 1/(6 sqrt(K) n) = {tmax:.3e} at n = {n}",
            p.tau
        )));
    }
    Ok(p)
}

pub fn schedule_params_unchecked(n: usize, k: usize, mu_s: f64, a: f64) -> Result<AuxParams> {
    check_schedule_inputs(k, mu_s, a)?;
    if n < 2 {
        return Err(Error::Schedule(format!("n = {n} too small")));
    }
    let lk = (k as f64).ln();
    let ln_n = (n as f64).ln();
    let radius = ((7.0 * a - 6.0) * ln_n / ((a - 1.0) * mu_s + (18.0 * a - 14.0) * lk)).ceil();
    let radius = radius.max(1.0) as usize;
    let tau = (8.0 * radius as f64 * lk - 3.0 * ln_n).exp();
    let c = tau * tau * ((mu_s - 2.0 * lk) * radius as f64).exp();
    Ok(AuxParams {
        k,
        radius,
        tau,
        epsilon: epsilon_of(k, tau),
        c,
        source: ParamSource::Schedule,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VertexRecord {
    pub vertex: usize,
    pub in_f: bool,
    pub xi: Option<f64>,
    pub boundary_mass: Option<f64>,
    /// `|ψ^{(x)}(x)|`, zero outside `F_n`.
    pub psi_center: f64,
    pub in_e: bool,
    /// `|C(x)|` for `x ∈ F_n`.
    pub cluster_size: Option<usize>,
    /// Two restricted eigenvalues in `I_n` closer than `ε` / at most `2ε`.
    pub local_double_strict: bool,
    pub local_double_wide: bool,
    /// Restricted eigenvalues inside `I_n`.
    pub local_count: usize,
    #[serde(skip)]
    pub psi: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxOutcome {
    pub vertices: Vec<VertexRecord>,
    pub eta: usize,
    pub f_count: usize,
    pub params: AuxParams,
    pub window: RescaledWindow,
    /// Whether cluster selection has run.
    pub selected: bool,
}

impl AuxOutcome {
    /// The Bernoulli field `b_x`.
    pub fn field(&self) -> Vec<bool> {
        self.vertices.iter().map(|v| v.in_e).collect()
    }

    /// `|C(x)|` for every selected vertex, ascending by vertex.
    pub fn cluster_sizes(&self) -> Vec<usize> {
        self.vertices
            .iter()
            .filter(|v| v.in_e)
            .map(|v| v.cluster_size.unwrap_or(1))
            .collect()
    }
}

/// Candidate data for one ball.
fn candidate(
    g: &Graph,
    w: &DisorderRealization,
    window: &RescaledWindow,
    p: &AuxParams,
    x: usize,
) -> Result<(VertexRecord, VertexSet)> {
    let ball = g.ball(x, p.radius)?;
    let h = restrict_neumann(g, w, &ball)?;
    let es = eigendecompose(&h)?;
    let range = es.indices_in(window.scaled());
    let local: Vec<f64> = es.values()[range.clone()].to_vec();
    let (strict, wide) = close_pair_flags(&local, p.epsilon);
    let tau2 = p.tau * p.tau;
    let mut best: Option<(usize, f64)> = None;
    for j in range.clone() {
        let m = boundary_mass(g, &ball, es.vector(j));
        if m <= tau2 && best.is_none_or(|(_, bm)| m < bm) {
            best = Some((j, m));
        }
    }
    let centre = ball.position(x).expect("ball contains its centre");
    let rec = match best {
        Some((j, m)) => VertexRecord {
            vertex: x,
            in_f: true,
            xi: Some(es.values()[j]),
            boundary_mass: Some(m),
            psi_center: es.vector(j)[centre].abs(),
            in_e: false,
            cluster_size: None,
            local_double_strict: strict,
            local_double_wide: wide,
            local_count: range.len(),
            psi: Some(es.vector(j).to_vec()),
        },
        None => VertexRecord {
            vertex: x,
            in_f: false,
            xi: None,
            boundary_mass: None,
            psi_center: 0.0,
            in_e: false,
            cluster_size: None,
            local_double_strict: strict,
            local_double_wide: wide,
            local_count: range.len(),
            psi: None,
        },
    };
    Ok((rec, ball))
}

/// `(some gap < ε, some gap ≤ 2ε)` among consecutive entries of ascending `v`.
fn close_pair_flags(v: &[f64], eps: f64) -> (bool, bool) {
    let mut strict = false;
    let mut wide = false;
    for w in v.windows(2) {
        let d = w[1] - w[0];
        strict |= d < eps;
        wide |= d <= 2.0 * eps;
    }
    (strict, wide)
}

/// Decompose every ball restriction and mark `F_n`.
pub fn build_candidates(
    g: &Graph,
    w: &DisorderRealization,
    window: &RescaledWindow,
    p: &AuxParams,
) -> Result<AuxOutcome> {
    p.validate()?;
    if w.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: w.n(),
        });
    }
    let vertices = (0..g.n())
        .into_par_iter()
        .map(|x| {
            candidate(g, w, window, p, x)
                .map(|(r, _)| r)
                .map_err(Error::at_vertex(x))
        })
        .collect::<Result<Vec<_>>>()?;
    let f_count = vertices.iter().filter(|v| v.in_f).count();
    Ok(AuxOutcome {
        vertices,
        eta: 0,
        f_count,
        params: *p,
        window: *window,
        selected: false,
    })
}

/// Strict order on `|ψ^{(x)}(x)|` with ties going to the lower index.
fn beats(a: &VertexRecord, b: &VertexRecord) -> bool {
    a.psi_center > b.psi_center || (a.psi_center == b.psi_center && a.vertex < b.vertex)
}

/// Form the clusters `C(x)` and select the cluster maxima `E_n`.
pub fn build_clusters_and_select(mut outcome: AuxOutcome, g: &Graph) -> Result<AuxOutcome> {
    let p = outcome.params;
    let tol = 2.0 * (p.k as f64).sqrt() * p.tau;
    let recs = &outcome.vertices;
    let decisions: Vec<(bool, Option<usize>)> = recs
        .iter()
        .map(|r| {
            let Some(xi) = r.xi else {
                return Ok((false, None));
            };
            let nbhd = g.ball(r.vertex, 2 * p.radius)?;
            let mut size = 0;
            let mut maximal = true;
            for &y in nbhd.members() {
                let other = &recs[y];
                let Some(xj) = other.xi else { continue };
                if (xi - xj).abs() <= tol {
                    size += 1;
                    if y != r.vertex && !beats(r, other) {
                        maximal = false;
                    }
                }
            }
            Ok((maximal, Some(size)))
        })
        .collect::<Result<_>>()?;
    for (r, (sel, size)) in outcome.vertices.iter_mut().zip(decisions) {
        r.in_e = sel;
        r.cluster_size = size;
    }
    outcome.eta = outcome.vertices.iter().filter(|v| v.in_e).count();
    outcome.selected = true;
    Ok(outcome)
}

/// Candidates followed by cluster selection.
pub fn auxiliary_process(
    g: &Graph,
    w: &DisorderRealization,
    window: &RescaledWindow,
    p: &AuxParams,
) -> Result<AuxOutcome> {
    build_clusters_and_select(build_candidates(g, w, window, p)?, g)
}

/// The Bernoulli variable `b_x` alone, computed from the balls within
/// `2R` of `x`.
pub fn local_indicator(
    g: &Graph,
    w: &DisorderRealization,
    window: &RescaledWindow,
    p: &AuxParams,
    x: usize,
) -> Result<bool> {
    let (rx, _) = candidate(g, w, window, p, x)?;
    let Some(xi) = rx.xi else { return Ok(false) };
    let tol = 2.0 * (p.k as f64).sqrt() * p.tau;
    for &y in g.ball(x, 2 * p.radius)?.members() {
        if y == x {
            continue;
        }
        let (ry, _) = candidate(g, w, window, p, y)?;
        if let Some(xj) = ry.xi {
            if (xi - xj).abs() <= tol && !beats(&rx, &ry) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFlags {
    /// `N(I_n^e) = 0`.
    pub endpoint_clear: bool,
    /// No two eigenvalues of `H` in `I_n` at distance `< ε`.
    pub no_double_strict: bool,
    /// No two eigenvalues of `H` in `I_n` at distance `≤ 2ε`.
    pub no_double: bool,
    /// No restricted spectrum has two eigenvalues in `I_n` within `2ε`.
    pub local_no_double: bool,
    /// `X_n ≤ C_n`.
    pub envelope_ok: bool,
    /// No two candidates share the same `|ψ^{(x)}(x)|`.
    pub no_ties: bool,
}

impl EventFlags {
    /// `Ω_n`.
    pub fn omega(&self) -> bool {
        self.endpoint_clear && self.no_double && self.no_ties
    }

    /// `Ω'_n`.
    pub fn omega_prime(&self) -> bool {
        self.omega() && self.envelope_ok && self.local_no_double
    }
}

/// Event flags of one realization. `profiles` are the localization profiles
/// of the eigenvectors of `H` with eigenvalues in `I_n`.
pub fn detect_events(
    values: &[f64],
    outcome: &AuxOutcome,
    window: &RescaledWindow,
    p: &AuxParams,
    profiles: &[LocalizationProfile],
) -> EventFlags {
    let inside = slice_sorted(values, window.scaled());
    let (strict, wide) = close_pair_flags(inside, p.epsilon);
    let mut keys: Vec<f64> = outcome
        .vertices
        .iter()
        .filter(|v| v.in_f)
        .map(|v| v.psi_center)
        .collect();
    keys.sort_by(f64::total_cmp);
    EventFlags {
        endpoint_clear: window.count_endpoint_set(values) == 0,
        no_double_strict: !strict,
        no_double: !wide,
        local_no_double: outcome.vertices.iter().all(|v| !v.local_double_wide),
        envelope_ok: envelope_max(profiles) <= p.c,
        no_ties: keys.windows(2).all(|w| w[0] != w[1]),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Comparison {
    pub eta: usize,
    pub nu: usize,
    pub diff: i64,
    pub flags: EventFlags,
    /// `η ≤ ν` required and violated.
    pub upper_breach: bool,
    /// `η = ν` required and violated.
    pub equality_breach: bool,
}

impl Comparison {
    pub fn breach(&self) -> bool {
        self.upper_breach || self.equality_breach
    }
}

pub fn compare_eta_nu(
    outcome: &AuxOutcome,
    values: &[f64],
    window: &RescaledWindow,
    flags: EventFlags,
) -> Comparison {
    let eta = outcome.eta;
    let nu = slice_sorted(values, window.scaled()).len();
    Comparison {
        eta,
        nu,
        diff: eta as i64 - nu as i64,
        flags,
        upper_breach: flags.omega() && eta > nu,
        equality_breach: flags.omega_prime() && eta != nu,
    }
}

/// Full state of a realization whose comparison failed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BreachDump {
    pub seed: u64,
    pub comparison: Comparison,
    pub params: AuxParams,
    pub window: RescaledWindow,
    pub eigenvalues_in_window: Vec<f64>,
    pub vertices: Vec<VertexRecord>,
}

pub fn breach_dump(
    seed: u64,
    comparison: Comparison,
    outcome: &AuxOutcome,
    values: &[f64],
) -> BreachDump {
    let [l, r] = outcome.window.endpoint_intervals();
    let lo = l.lo.min(outcome.window.scaled().lo);
    let hi = r.hi.max(outcome.window.scaled().hi);
    BreachDump {
        seed,
        comparison,
        params: outcome.params,
        window: outcome.window,
        eigenvalues_in_window: values.iter().copied().filter(|&v| lo <= v && v < hi).collect(),
        vertices: outcome.vertices.clone(),
    }
}

/// Empirical covariance with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceEstimate {
    pub x: usize,
    pub y: usize,
    pub samples: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub mean_xy: f64,
    pub cov: f64,
    pub stderr: f64,
    /// `|cov| ≤ 3 stderr`.
    pub holds: bool,
}

pub const MIN_PROBE_SAMPLES: usize = 100;

/// Covariance of `(b_x, b_y)` across `fields` for a pair beyond `6R`.
pub fn independence_probe(
    fields: &[Vec<bool>],
    g: &Graph,
    p: &AuxParams,
    x: usize,
    y: usize,
) -> Result<CovarianceEstimate> {
    let d = g.distance(x, y)?;
    if d <= 6 * p.radius {
        return Err(Error::Precondition(format!(
            "pair ({x}, {y}) at distance {d} is within 6R = {}",
            6 * p.radius
        )));
    }
    if fields.len() < MIN_PROBE_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_PROBE_SAMPLES,
            got: fields.len(),
        });
    }
    let m = fields.len() as f64;
    let bx: Vec<f64> = fields.iter().map(|f| f[x] as u8 as f64).collect();
    let by: Vec<f64> = fields.iter().map(|f| f[y] as u8 as f64).collect();
    let mx = bx.iter().sum::<f64>() / m;
    let my = by.iter().sum::<f64>() / m;
    let mxy = bx.iter().zip(&by).map(|(a, b)| a * b).sum::<f64>() / m;
    let z: Vec<f64> = bx.iter().zip(&by).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = z.iter().sum::<f64>() / (m - 1.0);
    let zbar = z.iter().sum::<f64>() / m;
    let var = z.iter().map(|v| (v - zbar).powi(2)).sum::<f64>() / (m - 1.0);
    let stderr = (var / m).sqrt();
    Ok(CovarianceEstimate {
        x,
        y,
        samples: fields.len(),
        mean_x: mx,
        mean_y: my,
        mean_xy: mxy,
        cov,
        stderr,
        holds: cov.abs() <= 3.0 * stderr,
    })
}

/// `18 ‖ρ‖²∞ (|I| + 6√K n τ)² K^{2R} n^{-2}`, bounding `E[b_x b_y]` for `x ≠ y`.
/// `density` is the sup of the density of the diagonal entries.
pub fn locminami_bound(density: f64, window_len: f64, k: usize, n: usize, tau: f64, radius: usize) -> f64 {
    let kf = k as f64;
    let nf = n as f64;
    18.0 * density * density
        * (window_len + 6.0 * kf.sqrt() * nf * tau).powi(2)
        * kf.powi(2 * radius as i32)
        / (nf * nf)
}

/// JSON-lines record of one realization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuxRecord {
    pub seed: u64,
    pub eta: usize,
    pub nu: usize,
    pub flags: EventFlags,
    pub f_size: usize,
    pub cluster_sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub vertices: Option<Vec<VertexRecord>>,
}

impl AuxRecord {
    pub fn new(seed: u64, outcome: &AuxOutcome, cmp: &Comparison, verbose: bool) -> AuxRecord {
        AuxRecord {
            seed,
            eta: cmp.eta,
            nu: cmp.nu,
            flags: cmp.flags,
            f_size: outcome.f_count,
            cluster_sizes: outcome.cluster_sizes(),
            vertices: verbose.then(|| outcome.vertices.clone()),
        }
    }
}

pub fn write_aux_jsonl<W: Write>(out: &mut W, records: &[AuxRecord]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        writeln!(out)?;
    }
    Ok(())
}

/// Profiles of the eigenvectors of `H` inside `I_n`.
pub fn window_profiles(
    es: &EigenSystem,
    g: &Graph,
    window: &RescaledWindow,
    mu: f64,
) -> Result<Vec<LocalizationProfile>> {
    crate::localization::localization_profiles(es, g, window.scaled(), mu)
}
