//! The random operator `H = A + α V` and its Neumann restrictions.
//!
//! `A` carries `-1` on every edge (so `(Aφ)(x) = -Σ_{y∼x} φ(y)`), `V` is the
//! diagonal multiplication by the i.i.d. potential `ω`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, VertexSet};
use crate::linalg::SymMatrix;
use crate::seed::{domain, rng_from_seed, stream_seed};

/// Single-site distribution family. All families are supported on
/// `[-ρ0, ρ0]` with a bounded density.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    /// Uniform on `[-ρ0, ρ0]`, density `1/(2ρ0)`.
    #[default]
    Uniform,
    /// Symmetric triangular on `[-ρ0, ρ0]`, peak density `1/ρ0`.
    Triangular,
}

impl Family {
    /// `‖ρ‖∞` for support half-width `rho0`.
    pub fn density_sup(self, rho0: f64) -> f64 {
        match self {
            Family::Uniform => 1.0 / (2.0 * rho0),
            Family::Triangular => 1.0 / rho0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Uniform => "uniform",
            Family::Triangular => "triangular",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Family> {
        match s {
            "uniform" => Ok(Family::Uniform),
            "triangular" => Ok(Family::Triangular),
            other => Err(Error::UnsupportedFamily(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub rho0: f64,
    pub density_sup: f64,
    pub family: Family,
}

impl DisorderSpec {
    pub fn new(family: Family, rho0: f64) -> Result<DisorderSpec> {
        let spec = DisorderSpec {
            rho0,
            density_sup: family.density_sup(rho0),
            family,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(rho0: f64) -> Result<DisorderSpec> {
        Self::new(Family::Uniform, rho0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho0.is_finite() && self.rho0 > 0.0) {
            return Err(Error::InvalidDisorder(format!(
                "rho0 must be positive and finite, got {}",
                self.rho0
            )));
        }
        // Any density on [-ρ0, ρ0] integrates to one, so its sup is ≥ 1/(2ρ0).
        if self.density_sup < 1.0 / (2.0 * self.rho0) * (1.0 - 1e-12) {
            return Err(Error::InvalidDisorder(format!(
                "density_sup {} below 1/(2 rho0)",
                self.density_sup
            )));
        }
        Ok(())
    }

    /// Sup of the density of the diagonal entries `α ω_x`, i.e. `‖ρ‖∞ / α`.
    pub fn effective_density(&self, alpha: f64) -> f64 {
        self.density_sup / alpha
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self.family {
            Family::Uniform => self.rho0 * (2.0 * rng.random::<f64>() - 1.0),
            Family::Triangular => {
                self.rho0 * (rng.random::<f64>() + rng.random::<f64>() - 1.0)
            }
        }
    }
}

/// One draw of the potential, reproducible from `(spec, seed, n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DisorderRealization {
    pub omega: Vec<f64>,
    pub alpha: f64,
    pub spec: DisorderSpec,
    pub seed: u64,
}

/// Persisted form of a realization. The potential itself is never stored;
/// it is regenerated from the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderRecord {
    pub seed: u64,
    pub alpha: f64,
    pub rho0: f64,
    pub family: Family,
    pub n: usize,
}

pub fn sample_disorder(
    n: usize,
    spec: DisorderSpec,
    alpha: f64,
    seed: u64,
) -> Result<DisorderRealization> {
    spec.validate()?;
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidDisorder(format!(
            "alpha must be finite and non-negative, got {alpha}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let omega = (0..n).map(|_| spec.draw(&mut rng)).collect();
    Ok(DisorderRealization {
        omega,
        alpha,
        spec,
        seed,
    })
}

impl DisorderRealization {
    pub fn n(&self) -> usize {
        self.omega.len()
    }

    pub fn record(&self) -> DisorderRecord {
        DisorderRecord {
            seed: self.seed,
            alpha: self.alpha,
            rho0: self.spec.rho0,
            family: self.spec.family,
            n: self.n(),
        }
    }

    pub fn from_record(rec: &DisorderRecord) -> Result<DisorderRealization> {
        let spec = DisorderSpec::new(rec.family, rec.rho0)?;
        sample_disorder(rec.n, spec, rec.alpha, rec.seed)
    }

    /// Diagonal entry `α ω_x`.
    #[inline]
    pub fn potential(&self, x: usize) -> f64 {
        self.alpha * self.omega[x]
    }
}

/// A reproducible stream of disorder realizations: realization `i` uses seed
/// `stream_seed(base_seed, DISORDER, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub spec: DisorderSpec,
    pub alpha: f64,
    pub base_seed: u64,
}

impl Ensemble {
    pub fn seed_of(&self, index: u64) -> u64 {
        stream_seed(self.base_seed, domain::DISORDER, index)
    }

    pub fn realization(&self, n: usize, index: u64) -> Result<DisorderRealization> {
        sample_disorder(n, self.spec, self.alpha, self.seed_of(index))
    }
}

/// A real symmetric operator on `ℓ²(support)`.
///
/// Local index `i` corresponds to global vertex `support.members()[i]`.
#[derive(Clone, Debug)]
pub struct Operator {
    matrix: SymMatrix,
    support: VertexSet,
    max_degree: usize,
    /// `α ρ0`, used for the spectral enclosure.
    disorder_scale: f64,
}

impl Operator {
    pub fn dim(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn support(&self) -> &VertexSet {
        &self.support
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix.get(i, j)
    }

    /// Local index of global vertex `x`, if it lies in the support.
    pub fn local_index(&self, x: usize) -> Option<usize> {
        self.support.position(x)
    }

    pub fn global_vertex(&self, i: usize) -> usize {
        self.support.members()[i]
    }

    /// `[-(K+1) - αρ0, (K+1) + αρ0]`.
    pub fn spectral_enclosure(&self) -> (f64, f64) {
        let r = self.max_degree as f64 + self.disorder_scale;
        (-r, r)
    }

    /// Scale used for relative numerical tolerances.
    pub fn scale(&self) -> f64 {
        (self.max_degree as f64 + self.disorder_scale).max(1.0)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.matrix.matvec(v)
    }

    /// Copy with `c` added to every diagonal entry.
    pub fn shifted(&self, c: f64) -> Operator {
        let mut op = self.clone();
        for i in 0..op.dim() {
            let v = op.matrix.get(i, i) + c;
            op.matrix.set(i, i, v);
        }
        op.disorder_scale += c.abs();
        op
    }
}

/// `H = A + α V` on the whole graph.
pub fn assemble(g: &Graph, w: &DisorderRealization) -> Result<Operator> {
    if w.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: w.n(),
        });
    }
    restrict_neumann(g, w, &g.all_vertices())
}

/// Restriction of `H` to `ℓ²(support)` keeping only edges internal to the
/// support. The result depends on `ω` only through its values on `support`.
pub fn restrict_neumann(
    g: &Graph,
    w: &DisorderRealization,
    support: &VertexSet,
) -> Result<Operator> {
    if w.n() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: w.n(),
        });
    }
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    if support.graph_id() != g.id() {
        return Err(Error::InvalidArgument(
            "support was taken from a different graph".into(),
        ));
    }
    let members = support.members();
    let m = members.len();
    let mut matrix = SymMatrix::zeros(m);
    for (i, &x) in members.iter().enumerate() {
        matrix.set(i, i, w.potential(x));
        for &y in g.neighbors(x) {
            if y > x {
                if let Some(j) = support.position(y) {
                    matrix.set(i, j, -1.0);
                    matrix.set(j, i, -1.0);
                }
            }
        }
    }
    Ok(Operator {
        matrix,
        support: support.clone(),
        max_degree: g.max_degree(),
        disorder_scale: w.alpha * w.spec.rho0,
    })
}
