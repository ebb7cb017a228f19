//! Chen–Stein bound for locally dependent Bernoulli fields, Poisson
//! reference quantities and distances to the Poisson law.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Marginal and pair expectations of a Bernoulli field `(b_x)` on a graph.
#[derive(Clone, Debug, PartialEq)]
pub struct BernoulliFieldStats {
    pub marginals: Vec<f64>,
    /// `E[b_x b_y]` keyed by `(x, y)` with `x < y` and `d(x, y) ≤ ϱ`.
    pub pairs: BTreeMap<(usize, usize), f64>,
    pub radius: usize,
    pub samples: usize,
    pub lambda_bar: f64,
}

impl BernoulliFieldStats {
    /// Empirical frequencies from sampled fields.
    pub fn from_samples(fields: &[Vec<bool>], g: &Graph, radius: usize) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InsufficientSamples { needed: 1, got: 0 });
        }
        let n = g.n();
        if let Some(f) = fields.iter().find(|f| f.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: f.len(),
            });
        }
        let m = fields.len() as f64;
        let mut counts = vec![0usize; n];
        for f in fields {
            for (c, &b) in counts.iter_mut().zip(f) {
                *c += b as usize;
            }
        }
        let marginals: Vec<f64> = counts.iter().map(|&c| c as f64 / m).collect();
        let mut pairs = BTreeMap::new();
        for x in 0..n {
            for &y in g.ball(x, radius)?.members() {
                if y > x {
                    let both = if counts[x] == 0 || counts[y] == 0 {
                        0
                    } else {
                        fields.iter().filter(|f| f[x] && f[y]).count()
                    };
                    pairs.insert((x, y), both as f64 / m);
                }
            }
        }
        Ok(Self::assemble(marginals, pairs, radius, fields.len()))
    }

    /// Exact statistics of an independent field with the given marginals.
    pub fn independent(marginals: Vec<f64>, g: &Graph, radius: usize) -> Result<Self> {
        if marginals.len() != g.n() {
            return Err(Error::DimensionMismatch {
                expected: g.n(),
                got: marginals.len(),
            });
        }
        if marginals.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::InvalidArgument("marginals must lie in [0, 1]".into()));
        }
        let mut pairs = BTreeMap::new();
        for x in 0..g.n() {
            for &y in g.ball(x, radius)?.members() {
                if y > x {
                    pairs.insert((x, y), marginals[x] * marginals[y]);
                }
            }
        }
        Ok(Self::assemble(marginals, pairs, radius, 0))
    }

    pub fn assemble(
        marginals: Vec<f64>,
        pairs: BTreeMap<(usize, usize), f64>,
        radius: usize,
        samples: usize,
    ) -> Self {
        let lambda_bar = marginals.iter().sum();
        BernoulliFieldStats {
            marginals,
            pairs,
            radius,
            samples,
            lambda_bar,
        }
    }

    pub fn pair(&self, x: usize, y: usize) -> Option<f64> {
        self.pairs.get(&(x.min(y), x.max(y))).copied()
    }
}

/// `Σ_x Σ_{y ∈ B_ϱ(x)∖{x}} E[b_x b_y] + Σ_x Σ_{y ∈ B_ϱ(x)} E[b_x] E[b_y]`.
pub fn chen_stein_bound(stats: &BernoulliFieldStats, g: &Graph) -> Result<f64> {
    if stats.marginals.len() != g.n() {
        return Err(Error::DimensionMismatch {
            expected: g.n(),
            got: stats.marginals.len(),
        });
    }
    let p = &stats.marginals;
    let mut pair_sum = 0.0;
    let mut product_sum = 0.0;
    for x in 0..g.n() {
        for &y in g.ball(x, stats.radius)?.members() {
            product_sum += p[x] * p[y];
            if y != x {
                pair_sum += stats.pair(x, y).ok_or(Error::MissingPair { x, y })?;
            }
        }
    }
    Ok(pair_sum + product_sum)
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} = {v} must be finite and nonnegative")))
    }
}

/// `E[e^{-t P_λ}] = e^{-λ(1 - e^{-t})}`.
pub fn poisson_laplace(lambda: f64, t: f64) -> Result<f64> {
    check_nonneg("lambda", lambda)?;
    if !(t >= 0.0) {
        return Err(Error::InvalidArgument(format!("t = {t} must be nonnegative")));
    }
    Ok((-lambda * -(-t).exp_m1()).exp())
}

fn mean_stderr(v: impl ExactSizeIterator<Item = f64> + Clone) -> (f64, f64) {
    let m = v.len() as f64;
    let mean = v.clone().sum::<f64>() / m;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

/// Sample mean of `e^{-t · count}` with its standard error.
pub fn empirical_laplace(samples: &[u64], t: f64) -> Result<(f64, f64)> {
    if samples.is_empty() {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    check_nonneg("t", t)?;
    Ok(mean_stderr(samples.iter().map(|&c| (-t * c as f64).exp())))
}

/// `t ∈ {0, 0.1, …, 2.0}`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 10.0).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceRow {
    pub t: f64,
    pub empirical: f64,
    pub reference: f64,
    pub gap: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaplaceGap {
    /// Largest `|empirical - reference|` over the grid.
    pub sup: f64,
    /// Largest standard error over the grid.
    pub worst_stderr: f64,
    pub rows: Vec<LaplaceRow>,
}

pub fn laplace_gap(samples: &[u64], lambda_ref: f64, t_grid: &[f64]) -> Result<LaplaceGap> {
    if t_grid.is_empty() {
        return Err(Error::InvalidArgument("empty t grid".into()));
    }
    let rows = t_grid
        .iter()
        .map(|&t| {
            let (empirical, stderr) = empirical_laplace(samples, t)?;
            let reference = poisson_laplace(lambda_ref, t)?;
            Ok(LaplaceRow {
                t,
                empirical,
                reference,
                gap: (empirical - reference).abs(),
                stderr,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LaplaceGap {
        sup: rows.iter().map(|r| r.gap).fold(0.0, f64::max),
        worst_stderr: rows.iter().map(|r| r.stderr).fold(0.0, f64::max),
        rows,
    })
}

/// `(1/2) Σ_k |p̂(k) - e^{-λ} λ^k / k!|`, with `histogram[k]` the number of
/// samples equal to `k`. The Poisson tail is cut once its cumulative mass
/// exceeds `1 - 10^{-12}`.
pub fn tv_to_poisson(histogram: &[u64], lambda: f64) -> Result<f64> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::InsufficientSamples { needed: 1, got: 0 });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda = {lambda} must be positive")));
    }
    let ln_l = lambda.ln();
    let mut log_pmf = -lambda;
    let mut cumulative = 0.0;
    let mut sum = 0.0;
    let mut k = 0usize;
    loop {
        let pmf = log_pmf.exp();
        let emp = histogram.get(k).map_or(0.0, |&c| c as f64 / total as f64);
        sum += (emp - pmf).abs();
        cumulative += pmf;
        k += 1;
        // The second test guards against rounding keeping the sum below target.
        let far = k as f64 > lambda + 40.0 * lambda.sqrt() + 100.0;
        if k >= histogram.len() && (cumulative > 1.0 - 1e-12 || far) {
            break;
        }
        log_pmf += ln_l - (k as f64).ln();
    }
    Ok((0.5 * sum).min(1.0))
}

/// Counts `histogram[k] = #{i : samples[i] = k}`.
pub fn histogram(samples: &[u64]) -> Vec<u64> {
    let len = samples.iter().max().map_or(0, |&m| m as usize + 1);
    let mut h = vec![0u64; len];
    for &s in samples {
        h[s as usize] += 1;
    }
    h
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub lambda_bar: f64,
    pub bound: f64,
    pub grid: Vec<LaplaceRow>,
}

impl BoundReport {
    /// Grid points where the gap exceeds the bound by more than three
    /// standard errors.
    pub fn violations(&self) -> Vec<f64> {
        self.grid
            .iter()
            .filter(|r| r.gap > self.bound + 3.0 * r.stderr)
            .map(|r| r.t)
            .collect()
    }
}

/// Compare the sum of a sampled field with the Poisson law of mean `λ̄`.
pub fn bound_report(
    fields: &[Vec<bool>],
    g: &Graph,
    radius: usize,
    t_grid: &[f64],
) -> Result<BoundReport> {
    let stats = BernoulliFieldStats::from_samples(fields, g, radius)?;
    let bound = chen_stein_bound(&stats, g)?;
    let counts: Vec<u64> = fields
        .iter()
        .map(|f| f.iter().filter(|&&b| b).count() as u64)
        .collect();
    let gap = laplace_gap(&counts, stats.lambda_bar, t_grid)?;
    Ok(BoundReport {
        lambda_bar: stats.lambda_bar,
        bound,
        grid: gap.rows,
    })
}

/// Synthetic Bernoulli fields with a known dependence radius.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SyntheticField {
    /// Independent `b_x ~ Bernoulli(p)`.
    Independent { p: f64 },
    /// `b_x = max_{y ∈ B_1(x)} c_y` with independent `c_y ~ Bernoulli(q)`.
    /// Variables at distance greater than 2 are independent.
    NeighborOr { q: f64 },
}

impl SyntheticField {
    pub fn dependence_radius(&self) -> usize {
        match self {
            SyntheticField::Independent { .. } => 0,
            SyntheticField::NeighborOr { .. } => 2,
        }
    }

    pub fn sample<R: Rng>(&self, g: &Graph, rng: &mut R) -> Vec<bool> {
        match *self {
            SyntheticField::Independent { p } => (0..g.n()).map(|_| rng.random_bool(p)).collect(),
            SyntheticField::NeighborOr { q } => {
                let c: Vec<bool> = (0..g.n()).map(|_| rng.random_bool(q)).collect();
                (0..g.n())
                    .map(|x| c[x] || g.neighbors(x).iter().any(|&y| c[y]))
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from_seed;
    use rand_distr::{Distribution, Poisson};

    fn poisson_samples(lambda: f64, m: usize, seed: u64) -> Vec<u64> {
        let d = Poisson::new(lambda).unwrap();
        let mut rng = rng_from_seed(seed);
        (0..m).map(|_| d.sample(&mut rng) as u64).collect()
    }

    #[test]
    fn chen_stein_closed_forms() {
        let g = Graph::random_regular(100, 3, 4).unwrap();
        let p = 0.05;
        let s1 = BernoulliFieldStats::independent(vec![p; 100], &g, 1).unwrap();
        // 100·3·p² pair terms + 100·4·p² product terms.
        assert!((chen_stein_bound(&s1, &g).unwrap() - 1.75).abs() < 1e-12);
        let s0 = BernoulliFieldStats::independent(vec![p; 100], &g, 0).unwrap();
        assert!((chen_stein_bound(&s0, &g).unwrap() - 100.0 * p * p).abs() < 1e-12);
        let z = BernoulliFieldStats::independent(vec![0.0; 100], &g, 2).unwrap();
        assert_eq!(chen_stein_bound(&z, &g).unwrap(), 0.0);
    }

    #[test]
    fn missing_pairs_are_reported() {
        let g = Graph::cycle(8).unwrap();
        let mut s = BernoulliFieldStats::independent(vec![0.1; 8], &g, 1).unwrap();
        s.pairs.remove(&(2, 3));
        assert!(matches!(
            chen_stein_bound(&s, &g),
            Err(Error::MissingPair { .. })
        ));
    }

    #[test]
    fn laplace_closed_forms() {
        assert_eq!(poisson_laplace(3.0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_laplace(0.0, 7.0).unwrap(), 1.0);
        assert!((poisson_laplace(1.0, 50.0).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(poisson_laplace(-1.0, 1.0).is_err());
        assert!(poisson_laplace(1.0, -1.0).is_err());
    }

    #[test]
    fn empirical_laplace_arithmetic() {
        assert_eq!(empirical_laplace(&[0, 0, 0], 1.3).unwrap(), (1.0, 0.0));
        let (m, _) = empirical_laplace(&[0, 1], 2f64.ln()).unwrap();
        assert!((m - 0.75).abs() < 1e-15);
        assert!(empirical_laplace(&[], 1.0).is_err());
    }

    #[test]
    fn empirical_laplace_matches_poisson_sampler() {
        let s = poisson_samples(2.0, 100_000, 1);
        let (m, se) = empirical_laplace(&s, 1.0).unwrap();
        assert!((m - poisson_laplace(2.0, 1.0).unwrap()).abs() < 3.0 * se);
    }

    #[test]
    fn gap_cases() {
        let gap = laplace_gap(&[0, 0, 0], 0.0, &default_t_grid()).unwrap();
        assert_eq!(gap.sup, 0.0);
        // Counts ≡ 1 against λ = 1; maximized over the grid at t = 2 by a
        // separate numerical evaluation.
        let gap = laplace_gap(&[1; 10], 1.0, &default_t_grid()).unwrap();
        assert!((gap.sup - 0.2858574645869226).abs() < 1e-12);
        let fine: Vec<f64> = (0..=4000).map(|i| i as f64 / 100.0).collect();
        let gap = laplace_gap(&[1; 10], 1.0, &fine).unwrap();
        assert!(gap.sup <= (-1f64).exp() + 1e-15 && gap.sup > 0.36);
        assert!(laplace_gap(&[1], 1.0, &[]).is_err());
        assert_eq!(default_t_grid().len(), 21);
    }

    #[test]
    fn gap_for_poisson_samples_is_noise() {
        let s = poisson_samples(1.5, 50_000, 2);
        let gap = laplace_gap(&s, 1.5, &default_t_grid()).unwrap();
        for r in &gap.rows {
            assert!(r.gap <= 3.0 * r.stderr + 1e-15, "{r:?}");
        }
    }

    #[test]
    fn tv_cases() {
        let tv = tv_to_poisson(&[10], 1.0).unwrap();
        assert!((tv - (1.0 - (-1f64).exp())).abs() < 1e-12);
        assert!(tv_to_poisson(&[5], 1e-300).unwrap() < 1e-12);
        assert!(tv_to_poisson(&[], 1.0).is_err());
        assert!(tv_to_poisson(&[1], 0.0).is_err());
        let s = poisson_samples(3.0, 1_000_000, 3);
        assert!(tv_to_poisson(&histogram(&s), 3.0).unwrap() <= 0.005);
    }

    #[test]
    fn independent_field_end_to_end() {
        let g = Graph::random_regular(60, 3, 1).unwrap();
        let field = SyntheticField::Independent { p: 0.03 };
        let mut rng = rng_from_seed(5);
        let fields: Vec<_> = (0..5000).map(|_| field.sample(&g, &mut rng)).collect();
        let report = bound_report(&fields, &g, 0, &default_t_grid()).unwrap();
        assert!(report.violations().is_empty(), "{report:?}");
        assert!((report.lambda_bar - 1.8).abs() < 0.1);
    }
}
