use serde::{Deserialize, Serialize};

use crate::auxiliary::{exponent_range, schedule_params_unchecked};
use crate::error::{Error, Result};

/// Fewest realizations accepted by the Wegner and Minami checks.
pub const MIN_CHECK_SAMPLES: usize = 100;
/// Fewest pooled gaps accepted by [`gap_statistics`].
pub const MIN_GAPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WegnerReport {
    pub length: f64,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
    /// `‖ρ‖∞ n |J|`.
    pub bound: f64,
    pub ratio: f64,
    pub ratio_stderr: f64,
    /// `ratio ≤ 1 + 3 ratio_stderr`.
    pub holds: bool,
}

/// `E[N(J)] ≤ ‖ρ‖∞ n |J|` from per-realization counts.
pub fn wegner_check(counts: &[usize], density: f64, n: usize, length: f64) -> Result<WegnerReport> {
    if counts.len() < MIN_CHECK_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_CHECK_SAMPLES,
            got: counts.len(),
        });
    }
    let m = counts.len() as f64;
    let mean = counts.iter().sum::<usize>() as f64 / m;
    let var = counts.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (m - 1.0);
    let stderr = (var / m).sqrt();
    let bound = density * n as f64 * length;
    let ratio = mean / bound;
    let ratio_stderr = stderr / bound;
    Ok(WegnerReport {
        length,
        samples: counts.len(),
        mean,
        stderr,
        bound,
        ratio,
        ratio_stderr,
        holds: ratio <= 1.0 + 3.0 * ratio_stderr,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinamiReport {
    pub length: f64,
    pub k: usize,
    pub samples: usize,
    pub probability: f64,
    pub stderr: f64,
    /// `(‖ρ‖∞ n |J|)^k / k!`.
    pub bound: f64,
    /// The bound exceeds one and says nothing.
    pub vacuous: bool,
    /// `None` when vacuous.
    pub holds: Option<bool>,
}

/// `P[N(J) ≥ k] ≤ (‖ρ‖∞ n |J|)^k / k!`.
pub fn minami_check(
    counts: &[usize],
    density: f64,
    n: usize,
    length: f64,
    k: usize,
) -> Result<MinamiReport> {
    if k == 0 {
        return Err(Error::InvalidArgument("Minami order must be at least 1".into()));
    }
    if counts.len() < MIN_CHECK_SAMPLES {
        return Err(Error::InsufficientSamples {
            needed: MIN_CHECK_SAMPLES,
            got: counts.len(),
        });
    }
    let m = counts.len() as f64;
    let p = counts.iter().filter(|&&c| c >= k).count() as f64 / m;
    let stderr = (p * (1.0 - p) / m).sqrt();
    let base = density * n as f64 * length;
    let bound = (1..=k).fold(1.0, |acc, i| acc * base / i as f64);
    let vacuous = bound > 1.0;
    Ok(MinamiReport {
        length,
        k,
        samples: counts.len(),
        probability: p,
        stderr,
        bound,
        vacuous,
        holds: (!vacuous).then_some(p <= bound + 3.0 * stderr),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Count expected under the unit exponential law.
    pub expected: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapStatistics {
    pub gaps: usize,
    pub mean_raw_gap: f64,
    /// Kolmogorov–Smirnov distance to `Exp(1)` after normalizing to unit mean.
    pub ks: f64,
    pub ratios: usize,
    pub spacing_ratio: f64,
    pub histogram: Vec<HistogramBin>,
}

const BIN_WIDTH: f64 = 0.25;
const BINS: usize = 20;

/// Consecutive spacings of each sorted point set, pooled and normalized to
/// unit mean. Each set holds only points strictly inside the window.
pub fn gap_statistics(point_sets: &[Vec<f64>]) -> Result<GapStatistics> {
    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    for set in point_sets {
        let mut pts = set.clone();
        pts.sort_by(f64::total_cmp);
        let s: Vec<f64> = pts.windows(2).map(|w| w[1] - w[0]).collect();
        ratios.extend(s.windows(2).filter_map(|w| {
            let hi = w[0].max(w[1]);
            (hi > 0.0).then(|| w[0].min(w[1]) / hi)
        }));
        gaps.extend(s);
    }
    if gaps.len() < MIN_GAPS {
        return Err(Error::InsufficientSamples {
            needed: MIN_GAPS,
            got: gaps.len(),
        });
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::DegenerateDesign("all gaps vanish".into()));
    }
    let mut unit: Vec<f64> = gaps.iter().map(|g| g / mean).collect();
    unit.sort_by(f64::total_cmp);
    let m = unit.len() as f64;
    let mut histogram: Vec<HistogramBin> = (0..=BINS)
        .map(|b| {
            let lo = b as f64 * BIN_WIDTH;
            let hi = if b == BINS { f64::INFINITY } else { lo + BIN_WIDTH };
            HistogramBin {
                lo,
                hi,
                count: 0,
                expected: m * ((-lo).exp() - (-hi).exp()),
            }
        })
        .collect();
    for &u in &unit {
        histogram[((u / BIN_WIDTH) as usize).min(BINS)].count += 1;
    }
    Ok(GapStatistics {
        gaps: gaps.len(),
        mean_raw_gap: mean,
        ks: ks_exponential(&unit),
        ratios: ratios.len(),
        spacing_ratio: if ratios.is_empty() {
            f64::NAN
        } else {
            ratios.iter().sum::<f64>() / ratios.len() as f64
        },
        histogram,
    })
}

/// KS distance of sorted samples to the unit exponential law.
pub fn ks_exponential(sorted: &[f64]) -> f64 {
    let m = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = 1.0 - (-x.max(0.0)).exp();
            (f - i as f64 / m).max((i + 1) as f64 / m - f)
        })
        .fold(0.0, f64::max)
}

/// Mean of `min(s_i, s_{i+1}) / max(s_i, s_{i+1})` over consecutive spacings.
pub fn spacing_ratio(sorted_levels: &[f64]) -> Option<f64> {
    let s: Vec<f64> = sorted_levels.windows(2).map(|w| w[1] - w[0]).collect();
    let r: Vec<f64> = s
        .windows(2)
        .filter_map(|w| {
            let hi = w[0].max(w[1]);
            (hi > 0.0).then(|| w[0].min(w[1]) / hi)
        })
        .collect();
    (!r.is_empty()).then(|| r.iter().sum::<f64>() / r.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBudget {
    pub n: usize,
    pub radius: usize,
    pub tau: f64,
    /// `K^{8R}/n`, `τ n²`, `τ^{-4(a-1)/a} e^{-2(μ_s - 2 ln K) R (a-1)/a} n`.
    pub terms: [f64; 3],
    pub max: f64,
    /// `(μ_s/ln K - 34)(a - 1)/a`.
    pub feasibility: f64,
    /// `feasibility > 4`, under which every term vanishes as `n` grows.
    pub feasible: bool,
}

/// The three error terms of the comparison under the parameter schedule.
pub fn error_budget(n: usize, k: usize, mu_s: f64, a: f64) -> Result<ErrorBudget> {
    let lk = (k as f64).ln();
    let feasibility = (mu_s / lk - 34.0) * (a - 1.0) / a;
    let (lo, hi) = exponent_range(k, mu_s);
    if !(lo < a && a < hi) {
        return Err(Error::Schedule(format!("exponent {a} outside ({lo}, {hi})")));
    }
    let p = schedule_params_unchecked(n, k, mu_s, a)?;
    let nf = n as f64;
    let r = p.radius as f64;
    let q = (a - 1.0) / a;
    let terms = [
        (k as f64).powf(8.0 * r) / nf,
        p.tau * nf * nf,
        p.tau.powf(-4.0 * q) * (-2.0 * (mu_s - 2.0 * lk) * r * q).exp() * nf,
    ];
    Ok(ErrorBudget {
        n,
        radius: p.radius,
        tau: p.tau,
        terms,
        max: terms.iter().copied().fold(0.0, f64::max),
        feasibility,
        feasible: feasibility > 4.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn wegner_requires_samples_and_tracks_mean() {
        assert!(matches!(
            wegner_check(&[1; 99], 1.0, 10, 0.1),
            Err(Error::InsufficientSamples { .. })
        ));
        let r = wegner_check(&[1; 100], 0.5, 10, 0.1).unwrap();
        assert_eq!(r.bound, 0.5);
        assert_eq!(r.ratio, 2.0);
        assert!(!r.holds);
        let r = wegner_check(&[0; 100], 0.5, 10, 0.1).unwrap();
        assert!(r.holds);
    }

    #[test]
    fn minami_order_one_is_wegner_bound() {
        let counts: Vec<usize> = (0..200).map(|i| i % 3).collect();
        let m = minami_check(&counts, 0.3, 20, 0.05, 1).unwrap();
        let w = wegner_check(&counts, 0.3, 20, 0.05).unwrap();
        assert_eq!(m.bound, w.bound);
        assert!((m.probability - 133.0 / 200.0).abs() < 1e-15);
        let v = minami_check(&counts, 10.0, 20, 0.05, 2).unwrap();
        assert!(v.vacuous);
        assert_eq!(v.holds, None);
        assert!(minami_check(&counts, 1.0, 1, 1.0, 0).is_err());
    }

    #[test]
    fn picket_fence_ratio_is_one() {
        let sets: Vec<Vec<f64>> = (0..20).map(|_| (0..100).map(|i| i as f64 * 0.7).collect()).collect();
        let g = gap_statistics(&sets).unwrap();
        assert_eq!(g.gaps, 20 * 99);
        assert!((g.spacing_ratio - 1.0).abs() < 1e-12);
        assert!((spacing_ratio(&sets[0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(g.ks > 0.5);
    }

    #[test]
    fn exponential_gaps_pass_ks() {
        let mut rng = crate::seed::rng_from_seed(11);
        let set: Vec<f64> = (0..200_000)
            .scan(0.0, |acc, _| {
                *acc += -(1.0 - rng.random::<f64>()).ln();
                Some(*acc)
            })
            .collect();
        let g = gap_statistics(&[set]).unwrap();
        assert!(g.ks <= 0.01, "ks {}", g.ks);
        let total: usize = g.histogram.iter().map(|b| b.count).sum();
        assert_eq!(total, g.gaps);
        assert!((g.histogram[0].count as f64 / g.histogram[0].expected - 1.0).abs() < 0.02);
    }

    #[test]
    fn uniform_levels_match_poisson_ratio() {
        let mut rng = crate::seed::rng_from_seed(5);
        let sets: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..500).map(|_| rng.random::<f64>()).collect())
            .collect();
        let g = gap_statistics(&sets).unwrap();
        let target = 2.0 * 2f64.ln() - 1.0;
        assert!((g.spacing_ratio - target).abs() < 0.01, "{}", g.spacing_ratio);
    }

    #[test]
    fn too_few_gaps() {
        assert!(matches!(
            gap_statistics(&[vec![0.0, 1.0, 2.0]]),
            Err(Error::InsufficientSamples { needed: 1000, got: 2 })
        ));
    }

    #[test]
    fn budget_oracle() {
        // Independent high-precision evaluation.
        let b = error_budget(1_000_000, 2, 43.0 * 2f64.ln(), 1.9).unwrap();
        assert_eq!(b.radius, 3);
        assert!((b.terms[0] / 16.777216 - 1.0).abs() < 1e-9);
        assert!((b.terms[1] / 16.777216 - 1.0).abs() < 1e-9);
        assert!((b.terms[2] / 2.17973581615e-9 - 1.0).abs() < 1e-8);
        assert!((b.feasibility - 4.2631578947).abs() < 1e-9);
        assert!(b.feasible);
        assert_eq!(b.max, b.terms[0].max(b.terms[1]));
    }

    #[test]
    fn threshold_rate_is_infeasible() {
        for a in [1.2, 1.5, 1.9] {
            let b = error_budget(10_000, 3, 34.0 * 3f64.ln(), a).unwrap();
            assert!(!b.feasible);
        }
    }
}
