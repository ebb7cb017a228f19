use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open interval `[lo, hi)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Interval> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::InvalidArgument(format!(
                "interval [{lo}, {hi}) is not bounded and ordered"
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn centered(center: f64, half_width: f64) -> Result<Interval> {
        Self::new(center - half_width, center + half_width)
    }

    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x < self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }
}

/// Number of entries of the ascending slice `values` inside `j`.
pub fn count_sorted(values: &[f64], j: Interval) -> usize {
    let a = values.partition_point(|&v| v < j.lo);
    let b = values.partition_point(|&v| v < j.hi);
    b.saturating_sub(a)
}

/// Sub-slice of the ascending `values` lying in `j`.
pub fn slice_sorted(values: &[f64], j: Interval) -> &[f64] {
    let a = values.partition_point(|&v| v < j.lo);
    let b = values.partition_point(|&v| v < j.hi).max(a);
    &values[a..b]
}

/// The rescaled window `I_n = E + I/n` together with the endpoint set
/// `I_n^e` of half-width `ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RescaledWindow {
    pub energy: f64,
    /// The window `I` in rescaled units.
    pub base: Interval,
    pub n: usize,
    pub epsilon: f64,
}

impl RescaledWindow {
    pub fn new(energy: f64, base: Interval, n: usize, epsilon: f64) -> Result<RescaledWindow> {
        if n == 0 {
            return Err(Error::InvalidArgument("window scale n must be positive".into()));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} invalid")));
        }
        if !energy.is_finite() {
            return Err(Error::InvalidArgument("energy must be finite".into()));
        }
        Ok(RescaledWindow {
            energy,
            base,
            n,
            epsilon,
        })
    }

    /// `I_n = [E + a/n, E + b/n)`.
    pub fn scaled(&self) -> Interval {
        let n = self.n as f64;
        Interval {
            lo: self.energy + self.base.lo / n,
            hi: self.energy + self.base.hi / n,
        }
    }

    /// The two endpoint intervals of `I_n^e`.
    pub fn endpoint_intervals(&self) -> [Interval; 2] {
        let s = self.scaled();
        [
            Interval {
                lo: s.lo - self.epsilon,
                hi: s.lo + self.epsilon,
            },
            Interval {
                lo: s.hi - self.epsilon,
                hi: s.hi + self.epsilon,
            },
        ]
    }

    pub fn in_endpoint_set(&self, x: f64) -> bool {
        self.endpoint_intervals().iter().any(|j| j.contains(x))
    }

    /// `N(I_n^e)`, counting each eigenvalue once even when the two endpoint
    /// intervals overlap.
    pub fn count_endpoint_set(&self, values: &[f64]) -> usize {
        let [l, r] = self.endpoint_intervals();
        let hull = Interval {
            lo: l.lo.min(r.lo),
            hi: l.hi.max(r.hi),
        };
        slice_sorted(values, hull)
            .iter()
            .filter(|&&v| self.in_endpoint_set(v))
            .count()
    }

    /// Map an energy to the rescaled coordinate `n (x - E)`.
    #[inline]
    pub fn rescale(&self, x: f64) -> f64 {
        self.n as f64 * (x - self.energy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_are_half_open() {
        let v = [-2.0, 1.0, 1.0];
        assert_eq!(count_sorted(&v, Interval::new(0.0, 2.0).unwrap()), 2);
        assert_eq!(count_sorted(&v, Interval::new(-2.0, 1.0).unwrap()), 1);
        assert_eq!(count_sorted(&v, Interval::new(5.0, 6.0).unwrap()), 0);
        assert_eq!(count_sorted(&v, Interval::new(-10.0, 10.0).unwrap()), 3);
    }

    #[test]
    fn window_geometry() {
        let w = RescaledWindow::new(1.0, Interval::new(-2.0, 2.0).unwrap(), 100, 0.001).unwrap();
        let s = w.scaled();
        assert!((s.lo - 0.98).abs() < 1e-15 && (s.hi - 1.02).abs() < 1e-15);
        assert!((s.len() - 4.0 / 100.0).abs() < 1e-15);
        let [l, r] = w.endpoint_intervals();
        assert!((l.len() - 0.002).abs() < 1e-15 && (r.len() - 0.002).abs() < 1e-15);
        assert!(w.in_endpoint_set(0.9805) && !w.in_endpoint_set(1.0));
    }

    #[test]
    fn overlapping_endpoint_sets_count_once() {
        let w = RescaledWindow::new(0.0, Interval::new(-1.0, 1.0).unwrap(), 10, 0.5).unwrap();
        assert_eq!(w.count_endpoint_set(&[-0.2, 0.0, 0.3, 0.65]), 3);
    }

    #[test]
    fn rejects_bad_intervals() {
        assert!(Interval::new(1.0, 0.0).is_err());
        assert!(Interval::new(f64::NEG_INFINITY, 0.0).is_err());
    }
}
