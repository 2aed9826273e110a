use crate::error::{invalid, Result};

/// Piecewise-constant energy readout `E(t)` on a uniform grid.
///
/// Segment `k` covers `[k·dt, min((k+1)·dt, T))`; only the last segment may
/// be shorter than `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutCurve {
    dt: f64,
    t_total: f64,
    samples: Vec<f64>,
}

/// Relative slack when matching grid edges against `T`.
const EDGE_TOL: f64 = 1e-9;

impl ReadoutCurve {
    pub fn new(dt: f64, t_total: f64, samples: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("readout dt must be positive, got {dt}")));
        }
        if !(t_total > 0.0 && t_total.is_finite()) {
            return Err(invalid(format!("readout duration must be positive, got {t_total}")));
        }
        if let Some(bad) = samples.iter().find(|x| !x.is_finite()) {
            return Err(invalid(format!("readout contains a non-finite value {bad}")));
        }
        let expected = Self::segment_count(dt, t_total);
        if samples.len() != expected {
            return Err(invalid(format!(
                "readout with dt={dt} must have {expected} samples to cover [0, {t_total}], got {}",
                samples.len()
            )));
        }
        Ok(ReadoutCurve { dt, t_total, samples })
    }

    /// Constant curve `E(t) ≡ value`.
    pub fn constant(dt: f64, t_total: f64, value: f64) -> Result<Self> {
        Self::new(dt, t_total, vec![value; Self::segment_count(dt, t_total)])
    }

    /// Number of segments of width `dt` needed to cover `[0, t_total]`.
    pub fn segment_count(dt: f64, t_total: f64) -> usize {
        let n = (t_total / dt * (1.0 - EDGE_TOL)).ceil();
        (n as usize).max(1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_total(&self) -> f64 {
        self.t_total
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `[start, end)` of segment `k`.
    pub fn segment_bounds(&self, k: usize) -> (f64, f64) {
        let a = k as f64 * self.dt;
        let b = if k + 1 == self.samples.len() { self.t_total } else { (k + 1) as f64 * self.dt };
        (a, b)
    }

    /// Midpoint of segment `k`.
    pub fn segment_center(&self, k: usize) -> f64 {
        let (a, b) = self.segment_bounds(k);
        0.5 * (a + b)
    }

    /// `E(t)`, clamped to the first and last segment outside `[0, T]`.
    pub fn value_at(&self, t: f64) -> f64 {
        let k = (t / self.dt).floor();
        let k = if k < 0.0 { 0 } else { (k as usize).min(self.samples.len() - 1) };
        self.samples[k]
    }

    /// Mean of `E(t)` over `[a, b]`, computed from exact segment overlaps.
    pub fn mean_over(&self, a: f64, b: f64) -> f64 {
        let a = a.max(0.0);
        let b = b.min(self.t_total);
        if b <= a {
            return self.value_at(a);
        }
        let first = ((a / self.dt).floor() as usize).min(self.samples.len() - 1);
        let mut acc = 0.0;
        for k in first..self.samples.len() {
            let (s, e) = self.segment_bounds(k);
            if s >= b {
                break;
            }
            let overlap = e.min(b) - s.max(a);
            if overlap > 0.0 {
                acc += overlap * self.samples[k];
            }
        }
        acc / (b - a)
    }

    /// Value at the final time `T` (the last segment's value).
    pub fn final_value(&self) -> f64 {
        *self.samples.last().expect("readout is never empty")
    }

    /// Segment edges `0, dt, 2dt, ..., T`.
    pub fn edges(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.samples.len()).map(|k| self.segment_bounds(k).0).chain(std::iter::once(self.t_total))
    }

    pub fn map_samples(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.dt, self.t_total, self.samples.iter().map(|&x| f(x)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covers_duration_with_truncated_tail() {
        let c = ReadoutCurve::constant(0.125, 0.58, 1.0).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.segment_bounds(4), (0.5, 0.58));
        assert!(ReadoutCurve::new(0.125, 0.58, vec![0.0; 4]).is_err());
        assert!(ReadoutCurve::new(0.125, 0.58, vec![0.0; 6]).is_err());
        // exact multiple does not gain a spurious zero-width segment
        assert_eq!(ReadoutCurve::constant(0.1, 1.0, 0.0).unwrap().len(), 10);
    }

    #[test]
    fn rejects_non_finite_samples() {
        assert!(ReadoutCurve::new(0.5, 1.0, vec![0.0, f64::NAN]).is_err());
        assert!(ReadoutCurve::new(0.5, 1.0, vec![f64::INFINITY, 0.0]).is_err());
        assert!(ReadoutCurve::new(0.0, 1.0, vec![0.0]).is_err());
    }

    #[test]
    fn mean_over_uses_partial_overlaps() {
        let c = ReadoutCurve::new(1.0, 3.0, vec![0.0, 3.0, 6.0]).unwrap();
        assert!((c.mean_over(0.5, 1.5) - 1.5).abs() < 1e-15);
        assert!((c.mean_over(0.0, 3.0) - 3.0).abs() < 1e-15);
        assert!((c.mean_over(-1.0, 10.0) - 3.0).abs() < 1e-15);
        assert_eq!(c.value_at(2.5), 6.0);
        assert_eq!(c.value_at(3.0), 6.0);
    }
}
