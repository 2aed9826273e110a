use std::io::Write;

use crate::error::{Error, Result};
use crate::readout::ReadoutCurve;
use crate::system::SystemConfig;

/// State class × readout class of one trajectory.
///
/// Both comparisons are strict, so `𝒫2(T) = 1/2` and `E(T) = E0` count as
/// "no transition".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ClassLabel {
    pub state_up: bool,
    pub readout_up: bool,
}

impl ClassLabel {
    pub fn from_values(p2_final: f64, e_smoothed_final: f64, e0: f64) -> Self {
        ClassLabel { state_up: p2_final > 0.5, readout_up: e_smoothed_final > e0 }
    }

    pub fn is_valid_positive(&self) -> bool {
        self.state_up && self.readout_up
    }

    pub fn is_valid_negative(&self) -> bool {
        !self.state_up && !self.readout_up
    }

    pub fn is_noise(&self) -> bool {
        self.state_up != self.readout_up
    }

    /// Readout reports a transition that did not happen.
    pub fn is_false_positive(&self) -> bool {
        self.readout_up && !self.state_up
    }

    /// Readout misses a transition that did happen.
    pub fn is_false_negative(&self) -> bool {
        self.state_up && !self.readout_up
    }
}

/// Weighted Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

impl Estimate {
    /// Self-normalized estimate of `E[f]` from normalized weights.
    fn weighted(weights: &[f64], f: impl Fn(usize) -> f64) -> Self {
        let value: f64 = weights.iter().enumerate().map(|(i, w)| w * f(i)).sum();
        let var: f64 = weights.iter().enumerate().map(|(i, w)| (w * (f(i) - value)).powi(2)).sum();
        Estimate { value, se: var.sqrt() }
    }
}

/// Binning used for the density plots.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramSpec {
    pub t_total: f64,
    pub time_bins: usize,
    pub e_lo: f64,
    pub e_hi: f64,
    pub e_bins: usize,
    pub p2_bins: usize,
}

impl HistogramSpec {
    /// 50 time bins; energies on `[E1 − ΔE, E2 + ΔE]` in 40 bins; `𝒫2` in 20.
    pub fn for_config(config: &SystemConfig) -> Self {
        let de = config.delta_e();
        HistogramSpec {
            t_total: config.t_total,
            time_bins: 50,
            e_lo: config.e1 - de,
            e_hi: config.e2 + de,
            e_bins: 40,
            p2_bins: 20,
        }
    }

    pub fn time_centers(&self) -> Vec<f64> {
        let w = self.t_total / self.time_bins as f64;
        (0..self.time_bins).map(|j| (j as f64 + 0.5) * w).collect()
    }

    /// Bin index, with out-of-range values clamped into the edge bins.
    fn bin(x: f64, lo: f64, hi: f64, n: usize) -> u16 {
        let f = ((x - lo) / (hi - lo) * n as f64).floor();
        if f.is_nan() || f < 0.0 {
            0
        } else {
            (f as usize).min(n - 1) as u16
        }
    }

    /// Bins one trajectory: `smoothed` is read at the time-bin centres and
    /// `p2_at_centers[j]` is `𝒫2` at centre `j`.
    pub fn summarize(
        &self,
        log_weight: f64,
        label: ClassLabel,
        smoothed: &ReadoutCurve,
        p2_at_centers: &[f64],
    ) -> SampleSummary {
        let centers = self.time_centers();
        debug_assert_eq!(p2_at_centers.len(), centers.len());
        let e_bins =
            centers.iter().map(|&t| Self::bin(smoothed.value_at(t), self.e_lo, self.e_hi, self.e_bins)).collect();
        let p2_bins = p2_at_centers.iter().map(|&p| Self::bin(p, 0.0, 1.0, self.p2_bins)).collect();
        SampleSummary { log_weight, label, e_bins, p2_bins }
    }
}

/// What the ensemble keeps from each trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSummary {
    /// `ln P[E]` (any common offset is irrelevant).
    pub log_weight: f64,
    pub label: ClassLabel,
    pub e_bins: Vec<u16>,
    pub p2_bins: Vec<u16>,
}

/// Weighted histogram over `(t, value)`; every non-empty time column sums
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2d {
    pub t_edges: Vec<f64>,
    pub value_edges: Vec<f64>,
    /// Row-major: `mass[j * value_bins + b]` for time bin `j`.
    pub mass: Vec<f64>,
}

impl Histogram2d {
    fn empty(t_total: f64, time_bins: usize, lo: f64, hi: f64, value_bins: usize) -> Self {
        Histogram2d {
            t_edges: (0..=time_bins).map(|j| t_total * j as f64 / time_bins as f64).collect(),
            value_edges: (0..=value_bins).map(|b| lo + (hi - lo) * b as f64 / value_bins as f64).collect(),
            mass: vec![0.0; time_bins * value_bins],
        }
    }

    pub fn time_bins(&self) -> usize {
        self.t_edges.len() - 1
    }

    pub fn value_bins(&self) -> usize {
        self.value_edges.len() - 1
    }

    pub fn column(&self, j: usize) -> &[f64] {
        let nb = self.value_bins();
        &self.mass[j * nb..(j + 1) * nb]
    }

    fn add(&mut self, bins: &[u16], w: f64) {
        let nb = self.value_bins();
        for (j, &b) in bins.iter().enumerate() {
            self.mass[j * nb + b as usize] += w;
        }
    }

    fn normalize_columns(&mut self) {
        let nb = self.value_bins();
        for col in self.mass.chunks_mut(nb) {
            let s: f64 = col.iter().sum();
            if s > 0.0 {
                col.iter_mut().for_each(|m| *m /= s);
            }
        }
    }

    /// CSV with columns `t, value, weight` (bin centres).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "value", "weight"])?;
        let nb = self.value_bins();
        for j in 0..self.time_bins() {
            let t = 0.5 * (self.t_edges[j] + self.t_edges[j + 1]);
            for b in 0..nb {
                let v = 0.5 * (self.value_edges[b] + self.value_edges[b + 1]);
                w.write_record(&[t.to_string(), v.to_string(), self.mass[j * nb + b].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Density of the smoothed readout and of `𝒫2` over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Densities {
    pub e: Histogram2d,
    pub p2: Histogram2d,
}

impl Densities {
    fn empty(spec: &HistogramSpec) -> Self {
        Densities {
            e: Histogram2d::empty(spec.t_total, spec.time_bins, spec.e_lo, spec.e_hi, spec.e_bins),
            p2: Histogram2d::empty(spec.t_total, spec.time_bins, 0.0, 1.0, spec.p2_bins),
        }
    }

    fn add(&mut self, s: &SampleSummary, w: f64) {
        self.e.add(&s.e_bins, w);
        self.p2.add(&s.p2_bins, w);
    }

    fn normalize(&mut self) {
        self.e.normalize_columns();
        self.p2.normalize_columns();
    }
}

/// Weighted class probabilities and density histograms of an ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub n_samples: usize,
    /// Normalized weights `P[E]/ΣP[E]` in sample order.
    pub weights: Vec<f64>,
    /// Effective sample size `1/Σw²`.
    pub ess: f64,
    pub p_transition_state: Estimate,
    /// Valid positive: readout and state both report a transition.
    pub p_transition_readout: Estimate,
    /// Valid negative: neither reports a transition.
    pub p_stay_readout: Estimate,
    pub noise: Estimate,
    pub false_positive: Estimate,
    pub false_negative: Estimate,
    /// `p_valid_positive − p_valid_negative`.
    pub valid_difference: Estimate,
    pub all: Densities,
    /// Conditioned on `𝒫2(T) > 1/2`.
    pub transition: Densities,
    /// Conditioned on `𝒫2(T) ≤ 1/2`.
    pub stay: Densities,
}

impl EnsembleStats {
    pub fn from_samples(samples: &[SampleSummary], spec: &HistogramSpec) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("ensemble needs at least one sample".into()));
        }
        let max = samples.iter().map(|s| s.log_weight).fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical("all readout weights underflowed or are not finite".into()));
        }
        let raw: Vec<f64> = samples.iter().map(|s| (s.log_weight - max).exp()).collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numerical("non-finite normalized weight".into()));
        }
        let ess = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let ind = |f: fn(&ClassLabel) -> bool| Estimate::weighted(&weights, |i| f(&samples[i].label) as u8 as f64);
        let valid_difference = Estimate::weighted(&weights, |i| {
            let l = &samples[i].label;
            l.is_valid_positive() as u8 as f64 - l.is_valid_negative() as u8 as f64
        });

        let mut all = Densities::empty(spec);
        let mut transition = Densities::empty(spec);
        let mut stay = Densities::empty(spec);
        for (s, &w) in samples.iter().zip(&weights) {
            all.add(s, w);
            if s.label.state_up {
                transition.add(s, w);
            } else {
                stay.add(s, w);
            }
        }
        all.normalize();
        transition.normalize();
        stay.normalize();

        Ok(EnsembleStats {
            n_samples: samples.len(),
            ess,
            p_transition_state: ind(|l| l.state_up),
            p_transition_readout: ind(ClassLabel::is_valid_positive),
            p_stay_readout: ind(ClassLabel::is_valid_negative),
            noise: ind(ClassLabel::is_noise),
            false_positive: ind(ClassLabel::is_false_positive),
            false_negative: ind(ClassLabel::is_false_negative),
            valid_difference,
            weights,
            all,
            transition,
            stay,
        })
    }

    pub fn density_e(&self) -> &Histogram2d {
        &self.all.e
    }

    pub fn density_p2(&self) -> &Histogram2d {
        &self.all.p2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> HistogramSpec {
        HistogramSpec { t_total: 1.0, time_bins: 4, e_lo: -1.0, e_hi: 1.0, e_bins: 5, p2_bins: 3 }
    }

    fn sample(lw: f64, state_up: bool, readout_up: bool, e: u16) -> SampleSummary {
        SampleSummary {
            log_weight: lw,
            label: ClassLabel { state_up, readout_up },
            e_bins: vec![e; 4],
            p2_bins: vec![state_up as u16 * 2; 4],
        }
    }

    #[test]
    fn class_probabilities_partition_unity() {
        let s = vec![
            sample(0.0, true, true, 4),
            sample(-1.0, false, false, 0),
            sample(-0.5, true, false, 1),
            sample(-2.0, false, true, 3),
        ];
        let st = EnsembleStats::from_samples(&s, &spec()).unwrap();
        let sum = st.p_transition_readout.value + st.p_stay_readout.value + st.noise.value;
        assert!((sum - 1.0).abs() < 1e-12);
        assert!((st.noise.value - st.false_positive.value - st.false_negative.value).abs() < 1e-15);
        for j in 0..4 {
            assert!((st.density_e().column(j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((st.transition.p2.column(j).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn weights_are_scale_invariant() {
        let a = vec![sample(0.0, true, true, 4), sample(-1.0, false, false, 0), sample(-0.5, true, false, 1)];
        let b: Vec<_> = a.iter().map(|s| SampleSummary { log_weight: s.log_weight - 800.0, ..s.clone() }).collect();
        let sa = EnsembleStats::from_samples(&a, &spec()).unwrap();
        let sb = EnsembleStats::from_samples(&b, &spec()).unwrap();
        assert!((sa.p_transition_state.value - sb.p_transition_state.value).abs() < 1e-15);
        assert!((sa.noise.se - sb.noise.se).abs() < 1e-15);
    }

    #[test]
    fn unweighted_se_is_binomial() {
        let s: Vec<_> = (0..100).map(|i| sample(0.0, i < 30, i < 30, 0)).collect();
        let st = EnsembleStats::from_samples(&s, &spec()).unwrap();
        assert!((st.p_transition_state.value - 0.3).abs() < 1e-12);
        assert!((st.p_transition_state.se - (0.3f64 * 0.7 / 100.0).sqrt()).abs() < 1e-12);
        assert!((st.ess - 100.0).abs() < 1e-9);
    }

    #[test]
    fn underflowed_weights_are_reported() {
        let s = vec![sample(f64::NEG_INFINITY, true, true, 0)];
        assert!(matches!(EnsembleStats::from_samples(&s, &spec()), Err(Error::Numerical(_))));
    }

    #[test]
    fn binning_clamps_out_of_range() {
        assert_eq!(HistogramSpec::bin(-5.0, -1.0, 1.0, 5), 0);
        assert_eq!(HistogramSpec::bin(5.0, -1.0, 1.0, 5), 4);
        assert_eq!(HistogramSpec::bin(1.0, 0.0, 1.0, 3), 2);
        assert_eq!(HistogramSpec::bin(0.5, 0.0, 1.0, 4), 2);
    }
}
