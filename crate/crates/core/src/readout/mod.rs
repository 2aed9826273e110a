//! Random readout curves, smoothing, classification and the weighted
//! ensemble statistics built on top of them.

mod curve;
mod ensemble;
mod stats;

pub use curve::ReadoutCurve;
pub use ensemble::{run_ensemble, run_ensemble_with, EnsembleOptions};
pub use stats::{ClassLabel, Densities, EnsembleStats, Estimate, Histogram2d, HistogramSpec, SampleSummary};

use rand::Rng;

use crate::error::{invalid, Result};
use crate::rng::stream_rng;
use crate::rpi::Trajectory;
use crate::system::{derive_scales, DerivedScales, SystemConfig};

/// Flat prior over piecewise-constant readouts: every segment of width `dt`
/// is drawn independently and uniformly from `[e_lo, e_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub dt: f64,
    pub e_lo: f64,
    pub e_hi: f64,
}

/// Segments per Rabi period of the default prior.
const AUTO_SEGMENTS_PER_RABI: f64 = 8.0;
/// Half-width of the default window beyond each level, in units of the
/// per-segment readout spread.
const AUTO_WINDOW_SIGMAS: f64 = 4.0;

impl PriorSpec {
    pub fn new(dt: f64, e_lo: f64, e_hi: f64) -> Result<Self> {
        let p = PriorSpec { dt, e_lo, e_hi };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(invalid(format!("prior dt must be positive, got {}", self.dt)));
        }
        if !(self.e_lo.is_finite() && self.e_hi.is_finite()) {
            return Err(invalid("prior window must be finite"));
        }
        if self.e_lo > self.e_hi {
            return Err(invalid(format!("prior window is inverted: [{}, {}]", self.e_lo, self.e_hi)));
        }
        Ok(())
    }

    /// Default prior, sized to the measurement.
    ///
    /// A readout averaged over one segment scatters around the occupied
    /// level by `σ = ΔE·√(T_lr / 4dt)`. The window extends `4σ` beyond both
    /// levels so the flat prior covers almost all of the physical readout
    /// distribution; a narrower window truncates it and biases the weighted
    /// statistics. Segments are `T_R/8` long (`T/8` without drive), which
    /// keeps the effective sample size workable.
    pub fn auto(config: &SystemConfig) -> Result<Self> {
        let scales = derive_scales(config)?;
        let dt = if scales.t_rabi.is_finite() {
            scales.t_rabi / AUTO_SEGMENTS_PER_RABI
        } else {
            config.t_total / AUTO_SEGMENTS_PER_RABI
        };
        let half = if scales.t_lr.is_finite() {
            AUTO_WINDOW_SIGMAS * scales.delta_e * (scales.t_lr / (4.0 * dt)).sqrt()
        } else {
            0.5 * scales.delta_e
        };
        Self::new(dt, config.e1 - half, config.e2 + half)
    }

    /// `[E1 − ΔE/2, E2 + ΔE/2]` with 50 segments per Rabi period.
    pub fn narrow(config: &SystemConfig) -> Result<Self> {
        let t_rabi = config.t_rabi();
        let dt = if t_rabi.is_finite() { t_rabi / 50.0 } else { config.t_total / 50.0 };
        let half = 0.5 * config.delta_e();
        Self::new(dt, config.e1 - half, config.e2 + half)
    }

    pub fn width(&self) -> f64 {
        self.e_hi - self.e_lo
    }
}

/// One readout drawn from `prior`; identical to ensemble member 0 for the
/// same seed.
pub fn generate_readout(config: &SystemConfig, prior: &PriorSpec, seed: u64) -> Result<ReadoutCurve> {
    sample_readout(config, prior, &mut stream_rng(seed, 0))
}

pub fn sample_readout<R: Rng>(config: &SystemConfig, prior: &PriorSpec, rng: &mut R) -> Result<ReadoutCurve> {
    config.validate()?;
    prior.validate()?;
    let n = ReadoutCurve::segment_count(prior.dt, config.t_total);
    let width = prior.width();
    let samples = (0..n).map(|_| prior.e_lo + width * rng.random::<f64>()).collect();
    ReadoutCurve::new(prior.dt, config.t_total, samples)
}

/// Centred moving average of width `window`, evaluated at segment centres.
///
/// The average is the exact time average of the piecewise-constant curve.
/// Near `0` and `T` the window keeps its width and is shifted to lie inside
/// `[0, T]`, so the last sample is the mean over `[T − window, T]`. Windows
/// no wider than `dt` leave the curve unchanged.
pub fn smooth_readout(curve: &ReadoutCurve, window: f64) -> ReadoutCurve {
    if !(window > curve.dt()) {
        return curve.clone();
    }
    let t_total = curve.t_total();
    let w = window.min(t_total);
    let samples = (0..curve.len())
        .map(|k| {
            let c = curve.segment_center(k);
            let a = (c - 0.5 * w).clamp(0.0, t_total - w);
            curve.mean_over(a, a + w)
        })
        .collect();
    ReadoutCurve::new(curve.dt(), t_total, samples).expect("smoothing preserves the grid")
}

/// Four-way label from the final occupation and the smoothed final readout.
pub fn classify(traj: &Trajectory, smoothed: &ReadoutCurve, scales: &DerivedScales) -> ClassLabel {
    ClassLabel::from_values(traj.final_p2(), smoothed.final_value(), scales.e0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cfg() -> SystemConfig {
        SystemConfig::new(-0.5, 0.5, PI, 0.0, 0.5, 1.0, 1.0).unwrap()
    }

    #[test]
    fn generated_readout_is_reproducible_and_in_window() {
        let c = cfg();
        let prior = PriorSpec::narrow(&c).unwrap();
        let a = generate_readout(&c, &prior, 42).unwrap();
        let b = generate_readout(&c, &prior, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.samples().iter().all(|&e| (-1.0..=1.0).contains(&e)));
        assert_ne!(a, generate_readout(&c, &prior, 43).unwrap());
    }

    #[test]
    fn degenerate_window_gives_constant_curve() {
        let c = cfg();
        let prior = PriorSpec::new(0.1, 0.0, 0.0).unwrap();
        let r = generate_readout(&c, &prior, 1).unwrap();
        assert!(r.samples().iter().all(|&e| e == 0.0));
        assert!(PriorSpec::new(0.1, 0.2, 0.1).is_err());
        assert!(PriorSpec::new(-0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn smoothing_a_constant_is_a_no_op() {
        let r = ReadoutCurve::constant(0.01, 1.0, 0.3).unwrap();
        let s = smooth_readout(&r, 0.2);
        assert!(s.samples().iter().all(|&e| (e - 0.3).abs() < 1e-14));
    }

    #[test]
    fn spike_is_spread_over_the_window() {
        let dt = 0.01;
        let h = 2.0;
        let mut samples = vec![0.0; 100];
        samples[50] = h;
        let r = ReadoutCurve::new(dt, 1.0, samples).unwrap();
        let s = smooth_readout(&r, 10.0 * dt);
        assert!((s.samples()[50] - h / 10.0).abs() < 1e-12);
        assert_eq!(s.samples()[20], 0.0);
    }

    #[test]
    fn narrow_window_leaves_curve_unchanged() {
        let r = ReadoutCurve::new(0.25, 1.0, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        assert_eq!(smooth_readout(&r, 0.25), r);
        assert_eq!(smooth_readout(&r, 0.1), r);
    }

    #[test]
    fn final_smoothed_value_averages_the_tail() {
        let r = ReadoutCurve::new(0.25, 1.0, vec![1.0, -2.0, 3.0, 0.5]).unwrap();
        let s = smooth_readout(&r, 0.5);
        assert!((s.final_value() - 1.75).abs() < 1e-14);
        assert!((s.samples()[0] - (-0.5)).abs() < 1e-14);
    }

    #[test]
    fn auto_prior_covers_levels() {
        let c = SystemConfig::reference(10.0 / 3.0).unwrap();
        let p = PriorSpec::auto(&c).unwrap();
        assert!(p.e_lo < c.e1 && p.e_hi > c.e2);
        assert!((p.dt - 0.125).abs() < 1e-15);
        let free = c.with_kappa(0.0);
        let p0 = PriorSpec::auto(&free).unwrap();
        assert_eq!((p0.e_lo, p0.e_hi), (-1.0, 1.0));
    }

    #[test]
    fn classification_examples() {
        let up = ClassLabel::from_values(0.9, 0.5, 0.0);
        assert!(up.is_valid_positive());
        let down = ClassLabel::from_values(0.1, -0.5, 0.0);
        assert!(down.is_valid_negative());
        let miss = ClassLabel::from_values(0.9, -0.5, 0.0);
        assert!(miss.is_noise() && miss.is_false_negative());
        // ties count as "no transition"
        let tie = ClassLabel::from_values(0.5, 0.0, 0.0);
        assert!(tie.is_valid_negative());
    }
}
