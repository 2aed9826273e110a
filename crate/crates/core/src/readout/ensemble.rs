use rayon::prelude::*;

use super::{sample_readout, smooth_readout, ClassLabel, EnsembleStats, HistogramSpec, PriorSpec, SampleSummary};
use crate::error::{invalid, Result};
use crate::rng::stream_rng;
use crate::rpi::propagate;
use crate::system::{AmplitudePair, SystemConfig};

#[derive(Debug, Clone)]
pub struct EnsembleOptions {
    /// Defaults to the pulse length `T2 − T1`.
    pub smoothing_window: Option<f64>,
    /// Defaults to [`HistogramSpec::for_config`].
    pub histogram: Option<HistogramSpec>,
    pub initial: AmplitudePair,
}

impl Default for EnsembleOptions {
    fn default() -> Self {
        EnsembleOptions { smoothing_window: None, histogram: None, initial: AmplitudePair::ground() }
    }
}

impl EnsembleOptions {
    pub(crate) fn window(&self, config: &SystemConfig) -> f64 {
        self.smoothing_window.unwrap_or(config.t2 - config.t1)
    }

    pub(crate) fn histogram(&self, config: &SystemConfig) -> HistogramSpec {
        self.histogram.clone().unwrap_or_else(|| HistogramSpec::for_config(config))
    }
}

pub fn run_ensemble(config: &SystemConfig, prior: &PriorSpec, n: usize, seed: u64) -> Result<EnsembleStats> {
    run_ensemble_with(config, prior, n, seed, &EnsembleOptions::default())
}

/// Draws `n` readouts from the flat prior, integrates each and weights it by
/// `P[E] = ‖ψ_T‖²`.
///
/// Readout `i` uses its own RNG stream, and the reduction runs in sample
/// order, so the result does not depend on the thread count.
pub fn run_ensemble_with(
    config: &SystemConfig,
    prior: &PriorSpec,
    n: usize,
    seed: u64,
    opts: &EnsembleOptions,
) -> Result<EnsembleStats> {
    if n == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    config.validate()?;
    prior.validate()?;
    let spec = opts.histogram(config);
    if (spec.t_total - config.t_total).abs() > 1e-12 * config.t_total {
        return Err(invalid("histogram duration differs from the measurement duration"));
    }
    let window = opts.window(config);
    let e0 = config.e0();
    let mut record = spec.time_centers();
    record.push(config.t_total);
    let n_centers = spec.time_bins;

    let samples = (0..n)
        .into_par_iter()
        .map(|i| -> Result<SampleSummary> {
            let mut rng = stream_rng(seed, i as u64);
            let curve = sample_readout(config, prior, &mut rng)?;
            let mut p2 = vec![0.0; record.len()];
            let end = propagate(config, &curve, opts.initial, &record, None, |k, _, s, _| p2[k] = s.occupation2())?;
            let smoothed = smooth_readout(&curve, window);
            let label = ClassLabel::from_values(end.p2(), smoothed.final_value(), e0);
            Ok(spec.summarize(end.log_norm_sq, label, &smoothed, &p2[..n_centers]))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleStats::from_samples(&samples, &spec)
}
