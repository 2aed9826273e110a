//! The measurement as a sequence of weak binary observations.
//!
//! Every `τ` the meter interacts briefly with the system and is read out
//! with a positive or negative result. Level `i` gives a positive result
//! with probability `p_i`; the observation multiplies the amplitudes by
//! `u_i` or `u′_i`. Between observations the drive rotates the pair by
//! `e^{−ivτσ1}`. `N` consecutive observations form a series whose
//! positive-result ratio `n = N₊/N` is mapped affinely to an energy
//! reading.

use std::fmt;

use num_complex::Complex64 as C64;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::readout::{smooth_readout, ClassLabel, EnsembleStats, HistogramSpec, ReadoutCurve, SampleSummary};
use crate::rng::stream_rng;
use crate::rpi::Trajectory;
use crate::system::{derive_scales, AmplitudePair, DerivedScales, SystemConfig};

/// Mid-point positive probability of the default matched model.
pub const DEFAULT_P0: f64 = 0.5;
/// Elementary observations per level resolution time in the default model.
pub const DEFAULT_OBSERVATIONS_PER_T_LR: f64 = 400.0;
/// Observations per series in the default model.
pub const DEFAULT_SERIES_LEN: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementaryModel {
    pub p1: f64,
    pub p2: f64,
    pub chi: f64,
    pub chi_prime: f64,
    pub tau: f64,
}

impl ElementaryModel {
    pub fn new(p1: f64, p2: f64, chi: f64, chi_prime: f64, tau: f64) -> Result<Self> {
        let m = ElementaryModel { p1, p2, chi, chi_prime, tau };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p1", self.p1), ("p2", self.p2)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(invalid(format!("{name} must lie in (0, 1), got {p}")));
            }
        }
        if !(self.chi.is_finite() && self.chi_prime.is_finite()) {
            return Err(invalid("phases must be finite"));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(invalid(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// Zero-phase model reproducing the measurement strength of `config`.
    ///
    /// `τ = T/M` with `M` the integer closest to `T·K/T_lr`, so the run
    /// consists of whole observations; `Δp` then follows from
    /// `T_lr = τ·4p0(1−p0)/Δp²`.
    pub fn matched(config: &SystemConfig, p0: f64, observations_per_t_lr: f64) -> Result<Self> {
        let scales = derive_scales(config)?;
        if !scales.t_lr.is_finite() {
            return Err(invalid("a matched model needs kappa > 0"));
        }
        if !(observations_per_t_lr > 0.0) {
            return Err(invalid("observations per resolution time must be positive"));
        }
        let m = (config.t_total * observations_per_t_lr / scales.t_lr).round().max(1.0);
        let tau = config.t_total / m;
        let dp = (4.0 * p0 * (1.0 - p0) * tau / scales.t_lr).sqrt();
        Self::new(p0 - 0.5 * dp, p0 + 0.5 * dp, 0.0, 0.0, tau)
    }

    pub fn p0(&self) -> f64 {
        0.5 * (self.p1 + self.p2)
    }

    pub fn delta_p(&self) -> f64 {
        self.p2 - self.p1
    }

    /// `(u1, u2)` applied on a positive result.
    pub fn positive_factors(&self) -> (C64, C64) {
        (C64::from_polar(self.p1.sqrt(), self.chi), C64::from_polar(self.p2.sqrt(), -self.chi))
    }

    /// `(u′1, u′2)` applied on a negative result.
    pub fn negative_factors(&self) -> (C64, C64) {
        (
            C64::from_polar((1.0 - self.p1).sqrt(), -self.chi_prime),
            C64::from_polar((1.0 - self.p2).sqrt(), self.chi_prime),
        )
    }

    fn require_information(&self) -> Result<f64> {
        let dp = self.delta_p();
        if dp == 0.0 {
            return Err(invalid("p1 = p2: observations carry no information about the level"));
        }
        Ok(dp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Positive,
    Negative,
}

/// One series of observations and the energy it reads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesRecord {
    pub t_start: f64,
    pub n_total: usize,
    pub n_plus: usize,
    pub n_ratio: f64,
    pub energy: f64,
}

fn require_nonzero(state: &AmplitudePair) -> Result<()> {
    let n = state.norm_sq();
    if !(n > 0.0 && n.is_finite()) {
        return Err(invalid("state must be non-zero and finite"));
    }
    Ok(())
}

/// `p = (p1|C1|² + p2|C2|²)/(|C1|² + |C2|²)`.
pub fn positive_probability(state: &AmplitudePair, model: &ElementaryModel) -> Result<f64> {
    require_nonzero(state)?;
    let (n1, n2) = (state.c1.norm_sqr(), state.c2.norm_sqr());
    Ok((model.p1 * n1 + model.p2 * n2) / (n1 + n2))
}

pub fn elementary_update(state: &AmplitudePair, outcome: Outcome, model: &ElementaryModel) -> AmplitudePair {
    let (f1, f2) = match outcome {
        Outcome::Positive => model.positive_factors(),
        Outcome::Negative => model.negative_factors(),
    };
    AmplitudePair::new(state.c1 * f1, state.c2 * f2)
}

/// Product of the elementary factors for a known outcome sequence.
pub fn series_amplitude_selective(model: &ElementaryModel, outcomes: &[Outcome]) -> Result<(C64, C64)> {
    if outcomes.is_empty() {
        return Err(invalid("outcome sequence must not be empty"));
    }
    let n_plus = outcomes.iter().filter(|o| **o == Outcome::Positive).count();
    Ok(selective_power(model, n_plus, outcomes.len()))
}

fn selective_power(model: &ElementaryModel, n_plus: usize, n_total: usize) -> (C64, C64) {
    let (u1, u2) = model.positive_factors();
    let (w1, w2) = model.negative_factors();
    let k = n_plus as i32;
    let m = (n_total - n_plus) as i32;
    (u1.powi(k) * w1.powi(m), u2.powi(k) * w2.powi(m))
}

/// Largest `N` for which binomial coefficients are computed exactly.
const EXACT_BINOMIAL_MAX: usize = 120;

/// `C(n, k)` as a float; exact for `n ≤ 120`.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    if n <= EXACT_BINOMIAL_MAX {
        let k = k.min(n - k);
        let mut c: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
        }
        c as f64
    } else {
        ln_binomial(n, k).exp()
    }
}

pub fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).map(|i| ((n - i) as f64 / (i + 1) as f64).ln()).sum()
}

/// Amplitudes of the event "`N₊` positives out of `N`" in any order:
/// the selective product times `√C(N, N₊)`.
pub fn series_amplitude_unordered(model: &ElementaryModel, n_plus: usize, n_total: usize) -> Result<(C64, C64)> {
    if n_plus > n_total {
        return Err(invalid(format!("n_plus={n_plus} exceeds n_total={n_total}")));
    }
    if n_total <= EXACT_BINOMIAL_MAX {
        let (a, b) = selective_power(model, n_plus, n_total);
        let s = binomial(n_total, n_plus).sqrt();
        return Ok((a * s, b * s));
    }
    // large N: assemble modulus in log space to avoid under/overflow
    let k = n_plus as f64;
    let m = (n_total - n_plus) as f64;
    let half_ln_c = 0.5 * ln_binomial(n_total, n_plus);
    let phase = k * model.chi - m * model.chi_prime;
    let r1 = (half_ln_c + 0.5 * (k * model.p1.ln() + m * (1.0 - model.p1).ln())).exp();
    let r2 = (half_ln_c + 0.5 * (k * model.p2.ln() + m * (1.0 - model.p2).ln())).exp();
    Ok((C64::from_polar(r1, phase), C64::from_polar(r2, -phase)))
}

/// Probability of `N₊` positives in a series of `N`, for the given state.
pub fn series_outcome_probability(
    state: &AmplitudePair,
    model: &ElementaryModel,
    n_plus: usize,
    n_total: usize,
) -> Result<f64> {
    require_nonzero(state)?;
    let (u1, u2) = series_amplitude_unordered(model, n_plus, n_total)?;
    Ok(state.occupation1() * u1.norm_sqr() + state.occupation2() * u2.norm_sqr())
}

/// Gaussian limit of the series amplitudes at ratio `n`:
/// `𝒩_i·exp[−N(n − p_i)²/(4p_i(1 − p_i))]` with `𝒩_i² = 1/√(2πN p_i(1 − p_i))`
/// and phases `±N[nχ − (1 − n)χ′]`.
pub fn gaussian_series_amplitude(model: &ElementaryModel, n_ratio: f64, n_total: usize) -> (C64, C64) {
    let nf = n_total as f64;
    let modulus = |p: f64| {
        let var = p * (1.0 - p);
        let norm = (2.0 * std::f64::consts::PI * nf * var).powf(-0.25);
        norm * (-nf * (n_ratio - p).powi(2) / (4.0 * var)).exp()
    };
    let phase = nf * (n_ratio * model.chi - (1.0 - n_ratio) * model.chi_prime);
    (C64::from_polar(modulus(model.p1), phase), C64::from_polar(modulus(model.p2), -phase))
}

/// `sup_k |pmf(k) − 𝒩²·exp(−N(k/N − p)²/(2p(1−p)))| / max_k pmf(k)` for a
/// binomial with `N` trials and success probability `p`.
pub fn gaussian_limit_error(p: f64, n_total: usize) -> Result<f64> {
    let model = ElementaryModel::new(p, p, 0.0, 0.0, 1.0)?;
    let mut worst: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for k in 0..=n_total {
        let exact = series_amplitude_unordered(&model, k, n_total)?.0.norm_sqr();
        let gauss = gaussian_series_amplitude(&model, k as f64 / n_total as f64, n_total).0.norm_sqr();
        worst = worst.max((exact - gauss).abs());
        peak = peak.max(exact);
    }
    Ok(worst / peak)
}

/// `E = E0 + ΔE·(n − p0)/Δp`.
pub fn n_to_energy(n_ratio: f64, model: &ElementaryModel, scales: &DerivedScales) -> Result<f64> {
    let dp = model.require_information()?;
    Ok(scales.e0 + scales.delta_e * (n_ratio - model.p0()) / dp)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolutionTime {
    pub t_lr: f64,
    /// Measurement strength the model is equivalent to.
    pub kappa: f64,
}

/// `T_lr = τ·4p0(1 − p0)/Δp²` and `κ = 1/(T_lr ΔE²)`.
pub fn level_resolution_time(model: &ElementaryModel, scales: &DerivedScales) -> Result<ResolutionTime> {
    let dp = model.require_information()?;
    let p0 = model.p0();
    let t_lr = model.tau * 4.0 * p0 * (1.0 - p0) / (dp * dp);
    Ok(ResolutionTime { t_lr, kappa: 1.0 / (t_lr * scales.delta_e * scales.delta_e) })
}

/// Elementary model of a meter particle deflected by the system.
///
/// The meter wave packet `a(1 ± gσ3)` gives positive-result probabilities
/// `p1 = |a|²(1 − g)²` and `p2 = |a|²(1 + g)²`, i.e. `p0 = |a|²(1 + g²)`
/// and `Δp = 4g|a|²`. For real `a` the positive phase is `χ = 0`; the
/// `e^{ibgσ3}` factor of the unscattered part gives `χ′ = −bg`.
pub fn concrete_model_params(g: f64, a_sq: f64, b: f64, tau: f64) -> Result<ElementaryModel> {
    if !(g.is_finite() && a_sq.is_finite() && b.is_finite()) {
        return Err(invalid("g, |a|² and b must be finite"));
    }
    if g == 0.0 {
        return Err(invalid("g = 0 gives p1 = p2: no information per observation"));
    }
    let p1 = a_sq * (1.0 - g).powi(2);
    let p2 = a_sq * (1.0 + g).powi(2);
    ElementaryModel::new(p1, p2, 0.0, -b * g, tau)
}

/// Leading-order resolution time `τ/(4g²|a|²)` of the concrete model.
pub fn concrete_resolution_time(g: f64, a_sq: f64, tau: f64) -> f64 {
    tau / (4.0 * g * g * a_sq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityThresholds {
    pub series_max: f64,
    pub continuity_min: f64,
    pub phase_max: f64,
}

impl Default for FeasibilityThresholds {
    fn default() -> Self {
        FeasibilityThresholds { series_max: 0.1, continuity_min: 10.0, phase_max: 0.1 }
    }
}

/// Whether the effective continuous description applies to a model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasibilityReport {
    /// `N²·|Δp|·vτ/√p0`: the drive barely acts within one series.
    pub series_ratio: f64,
    /// `p0/Δp²`: many observations are needed to resolve the levels.
    pub continuity_ratio: f64,
    /// Accumulated meter phase `(phase per observation)·T/τ`.
    pub phase_ratio: f64,
    pub thresholds: FeasibilityThresholds,
}

impl FeasibilityReport {
    pub fn series_ok(&self) -> bool {
        self.series_ratio <= self.thresholds.series_max
    }

    pub fn continuity_ok(&self) -> bool {
        self.continuity_ratio >= self.thresholds.continuity_min
    }

    pub fn phase_ok(&self) -> bool {
        self.phase_ratio <= self.thresholds.phase_max
    }

    pub fn passed(&self) -> bool {
        self.series_ok() && self.continuity_ok() && self.phase_ok()
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = |ok: bool| if ok { "pass" } else { "FAIL" };
        let t = &self.thresholds;
        writeln!(f, "series_ratio = {:.6e} (<= {}) {}", self.series_ratio, t.series_max, verdict(self.series_ok()))?;
        writeln!(
            f,
            "continuity_ratio = {:.6e} (>= {}) {}",
            self.continuity_ratio,
            t.continuity_min,
            verdict(self.continuity_ok())
        )?;
        writeln!(f, "phase_ratio = {:.6e} (<= {}) {}", self.phase_ratio, t.phase_max, verdict(self.phase_ok()))?;
        write!(f, "overall = {}", verdict(self.passed()))
    }
}

/// Feasibility ratios with the default thresholds. `phase_coupling` is the
/// meter phase per observation (`g·b` for the concrete model).
pub fn feasibility_check(
    model: &ElementaryModel,
    scales: &DerivedScales,
    n_total: usize,
    phase_coupling: f64,
    t_total: f64,
) -> FeasibilityReport {
    let v = if scales.t_rabi.is_finite() { std::f64::consts::PI / scales.t_rabi } else { 0.0 };
    let dp = model.delta_p().abs();
    let nf = n_total as f64;
    FeasibilityReport {
        series_ratio: nf * nf * dp * v * model.tau / model.p0().sqrt(),
        continuity_ratio: model.p0() / (dp * dp),
        phase_ratio: phase_coupling.abs() * t_total / model.tau,
        thresholds: FeasibilityThresholds::default(),
    }
}

/// `Ē = E1·𝒫1 + E2·𝒫2`.
pub fn mean_energy(state: &AmplitudePair, scales: &DerivedScales) -> Result<f64> {
    require_nonzero(state)?;
    let e1 = scales.e0 - 0.5 * scales.delta_e;
    let e2 = scales.e0 + 0.5 * scales.delta_e;
    Ok(e1 * state.occupation1() + e2 * state.occupation2())
}

/// `(Ē − E0)/ΔE − (n̄ − p0)/Δp`, which vanishes identically.
pub fn mean_energy_residual(state: &AmplitudePair, model: &ElementaryModel, scales: &DerivedScales) -> Result<f64> {
    let dp = model.require_information()?;
    let e = mean_energy(state, scales)?;
    let n = positive_probability(state, model)?;
    Ok((e - scales.e0) / scales.delta_e - (n - model.p0()) / dp)
}

#[derive(Debug, Clone)]
pub struct MicroOptions {
    /// Run even if the feasibility check fails.
    pub force: bool,
    pub initial: AmplitudePair,
}

impl Default for MicroOptions {
    fn default() -> Self {
        MicroOptions { force: false, initial: AmplitudePair::ground() }
    }
}

#[derive(Debug, Clone)]
pub struct MicroRun {
    /// Series readout, `dt = N·τ`.
    pub readout: ReadoutCurve,
    /// State after every observation step; `log_norm_sq` is the log
    /// probability of the outcomes so far.
    pub trajectory: Trajectory,
    pub series: Vec<SeriesRecord>,
    pub feasibility: FeasibilityReport,
}

/// Number of observation steps, checking that `τ` tiles `[0, T]`.
fn observation_count(config: &SystemConfig, model: &ElementaryModel) -> Result<usize> {
    let m = config.t_total / model.tau;
    let r = m.round();
    if r < 1.0 || (m - r).abs() > 1e-9 * m.max(1.0) {
        return Err(invalid(format!(
            "tau={} does not divide t_total={} into a whole number of observations",
            model.tau, config.t_total
        )));
    }
    Ok(r as usize)
}

fn prepare(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    force: bool,
) -> Result<(DerivedScales, FeasibilityReport, usize)> {
    config.validate()?;
    model.validate()?;
    model.require_information()?;
    if n_per_series == 0 {
        return Err(invalid("series length must be at least 1"));
    }
    let scales = derive_scales(config)?;
    let steps = observation_count(config, model)?;
    let phase = model.chi.abs().max(model.chi_prime.abs());
    let report = feasibility_check(model, &scales, n_per_series, phase, config.t_total);
    if !report.passed() && !force {
        return Err(Error::Infeasible(report.to_string().replace('\n', "; ")));
    }
    Ok((scales, report, steps))
}

/// Outcome-by-outcome simulation shared by single runs and ensembles.
///
/// `on_step(k, t, state, ln_prob)` is called after step `k` (observation at
/// `kτ` followed by the drive up to `(k+1)τ`), with `t = (k+1)τ`; `on_series`
/// after every completed series.
#[allow(clippy::too_many_arguments)]
fn simulate<R: Rng>(
    config: &SystemConfig,
    model: &ElementaryModel,
    scales: &DerivedScales,
    n_per_series: usize,
    steps: usize,
    initial: AmplitudePair,
    rng: &mut R,
    mut on_step: impl FnMut(usize, f64, &AmplitudePair, f64),
    mut on_series: impl FnMut(SeriesRecord),
) -> Result<AmplitudePair> {
    let mut state = initial.normalized().ok_or_else(|| invalid("initial state must be non-zero and finite"))?;
    let mut ln_prob = 0.0;
    let (mut count, mut plus) = (0usize, 0usize);
    let mut series_start = 0.0;
    for k in 0..steps {
        let t = k as f64 * model.tau;
        let p = positive_probability(&state, model)?;
        let outcome = if rng.random::<f64>() < p { Outcome::Positive } else { Outcome::Negative };
        let prob = if outcome == Outcome::Positive { p } else { 1.0 - p };
        state = elementary_update(&state, outcome, model);
        ln_prob += prob.ln();
        let n = state.norm_sq();
        state = state.scale(C64::new(1.0 / n.sqrt(), 0.0));

        let theta = config.v_amplitude * config.pulse_overlap(t, t + model.tau);
        if theta != 0.0 {
            let (c, s) = (theta.cos(), C64::new(0.0, -theta.sin()));
            state = AmplitudePair::new(state.c1 * c + state.c2 * s, state.c2 * c + state.c1 * s);
        }
        if !state.is_finite() {
            return Err(Error::Numerical(format!("micro state became non-finite at t={t}")));
        }

        count += 1;
        plus += (outcome == Outcome::Positive) as usize;
        let t_end = (k + 1) as f64 * model.tau;
        on_step(k, t_end, &state, ln_prob);
        if count == n_per_series || k + 1 == steps {
            let n_ratio = plus as f64 / count as f64;
            on_series(SeriesRecord {
                t_start: series_start,
                n_total: count,
                n_plus: plus,
                n_ratio,
                energy: n_to_energy(n_ratio, model, scales)?,
            });
            series_start = t_end;
            count = 0;
            plus = 0;
        }
    }
    Ok(state)
}

pub fn micro_trajectory(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    seed: u64,
) -> Result<MicroRun> {
    micro_trajectory_with(config, model, n_per_series, seed, &MicroOptions::default())
}

pub fn micro_trajectory_with(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    seed: u64,
    opts: &MicroOptions,
) -> Result<MicroRun> {
    let (scales, feasibility, steps) = prepare(config, model, n_per_series, opts.force)?;
    let mut rng = stream_rng(seed, 0);
    let start = opts.initial.normalized().ok_or_else(|| invalid("initial state must be non-zero and finite"))?;
    let mut traj =
        Trajectory { times: vec![0.0], states: vec![start], log_norm_sq: vec![0.0], p2: vec![start.occupation2()] };
    let mut series = Vec::new();
    simulate(
        config,
        model,
        &scales,
        n_per_series,
        steps,
        start,
        &mut rng,
        |_, t, s, lp| {
            traj.times.push(t);
            traj.states.push(*s);
            traj.log_norm_sq.push(lp);
            traj.p2.push(s.occupation2());
        },
        |r| series.push(r),
    )?;
    let samples = series.iter().map(|r| r.energy).collect();
    let readout = ReadoutCurve::new(n_per_series as f64 * model.tau, config.t_total, samples)?;
    Ok(MicroRun { readout, trajectory: traj, series, feasibility })
}

#[derive(Debug, Clone, Default)]
pub struct MicroEnsembleOptions {
    pub micro: MicroOptions,
    /// Defaults to the pulse length `T2 − T1`.
    pub smoothing_window: Option<f64>,
    pub histogram: Option<HistogramSpec>,
}

/// Ancestral sampling: every trajectory draws its own outcomes, so all
/// weights are equal. Classified and binned like the weighted ensemble.
pub fn run_micro_ensemble(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    n: usize,
    seed: u64,
    opts: &MicroEnsembleOptions,
) -> Result<EnsembleStats> {
    if n == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    let (scales, _, steps) = prepare(config, model, n_per_series, opts.micro.force)?;
    let spec = opts.histogram.clone().unwrap_or_else(|| HistogramSpec::for_config(config));
    let window = opts.smoothing_window.unwrap_or(config.t2 - config.t1);
    let centers = spec.time_centers();
    let dt = n_per_series as f64 * model.tau;

    let samples = (0..n)
        .into_par_iter()
        .map(|i| -> Result<SampleSummary> {
            let mut rng = stream_rng(seed, i as u64);
            let mut p2 = Vec::with_capacity(centers.len());
            let mut energies = Vec::new();
            let first = opts.micro.initial.normalized().ok_or_else(|| invalid("initial state must be non-zero"))?;
            // centres before the first step completes see the initial state
            while p2.len() < centers.len() && centers[p2.len()] < 0.5 * model.tau {
                p2.push(first.occupation2());
            }
            let end = simulate(
                config,
                model,
                &scales,
                n_per_series,
                steps,
                first,
                &mut rng,
                |_, t, s, _| {
                    while p2.len() < centers.len() && centers[p2.len()] < t + 0.5 * model.tau {
                        p2.push(s.occupation2());
                    }
                },
                |r| energies.push(r.energy),
            )?;
            p2.resize(centers.len(), end.occupation2());
            let curve = ReadoutCurve::new(dt, config.t_total, energies)?;
            let smoothed = smooth_readout(&curve, window);
            let label = ClassLabel::from_values(end.occupation2(), smoothed.final_value(), scales.e0);
            Ok(spec.summarize(0.0, label, &smoothed, &p2))
        })
        .collect::<Result<Vec<_>>>()?;
    EnsembleStats::from_samples(&samples, &spec)
}

/// Default matched model and series length for `config`.
pub fn default_model(config: &SystemConfig) -> Result<(ElementaryModel, usize)> {
    Ok((ElementaryModel::matched(config, DEFAULT_P0, DEFAULT_OBSERVATIONS_PER_T_LR)?, DEFAULT_SERIES_LEN))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn model(p1: f64, p2: f64) -> ElementaryModel {
        ElementaryModel::new(p1, p2, 0.0, 0.0, 1.0).unwrap()
    }

    fn scales() -> DerivedScales {
        derive_scales(&SystemConfig::new(-0.5, 0.5, PI, 0.0, 0.5, 1.0, 1.0).unwrap()).unwrap()
    }

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn positive_probability_examples() {
        let m = model(0.2, 0.6);
        assert_eq!(positive_probability(&AmplitudePair::ground(), &m).unwrap(), 0.2);
        assert_eq!(positive_probability(&AmplitudePair::excited(), &m).unwrap(), 0.6);
        let even = AmplitudePair::new(c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0));
        assert_relative_eq!(positive_probability(&even, &m).unwrap(), m.p0(), epsilon = 1e-15);
        assert!(positive_probability(&AmplitudePair::new(c(0.0, 0.0), c(0.0, 0.0)), &m).is_err());
    }

    #[test]
    fn elementary_update_examples() {
        let m = model(0.3, 0.7);
        let s = elementary_update(&AmplitudePair::ground(), Outcome::Positive, &m);
        assert_relative_eq!(s.c1.re, 0.3f64.sqrt(), epsilon = 1e-15);
        assert_eq!(s.c2, c(0.0, 0.0));
        assert_relative_eq!(s.norm_sq(), 0.3, epsilon = 1e-15);

        let m = ElementaryModel::new(0.3, 0.7, 0.4, -1.1, 1.0).unwrap();
        let psi = AmplitudePair::new(c(0.6, 0.2), c(-0.1, 0.7));
        let pm = elementary_update(&elementary_update(&psi, Outcome::Positive, &m), Outcome::Negative, &m);
        let mp = elementary_update(&elementary_update(&psi, Outcome::Negative, &m), Outcome::Positive, &m);
        assert!((pm.c1 - mp.c1).norm() < 1e-15 && (pm.c2 - mp.c2).norm() < 1e-15);
    }

    #[test]
    fn selective_amplitudes() {
        let m = ElementaryModel::new(0.3, 0.6, 0.2, 0.5, 1.0).unwrap();
        let (u1, u2) = m.positive_factors();
        let (w1, w2) = m.negative_factors();
        assert_eq!(series_amplitude_selective(&m, &[Outcome::Positive]).unwrap(), (u1, u2));
        let a = series_amplitude_selective(&m, &[Outcome::Positive, Outcome::Negative]).unwrap();
        let b = series_amplitude_selective(&m, &[Outcome::Negative, Outcome::Positive]).unwrap();
        assert!((a.0 - u1 * w1).norm() < 1e-15 && (a.1 - u2 * w2).norm() < 1e-15);
        assert_eq!(a, b);
        let all = series_amplitude_selective(&m, &[Outcome::Positive; 3]).unwrap();
        assert!((all.0 - u1 * u1 * u1).norm() < 1e-15);
        assert!(series_amplitude_selective(&m, &[]).is_err());
    }

    #[test]
    fn unordered_amplitudes() {
        let m = model(0.3, 0.6);
        let (a1, a2) = series_amplitude_unordered(&m, 1, 2).unwrap();
        let (s1, s2) = series_amplitude_selective(&m, &[Outcome::Positive, Outcome::Negative]).unwrap();
        assert!((a1 - s1 * 2f64.sqrt()).norm() < 1e-15 && (a2 - s2 * 2f64.sqrt()).norm() < 1e-15);

        let half = model(0.5, 0.6);
        assert_relative_eq!(series_amplitude_unordered(&half, 2, 4).unwrap().0.norm_sqr(), 0.375, epsilon = 1e-15);
        assert!(series_amplitude_unordered(&half, 5, 4).is_err());
    }

    #[test]
    fn large_series_switch_to_log_space_smoothly() {
        let m = ElementaryModel::new(0.45, 0.55, 0.01, 0.02, 1.0).unwrap();
        // straddle the exact/log boundary and compare with the exact formula
        for n in [119usize, 120, 121, 400] {
            let total: f64 = (0..=n).map(|k| series_amplitude_unordered(&m, k, n).unwrap().0.norm_sqr()).sum();
            assert!((total - 1.0).abs() < 1e-11, "N={n}: {total}");
        }
        let a = series_amplitude_unordered(&m, 60, 121).unwrap();
        let direct = selective_power(&m, 60, 121);
        let s = binomial(121, 60).sqrt();
        assert!((a.0 - direct.0 * s).norm() < 1e-12 * a.0.norm());
        assert!((a.1 - direct.1 * s).norm() < 1e-12 * a.1.norm());
    }

    #[test]
    fn outcome_probability_examples() {
        let m = model(0.25, 0.65);
        let psi = AmplitudePair::new(c(0.8, 0.0), c(0.0, 0.6));
        assert_relative_eq!(
            series_outcome_probability(&psi, &m, 1, 1).unwrap(),
            positive_probability(&psi, &m).unwrap(),
            epsilon = 1e-15
        );
        let g = AmplitudePair::ground();
        for k in 0..=5 {
            let pure = binomial(5, k) * 0.25f64.powi(k as i32) * 0.75f64.powi(5 - k as i32);
            assert_relative_eq!(series_outcome_probability(&g, &m, k, 5).unwrap(), pure, epsilon = 1e-15);
        }
        let mean: f64 = (0..=9).map(|k| k as f64 / 9.0 * series_outcome_probability(&psi, &m, k, 9).unwrap()).sum();
        assert_relative_eq!(mean, 0.25 * 0.64 + 0.65 * 0.36, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_amplitude_examples() {
        let m = ElementaryModel::new(0.4, 0.6, 0.0, 0.0, 1.0).unwrap();
        let (g1, g2) = gaussian_series_amplitude(&m, 0.4, 100);
        let peak = (2.0 * PI * 100.0 * 0.24f64).powf(-0.25);
        assert_relative_eq!(g1.re, peak, epsilon = 1e-15);
        assert_eq!(g1.im, 0.0);
        assert!(g2.re > 0.0 && g2.im == 0.0);
        assert!(gaussian_limit_error(0.5, 400).unwrap() <= 0.02);
    }

    #[test]
    fn n_to_energy_examples() {
        let m = model(0.3, 0.5);
        let s = scales();
        assert_relative_eq!(n_to_energy(0.4, &m, &s).unwrap(), 0.0, epsilon = 1e-15);
        assert_relative_eq!(n_to_energy(0.3, &m, &s).unwrap(), -0.5, epsilon = 1e-14);
        assert_relative_eq!(n_to_energy(0.5, &m, &s).unwrap(), 0.5, epsilon = 1e-14);
        assert_relative_eq!(n_to_energy(0.7, &m, &s).unwrap(), 1.5, epsilon = 1e-14);
        assert!(n_to_energy(0.5, &model(0.3, 0.3), &s).is_err());
    }

    #[test]
    fn resolution_time_examples() {
        let s = scales();
        let m = ElementaryModel::new(0.45, 0.55, 0.0, 0.0, 1.0).unwrap();
        let r = level_resolution_time(&m, &s).unwrap();
        assert_relative_eq!(r.t_lr, 100.0, max_relative = 1e-12);
        assert_relative_eq!(r.kappa, 0.01, max_relative = 1e-12);
        let m2 = ElementaryModel { tau: 2.0, ..m };
        assert_relative_eq!(level_resolution_time(&m2, &s).unwrap().t_lr, 200.0, max_relative = 1e-12);
        let m3 = ElementaryModel::new(0.475, 0.525, 0.0, 0.0, 1.0).unwrap();
        assert_relative_eq!(level_resolution_time(&m3, &s).unwrap().t_lr, 400.0, max_relative = 1e-12);
    }

    #[test]
    fn concrete_model_examples() {
        let m = concrete_model_params(0.1, 0.25, 0.0, 1.0).unwrap();
        assert_relative_eq!(m.p0(), 0.2525, epsilon = 1e-15);
        assert_relative_eq!(m.delta_p(), 0.1, epsilon = 1e-15);
        assert_relative_eq!(concrete_resolution_time(0.1, 0.25, 1.0), 100.0, max_relative = 1e-12);
        assert!(concrete_model_params(0.0, 0.25, 0.0, 1.0).is_err());
        assert!(concrete_model_params(0.5, 0.9, 0.0, 1.0).is_err());

        // exact T_lr = τ/(4g²|a|²)·(1 + g²)(1 − p0): equal to first order in g² once |a|² is small
        let s = scales();
        for a_sq in [0.25, 1e-3] {
            let g = 0.01;
            let m = concrete_model_params(g, a_sq, 1.0, 1.0).unwrap();
            let exact = level_resolution_time(&m, &s).unwrap().t_lr;
            let lead = concrete_resolution_time(g, a_sq, 1.0);
            assert_relative_eq!(exact / lead, (1.0 + g * g) * (1.0 - m.p0()), max_relative = 1e-10);
        }
        let m = concrete_model_params(0.01, 1e-6, 1.0, 1.0).unwrap();
        let ratio = level_resolution_time(&m, &s).unwrap().t_lr / concrete_resolution_time(0.01, 1e-6, 1.0);
        assert!((ratio - 1.0).abs() < 2e-4);
        assert_eq!(m.chi_prime, -0.01);
    }

    #[test]
    fn feasibility_examples() {
        let s = derive_scales(&SystemConfig::new(-0.5, 0.5, 1.0, 0.0, 0.5, 1.0, 1.0).unwrap()).unwrap();
        let m = ElementaryModel::new(0.245, 0.255, 0.0, 0.0, 0.001).unwrap();
        let r = feasibility_check(&m, &s, 10, 0.0, 1.0);
        assert_relative_eq!(r.series_ratio, 0.002, max_relative = 1e-9);
        assert!(r.series_ok());
        assert_relative_eq!(r.continuity_ratio, 2500.0, max_relative = 1e-9);
        assert!(r.continuity_ok());
        let m = ElementaryModel { tau: 1.0, ..m };
        let r = feasibility_check(&m, &s, 10, 0.1, 1000.0);
        assert_relative_eq!(r.phase_ratio, 100.0, max_relative = 1e-12);
        assert!(!r.phase_ok() && !r.passed());
        assert!(r.to_string().contains("FAIL"));
    }

    #[test]
    fn mean_energy_examples() {
        let s = scales();
        assert_eq!(mean_energy(&AmplitudePair::ground(), &s).unwrap(), -0.5);
        let even = AmplitudePair::new(c(FRAC_1_SQRT_2, 0.0), c(0.0, FRAC_1_SQRT_2));
        assert!(mean_energy(&even, &s).unwrap().abs() < 1e-15);
    }

    #[test]
    fn micro_trajectory_rejects_uninformative_and_misaligned_models() {
        let cfg = SystemConfig::new(-0.5, 0.5, PI, 0.0, 0.5, 1.0, 1.0).unwrap();
        let flat = ElementaryModel::new(0.5, 0.5, 0.0, 0.0, 0.01).unwrap();
        assert!(micro_trajectory(&cfg, &flat, 10, 1).is_err());
        let odd = ElementaryModel::new(0.49, 0.51, 0.0, 0.0, 0.003).unwrap();
        assert!(micro_trajectory(&cfg, &odd, 10, 1).is_err());
    }

    #[test]
    fn infeasible_runs_need_force() {
        let cfg = SystemConfig::new(-0.5, 0.5, PI, 0.0, 0.5, 1.0, 1.0).unwrap();
        let coarse = ElementaryModel::new(0.3, 0.7, 0.0, 0.0, 0.01).unwrap();
        assert!(matches!(micro_trajectory(&cfg, &coarse, 10, 1), Err(Error::Infeasible(_))));
        let opts = MicroOptions { force: true, ..Default::default() };
        let run = micro_trajectory_with(&cfg, &coarse, 10, 1, &opts).unwrap();
        assert!(!run.feasibility.passed());
        assert_eq!(run.series.len(), 10);
    }

    #[test]
    fn micro_trajectory_is_deterministic_and_consistent() {
        let cfg = SystemConfig::reference(4.0 / 3.0).unwrap();
        let (m, n) = default_model(&cfg).unwrap();
        let a = micro_trajectory(&cfg, &m, n, 3).unwrap();
        let b = micro_trajectory(&cfg, &m, n, 3).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.series, b.series);
        assert!(a.feasibility.passed());
        assert_eq!(a.readout.len(), a.series.len());
        assert_relative_eq!(*a.trajectory.times.last().unwrap(), cfg.t_total, max_relative = 1e-12);
        let total: usize = a.series.iter().map(|s| s.n_total).sum();
        assert_eq!(total, a.trajectory.len() - 1);
        assert!(a.trajectory.log_norm_sq.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn undriven_mean_ratio_matches_p1() {
        let cfg = SystemConfig::new(-0.5, 0.5, 0.0, 0.0, 0.0, 1.0, 1.0).unwrap();
        let m = ElementaryModel::new(0.3, 0.32, 0.0, 0.0, 0.01).unwrap();
        let n = 10;
        let mut sum = 0.0;
        let mut count = 0usize;
        for seed in 0..200 {
            for r in micro_trajectory(&cfg, &m, n, seed).unwrap().series {
                sum += r.n_ratio;
                count += 1;
            }
        }
        let mean = sum / count as f64;
        let se = (0.3f64 * 0.7 / (count * n) as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * se, "mean {mean} vs 0.3 ± {se}");
    }

    #[test]
    fn micro_ensemble_is_unweighted() {
        let cfg = SystemConfig::reference(2.0).unwrap();
        let (m, n) = default_model(&cfg).unwrap();
        let st = run_micro_ensemble(&cfg, &m, n, 200, 4, &MicroEnsembleOptions::default()).unwrap();
        assert!((st.ess - 200.0).abs() < 1e-9);
        let again = run_micro_ensemble(&cfg, &m, n, 200, 4, &MicroEnsembleOptions::default()).unwrap();
        assert_eq!(st, again);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn state() -> impl Strategy<Value = AmplitudePair> {
            (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
                .prop_filter("non-zero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-6)
                .prop_map(|(a, b, c, d)| AmplitudePair::new(C64::new(a, b), C64::new(c, d)))
        }

        fn probs() -> impl Strategy<Value = (f64, f64)> {
            (0.01f64..0.99, 0.01f64..0.99).prop_filter("informative", |(a, b)| (a - b).abs() > 1e-3)
        }

        proptest! {
            #[test]
            fn branches_are_complete(psi in state(), (p1, p2) in probs(), chi in -3.0f64..3.0, chip in -3.0f64..3.0) {
                let m = ElementaryModel::new(p1, p2, chi, chip, 1.0).unwrap();
                let plus = elementary_update(&psi, Outcome::Positive, &m).norm_sq();
                let minus = elementary_update(&psi, Outcome::Negative, &m).norm_sq();
                prop_assert!((plus + minus - psi.norm_sq()).abs() < 1e-12);
            }

            #[test]
            fn unordered_moduli_are_binomial(n in 1usize..40, (p1, p2) in probs()) {
                let m = ElementaryModel::new(p1, p2, 0.3, -0.2, 1.0).unwrap();
                let mut total = (0.0, 0.0);
                for k in 0..=n {
                    let (a, b) = series_amplitude_unordered(&m, k, n).unwrap();
                    let pmf = |p: f64| binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32);
                    prop_assert!((a.norm_sqr() - pmf(p1)).abs() < 1e-12);
                    prop_assert!((b.norm_sqr() - pmf(p2)).abs() < 1e-12);
                    total.0 += a.norm_sqr();
                    total.1 += b.norm_sqr();
                }
                prop_assert!((total.0 - 1.0).abs() < 1e-12 && (total.1 - 1.0).abs() < 1e-12);
            }

            #[test]
            fn mean_ratio_is_positive_probability(psi in state(), (p1, p2) in probs(), n in 1usize..30) {
                let m = ElementaryModel::new(p1, p2, 0.0, 0.0, 1.0).unwrap();
                let mean: f64 = (0..=n)
                    .map(|k| k as f64 / n as f64 * series_outcome_probability(&psi, &m, k, n).unwrap())
                    .sum();
                prop_assert!((mean - positive_probability(&psi, &m).unwrap()).abs() < 1e-12);
            }

            #[test]
            fn mean_energy_is_affine_in_mean_ratio(psi in state(), (p1, p2) in probs()) {
                let m = ElementaryModel::new(p1, p2, 0.0, 0.0, 1.0).unwrap();
                let s = scales();
                prop_assert!(mean_energy_residual(&psi, &m, &s).unwrap().abs() < 1e-12 * (1.0 / (p2 - p1).abs()).max(1.0));
                let n_bar = positive_probability(&psi, &m).unwrap();
                let e = n_to_energy(n_bar, &m, &s).unwrap();
                prop_assert!((e - mean_energy(&psi, &s).unwrap()).abs() < 1e-12 / (p2 - p1).abs());
            }
        }
    }

    #[test]
    fn gaussian_error_shrinks_with_series_length() {
        for p in [0.2, 0.3, 0.5, 0.7, 0.8] {
            let errs: Vec<f64> = [100, 200, 400, 800].iter().map(|&n| gaussian_limit_error(p, n).unwrap()).collect();
            assert!(errs.windows(2).all(|w| w[1] < w[0]), "p={p}: {errs:?}");
        }
    }
}
