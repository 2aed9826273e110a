//! Oracles tying the closed forms and the two descriptions of the
//! measurement together.

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};
use crate::micro::{
    binomial, default_model, elementary_update, gaussian_limit_error, level_resolution_time, n_to_energy,
    positive_probability, run_micro_ensemble, series_amplitude_unordered, series_outcome_probability, ElementaryModel,
    MicroEnsembleOptions, Outcome,
};
use crate::readout::{run_ensemble, Estimate, PriorSpec, ReadoutCurve};
use crate::rpi::{integrate_rpi, propagate};
use crate::system::{derive_scales, AmplitudePair, SystemConfig};

/// Largest series the brute-force oracle enumerates (`2^12` sequences).
pub const BRUTE_FORCE_MAX: usize = 12;

/// Hermitian 2×2 density matrix `[[r11, r12], [r12*, r22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Density2 {
    pub r11: f64,
    pub r22: f64,
    pub r12: C64,
}

impl Density2 {
    pub fn pure(s: &AmplitudePair) -> Self {
        Density2 { r11: s.c1.norm_sqr(), r22: s.c2.norm_sqr(), r12: s.c1 * s.c2.conj() }
    }

    pub fn trace(&self) -> f64 {
        self.r11 + self.r22
    }

    fn add(&mut self, o: &Density2) {
        self.r11 += o.r11;
        self.r22 += o.r22;
        self.r12 += o.r12;
    }

    pub fn max_abs_diff(&self, o: &Density2) -> f64 {
        (self.r11 - o.r11).abs().max((self.r22 - o.r22).abs()).max((self.r12 - o.r12).norm())
    }
}

/// Exact result of enumerating every outcome sequence of one series.
#[derive(Debug, Clone)]
pub struct BruteForceSeries {
    /// Probability of `N₊ = k` at index `k`.
    pub probabilities: Vec<f64>,
    /// Unnormalized post-series density summed over all sequences with
    /// `N₊ = k`; its trace is `probabilities[k]`.
    pub densities: Vec<Density2>,
}

/// Enumerates all `2^N` outcome sequences, applying the elementary factors
/// one observation at a time, and groups the results by `N₊`.
pub fn brute_force_series(state: &AmplitudePair, model: &ElementaryModel, n_total: usize) -> Result<BruteForceSeries> {
    if n_total > BRUTE_FORCE_MAX {
        return Err(invalid(format!("brute force is limited to N <= {BRUTE_FORCE_MAX}, got {n_total}")));
    }
    let psi = state.normalized().ok_or_else(|| invalid("state must be non-zero and finite"))?;
    let zero = Density2 { r11: 0.0, r22: 0.0, r12: C64::new(0.0, 0.0) };
    let mut densities = vec![zero; n_total + 1];
    for mask in 0u32..(1u32 << n_total) {
        let mut s = psi;
        for k in 0..n_total {
            let o = if mask >> k & 1 == 1 { Outcome::Positive } else { Outcome::Negative };
            s = elementary_update(&s, o, model);
        }
        densities[mask.count_ones() as usize].add(&Density2::pure(&s));
    }
    let probabilities = densities.iter().map(Density2::trace).collect();
    Ok(BruteForceSeries { probabilities, densities })
}

/// Largest discrepancy between brute-force enumeration and the closed forms
/// for one `(state, model, N)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleDiscrepancy {
    /// `|P_brute(N₊) − P_closed(N₊)|`.
    pub outcome_probability: f64,
    /// Per-`N₊` density against `√C(N,N₊)·U·ψ` (componentwise).
    pub aggregated_state: f64,
    /// `| |U_i|² − C(N,N₊) p_i^{N₊}(1−p_i)^{N−N₊} |`.
    pub binomial_modulus: f64,
    /// `|Σ P − 1|`.
    pub total_probability: f64,
    /// `|n̄ − p|`.
    pub mean_ratio: f64,
}

impl OracleDiscrepancy {
    pub fn max(&self) -> f64 {
        [
            self.outcome_probability,
            self.aggregated_state,
            self.binomial_modulus,
            self.total_probability,
            self.mean_ratio,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn check_against_brute_force(
    state: &AmplitudePair,
    model: &ElementaryModel,
    n_total: usize,
) -> Result<OracleDiscrepancy> {
    let psi = state.normalized().ok_or_else(|| invalid("state must be non-zero and finite"))?;
    let bf = brute_force_series(&psi, model, n_total)?;
    let mut d = OracleDiscrepancy {
        outcome_probability: 0.0,
        aggregated_state: 0.0,
        binomial_modulus: 0.0,
        total_probability: (bf.probabilities.iter().sum::<f64>() - 1.0).abs(),
        mean_ratio: 0.0,
    };
    let mut mean = 0.0;
    for k in 0..=n_total {
        let closed = series_outcome_probability(&psi, model, k, n_total)?;
        d.outcome_probability = d.outcome_probability.max((closed - bf.probabilities[k]).abs());
        mean += k as f64 / n_total as f64 * bf.probabilities[k];

        let (u1, u2) = series_amplitude_unordered(model, k, n_total)?;
        let aggregated = Density2::pure(&AmplitudePair::new(psi.c1 * u1, psi.c2 * u2));
        d.aggregated_state = d.aggregated_state.max(aggregated.max_abs_diff(&bf.densities[k]));

        let c = binomial(n_total, k);
        let pmf = |p: f64| c * p.powi(k as i32) * (1.0 - p).powi((n_total - k) as i32);
        let dm = (u1.norm_sqr() - pmf(model.p1)).abs().max((u2.norm_sqr() - pmf(model.p2)).abs());
        d.binomial_modulus = d.binomial_modulus.max(dm);
    }
    d.mean_ratio = (mean - positive_probability(&psi, model)?).abs();
    Ok(d)
}

/// Agreement between the exact observation-by-observation series operator
/// and the effective complex-Hamiltonian evolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    /// `max |M_exact − s·M_eff| / max |M_exact|` with the best complex `s`.
    pub operator_error: f64,
    /// `N²·|Δp|·vτ/√p0`.
    pub predicted_bound: f64,
    /// Total-variation distance between the exact `N₊` distribution of the
    /// equal superposition and its Gaussian approximation.
    pub distribution_distance: f64,
    /// `operator_error` of the same comparison without drive.
    pub gaussian_floor: f64,
}

type Mat2 = [[C64; 2]; 2];

const IDENTITY: Mat2 = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(1.0, 0.0)]];

fn matmul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut m = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    m
}

/// `exp(M)` for a 2×2 complex matrix.
fn expm2(m: &Mat2) -> Mat2 {
    let half_tr = (m[0][0] + m[1][1]) * 0.5;
    let d = m[0][0] - half_tr;
    // traceless part B squares to s²·I
    let s = (d * d + m[0][1] * m[1][0]).sqrt();
    let (ch, sh_over_s) = if s.norm() < 1e-8 {
        let s2 = s * s;
        (C64::new(1.0, 0.0) + s2 * 0.5, C64::new(1.0, 0.0) + s2 / 6.0)
    } else {
        (s.cosh(), s.sinh() / s)
    };
    let e = half_tr.exp();
    [[e * (ch + sh_over_s * d), e * sh_over_s * m[0][1]], [e * sh_over_s * m[1][0], e * (ch - sh_over_s * d)]]
}

fn rotation(theta: f64) -> Mat2 {
    let (c, s) = (C64::new(theta.cos(), 0.0), C64::new(0.0, -theta.sin()));
    [[c, s], [s, c]]
}

fn relative_deviation(exact: &Mat2, eff: &Mat2) -> f64 {
    let flat = |m: &Mat2| [m[0][0], m[0][1], m[1][0], m[1][1]];
    let (x, e) = (flat(exact), flat(eff));
    let num: C64 = e.iter().zip(&x).map(|(a, b)| a.conj() * b).sum();
    let den: f64 = e.iter().map(|a| a.norm_sqr()).sum();
    let s = if den > 0.0 { num / den } else { C64::new(0.0, 0.0) };
    let scale = x.iter().map(|a| a.norm()).fold(0.0, f64::max);
    x.iter().zip(&e).map(|(a, b)| (a - b * s).norm()).fold(0.0, f64::max) / scale
}

fn series_operators(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    counts: &[usize],
) -> Result<(Mat2, Mat2)> {
    let scales = derive_scales(config)?;
    let kappa = level_resolution_time(model, &scales)?.kappa;
    let dt = n_per_series as f64 * model.tau;
    let mut exact = IDENTITY;
    let mut eff = IDENTITY;
    for (j, &n_plus) in counts.iter().enumerate() {
        if n_plus > n_per_series {
            return Err(invalid(format!("series {j}: count {n_plus} exceeds series length {n_per_series}")));
        }
        let t0 = j as f64 * dt;
        let mut series = IDENTITY;
        for k in 0..n_per_series {
            // spread the positives evenly through the series
            let positive = (k + 1) * n_plus / n_per_series > k * n_plus / n_per_series;
            let (f1, f2) = if positive { model.positive_factors() } else { model.negative_factors() };
            let obs = [[f1, C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), f2]];
            let t = t0 + k as f64 * model.tau;
            let rot = rotation(config.v_amplitude * config.pulse_overlap(t, t + model.tau));
            series = matmul(&rot, &matmul(&obs, &series));
        }
        let c = C64::new(binomial(n_per_series, n_plus).sqrt(), 0.0);
        series.iter_mut().flatten().for_each(|x| *x *= c);
        exact = matmul(&series, &exact);

        let e = n_to_energy(n_plus as f64 / n_per_series as f64, model, &scales)?;
        let v_mean = config.v_amplitude * config.pulse_overlap(t0, t0 + dt) / dt;
        let gen = [
            [C64::new(-kappa * (config.e1 - e).powi(2) * dt, 0.0), C64::new(0.0, -v_mean * dt)],
            [C64::new(0.0, -v_mean * dt), C64::new(-kappa * (config.e2 - e).powi(2) * dt, 0.0)],
        ];
        eff = matmul(&expm2(&gen), &eff);
    }
    Ok((exact, eff))
}

/// Compares the exact product of observations and drive rotations over a
/// sequence of series (series `j` has `counts[j]` positives, spread evenly)
/// with the effective evolution `exp[(−iH − κ(E − H0)²)Nτ]` per series.
pub fn compare_series_evolution(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    counts: &[usize],
) -> Result<EquivalenceReport> {
    config.validate()?;
    model.validate()?;
    if n_per_series == 0 || counts.is_empty() {
        return Err(invalid("need at least one non-empty series"));
    }
    let (exact, eff) = series_operators(config, model, n_per_series, counts)?;
    let undriven = SystemConfig { v_amplitude: 0.0, ..*config };
    let (exact0, eff0) = series_operators(&undriven, model, n_per_series, counts)?;

    let v = config.v_amplitude;
    let nf = n_per_series as f64;
    let predicted_bound = nf * nf * model.delta_p().abs() * v * model.tau / model.p0().sqrt();

    let (gp1, gp2) = (model.p1, model.p2);
    let gauss_pmf = |p: f64, k: usize| {
        let var = nf * p * (1.0 - p);
        (-(k as f64 - nf * p).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    };
    let even = AmplitudePair::new(
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
        C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0),
    );
    let mut tv = 0.0;
    for k in 0..=n_per_series {
        let exact_p = series_outcome_probability(&even, model, k, n_per_series)?;
        let approx = 0.5 * (gauss_pmf(gp1, k) + gauss_pmf(gp2, k));
        tv += (exact_p - approx).abs();
    }

    Ok(EquivalenceReport {
        operator_error: relative_deviation(&exact, &eff),
        predicted_bound,
        distribution_distance: 0.5 * tv,
        gaussian_floor: relative_deviation(&exact0, &eff0),
    })
}

/// RPI (flat prior, weighted) against micro (ancestral) estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossSamplerReport {
    pub rpi_transition: Estimate,
    pub micro_transition: Estimate,
    pub rpi_noise: Estimate,
    pub micro_noise: Estimate,
    pub rpi_ess: f64,
}

impl CrossSamplerReport {
    fn z(a: &Estimate, b: &Estimate) -> f64 {
        let se = (a.se * a.se + b.se * b.se).sqrt();
        let d = (a.value - b.value).abs();
        if se > 0.0 {
            d / se
        } else if d == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }

    /// `|Δ p_transition|` in combined standard errors.
    pub fn transition_z(&self) -> f64 {
        Self::z(&self.rpi_transition, &self.micro_transition)
    }

    pub fn noise_z(&self) -> f64 {
        Self::z(&self.rpi_noise, &self.micro_noise)
    }
}

pub fn cross_sampler_agreement(
    config: &SystemConfig,
    model: &ElementaryModel,
    n_per_series: usize,
    prior: &PriorSpec,
    n_samples: usize,
    seed: u64,
) -> Result<CrossSamplerReport> {
    let scales = derive_scales(config)?;
    let implied = level_resolution_time(model, &scales)?.kappa;
    if (implied - config.kappa).abs() > 1e-6 * config.kappa.max(implied) {
        return Err(invalid(format!("model implies kappa={implied} but the configuration has kappa={}", config.kappa)));
    }
    let rpi = run_ensemble(config, prior, n_samples, seed)?;
    let micro =
        run_micro_ensemble(config, model, n_per_series, n_samples, seed ^ 0x5eed, &MicroEnsembleOptions::default())?;
    Ok(CrossSamplerReport {
        rpi_transition: rpi.p_transition_state,
        micro_transition: micro.p_transition_state,
        rpi_noise: rpi.noise,
        micro_noise: micro.noise,
        rpi_ess: rpi.ess,
    })
}

/// Lab-frame amplitudes `a_i = C_i·e^{−iE_i t}` of rotating-frame amplitudes.
pub fn to_lab_frame(state: &AmplitudePair, config: &SystemConfig, t: f64) -> AmplitudePair {
    AmplitudePair::new(state.c1 * C64::from_polar(1.0, -config.e1 * t), state.c2 * C64::from_polar(1.0, -config.e2 * t))
}

/// Integrates the measurement in the lab frame, with the resonant drive
/// `v(e^{iωt}|1⟩⟨2| + h.c.)`, `ω = E2 − E1`, and returns the final
/// amplitudes (unnormalized).
pub fn lab_frame_final_state(
    config: &SystemConfig,
    readout: &ReadoutCurve,
    initial: AmplitudePair,
    steps: usize,
) -> Result<AmplitudePair> {
    config.validate()?;
    if steps == 0 {
        return Err(invalid("need at least one step"));
    }
    let omega = config.delta_e();
    let h = config.t_total / steps as f64;
    // readout and pulse edges should fall on step boundaries; E and v are
    // frozen at the step midpoint so RK4 never straddles a jump
    let rhs = |t: f64, mid: f64, a: &AmplitudePair| {
        let e = readout.value_at(mid);
        let v = config.drive_at(mid);
        let d1 = C64::new(-config.kappa * (config.e1 - e).powi(2), -config.e1);
        let d2 = C64::new(-config.kappa * (config.e2 - e).powi(2), -config.e2);
        let v12 = C64::from_polar(v, omega * t);
        let i = C64::new(0.0, 1.0);
        AmplitudePair::new(d1 * a.c1 - i * v12 * a.c2, d2 * a.c2 - i * v12.conj() * a.c1)
    };
    let axpy = |a: &AmplitudePair, k: &AmplitudePair, f: f64| AmplitudePair::new(a.c1 + k.c1 * f, a.c2 + k.c2 * f);
    let mut a = initial;
    for n in 0..steps {
        let t = n as f64 * h;
        let mid = t + 0.5 * h;
        let k1 = rhs(t, mid, &a);
        let k2 = rhs(mid, mid, &axpy(&a, &k1, 0.5 * h));
        let k3 = rhs(mid, mid, &axpy(&a, &k2, 0.5 * h));
        let k4 = rhs(t + h, mid, &axpy(&a, &k3, h));
        a = AmplitudePair::new(
            a.c1 + (k1.c1 + (k2.c1 + k3.c1) * 2.0 + k4.c1) * (h / 6.0),
            a.c2 + (k1.c2 + (k2.c2 + k3.c2) * 2.0 + k4.c2) * (h / 6.0),
        );
    }
    Ok(a)
}

/// One row of the validation table.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl ValidationRow {
    fn at_most(name: &str, value: f64, threshold: f64) -> Self {
        ValidationRow { name: name.into(), value, threshold, passed: value <= threshold }
    }
}

/// Sweep for the operator-equivalence check: `p0 = 1/2`, `Δp = 0.02`,
/// `N = 10`, two series with 3 and 7 positives, and `vτ` halved three times
/// from 0.028.
pub fn equivalence_sweep() -> Result<Vec<EquivalenceReport>> {
    let counts = [3usize, 7];
    let n = 10;
    let model = ElementaryModel::new(0.49, 0.51, 0.0, 0.0, 1.0)?;
    [0.028, 0.014, 0.007, 0.0035]
        .iter()
        .map(|&vtau| {
            let t_total = model.tau * (n * counts.len()) as f64;
            let config = SystemConfig::new(-0.5, 0.5, vtau / model.tau, 0.0, t_total, t_total, 1.0)?;
            compare_series_evolution(&config, &model, n, &counts)
        })
        .collect()
}

fn random_cases(seed: u64, count: usize) -> Vec<(AmplitudePair, f64, f64)> {
    use rand::Rng;
    let mut rng = crate::rng::stream_rng(seed, 0);
    (0..count)
        .map(|_| {
            let s = AmplitudePair::new(
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            );
            (s, rng.random_range(0.01..0.99), rng.random_range(0.01..0.99))
        })
        .collect()
}

/// Runs every oracle and returns the pass/fail table.
///
/// `cross_samples` sets the ensemble size of the cross-sampler row
/// (0 skips it).
pub fn run_validation_suite(seed: u64, cross_samples: usize) -> Result<Vec<ValidationRow>> {
    let mut rows = Vec::new();

    // closed-form series statistics against enumeration
    let mut worst = OracleDiscrepancy {
        outcome_probability: 0.0,
        aggregated_state: 0.0,
        binomial_modulus: 0.0,
        total_probability: 0.0,
        mean_ratio: 0.0,
    };
    for (i, (state, p1, p2)) in random_cases(seed, 24).into_iter().enumerate() {
        let model = ElementaryModel::new(p1, p2, 0.3 * i as f64, -0.2 * i as f64, 1.0)?;
        for n in 1..=BRUTE_FORCE_MAX {
            let d = check_against_brute_force(&state, &model, n)?;
            worst.outcome_probability = worst.outcome_probability.max(d.outcome_probability);
            worst.aggregated_state = worst.aggregated_state.max(d.aggregated_state);
            worst.binomial_modulus = worst.binomial_modulus.max(d.binomial_modulus);
            worst.total_probability = worst.total_probability.max(d.total_probability);
            worst.mean_ratio = worst.mean_ratio.max(d.mean_ratio);
        }
    }
    rows.push(ValidationRow::at_most("brute_force_outcome_probability", worst.outcome_probability, 1e-12));
    rows.push(ValidationRow::at_most("brute_force_aggregated_state", worst.aggregated_state, 1e-12));
    rows.push(ValidationRow::at_most("brute_force_binomial_modulus", worst.binomial_modulus, 1e-12));
    rows.push(ValidationRow::at_most("brute_force_total_probability", worst.total_probability, 1e-12));
    rows.push(ValidationRow::at_most("brute_force_mean_ratio", worst.mean_ratio, 1e-12));

    // local limit theorem
    let mut gauss = 0.0f64;
    let mut monotone = true;
    for p in [0.3, 0.5, 0.7] {
        let errs = [100, 200, 400, 800].iter().map(|&n| gaussian_limit_error(p, n)).collect::<Result<Vec<_>>>()?;
        monotone &= errs.windows(2).all(|w| w[1] < w[0]);
        gauss = gauss.max(errs[2]);
    }
    rows.push(ValidationRow::at_most("gaussian_limit_error_n400", gauss, 0.02));
    rows.push(ValidationRow {
        name: "gaussian_limit_monotone".into(),
        value: monotone as u8 as f64,
        threshold: 1.0,
        passed: monotone,
    });

    // micro ↔ effective evolution
    let sweep = equivalence_sweep()?;
    let monotone = sweep.windows(2).all(|w| w[1].operator_error < w[0].operator_error);
    rows.push(ValidationRow {
        name: "operator_error_monotone".into(),
        value: monotone as u8 as f64,
        threshold: 1.0,
        passed: monotone,
    });
    let last = sweep.last().expect("non-empty sweep");
    rows.push(ValidationRow::at_most("operator_error_small_ratio", last.operator_error, 1e-2));
    let fitted: Vec<f64> = sweep.iter().map(|r| r.operator_error / (r.predicted_bound + r.gaussian_floor)).collect();
    let mean = fitted.iter().sum::<f64>() / fitted.len() as f64;
    let spread = fitted.iter().map(|c| (c / mean - 1.0).abs()).fold(0.0, f64::max);
    rows.push(ValidationRow::at_most("operator_error_fitted_constant_spread", spread, 0.5));

    // rotating-frame integrator
    let rabi = SystemConfig::new(-0.5, 0.5, std::f64::consts::PI, 0.0, 0.5, 0.5, 0.0)?;
    let tr = integrate_rpi(&rabi, &ReadoutCurve::constant(0.01, 0.5, 0.0)?, AmplitudePair::ground())?;
    let dev = (tr.final_p2() - 1.0).abs().max((tr.norm_sq(tr.len() - 1) - 1.0).abs());
    rows.push(ValidationRow::at_most("rabi_pi_pulse", dev, 1e-8));

    let decay = SystemConfig::new(-0.5, 0.5, 0.0, 0.0, 0.0, 1.3, 0.7)?;
    let tr = integrate_rpi(&decay, &ReadoutCurve::constant(0.026, 1.3, 0.0)?, AmplitudePair::ground())?;
    let dev = (tr.norm_sq(tr.len() - 1) - (-1.3 * 0.7 / 2.0f64).exp()).abs();
    rows.push(ValidationRow::at_most("decay_closed_form", dev, 1e-8));

    // lab frame vs rotating frame
    let cfg = SystemConfig::new(-0.5, 0.5, std::f64::consts::PI, 0.1, 0.6, 0.8, 2.0)?;
    let readout = ReadoutCurve::new(0.1, 0.8, vec![0.2, -0.4, 0.9, 0.1, -0.2, 0.6, 0.3, 0.5])?;
    let rot = propagate(&cfg, &readout, AmplitudePair::ground(), &[], None, |_, _, _, _| {})?;
    let rot = rot.state.scale(C64::new((0.5 * rot.log_norm_sq).exp(), 0.0));
    let lab = lab_frame_final_state(&cfg, &readout, AmplitudePair::ground(), 8_000)?;
    let mapped = to_lab_frame(&rot, &cfg, cfg.t_total);
    let dev = (lab.c1 - mapped.c1).norm().max((lab.c2 - mapped.c2).norm());
    rows.push(ValidationRow::at_most("lab_frame_change_of_basis", dev, 1e-8));

    if cross_samples > 0 {
        let cfg = SystemConfig::reference(10.0 / 3.0)?;
        let (model, n) = default_model(&cfg)?;
        let prior = PriorSpec::auto(&cfg)?;
        let r = cross_sampler_agreement(&cfg, &model, n, &prior, cross_samples, seed)?;
        rows.push(ValidationRow::at_most("cross_sampler_transition_z", r.transition_z(), 3.0));
    }
    Ok(rows)
}

pub fn write_validation_csv<W: std::io::Write>(rows: &[ValidationRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "value", "threshold", "passed"])?;
    for r in rows {
        w.write_record(&[
            r.name.clone(),
            format!("{:e}", r.value),
            format!("{:e}", r.threshold),
            r.passed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
