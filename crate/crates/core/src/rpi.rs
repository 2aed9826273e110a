//! Complex-Hamiltonian dynamics for a given readout.
//!
//! In the rotating basis the coefficients obey
//!
//! ```text
//! dC1/dt = -i v(t) C2 - κ (E1 - E(t))² C1
//! dC2/dt = -i v(t) C1 - κ (E2 - E(t))² C2
//! ```
//!
//! The readout and the drive are piecewise constant, so the integrator places
//! a breakpoint at every readout edge and at both pulse edges and takes fixed
//! classical RK4 steps inside each piece. The state is renormalized at every
//! breakpoint and the lost norm is accumulated as `ln ‖ψ‖²`, which keeps
//! long or strongly damped runs free of underflow.

use std::io::Write;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Error, Result};
use crate::readout::ReadoutCurve;
use crate::system::{AmplitudePair, SystemConfig};

/// Step cap relative to the readout segment.
const STEPS_PER_SEGMENT: f64 = 8.0;
/// Step cap relative to the Rabi period.
const STEPS_PER_RABI: f64 = 1000.0;
/// Bound on `h·λ` for the fastest damping rate in the run.
const MAX_DAMPING_PER_STEP: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct RpiOptions {
    /// Number of uniformly spaced output points on `[0, T]` (both ends
    /// included). Values below 2 are raised to 2.
    pub record_points: usize,
    /// Use this RK4 step (shortened to fit each piece) instead of the
    /// default caps. Meant for convergence studies.
    pub step_override: Option<f64>,
}

impl Default for RpiOptions {
    fn default() -> Self {
        RpiOptions { record_points: 201, step_override: None }
    }
}

/// State history for one readout.
///
/// `states` are unit-normalized; the norm that the complex Hamiltonian
/// removes is kept separately in `log_norm_sq`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<AmplitudePair>,
    pub log_norm_sq: Vec<f64>,
    pub p2: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Unnormalized amplitudes `(C1, C2)` at record `i`.
    pub fn amplitudes(&self, i: usize) -> AmplitudePair {
        self.states[i].scale(C64::new((0.5 * self.log_norm_sq[i]).exp(), 0.0))
    }

    pub fn norm_sq(&self, i: usize) -> f64 {
        self.log_norm_sq[i].exp()
    }

    pub fn final_p2(&self) -> f64 {
        *self.p2.last().expect("trajectory is never empty")
    }

    pub fn final_state(&self) -> AmplitudePair {
        *self.states.last().expect("trajectory is never empty")
    }

    /// CSV with columns `t, re_c1, im_c1, re_c2, im_c2, p2, norm_sq`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "re_c1", "im_c1", "re_c2", "im_c2", "p2", "norm_sq"])?;
        for i in 0..self.len() {
            let a = self.amplitudes(i);
            w.write_record(&[
                self.times[i].to_string(),
                a.c1.re.to_string(),
                a.c1.im.to_string(),
                a.c2.re.to_string(),
                a.c2.im.to_string(),
                self.p2[i].to_string(),
                self.norm_sq(i).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// End state of a propagation without the history.
#[derive(Debug, Clone, Copy)]
pub struct FinalState {
    pub state: AmplitudePair,
    pub log_norm_sq: f64,
}

impl FinalState {
    pub fn p2(&self) -> f64 {
        self.state.occupation2()
    }
}

pub fn integrate_rpi(config: &SystemConfig, readout: &ReadoutCurve, initial: AmplitudePair) -> Result<Trajectory> {
    integrate_rpi_with(config, readout, initial, &RpiOptions::default())
}

pub fn integrate_rpi_with(
    config: &SystemConfig,
    readout: &ReadoutCurve,
    initial: AmplitudePair,
    opts: &RpiOptions,
) -> Result<Trajectory> {
    let n = opts.record_points.max(2);
    let t_total = config.t_total;
    let record: Vec<f64> = (0..n).map(|i| t_total * i as f64 / (n - 1) as f64).collect();
    let mut traj = Trajectory {
        times: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
        log_norm_sq: Vec::with_capacity(n),
        p2: Vec::with_capacity(n),
    };
    propagate(config, readout, initial, &record, opts.step_override, |_, t, state, log_norm| {
        traj.times.push(t);
        traj.states.push(*state);
        traj.log_norm_sq.push(log_norm);
        traj.p2.push(state.occupation2());
    })?;
    Ok(traj)
}

/// Propagates to `T` and calls `observe(index, t, unit_state, ln‖ψ‖²)` at
/// each of the ascending `record_times` (which must lie in `[0, T]`).
pub fn propagate(
    config: &SystemConfig,
    readout: &ReadoutCurve,
    initial: AmplitudePair,
    record_times: &[f64],
    step_override: Option<f64>,
    mut observe: impl FnMut(usize, f64, &AmplitudePair, f64),
) -> Result<FinalState> {
    config.validate()?;
    let t_total = config.t_total;
    if ((readout.t_total() - t_total).abs()) > 1e-9 * t_total {
        return Err(invalid(format!(
            "readout covers [0, {}] but the measurement lasts {}",
            readout.t_total(),
            t_total
        )));
    }
    let mut state = initial.normalized().ok_or_else(|| invalid("initial state must be non-zero and finite"))?;
    let mut log_norm = 0.0;

    let h_max = match step_override {
        Some(h) if h > 0.0 => h,
        Some(h) => return Err(invalid(format!("step must be positive, got {h}"))),
        None => step_cap(config, readout),
    };
    let breaks = breakpoints(config, readout, record_times);
    let tol = 1e-12 * t_total;

    let mut next_record = 0;
    let mut flush = |t: f64, state: &AmplitudePair, log_norm: f64, next: &mut usize| {
        while *next < record_times.len() && record_times[*next] <= t + tol {
            observe(*next, record_times[*next], state, log_norm);
            *next += 1;
        }
    };
    flush(0.0, &state, log_norm, &mut next_record);

    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        let mid = 0.5 * (a + b);
        let e = readout.value_at(mid);
        let gen = Generator {
            v: config.drive_at(mid),
            d1: config.kappa * (config.e1 - e).powi(2),
            d2: config.kappa * (config.e2 - e).powi(2),
        };
        let steps = ((b - a) / h_max).ceil().max(1.0);
        let h = (b - a) / steps;
        for _ in 0..steps as usize {
            state = gen.rk4_step(state, h);
        }
        let n = state.norm_sq();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::Numerical(format!("state norm became {n} at t={b}")));
        }
        log_norm += n.ln();
        state = state.scale(C64::new(1.0 / n.sqrt(), 0.0));
        flush(b, &state, log_norm, &mut next_record);
    }
    Ok(FinalState { state, log_norm_sq: log_norm })
}

fn step_cap(config: &SystemConfig, readout: &ReadoutCurve) -> f64 {
    let mut h = readout.dt() / STEPS_PER_SEGMENT;
    let t_rabi = config.t_rabi();
    if t_rabi.is_finite() {
        h = h.min(t_rabi / STEPS_PER_RABI);
    }
    let worst =
        readout.samples().iter().map(|&e| (config.e1 - e).powi(2).max((config.e2 - e).powi(2))).fold(0.0, f64::max);
    let rate = config.kappa * worst + config.v_amplitude;
    if rate > 0.0 {
        h = h.min(MAX_DAMPING_PER_STEP / rate);
    }
    h.min(config.t_total)
}

fn breakpoints(config: &SystemConfig, readout: &ReadoutCurve, record_times: &[f64]) -> Vec<f64> {
    let t_total = config.t_total;
    let mut pts: Vec<f64> = readout
        .edges()
        .chain([config.t1, config.t2])
        .chain(record_times.iter().copied())
        .filter(|t| *t >= 0.0 && *t <= t_total)
        .collect();
    pts.push(0.0);
    pts.push(t_total);
    pts.sort_by(f64::total_cmp);
    let tol = 1e-12 * t_total;
    pts.dedup_by(|b, a| (*b - *a).abs() <= tol);
    // keep T itself as the last point even if a near-duplicate preceded it
    if let Some(last) = pts.last_mut() {
        *last = t_total;
    }
    pts
}

/// Generator `[[−d1, −iv], [−iv, −d2]]`, constant over a piece.
#[derive(Debug, Clone, Copy)]
struct Generator {
    v: f64,
    d1: f64,
    d2: f64,
}

impl Generator {
    #[inline]
    fn apply(&self, s: AmplitudePair) -> AmplitudePair {
        let miv = C64::new(0.0, -self.v);
        AmplitudePair { c1: miv * s.c2 - s.c1 * self.d1, c2: miv * s.c1 - s.c2 * self.d2 }
    }

    #[inline]
    fn rk4_step(&self, s: AmplitudePair, h: f64) -> AmplitudePair {
        let add =
            |a: AmplitudePair, b: AmplitudePair, f: f64| AmplitudePair { c1: a.c1 + b.c1 * f, c2: a.c2 + b.c2 * f };
        let k1 = self.apply(s);
        let k2 = self.apply(add(s, k1, 0.5 * h));
        let k3 = self.apply(add(s, k2, 0.5 * h));
        let k4 = self.apply(add(s, k3, h));
        let w = h / 6.0;
        AmplitudePair {
            c1: s.c1 + (k1.c1 + (k2.c1 + k3.c1) * 2.0 + k4.c1) * w,
            c2: s.c2 + (k1.c2 + (k2.c2 + k3.c2) * 2.0 + k4.c2) * w,
        }
    }
}

/// Unmeasured Rabi evolution from `(1, 0)`: `C1 = cos θ`, `C2 = −i sin θ`
/// with `θ` the drive integrated over the part of the pulse before `t`.
pub fn rabi_reference(config: &SystemConfig, t: f64) -> AmplitudePair {
    let theta = config.v_amplitude * config.pulse_overlap(0.0, t);
    AmplitudePair::new(C64::new(theta.cos(), 0.0), C64::new(0.0, -theta.sin()))
}

/// `P[E] = ‖ψ_T‖²` of the readout that produced `traj`.
pub fn probability_density(traj: &Trajectory) -> f64 {
    traj.log_norm_sq.last().copied().unwrap_or(0.0).exp()
}
