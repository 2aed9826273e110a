//! Shared domain types: the driven two-level system, its derived time and
//! energy scales, and the unnormalized amplitude pair that carries both the
//! state and the readout probability density.
//!
//! Units are ħ = 1 throughout. Energies are measured in the same units as
//! `1/time`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;

use crate::error::{invalid, Result};

/// Two-level system, π-pulse timing and measurement strength.
///
/// The driving matrix element is `v_amplitude` on `[t1, t2]` and zero
/// elsewhere. `kappa` is the strength of the continuous energy measurement;
/// `kappa = 0` switches the measurement off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub e1: f64,
    pub e2: f64,
    pub v_amplitude: f64,
    pub t1: f64,
    pub t2: f64,
    pub t_total: f64,
    pub kappa: f64,
}

/// Length of the measurement tail after the pulse in the reference geometry,
/// in units of the Rabi period.
pub const REFERENCE_TAIL: f64 = 0.08;

impl SystemConfig {
    pub fn new(e1: f64, e2: f64, v_amplitude: f64, t1: f64, t2: f64, t_total: f64, kappa: f64) -> Result<Self> {
        let cfg = SystemConfig { e1, e2, v_amplitude, t1, t2, t_total, kappa };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same as [`SystemConfig::new`] but with the measurement strength given
    /// through the dimensionless fuzziness `4π·T_lr/T_R`.
    ///
    /// An infinite ratio means no measurement (`kappa = 0`).
    pub fn with_fuzziness_ratio(
        e1: f64,
        e2: f64,
        v_amplitude: f64,
        t1: f64,
        t2: f64,
        t_total: f64,
        fuzziness_ratio: f64,
    ) -> Result<Self> {
        let kappa = kappa_for_ratio(e2 - e1, v_amplitude, fuzziness_ratio)?;
        Self::new(e1, e2, v_amplitude, t1, t2, t_total, kappa)
    }

    /// Reference geometry: `E1 = -1/2`, `E2 = +1/2`, `T_R = 1`, an exact
    /// π-pulse on `[0, T_R/2]` and a measurement that runs a short tail past
    /// the end of the pulse.
    pub fn reference(fuzziness_ratio: f64) -> Result<Self> {
        let t2 = 0.5;
        Self::with_fuzziness_ratio(-0.5, 0.5, PI, 0.0, t2, t2 + REFERENCE_TAIL, fuzziness_ratio)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.e1, self.e2, self.v_amplitude, self.t1, self.t2, self.t_total, self.kappa];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(invalid("system parameters must be finite"));
        }
        if self.e2 <= self.e1 {
            return Err(invalid(format!("need e2 > e1, got e1={} e2={}", self.e1, self.e2)));
        }
        if !(0.0 <= self.t1 && self.t1 <= self.t2 && self.t2 <= self.t_total) {
            return Err(invalid(format!(
                "need 0 <= t1 <= t2 <= t_total, got t1={} t2={} t_total={}",
                self.t1, self.t2, self.t_total
            )));
        }
        if self.t_total <= 0.0 {
            return Err(invalid("t_total must be positive"));
        }
        if self.kappa < 0.0 || self.v_amplitude < 0.0 {
            return Err(invalid("kappa and v must be non-negative"));
        }
        Ok(())
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    /// Driving matrix element at time `t`.
    pub fn drive_at(&self, t: f64) -> f64 {
        if t >= self.t1 && t < self.t2 {
            self.v_amplitude
        } else {
            0.0
        }
    }

    /// Length of the overlap of `[a, b]` with the pulse.
    pub fn pulse_overlap(&self, a: f64, b: f64) -> f64 {
        (b.min(self.t2) - a.max(self.t1)).max(0.0)
    }

    /// Whether `t2 - t1 = T_R/2` within `rel_tol`.
    pub fn is_pi_pulse(&self, rel_tol: f64) -> bool {
        if self.v_amplitude <= 0.0 {
            return false;
        }
        let half_rabi = 0.5 * PI / self.v_amplitude;
        ((self.t2 - self.t1) - half_rabi).abs() <= rel_tol * half_rabi
    }

    pub fn e0(&self) -> f64 {
        0.5 * (self.e1 + self.e2)
    }

    pub fn delta_e(&self) -> f64 {
        self.e2 - self.e1
    }

    pub fn t_rabi(&self) -> f64 {
        if self.v_amplitude > 0.0 {
            PI / self.v_amplitude
        } else {
            f64::INFINITY
        }
    }
}

fn kappa_for_ratio(delta_e: f64, v: f64, ratio: f64) -> Result<f64> {
    if delta_e <= 0.0 {
        return Err(invalid("need e2 > e1"));
    }
    if v <= 0.0 {
        return Err(invalid("fuzziness ratio needs a non-zero drive (T_R is infinite)"));
    }
    if ratio.is_nan() || ratio <= 0.0 {
        return Err(invalid(format!("fuzziness ratio must be positive, got {ratio}")));
    }
    if ratio.is_infinite() {
        return Ok(0.0);
    }
    // 4π T_lr / T_R = r, T_R = π/v, T_lr = 1/(κ ΔE²)  =>  κ = 4v/(r ΔE²)
    Ok(4.0 * v / (ratio * delta_e * delta_e))
}

/// Energy and time scales derived from a [`SystemConfig`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedScales {
    pub delta_e: f64,
    pub e0: f64,
    pub t_rabi: f64,
    /// Level resolution time `1/(κ ΔE²)`; infinite when `κ = 0`.
    pub t_lr: f64,
    /// `4π T_lr / T_R`.
    pub fuzziness_ratio: f64,
}

pub fn derive_scales(config: &SystemConfig) -> Result<DerivedScales> {
    let delta_e = config.delta_e();
    if !(delta_e > 0.0) {
        return Err(invalid(format!("level splitting must be positive, got {delta_e}")));
    }
    let t_rabi = config.t_rabi();
    let t_lr = if config.kappa > 0.0 { 1.0 / (config.kappa * delta_e * delta_e) } else { f64::INFINITY };
    let fuzziness_ratio = if t_lr.is_infinite() { f64::INFINITY } else { 4.0 * PI * t_lr / t_rabi };
    Ok(DerivedScales { delta_e, e0: config.e0(), t_rabi, t_lr, fuzziness_ratio })
}

/// Unnormalized coefficients `(C1, C2)` in the basis of time-dependent
/// eigenstates. The squared norm is the probability density of the readout
/// seen so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudePair {
    pub c1: C64,
    pub c2: C64,
}

impl AmplitudePair {
    pub fn new(c1: C64, c2: C64) -> Self {
        AmplitudePair { c1, c2 }
    }

    pub fn ground() -> Self {
        AmplitudePair { c1: C64::new(1.0, 0.0), c2: C64::new(0.0, 0.0) }
    }

    pub fn excited() -> Self {
        AmplitudePair { c1: C64::new(0.0, 0.0), c2: C64::new(1.0, 0.0) }
    }

    pub fn norm_sq(&self) -> f64 {
        self.c1.norm_sqr() + self.c2.norm_sqr()
    }

    /// Occupation `𝒫1 = |C1|²/‖C‖²`.
    pub fn occupation1(&self) -> f64 {
        let n1 = self.c1.norm_sqr();
        n1 / (n1 + self.c2.norm_sqr())
    }

    /// Occupation `𝒫2 = |C2|²/‖C‖²`.
    pub fn occupation2(&self) -> f64 {
        let n2 = self.c2.norm_sqr();
        n2 / (self.c1.norm_sqr() + n2)
    }

    pub fn is_finite(&self) -> bool {
        self.c1.is_finite() && self.c2.is_finite()
    }

    pub fn scale(&self, s: C64) -> Self {
        AmplitudePair { c1: self.c1 * s, c2: self.c2 * s }
    }

    /// Unit-norm copy. Returns `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm_sq();
        if n > 0.0 && n.is_finite() {
            Some(self.scale(C64::new(1.0 / n.sqrt(), 0.0)))
        } else {
            None
        }
    }
}
