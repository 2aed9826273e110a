//! Continuous fuzzy measurement of the energy of a resonantly driven
//! two-level system.
//!
//! Two descriptions of the same measurement are implemented side by side:
//!
//! * [`rpi`] integrates the Schrödinger equation with the complex
//!   Hamiltonian `H − iκ(H0 − E(t))²` for a given readout `E(t)`; the norm of
//!   the final state is the probability density of that readout. [`readout`]
//!   samples readouts from a flat prior and weights them by that density.
//! * [`micro`] simulates the measurement as a sequence of weak binary
//!   observations, grouped into series whose positive-result ratio gives
//!   the readout.
//!
//! [`validate`] holds the oracles that tie the two together and [`cli`] the
//! experiment runner behind the `contmeas` binary.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod micro;
pub mod readout;
pub mod rng;
pub mod rpi;
pub mod system;
pub mod validate;

pub use error::{Error, Result};
pub use readout::{EnsembleStats, PriorSpec, ReadoutCurve};
pub use rpi::Trajectory;
pub use system::{derive_scales, AmplitudePair, DerivedScales, SystemConfig};
