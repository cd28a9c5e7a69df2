//! Worst-case SNR analysis and spreading-sequence optimization for
//! asynchronous CDMA over frequency-selective WSSUS Rician fading.
//!
//! - [`model`]: system/channel parameters and the sequence container.
//! - [`spectral`]: the `w_m(0)` / `w_m(1/2N)` bases and `Φ`, `Φ̂`.
//! - [`correlation`]: quadratic forms, partial correlations, `S_m^{i,k}`.
//! - [`snr`]: variance components and the closed-form SNR lower bound.
//! - [`optimizer`]: the real-embedded sequence design problem and its KKT
//!   certificate.
//! - [`sim`]: complex-baseband Monte Carlo link simulator.
//! - [`sequences`]: Gold, random and Chebyshev baseline families.

pub mod correlation;
pub mod error;
pub mod io;
pub mod model;
pub mod optimizer;
pub mod sequences;
pub mod sim;
pub mod snr;
pub mod spectral;

pub use error::{Error, Result};
