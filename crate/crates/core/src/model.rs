//! System parameters, per-user channel descriptions and the spreading
//! sequence container shared by every other module.
//!
//! Index convention: the math uses 1-based chip and frequency indices
//! `n, m ∈ {1..N}`. Storage is 0-based everywhere, so math index `m` lives
//! at slot `m - 1`. In particular the all-ones basis vector `w_N(0)` is
//! stored at slot `N - 1`, and cosine weights like `cos(2πm/N)` are
//! evaluated with `m = slot + 1`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `|‖s‖² − N|` for feasibility checks.
pub const NORM_TOLERANCE: f64 = 1e-9;

/// Global link parameters. The chip duration is always derived as `T / N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemModel {
    pub n_chips: usize,
    pub n_users: usize,
    /// Signal power `P`.
    pub power: f64,
    /// Symbol duration `T` in seconds.
    pub symbol_duration: f64,
    /// `N₀`; the two-sided noise density is `N₀ / 2`.
    pub noise_density: f64,
}

impl SystemModel {
    pub fn new(
        n_chips: usize,
        n_users: usize,
        power: f64,
        symbol_duration: f64,
        noise_density: f64,
    ) -> Result<Self> {
        let model = Self {
            n_chips,
            n_users,
            power,
            symbol_duration,
            noise_density,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_chips == 0 {
            return Err(Error::NonPositiveParameter("n_chips"));
        }
        if self.n_users == 0 {
            return Err(Error::NonPositiveParameter("n_users"));
        }
        if !(self.power > 0.0) || !self.power.is_finite() {
            return Err(Error::NonPositiveParameter("power"));
        }
        if !(self.symbol_duration > 0.0) || !self.symbol_duration.is_finite() {
            return Err(Error::NonPositiveParameter("symbol_duration"));
        }
        if !(self.noise_density >= 0.0) || !self.noise_density.is_finite() {
            return Err(Error::InvalidParameter {
                name: "noise_density",
                reason: "must be a nonnegative finite number".into(),
            });
        }
        Ok(())
    }

    /// `T_c = T / N`.
    pub fn chip_duration(&self) -> f64 {
        self.symbol_duration / self.n_chips as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum ProfileShape {
    Rectangular,
    /// `g(τ) = C·exp(−rate·τ)` on `[0, span]`.
    TruncatedExponential { rate: f64 },
}

impl Default for ProfileShape {
    fn default() -> Self {
        ProfileShape::Rectangular
    }
}

/// Delay power profile `g(τ)`: zero outside `[0, span]`, bounded by `height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPowerProfile {
    pub shape: ProfileShape,
    pub height: f64,
    /// Support length in seconds (`M·T`).
    pub span: f64,
}

impl DelayPowerProfile {
    pub fn eval(&self, tau: f64) -> f64 {
        if tau < 0.0 || tau > self.span {
            return 0.0;
        }
        match self.shape {
            ProfileShape::Rectangular => self.height,
            ProfileShape::TruncatedExponential { rate } => self.height * (-rate * tau).exp(),
        }
    }

    /// Closed-form `∫g`.
    pub fn mass(&self) -> f64 {
        match self.shape {
            ProfileShape::Rectangular => self.height * self.span,
            ProfileShape::TruncatedExponential { rate } => {
                if rate == 0.0 {
                    self.height * self.span
                } else {
                    self.height * (1.0 - (-rate * self.span).exp()) / rate
                }
            }
        }
    }

    /// Composite trapezoid rule over `[0, span]` with `nodes` points.
    pub fn integrate_trapezoid(&self, nodes: usize) -> f64 {
        let nodes = nodes.max(2);
        let h = self.span / (nodes - 1) as f64;
        let interior: f64 = (1..nodes - 1).map(|j| self.eval(j as f64 * h)).sum();
        h * (0.5 * (self.eval(0.0) + self.eval(self.span)) + interior)
    }
}

/// Per-user Rician channel description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserChannel {
    /// `γ_k`, weight of the scattered component.
    pub rician_gain: f64,
    /// `C_k`, supremum of the delay power profile.
    pub profile_height: f64,
    /// `M_k`, delay support in symbols.
    pub delay_span: u32,
    /// `L_k = ∫g_k`.
    pub profile_mass: f64,
    pub shape: ProfileShape,
}

impl UserChannel {
    pub fn new(
        rician_gain: f64,
        profile_height: f64,
        delay_span: u32,
        shape: ProfileShape,
        model: &SystemModel,
    ) -> Result<Self> {
        if !(rician_gain >= 0.0) || !rician_gain.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: "must be a nonnegative finite number".into(),
            });
        }
        if !(profile_height >= 0.0) || !profile_height.is_finite() {
            return Err(Error::InvalidParameter {
                name: "c",
                reason: "must be a nonnegative finite number".into(),
            });
        }
        if delay_span == 0 {
            return Err(Error::NonPositiveParameter("m"));
        }
        if let ProfileShape::TruncatedExponential { rate } = shape {
            if !(rate >= 0.0) || !rate.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "rate",
                    reason: "must be a nonnegative finite number".into(),
                });
            }
        }
        let profile = DelayPowerProfile {
            shape,
            height: profile_height,
            span: delay_span as f64 * model.symbol_duration,
        };
        Ok(Self {
            rician_gain,
            profile_height,
            delay_span,
            profile_mass: profile.mass(),
            shape,
        })
    }

    pub fn rectangular(gamma: f64, c: f64, m: u32, model: &SystemModel) -> Result<Self> {
        Self::new(gamma, c, m, ProfileShape::Rectangular, model)
    }

    pub fn profile(&self, model: &SystemModel) -> DelayPowerProfile {
        DelayPowerProfile {
            shape: self.shape,
            height: self.profile_height,
            span: self.delay_span as f64 * model.symbol_duration,
        }
    }
}

/// `L_k = M_k·C_k·T`, the profile mass of the rectangular worst case.
pub fn worst_case_mass(channel: &UserChannel, model: &SystemModel) -> f64 {
    channel.delay_span as f64 * channel.profile_height * model.symbol_duration
}

/// A length-`N` complex chip vector with `‖s‖² = N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadingSequence {
    pub user_id: usize,
    chips: Vec<Complex64>,
}

impl SpreadingSequence {
    /// Checks the power constraint `‖s‖² = N` within [`NORM_TOLERANCE`].
    pub fn new(user_id: usize, chips: Vec<Complex64>) -> Result<Self> {
        if chips.is_empty() {
            return Err(Error::NonPositiveParameter("sequence length"));
        }
        let seq = Self { user_id, chips };
        let norm_sq = seq.norm_sq();
        if (norm_sq - seq.len() as f64).abs() > NORM_TOLERANCE || !norm_sq.is_finite() {
            return Err(Error::NormViolation {
                user: user_id,
                norm_sq,
                expected: seq.len(),
            });
        }
        Ok(seq)
    }

    /// Rescales arbitrary nonzero chips onto the power sphere.
    pub fn normalized(user_id: usize, mut chips: Vec<Complex64>) -> Result<Self> {
        let norm_sq: f64 = chips.iter().map(|c| c.norm_sqr()).sum();
        if !(norm_sq > 0.0) || !norm_sq.is_finite() {
            return Err(Error::NormViolation {
                user: user_id,
                norm_sq,
                expected: chips.len(),
            });
        }
        let scale = (chips.len() as f64 / norm_sq).sqrt();
        chips.iter_mut().for_each(|c| *c *= scale);
        Self::new(user_id, chips)
    }

    /// Binary ±1 chips.
    pub fn from_signs(user_id: usize, signs: &[i8]) -> Result<Self> {
        let chips = signs
            .iter()
            .map(|&b| Complex64::new(if b >= 0 { 1.0 } else { -1.0 }, 0.0))
            .collect();
        Self::new(user_id, chips)
    }

    pub fn chips(&self) -> &[Complex64] {
        &self.chips
    }

    pub fn len(&self) -> usize {
        self.chips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chips.is_empty()
    }

    pub fn norm_sq(&self) -> f64 {
        self.chips.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Periodic extension `s_{n+N} = s_n`, 0-based.
    pub fn chip(&self, n: isize) -> Complex64 {
        let len = self.chips.len() as isize;
        self.chips[n.rem_euclid(len) as usize]
    }
}

/// A validated (model, channels, sequences) triple.
#[derive(Debug, Clone)]
pub struct ModelBundle {
    pub model: SystemModel,
    pub channels: Vec<UserChannel>,
    pub sequences: Vec<SpreadingSequence>,
}

pub fn validate_model(
    model: SystemModel,
    channels: Vec<UserChannel>,
    sequences: Vec<SpreadingSequence>,
) -> Result<ModelBundle> {
    model.validate()?;
    if channels.len() != model.n_users {
        return Err(Error::DimensionMismatch {
            what: "channels",
            expected: model.n_users,
            found: channels.len(),
        });
    }
    if sequences.len() != model.n_users {
        return Err(Error::DimensionMismatch {
            what: "sequences",
            expected: model.n_users,
            found: sequences.len(),
        });
    }
    for seq in &sequences {
        if seq.len() != model.n_chips {
            return Err(Error::DimensionMismatch {
                what: "sequence length",
                expected: model.n_chips,
                found: seq.len(),
            });
        }
        let norm_sq = seq.norm_sq();
        if (norm_sq - model.n_chips as f64).abs() > NORM_TOLERANCE {
            return Err(Error::NormViolation {
                user: seq.user_id,
                norm_sq,
                expected: model.n_chips,
            });
        }
    }
    for ch in &channels {
        if !(ch.rician_gain >= 0.0 && ch.profile_height >= 0.0 && ch.profile_mass >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "channel",
                reason: "gamma, c and profile mass must be nonnegative".into(),
            });
        }
        if ch.delay_span == 0 {
            return Err(Error::NonPositiveParameter("m"));
        }
    }
    Ok(ModelBundle {
        model,
        channels,
        sequences,
    })
}
