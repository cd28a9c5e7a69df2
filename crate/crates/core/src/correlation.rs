//! Chip-synchronous correlation algebra.
//!
//! The asynchronous correlation at delay `τ ∈ [lT_c, (l+1)T_c)` is a linear
//! blend of two chip-synchronous quadratic forms `Q_l = s_i* B^(l) s_k` and
//! `Q_{l+1}`. Averaging `|·|²` over the two data bits that straddle the
//! window and integrating over the chip collapses everything onto the
//! per-frequency interference spectrum `S_m^{i,k}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{SpreadingSequence, SystemModel};
use crate::spectral::{embed_vector, half_offset, SpectralCoefficients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Bit {
    Plus,
    Minus,
}

impl Bit {
    pub fn value(self) -> f64 {
        match self {
            Bit::Plus => 1.0,
            Bit::Minus => -1.0,
        }
    }

    pub fn from_sign(x: f64) -> Self {
        if x < 0.0 {
            Bit::Minus
        } else {
            Bit::Plus
        }
    }
}

/// The two adjacent data bits `(b_{k,-1}, b_{k,0})` seen by one window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BitPair {
    pub previous: Bit,
    pub current: Bit,
}

impl BitPair {
    pub const ALL: [BitPair; 4] = [
        BitPair::new(Bit::Plus, Bit::Plus),
        BitPair::new(Bit::Plus, Bit::Minus),
        BitPair::new(Bit::Minus, Bit::Plus),
        BitPair::new(Bit::Minus, Bit::Minus),
    ];

    pub const fn new(previous: Bit, current: Bit) -> Self {
        Self { previous, current }
    }
}

/// `B^(l) = [[0, b_{-1} E_l], [b_0 E_{N-l}, 0]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftMatrix {
    pub shift: usize,
    pub bits: BitPair,
    pub matrix: DMatrix<f64>,
}

impl ShiftMatrix {
    /// `s_i* B s_k` by explicit matrix product.
    pub fn quadratic(&self, s_i: &[Complex64], s_k: &[Complex64]) -> Complex64 {
        let n = self.matrix.nrows();
        (0..n)
            .map(|r| {
                let bs: Complex64 = (0..n).map(|c| s_k[c] * self.matrix[(r, c)]).sum();
                s_i[r].conj() * bs
            })
            .sum()
    }
}

pub fn shift_matrix(l: usize, bits: BitPair, n_chips: usize) -> Result<ShiftMatrix> {
    if l > n_chips {
        return Err(Error::IndexOutOfRange {
            index: l,
            lo: 0,
            hi: n_chips,
        });
    }
    let mut matrix = DMatrix::zeros(n_chips, n_chips);
    // Rows 0..l hold the tail of the previous bit, rows l..N the current bit.
    for r in 0..l {
        matrix[(r, n_chips - l + r)] = bits.previous.value();
    }
    for r in l..n_chips {
        matrix[(r, r - l)] = bits.current.value();
    }
    Ok(ShiftMatrix {
        shift: l,
        bits,
        matrix,
    })
}

fn check_lengths(a: &[Complex64], b: &[Complex64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "sequence pair",
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(())
}

/// `Q_l = b_{-1} Σ_{m=1}^{l} s̄_{i,m} s_{k,N-l+m} + b_0 Σ_{m=1}^{N-l} s̄_{i,l+m} s_{k,m}`.
pub fn quad_form_chips(
    s_i: &[Complex64],
    s_k: &[Complex64],
    l: usize,
    bits: BitPair,
) -> Result<Complex64> {
    check_lengths(s_i, s_k)?;
    let n = s_i.len();
    if l > n {
        return Err(Error::IndexOutOfRange {
            index: l,
            lo: 0,
            hi: n,
        });
    }
    let head: Complex64 = (0..l).map(|m| s_i[m].conj() * s_k[n - l + m]).sum();
    let tail: Complex64 = (0..n - l).map(|m| s_i[l + m].conj() * s_k[m]).sum();
    Ok(head * bits.previous.value() + tail * bits.current.value())
}

pub fn quad_form(
    s_i: &SpreadingSequence,
    s_k: &SpreadingSequence,
    l: usize,
    bits: BitPair,
) -> Result<Complex64> {
    quad_form_chips(s_i.chips(), s_k.chips(), l, bits)
}

/// How the partial correlations are assembled.
///
/// `Corrected` weights `Q_l` by `(l+1)T_c − τ` and `Q_{l+1}` by `τ − lT_c`,
/// which is what the waveform overlap of rectangular chips produces, and
/// uses `s_k` in both sums of `R̂` so that it is the `B^(l+1)` form.
///
/// `SwappedWeights` is the alternative reading: the two weights are
/// exchanged and the previous-bit sum of `R̂` reads `s_{i,N-l+m-1}`. The
/// chip integral of `Γ` is the same under both weightings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CorrelationConvention {
    #[default]
    Corrected,
    SwappedWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialCorrPair {
    pub r: Complex64,
    pub r_hat: Complex64,
}

impl PartialCorrPair {
    pub fn gamma(&self) -> GammaValue {
        GammaValue {
            value: (self.r + self.r_hat).norm_sqr(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct GammaValue {
    pub value: f64,
}

/// Partial correlations for `nT + lT_c ≤ τ < nT + (l+1)T_c`; see
/// [`CorrelationConvention`] for the two weightings.
#[allow(clippy::too_many_arguments)]
pub fn partial_corr(
    s_i: &SpreadingSequence,
    s_k: &SpreadingSequence,
    tau: f64,
    n: usize,
    l: usize,
    bits: BitPair,
    model: &SystemModel,
    convention: CorrelationConvention,
) -> Result<PartialCorrPair> {
    let (ci, ck) = (s_i.chips(), s_k.chips());
    check_lengths(ci, ck)?;
    let len = ci.len();
    if l >= len {
        return Err(Error::IndexOutOfRange {
            index: l,
            lo: 0,
            hi: len - 1,
        });
    }
    let t_c = model.chip_duration();
    let lo = n as f64 * model.symbol_duration + l as f64 * t_c;
    let hi = lo + t_c;
    if !(tau >= lo && tau < hi) {
        return Err(Error::TauOutsideChip { tau, lo, hi });
    }
    let q_l = quad_form_chips(ci, ck, l, bits)?;
    let q_next = match convention {
        CorrelationConvention::Corrected => quad_form_chips(ci, ck, l + 1, bits)?,
        CorrelationConvention::SwappedWeights => {
            let head: Complex64 = (0..=l).map(|m| ci[m].conj() * ci[len - l - 1 + m]).sum();
            let tail: Complex64 = (0..len - l - 1).map(|m| ci[l + 1 + m].conj() * ck[m]).sum();
            head * bits.previous.value() + tail * bits.current.value()
        }
    };
    let (w_l, w_next) = match convention {
        CorrelationConvention::Corrected => (hi - tau, tau - lo),
        CorrelationConvention::SwappedWeights => (tau - lo, hi - tau),
    };
    Ok(PartialCorrPair {
        r: q_l * w_l,
        r_hat: q_next * w_next,
    })
}

/// `∫_{lT_c}^{(l+1)T_c} Γ dτ = (T_c³/3)(|Q_l|² + |Q_{l+1}|² + Re[Q_l·conj(Q_{l+1})])`.
pub fn gamma_chip_integral(q_l: Complex64, q_l1: Complex64, t_c: f64) -> f64 {
    t_c.powi(3) / 3.0 * (q_l.norm_sqr() + q_l1.norm_sqr() + (q_l * q_l1.conj()).re)
}

/// `λ_m^(l) = exp(−2πj·l·m/N)`, `λ̂_m^(l) = exp(−2πj·l·(m/N + 1/(2N)))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShiftSpectrum {
    pub lambda: Complex64,
    pub lambda_hat: Complex64,
}

impl ShiftSpectrum {
    /// `m` is the 1-based frequency index.
    pub fn new(l: usize, m: usize, n_chips: usize) -> Self {
        let nf = n_chips as f64;
        // Reduce l·m modulo N (resp. 2N) before scaling so that the
        // endpoint values come out exact.
        let k = (l * m) % n_chips;
        let k_hat = (l * (2 * m + 1)) % (2 * n_chips);
        Self {
            lambda: unit_phase(-(k as f64) / nf),
            lambda_hat: unit_phase(-(k_hat as f64) / (2.0 * nf)),
        }
    }
}

/// `exp(2πj·x)` with exact values on quarter turns.
fn unit_phase(x: f64) -> Complex64 {
    let turns = x.rem_euclid(1.0);
    match turns {
        t if t == 0.0 => Complex64::new(1.0, 0.0),
        t if t == 0.25 => Complex64::new(0.0, 1.0),
        t if t == 0.5 => Complex64::new(-1.0, 0.0),
        t if t == 0.75 => Complex64::new(0.0, -1.0),
        t => Complex64::from_polar(1.0, 2.0 * PI * t),
    }
}

/// `E_b |Q_l|²` by enumerating the four equiprobable bit pairs.
pub fn bit_averaged_sq(s_i: &SpreadingSequence, s_k: &SpreadingSequence, l: usize) -> Result<f64> {
    let mut acc = 0.0;
    for bits in BitPair::ALL {
        acc += quad_form(s_i, s_k, l, bits)?.norm_sqr();
    }
    Ok(acc / 4.0)
}

/// `E_b Re[Q_l·conj(Q_{l+1})]` by enumeration.
pub fn bit_averaged_cross(
    s_i: &SpreadingSequence,
    s_k: &SpreadingSequence,
    l: usize,
) -> Result<f64> {
    let mut acc = 0.0;
    for bits in BitPair::ALL {
        let a = quad_form(s_i, s_k, l, bits)?;
        let b = quad_form(s_i, s_k, l + 1, bits)?;
        acc += (a * b.conj()).re;
    }
    Ok(acc / 4.0)
}

fn spectral_sums(
    c_i: &SpectralCoefficients,
    c_k: &SpectralCoefficients,
    l: usize,
) -> (Complex64, Complex64) {
    let n = c_i.n_chips();
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    for slot in 0..n {
        let lam = ShiftSpectrum::new(l, slot + 1, n);
        a += lam.lambda * c_i.alpha[slot].conj() * c_k.alpha[slot];
        b += lam.lambda_hat * c_i.beta[slot].conj() * c_k.beta[slot];
    }
    (a, b)
}

fn check_coefficients(c_i: &SpectralCoefficients, c_k: &SpectralCoefficients) -> Result<()> {
    if c_i.n_chips() != c_k.n_chips()
        || c_i.beta.len() != c_i.n_chips()
        || c_k.beta.len() != c_k.n_chips()
    {
        return Err(Error::DimensionMismatch {
            what: "spectral coefficients",
            expected: c_i.n_chips(),
            found: c_k.n_chips(),
        });
    }
    Ok(())
}

/// `E_b |Q_l|² = ½(|Σ λ_m ᾱ_i α_k|² + |Σ λ̂_m β̄_i β_k|²)`.
pub fn bit_averaged_sq_spectral(
    c_i: &SpectralCoefficients,
    c_k: &SpectralCoefficients,
    l: usize,
) -> Result<f64> {
    check_coefficients(c_i, c_k)?;
    let (a, b) = spectral_sums(c_i, c_k, l);
    Ok(0.5 * (a.norm_sqr() + b.norm_sqr()))
}

/// Spectral form of `E_b Re[Q_l·conj(Q_{l+1})]`.
pub fn bit_averaged_cross_spectral(
    c_i: &SpectralCoefficients,
    c_k: &SpectralCoefficients,
    l: usize,
) -> Result<f64> {
    check_coefficients(c_i, c_k)?;
    let (a0, b0) = spectral_sums(c_i, c_k, l);
    let (a1, b1) = spectral_sums(c_i, c_k, l + 1);
    Ok(0.5 * ((a0 * a1.conj()).re + (b0 * b1.conj()).re))
}

/// `Σ_{l=0}^{N-1} E_b ∫ Γ_{i,k}(τ, 0, l) dτ`, evaluated chip by chip from the
/// quadratic forms (time-domain route).
pub fn averaged_gamma_integral(
    s_i: &SpreadingSequence,
    s_k: &SpreadingSequence,
    t_c: f64,
) -> Result<f64> {
    check_lengths(s_i.chips(), s_k.chips())?;
    let n = s_i.len();
    let mut total = 0.0;
    for l in 0..n {
        let mut chip = 0.0;
        for bits in BitPair::ALL {
            let q_l = quad_form(s_i, s_k, l, bits)?;
            let q_next = quad_form(s_i, s_k, l + 1, bits)?;
            chip += gamma_chip_integral(q_l, q_next, t_c);
        }
        total += chip / 4.0;
    }
    Ok(total)
}

/// Cosine weights `1 + ½cos(2πm/N)` (alpha) and `1 + ½cos(2π(m/N + 1/2N))`
/// (beta), indexed by storage slot.
pub fn spectrum_weights(n_chips: usize) -> (Vec<f64>, Vec<f64>) {
    let nf = n_chips as f64;
    let half = half_offset(n_chips);
    let wa = (1..=n_chips)
        .map(|m| 1.0 + 0.5 * (2.0 * PI * m as f64 / nf).cos())
        .collect();
    let wb = (1..=n_chips)
        .map(|m| 1.0 + 0.5 * (2.0 * PI * (m as f64 / nf + half)).cos())
        .collect();
    (wa, wb)
}

/// `S_m^{i,k}` and its real-embedded twin `Ŝ_m^{i,k}`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceSpectrum {
    pub s_m: Vec<f64>,
    pub s_m_real: Vec<f64>,
}

impl InterferenceSpectrum {
    pub fn total(&self) -> f64 {
        self.s_m.iter().sum()
    }
}

pub fn interference_spectrum(
    c_i: &SpectralCoefficients,
    c_k: &SpectralCoefficients,
) -> Result<InterferenceSpectrum> {
    check_coefficients(c_i, c_k)?;
    let n = c_i.n_chips();
    let (wa, wb) = spectrum_weights(n);
    let s_m = (0..n)
        .map(|m| {
            c_i.alpha[m].norm_sqr() * c_k.alpha[m].norm_sqr() * wa[m]
                + c_i.beta[m].norm_sqr() * c_k.beta[m].norm_sqr() * wb[m]
        })
        .collect();

    let (ai, ak) = (embed_vector(&c_i.alpha), embed_vector(&c_k.alpha));
    let (bi, bk) = (embed_vector(&c_i.beta), embed_vector(&c_k.beta));
    let energy = |v: &[f64], m: usize| v[m] * v[m] + v[n + m] * v[n + m];
    let s_m_real = (0..n)
        .map(|m| {
            energy(&ai, m) * energy(&ak, m) * wa[m] + energy(&bi, m) * energy(&bk, m) * wb[m]
        })
        .collect();
    Ok(InterferenceSpectrum { s_m, s_m_real })
}
