//! Baseline spreading-sequence families: Gold codes, random binary and
//! random phase sequences, and Chebyshev-map chaotic sequences.
//!
//! Binary chips map `0 → +1`, `1 → −1`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SpreadingSequence;

/// Fibonacci LFSR: `a_{t+n} = ⊕_{j ∈ taps} a_{t+n−j}`. `taps` must contain
/// `degree`; `seed` holds the first `n` output bits (bit `t` is `a_t`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LfsrSpec {
    pub degree: u32,
    pub taps: Vec<u32>,
    pub seed: u32,
}

impl LfsrSpec {
    pub fn new(degree: u32, taps: Vec<u32>, seed: u32) -> Result<Self> {
        if !(2..=24).contains(&degree) {
            return Err(Error::InvalidParameter {
                name: "degree",
                reason: format!("{degree} is outside 2..=24"),
            });
        }
        if !taps.contains(&degree) || taps.iter().any(|&t| t == 0 || t > degree) {
            return Err(Error::InvalidParameter {
                name: "taps",
                reason: format!("{taps:?} must lie in 1..={degree} and include {degree}"),
            });
        }
        if seed == 0 || seed >> degree != 0 {
            return Err(Error::InvalidParameter {
                name: "seed",
                reason: format!("state {seed:#x} must be nonzero and fit in {degree} bits"),
            });
        }
        Ok(Self { degree, taps, seed })
    }

    pub fn period(&self) -> usize {
        (1usize << self.degree) - 1
    }

    /// One full period of output bits.
    pub fn m_sequence(&self) -> Result<Vec<u8>> {
        let n = self.degree as usize;
        let len = self.period();
        let mut bits: Vec<u8> = (0..n).map(|t| ((self.seed >> t) & 1) as u8).collect();
        bits.reserve(len);
        for t in 0..len {
            let next = self.taps.iter().fold(0u8, |acc, &j| acc ^ bits[t + n - j as usize]);
            bits.push(next);
        }
        // The state repeats after exactly 2^n − 1 steps iff the recurrence is
        // primitive; check that no earlier window matches the seed.
        let start = &bits[..n];
        if &bits[len..len + n] != start || (1..len).any(|p| &bits[p..p + n] == start) {
            return Err(Error::InvalidParameter {
                name: "taps",
                reason: format!("{:?} do not generate a maximal-length sequence", self.taps),
            });
        }
        bits.truncate(len);
        Ok(bits)
    }
}

pub fn bits_to_chips(bits: &[u8]) -> Vec<Complex64> {
    bits.iter()
        .map(|&b| Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0))
        .collect()
}

/// `Σ_n a_n·conj(b_{n+shift})` with periodic indexing.
pub fn periodic_crosscorrelation(a: &[Complex64], b: &[Complex64], shift: usize) -> Complex64 {
    let n = b.len();
    a.iter()
        .enumerate()
        .map(|(idx, x)| x * b[(idx + shift) % n].conj())
        .sum()
}

/// The three values `{−1, −t, t−2}` with `t = 1 + 2^⌊(n+2)/2⌋`.
pub fn gold_spectrum(degree: u32) -> [i64; 3] {
    let t = 1 + (1i64 << ((degree + 2) / 2));
    [-1, -t, t - 2]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyKind {
    Gold,
    RandomBinary,
    RandomPhase,
    Chebyshev { degree: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceFamily {
    pub kind: FamilyKind,
    pub n_chips: usize,
    pub members: Vec<SpreadingSequence>,
}

/// `{u, v, u ⊕ T^k v : k = 0..N−1}` for a preferred pair `(u, v)`.
pub fn gold_family(spec_a: &LfsrSpec, spec_b: &LfsrSpec) -> Result<SequenceFamily> {
    if spec_a.degree != spec_b.degree {
        return Err(Error::NotPreferredPair(format!(
            "degrees differ ({} vs {})",
            spec_a.degree, spec_b.degree
        )));
    }
    let u = spec_a.m_sequence()?;
    let v = spec_b.m_sequence()?;
    let n = u.len();
    let allowed = gold_spectrum(spec_a.degree);
    let (cu, cv) = (bits_to_chips(&u), bits_to_chips(&v));
    for shift in 0..n {
        let c = periodic_crosscorrelation(&cu, &cv, shift).re.round() as i64;
        if !allowed.contains(&c) {
            return Err(Error::NotPreferredPair(format!(
                "crosscorrelation {c} at shift {shift} is outside {allowed:?}"
            )));
        }
    }
    let mut words = vec![u.clone(), v.clone()];
    words.extend((0..n).map(|k| (0..n).map(|t| u[t] ^ v[(t + k) % n]).collect()));
    let members = words
        .iter()
        .enumerate()
        .map(|(id, w)| SpreadingSequence::new(id, bits_to_chips(w)))
        .collect::<Result<_>>()?;
    Ok(SequenceFamily {
        kind: FamilyKind::Gold,
        n_chips: n,
        members,
    })
}

/// Preferred pairs shipped by name.
pub const GOLD_PRESETS: [(&str, u32, &[u32], &[u32]); 3] = [
    ("gold5", 5, &[5, 2], &[5, 4, 3, 2]),
    ("gold6", 6, &[6, 1], &[6, 5, 2, 1]),
    ("gold7", 7, &[7, 3], &[7, 3, 2, 1]),
];

pub fn gold_preset(name: &str) -> Result<(LfsrSpec, LfsrSpec)> {
    let (_, degree, a, b) = GOLD_PRESETS
        .iter()
        .find(|p| p.0 == name)
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available: GOLD_PRESETS.map(|p| p.0).join(", "),
        })?;
    Ok((
        LfsrSpec::new(*degree, a.to_vec(), 1)?,
        LfsrSpec::new(*degree, b.to_vec(), 1)?,
    ))
}

pub fn gold_family_preset(name: &str) -> Result<SequenceFamily> {
    let (a, b) = gold_preset(name)?;
    gold_family(&a, &b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChipMap {
    /// `+1` for `x ≥ 0`, `−1` otherwise.
    Sign,
    /// `exp(jπx)`.
    Phase,
}

/// Orbit `x_{t+1} = cos(d·arccos x_t)` for `t = 0..n`.
pub fn chebyshev_orbit(degree: u32, x0: f64, n: usize) -> Result<Vec<f64>> {
    if degree < 2 {
        return Err(Error::InvalidParameter {
            name: "degree",
            reason: format!("{degree} is below 2"),
        });
    }
    let mut orbit = Vec::with_capacity(n);
    let mut x = x0;
    for _ in 0..n {
        // ±1 map onto the fixed point 1; the orbit stays there forever.
        if !x.is_finite() || x.abs() >= 1.0 {
            return Err(Error::DegenerateOrbit { x0 });
        }
        orbit.push(x);
        x = (degree as f64 * x.acos()).cos();
    }
    Ok(orbit)
}

pub fn chebyshev_sequence(user_id: usize, degree: u32, x0: f64, n: usize, map: ChipMap) -> Result<SpreadingSequence> {
    let chips = chebyshev_orbit(degree, x0, n)?
        .into_iter()
        .map(|x| match map {
            ChipMap::Sign => Complex64::new(if x >= 0.0 { 1.0 } else { -1.0 }, 0.0),
            ChipMap::Phase => Complex64::from_polar(1.0, std::f64::consts::PI * x),
        })
        .collect();
    SpreadingSequence::new(user_id, chips)
}

/// `count` Chebyshev sequences from seeded starts in `(−1, 1)`; starts whose
/// orbit degenerates are redrawn.
pub fn chebyshev_family(degree: u32, count: usize, n_chips: usize, seed: u64, map: ChipMap) -> Result<SequenceFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut members = Vec::with_capacity(count);
    while members.len() < count {
        let x0 = rng.random_range(-1.0..1.0);
        match chebyshev_sequence(members.len(), degree, x0, n_chips, map) {
            Ok(s) => members.push(s),
            Err(Error::DegenerateOrbit { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(SequenceFamily {
        kind: FamilyKind::Chebyshev { degree },
        n_chips,
        members,
    })
}

pub fn random_family(kind: FamilyKind, count: usize, n_chips: usize, seed: u64) -> Result<SequenceFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Result<Vec<Complex64>> {
        Ok(match kind {
            FamilyKind::RandomBinary => (0..n_chips)
                .map(|_| Complex64::new(if rng.random::<bool>() { 1.0 } else { -1.0 }, 0.0))
                .collect(),
            FamilyKind::RandomPhase => (0..n_chips)
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect(),
            other => {
                return Err(Error::InvalidParameter {
                    name: "kind",
                    reason: format!("{other:?} is not a random family"),
                })
            }
        })
    };
    let members = (0..count)
        .map(|id| SpreadingSequence::normalized(id, draw(&mut rng)?))
        .collect::<Result<_>>()?;
    Ok(SequenceFamily {
        kind,
        n_chips,
        members,
    })
}
