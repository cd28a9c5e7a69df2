//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the correlation or snr modules.
#![allow(dead_code)]

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spreadopt::model::SpreadingSequence;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_chips(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    let raw: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let scale = (n as f64 / raw.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt();
    raw.into_iter().map(|z| z * scale).collect()
}

pub fn random_sequence(user: usize, n: usize, rng: &mut ChaCha8Rng) -> SpreadingSequence {
    SpreadingSequence::new(user, random_chips(n, rng)).unwrap()
}

/// `Σ_r conj(s_i[r])·b(r)·s_k[(r − l) mod N]` where `b(r)` is `prev` for
/// `r < l` and `cur` otherwise.
pub fn direct_q(si: &[Complex64], sk: &[Complex64], l: usize, prev: f64, cur: f64) -> Complex64 {
    let n = si.len();
    (0..n)
        .map(|r| {
            let sign = if r < l { prev } else { cur };
            si[r].conj() * sk[(r + n - l % n) % n] * sign
        })
        .sum()
}

/// `∫_0^T b_k(t − τ) s_k(t − τ) conj(s_i(t)) dt` with rectangular chips,
/// integrated exactly between breakpoints. `bits[j]` is the bit of symbol
/// `j − (bits.len() − 1)`, so the last entry is symbol 0.
pub fn waveform_correlation(si: &[Complex64], sk: &[Complex64], bits: &[f64], tau: f64, t_c: f64) -> Complex64 {
    let n = si.len();
    let t = n as f64 * t_c;
    let mut cuts: Vec<f64> = (0..=n).map(|m| m as f64 * t_c).collect();
    let k_first = (-tau / t_c).floor() as i64 - 1;
    let k_last = ((t - tau) / t_c).ceil() as i64 + 1;
    for m in k_first..=k_last {
        let c = tau + m as f64 * t_c;
        if c > 0.0 && c < t {
            cuts.push(c);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-15 * t);
    let last = bits.len() as i64 - 1;
    let mut acc = Complex64::new(0.0, 0.0);
    for w in cuts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let ri = ((mid / t_c).floor() as usize).min(n - 1);
        let u = mid - tau;
        let chip = (u / t_c).floor() as i64;
        let sym = chip.div_euclid(n as i64);
        let b = bits[(last + sym) as usize];
        let val = si[ri].conj() * sk[chip.rem_euclid(n as i64) as usize] * b;
        acc += val * (w[1] - w[0]);
    }
    acc
}

/// `∫` over one chip of `|(T_c − ε)·a + ε·b|²`, by the composite trapezoid rule.
pub fn chip_quadrature(a: Complex64, b: Complex64, t_c: f64, nodes: usize) -> f64 {
    let h = t_c / (nodes - 1) as f64;
    let f = |e: f64| ((a * (t_c - e)) + b * e).norm_sqr();
    let inner: f64 = (1..nodes - 1).map(|j| f(j as f64 * h)).sum();
    h * (0.5 * (f(0.0) + f(t_c)) + inner)
}

/// Closed-form chip integral of the expression in [`chip_quadrature`].
pub fn chip_closed_form(a: Complex64, b: Complex64, t_c: f64) -> f64 {
    t_c.powi(3) / 3.0 * (a.norm_sqr() + b.norm_sqr() + (a * b.conj()).re)
}

/// `Σ_l E_b ∫ Γ` over one symbol, enumerating the four bit pairs.
pub fn enumerated_gamma_sum(si: &[Complex64], sk: &[Complex64], t_c: f64) -> f64 {
    let n = si.len();
    let mut total = 0.0;
    for l in 0..n {
        for (prev, cur) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let a = direct_q(si, sk, l, prev, cur);
            let b = direct_q(si, sk, l + 1, prev, cur);
            total += chip_closed_form(a, b, t_c) / 4.0;
        }
    }
    total
}

/// `S_m^{i,k}` summed over m, from explicit DFT-type projections.
pub fn spectrum_total(si: &[Complex64], sk: &[Complex64]) -> f64 {
    use std::f64::consts::PI;
    let n = si.len();
    let nf = n as f64;
    let proj = |s: &[Complex64], m: usize, eta: f64| -> Complex64 {
        (0..n)
            .map(|j| Complex64::from_polar(1.0, -2.0 * PI * j as f64 * (m as f64 / nf + eta)) * s[j])
            .sum::<Complex64>()
            / nf.sqrt()
    };
    let half = 1.0 / (2.0 * nf);
    (1..=n)
        .map(|m| {
            let wa = 1.0 + 0.5 * (2.0 * PI * m as f64 / nf).cos();
            let wb = 1.0 + 0.5 * (2.0 * PI * (m as f64 / nf + half)).cos();
            proj(si, m, 0.0).norm_sqr() * proj(sk, m, 0.0).norm_sqr() * wa
                + proj(si, m, half).norm_sqr() * proj(sk, m, half).norm_sqr() * wb
        })
        .sum()
}
