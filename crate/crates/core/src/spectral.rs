//! Fourier-type bases `w_m(η)`, the `α`/`β` coefficient decompositions,
//! the change-of-basis matrices `Φ`, `Φ̂` and their real embeddings.
//!
//! Inner products are conjugate-linear in the first argument throughout.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{SpreadingSequence, NORM_TOLERANCE};

/// Maximum tolerated gap between the closed-form `Φ` and the explicit
/// change-of-basis product.
const CROSS_CHECK_TOLERANCE: f64 = 1e-8;

/// Offset of the second basis, `η = 1/(2N)`.
pub fn half_offset(n_chips: usize) -> f64 {
    0.5 / n_chips as f64
}

/// `⟨a, b⟩ = Σ conj(a_n)·b_n`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasisVector {
    /// 1-based frequency index `m`.
    pub index: usize,
    pub offset: f64,
    pub components: Vec<Complex64>,
}

/// `(w_m(η))_n = exp(2πj(n−1)(m/N + η))` for `m ∈ {1..N}`.
pub fn basis_vector(m: usize, eta: f64, n_chips: usize) -> Result<BasisVector> {
    if m == 0 || m > n_chips {
        return Err(Error::IndexOutOfRange {
            index: m,
            lo: 1,
            hi: n_chips,
        });
    }
    let freq = m as f64 / n_chips as f64 + eta;
    let components = (0..n_chips)
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * n as f64 * freq))
        .collect();
    Ok(BasisVector {
        index: m,
        offset: eta,
        components,
    })
}

/// Columns are `w_1(η), …, w_N(η)`.
pub fn basis_matrix(eta: f64, n_chips: usize) -> DMatrix<Complex64> {
    DMatrix::from_fn(n_chips, n_chips, |n, col| {
        let freq = (col + 1) as f64 / n_chips as f64 + eta;
        Complex64::from_polar(1.0, 2.0 * PI * n as f64 * freq)
    })
}

/// Coefficients of a sequence in the `w_m(0)` (`alpha`) and
/// `w_m(1/2N)` (`beta`) bases, 0-based in `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    pub alpha: Vec<Complex64>,
    pub beta: Vec<Complex64>,
}

impl SpectralCoefficients {
    pub fn n_chips(&self) -> usize {
        self.alpha.len()
    }

    pub fn zeros(n_chips: usize) -> Self {
        Self {
            alpha: vec![Complex64::new(0.0, 0.0); n_chips],
            beta: vec![Complex64::new(0.0, 0.0); n_chips],
        }
    }
}

fn project(chips: &[Complex64], eta: f64) -> Vec<Complex64> {
    let n = chips.len();
    let scale = 1.0 / (n as f64).sqrt();
    (1..=n)
        .map(|m| {
            let freq = m as f64 / n as f64 + eta;
            chips
                .iter()
                .enumerate()
                .map(|(idx, s)| Complex64::from_polar(1.0, -2.0 * PI * idx as f64 * freq) * s)
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

fn synthesize(coeffs: &[Complex64], eta: f64) -> Vec<Complex64> {
    let n = coeffs.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|idx| {
            coeffs
                .iter()
                .enumerate()
                .map(|(slot, c)| {
                    let freq = (slot + 1) as f64 / n as f64 + eta;
                    Complex64::from_polar(1.0, 2.0 * PI * idx as f64 * freq) * c
                })
                .sum::<Complex64>()
                * scale
        })
        .collect()
}

/// `α_m = ⟨w_m(0), s⟩/√N`, `β_m = ⟨w_m(1/2N), s⟩/√N`.
pub fn decompose(s: &SpreadingSequence) -> Result<SpectralCoefficients> {
    let norm_sq = s.norm_sq();
    if (norm_sq - s.len() as f64).abs() > NORM_TOLERANCE {
        return Err(Error::NormViolation {
            user: s.user_id,
            norm_sq,
            expected: s.len(),
        });
    }
    Ok(decompose_chips(s.chips()))
}

/// Projection without the power check.
pub fn decompose_chips(chips: &[Complex64]) -> SpectralCoefficients {
    SpectralCoefficients {
        alpha: project(chips, 0.0),
        beta: project(chips, half_offset(chips.len())),
    }
}

/// `s = (1/√N) Σ α_m w_m(0)`.
pub fn reconstruct_from_alpha(alpha: &[Complex64]) -> Vec<Complex64> {
    synthesize(alpha, 0.0)
}

/// `s = (1/√N) Σ β_m w_m(1/2N)`.
pub fn reconstruct_from_beta(beta: &[Complex64]) -> Vec<Complex64> {
    synthesize(beta, half_offset(beta.len()))
}

/// `Φ` maps `β` to `α`, `Φ̂` maps `α` to `β`.
#[derive(Debug, Clone)]
pub struct TransformPair {
    pub phi: DMatrix<Complex64>,
    pub phi_hat: DMatrix<Complex64>,
    /// `φ̂_{m,n} = N·Im[Φ̂_{m,n}]`.
    pub phi_hat_imag_kernel: DMatrix<f64>,
}

impl TransformPair {
    pub fn n_chips(&self) -> usize {
        self.phi.nrows()
    }

    /// `Φ̂′ = [[Re Φ̂, −Im Φ̂], [Im Φ̂, Re Φ̂]]`.
    pub fn phi_hat_real(&self) -> DMatrix<f64> {
        real_block(&self.phi_hat)
    }

    pub fn phi_real(&self) -> DMatrix<f64> {
        real_block(&self.phi)
    }

    pub fn alpha_to_beta(&self, alpha: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.phi_hat, alpha)
    }

    pub fn beta_to_alpha(&self, beta: &[Complex64]) -> Vec<Complex64> {
        mat_vec(&self.phi, beta)
    }
}

fn mat_vec(m: &DMatrix<Complex64>, v: &[Complex64]) -> Vec<Complex64> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)] * v[c]).sum())
        .collect()
}

fn real_block(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let z = m[(r % n, c % n)];
        match (r < n, c < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `(1/N)·2/(1 − exp(2πjθ))`, evaluated as `(1 + j·sin φ/(1 − cos φ))/N`
/// with `φ = 2πθ` so the real part is exactly `1/N`. `θ` is an odd multiple
/// of `1/(2N)`, which keeps the denominator away from zero.
fn geometric_entry(theta: f64, n_chips: usize) -> Complex64 {
    let denom = Complex64::new(1.0, 0.0) - Complex64::from_polar(1.0, 2.0 * PI * theta);
    assert!(
        denom.norm() > 1e-12,
        "vanishing geometric-sum denominator at θ = {theta}"
    );
    let nf = n_chips as f64;
    Complex64::new(1.0 / nf, cot_half(2.0 * PI * theta) / nf)
}

/// `sin φ / (1 − cos φ) = cot(φ/2)`.
fn cot_half(arg: f64) -> f64 {
    arg.sin() / (1.0 - arg.cos())
}

/// Closed-form `Φ`, `Φ̂`, cross-checked against `(1/N)·W(0)*·W(1/2N)`.
///
/// # Panics
/// If the closed form and the explicit product differ by more than `1e-8`.
pub fn build_transforms(n_chips: usize) -> TransformPair {
    assert!(n_chips >= 1, "need at least one chip");
    let nf = n_chips as f64;
    let half = half_offset(n_chips);
    let phi = DMatrix::from_fn(n_chips, n_chips, |m, n| {
        geometric_entry((n as f64 - m as f64) / nf + half, n_chips)
    });
    let phi_hat = DMatrix::from_fn(n_chips, n_chips, |m, n| {
        geometric_entry((n as f64 - m as f64) / nf - half, n_chips)
    });
    let phi_hat_imag_kernel = DMatrix::from_fn(n_chips, n_chips, |m, n| {
        cot_half(2.0 * PI * ((n as f64 - m as f64) / nf - half))
    });

    let w0 = basis_matrix(0.0, n_chips);
    let wh = basis_matrix(half, n_chips);
    let product = w0.adjoint() * &wh / Complex64::new(nf, 0.0);
    let gap = (&phi - &product).iter().map(|z| z.norm()).fold(0.0, f64::max);
    assert!(
        gap <= CROSS_CHECK_TOLERANCE,
        "closed-form Φ disagrees with the change-of-basis product by {gap:e}"
    );

    TransformPair {
        phi,
        phi_hat,
        phi_hat_imag_kernel,
    }
}

/// Real-embedded coefficients `α′ = (Re α; Im α)`, `β′`, and `Φ̂′`.
#[derive(Debug, Clone)]
pub struct RealEmbedding {
    pub alpha_r: Vec<f64>,
    pub beta_r: Vec<f64>,
    pub phi_hat_r: DMatrix<f64>,
}

pub fn embed_vector(v: &[Complex64]) -> Vec<f64> {
    v.iter().map(|z| z.re).chain(v.iter().map(|z| z.im)).collect()
}

pub fn unembed_vector(v: &[f64]) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|m| Complex64::new(v[m], v[n + m])).collect()
}

pub fn real_embed(c: &SpectralCoefficients, t: &TransformPair) -> Result<RealEmbedding> {
    if c.alpha.len() != t.n_chips() || c.beta.len() != t.n_chips() {
        return Err(Error::DimensionMismatch {
            what: "spectral coefficients",
            expected: t.n_chips(),
            found: c.alpha.len(),
        });
    }
    Ok(RealEmbedding {
        alpha_r: embed_vector(&c.alpha),
        beta_r: embed_vector(&c.beta),
        phi_hat_r: t.phi_hat_real(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_sequence(n: usize, rng: &mut ChaCha8Rng) -> SpreadingSequence {
        let chips = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        SpreadingSequence::normalized(0, chips).unwrap()
    }

    fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
        v.fold(0.0, f64::max)
    }

    #[test]
    fn last_basis_vector_is_all_ones() {
        let w = basis_vector(4, 0.0, 4).unwrap();
        for z in &w.components {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn first_component_is_one() {
        for m in 1..=5 {
            for eta in [0.0, 0.1, 0.37] {
                let w = basis_vector(m, eta, 5).unwrap();
                assert_eq!(w.components[0], Complex64::new(1.0, 0.0));
                assert!(w.components.iter().all(|z| (z.norm() - 1.0).abs() < 1e-15));
            }
        }
    }

    #[test]
    fn quarter_offset_example() {
        let w = basis_vector(1, 0.25, 2).unwrap();
        assert!((w.components[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn basis_index_is_checked() {
        assert!(matches!(
            basis_vector(0, 0.0, 4),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(basis_vector(5, 0.0, 4).is_err());
    }

    #[test]
    fn bases_are_orthogonal() {
        let n = 6;
        for eta in [0.0, half_offset(n)] {
            for m in 1..=n {
                for mp in 1..=n {
                    let a = basis_vector(m, eta, n).unwrap();
                    let b = basis_vector(mp, eta, n).unwrap();
                    let ip = inner(&a.components, &b.components);
                    let expect = if m == mp { n as f64 } else { 0.0 };
                    assert!((ip - Complex64::new(expect, 0.0)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn all_ones_alpha() {
        let s = SpreadingSequence::new(0, vec![Complex64::new(1.0, 0.0); 4]).unwrap();
        let c = decompose(&s).unwrap();
        for (slot, a) in c.alpha.iter().enumerate() {
            let expect = if slot == 3 { 2.0 } else { 0.0 };
            assert!((a - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn basis_member_beta() {
        let w = basis_vector(2, half_offset(4), 4).unwrap();
        let s = SpreadingSequence::new(0, w.components).unwrap();
        let c = decompose(&s).unwrap();
        for (slot, b) in c.beta.iter().enumerate() {
            let expect = if slot == 1 { 2.0 } else { 0.0 };
            assert!((b - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn round_trip_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2, 4, 8, 16, 31, 64] {
            for _ in 0..100 {
                let s = random_sequence(n, &mut rng);
                let c = decompose(&s).unwrap();
                let from_a = reconstruct_from_alpha(&c.alpha);
                let from_b = reconstruct_from_beta(&c.beta);
                let gap = max_abs(
                    s.chips()
                        .iter()
                        .zip(from_a.iter().zip(&from_b))
                        .map(|(x, (a, b))| (x - a).norm().max((x - b).norm())),
                );
                assert!(gap < 1e-10, "n={n} gap={gap}");
                let na: f64 = c.alpha.iter().map(|z| z.norm_sqr()).sum();
                let nb: f64 = c.beta.iter().map(|z| z.norm_sqr()).sum();
                assert!((na - n as f64).abs() < 1e-10);
                assert!((nb - n as f64).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn single_chip_transform_is_identity() {
        let t = build_transforms(1);
        assert!((t.phi[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((t.phi_hat[(0, 0)] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn transforms_map_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 16;
        let t = build_transforms(n);
        let s = random_sequence(n, &mut rng);
        let c = decompose(&s).unwrap();
        let a = t.beta_to_alpha(&c.beta);
        let b = t.alpha_to_beta(&c.alpha);
        for m in 0..n {
            assert!((a[m] - c.alpha[m]).norm() < 1e-9);
            assert!((b[m] - c.beta[m]).norm() < 1e-9);
        }
    }

    #[test]
    fn unitarity_and_kernel() {
        for n in [2, 4, 8, 16, 31, 64] {
            let t = build_transforms(n);
            let eye = DMatrix::<Complex64>::identity(n, n);
            let u = max_abs((&t.phi * t.phi.adjoint() - &eye).iter().map(|z| z.norm()));
            assert!(u < 1e-10, "n={n}: {u}");
            let h = max_abs((&t.phi_hat - t.phi.adjoint()).iter().map(|z| z.norm()));
            assert!(h < 1e-10);
            let r = max_abs((&t.phi_hat * &t.phi - &eye).iter().map(|z| z.norm()));
            assert!(r < 1e-10);
            for m in 0..n {
                for k in 0..n {
                    assert_eq!(t.phi_hat[(m, k)].re, 1.0 / n as f64);
                    let kernel = t.phi_hat_imag_kernel[(m, k)];
                    assert!((kernel - n as f64 * t.phi_hat[(m, k)].im).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn real_embedding_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 4;
        let t = build_transforms(n);
        let s = random_sequence(n, &mut rng);
        let c = decompose(&s).unwrap();
        let e = real_embed(&c, &t).unwrap();
        let p = &e.phi_hat_r;
        let gram = p.transpose() * p;
        let eye = DMatrix::<f64>::identity(2 * n, 2 * n);
        assert!(max_abs((gram - eye).iter().map(|x| x.abs())) < 1e-10);

        let norm: f64 = e.alpha_r.iter().map(|x| x * x).sum();
        assert!((norm - n as f64).abs() < 1e-10);

        // Φ̂′α′ against the embedding of the complex product Φ̂α.
        let real_path = p * nalgebra::DVector::from_vec(e.alpha_r.clone());
        let complex_path = embed_vector(&t.alpha_to_beta(&c.alpha));
        for (x, y) in real_path.iter().zip(&complex_path) {
            assert!((x - y).abs() < 1e-12);
        }
        for (x, y) in real_path.iter().zip(&e.beta_r) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn real_alpha_embeds_with_zero_imaginary_half() {
        let t = build_transforms(3);
        let c = SpectralCoefficients {
            alpha: vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)],
            beta: vec![Complex64::new(0.0, 0.0); 3],
        };
        let e = real_embed(&c, &t).unwrap();
        assert_eq!(e.alpha_r, vec![1.0, -1.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
