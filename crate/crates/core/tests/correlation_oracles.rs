mod common;

use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;
use spreadopt::correlation::*;
use spreadopt::model::{SpreadingSequence, SystemModel};
use spreadopt::spectral::decompose;

#[test]
fn quadratic_forms_match_direct_sums() {
    let mut r = rng(1);
    for n in [2, 5, 8, 13] {
        let (si, sk) = (random_sequence(0, n, &mut r), random_sequence(1, n, &mut r));
        for l in 0..=n {
            for bits in BitPair::ALL {
                let lib = quad_form(&si, &sk, l, bits).unwrap();
                let want = direct_q(si.chips(), sk.chips(), l, bits.previous.value(), bits.current.value());
                assert!((lib - want).norm() < 1e-12);
                if l < n {
                    let mat = shift_matrix(l, bits, n).unwrap().quadratic(si.chips(), sk.chips());
                    assert!((mat - want).norm() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn partial_correlation_matches_waveform_integral() {
    let mut r = rng(2);
    let model = SystemModel::new(7, 2, 1.0, 2.0, 0.0).unwrap();
    let t_c = model.chip_duration();
    let (si, sk) = (random_sequence(0, 7, &mut r), random_sequence(1, 7, &mut r));
    for _ in 0..200 {
        let n_sym = r.random_range(0..2usize);
        let l = r.random_range(0..7usize);
        let frac: f64 = r.random_range(0.0..1.0);
        let tau = n_sym as f64 * model.symbol_duration + (l as f64 + frac) * t_c;
        let bits = BitPair::ALL[r.random_range(0..4)];
        // Symbols −n−1 and −n carry the previous and current bits.
        let mut seq = vec![0.0; n_sym + 2];
        seq[0] = bits.previous.value();
        seq[1] = bits.current.value();
        let want = waveform_correlation(si.chips(), sk.chips(), &seq, tau, t_c);
        let pc = partial_corr(&si, &sk, tau, n_sym, l, bits, &model, CorrelationConvention::Corrected).unwrap();
        let got = pc.r + pc.r_hat;
        assert!((got - want).norm() < 1e-12, "tau={tau}: {got} vs {want}");
        assert!((pc.gamma().value - want.norm_sqr()).abs() < 1e-11);
    }
}

#[test]
fn swapped_weights_weights_are_exchanged() {
    let mut r = rng(3);
    let model = SystemModel::new(6, 2, 1.0, 1.0, 0.0).unwrap();
    let t_c = model.chip_duration();
    let s = random_sequence(0, 6, &mut r);
    let bits = BitPair::new(Bit::Plus, Bit::Minus);
    let (l, frac) = (2, 0.3);
    let tau = (l as f64 + frac) * t_c;
    let lit = partial_corr(&s, &s, tau, 0, l, bits, &model, CorrelationConvention::SwappedWeights).unwrap();
    // The swapped form weights Q_l by τ − lT_c instead of (l+1)T_c − τ.
    let q_l = direct_q(s.chips(), s.chips(), l, bits.previous.value(), bits.current.value());
    assert!((lit.r - q_l * (frac * t_c)).norm() < 1e-12);
}

#[test]
fn chip_integral_matches_quadrature() {
    let mut r = rng(4);
    let t_c = 0.125;
    for _ in 0..100 {
        let a = Complex64::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let b = Complex64::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0));
        let exact = gamma_chip_integral(a, b, t_c);
        let quad = chip_quadrature(a, b, t_c, 10_000);
        assert!((exact - quad).abs() <= 1e-7 * exact, "{exact} vs {quad}");
    }
}

#[test]
fn master_identity_holds() {
    let mut r = rng(5);
    for n in [2, 4, 8, 16] {
        let t_c = 1.0 / n as f64;
        for _ in 0..50 {
            let (si, sk) = (random_sequence(0, n, &mut r), random_sequence(1, n, &mut r));
            let lhs = enumerated_gamma_sum(si.chips(), sk.chips(), t_c);
            let spec = interference_spectrum(&decompose(&si).unwrap(), &decompose(&sk).unwrap()).unwrap();
            let rhs = t_c.powi(3) / 3.0 * n as f64 * spec.total();
            assert!((lhs - rhs).abs() <= 1e-8 * lhs.abs(), "N={n}: {lhs} vs {rhs}");
            let lib = averaged_gamma_integral(&si, &sk, t_c).unwrap();
            assert!((lib - lhs).abs() <= 1e-10 * lhs);
            assert!((spec.total() - spectrum_total(si.chips(), sk.chips())).abs() < 1e-10 * spec.total());
        }
    }
}

#[test]
fn bit_averages_agree_between_routes() {
    let mut r = rng(6);
    for n in [3, 8, 11] {
        let (si, sk) = (random_sequence(0, n, &mut r), random_sequence(1, n, &mut r));
        let (ci, ck) = (decompose(&si).unwrap(), decompose(&sk).unwrap());
        for l in 0..n {
            let sq = bit_averaged_sq(&si, &sk, l).unwrap();
            assert!((sq - bit_averaged_sq_spectral(&ci, &ck, l).unwrap()).abs() < 1e-10 * (1.0 + sq));
            let cr = bit_averaged_cross(&si, &sk, l).unwrap();
            assert!((cr - bit_averaged_cross_spectral(&ci, &ck, l).unwrap()).abs() < 1e-10 * (1.0 + cr.abs()));
        }
    }
}

fn chips_strategy(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
}

fn to_sequence(raw: &[(f64, f64)]) -> Option<SpreadingSequence> {
    let chips: Vec<Complex64> = raw.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
    if chips.iter().map(|z| z.norm_sqr()).sum::<f64>() < 1e-6 {
        return None;
    }
    SpreadingSequence::normalized(0, chips).ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectrum_is_nonnegative_and_symmetric(a in chips_strategy(6), b in chips_strategy(6)) {
        let (Some(si), Some(sk)) = (to_sequence(&a), to_sequence(&b)) else { return Ok(()); };
        let (ci, ck) = (decompose(&si).unwrap(), decompose(&sk).unwrap());
        let ik = interference_spectrum(&ci, &ck).unwrap();
        let ki = interference_spectrum(&ck, &ci).unwrap();
        for m in 0..6 {
            prop_assert!(ik.s_m[m] >= 0.0);
            prop_assert!((ik.s_m[m] - ki.s_m[m]).abs() < 1e-12);
            prop_assert!((ik.s_m[m] - ik.s_m_real[m]).abs() < 1e-12);
        }
    }

    #[test]
    fn chip_integral_is_nonnegative(ar in -10.0f64..10.0, ai in -10.0f64..10.0, br in -10.0f64..10.0, bi in -10.0f64..10.0) {
        let v = gamma_chip_integral(Complex64::new(ar, ai), Complex64::new(br, bi), 0.5);
        prop_assert!(v >= -1e-12);
    }

    #[test]
    fn partial_correlation_is_continuous_across_chips(a in chips_strategy(5), b in chips_strategy(5), l in 0usize..4) {
        let (Some(si), Some(sk)) = (to_sequence(&a), to_sequence(&b)) else { return Ok(()); };
        let model = SystemModel::new(5, 2, 1.0, 1.0, 0.0).unwrap();
        let t_c = model.chip_duration();
        let bits = BitPair::new(Bit::Minus, Bit::Plus);
        let edge = (l + 1) as f64 * t_c;
        let left = partial_corr(&si, &sk, edge - 1e-12, 0, l, bits, &model, CorrelationConvention::Corrected).unwrap();
        let right = partial_corr(&si, &sk, edge, 0, l + 1, bits, &model, CorrelationConvention::Corrected).unwrap();
        prop_assert!(((left.r + left.r_hat) - (right.r + right.r_hat)).norm() < 1e-9);
    }
}
