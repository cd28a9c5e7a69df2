mod common;

use common::spectrum_total;
use num_complex::Complex64;
use spreadopt::model::{validate_model, ModelBundle, ProfileShape, SpreadingSequence, SystemModel, UserChannel};
use spreadopt::sim::*;
use spreadopt::snr::snr_lower_bound;

fn bundle(n0: f64, power: f64, users: &[(f64, ProfileShape)], signs: &[&[i8]]) -> ModelBundle {
    let n = signs[0].len();
    let model = SystemModel::new(n, users.len(), power, 1.0, n0).unwrap();
    let channels = users
        .iter()
        .map(|&(g, shape)| UserChannel::new(g, 1.0, 1, shape, &model).unwrap())
        .collect();
    let sequences = signs
        .iter()
        .enumerate()
        .map(|(u, s)| SpreadingSequence::from_signs(u, s).unwrap())
        .collect();
    validate_model(model, channels, sequences).unwrap()
}

const A: &[i8] = &[1, 1, 1, -1, 1, -1, -1, 1];
const B: &[i8] = &[1, -1, 1, 1, -1, -1, 1, 1];
const RECT: ProfileShape = ProfileShape::Rectangular;

fn within(est: Estimate, target: f64, k: f64) -> bool {
    (est.value - target).abs() <= k * est.se
}

#[test]
fn noise_variance_matches_closed_form() {
    let b = bundle(0.6, 1.0, &[(0.0, RECT)], &[A]);
    let est = estimate_snr(&b, &SimConfig { trials: 10_000, seed: 1, ..SimConfig::default() }).unwrap();
    let vn = est.var_components.var_n;
    assert!(within(vn, 0.6 / 4.0, 3.0), "{vn:?}");
    assert!(within(est.var_components.mean_z, 0.5f64.sqrt(), 3.0));
}

#[test]
fn awgn_limit() {
    let b = bundle(4.0, 2.0, &[(0.0, RECT)], &[A]);
    let est = estimate_snr(&b, &SimConfig { trials: 10_000, seed: 2, ..SimConfig::default() }).unwrap();
    assert!((est.snr_hat - 1.0).abs() <= 3.0 * est.se, "{} ± {}", est.snr_hat, est.se);
}

#[test]
fn interference_variance_matches_spectrum() {
    for gamma in [0.0, 0.6] {
        let b = bundle(0.0, 1.3, &[(0.0, RECT), (gamma, RECT)], &[A, B]);
        let cfg = SimConfig { trials: 10_000, seed: 3, nu: 8, reference_user: 0 };
        let est = estimate_snr(&b, &cfg).unwrap();
        let s = spectrum_total(b.sequences[0].chips(), b.sequences[1].chips());
        let l = b.channels[1].profile_mass;
        let want = 1.3 / (12.0 * 64.0) * (1.0 + gamma * gamma * l) * s;
        let vi = est.var_components.var_i;
        assert!(within(vi, want, 3.0), "gamma {gamma}: {vi:?} vs {want}");
    }
}

#[test]
fn tap_second_moments() {
    let model = SystemModel::new(8, 1, 1.0, 1.0, 0.0).unwrap();
    let ch = UserChannel::new(0.5, 1.5, 1, ProfileShape::TruncatedExponential { rate: 0.7 }, &model).unwrap();
    let vars = ChannelRealization::tap_variances(&ch, &model, 8);
    let j = 10;
    let draws = 100_000;
    let mut rng = trial_rng(4, 0);
    let mut pseudo = Vec::with_capacity(draws);
    let mut power = Vec::with_capacity(draws);
    for _ in 0..draws {
        let h = ChannelRealization::draw(std::slice::from_ref(&ch), &model, 8, &mut rng).taps[0][j];
        pseudo.push(h * h);
        power.push(h.norm_sqr());
    }
    let mean_c = pseudo.iter().sum::<Complex64>() / draws as f64;
    let sd_c = (pseudo.iter().map(|z| (z - mean_c).norm_sqr()).sum::<f64>() / draws as f64).sqrt();
    assert!(mean_c.norm() <= 3.0 * sd_c / (draws as f64).sqrt() * 2f64.sqrt());
    let mean_p = power.iter().sum::<f64>() / draws as f64;
    let sd_p = (power.iter().map(|p| (p - mean_p).powi(2)).sum::<f64>() / draws as f64).sqrt();
    assert!((mean_p - vars[j]).abs() <= 3.0 * sd_p / (draws as f64).sqrt());
    let dt = model.chip_duration() / 8.0;
    assert!((vars[j] - 1.5 * (-0.7 * j as f64 * dt).exp() * dt).abs() < 1e-15);
}

#[test]
fn standard_errors_shrink_with_trials() {
    let b = bundle(0.2, 1.0, &[(0.3, RECT), (0.3, RECT)], &[A, B]);
    let small = estimate_snr(&b, &SimConfig { trials: 2_000, seed: 5, ..SimConfig::default() }).unwrap();
    let large = estimate_snr(&b, &SimConfig { trials: 8_000, seed: 6, ..SimConfig::default() }).unwrap();
    let ratio = small.se / large.se;
    assert!((ratio - 2.0).abs() < 0.3, "{ratio}");
    let r_n = small.var_components.var_n.se / large.var_components.var_n.se;
    assert!((r_n - 2.0).abs() < 0.3, "{r_n}");
}

#[test]
fn decaying_profile_stays_above_the_worst_case_bound() {
    let expo = ProfileShape::TruncatedExponential { rate: 2.0 };
    let b = bundle(0.1, 1.0, &[(0.5, expo), (0.5, expo)], &[A, B]);
    let est = estimate_snr(&b, &SimConfig { trials: 5_000, seed: 7, nu: 8, reference_user: 0 }).unwrap();
    let bound = snr_lower_bound(&b).unwrap().per_user_bound[0];
    assert!(est.snr_hat >= bound - 3.0 * est.se, "{} < {bound}", est.snr_hat);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let b = bundle(0.3, 1.0, &[(0.4, RECT), (0.2, RECT)], &[A, B]);
    let cfg = SimConfig { trials: 300, seed: 8, ..SimConfig::default() };
    let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let a = serial.install(|| estimate_snr(&b, &cfg)).unwrap();
    let c = estimate_snr(&b, &cfg).unwrap();
    assert_eq!(a, c);
}
