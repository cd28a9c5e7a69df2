//! Complex-baseband Monte Carlo simulation of the asynchronous link.
//!
//! Time is sampled at `dt = T_c / ν` with one sample per grid cell. Chip
//! pulses are rectangular and every delay (user offsets and channel taps)
//! is an integer number of samples, so each correlator integral is an
//! exact sum on the grid. The only discretization is the delay grid itself.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::model::{ModelBundle, SystemModel, UserChannel};

pub const MIN_SAMPLES_PER_CHIP: usize = 8;
pub const MIN_TRIALS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Samples per chip `ν`.
    pub nu: usize,
    pub trials: usize,
    pub seed: u64,
    /// Index of the user whose correlator output is measured.
    pub reference_user: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nu: MIN_SAMPLES_PER_CHIP,
            trials: 10_000,
            seed: 0,
            reference_user: 0,
        }
    }
}

fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// Independent circular Gaussian taps per user on the grid `jΔ`,
/// `j = 0..M_k·N·ν`, with variance `g_k(jΔ)·Δ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub taps: Vec<Vec<Complex64>>,
}

impl ChannelRealization {
    pub fn tap_variances(channel: &UserChannel, model: &SystemModel, nu: usize) -> Vec<f64> {
        let dt = model.chip_duration() / nu as f64;
        let count = channel.delay_span as usize * model.n_chips * nu;
        let profile = channel.profile(model);
        (0..count).map(|j| profile.eval(j as f64 * dt) * dt).collect()
    }

    pub fn draw<R: Rng + ?Sized>(channels: &[UserChannel], model: &SystemModel, nu: usize, rng: &mut R) -> Self {
        let taps = channels
            .iter()
            .map(|ch| {
                Self::tap_variances(ch, model, nu)
                    .into_iter()
                    .map(|v| complex_normal(rng, v))
                    .collect()
            })
            .collect();
        Self { taps }
    }
}

/// Correlator output and its four components for one trial.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CorrelatorBreakdown {
    pub z: f64,
    pub d: f64,
    pub f: f64,
    pub ii: f64,
    pub nn: f64,
}

impl CorrelatorBreakdown {
    pub fn component_sum(&self) -> f64 {
        self.d + self.f + self.ii + self.nn
    }
}

/// Per-bundle precomputation shared by all trials.
#[derive(Debug, Clone)]
pub struct Simulator {
    model: SystemModel,
    channels: Vec<UserChannel>,
    /// Chip value at every sample of one symbol, per user.
    waveforms: Vec<Vec<Complex64>>,
    tap_variances: Vec<Vec<f64>>,
    nu: usize,
    reference: usize,
    dt: f64,
}

impl Simulator {
    pub fn new(bundle: &ModelBundle, nu: usize, reference_user: usize) -> Result<Self> {
        if nu < MIN_SAMPLES_PER_CHIP {
            return Err(Error::ResolutionTooCoarse {
                nu,
                min: MIN_SAMPLES_PER_CHIP,
            });
        }
        let k = bundle.model.n_users;
        if reference_user >= k {
            return Err(Error::IndexOutOfRange {
                index: reference_user,
                lo: 0,
                hi: k.saturating_sub(1),
            });
        }
        let waveforms = bundle
            .sequences
            .iter()
            .map(|s| s.chips().iter().flat_map(|&c| std::iter::repeat_n(c, nu)).collect())
            .collect();
        let tap_variances = bundle
            .channels
            .iter()
            .map(|ch| {
                if ch.rician_gain > 0.0 {
                    ChannelRealization::tap_variances(ch, &bundle.model, nu)
                } else {
                    Vec::new()
                }
            })
            .collect();
        Ok(Self {
            model: bundle.model,
            channels: bundle.channels.clone(),
            waveforms,
            tap_variances,
            nu,
            reference: reference_user,
            dt: bundle.model.chip_duration() / nu as f64,
        })
    }

    fn samples_per_symbol(&self) -> usize {
        self.model.n_chips * self.nu
    }

    /// `b_k(t)s_k(t)` over the symbols in `bits`, oldest sample first.
    fn baseband(&self, k: usize, bits: &[f64]) -> Vec<Complex64> {
        bits.iter()
            .flat_map(|&b| self.waveforms[k].iter().map(move |&c| c * b))
            .collect()
    }

    /// Runs one trial with every random quantity drawn from `rng`.
    pub fn trial<R: Rng + ?Sized>(&self, rng: &mut R) -> CorrelatorBreakdown {
        let sps = self.samples_per_symbol();
        let k_users = self.model.n_users;
        let i = self.reference;
        let amp = (self.model.power / 2.0).sqrt();
        let dt = self.dt;

        let mut delays = vec![0usize; k_users];
        let mut phases = vec![Complex64::new(1.0, 0.0); k_users];
        for k in 0..k_users {
            if k != i {
                delays[k] = rng.random_range(0..sps);
                phases[k] = Complex64::from_polar(1.0, rng.random_range(0.0..TAU));
            }
        }
        // Symbols −(M_k+1)..=0, oldest first.
        let bits: Vec<Vec<f64>> = (0..k_users)
            .map(|k| {
                let count = self.channels[k].delay_span as usize + 2;
                (0..count)
                    .map(|n| {
                        if k == i && n == count - 1 {
                            1.0
                        } else if rng.random::<bool>() {
                            1.0
                        } else {
                            -1.0
                        }
                    })
                    .collect()
            })
            .collect();
        let taps: Vec<Vec<Complex64>> = self
            .tap_variances
            .iter()
            .map(|vars| vars.iter().map(|&v| complex_normal(rng, v)).collect())
            .collect();
        let noise: Vec<Complex64> = if self.model.noise_density > 0.0 {
            let var = 2.0 * self.model.noise_density / dt;
            (0..sps).map(|_| complex_normal(rng, var)).collect()
        } else {
            Vec::new()
        };

        let reference = &self.waveforms[i];
        let signals: Vec<Vec<Complex64>> = (0..k_users).map(|k| self.baseband(k, &bits[k])).collect();
        // Sample q = 0 of the current symbol sits at this offset.
        let origin = |k: usize| bits[k].len() * sps - sps;
        // c_k(d) = ∫ s̄_i(t)·b_k(t − d·dt)s_k(t − d·dt) dt over [0, T).
        let corr = |k: usize, d: usize| -> Complex64 {
            let base = origin(k) - d;
            let x = &signals[k][base..base + sps];
            reference.iter().zip(x).map(|(s, v)| s.conj() * v).sum::<Complex64>() * dt
        };

        let d_comp = amp * corr(i, 0).re;
        let f_comp = if taps[i].is_empty() {
            0.0
        } else {
            let faded: Complex64 = taps[i].iter().enumerate().map(|(j, h)| h * corr(i, j)).sum();
            amp * (faded * self.channels[i].rician_gain).re
        };
        let mut i_comp = 0.0;
        for k in (0..k_users).filter(|&k| k != i) {
            let mut u = corr(k, delays[k]);
            if !taps[k].is_empty() {
                let faded: Complex64 = taps[k]
                    .iter()
                    .enumerate()
                    .map(|(j, h)| h * corr(k, delays[k] + j))
                    .sum();
                u += faded * self.channels[k].rician_gain;
            }
            i_comp += amp * (phases[k] * u).re;
        }
        let n_comp = if noise.is_empty() {
            0.0
        } else {
            0.5 * (noise.iter().zip(reference).map(|(w, s)| w * s.conj()).sum::<Complex64>() * dt).re
        };

        // Z from the superposed received waveform on [0, T).
        let sqrt_2p = (2.0 * self.model.power).sqrt();
        let mut received = vec![Complex64::new(0.0, 0.0); sps];
        for k in 0..k_users {
            let gamma = self.channels[k].rician_gain;
            let o = origin(k) - delays[k];
            for (p, r) in received.iter_mut().enumerate() {
                let mut u = signals[k][o + p];
                for (j, h) in taps[k].iter().enumerate() {
                    u += h * signals[k][o + p - j] * gamma;
                }
                *r += phases[k] * u * sqrt_2p;
            }
        }
        let z = 0.5 * (received.iter().zip(reference).map(|(r, s)| r * s.conj()).sum::<Complex64>() * dt).re
            + n_comp;

        CorrelatorBreakdown {
            z,
            d: d_comp,
            f: f_comp,
            ii: i_comp,
            nn: n_comp,
        }
    }
}

/// One trial for `bundle` with `ν` samples per chip and user 0 as reference.
pub fn simulate_trial<R: Rng + ?Sized>(bundle: &ModelBundle, nu: usize, rng: &mut R) -> Result<CorrelatorBreakdown> {
    Ok(Simulator::new(bundle, nu, 0)?.trial(rng))
}

/// Generator for trial `t`: the seed picks the key, the trial picks the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Runs `cfg.trials` trials in parallel; the result is in trial order and
/// independent of the thread count.
pub fn run_trials(bundle: &ModelBundle, cfg: &SimConfig) -> Result<Vec<CorrelatorBreakdown>> {
    if cfg.trials < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            trials: cfg.trials,
            min: MIN_TRIALS,
        });
    }
    let sim = Simulator::new(bundle, cfg.nu, cfg.reference_user)?;
    Ok((0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| sim.trial(&mut trial_rng(cfg.seed, t)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceEstimates {
    pub mean_d: Estimate,
    pub mean_z: Estimate,
    pub var_f: Estimate,
    pub var_i: Estimate,
    pub var_n: Estimate,
    /// `Var{F} + Var{I} + Var{N}`.
    pub var_total: Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloEstimate {
    pub snr_hat: f64,
    pub se: f64,
    pub var_components: VarianceEstimates,
    pub trials: usize,
    pub seed: u64,
    pub nu: usize,
}

/// Sum by recursive halving, so the rounding pattern depends only on length.
fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

/// Standard error of the mean of `v`.
fn sem(v: &[f64]) -> f64 {
    let m = mean(v);
    let dev: Vec<f64> = v.iter().map(|x| (x - m) * (x - m)).collect();
    (pairwise_sum(&dev) / (v.len() as f64 - 1.0) / v.len() as f64).sqrt()
}

fn mean_estimate(v: &[f64]) -> Estimate {
    Estimate {
        value: mean(v),
        se: sem(v),
    }
}

/// Squared deviations, whose mean is the variance and whose spread gives
/// its standard error.
fn sq_dev(v: &[f64]) -> Vec<f64> {
    let m = mean(v);
    v.iter().map(|x| (x - m) * (x - m)).collect()
}

fn var_estimate(u: &[f64]) -> Estimate {
    let n = u.len() as f64;
    Estimate {
        value: pairwise_sum(u) / (n - 1.0),
        se: sem(u),
    }
}

/// `snr_hat = mean(D) / √(var F + var I + var N)` with a delta-method error.
pub fn summarize(trials: &[CorrelatorBreakdown], cfg: &SimConfig) -> Result<MonteCarloEstimate> {
    if trials.len() < MIN_TRIALS {
        return Err(Error::TooFewTrials {
            trials: trials.len(),
            min: MIN_TRIALS,
        });
    }
    let col = |g: fn(&CorrelatorBreakdown) -> f64| trials.iter().map(g).collect::<Vec<f64>>();
    let (d, z) = (col(|t| t.d), col(|t| t.z));
    let (uf, ui, un) = (sq_dev(&col(|t| t.f)), sq_dev(&col(|t| t.ii)), sq_dev(&col(|t| t.nn)));
    let ut: Vec<f64> = (0..trials.len()).map(|t| uf[t] + ui[t] + un[t]).collect();

    let mean_d = mean_estimate(&d);
    let var_total = var_estimate(&ut);
    let v = var_total.value;
    let snr_hat = mean_d.value / v.sqrt();
    let se = if v > 0.0 {
        let infl: Vec<f64> = (0..trials.len())
            .map(|t| (d[t] - mean_d.value) / v.sqrt() - mean_d.value / (2.0 * v.powf(1.5)) * (ut[t] - v))
            .collect();
        sem(&infl)
    } else {
        f64::NAN
    };
    Ok(MonteCarloEstimate {
        snr_hat,
        se,
        var_components: VarianceEstimates {
            mean_d,
            mean_z: mean_estimate(&z),
            var_f: var_estimate(&uf),
            var_i: var_estimate(&ui),
            var_n: var_estimate(&un),
            var_total,
        },
        trials: trials.len(),
        seed: cfg.seed,
        nu: cfg.nu,
    })
}

pub fn estimate_snr(bundle: &ModelBundle, cfg: &SimConfig) -> Result<MonteCarloEstimate> {
    summarize(&run_trials(bundle, cfg)?, cfg)
}

/// Per-trial dump with header `trial,d,f,i,n`.
pub fn write_trials<W: Write>(mut w: W, trials: &[CorrelatorBreakdown]) -> Result<()> {
    writeln!(w, "trial,d,f,i,n")?;
    for (t, b) in trials.iter().enumerate() {
        writeln!(w, "{t},{},{},{},{}", fmt_f64(b.d), fmt_f64(b.f), fmt_f64(b.ii), fmt_f64(b.nn))?;
    }
    Ok(())
}
