//! Variance components and the closed-form worst-case SNR lower bound.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize, Serializer};

use crate::correlation::interference_spectrum;
use crate::error::Result;
use crate::model::{worst_case_mass, ModelBundle, SystemModel, UserChannel};
use crate::spectral::{decompose, SpectralCoefficients};

/// `Z_{i,i} = γ_i² C_i M_i T`, `Z_{i,k} = 1 + γ_k² L_k` for `i ≠ k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub z: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(model: &SystemModel, channels: &[UserChannel]) -> Self {
        let k = channels.len();
        let z = DMatrix::from_fn(k, k, |i, j| {
            if i == j {
                let ch = &channels[i];
                ch.rician_gain.powi(2) * worst_case_mass(ch, model)
            } else {
                let ch = &channels[j];
                1.0 + ch.rician_gain.powi(2) * ch.profile_mass
            }
        });
        Self { z }
    }

    pub fn from_matrix(z: DMatrix<f64>) -> Self {
        Self { z }
    }

    pub fn n_users(&self) -> usize {
        self.z.nrows()
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.z[(i, k)]
    }
}

fn serialize_bounds<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(v.len()))?;
    for x in v {
        if x.is_infinite() {
            seq.serialize_element("inf")?;
        } else {
            seq.serialize_element(x)?;
        }
    }
    seq.end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// `E{D_i}² = PT²/2`.
    pub signal_ms: f64,
    pub var_noise: f64,
    pub var_interference: Vec<f64>,
    pub var_fading_bound: Vec<f64>,
}

/// Per-user SNR lower bounds. A bound is `f64::INFINITY` when every variance
/// term vanishes; JSON carries that as the string `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SnrReport {
    #[serde(serialize_with = "serialize_bounds")]
    pub per_user_bound: Vec<f64>,
    pub variance_components: VarianceComponents,
}

impl SnrReport {
    /// One CSV row per user: `user,bound,var_fading_bound,var_interference,var_noise`.
    pub fn csv_rows(&self) -> Vec<String> {
        let vc = &self.variance_components;
        self.per_user_bound
            .iter()
            .enumerate()
            .map(|(i, b)| {
                format!(
                    "{i},{},{},{},{}",
                    crate::io::fmt_f64(*b),
                    crate::io::fmt_f64(vc.var_fading_bound[i]),
                    crate::io::fmt_f64(vc.var_interference[i]),
                    crate::io::fmt_f64(vc.var_noise)
                )
            })
            .collect()
    }

    pub const CSV_HEADER: &'static str = "user,bound,var_fading_bound,var_interference,var_noise";
}

/// `Var{N_i} = N₀T/4`.
pub fn noise_variance(model: &SystemModel) -> f64 {
    model.noise_density * model.symbol_duration / 4.0
}

/// `ΣS` sums for every ordered user pair.
#[derive(Debug, Clone)]
pub struct SpectrumTotals {
    totals: DMatrix<f64>,
}

impl SpectrumTotals {
    pub fn from_coefficients(coeffs: &[SpectralCoefficients]) -> Result<Self> {
        let k = coeffs.len();
        let mut totals = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in i..k {
                let total = interference_spectrum(&coeffs[i], &coeffs[j])?.total();
                totals[(i, j)] = total;
                totals[(j, i)] = total;
            }
        }
        Ok(Self { totals })
    }

    pub fn from_bundle(bundle: &ModelBundle) -> Result<Self> {
        let coeffs = bundle
            .sequences
            .iter()
            .map(decompose)
            .collect::<Result<Vec<_>>>()?;
        Self::from_coefficients(&coeffs)
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.totals[(i, k)]
    }
}

fn interference_from_totals(i: usize, totals: &SpectrumTotals, bundle: &ModelBundle) -> f64 {
    let m = &bundle.model;
    let n = m.n_chips as f64;
    let scale = m.power * m.symbol_duration.powi(2) / (12.0 * n * n);
    let sum: f64 = (0..m.n_users)
        .filter(|&k| k != i)
        .map(|k| {
            let ch = &bundle.channels[k];
            (1.0 + ch.rician_gain.powi(2) * ch.profile_mass) * totals.get(i, k)
        })
        .sum();
    scale * sum
}

fn fading_from_totals(i: usize, totals: &SpectrumTotals, bundle: &ModelBundle) -> f64 {
    let m = &bundle.model;
    let ch = &bundle.channels[i];
    let n = m.n_chips as f64;
    m.power * m.symbol_duration.powi(3) / (12.0 * n * n)
        * ch.rician_gain.powi(2)
        * ch.profile_height
        * ch.delay_span as f64
        * totals.get(i, i)
}

/// `Var{I_i} = (PT²/12N²) Σ_{k≠i} (1 + γ_k² L_k) Σ_m S_m^{i,k}`.
pub fn interference_variance(i: usize, bundle: &ModelBundle) -> Result<f64> {
    let totals = SpectrumTotals::from_bundle(bundle)?;
    Ok(interference_from_totals(i, &totals, bundle))
}

/// `Var{F_i} ≤ (PT³/12N²) γ_i² C_i M_i Σ_m S_m^{i,i}`, with equality for the
/// rectangular profile.
pub fn fading_variance_bound(i: usize, bundle: &ModelBundle) -> Result<f64> {
    let totals = SpectrumTotals::from_bundle(bundle)?;
    Ok(fading_from_totals(i, &totals, bundle))
}

/// Compact form `{(1/6N²) Σ_k Z_{i,k} Σ_m S_m^{i,k} + N₀/(2PT)}^{−1/2}`.
pub fn compact_bound(i: usize, weights: &WeightMatrix, totals: &SpectrumTotals, model: &SystemModel) -> f64 {
    let n = model.n_chips as f64;
    let weighted: f64 = (0..weights.n_users())
        .map(|k| weights.get(i, k) * totals.get(i, k))
        .sum();
    let denom = weighted / (6.0 * n * n)
        + model.noise_density / (2.0 * model.power * model.symbol_duration);
    if denom > 0.0 {
        denom.powf(-0.5)
    } else {
        f64::INFINITY
    }
}

pub fn snr_lower_bound(bundle: &ModelBundle) -> Result<SnrReport> {
    let totals = SpectrumTotals::from_bundle(bundle)?;
    Ok(report_from_totals(bundle, &totals))
}

pub fn report_from_totals(bundle: &ModelBundle, totals: &SpectrumTotals) -> SnrReport {
    let m = &bundle.model;
    let signal_ms = m.power * m.symbol_duration.powi(2) / 2.0;
    let var_noise = noise_variance(m);
    let var_interference: Vec<f64> = (0..m.n_users)
        .map(|i| interference_from_totals(i, totals, bundle))
        .collect();
    let var_fading_bound: Vec<f64> = (0..m.n_users)
        .map(|i| fading_from_totals(i, totals, bundle))
        .collect();
    let per_user_bound = (0..m.n_users)
        .map(|i| {
            let denom = var_fading_bound[i] + var_interference[i] + var_noise;
            if denom > 0.0 {
                (signal_ms / denom).sqrt()
            } else {
                f64::INFINITY
            }
        })
        .collect();
    SnrReport {
        per_user_bound,
        variance_components: VarianceComponents {
            signal_ms,
            var_noise,
            var_interference,
            var_fading_bound,
        },
    }
}
