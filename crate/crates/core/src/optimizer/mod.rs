//! The real-embedded sequence design problem
//!
//! ```text
//! min_x  f(x) = Σ_i Σ_k Z_{i,k} Σ_m Ŝ_m^{i,k}
//! s.t.   β′_k = Φ̂′ α′_k,   ‖α′_k‖² = N      (k = 1..K)
//! ```
//!
//! Each user block of the decision vector is laid out as
//! `[α₁ (N), α₂ (N), β₁ (N), β₂ (N)]` where the subscripts 1/2 are real and
//! imaginary parts. Eliminating `β′` through the linear constraint leaves a
//! product of `K` spheres of radius `√N` in the `α′` coordinates, which is
//! where [`solve`] works.

mod exact;
mod kkt;
mod solver;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::correlation::spectrum_weights;
use crate::error::{Error, Result};
use crate::model::{SpreadingSequence, SystemModel, NORM_TOLERANCE};
use crate::snr::WeightMatrix;
use crate::spectral::{build_transforms, decompose, embed_vector, unembed_vector, TransformPair};

pub use exact::Dd;
pub use kkt::{
    constraint_residuals, kkt_aux, kkt_multipliers, kkt_multipliers_with, ConstraintResiduals,
    KktAux, KktCertificate, KktOptions, ALPHA_THRESHOLD,
};
pub use solver::{
    random_start, solve, solve_multistart, write_trace, MultiStartOutcome, SolveOutcome,
    SolverOptions, StopReason, TraceRow,
};

/// Tolerance on both constraints of a feasible decision vector.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

/// `x = (x_1; …; x_K)` with `x_k = (α′_k; β′_k)`, total length `4NK`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVector {
    n_chips: usize,
    n_users: usize,
    data: Vec<f64>,
}

impl DecisionVector {
    pub fn from_vec(n_chips: usize, n_users: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != 4 * n_chips * n_users {
            return Err(Error::DimensionMismatch {
                what: "decision vector",
                expected: 4 * n_chips * n_users,
                found: data.len(),
            });
        }
        Ok(Self {
            n_chips,
            n_users,
            data,
        })
    }

    pub fn zeros(n_chips: usize, n_users: usize) -> Self {
        Self {
            n_chips,
            n_users,
            data: vec![0.0; 4 * n_chips * n_users],
        }
    }

    /// Embeds the `α`/`β` decompositions of the given sequences.
    pub fn from_sequences(sequences: &[SpreadingSequence]) -> Result<Self> {
        let n = sequences.first().map_or(0, |s| s.len());
        let mut data = Vec::with_capacity(4 * n * sequences.len());
        for s in sequences {
            if s.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "sequence length",
                    expected: n,
                    found: s.len(),
                });
            }
            let c = decompose(s)?;
            data.extend(embed_vector(&c.alpha));
            data.extend(embed_vector(&c.beta));
        }
        Self::from_vec(n, sequences.len(), data)
    }

    pub fn n_chips(&self) -> usize {
        self.n_chips
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, k: usize) -> &[f64] {
        let w = 4 * self.n_chips;
        &self.data[k * w..(k + 1) * w]
    }

    pub fn block_mut(&mut self, k: usize) -> &mut [f64] {
        let w = 4 * self.n_chips;
        &mut self.data[k * w..(k + 1) * w]
    }

    /// `α′_k = (α₁; α₂)`.
    pub fn alpha_r(&self, k: usize) -> &[f64] {
        &self.block(k)[..2 * self.n_chips]
    }

    /// `β′_k = (β₁; β₂)`.
    pub fn beta_r(&self, k: usize) -> &[f64] {
        &self.block(k)[2 * self.n_chips..]
    }

    pub fn alpha(&self, k: usize) -> Vec<Complex64> {
        unembed_vector(self.alpha_r(k))
    }

    pub fn beta(&self, k: usize) -> Vec<Complex64> {
        unembed_vector(self.beta_r(k))
    }

    /// Chip sequences `s_k = (1/√N) Σ α_m w_m(0)`.
    pub fn sequences(&self) -> Vec<Vec<Complex64>> {
        (0..self.n_users)
            .map(|k| crate::spectral::reconstruct_from_alpha(&self.alpha(k)))
            .collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            n_chips: self.n_chips,
            n_users: self.n_users,
            data: self.data.iter().map(|x| x * c).collect(),
        }
    }
}

/// Weights, transforms and model defining one instance of the problem.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub weights: WeightMatrix,
    pub transforms: TransformPair,
    pub model: SystemModel,
    phi_hat_r: DMatrix<f64>,
    /// `Z + Zᵀ`.
    sym_weights: DMatrix<f64>,
    weight_alpha: Vec<f64>,
    weight_beta: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(weights: WeightMatrix, transforms: TransformPair, model: SystemModel) -> Result<Self> {
        let n = model.n_chips;
        if transforms.n_chips() != n {
            return Err(Error::DimensionMismatch {
                what: "transform size",
                expected: n,
                found: transforms.n_chips(),
            });
        }
        if weights.n_users() != model.n_users || weights.z.ncols() != model.n_users {
            return Err(Error::DimensionMismatch {
                what: "weight matrix",
                expected: model.n_users,
                found: weights.n_users(),
            });
        }
        let phi_hat_r = transforms.phi_hat_real();
        let sym_weights = &weights.z + weights.z.transpose();
        let (weight_alpha, weight_beta) = spectrum_weights(n);
        Ok(Self {
            weights,
            transforms,
            model,
            phi_hat_r,
            sym_weights,
            weight_alpha,
            weight_beta,
        })
    }

    /// Builds transforms for `model.n_chips` and wraps the given weights.
    pub fn from_weights(weights: WeightMatrix, model: SystemModel) -> Result<Self> {
        Self::new(weights, build_transforms(model.n_chips), model)
    }

    pub fn n_chips(&self) -> usize {
        self.model.n_chips
    }

    pub fn n_users(&self) -> usize {
        self.model.n_users
    }

    /// `Φ̂′`.
    pub fn phi_hat_r(&self) -> &DMatrix<f64> {
        &self.phi_hat_r
    }

    pub(crate) fn sym_weights(&self) -> &DMatrix<f64> {
        &self.sym_weights
    }

    /// `(1 + ½cos(2πm/N), 1 + ½cos(2π(m/N + 1/2N)))` by storage slot.
    pub fn spectrum_weights(&self) -> (&[f64], &[f64]) {
        (&self.weight_alpha, &self.weight_beta)
    }

    fn check(&self, x: &DecisionVector) -> Result<()> {
        if x.n_chips != self.n_chips() || x.n_users != self.n_users() {
            return Err(Error::DimensionMismatch {
                what: "decision vector",
                expected: 4 * self.n_chips() * self.n_users(),
                found: x.data.len(),
            });
        }
        Ok(())
    }
}

/// Per-user, per-frequency energies `α₁² + α₂²` and `β₁² + β₂²`.
fn energies(x: &DecisionVector) -> (DMatrix<f64>, DMatrix<f64>) {
    let (n, k) = (x.n_chips, x.n_users);
    let mut a = DMatrix::zeros(k, n);
    let mut b = DMatrix::zeros(k, n);
    for u in 0..k {
        let blk = x.block(u);
        for m in 0..n {
            a[(u, m)] = blk[m] * blk[m] + blk[n + m] * blk[n + m];
            b[(u, m)] = blk[2 * n + m] * blk[2 * n + m] + blk[3 * n + m] * blk[3 * n + m];
        }
    }
    (a, b)
}

/// `f(x) = Σ_i Σ_k Z_{i,k} Σ_m Ŝ_m^{i,k}`.
pub fn objective(x: &DecisionVector, inst: &ProblemInstance) -> Result<f64> {
    inst.check(x)?;
    let (a, b) = energies(x);
    let z = &inst.weights.z;
    let (wa, wb) = inst.spectrum_weights();
    let mut f = 0.0;
    for m in 0..inst.n_chips() {
        let (am, bm) = (a.column(m), b.column(m));
        f += wa[m] * (am.transpose() * z * am)[(0, 0)] + wb[m] * (bm.transpose() * z * bm)[(0, 0)];
    }
    Ok(f)
}

/// Analytic gradient, e.g. `∂f/∂α₁,q^(p) = 2α₁,q^(p) Σ_k (Z_{k,p} + Z_{p,k}) A_q^(k)`.
pub fn gradient(x: &DecisionVector, inst: &ProblemInstance) -> Result<Vec<f64>> {
    inst.check(x)?;
    let (n, k) = (inst.n_chips(), inst.n_users());
    let (a, b) = energies(x);
    let (wa, wb) = inst.spectrum_weights();
    // Σ_k (Z_{k,p} + Z_{p,k}) A_q^(k) for every (p, q).
    let ga = inst.sym_weights() * &a;
    let gb = inst.sym_weights() * &b;
    let mut grad = vec![0.0; x.data.len()];
    for p in 0..k {
        let blk = x.block(p);
        let out = &mut grad[p * 4 * n..(p + 1) * 4 * n];
        for q in 0..n {
            let sa = 2.0 * ga[(p, q)] * wa[q];
            let sb = 2.0 * gb[(p, q)] * wb[q];
            out[q] = sa * blk[q];
            out[n + q] = sa * blk[n + q];
            out[2 * n + q] = sb * blk[2 * n + q];
            out[3 * n + q] = sb * blk[3 * n + q];
        }
    }
    Ok(grad)
}

/// Drops the `β′` blocks: `(α′_1; …; α′_K)`, length `2NK`.
pub fn reduce(x: &DecisionVector) -> Vec<f64> {
    (0..x.n_users).flat_map(|k| x.alpha_r(k).to_vec()).collect()
}

/// Rebuilds `β′_k = Φ̂′ α′_k` for every user.
pub fn lift(alpha: &[f64], inst: &ProblemInstance) -> Result<DecisionVector> {
    let (n, k) = (inst.n_chips(), inst.n_users());
    if alpha.len() != 2 * n * k {
        return Err(Error::DimensionMismatch {
            what: "reduced variable",
            expected: 2 * n * k,
            found: alpha.len(),
        });
    }
    let mut data = Vec::with_capacity(4 * n * k);
    for u in 0..k {
        let a = &alpha[u * 2 * n..(u + 1) * 2 * n];
        let beta = inst.phi_hat_r() * DVector::from_column_slice(a);
        data.extend_from_slice(a);
        data.extend(beta.iter());
    }
    DecisionVector::from_vec(n, k, data)
}

/// Gradient of `α′ ↦ f(α′, Φ̂′α′)`: `∇_α f + Φ̂′ᵀ ∇_β f` per user.
pub fn reduced_gradient(alpha: &[f64], inst: &ProblemInstance) -> Result<Vec<f64>> {
    let x = lift(alpha, inst)?;
    let full = gradient(&x, inst)?;
    Ok(project_gradient(&full, inst))
}

pub(crate) fn project_gradient(full: &[f64], inst: &ProblemInstance) -> Vec<f64> {
    let n = inst.n_chips();
    let mut out = Vec::with_capacity(2 * n * inst.n_users());
    for u in 0..inst.n_users() {
        let blk = &full[u * 4 * n..(u + 1) * 4 * n];
        let back = inst.phi_hat_r().tr_mul(&DVector::from_column_slice(&blk[2 * n..]));
        out.extend(blk[..2 * n].iter().zip(back.iter()).map(|(g, h)| g + h));
    }
    out
}

/// `f(α′, Φ̂′α′)` in double-double precision.
pub fn reduced_objective_exact(alpha: &[f64], inst: &ProblemInstance) -> Result<Dd> {
    reduced_objective_dd(alpha, inst, false)
}

/// `f` at the radial projection of every block onto `‖α′_k‖² = N`, in
/// double-double precision. On the sphere this equals
/// [`reduced_objective_exact`]; off it, rounding in the block norms cancels.
pub fn sphere_objective_exact(alpha: &[f64], inst: &ProblemInstance) -> Result<Dd> {
    reduced_objective_dd(alpha, inst, true)
}

fn reduced_objective_dd(alpha: &[f64], inst: &ProblemInstance, project: bool) -> Result<Dd> {
    let (n, k) = (inst.n_chips(), inst.n_users());
    if alpha.len() != 2 * n * k {
        return Err(Error::DimensionMismatch {
            what: "reduced variable",
            expected: 2 * n * k,
            found: alpha.len(),
        });
    }
    let p = inst.phi_hat_r();
    let mut ea = vec![Dd::ZERO; k * n];
    let mut eb = vec![Dd::ZERO; k * n];
    for u in 0..k {
        let a = &alpha[u * 2 * n..(u + 1) * 2 * n];
        // Each block's energies carry a factor N/‖α′_k‖² when projecting.
        let scale = if project {
            let norm = a.iter().fold(Dd::ZERO, |acc, &v| acc.add(Dd::prod(v, v)));
            Dd::from_f64(n as f64).div(norm)
        } else {
            Dd::from_f64(1.0)
        };
        let beta: Vec<Dd> = (0..2 * n)
            .map(|r| {
                (0..2 * n).fold(Dd::ZERO, |acc, c| acc.add(Dd::prod(p[(r, c)], a[c])))
            })
            .collect();
        for m in 0..n {
            ea[u * n + m] = Dd::prod(a[m], a[m]).add(Dd::prod(a[n + m], a[n + m])).mul(scale);
            eb[u * n + m] = beta[m].mul(beta[m]).add(beta[n + m].mul(beta[n + m])).mul(scale);
        }
    }
    let z = &inst.weights.z;
    let (wa, wb) = inst.spectrum_weights();
    let mut f = Dd::ZERO;
    for i in 0..k {
        for j in 0..k {
            let zij = z[(i, j)];
            if zij == 0.0 {
                continue;
            }
            for m in 0..n {
                let ta = ea[i * n + m].mul(ea[j * n + m]).mul_f64(wa[m]);
                let tb = eb[i * n + m].mul(eb[j * n + m]).mul_f64(wb[m]);
                f = f.add(ta.add(tb).mul_f64(zij));
            }
        }
    }
    Ok(f)
}

/// Largest violation of `β′ = Φ̂′α′` and of `‖α′‖² = N` over all users.
pub fn feasibility_gap(x: &DecisionVector, inst: &ProblemInstance) -> Result<(f64, f64)> {
    inst.check(x)?;
    let n = inst.n_chips();
    let mut linear: f64 = 0.0;
    let mut norm: f64 = 0.0;
    for u in 0..inst.n_users() {
        let a = DVector::from_column_slice(x.alpha_r(u));
        let beta = inst.phi_hat_r() * &a;
        for (want, have) in beta.iter().zip(x.beta_r(u)) {
            linear = linear.max((want - have).abs());
        }
        norm = norm.max((a.norm_squared() - n as f64).abs());
    }
    Ok((linear, norm))
}

pub fn is_feasible(x: &DecisionVector, inst: &ProblemInstance) -> Result<bool> {
    let (linear, norm) = feasibility_gap(x, inst)?;
    Ok(linear <= FEASIBILITY_TOLERANCE && norm <= NORM_TOLERANCE.max(FEASIBILITY_TOLERANCE))
}
