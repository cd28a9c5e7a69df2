use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    feasibility_gap, is_feasible, lift, objective, reduce, reduced_gradient, sphere_objective_exact,
    DecisionVector, Dd, ProblemInstance,
};
use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::spectral::{decompose_chips, embed_vector};

const ARMIJO_C: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;
const MAX_STEP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Stop once the Riemannian gradient norm falls below this.
    pub tol: f64,
    pub max_iters: usize,
    pub restarts: usize,
    pub seed: u64,
    /// First trial step; later iterations use a Barzilai-Borwein guess.
    pub step_init: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 5000,
            restarts: 8,
            seed: 0,
            step_init: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iter: usize,
    pub f: f64,
    pub grad_norm: f64,
    /// Accepted step, 0 on the initial row.
    pub step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIters,
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub x: DecisionVector,
    pub objective: f64,
    pub trace: Vec<TraceRow>,
    /// Objective at every trace row in double-double precision.
    pub exact_objective: Vec<Dd>,
    pub iterations: usize,
    pub stop: StopReason,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn write_trace<W: Write>(&self, w: W) -> Result<()> {
        write_trace(w, &self.trace)
    }
}

pub fn write_trace<W: Write>(mut w: W, rows: &[TraceRow]) -> Result<()> {
    writeln!(w, "iter,f,grad_norm,step")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{}",
            r.iter,
            fmt_f64(r.f),
            fmt_f64(r.grad_norm),
            fmt_f64(r.step)
        )?;
    }
    Ok(())
}

/// Random unit-modulus chips for every user, embedded as a feasible point.
/// `stream` selects an independent generator for the same seed.
pub fn random_start(inst: &ProblemInstance, seed: u64, stream: u64) -> DecisionVector {
    let (n, k) = (inst.n_chips(), inst.n_users());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut data = Vec::with_capacity(4 * n * k);
    for _ in 0..k {
        let chips: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let c = decompose_chips(&chips);
        data.extend(embed_vector(&c.alpha));
        data.extend(embed_vector(&c.beta));
    }
    DecisionVector::from_vec(n, k, data).expect("block sizes are consistent")
}

/// Tangent projection of `g` at `alpha` on each sphere block.
fn riemannian(alpha: &[f64], g: &[f64], block: usize, radius_sq: f64) -> Vec<f64> {
    let mut out = g.to_vec();
    for (a, o) in alpha.chunks(block).zip(out.chunks_mut(block)) {
        let dot: f64 = a.iter().zip(o.iter()).map(|(x, y)| x * y).sum();
        let c = dot / radius_sq;
        o.iter_mut().zip(a).for_each(|(oi, ai)| *oi -= c * ai);
    }
    out
}

fn retract(alpha: &[f64], dir: &[f64], t: f64, block: usize, radius_sq: f64) -> Vec<f64> {
    let mut out: Vec<f64> = alpha.iter().zip(dir).map(|(a, d)| a - t * d).collect();
    for b in out.chunks_mut(block) {
        let s = (radius_sq / b.iter().map(|v| v * v).sum::<f64>()).sqrt();
        b.iter_mut().for_each(|v| *v *= s);
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient descent on the product of spheres `‖α′_k‖² = N`
/// with Armijo backtracking. Every iterate is lifted back to a feasible
/// decision vector.
pub fn solve(inst: &ProblemInstance, start: &DecisionVector, opts: &SolverOptions) -> Result<SolveOutcome> {
    if !(opts.tol > 0.0) {
        return Err(Error::NonPositiveParameter("tol"));
    }
    if !(opts.step_init > 0.0) || !opts.step_init.is_finite() {
        return Err(Error::NonPositiveParameter("step_init"));
    }
    if !is_feasible(start, inst)? {
        let (linear, norm) = feasibility_gap(start, inst)?;
        return Err(Error::NonFeasibleStart(format!(
            "linear constraint gap {linear:.3e}, norm gap {norm:.3e}"
        )));
    }
    let n = inst.n_chips();
    let block = 2 * n;
    let radius_sq = n as f64;

    let mut alpha = reduce(start);
    let mut f = sphere_objective_exact(&alpha, inst)?;
    let mut g = riemannian(&alpha, &reduced_gradient(&alpha, inst)?, block, radius_sq);
    let mut gnorm = dot(&g, &g).sqrt();
    let mut trace = vec![TraceRow {
        iter: 0,
        f: f.to_f64(),
        grad_norm: gnorm,
        step: 0.0,
    }];
    let mut exact = vec![f];
    let mut trial = opts.step_init;
    let mut iter = 0;

    while gnorm >= opts.tol && iter < opts.max_iters {
        let decrease = ARMIJO_C * gnorm * gnorm;
        let mut t = trial;
        let (next, f_next) = loop {
            let cand = retract(&alpha, &g, t, block, radius_sq);
            let fc = sphere_objective_exact(&cand, inst)?;
            if fc.sub(f).to_f64() <= -t * decrease {
                break (cand, fc);
            }
            t *= 0.5;
            if t < MIN_STEP {
                return Err(Error::LineSearchStall {
                    iteration: iter,
                    step: t,
                    last_alpha: alpha,
                });
            }
        };
        let g_next = riemannian(&next, &reduced_gradient(&next, inst)?, block, radius_sq);
        let s: Vec<f64> = next.iter().zip(&alpha).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_next.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y).abs();
        trial = if sy > 0.0 {
            (dot(&s, &s) / sy).clamp(MIN_STEP * 1e4, MAX_STEP)
        } else {
            opts.step_init
        };

        iter += 1;
        alpha = next;
        f = f_next;
        g = g_next;
        gnorm = dot(&g, &g).sqrt();
        trace.push(TraceRow {
            iter,
            f: f.to_f64(),
            grad_norm: gnorm,
            step: t,
        });
        exact.push(f);
    }

    let x = lift(&alpha, inst)?;
    Ok(SolveOutcome {
        objective: objective(&x, inst)?,
        x,
        trace,
        exact_objective: exact,
        iterations: iter,
        stop: if gnorm < opts.tol {
            StopReason::Converged
        } else {
            StopReason::MaxIters
        },
    })
}

#[derive(Debug, Clone)]
pub struct MultiStartOutcome {
    pub best: SolveOutcome,
    pub best_restart: usize,
    /// Final objective per restart, `None` where that run failed.
    pub objectives: Vec<Option<f64>>,
}

/// Runs `opts.restarts` (at least one) solves from [`random_start`] with
/// streams `0..restarts` in parallel and keeps the lowest objective.
pub fn solve_multistart(inst: &ProblemInstance, opts: &SolverOptions) -> Result<MultiStartOutcome> {
    let runs = opts.restarts.max(1);
    let results: Vec<Result<SolveOutcome>> = (0..runs)
        .into_par_iter()
        .map(|r| solve(inst, &random_start(inst, opts.seed, r as u64), opts))
        .collect();
    let objectives = results
        .iter()
        .map(|r| r.as_ref().ok().map(|o| o.objective))
        .collect();
    let mut best: Option<(usize, SolveOutcome)> = None;
    let mut first_err = None;
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(out) => {
                if best.as_ref().is_none_or(|(_, b)| out.objective < b.objective) {
                    best = Some((r, out));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((best_restart, best)) => Ok(MultiStartOutcome {
            best,
            best_restart,
            objectives,
        }),
        None => Err(first_err.expect("at least one restart ran")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SystemModel, UserChannel};
    use crate::optimizer::kkt_multipliers;
    use crate::snr::WeightMatrix;

    fn instance(n: usize, k: usize) -> ProblemInstance {
        let model = SystemModel::new(n, k, 1.0, 1.0, 0.1).unwrap();
        let channels: Vec<_> = (0..k)
            .map(|u| UserChannel::rectangular(0.3 + 0.1 * u as f64, 1.0, 1, &model).unwrap())
            .collect();
        ProblemInstance::from_weights(WeightMatrix::new(&model, &channels), model).unwrap()
    }

    #[test]
    fn single_user_run_decreases_and_certifies() {
        let inst = instance(4, 1);
        let out = solve(&inst, &random_start(&inst, 7, 0), &SolverOptions::default()).unwrap();
        assert!(out.converged());
        for w in out.exact_objective.windows(2) {
            assert!(w[1].sub(w[0]).to_f64() < 0.0);
        }
        let cert = kkt_multipliers(&out.x, &inst).unwrap();
        assert!(cert.mu_spread < 1e-6, "{}", cert.mu_spread);
        assert!(cert.stationarity_residual < 1e-6);
    }

    #[test]
    fn stationary_start_takes_no_steps() {
        let inst = instance(4, 2);
        let tight = SolverOptions {
            tol: 1e-11,
            ..SolverOptions::default()
        };
        let first = solve(&inst, &random_start(&inst, 3, 0), &tight).unwrap();
        assert!(first.converged());
        let again = solve(&inst, &first.x, &SolverOptions::default()).unwrap();
        assert_eq!(again.iterations, 0);
        assert_eq!(again.trace.len(), 1);
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let inst = instance(4, 1);
        let x = random_start(&inst, 1, 0).scaled(1.01);
        assert!(matches!(
            solve(&inst, &x, &SolverOptions::default()),
            Err(Error::NonFeasibleStart(_))
        ));
    }

    #[test]
    fn iterates_stay_feasible() {
        let inst = instance(8, 2);
        let opts = SolverOptions {
            max_iters: 25,
            ..SolverOptions::default()
        };
        let out = solve(&inst, &random_start(&inst, 5, 2), &opts).unwrap();
        assert!(is_feasible(&out.x, &inst).unwrap());
    }

    #[test]
    fn multistart_is_deterministic() {
        let inst = instance(8, 2);
        let opts = SolverOptions {
            restarts: 4,
            seed: 3,
            ..SolverOptions::default()
        };
        let a = solve_multistart(&inst, &opts).unwrap();
        let b = solve_multistart(&inst, &opts).unwrap();
        assert_eq!(a.best.objective, b.best.objective);
        assert_eq!(a.best_restart, b.best_restart);
        let min = a.objectives.iter().flatten().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(a.best.objective, min);
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let rows = [TraceRow {
            iter: 0,
            f: 1.5,
            grad_norm: 0.25,
            step: 0.0,
        }];
        let mut buf = Vec::new();
        write_trace(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iter,f,grad_norm,step"));
        assert!(lines.next().unwrap().starts_with("0,1.5000000000000000e0,"));
    }
}
