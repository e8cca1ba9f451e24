//! Worst-case expectation over a 1-Wasserstein ball around the empirical
//! measure, computed as a budget allocation problem.
//!
//! The total transport budget `ρt` is split across samples to maximize
//! `(1/t) Σ_i S_i(b_i)`. The dual variable `λ` prices the budget: each sample
//! solves `max_b S_i(b) − λb` by golden-section search, and `λ` is found by
//! bisection on `[0, lip]`. The worst-case distribution puts at most two atoms
//! per sample.

use std::collections::HashMap;

use serde::Serialize;

use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, Error, Result};
use crate::golden::{golden_max, Tie};
use crate::model::{AmbiguitySpec, LossAt, SampleBuffer};
use crate::oracle_pairs::{eval_s, PairSolution, ToleranceConfig};
use crate::vecops::norm;

/// Memoized `b ↦ S_i(b)` for one sample and a fixed decision.
pub struct UtilityFn<'a> {
    loss: LossAt<'a>,
    xi_hat: &'a [f64],
    tol: &'a ToleranceConfig,
    memo: HashMap<u64, (f64, PairSolution)>,
    evals: usize,
}

impl<'a> UtilityFn<'a> {
    pub fn new(loss: LossAt<'a>, xi_hat: &'a [f64], tol: &'a ToleranceConfig) -> Self {
        UtilityFn { loss, xi_hat, tol, memo: HashMap::new(), evals: 0 }
    }

    fn entry(&mut self, b: f64) -> Result<&(f64, PairSolution)> {
        let key = b.to_bits();
        if !self.memo.contains_key(&key) {
            self.evals += 1;
            let r = eval_s(&self.loss, self.xi_hat, b, self.tol)?;
            self.memo.insert(key, r);
        }
        Ok(&self.memo[&key])
    }

    pub fn value(&mut self, b: f64) -> Result<f64> {
        Ok(self.entry(b)?.0)
    }

    pub fn solution(&mut self, b: f64) -> Result<PairSolution> {
        Ok(self.entry(b)?.1.clone())
    }

    /// Number of distinct budgets evaluated so far.
    pub fn evals(&self) -> usize {
        self.evals
    }
}

/// Decoupled problem `max_{b ∈ [0, ρt]} S_i(b) − λb` on a memoized utility.
/// Returns the lower end of the final bracket.
fn solve_decoupled(u: &mut UtilityFn<'_>, lambda: f64, rho_t: f64, eta_b: f64) -> Result<f64> {
    if lambda >= u.loss.lip_xi() || rho_t <= 0.0 {
        return Ok(0.0);
    }
    let out = golden_max(|b| Ok::<_, Error>(u.value(b)? - lambda * b), 0.0, rho_t, eta_b, Tie::KeepLeft)?;
    Ok(out.lo)
}

/// Solves `max_{b ∈ [0, ρt]} S_i(b) − λb` for one sample.
pub fn solve_subproblem(
    loss: &LossAt<'_>,
    xi_hat: &[f64],
    lambda: f64,
    rho_t: f64,
    tol: &ToleranceConfig,
) -> Result<(f64, PairSolution)> {
    check_dim("sample", xi_hat.len(), loss.sample_dim())?;
    if !(lambda >= 0.0) {
        return Err(Error::input(format!("dual variable must be >= 0, got {lambda}")));
    }
    if !(rho_t >= 0.0 && rho_t.is_finite()) {
        return Err(Error::input(format!("total budget must be finite and >= 0, got {rho_t}")));
    }
    tol.validate()?;
    let mut u = UtilityFn::new(*loss, xi_hat, tol);
    let b = solve_decoupled(&mut u, lambda, rho_t, tol.eta_b(loss.lip_xi()))?;
    let sol = u.solution(b)?;
    Ok((b, sol))
}

/// Per-sample budgets and the pair solutions realizing them.
#[derive(Clone, Debug, Serialize)]
pub struct BudgetAllocation {
    pub budgets: Vec<f64>,
    /// Dual variable of the returned allocation.
    pub lambda: f64,
    pub pairs: Vec<PairSolution>,
    /// `(1/t) Σ_i Ŝ_i(b̂_i)`.
    pub objective: f64,
    pub bisection_steps: usize,
    /// True when the final allocation mixes the two bracketing dual solutions.
    pub blended: bool,
    pub eta_b: f64,
    pub eta_lambda: f64,
    pub lambda_lip_guess: f64,
    /// Smallest outer-search floor used by any sample.
    pub eta_out_min: f64,
    /// Distinct `S_i(b)` evaluations across all samples.
    pub utility_evals: usize,
}

impl BudgetAllocation {
    pub fn total(&self) -> f64 {
        self.budgets.iter().sum()
    }
}

struct Probe {
    budgets: Vec<f64>,
    total: f64,
}

fn probe(us: &mut [UtilityFn<'_>], lambda: f64, rho_t: f64, eta_b: f64) -> Result<Probe> {
    let budgets = us
        .iter_mut()
        .map(|u| solve_decoupled(u, lambda, rho_t, eta_b))
        .collect::<Result<Vec<_>>>()?;
    let total = budgets.iter().sum();
    Ok(Probe { budgets, total })
}

fn realize(us: &mut [UtilityFn<'_>], budgets: &[f64]) -> Result<(Vec<PairSolution>, f64)> {
    let pairs = us
        .iter_mut()
        .zip(budgets)
        .map(|(u, b)| u.solution(*b))
        .collect::<Result<Vec<_>>>()?;
    let objective = pairs.iter().map(|p| p.value).sum::<f64>() / budgets.len() as f64;
    Ok((pairs, objective))
}

/// Splits the budget `ρt` across the samples by dual bisection.
pub fn allocate_budget(
    loss: &LossAt<'_>,
    samples: &SampleBuffer,
    amb: &AmbiguitySpec,
    tol: &ToleranceConfig,
) -> Result<BudgetAllocation> {
    let t = samples.len();
    if t == 0 {
        return Err(Error::input("budget allocation needs at least one sample"));
    }
    check_dim("sample buffer", samples.dim(), loss.sample_dim())?;
    let lip = loss.lip_xi();
    let rho = amb.radius();
    tol.validate_for(lip, t, rho)?;
    let rho_t = rho * t as f64;
    let eta_b = tol.eta_b(lip);
    let eta_lambda = tol.eta_lambda(t, lip, rho);
    let max_norm = samples.iter().map(norm).fold(0.0, f64::max);

    let mut us: Vec<UtilityFn<'_>> = samples.iter().map(|xi| UtilityFn::new(*loss, xi, tol)).collect();
    let mut steps = 0;
    let mut blended = false;
    let zero = probe(&mut us, 0.0, rho_t, eta_b)?;
    let (lambda, budgets) = if zero.total <= rho_t {
        (0.0, zero.budgets)
    } else {
        let (mut lo, mut hi) = (0.0, lip);
        let mut lo_probe = zero;
        let mut hi_probe: Option<Probe> = None;
        while hi - lo > eta_lambda {
            steps += 1;
            let mid = 0.5 * (lo + hi);
            let p = probe(&mut us, mid, rho_t, eta_b)?;
            if p.total > rho_t {
                lo = mid;
                lo_probe = p;
            } else {
                hi = mid;
                hi_probe = Some(p);
            }
        }
        let hi_probe = match hi_probe {
            Some(p) => p,
            None => probe(&mut us, lip, rho_t, eta_b)?,
        };
        // Where the dual is flat the bracketing allocations jump across the
        // budget line; mixing them uses the leftover budget.
        let slack = rho_t - hi_probe.total;
        if slack > 0.0 && lo_probe.total > rho_t {
            let theta = slack / (lo_probe.total - hi_probe.total);
            let mixed: Vec<f64> = lo_probe
                .budgets
                .iter()
                .zip(&hi_probe.budgets)
                .map(|(a, b)| (theta * a + (1.0 - theta) * b).max(0.0))
                .collect();
            let (_, obj_hi) = realize(&mut us, &hi_probe.budgets)?;
            let (_, obj_mix) = realize(&mut us, &mixed)?;
            if obj_mix > obj_hi {
                blended = true;
                (hi, mixed)
            } else {
                (hi, hi_probe.budgets)
            }
        } else {
            (hi, hi_probe.budgets)
        }
    };

    let (pairs, objective) = realize(&mut us, &budgets)?;
    let utility_evals = us.iter().map(|u| u.evals()).sum();
    Ok(BudgetAllocation {
        budgets,
        lambda,
        pairs,
        objective,
        bisection_steps: steps,
        blended,
        eta_b,
        eta_lambda,
        lambda_lip_guess: tol.lambda_lip_guess(t, lip, rho),
        eta_out_min: tol.eta_out(lip, max_norm, rho_t),
        utility_evals,
    })
}

/// Builds the worst-case distribution from an allocation: each sample keeps
/// mass `1/t`, split over at most two displaced atoms.
pub fn assemble_worst_case(
    samples: &SampleBuffer,
    allocation: &BudgetAllocation,
    eps_alpha: f64,
) -> Result<DiscreteDistribution> {
    let t = samples.len();
    if allocation.pairs.len() != t {
        return Err(Error::Internal(format!(
            "allocation holds {} pair solutions for {t} samples",
            allocation.pairs.len()
        )));
    }
    let m = samples.dim();
    let mut atoms = Vec::with_capacity(2 * t * m);
    let mut weights = Vec::with_capacity(2 * t);
    for (xi, pair) in samples.iter().zip(&allocation.pairs) {
        if pair.q1.len() != m || pair.q2.len() != m {
            return Err(Error::Internal("pair solution has the wrong dimension".into()));
        }
        for (atom, w) in pair.atoms(xi, eps_alpha) {
            atoms.extend_from_slice(&atom);
            weights.push(w / t as f64);
        }
    }
    DiscreteDistribution::new(m, atoms, weights)
}

/// Result of one worst-case expectation solve.
#[derive(Clone, Debug)]
pub struct OracleOutput {
    pub distribution: DiscreteDistribution,
    /// `E_Q[ℓ(x, ·)]` under the returned distribution.
    pub value: f64,
    pub allocation: BudgetAllocation,
}

impl OracleOutput {
    /// Transport cost of the implied coupling with the empirical measure.
    pub fn transport_cost(&self) -> f64 {
        let t = self.allocation.pairs.len() as f64;
        self.allocation.pairs.iter().map(|p| p.transport()).sum::<f64>() / t
    }
}

/// `δ`-accurate worst-case expectation of `ℓ(x, ·)` over the 1-Wasserstein
/// ball of radius `ρ` around the empirical measure of `samples`.
pub fn wasserstein_oracle(
    loss: &LossAt<'_>,
    samples: &SampleBuffer,
    amb: &AmbiguitySpec,
    tol: &ToleranceConfig,
) -> Result<OracleOutput> {
    if amb.radius() > 0.0 && !loss.model.growth_bounded() {
        return Err(Error::input(
            "the loss grows without bound in the sample; the worst case over a ball of positive radius is not attained",
        ));
    }
    let allocation = allocate_budget(loss, samples, amb, tol)?;
    let distribution = assemble_worst_case(samples, &allocation, tol.eps_alpha)?;
    let value = distribution.expectation(|xi| loss.value(xi));
    Ok(OracleOutput { distribution, value, allocation })
}
