//! Per-sample utility `S_i(b)`: the largest expected loss a single sample can
//! reach when its mass may be split across two loss pieces and moved by a
//! total distance `b`.
//!
//! For a pair `(k1, k2)` the objective is
//! `Ψ(α₁, β₁) = max_q α₁ℓ_{k1}(ξ̂ − q₁/α₁) + α₂ℓ_{k2}(ξ̂ − q₂/α₂)` with
//! `α₂ = 1 − α₁`, `β₂ = b − β₁` and `‖q_j‖ ≤ β_j`. It is maximized by a nested
//! golden-section search (outer over `α₁`, inner over `β₁`) after the two
//! endpoints `α₁ ∈ {0, 1}` have been solved exactly as single-piece problems.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::golden::{golden_max, Tie};
use crate::inner_max::{perspective_max, perspective_value, InnerMethod};
use crate::model::LossAt;
use crate::vecops::norm;

fn default_eps_alpha() -> f64 {
    1e-8
}

fn default_eta_out_cap() -> f64 {
    1e-4
}

/// Accuracy knobs of the worst-case oracle.
///
/// Only `delta` is required. The interval floors default to the largest values
/// allowed by their couplings to `delta` and the loss's Lipschitz constant;
/// explicit overrides may only tighten them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Target accuracy `δ` of the oracle value.
    pub delta: f64,
    /// Mixture weights below this are treated as the degenerate endpoint.
    #[serde(default = "default_eps_alpha")]
    pub eps_alpha: f64,
    /// Upper cap on the outer (mixture weight) search floor.
    #[serde(default = "default_eta_out_cap")]
    pub eta_out_cap: f64,
    #[serde(default)]
    pub inner: InnerMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_in: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta_lambda: Option<f64>,
}

impl ToleranceConfig {
    pub fn new(delta: f64) -> Self {
        ToleranceConfig {
            delta,
            eps_alpha: default_eps_alpha(),
            eta_out_cap: default_eta_out_cap(),
            inner: InnerMethod::Auto,
            eta_in: None,
            eta_b: None,
            eta_lambda: None,
        }
    }

    pub fn with_inner(mut self, inner: InnerMethod) -> Self {
        self.inner = inner;
        self
    }

    /// `δ_eval = δ/2`.
    pub fn delta_eval(&self) -> f64 {
        self.delta / 2.0
    }

    fn coupled(&self, lip: f64) -> f64 {
        if lip > 0.0 {
            self.delta_eval() / lip
        } else {
            f64::INFINITY
        }
    }

    /// Floor of the inner search over `β₁`.
    pub fn eta_in(&self, lip: f64) -> f64 {
        self.eta_in.unwrap_or_else(|| self.coupled(lip))
    }

    /// Floor of the per-sample search over the budget `b`.
    pub fn eta_b(&self, lip: f64) -> f64 {
        self.eta_b.unwrap_or_else(|| self.coupled(lip))
    }

    /// Floor of the outer search over `α₁`: `min(2δ_eval/L, cap)` with the
    /// local Lipschitz guess `L = lip·(1 + ‖ξ̂‖ + b)`.
    pub fn eta_out(&self, lip: f64, xi_norm: f64, b: f64) -> f64 {
        let l_guess = lip * (1.0 + xi_norm + b);
        if l_guess > 0.0 {
            (2.0 * self.delta_eval() / l_guess).min(self.eta_out_cap)
        } else {
            self.eta_out_cap
        }
    }

    /// Dual sensitivity guess `t·lip/ρ` used to size the bisection floor.
    pub fn lambda_lip_guess(&self, t: usize, lip: f64, rho: f64) -> f64 {
        if rho > 0.0 {
            t as f64 * lip / rho
        } else {
            f64::INFINITY
        }
    }

    /// Floor of the dual bisection.
    pub fn eta_lambda(&self, t: usize, lip: f64, rho: f64) -> f64 {
        if let Some(v) = self.eta_lambda {
            return v;
        }
        let guess = self.lambda_lip_guess(t, lip, rho);
        let eta_b = self.eta_b(lip);
        if guess.is_finite() && guess > 0.0 && eta_b.is_finite() {
            eta_b / guess
        } else {
            // Degenerate (zero radius or constant loss): bisection never runs.
            eta_b.min(1.0)
        }
    }

    /// Checks the fields that do not depend on the instance.
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("tolerance.delta must be positive, got {}", self.delta)));
        }
        if !(self.eps_alpha > 0.0 && self.eps_alpha < 0.5) {
            return Err(Error::Config(format!("tolerance.eps_alpha must lie in (0, 0.5), got {}", self.eps_alpha)));
        }
        if !(self.eta_out_cap > 0.0 && self.eta_out_cap.is_finite()) {
            return Err(Error::Config("tolerance.eta_out_cap must be positive".into()));
        }
        for (name, v) in [("eta_in", self.eta_in), ("eta_b", self.eta_b), ("eta_lambda", self.eta_lambda)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::Config(format!("tolerance.{name} must be positive, got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Checks the couplings `η_in, η_b ≤ δ_eval/lip` and `η_λ ≤ η_b/(t·lip/ρ)`.
    pub fn validate_for(&self, lip: f64, t: usize, rho: f64) -> Result<()> {
        self.validate()?;
        let cap = self.coupled(lip) * (1.0 + 1e-12);
        if let Some(v) = self.eta_in {
            if v > cap {
                return Err(Error::Config(format!("tolerance.eta_in = {v} exceeds delta_eval/lip = {cap}")));
            }
        }
        if let Some(v) = self.eta_b {
            if v > cap {
                return Err(Error::Config(format!("tolerance.eta_b = {v} exceeds delta_eval/lip = {cap}")));
            }
        }
        if let Some(v) = self.eta_lambda {
            let guess = self.lambda_lip_guess(t, lip, rho);
            let bound = self.eta_b(lip) / guess * (1.0 + 1e-12);
            if guess.is_finite() && v > bound {
                return Err(Error::Config(format!("tolerance.eta_lambda = {v} exceeds eta_b/(t*lip/rho) = {bound}")));
            }
        }
        Ok(())
    }
}

/// Maximizer of one pair subproblem. `k1 == k2` marks a single-piece solution
/// (all mass on `k1`, `alpha = [1, 0]`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairSolution {
    pub k1: usize,
    pub k2: usize,
    pub alpha: [f64; 2],
    pub beta: [f64; 2],
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub value: f64,
}

impl PairSolution {
    fn single(k: usize, m: usize, b: f64, q: Vec<f64>, value: f64) -> Self {
        PairSolution { k1: k, k2: k, alpha: [1.0, 0.0], beta: [b, 0.0], q1: q, q2: vec![0.0; m], value }
    }

    /// Swaps the roles of the two components so that `(k1, k2)` is ordered.
    fn endpoint(k1: usize, k2: usize, first_active: bool, m: usize, b: f64, q: Vec<f64>, value: f64) -> Self {
        if first_active {
            PairSolution { k1, k2, alpha: [1.0, 0.0], beta: [b, 0.0], q1: q, q2: vec![0.0; m], value }
        } else {
            PairSolution { k1, k2, alpha: [0.0, 1.0], beta: [0.0, b], q1: vec![0.0; m], q2: q, value }
        }
    }

    /// Atoms `ξ̂ − q_j/α_j` with weights `α_j` for components above `eps_alpha`.
    pub fn atoms(&self, xi_hat: &[f64], eps_alpha: f64) -> Vec<(Vec<f64>, f64)> {
        let mut out = Vec::with_capacity(2);
        for (a, q) in [(self.alpha[0], &self.q1), (self.alpha[1], &self.q2)] {
            if a >= eps_alpha {
                out.push((xi_hat.iter().zip(q).map(|(x, qi)| x - qi / a).collect(), a));
            }
        }
        // Reassign the mass of pruned components to the surviving one.
        let total: f64 = out.iter().map(|(_, w)| w).sum();
        if out.len() == 1 {
            out[0].1 = 1.0;
        } else if out.is_empty() {
            out.push((xi_hat.to_vec(), 1.0));
        } else if total != 1.0 {
            out.iter_mut().for_each(|(_, w)| *w /= total);
        }
        out
    }

    /// Transport cost `Σ_j ‖q_j‖` of this sample.
    pub fn transport(&self) -> f64 {
        norm(&self.q1) + norm(&self.q2)
    }
}

fn check_budget(b: f64) -> Result<()> {
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::input(format!("budget must be finite and >= 0, got {b}")));
    }
    Ok(())
}

/// Exact single-piece problem `max_{‖q‖≤b} ℓ_k(ξ̂ − q)`.
fn single_piece(loss: &LossAt<'_>, xi_hat: &[f64], k: usize, b: f64, tol: &ToleranceConfig) -> Result<(Vec<f64>, f64)> {
    if b == 0.0 {
        return Ok((vec![0.0; xi_hat.len()], loss.piece_value(k, xi_hat)));
    }
    let s = perspective_max(loss.piece(k), loss.x, xi_hat, 1.0, b, tol.delta_eval(), tol.inner)?;
    Ok((s.q_star, s.value))
}

/// Outer golden search over `α₁ ∈ [ε_α, 1 − ε_α]`, inner over `β₁ ∈ [0, b]`.
/// Returns the best `(value, α₁, β₁)` probed anywhere in the nest.
fn nested_search(
    mut psi: impl FnMut(f64, f64) -> Result<f64>,
    b: f64,
    eta_in: f64,
    eta_out: f64,
    eps_alpha: f64,
) -> Result<(f64, f64, f64)> {
    let mut best = (f64::NEG_INFINITY, 0.5, 0.5 * b);
    let outer = |a1: f64| -> Result<f64> {
        let inner = golden_max(|b1| psi(a1, b1), 0.0, b, eta_in, Tie::KeepRight)?;
        if inner.best_value > best.0 {
            best = (inner.best_value, a1, inner.best_arg);
        }
        Ok(inner.best_value)
    };
    golden_max(outer, eps_alpha, 1.0 - eps_alpha, eta_out, Tie::KeepRight)?;
    Ok(best)
}

/// Largest value any mixture of the two pieces can reach, when known.
fn pair_sup(loss: &LossAt<'_>, xi_hat: &[f64], k1: usize, k2: usize) -> Option<f64> {
    let s1 = loss.piece(k1).ball_profile(loss.x, xi_hat)?.sup();
    let s2 = loss.piece(k2).ball_profile(loss.x, xi_hat)?.sup();
    Some(s1.max(s2))
}

/// Interior part of the pair problem.
fn pair_interior(
    loss: &LossAt<'_>,
    xi_hat: &[f64],
    k1: usize,
    k2: usize,
    b: f64,
    tol: &ToleranceConfig,
) -> Result<PairSolution> {
    let lip = loss.lip_xi();
    let eps = tol.delta_eval() / 2.0;
    let eta_in = tol.eta_in(lip);
    let eta_out = tol.eta_out(lip, norm(xi_hat), b);
    let (p1, p2) = (loss.piece(k1), loss.piece(k2));
    let x = loss.x;

    let profiles = match tol.inner {
        InnerMethod::Auto => p1.ball_profile(x, xi_hat).zip(p2.ball_profile(x, xi_hat)),
        InnerMethod::Iterative => None,
    };
    let (_, a1, b1) = match profiles {
        Some((pr1, pr2)) => nested_search(
            |a1, b1| {
                let a2 = 1.0 - a1;
                Ok(a1 * pr1.value(b1 / a1) + a2 * pr2.value((b - b1).max(0.0) / a2))
            },
            b,
            eta_in,
            eta_out,
            tol.eps_alpha,
        )?,
        None => {
            let mut warm1 = Vec::new();
            let mut warm2 = Vec::new();
            nested_search(
                |a1, b1| {
                    let v1 = perspective_value(p1, x, xi_hat, a1, b1, eps, tol.inner, &mut warm1)?;
                    let v2 = perspective_value(p2, x, xi_hat, 1.0 - a1, (b - b1).max(0.0), eps, tol.inner, &mut warm2)?;
                    Ok(v1 + v2)
                },
                b,
                eta_in,
                eta_out,
                tol.eps_alpha,
            )?
        }
    };

    let s1 = perspective_max(p1, x, xi_hat, a1, b1, eps, tol.inner)?;
    let s2 = perspective_max(p2, x, xi_hat, 1.0 - a1, (b - b1).max(0.0), eps, tol.inner)?;
    Ok(PairSolution {
        k1,
        k2,
        alpha: [a1, 1.0 - a1],
        beta: [b1, b - b1],
        value: s1.value + s2.value,
        q1: s1.q_star,
        q2: s2.q_star,
    })
}

/// Best of the two endpoints and the interior search. The interior search is
/// skipped when an endpoint already attains the supremum of both pieces, since
/// no mixture can then do strictly better.
#[allow(clippy::too_many_arguments)]
fn solve_pair(
    loss: &LossAt<'_>,
    xi_hat: &[f64],
    k1: usize,
    k2: usize,
    b: f64,
    tol: &ToleranceConfig,
    e1: (Vec<f64>, f64),
    e2: (Vec<f64>, f64),
) -> Result<PairSolution> {
    let m = xi_hat.len();
    let mut best = PairSolution::endpoint(k1, k2, true, m, b, e1.0, e1.1);
    if e2.1 > best.value {
        best = PairSolution::endpoint(k1, k2, false, m, b, e2.0, e2.1);
    }
    if tol.inner == InnerMethod::Auto && pair_sup(loss, xi_hat, k1, k2).is_some_and(|s| best.value >= s) {
        return Ok(best);
    }
    let interior = pair_interior(loss, xi_hat, k1, k2, b, tol)?;
    if interior.value > best.value {
        best = interior;
    }
    Ok(best)
}

/// Evaluates the pair subfunction `S_i^{(k1,k2)}(b)` at the sample `xi_hat`.
pub fn eval_pair(
    loss: &LossAt<'_>,
    xi_hat: &[f64],
    k1: usize,
    k2: usize,
    b: f64,
    tol: &ToleranceConfig,
) -> Result<PairSolution> {
    check_dim("sample", xi_hat.len(), loss.sample_dim())?;
    check_budget(b)?;
    if !(k1 < k2 && k2 < loss.num_pieces()) {
        return Err(Error::input(format!(
            "pair ({k1}, {k2}) must satisfy k1 < k2 < {}",
            loss.num_pieces()
        )));
    }
    let m = xi_hat.len();
    if b == 0.0 {
        let (v1, v2) = (loss.piece_value(k1, xi_hat), loss.piece_value(k2, xi_hat));
        return Ok(PairSolution::endpoint(k1, k2, v1 >= v2, m, 0.0, vec![0.0; m], v1.max(v2)));
    }
    let e1 = single_piece(loss, xi_hat, k1, b, tol)?;
    let e2 = single_piece(loss, xi_hat, k2, b, tol)?;
    solve_pair(loss, xi_hat, k1, k2, b, tol, e1, e2)
}

/// `S_i(b)`: the maximum of all pair subfunctions, with the lexicographically
/// smallest pair kept on ties. A one-piece loss reduces to the single-piece
/// problem.
pub fn eval_s(loss: &LossAt<'_>, xi_hat: &[f64], b: f64, tol: &ToleranceConfig) -> Result<(f64, PairSolution)> {
    check_dim("sample", xi_hat.len(), loss.sample_dim())?;
    check_budget(b)?;
    let m = xi_hat.len();
    let kk = loss.num_pieces();
    if b == 0.0 {
        let (v, k) = loss.model.eval_unchecked(loss.x, xi_hat);
        return Ok((v, PairSolution::single(k, m, 0.0, vec![0.0; m], v)));
    }
    let singles = (0..kk)
        .map(|k| single_piece(loss, xi_hat, k, b, tol))
        .collect::<Result<Vec<_>>>()?;
    if kk == 1 {
        let (q, v) = singles.into_iter().next().expect("one piece");
        return Ok((v, PairSolution::single(0, m, b, q, v)));
    }
    let mut best: Option<PairSolution> = None;
    for k1 in 0..kk {
        for k2 in k1 + 1..kk {
            let sol = solve_pair(loss, xi_hat, k1, k2, b, tol, singles[k1].clone(), singles[k2].clone())?;
            if best.as_ref().is_none_or(|cur| sol.value > cur.value) {
                best = Some(sol);
            }
        }
    }
    let best = best.expect("at least one pair");
    Ok((best.value, best))
}
