//! ε-accurate maximization of the perspective objective
//! `q ↦ α·ℓ_k(ξ̂ − q/α)` over the ball `‖q‖ ≤ β`.
//!
//! Substituting `v = q/α` turns this into maximizing the concave function
//! `v ↦ ℓ_k(ξ̂ − v)` over `‖v‖ ≤ β/α`, scaled by `α`. Three routes exist:
//!
//! * closed form, for pieces implementing [`LossPiece::ball_argmax`];
//! * projected supergradient ascent with the fixed step `β/(αγ√N)` and
//!   `N = ⌈(βγ/ε)²⌉` iterations, for nonsmooth pieces;
//! * projected gradient ascent with backtracking for smooth pieces, stopped
//!   once the concavity (Frank–Wolfe) gap certifies `ε` accuracy.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossPiece, Smoothness};
use crate::vecops::{clamp_to_ball, dot, norm};

/// Iteration ceiling for the nonsmooth schedule; beyond this the requested
/// accuracy is considered unreachable.
pub const MAX_SUBGRADIENT_ITERS: u64 = 200_000_000;
const MAX_SMOOTH_ITERS: usize = 1_000_000;

/// Which inner solver to use.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerMethod {
    /// Closed form when the piece provides one, iterative otherwise.
    #[default]
    Auto,
    /// Always use the iterative ascent methods.
    Iterative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerSolution {
    pub q_star: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn validate(alpha: f64, beta: f64, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::input(format!("accuracy must be positive, got {eps}")));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::input(format!("ball radius must be >= 0, got {beta}")));
    }
    if !(alpha > 0.0 && alpha <= 1.0 + 1e-12) {
        return Err(Error::input(format!("weight must lie in (0, 1], got {alpha}")));
    }
    Ok(())
}

/// Maximizes `α·ℓ_k(x, ξ̂ − q/α)` over `‖q‖ ≤ β` to accuracy `eps`.
pub fn perspective_max(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    beta: f64,
    eps: f64,
    method: InnerMethod,
) -> Result<InnerSolution> {
    perspective_max_warm(piece, x, xi_hat, alpha, beta, eps, method, None)
}

/// As [`perspective_max`], optionally seeding the smooth ascent at `warm_v`
/// (a point in the substituted `v = q/α` coordinates).
#[allow(clippy::too_many_arguments)]
pub fn perspective_max_warm(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    beta: f64,
    eps: f64,
    method: InnerMethod,
    warm_v: Option<&[f64]>,
) -> Result<InnerSolution> {
    validate(alpha, beta, eps)?;
    let radius = beta / alpha;
    let (v, iterations) = solve_v(piece, x, xi_hat, alpha, radius, eps, method, warm_v)?;
    let mut q: Vec<f64> = v.iter().map(|vi| alpha * vi).collect();
    clamp_to_ball(&mut q, beta);
    let xi: Vec<f64> = xi_hat.iter().zip(&q).map(|(a, qi)| a - qi / alpha).collect();
    let value = alpha * piece.value(x, &xi);
    Ok(InnerSolution { q_star: q, value, iterations })
}

/// Value-only fast path used inside the nested searches. `warm` carries the
/// previous maximizer between consecutive calls on the same piece.
#[allow(clippy::too_many_arguments)]
pub(crate) fn perspective_value(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    beta: f64,
    eps: f64,
    method: InnerMethod,
    warm: &mut Vec<f64>,
) -> Result<f64> {
    let radius = beta / alpha;
    if method == InnerMethod::Auto {
        if let Some(v) = piece.ball_max_value(x, xi_hat, radius) {
            return Ok(alpha * v);
        }
    }
    validate(alpha, beta, eps)?;
    let seed = if warm.len() == xi_hat.len() { Some(warm.as_slice()) } else { None };
    let (v, _) = solve_v(piece, x, xi_hat, alpha, radius, eps, method, seed)?;
    let xi: Vec<f64> = xi_hat.iter().zip(&v).map(|(a, b)| a - b).collect();
    let value = alpha * piece.value(x, &xi);
    *warm = v;
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn solve_v(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    radius: f64,
    eps: f64,
    method: InnerMethod,
    warm_v: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let m = xi_hat.len();
    if method == InnerMethod::Auto {
        let mut xi_star = vec![0.0; m];
        if piece.ball_argmax(x, xi_hat, radius, &mut xi_star).is_some() {
            let mut v: Vec<f64> = xi_hat.iter().zip(&xi_star).map(|(a, b)| a - b).collect();
            clamp_to_ball(&mut v, radius);
            return Ok((v, 0));
        }
    }
    if radius == 0.0 || piece.lip_xi() == 0.0 {
        return Ok((vec![0.0; m], 0));
    }
    match piece.smoothness() {
        Smoothness::Nonsmooth => supergradient_ascent(piece, x, xi_hat, alpha, radius, eps),
        Smoothness::Smooth => gradient_ascent(piece, x, xi_hat, alpha, radius, eps, warm_v),
    }
}

/// `g(v) = ℓ_k(x, ξ̂ − v)`; `grad` receives `∇g(v) = −∇_ξ ℓ_k`.
struct Shifted<'a> {
    piece: &'a dyn LossPiece,
    x: &'a [f64],
    xi_hat: &'a [f64],
    xi: Vec<f64>,
}

impl<'a> Shifted<'a> {
    fn new(piece: &'a dyn LossPiece, x: &'a [f64], xi_hat: &'a [f64]) -> Self {
        Shifted { piece, x, xi_hat, xi: vec![0.0; xi_hat.len()] }
    }

    fn set(&mut self, v: &[f64]) {
        for ((o, a), b) in self.xi.iter_mut().zip(self.xi_hat).zip(v) {
            *o = a - b;
        }
    }

    fn value(&mut self, v: &[f64]) -> f64 {
        self.set(v);
        self.piece.value(self.x, &self.xi)
    }

    fn grad(&mut self, v: &[f64], out: &mut [f64]) {
        self.set(v);
        self.piece.supergrad_xi(self.x, &self.xi, out);
        out.iter_mut().for_each(|g| *g = -*g);
    }
}

fn supergradient_ascent(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    radius: f64,
    eps: f64,
) -> Result<(Vec<f64>, usize)> {
    let gamma = piece.lip_xi();
    let beta = alpha * radius;
    let n = ((beta * gamma / eps).powi(2)).ceil().max(1.0);
    if n > MAX_SUBGRADIENT_ITERS as f64 {
        return Err(Error::Numeric(format!(
            "supergradient schedule needs {n:.3e} iterations (beta={beta}, gamma={gamma}, eps={eps})"
        )));
    }
    let n = n as usize;
    let step = radius / (gamma * (n as f64).sqrt());
    let m = xi_hat.len();
    let mut f = Shifted::new(piece, x, xi_hat);
    let mut v = vec![0.0; m];
    let mut g = vec![0.0; m];
    let mut best_v = v.clone();
    let mut best = f.value(&v);
    for _ in 0..n {
        f.grad(&v, &mut g);
        for (vi, gi) in v.iter_mut().zip(&g) {
            *vi += step * gi;
        }
        clamp_to_ball(&mut v, radius);
        let val = f.value(&v);
        if val > best {
            best = val;
            best_v.copy_from_slice(&v);
        }
    }
    Ok((best_v, n))
}

fn gradient_ascent(
    piece: &dyn LossPiece,
    x: &[f64],
    xi_hat: &[f64],
    alpha: f64,
    radius: f64,
    eps: f64,
    warm_v: Option<&[f64]>,
) -> Result<(Vec<f64>, usize)> {
    let m = xi_hat.len();
    let mut f = Shifted::new(piece, x, xi_hat);
    let mut v = match warm_v {
        Some(w) if w.len() == m => w.to_vec(),
        _ => vec![0.0; m],
    };
    clamp_to_ball(&mut v, radius);
    let mut g = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut fv = f.value(&v);
    let mut step = 1.0 / piece.lip_xi().max(1e-12);
    for it in 0..MAX_SMOOTH_ITERS {
        f.grad(&v, &mut g);
        // Linear maximization over the ball bounds the suboptimality of a concave g.
        let gap = radius * norm(&g) - dot(&g, &v);
        if alpha * gap <= eps {
            return Ok((v, it));
        }
        loop {
            for ((t, vi), gi) in trial.iter_mut().zip(&v).zip(&g) {
                *t = vi + step * gi;
            }
            clamp_to_ball(&mut trial, radius);
            let ft = f.value(&trial);
            let mut lin = 0.0;
            let mut sq = 0.0;
            for ((t, vi), gi) in trial.iter().zip(&v).zip(&g) {
                lin += gi * (t - vi);
                sq += (t - vi) * (t - vi);
            }
            if ft >= fv + lin - sq / (2.0 * step) || step < 1e-300 {
                v.copy_from_slice(&trial);
                fv = ft;
                break;
            }
            step *= 0.5;
        }
        step *= 2.0;
    }
    Err(Error::Numeric(format!(
        "gradient ascent did not certify accuracy {eps} within {MAX_SMOOTH_ITERS} iterations"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DecisionTerm, SampleTerm, SeparablePiece};

    fn piece(sample: SampleTerm) -> SeparablePiece {
        SeparablePiece::new(DecisionTerm::Affine { slope: vec![0.0], offset: 0.0 }, sample).unwrap()
    }

    /// Hides the closed form so the iterative solvers are exercised.
    #[derive(Debug)]
    struct Opaque(SeparablePiece);

    impl LossPiece for Opaque {
        fn decision_dim(&self) -> usize {
            self.0.decision_dim()
        }
        fn sample_dim(&self) -> usize {
            self.0.sample_dim()
        }
        fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
            self.0.value(x, xi)
        }
        fn subgrad_x(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
            self.0.subgrad_x(x, xi, out)
        }
        fn supergrad_xi(&self, x: &[f64], xi: &[f64], out: &mut [f64]) {
            self.0.supergrad_xi(x, xi, out)
        }
        fn lip_x(&self) -> f64 {
            self.0.lip_x()
        }
        fn lip_xi(&self) -> f64 {
            self.0.lip_xi()
        }
        fn smoothness(&self) -> Smoothness {
            self.0.smoothness()
        }
        fn bounded_above(&self) -> bool {
            true
        }
    }

    fn cone(height: f64, slope: f64, c: f64) -> SampleTerm {
        SampleTerm::Cone { height, slope, center: vec![c] }
    }

    fn both_methods(p: &SeparablePiece, xi: f64, alpha: f64, beta: f64, eps: f64) -> [InnerSolution; 2] {
        let opaque = Opaque(p.clone());
        [
            perspective_max(p, &[0.0], &[xi], alpha, beta, eps, InnerMethod::Auto).unwrap(),
            perspective_max(&opaque, &[0.0], &[xi], alpha, beta, eps, InnerMethod::Auto).unwrap(),
        ]
    }

    #[test]
    fn peak_at_origin_needs_no_transport() {
        for sol in both_methods(&piece(cone(0.0, 1.0, 0.0)), 0.0, 1.0, 2.0, 1e-3) {
            assert!(sol.value.abs() <= 1e-3);
            assert!(sol.q_star[0].abs() <= 1e-3);
        }
    }

    #[test]
    fn boundary_maximizer_with_half_weight() {
        for sol in both_methods(&piece(cone(1.0, 1.0, 3.0)), 0.0, 0.5, 0.5, 1e-3) {
            assert!((sol.value + 0.5).abs() <= 1e-3, "{sol:?}");
            assert!((sol.q_star[0] + 0.5).abs() <= 1e-3);
        }
    }

    #[test]
    fn smooth_piece_reaches_global_peak() {
        let p = piece(SampleTerm::Hyperbolic { height: 0.0, slope: 1.0, center: vec![0.0] });
        for sol in both_methods(&p, 2.0, 1.0, 2.0, 1e-6) {
            assert!((sol.value + 1.0).abs() <= 1e-6, "{sol:?}");
            assert!((sol.q_star[0] - 2.0).abs() <= 2e-3);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = piece(cone(0.0, 1.0, 0.0));
        assert!(perspective_max(&p, &[0.0], &[0.0], 1.0, 1.0, 0.0, InnerMethod::Auto).is_err());
        assert!(perspective_max(&p, &[0.0], &[0.0], 1.0, -1.0, 1e-3, InnerMethod::Auto).is_err());
        assert!(perspective_max(&p, &[0.0], &[0.0], 0.0, 1.0, 1e-3, InnerMethod::Auto).is_err());
    }

    #[test]
    fn iterative_matches_dense_grid_in_two_dims() {
        let p = SeparablePiece::new(
            DecisionTerm::Affine { slope: vec![0.0], offset: 0.0 },
            SampleTerm::Cone { height: 0.5, slope: 1.5, center: vec![1.0, -2.0] },
        )
        .unwrap();
        let opaque = Opaque(p.clone());
        let (alpha, beta, eps) = (0.4, 0.6, 2e-3);
        let it = perspective_max(&opaque, &[0.0], &[0.2, 0.3], alpha, beta, eps, InnerMethod::Iterative).unwrap();
        let exact = perspective_max(&p, &[0.0], &[0.2, 0.3], alpha, beta, eps, InnerMethod::Auto).unwrap();
        assert!(it.iterations > 0);
        assert!(norm(&it.q_star) <= beta + 1e-12);
        assert!(it.value >= exact.value - eps, "{} vs {}", it.value, exact.value);
        assert!(it.value <= exact.value + 1e-12);
    }
}
