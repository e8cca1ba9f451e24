//! Problem data: decision space, ambiguity radius, sample buffer and the
//! piecewise concave loss `ℓ(x, ξ) = max_k ℓ_k(x, ξ)`.
//!
//! Each piece `ℓ_k` is convex in the decision `x` and concave in the sample
//! `ξ`. The shipped reference family is separable, `ℓ_k(x, ξ) = u_k(x) + w_k(ξ)`,
//! with `u_k` affine or an absolute deviation and `w_k` a radially decreasing
//! peak that is bounded above. Other families implement [`LossPiece`].

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, Error, Result};
use crate::vecops::{dist, dot, norm};

/// Whether a piece is differentiable in `ξ`; selects the iterative inner solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Smoothness {
    Smooth,
    Nonsmooth,
}

/// One concave piece `ℓ_k` of a piecewise loss.
pub trait LossPiece: fmt::Debug + Send + Sync {
    fn decision_dim(&self) -> usize;
    fn sample_dim(&self) -> usize;
    fn value(&self, x: &[f64], xi: &[f64]) -> f64;
    /// Minimal-norm element of the subdifferential in `x`.
    fn subgrad_x(&self, x: &[f64], xi: &[f64], out: &mut [f64]);
    /// An element of the superdifferential in `ξ` (the gradient where smooth).
    fn supergrad_xi(&self, x: &[f64], xi: &[f64], out: &mut [f64]);
    /// Lipschitz constant in `x`.
    fn lip_x(&self) -> f64;
    /// Lipschitz constant in `ξ` (the per-piece `γ_k`).
    fn lip_xi(&self) -> f64;
    fn smoothness(&self) -> Smoothness;
    /// True when `sup_ξ ℓ_k(x, ξ)` is finite for every `x`.
    fn bounded_above(&self) -> bool;

    /// Exact maximizer of `ℓ_k(x, ·)` over the closed ball `B(center, radius)`,
    /// written to `out`, together with the maximal value. Pieces without a
    /// closed form return `None` and are handled by the iterative solvers.
    fn ball_argmax(&self, _x: &[f64], _center: &[f64], _radius: f64, _out: &mut [f64]) -> Option<f64> {
        None
    }

    /// Value-only variant of [`LossPiece::ball_argmax`].
    fn ball_max_value(&self, x: &[f64], center: &[f64], radius: f64) -> Option<f64> {
        if let Some(p) = self.ball_profile(x, center) {
            return Some(p.value(radius));
        }
        let mut buf = vec![0.0; center.len()];
        self.ball_argmax(x, center, radius, &mut buf)
    }

    /// The map `r ↦ max_{‖ξ − center‖ ≤ r} ℓ_k(x, ξ)` in closed form, if known.
    fn ball_profile(&self, _x: &[f64], _center: &[f64]) -> Option<BallProfile> {
        None
    }
}

/// Maximal value of a piece over a ball of radius `r` around a fixed center,
/// as a function of `r`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BallProfile {
    /// `top − slope·φ(max(dist − r, 0))` with `φ(g) = g`, or `φ(g) = √(1 + g²)`
    /// when `smooth`.
    Peak { top: f64, slope: f64, dist: f64, smooth: bool },
    /// `at_center + grad_norm·r`.
    Linear { at_center: f64, grad_norm: f64 },
}

impl BallProfile {
    #[inline]
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            BallProfile::Peak { top, slope, dist, smooth } => {
                let gap = (dist - r).max(0.0);
                if smooth {
                    top - slope * (1.0 + gap * gap).sqrt()
                } else {
                    top - slope * gap
                }
            }
            BallProfile::Linear { at_center, grad_norm } => at_center + grad_norm * r,
        }
    }

    /// `sup_r value(r)`.
    pub fn sup(&self) -> f64 {
        match *self {
            BallProfile::Peak { top, slope, smooth, .. } => {
                if smooth {
                    top - slope
                } else {
                    top
                }
            }
            BallProfile::Linear { at_center, grad_norm } => {
                if grad_norm == 0.0 {
                    at_center
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Decision-dependent part `u_k(x)` of a separable piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionTerm {
    /// `slope · x + offset`
    Affine { slope: Vec<f64>, offset: f64 },
    /// `scale · ‖x − center‖`
    AbsDeviation { scale: f64, center: Vec<f64> },
}

impl DecisionTerm {
    fn dim(&self) -> usize {
        match self {
            DecisionTerm::Affine { slope, .. } => slope.len(),
            DecisionTerm::AbsDeviation { center, .. } => center.len(),
        }
    }

    fn value(&self, x: &[f64]) -> f64 {
        match self {
            DecisionTerm::Affine { slope, offset } => dot(slope, x) + offset,
            DecisionTerm::AbsDeviation { scale, center } => scale * dist(x, center),
        }
    }

    fn subgrad(&self, x: &[f64], out: &mut [f64]) {
        match self {
            DecisionTerm::Affine { slope, .. } => out.copy_from_slice(slope),
            DecisionTerm::AbsDeviation { scale, center } => {
                let d = dist(x, center);
                if d == 0.0 {
                    out.fill(0.0);
                } else {
                    for ((o, xi), ci) in out.iter_mut().zip(x).zip(center) {
                        *o = scale * (xi - ci) / d;
                    }
                }
            }
        }
    }

    fn lip(&self) -> f64 {
        match self {
            DecisionTerm::Affine { slope, .. } => norm(slope),
            DecisionTerm::AbsDeviation { scale, .. } => *scale,
        }
    }
}

/// Sample-dependent part `w_k(ξ)` of a separable piece.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SampleTerm {
    /// `height − slope · ‖ξ − center‖` (nonsmooth peak)
    Cone { height: f64, slope: f64, center: Vec<f64> },
    /// `height − slope · √(1 + ‖ξ − center‖²)` (smooth peak)
    Hyperbolic { height: f64, slope: f64, center: Vec<f64> },
    /// `offset + coef · ξ`; unbounded above unless `coef = 0`.
    Linear { offset: f64, coef: Vec<f64> },
}

impl SampleTerm {
    fn dim(&self) -> usize {
        match self {
            SampleTerm::Cone { center, .. } | SampleTerm::Hyperbolic { center, .. } => center.len(),
            SampleTerm::Linear { coef, .. } => coef.len(),
        }
    }

    fn value(&self, xi: &[f64]) -> f64 {
        match self {
            SampleTerm::Cone { height, slope, center } => height - slope * dist(xi, center),
            SampleTerm::Hyperbolic { height, slope, center } => {
                let d = dist(xi, center);
                height - slope * (1.0 + d * d).sqrt()
            }
            SampleTerm::Linear { offset, coef } => offset + dot(coef, xi),
        }
    }

    fn supergrad(&self, xi: &[f64], out: &mut [f64]) {
        match self {
            SampleTerm::Cone { slope, center, .. } => {
                let d = dist(xi, center);
                if d == 0.0 {
                    out.fill(0.0);
                } else {
                    for ((o, a), c) in out.iter_mut().zip(xi).zip(center) {
                        *o = -slope * (a - c) / d;
                    }
                }
            }
            SampleTerm::Hyperbolic { slope, center, .. } => {
                let d = dist(xi, center);
                let r = (1.0 + d * d).sqrt();
                for ((o, a), c) in out.iter_mut().zip(xi).zip(center) {
                    *o = -slope * (a - c) / r;
                }
            }
            SampleTerm::Linear { coef, .. } => out.copy_from_slice(coef),
        }
    }

    fn lip(&self) -> f64 {
        match self {
            SampleTerm::Cone { slope, .. } | SampleTerm::Hyperbolic { slope, .. } => *slope,
            SampleTerm::Linear { coef, .. } => norm(coef),
        }
    }

    fn bounded_above(&self) -> bool {
        match self {
            SampleTerm::Cone { .. } | SampleTerm::Hyperbolic { .. } => true,
            SampleTerm::Linear { coef, .. } => coef.iter().all(|c| *c == 0.0),
        }
    }

    fn profile(&self, ball_center: &[f64]) -> BallProfile {
        match self {
            SampleTerm::Cone { height, slope, center } | SampleTerm::Hyperbolic { height, slope, center } => {
                BallProfile::Peak {
                    top: *height,
                    slope: *slope,
                    dist: dist(center, ball_center),
                    smooth: matches!(self, SampleTerm::Hyperbolic { .. }),
                }
            }
            SampleTerm::Linear { offset, coef } => {
                BallProfile::Linear { at_center: offset + dot(coef, ball_center), grad_norm: norm(coef) }
            }
        }
    }

    /// Maximal value over `B(ball_center, r)` and, if `out` is given, the maximizer.
    fn ball_max(&self, ball_center: &[f64], r: f64, out: Option<&mut [f64]>) -> f64 {
        match self {
            SampleTerm::Cone { height, slope, center } | SampleTerm::Hyperbolic { height, slope, center } => {
                // Radially decreasing around `center`: the maximizer is the point of
                // the ball closest to `center`.
                let d = dist(center, ball_center);
                let gap = (d - r).max(0.0);
                if let Some(out) = out {
                    if *slope == 0.0 {
                        out.copy_from_slice(ball_center);
                    } else if d <= r {
                        out.copy_from_slice(center);
                    } else {
                        let s = r / d;
                        for ((o, b), c) in out.iter_mut().zip(ball_center).zip(center) {
                            *o = b + s * (c - b);
                        }
                    }
                }
                match self {
                    SampleTerm::Cone { .. } => height - slope * gap,
                    _ => height - slope * (1.0 + gap * gap).sqrt(),
                }
            }
            SampleTerm::Linear { offset, coef } => linear_ball_max(*offset, coef, ball_center, r, out),
        }
    }
}

fn linear_ball_max(offset: f64, coef: &[f64], center: &[f64], r: f64, out: Option<&mut [f64]>) -> f64 {
    let g = norm(coef);
    if let Some(out) = out {
        if g == 0.0 {
            out.copy_from_slice(center);
        } else {
            for ((o, c), a) in out.iter_mut().zip(center).zip(coef) {
                *o = c + r * a / g;
            }
        }
    }
    offset + dot(coef, center) + r * g
}

/// Separable piece `u(x) + w(ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeparablePiece {
    pub decision: DecisionTerm,
    pub sample: SampleTerm,
}

impl SeparablePiece {
    /// Validates convexity in `x` and concavity in `ξ` of the parameterization.
    pub fn new(decision: DecisionTerm, sample: SampleTerm) -> Result<Self> {
        if let DecisionTerm::AbsDeviation { scale, .. } = &decision {
            if !(*scale >= 0.0 && scale.is_finite()) {
                return Err(Error::input("absolute-deviation scale must be finite and >= 0"));
            }
        }
        if let SampleTerm::Cone { slope, .. } | SampleTerm::Hyperbolic { slope, .. } = &sample {
            if !(*slope >= 0.0 && slope.is_finite()) {
                return Err(Error::input("peak slope must be finite and >= 0"));
            }
        }
        Ok(SeparablePiece { decision, sample })
    }
}

impl LossPiece for SeparablePiece {
    fn decision_dim(&self) -> usize {
        self.decision.dim()
    }
    fn sample_dim(&self) -> usize {
        self.sample.dim()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        self.decision.value(x) + self.sample.value(xi)
    }
    fn subgrad_x(&self, x: &[f64], _xi: &[f64], out: &mut [f64]) {
        self.decision.subgrad(x, out)
    }
    fn supergrad_xi(&self, _x: &[f64], xi: &[f64], out: &mut [f64]) {
        self.sample.supergrad(xi, out)
    }
    fn lip_x(&self) -> f64 {
        self.decision.lip()
    }
    fn lip_xi(&self) -> f64 {
        self.sample.lip()
    }
    fn smoothness(&self) -> Smoothness {
        match self.sample {
            SampleTerm::Cone { .. } => Smoothness::Nonsmooth,
            _ => Smoothness::Smooth,
        }
    }
    fn bounded_above(&self) -> bool {
        self.sample.bounded_above()
    }
    fn ball_argmax(&self, x: &[f64], center: &[f64], radius: f64, out: &mut [f64]) -> Option<f64> {
        Some(self.decision.value(x) + self.sample.ball_max(center, radius, Some(out)))
    }
    fn ball_max_value(&self, x: &[f64], center: &[f64], radius: f64) -> Option<f64> {
        Some(self.decision.value(x) + self.sample.ball_max(center, radius, None))
    }
    fn ball_profile(&self, x: &[f64], center: &[f64]) -> Option<BallProfile> {
        let u = self.decision.value(x);
        Some(match self.sample.profile(center) {
            BallProfile::Peak { top, slope, dist, smooth } => BallProfile::Peak { top: top + u, slope, dist, smooth },
            BallProfile::Linear { at_center, grad_norm } => BallProfile::Linear { at_center: at_center + u, grad_norm },
        })
    }
}

/// Jointly affine piece `x_coef · x + xi_coef · ξ + offset`.
///
/// Used for losses such as `|x − ξ| = max(x − ξ, ξ − x)`. Grows linearly in `ξ`,
/// so the worst-case oracle only accepts it at radius zero.
#[derive(Clone, Debug, PartialEq)]
pub struct CoupledAffinePiece {
    pub x_coef: Vec<f64>,
    pub xi_coef: Vec<f64>,
    pub offset: f64,
}

impl LossPiece for CoupledAffinePiece {
    fn decision_dim(&self) -> usize {
        self.x_coef.len()
    }
    fn sample_dim(&self) -> usize {
        self.xi_coef.len()
    }
    fn value(&self, x: &[f64], xi: &[f64]) -> f64 {
        dot(&self.x_coef, x) + dot(&self.xi_coef, xi) + self.offset
    }
    fn subgrad_x(&self, _x: &[f64], _xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.x_coef)
    }
    fn supergrad_xi(&self, _x: &[f64], _xi: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.xi_coef)
    }
    fn lip_x(&self) -> f64 {
        norm(&self.x_coef)
    }
    fn lip_xi(&self) -> f64 {
        norm(&self.xi_coef)
    }
    fn smoothness(&self) -> Smoothness {
        Smoothness::Smooth
    }
    fn bounded_above(&self) -> bool {
        self.xi_coef.iter().all(|c| *c == 0.0)
    }
    fn ball_argmax(&self, x: &[f64], center: &[f64], radius: f64, out: &mut [f64]) -> Option<f64> {
        Some(dot(&self.x_coef, x) + linear_ball_max(self.offset, &self.xi_coef, center, radius, Some(out)))
    }
    fn ball_profile(&self, x: &[f64], center: &[f64]) -> Option<BallProfile> {
        Some(BallProfile::Linear {
            at_center: dot(&self.x_coef, x) + dot(&self.xi_coef, center) + self.offset,
            grad_norm: norm(&self.xi_coef),
        })
    }
}

/// Piecewise loss `ℓ(x, ξ) = max_k ℓ_k(x, ξ)`.
#[derive(Clone)]
pub struct LossModel {
    pieces: Vec<Arc<dyn LossPiece>>,
    decision_dim: usize,
    sample_dim: usize,
    lip_x: f64,
    lip_xi: f64,
}

impl fmt::Debug for LossModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossModel")
            .field("pieces", &self.pieces)
            .field("lip_x", &self.lip_x)
            .field("lip_xi", &self.lip_xi)
            .finish()
    }
}

impl LossModel {
    /// Builds a loss from arbitrary pieces. Growth is not checked here; the
    /// worst-case oracle rejects unbounded pieces at positive radius.
    pub fn new(pieces: Vec<Arc<dyn LossPiece>>) -> Result<Self> {
        let first = pieces
            .first()
            .ok_or_else(|| Error::input("a loss needs at least one piece"))?;
        let (n, m) = (first.decision_dim(), first.sample_dim());
        if n == 0 || m == 0 {
            return Err(Error::input("decision and sample dimensions must be positive"));
        }
        for (k, p) in pieces.iter().enumerate() {
            check_dim(&format!("piece {k} decision term"), p.decision_dim(), n)?;
            check_dim(&format!("piece {k} sample term"), p.sample_dim(), m)?;
        }
        let lip_x = pieces.iter().map(|p| p.lip_x()).fold(0.0, f64::max);
        let lip_xi = pieces.iter().map(|p| p.lip_xi()).fold(0.0, f64::max);
        Ok(LossModel { pieces, decision_dim: n, sample_dim: m, lip_x, lip_xi })
    }

    pub fn num_pieces(&self) -> usize {
        self.pieces.len()
    }

    pub fn piece(&self, k: usize) -> &dyn LossPiece {
        self.pieces[k].as_ref()
    }

    pub fn decision_dim(&self) -> usize {
        self.decision_dim
    }

    pub fn sample_dim(&self) -> usize {
        self.sample_dim
    }

    /// `G_X`: Lipschitz bound of `ℓ(·, ξ)`.
    pub fn lip_x(&self) -> f64 {
        self.lip_x
    }

    /// `‖ℓ‖_lip = max_k γ_k`.
    pub fn lip_xi(&self) -> f64 {
        self.lip_xi
    }

    /// True when every piece is bounded above in `ξ`.
    pub fn growth_bounded(&self) -> bool {
        self.pieces.iter().all(|p| p.bounded_above())
    }

    /// `ℓ(x, ξ)` and the index of the maximizing piece (smallest index on ties).
    pub fn eval(&self, x: &[f64], xi: &[f64]) -> Result<(f64, usize)> {
        check_dim("decision", x.len(), self.decision_dim)?;
        check_dim("sample", xi.len(), self.sample_dim)?;
        Ok(self.eval_unchecked(x, xi))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], xi: &[f64]) -> (f64, usize) {
        let mut best = (f64::NEG_INFINITY, 0);
        for (k, p) in self.pieces.iter().enumerate() {
            let v = p.value(x, xi);
            if v > best.0 {
                best = (v, k);
            }
        }
        best
    }

    /// Subgradient of `ℓ(·, ξ)` at `x`, taken from the maximizing piece.
    pub fn subgrad_x(&self, x: &[f64], xi: &[f64]) -> Result<Vec<f64>> {
        let (_, k) = self.eval(x, xi)?;
        let mut g = vec![0.0; self.decision_dim];
        self.pieces[k].subgrad_x(x, xi, &mut g);
        Ok(g)
    }

    /// Fixed-decision view `ξ ↦ ℓ(x, ξ)` used by the worst-case oracle.
    pub fn at<'a>(&'a self, x: &'a [f64]) -> Result<LossAt<'a>> {
        check_dim("decision", x.len(), self.decision_dim)?;
        Ok(LossAt { model: self, x })
    }
}

/// The loss with its decision argument frozen.
#[derive(Clone, Copy, Debug)]
pub struct LossAt<'a> {
    pub model: &'a LossModel,
    pub x: &'a [f64],
}

impl<'a> LossAt<'a> {
    pub fn num_pieces(&self) -> usize {
        self.model.num_pieces()
    }

    pub fn sample_dim(&self) -> usize {
        self.model.sample_dim()
    }

    pub fn lip_xi(&self) -> f64 {
        self.model.lip_xi()
    }

    pub fn value(&self, xi: &[f64]) -> f64 {
        self.model.eval_unchecked(self.x, xi).0
    }

    pub fn piece_value(&self, k: usize, xi: &[f64]) -> f64 {
        self.model.pieces[k].value(self.x, xi)
    }

    pub fn piece(&self, k: usize) -> &'a dyn LossPiece {
        self.model.pieces[k].as_ref()
    }
}

/// Builds a loss from `(u_k, w_k)` pairs of the shipped separable family.
///
/// Rejects any `w_k` that is not bounded above, since the worst case over a
/// 1-Wasserstein ball is then not attained.
pub fn make_separable_loss(pieces: Vec<(DecisionTerm, SampleTerm)>) -> Result<LossModel> {
    let mut out: Vec<Arc<dyn LossPiece>> = Vec::with_capacity(pieces.len());
    for (k, (u, w)) in pieces.into_iter().enumerate() {
        if !w.bounded_above() {
            return Err(Error::input(format!(
                "piece {k}: sample term grows linearly and is not bounded above"
            )));
        }
        out.push(Arc::new(SeparablePiece::new(u, w)?));
    }
    LossModel::new(out)
}

#[derive(Clone, Debug, PartialEq)]
enum Shape {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

/// Compact convex feasible set: an axis-aligned box or a Euclidean ball.
#[derive(Clone, Debug, PartialEq)]
pub struct DecisionSpace {
    shape: Shape,
    diameter: f64,
}

impl DecisionSpace {
    pub fn boxed(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        check_dim("box upper bound", upper.len(), lower.len())?;
        if lower.is_empty() {
            return Err(Error::input("box must have positive dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::input("box bounds must be finite with lower <= upper"));
        }
        let diameter = dist(&lower, &upper);
        Ok(DecisionSpace { shape: Shape::Box { lower, upper }, diameter })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() {
            return Err(Error::input("ball must have positive dimension"));
        }
        if !(radius >= 0.0 && radius.is_finite()) || center.iter().any(|c| !c.is_finite()) {
            return Err(Error::input("ball radius must be finite and >= 0"));
        }
        Ok(DecisionSpace { shape: Shape::Ball { center, radius }, diameter: 2.0 * radius })
    }

    pub fn dim(&self) -> usize {
        match &self.shape {
            Shape::Box { lower, .. } => lower.len(),
            Shape::Ball { center, .. } => center.len(),
        }
    }

    /// Exact Euclidean diameter `D_X`.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Box midpoint or ball center.
    pub fn center(&self) -> Vec<f64> {
        match &self.shape {
            Shape::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect(),
            Shape::Ball { center, .. } => center.clone(),
        }
    }

    /// Axis-aligned bounding box `(lower, upper)`.
    pub fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        match &self.shape {
            Shape::Box { lower, upper } => (lower.clone(), upper.clone()),
            Shape::Ball { center, radius } => (
                center.iter().map(|c| c - radius).collect(),
                center.iter().map(|c| c + radius).collect(),
            ),
        }
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("point", y.len(), self.dim())?;
        Ok(match &self.shape {
            Shape::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.clamp(*l, *u))
                .collect(),
            Shape::Ball { center, radius } => {
                let d = dist(y, center);
                if d <= *radius {
                    y.to_vec()
                } else {
                    let mut s = radius / d;
                    let mut out: Vec<f64> = y.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect();
                    // Rounding can leave the point an ulp outside; pull it in so
                    // projecting again is a no-op.
                    while dist(&out, center) > *radius {
                        s *= 1.0 - f64::EPSILON;
                        out = y.iter().zip(center).map(|(v, c)| c + s * (v - c)).collect();
                    }
                    out
                }
            }
        })
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.dim() {
            return false;
        }
        match &self.shape {
            Shape::Box { lower, upper } => y
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            Shape::Ball { center, radius } => dist(y, center) <= radius + tol,
        }
    }

    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }
}

/// Radius of the 1-Wasserstein ambiguity ball. The transport order is fixed to 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AmbiguitySpec {
    radius: f64,
}

impl AmbiguitySpec {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::input(format!("ambiguity radius must be finite and >= 0, got {radius}")));
        }
        Ok(AmbiguitySpec { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> u32 {
        1
    }
}

/// Samples observed so far; the empirical measure puts mass `1/t` on each.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleBuffer {
    dim: usize,
    data: Vec<f64>,
}

impl SampleBuffer {
    pub fn new(dim: usize) -> Self {
        SampleBuffer { dim, data: Vec::new() }
    }

    pub fn from_rows<I, R>(dim: usize, rows: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let mut buf = SampleBuffer::new(dim);
        for r in rows {
            buf.push(r.as_ref())?;
        }
        Ok(buf)
    }

    pub fn push(&mut self, xi: &[f64]) -> Result<()> {
        check_dim("sample", xi.len(), self.dim)?;
        if xi.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("samples must be finite"));
        }
        self.data.extend_from_slice(xi);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// The empirical measure `P̂_t`.
    pub fn empirical(&self) -> Result<DiscreteDistribution> {
        DiscreteDistribution::uniform(self.dim, self.data.clone())
    }
}
