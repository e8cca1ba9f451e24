//! Offline estimate of the excess worst-case risk of a decision.
//!
//! The ball is centered at a fixed hold-out empirical measure standing in for
//! the data-generating distribution. The minimizer of the worst-case risk over
//! the decision set is located once by a grid search (plus a golden-section
//! refinement in one dimension) and cached.

use std::sync::OnceLock;

use serde::Serialize;

use crate::budget::wasserstein_oracle;
use crate::error::{check_dim, Error, Result};
use crate::golden::{golden_max, Tie};
use crate::learner::Problem;
use crate::model::SampleBuffer;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEstimate {
    /// `F(x) − min_grid F`, where `F` is the hold-out worst-case risk.
    pub gap: f64,
    pub value_at_x: f64,
    pub min_value: f64,
    pub argmin: Vec<f64>,
}

pub struct GapEstimator<'a> {
    problem: &'a Problem,
    holdout: SampleBuffer,
    points_per_axis: usize,
    refine: bool,
    minimum: OnceLock<(Vec<f64>, f64)>,
}

impl<'a> GapEstimator<'a> {
    /// Decision sets of dimension above two are refused.
    pub fn new(problem: &'a Problem, holdout: SampleBuffer, points_per_axis: usize, refine: bool) -> Result<Self> {
        check_dim("hold-out sample", holdout.dim(), problem.loss.sample_dim())?;
        if holdout.is_empty() {
            return Err(Error::input("hold-out sample is empty"));
        }
        if problem.space.dim() > 2 {
            return Err(Error::Scale(format!("gap grid supports decision dimension <= 2, got {}", problem.space.dim())));
        }
        if points_per_axis < 2 {
            return Err(Error::input("need at least two grid points per axis"));
        }
        Ok(GapEstimator { problem, holdout, points_per_axis, refine, minimum: OnceLock::new() })
    }

    pub fn holdout(&self) -> &SampleBuffer {
        &self.holdout
    }

    /// Worst-case risk over the ball around the hold-out measure.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let at = self.problem.loss.at(x)?;
        Ok(wasserstein_oracle(&at, &self.holdout, &self.problem.ambiguity, &self.problem.tolerance)?.value)
    }

    fn grid(&self) -> Vec<Vec<f64>> {
        let (lo, hi) = self.problem.space.bounds();
        let n = self.points_per_axis;
        let axis = |d: usize| -> Vec<f64> { (0..n).map(|i| lo[d] + (hi[d] - lo[d]) * i as f64 / (n - 1) as f64).collect() };
        let mut out: Vec<Vec<f64>> = axis(0).into_iter().map(|v| vec![v]).collect();
        for d in 1..lo.len() {
            let ax = axis(d);
            out = out.into_iter().flat_map(|p| ax.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
        }
        out.retain(|p| self.problem.space.contains(p, 1e-12));
        if out.is_empty() {
            out.push(self.problem.space.center());
        }
        out
    }

    fn search(&self) -> Result<(Vec<f64>, f64)> {
        let mut best: Option<(Vec<f64>, f64)> = None;
        for p in self.grid() {
            let v = self.objective(&p)?;
            if best.as_ref().is_none_or(|b| v < b.1) {
                best = Some((p, v));
            }
        }
        let (mut arg, mut val) = best.expect("grid is never empty");
        if self.refine && arg.len() == 1 {
            let (lo, hi) = self.problem.space.bounds();
            let h = (hi[0] - lo[0]) / (self.points_per_axis - 1) as f64;
            let (a, b) = ((arg[0] - h).max(lo[0]), (arg[0] + h).min(hi[0]));
            let out = golden_max(|s| self.objective(&[s]).map(|v| -v), a, b, 1e-4 * (b - a).max(1e-12), Tie::KeepLeft)?;
            if -out.best_value < val {
                arg = vec![out.best_arg];
                val = -out.best_value;
            }
        }
        Ok((arg, val))
    }

    /// Cached minimizer and minimum value.
    pub fn minimum(&self) -> Result<(Vec<f64>, f64)> {
        if let Some(m) = self.minimum.get() {
            return Ok(m.clone());
        }
        let m = self.search()?;
        Ok(self.minimum.get_or_init(|| m).clone())
    }

    pub fn gap(&self, x: &[f64]) -> Result<GapEstimate> {
        check_dim("decision", x.len(), self.problem.space.dim())?;
        let (argmin, min_value) = self.minimum()?;
        let value_at_x = self.objective(x)?;
        Ok(GapEstimate { gap: value_at_x - min_value, value_at_x, min_value, argmin })
    }
}
