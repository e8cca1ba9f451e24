//! Online distributional best response: each round the adversary picks the
//! worst-case distribution around the samples seen so far, and the learner
//! takes a projected subgradient step against it.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::budget::wasserstein_oracle;
use crate::distribution::DiscreteDistribution;
use crate::error::{check_dim, Error, Result};
use crate::model::{AmbiguitySpec, DecisionSpace, LossModel, SampleBuffer};
use crate::oracle_pairs::ToleranceConfig;

/// `η_t = D/(G√t)`.
pub fn step_size(t: usize, diameter: f64, lip_x: f64) -> Result<f64> {
    if t == 0 {
        return Err(Error::input("rounds are numbered from 1"));
    }
    if !(diameter > 0.0 && lip_x > 0.0) {
        return Err(Error::input(format!(
            "step size needs a positive diameter and Lipschitz constant, got D = {diameter}, G = {lip_x}"
        )));
    }
    Ok(diameter / (lip_x * (t as f64).sqrt()))
}

/// Everything that stays fixed across rounds.
#[derive(Clone, Debug)]
pub struct Problem {
    pub loss: LossModel,
    pub space: DecisionSpace,
    pub ambiguity: AmbiguitySpec,
    pub tolerance: ToleranceConfig,
}

impl Problem {
    pub fn new(loss: LossModel, space: DecisionSpace, ambiguity: AmbiguitySpec, tolerance: ToleranceConfig) -> Result<Self> {
        check_dim("decision space", space.dim(), loss.decision_dim())?;
        tolerance.validate()?;
        if ambiguity.radius() > 0.0 && !loss.growth_bounded() {
            return Err(Error::input("a loss that is unbounded in the sample needs radius 0"));
        }
        Ok(Problem { loss, space, ambiguity, tolerance })
    }

    /// `E_Q[ℓ(x, ·)]`.
    pub fn expected_loss(&self, x: &[f64], q: &DiscreteDistribution) -> f64 {
        q.expectation(|xi| self.loss.eval_unchecked(x, xi).0)
    }

    /// `Q`-weighted average of the argmax-piece subgradients at `x`.
    pub fn expected_subgrad(&self, x: &[f64], q: &DiscreteDistribution) -> Vec<f64> {
        let n = x.len();
        let mut g = vec![0.0; n];
        let mut buf = vec![0.0; n];
        for (xi, w) in q.iter() {
            let (_, k) = self.loss.eval_unchecked(x, xi);
            self.loss.piece(k).subgrad_x(x, xi, &mut buf);
            for (gi, bi) in g.iter_mut().zip(&buf) {
                *gi += w * bi;
            }
        }
        g
    }

    fn step_size(&self, t: usize) -> f64 {
        let (d, g) = (self.space.diameter(), self.loss.lip_x());
        if d > 0.0 && g > 0.0 {
            d / (g * (t as f64).sqrt())
        } else {
            0.0
        }
    }
}

/// Learner state between rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LearnerState {
    x: Vec<f64>,
    avg: Vec<f64>,
    played: usize,
    buffer: SampleBuffer,
}

impl LearnerState {
    /// Starts at `x1`, or at the center of the decision space.
    pub fn new(problem: &Problem, x1: Option<Vec<f64>>) -> Result<Self> {
        let x = match x1 {
            Some(x) => {
                check_dim("initial decision", x.len(), problem.space.dim())?;
                if !problem.space.contains(&x, 1e-12) {
                    return Err(Error::input("initial decision lies outside the decision space"));
                }
                x
            }
            None => problem.space.center(),
        };
        let n = x.len();
        Ok(LearnerState { x, avg: vec![0.0; n], played: 0, buffer: SampleBuffer::new(problem.loss.sample_dim()) })
    }

    /// Decision to be played next round.
    pub fn decision(&self) -> &[f64] {
        &self.x
    }

    /// Mean of the decisions played so far (the starting point before any round).
    pub fn average(&self) -> &[f64] {
        if self.played == 0 {
            &self.x
        } else {
            &self.avg
        }
    }

    /// Number of completed rounds.
    pub fn rounds(&self) -> usize {
        self.played
    }

    pub fn buffer(&self) -> &SampleBuffer {
        &self.buffer
    }
}

/// What happened in one round.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub t: usize,
    /// Decision played this round.
    pub x: Vec<f64>,
    /// `f(x_t, Q_t) = E_{Q_t}[ℓ(x_t, ·)]`.
    pub loss_value: f64,
    /// Budget-allocation objective reported by the oracle.
    pub oracle_value: f64,
    pub budget_total: f64,
    pub lambda: f64,
    pub eta: f64,
    pub subgrad: Vec<f64>,
    pub eta_out_min: f64,
    pub lambda_lip_guess: f64,
    pub bisection_steps: usize,
    pub distribution: DiscreteDistribution,
}

/// Plays one round against the new sample `xi_new`.
pub fn step(state: &mut LearnerState, xi_new: &[f64], problem: &Problem) -> Result<StepReport> {
    let t = state.played + 1;
    let wrap = |e: Error| Error::Round { round: t, source: Box::new(e) };
    state.buffer.push(xi_new).map_err(wrap)?;
    let at = problem.loss.at(&state.x).map_err(wrap)?;
    let out = match wasserstein_oracle(&at, &state.buffer, &problem.ambiguity, &problem.tolerance) {
        Ok(out) => out,
        Err(e) => {
            state.buffer = SampleBuffer::from_rows(state.buffer.dim(), state.buffer.iter().take(t - 1))?;
            return Err(wrap(e));
        }
    };
    let g = problem.expected_subgrad(&state.x, &out.distribution);
    let eta = problem.step_size(t);
    let moved: Vec<f64> = state.x.iter().zip(&g).map(|(x, gi)| x - eta * gi).collect();
    let next = problem.space.project(&moved).map_err(wrap)?;

    let played = std::mem::replace(&mut state.x, next);
    let inv = 1.0 / t as f64;
    for (a, x) in state.avg.iter_mut().zip(&played) {
        *a += (x - *a) * inv;
    }
    state.played = t;

    Ok(StepReport {
        t,
        x: played,
        loss_value: out.value,
        oracle_value: out.allocation.objective,
        budget_total: out.allocation.total(),
        lambda: out.allocation.lambda,
        eta,
        subgrad: g,
        eta_out_min: out.allocation.eta_out_min,
        lambda_lip_guess: out.allocation.lambda_lip_guess,
        bisection_steps: out.allocation.bisection_steps,
        distribution: out.distribution,
    })
}

/// One row of a run trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub t: usize,
    pub x: Vec<f64>,
    pub loss_value: f64,
    /// `f(x°, Q_t)` for the configured comparator, if any.
    pub comparator_value: Option<f64>,
    pub oracle_value: f64,
    pub budget_total: f64,
    pub lambda: f64,
    pub eta: f64,
    pub eta_out_min: f64,
    pub lambda_lip_guess: f64,
    pub bisection_steps: usize,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub x1: Option<Vec<f64>>,
    pub comparator: Option<Vec<f64>>,
    /// Keep every `Q_t` (memory grows quadratically in the horizon).
    pub keep_distributions: bool,
}

#[derive(Clone, Debug)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Wall time per round in seconds, kept apart from the rows so that
    /// traces are reproducible byte for byte.
    pub wall_times: Vec<f64>,
    pub distributions: Vec<DiscreteDistribution>,
    /// Average of the played decisions.
    pub x_bar: Vec<f64>,
    /// Decision the learner would play next.
    pub x_next: Vec<f64>,
}

impl RunTrace {
    /// `(1/T') Σ_{t ≤ T'} (f(x_t, Q_t) − f(x°, Q_t))` over the first `upto` rounds.
    pub fn average_regret(&self, upto: usize) -> Option<f64> {
        let rows = self.rows.get(..upto)?;
        if rows.is_empty() {
            return None;
        }
        let mut s = 0.0;
        for r in rows {
            s += r.loss_value - r.comparator_value?;
        }
        Some(s / rows.len() as f64)
    }
}

/// A run that stopped early, with the rounds completed so far.
#[derive(Debug, Error)]
#[error("{error}")]
pub struct PartialRun {
    pub trace: RunTrace,
    #[source]
    pub error: Error,
}

impl From<PartialRun> for Error {
    fn from(p: PartialRun) -> Self {
        p.error
    }
}

/// Runs `horizon` rounds on the stream.
pub fn run<I>(stream: I, horizon: usize, problem: &Problem, opts: &RunOptions) -> std::result::Result<RunTrace, Box<PartialRun>>
where
    I: IntoIterator,
    I::Item: AsRef<[f64]>,
{
    let empty = |error: Error| Box::new(PartialRun {
        trace: RunTrace { rows: vec![], wall_times: vec![], distributions: vec![], x_bar: vec![], x_next: vec![] },
        error,
    });
    if horizon == 0 {
        return Err(empty(Error::input("horizon must be at least 1")));
    }
    if let Some(c) = &opts.comparator {
        if let Err(e) = check_dim("comparator", c.len(), problem.space.dim()) {
            return Err(empty(e));
        }
    }
    let mut state = LearnerState::new(problem, opts.x1.clone()).map_err(empty)?;
    let mut trace = RunTrace {
        rows: Vec::with_capacity(horizon),
        wall_times: Vec::with_capacity(horizon),
        distributions: Vec::new(),
        x_bar: Vec::new(),
        x_next: Vec::new(),
    };
    let mut stream = stream.into_iter();
    let mut failure = None;
    for t in 1..=horizon {
        let Some(xi) = stream.next() else {
            failure = Some(Error::Truncated { completed: t - 1, horizon });
            break;
        };
        let start = Instant::now();
        let report = match step(&mut state, xi.as_ref(), problem) {
            Ok(r) => r,
            Err(e) => {
                failure = Some(e);
                break;
            }
        };
        let comparator_value = opts.comparator.as_ref().map(|c| problem.expected_loss(c, &report.distribution));
        trace.wall_times.push(start.elapsed().as_secs_f64());
        trace.rows.push(TraceRow {
            t,
            x: report.x,
            loss_value: report.loss_value,
            comparator_value,
            oracle_value: report.oracle_value,
            budget_total: report.budget_total,
            lambda: report.lambda,
            eta: report.eta,
            eta_out_min: report.eta_out_min,
            lambda_lip_guess: report.lambda_lip_guess,
            bisection_steps: report.bisection_steps,
        });
        if opts.keep_distributions {
            trace.distributions.push(report.distribution);
        }
    }
    trace.x_bar = state.average().to_vec();
    trace.x_next = state.decision().to_vec();
    match failure {
        None => Ok(trace),
        Some(error) => Err(Box::new(PartialRun { trace, error })),
    }
}
