//! Synthetic sample streams and hold-out samples.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::distribution::DiscreteDistribution;
use crate::error::{Error, Result};
use crate::model::SampleBuffer;
use crate::reference::w1_sorted;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub seed: u64,
    #[serde(flatten)]
    pub family: StreamFamily,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StreamFamily {
    /// Independent coordinates `N(mean_j, std_j²)`.
    Gaussian { mean: Vec<f64>, std: Vec<f64> },
    /// Uniform on the box `[lower, upper]`.
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    Mixture { components: Vec<Component> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

fn check_gaussian(mean: &[f64], std: &[f64]) -> Result<()> {
    if mean.is_empty() || mean.len() != std.len() {
        return Err(Error::Config("stream mean and std must be nonempty and of equal length".into()));
    }
    if mean.iter().any(|m| !m.is_finite()) || std.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
        return Err(Error::Config("stream mean must be finite and std finite and >= 0".into()));
    }
    Ok(())
}

impl StreamSpec {
    pub fn dim(&self) -> usize {
        match &self.family {
            StreamFamily::Gaussian { mean, .. } => mean.len(),
            StreamFamily::Uniform { lower, .. } => lower.len(),
            StreamFamily::Mixture { components } => components.first().map_or(0, |c| c.mean.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.family {
            StreamFamily::Gaussian { mean, std } => check_gaussian(mean, std),
            StreamFamily::Uniform { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::Config("stream lower and upper must be nonempty and of equal length".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u) || !l.is_finite() || !u.is_finite()) {
                    return Err(Error::Config("stream bounds must be finite with lower <= upper".into()));
                }
                Ok(())
            }
            StreamFamily::Mixture { components } => {
                let Some(first) = components.first() else {
                    return Err(Error::Config("mixture needs at least one component".into()));
                };
                for c in components {
                    check_gaussian(&c.mean, &c.std)?;
                    if c.mean.len() != first.mean.len() {
                        return Err(Error::Config("mixture components differ in dimension".into()));
                    }
                    if !(c.weight >= 0.0 && c.weight.is_finite()) {
                        return Err(Error::Config("mixture weights must be finite and >= 0".into()));
                    }
                }
                if components.iter().map(|c| c.weight).sum::<f64>() <= 0.0 {
                    return Err(Error::Config("mixture weights sum to zero".into()));
                }
                Ok(())
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng, pick: Option<&WeightedIndex<f64>>, out: &mut Vec<f64>) {
        out.clear();
        match &self.family {
            StreamFamily::Gaussian { mean, std } => {
                for (m, s) in mean.iter().zip(std) {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(m + s * z);
                }
            }
            StreamFamily::Uniform { lower, upper } => {
                for (l, u) in lower.iter().zip(upper) {
                    out.push(l + (u - l) * rng.gen::<f64>());
                }
            }
            StreamFamily::Mixture { components } => {
                let c = &components[pick.expect("mixture index").sample(rng)];
                for (m, s) in c.mean.iter().zip(&c.std) {
                    let z: f64 = rng.sample(StandardNormal);
                    out.push(m + s * z);
                }
            }
        }
    }

    fn picker(&self) -> Result<Option<WeightedIndex<f64>>> {
        match &self.family {
            StreamFamily::Mixture { components } => WeightedIndex::new(components.iter().map(|c| c.weight))
                .map(Some)
                .map_err(|e| Error::Config(format!("mixture weights: {e}"))),
            _ => Ok(None),
        }
    }

    /// CDF of a one-dimensional stream.
    fn cdf(&self, v: f64) -> f64 {
        let normal = |m: f64, s: f64| {
            if s == 0.0 {
                if v >= m { 1.0 } else { 0.0 }
            } else {
                Normal::new(m, s).map_or(0.0, |n| n.cdf(v))
            }
        };
        match &self.family {
            StreamFamily::Gaussian { mean, std } => normal(mean[0], std[0]),
            StreamFamily::Uniform { lower, upper } => {
                if upper[0] == lower[0] {
                    if v >= lower[0] { 1.0 } else { 0.0 }
                } else {
                    ((v - lower[0]) / (upper[0] - lower[0])).clamp(0.0, 1.0)
                }
            }
            StreamFamily::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components.iter().map(|c| c.weight * normal(c.mean[0], c.std[0])).sum::<f64>() / total
            }
        }
    }

    /// Quantile of a one-dimensional stream.
    fn quantile(&self, p: f64) -> f64 {
        match &self.family {
            StreamFamily::Gaussian { mean, std } if std[0] > 0.0 => {
                Normal::new(mean[0], std[0]).map_or(mean[0], |n| n.inverse_cdf(p))
            }
            StreamFamily::Gaussian { mean, .. } => mean[0],
            StreamFamily::Uniform { lower, upper } => lower[0] + (upper[0] - lower[0]) * p,
            StreamFamily::Mixture { components } => {
                let mut lo = components.iter().map(|c| c.mean[0] - 40.0 * c.std[0]).fold(f64::INFINITY, f64::min);
                let mut hi = components.iter().map(|c| c.mean[0] + 40.0 * c.std[0]).fold(f64::NEG_INFINITY, f64::max);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.cdf(mid) < p {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-13 * (1.0 + mid.abs()) {
                        break;
                    }
                }
                0.5 * (lo + hi)
            }
        }
    }
}

/// `horizon` i.i.d. draws, reproducible from `seed`.
pub fn generate_stream(spec: &StreamSpec, seed: u64, horizon: usize) -> Result<Vec<Vec<f64>>> {
    spec.validate()?;
    let pick = spec.picker()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(horizon);
    let mut buf = Vec::with_capacity(spec.dim());
    for _ in 0..horizon {
        spec.draw(&mut rng, pick.as_ref(), &mut buf);
        out.push(buf.clone());
    }
    Ok(out)
}

/// Stand-in for the data-generating distribution.
///
/// In one dimension the points are the quantiles at `(i + ½)/n`, which sit
/// much closer to the true law in `W₁` than `n` random draws. Otherwise they
/// are i.i.d. draws from a seed unrelated to the learner's.
pub fn holdout_sample(spec: &StreamSpec, size: usize) -> Result<SampleBuffer> {
    spec.validate()?;
    if size == 0 {
        return Err(Error::Config("hold-out size must be positive".into()));
    }
    if spec.dim() == 1 {
        let rows = (0..size).map(|i| [spec.quantile((i as f64 + 0.5) / size as f64)]);
        return SampleBuffer::from_rows(1, rows);
    }
    let seed = spec.seed ^ 0x9e37_79b9_7f4a_7c15;
    SampleBuffer::from_rows(spec.dim(), generate_stream(spec, seed, size)?)
}

/// Approximate `W₁` between the hold-out measure and the stream law, by
/// comparison with a quantile grid twenty times finer. One dimension only.
pub fn holdout_w1(spec: &StreamSpec, holdout: &SampleBuffer) -> Result<Option<f64>> {
    if spec.dim() != 1 || holdout.dim() != 1 {
        return Ok(None);
    }
    let n = 20 * holdout.len();
    let fine: Vec<f64> = (0..n).map(|i| spec.quantile((i as f64 + 0.5) / n as f64)).collect();
    let fine = DiscreteDistribution::uniform(1, fine)?;
    Ok(Some(w1_sorted(&holdout.empirical()?, &fine)?))
}
