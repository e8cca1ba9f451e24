//! Independent validators for the worst-case oracle: exhaustive grid search,
//! exact discrete 1-Wasserstein distances, finite-difference gradient checks
//! and an offline estimate of the primal suboptimality gap.
//!
//! Nothing here shares code with the golden-section machinery it checks.

mod brute;
mod gap;
mod w1;

pub use brute::{brute_force_master, brute_force_pair, BruteForce, GridSpec};
pub use gap::{GapEstimate, GapEstimator};
pub use w1::{discrete_w1, w1_flow, w1_sorted};

use crate::error::{check_dim, Error, Result};
use crate::model::{LossPiece, Smoothness};

/// Largest deviation between central differences of `ℓ_k(x, ·)` at `ξ` and
/// the reported supergradient, over all coordinates.
pub fn finite_diff_check(piece: &dyn LossPiece, x: &[f64], xi: &[f64], h: f64) -> Result<f64> {
    check_dim("decision", x.len(), piece.decision_dim())?;
    check_dim("sample", xi.len(), piece.sample_dim())?;
    if piece.smoothness() != Smoothness::Smooth {
        return Err(Error::input("finite differences only apply to smooth pieces"));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::input(format!("step must be positive, got {h}")));
    }
    let mut g = vec![0.0; xi.len()];
    piece.supergrad_xi(x, xi, &mut g);
    let mut probe = xi.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..xi.len() {
        probe[i] = xi[i] + h;
        let up = piece.value(x, &probe);
        probe[i] = xi[i] - h;
        let down = piece.value(x, &probe);
        probe[i] = xi[i];
        worst = worst.max(((up - down) / (2.0 * h) - g[i]).abs());
    }
    Ok(worst)
}
