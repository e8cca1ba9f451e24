//! Golden-section search for maximizing unimodal functions on an interval.

/// `φ = (√5 − 1) / 2`, the interval contraction ratio.
pub const PHI: f64 = 0.618_033_988_749_894_9;

const MAX_ITERS: usize = 512;

/// Which subinterval to keep when both probes return the same value.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Tie {
    KeepLeft,
    KeepRight,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoldenOutcome {
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
    /// Best probe seen over the whole search.
    pub best_arg: f64,
    pub best_value: f64,
    pub evals: usize,
}

/// Shrinks `[lo, hi]` until its length is at most `floor`.
///
/// Both interior probes are evaluated at least once, even when the initial
/// interval is already below the floor. One new probe is evaluated per step.
pub fn golden_max<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    mut lo: f64,
    mut hi: f64,
    floor: f64,
    tie: Tie,
) -> Result<GoldenOutcome, E> {
    let mut a = hi - PHI * (hi - lo);
    let mut b = lo + PHI * (hi - lo);
    let mut fa = f(a)?;
    let mut fb = f(b)?;
    let mut evals = 2;
    let (mut best_arg, mut best_value) = if fb > fa { (b, fb) } else { (a, fa) };

    let mut iters = 0;
    while hi - lo > floor && iters < MAX_ITERS {
        iters += 1;
        let keep_left = fa > fb || (fa == fb && tie == Tie::KeepLeft);
        let (x, fx) = if keep_left {
            hi = b;
            b = a;
            fb = fa;
            a = hi - PHI * (hi - lo);
            fa = f(a)?;
            (a, fa)
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + PHI * (hi - lo);
            fb = f(b)?;
            (b, fb)
        };
        evals += 1;
        if fx > best_value {
            best_arg = x;
            best_value = fx;
        }
    }
    Ok(GoldenOutcome { lo, hi, best_arg, best_value, evals })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(v: f64) -> Result<f64, Infallible> {
        Ok(v)
    }

    #[test]
    fn finds_quadratic_peak() {
        let out = golden_max(|x| ok(-(x - 0.3) * (x - 0.3)), 0.0, 1.0, 1e-8, Tie::KeepRight).unwrap();
        assert!((out.best_arg - 0.3).abs() < 1e-7);
        assert!(out.lo <= 0.3 && 0.3 <= out.hi);
        assert!(out.hi - out.lo <= 1e-8);
    }

    #[test]
    fn plateau_ties_follow_policy() {
        // Rises to 1 at x = 0.2 and stays flat: keeping left converges to the knee.
        let f = |x: f64| ok(x.min(0.2));
        let left = golden_max(f, 0.0, 10.0, 1e-6, Tie::KeepLeft).unwrap();
        assert!((left.lo - 0.2).abs() < 1e-5, "{left:?}");
        let right = golden_max(f, 0.0, 10.0, 1e-6, Tie::KeepRight).unwrap();
        assert!(right.lo > 5.0);
    }

    #[test]
    fn degenerate_interval_still_probes() {
        let mut calls = 0;
        let out = golden_max(
            |x| {
                calls += 1;
                ok(x)
            },
            0.0,
            0.0,
            1e-3,
            Tie::KeepLeft,
        )
        .unwrap();
        assert_eq!(calls, 2);
        assert_eq!(out.best_arg, 0.0);
    }

    #[test]
    fn linear_objective_hits_boundary() {
        let out = golden_max(|x| ok(2.0 * x), -1.0, 3.0, 1e-9, Tie::KeepRight).unwrap();
        assert!((out.best_arg - 3.0).abs() < 1e-8);
    }
}
