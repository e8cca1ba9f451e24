//! Small dense-vector helpers shared by the numerical modules.

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Scales `v` in place onto the closed ball of radius `r` centered at the origin.
#[inline]
pub(crate) fn clamp_to_ball(v: &mut [f64], r: f64) {
    let n = norm(v);
    if n > r {
        let s = if n > 0.0 { r / n } else { 0.0 };
        v.iter_mut().for_each(|x| *x *= s);
    }
}
