//! Exhaustive grid search over mixture weights, budget splits and
//! displacements.
//!
//! Displacements live on a grid of rings `‖q‖ = l·h`, `l = 0..N` (two points
//! per ring in one dimension, `angles` points per ring in two), so a budget
//! `β_l = l·h` admits exactly the points on rings `0..=l`. For every mixture
//! weight `α` on the grid, a prefix maximum over rings gives the best value of
//! `α·ℓ_k(ξ̂ − q/α)` under each budget level. Pair values then follow from a
//! max-plus convolution of two such tables, and the master problem from a
//! dynamic program over samples.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::model::{LossAt, SampleBuffer};

/// Grid resolutions. Every count must be at least 10.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Intervals on `α ∈ [0, 1]`.
    pub alpha: usize,
    /// Intervals on the budget range `[0, b_max]`; also the ring count.
    pub budget: usize,
    /// Directions per ring in two dimensions.
    pub angles: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { alpha: 200, budget: 200, angles: 200 }
    }
}

impl GridSpec {
    pub fn new(alpha: usize, budget: usize, angles: usize) -> Result<Self> {
        let g = GridSpec { alpha, budget, angles };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha < 10 || self.budget < 10 || self.angles < 10 {
            return Err(Error::Config(format!("grid resolutions must be at least 10, got {self:?}")));
        }
        Ok(())
    }

    /// Points a `dim`-dimensional displacement grid would hold.
    fn q_points(&self, dim: usize) -> usize {
        1 + self.budget * if dim == 1 { 2 } else { self.angles }
    }
}

/// A grid maximum together with a bound on how far below the continuous
/// maximum it may sit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BruteForce {
    pub value: f64,
    /// `2·lip·(h + h_q) + h_α·spread`: budget rounding `h` and angular rounding
    /// `h_q` per mixture component, plus the cost of rounding the weight of
    /// the farther atom down to the `α` grid.
    pub resolution: f64,
}

const MAX_DIM: usize = 2;

fn guard_dim(m: usize) -> Result<()> {
    if m > MAX_DIM {
        return Err(Error::Scale(format!("grid search supports sample dimension <= {MAX_DIM}, got {m}")));
    }
    Ok(())
}

struct Rings {
    /// Flat displacement coordinates.
    points: Vec<f64>,
    /// Ring index of each point.
    ring: Vec<usize>,
    dim: usize,
    h: f64,
    h_q: f64,
}

fn rings(dim: usize, h: f64, grid: &GridSpec) -> Rings {
    let mut points = vec![0.0; dim];
    let mut ring = vec![0];
    for l in 1..=grid.budget {
        let r = l as f64 * h;
        if dim == 1 {
            points.extend_from_slice(&[-r, r]);
            ring.extend_from_slice(&[l, l]);
        } else {
            for j in 0..grid.angles {
                let th = std::f64::consts::TAU * j as f64 / grid.angles as f64;
                points.extend_from_slice(&[r * th.cos(), r * th.sin()]);
                ring.push(l);
            }
        }
    }
    let h_q = if dim == 1 { 0.0 } else { grid.budget as f64 * h * std::f64::consts::PI / grid.angles as f64 };
    Rings { points, ring, dim, h, h_q }
}

/// Per-piece tables `table[a][l] = max_{ring(q) ≤ l} α_a·ℓ_k(ξ̂ − q/α_a)`,
/// with `table[0][·] = 0` for the vanishing component.
struct Tables {
    per_piece: Vec<Vec<Vec<f64>>>,
    spread: f64,
}

fn build_tables(loss: &LossAt<'_>, xi_hat: &[f64], rings: &Rings, grid: &GridSpec) -> Tables {
    let kk = loss.num_pieces();
    let n = grid.budget;
    let na = grid.alpha;
    let mut per_piece = vec![vec![vec![f64::NEG_INFINITY; n + 1]; na + 1]; kk];
    let mut hi = f64::NEG_INFINITY;
    let mut atom = vec![0.0; rings.dim];
    for a in 0..=na {
        if a == 0 {
            for t in per_piece.iter_mut() {
                t[0].iter_mut().for_each(|v| *v = 0.0);
            }
            continue;
        }
        let alpha = a as f64 / na as f64;
        for (q, &l) in rings.points.chunks_exact(rings.dim).zip(&rings.ring) {
            for ((z, x), qi) in atom.iter_mut().zip(xi_hat).zip(q) {
                *z = x - qi / alpha;
            }
            for (k, t) in per_piece.iter_mut().enumerate() {
                let raw = loss.piece_value(k, &atom);
                hi = hi.max(raw);
                let v = alpha * raw;
                if v > t[a][l] {
                    t[a][l] = v;
                }
            }
        }
        for t in per_piece.iter_mut() {
            for l in 1..=n {
                if t[a][l - 1] > t[a][l] {
                    t[a][l] = t[a][l - 1];
                }
            }
        }
    }
    let lo = (0..kk).map(|k| loss.piece_value(k, xi_hat)).fold(f64::INFINITY, f64::min);
    Tables { per_piece, spread: (hi - lo).max(0.0) }
}

/// `out[L] = max_{a, l ≤ L} t1[a][l] + t2[N_α − a][L − l]`.
fn pair_table(t1: &[Vec<f64>], t2: &[Vec<f64>], n: usize) -> Vec<f64> {
    let na = t1.len() - 1;
    let mut out = vec![f64::NEG_INFINITY; n + 1];
    for a in 0..=na {
        let (r1, r2) = (&t1[a], &t2[na - a]);
        for (cap, o) in out.iter_mut().enumerate() {
            let mut best = *o;
            for l in 0..=cap {
                let v = r1[l] + r2[cap - l];
                if v > best {
                    best = v;
                }
            }
            *o = best;
        }
    }
    out
}

/// `S[L]` for every budget level: maximum over all pairs, or the single piece.
fn utility_table(tables: &Tables, n: usize, na: usize) -> Vec<f64> {
    let kk = tables.per_piece.len();
    if kk == 1 {
        return tables.per_piece[0][na].clone();
    }
    let mut s = vec![f64::NEG_INFINITY; n + 1];
    for k1 in 0..kk {
        for k2 in k1 + 1..kk {
            let p = pair_table(&tables.per_piece[k1], &tables.per_piece[k2], n);
            for (si, pi) in s.iter_mut().zip(p) {
                *si = si.max(pi);
            }
        }
    }
    s
}

fn resolution(lip: f64, rings: &Rings, grid: &GridSpec, spread: f64) -> f64 {
    2.0 * lip * (rings.h + rings.h_q) + spread / grid.alpha as f64
}

/// Grid maximum of the pair subproblem for `(k1, k2)` at budget `b`.
pub fn brute_force_pair(
    loss: &LossAt<'_>,
    xi_hat: &[f64],
    k1: usize,
    k2: usize,
    b: f64,
    grid: &GridSpec,
) -> Result<BruteForce> {
    let m = loss.sample_dim();
    check_dim("sample", xi_hat.len(), m)?;
    guard_dim(m)?;
    grid.validate()?;
    if !(k1 < k2 && k2 < loss.num_pieces()) {
        return Err(Error::input(format!("pair ({k1}, {k2}) must satisfy k1 < k2 < {}", loss.num_pieces())));
    }
    if !(b >= 0.0 && b.is_finite()) {
        return Err(Error::input(format!("budget must be finite and >= 0, got {b}")));
    }
    if b == 0.0 {
        let v = loss.piece_value(k1, xi_hat).max(loss.piece_value(k2, xi_hat));
        return Ok(BruteForce { value: v, resolution: 0.0 });
    }
    let rg = rings(m, b / grid.budget as f64, grid);
    let tables = build_tables(loss, xi_hat, &rg, grid);
    let p = pair_table(&tables.per_piece[k1], &tables.per_piece[k2], grid.budget);
    Ok(BruteForce { value: p[grid.budget], resolution: resolution(loss.lip_xi(), &rg, grid, tables.spread) })
}

/// Grid maximum of `(1/t) Σ_i S_i(b_i)` subject to `Σ_i b_i ≤ ρt`.
pub fn brute_force_master(loss: &LossAt<'_>, samples: &SampleBuffer, rho: f64, grid: &GridSpec) -> Result<BruteForce> {
    let m = loss.sample_dim();
    check_dim("sample buffer", samples.dim(), m)?;
    guard_dim(m)?;
    grid.validate()?;
    let t = samples.len();
    if t == 0 {
        return Err(Error::input("at least one sample is required"));
    }
    if t > 4 || loss.num_pieces() > 3 {
        return Err(Error::Scale(format!(
            "grid master problem supports t <= 4 and K <= 3, got t = {t}, K = {}",
            loss.num_pieces()
        )));
    }
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::input(format!("radius must be finite and >= 0, got {rho}")));
    }
    if rho == 0.0 {
        let v = samples.iter().map(|xi| loss.value(xi)).sum::<f64>() / t as f64;
        return Ok(BruteForce { value: v, resolution: 0.0 });
    }
    let n = grid.budget;
    let rg = rings(m, rho * t as f64 / n as f64, grid);
    debug_assert_eq!(rg.ring.len(), grid.q_points(m));
    let mut best = vec![0.0; n + 1];
    let mut spread: f64 = 0.0;
    for xi in samples.iter() {
        let tables = build_tables(loss, xi, &rg, grid);
        spread = spread.max(tables.spread);
        let s = utility_table(&tables, n, grid.alpha);
        let mut next = vec![f64::NEG_INFINITY; n + 1];
        for (cap, o) in next.iter_mut().enumerate() {
            for l in 0..=cap {
                let v = best[cap - l] + s[l];
                if v > *o {
                    *o = v;
                }
            }
        }
        best = next;
    }
    Ok(BruteForce { value: best[n] / t as f64, resolution: resolution(loss.lip_xi(), &rg, grid, spread) })
}
