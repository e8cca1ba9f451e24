//! Exact 1-Wasserstein distances between finitely supported measures.

use crate::distribution::{DiscreteDistribution, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};
use crate::vecops::dist;

/// Masses are rounded to integer multiples of `2^-40` before the flow solve.
const MASS_SCALE: f64 = (1u64 << 40) as f64;

fn check_pair(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<()> {
    if p.dim() != q.dim() {
        return Err(Error::input(format!("dimension mismatch: {} vs {}", p.dim(), q.dim())));
    }
    let (sp, sq): (f64, f64) = (p.weights().iter().sum(), q.weights().iter().sum());
    if (sp - sq).abs() > WEIGHT_SUM_TOL {
        return Err(Error::input(format!("total masses differ: {sp} vs {sq}")));
    }
    Ok(())
}

/// One-dimensional distance `∫ |F_P − F_Q|`.
pub fn w1_sorted(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_pair(p, q)?;
    if p.dim() != 1 {
        return Err(Error::input("sorted W1 needs one-dimensional atoms"));
    }
    let mut events: Vec<(f64, f64)> = p.iter().map(|(a, w)| (a[0], w)).chain(q.iter().map(|(a, w)| (a[0], -w))).collect();
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut diff = 0.0;
    let mut total = 0.0;
    for pair in events.windows(2) {
        diff += pair[0].1;
        total += diff.abs() * (pair[1].0 - pair[0].0);
    }
    Ok(total)
}

fn integer_masses(w: &[f64]) -> Vec<i64> {
    let total: f64 = w.iter().sum();
    let mut m: Vec<i64> = w.iter().map(|x| (x / total * MASS_SCALE).round() as i64).collect();
    let excess = m.iter().sum::<i64>() - MASS_SCALE as i64;
    let big = (0..m.len()).max_by(|&a, &b| m[a].cmp(&m[b])).unwrap_or(0);
    m[big] -= excess;
    m
}

/// Transportation problem in any dimension, solved by successive shortest
/// paths with Dijkstra on reduced costs.
pub fn w1_flow(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_pair(p, q)?;
    let (n, m) = (p.len(), q.len());
    let cost: Vec<f64> = (0..n).flat_map(|i| (0..m).map(move |j| dist(p.atom(i), q.atom(j)))).collect();
    let mut supply = integer_masses(p.weights());
    let mut demand = integer_masses(q.weights());
    let mut flow = vec![0i64; n * m];
    // Nodes 0..n are sources, n..n+m are sinks.
    let nodes = n + m;
    let mut pot = vec![0.0; nodes];
    let mut d = vec![f64::INFINITY; nodes];
    let mut prev = vec![usize::MAX; nodes];
    let mut done = vec![false; nodes];
    loop {
        d.iter_mut().for_each(|v| *v = f64::INFINITY);
        prev.iter_mut().for_each(|v| *v = usize::MAX);
        done.iter_mut().for_each(|v| *v = false);
        for i in 0..n {
            if supply[i] > 0 {
                d[i] = 0.0;
            }
        }
        let mut target = None;
        loop {
            let u = (0..nodes).filter(|&v| !done[v] && d[v].is_finite()).min_by(|&a, &b| d[a].total_cmp(&d[b]));
            let Some(u) = u else { break };
            done[u] = true;
            if u >= n && demand[u - n] > 0 {
                target = Some(u);
                break;
            }
            if u < n {
                for j in 0..m {
                    let v = n + j;
                    let rc = (cost[u * m + j] + pot[u] - pot[v]).max(0.0);
                    if !done[v] && d[u] + rc < d[v] {
                        d[v] = d[u] + rc;
                        prev[v] = u;
                    }
                }
            } else {
                let j = u - n;
                for i in 0..n {
                    if flow[i * m + j] > 0 {
                        let rc = (-cost[i * m + j] + pot[u] - pot[i]).max(0.0);
                        if !done[i] && d[u] + rc < d[i] {
                            d[i] = d[u] + rc;
                            prev[i] = u;
                        }
                    }
                }
            }
        }
        let Some(t) = target else { break };
        let dt = d[t];
        for v in 0..nodes {
            pot[v] += d[v].min(dt);
        }
        let mut amount = demand[t - n];
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u >= n {
                amount = amount.min(flow[v * m + (u - n)]);
            }
            v = u;
        }
        amount = amount.min(supply[v]);
        supply[v] -= amount;
        demand[t - n] -= amount;
        let mut v = t;
        while prev[v] != usize::MAX {
            let u = prev[v];
            if u < n {
                flow[u * m + (v - n)] += amount;
            } else {
                flow[v * m + (u - n)] -= amount;
            }
            v = u;
        }
    }
    if supply.iter().any(|&s| s != 0) || demand.iter().any(|&s| s != 0) {
        return Err(Error::Internal("transport flow did not route all mass".into()));
    }
    Ok(flow.iter().zip(&cost).map(|(&f, c)| f as f64 * c).sum::<f64>() / MASS_SCALE)
}

/// Sorted formula in one dimension, network flow otherwise.
pub fn discrete_w1(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    check_pair(p, q)?;
    if p.dim() == 1 {
        w1_sorted(p, q)
    } else {
        w1_flow(p, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, dim: usize, n: usize) -> DiscreteDistribution {
        let atoms = (0..n * dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = raw.iter().sum();
        DiscreteDistribution::new(dim, atoms, raw.iter().map(|w| w / s).collect()).unwrap()
    }

    #[test]
    fn point_masses() {
        let a = DiscreteDistribution::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        let b = DiscreteDistribution::new(2, vec![3.0, 4.0], vec![1.0]).unwrap();
        assert!((w1_flow(&a, &b).unwrap() - 5.0).abs() < 1e-12);
        let c = DiscreteDistribution::new(1, vec![0.0, 1.0], vec![0.5, 0.5]).unwrap();
        let d = DiscreteDistribution::new(1, vec![0.5], vec![1.0]).unwrap();
        assert!((w1_sorted(&c, &d).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sorted_and_flow_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let (n, m) = (rng.gen_range(1..30), rng.gen_range(1..30));
            let p = random(&mut rng, 1, n);
            let q = random(&mut rng, 1, m);
            let a = w1_sorted(&p, &q).unwrap();
            let b = w1_flow(&p, &q).unwrap();
            assert!((a - b).abs() <= 1e-8, "{a} {b}");
        }
    }

    #[test]
    fn metric_axioms() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random(&mut rng, 2, 12);
            let q = random(&mut rng, 2, 9);
            let r = random(&mut rng, 2, 15);
            assert!(w1_flow(&p, &p).unwrap().abs() < 1e-9);
            let pq = w1_flow(&p, &q).unwrap();
            assert!((pq - w1_flow(&q, &p).unwrap()).abs() < 1e-9);
            assert!(pq <= w1_flow(&p, &r).unwrap() + w1_flow(&r, &q).unwrap() + 1e-9);
        }
    }

    #[test]
    fn mismatches_are_rejected() {
        let a = DiscreteDistribution::new(1, vec![0.0], vec![1.0]).unwrap();
        let b = DiscreteDistribution::new(2, vec![0.0, 0.0], vec![1.0]).unwrap();
        assert!(discrete_w1(&a, &b).is_err());
    }
}
