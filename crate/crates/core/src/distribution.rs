use crate::error::{Error, Result};

/// Finitely supported probability measure with atoms stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteDistribution {
    dim: usize,
    atoms: Vec<f64>,
    weights: Vec<f64>,
}

/// Weight sums may deviate from one by at most this much.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

impl DiscreteDistribution {
    pub fn new(dim: usize, atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::input("distribution dimension must be positive"));
        }
        if atoms.len() != weights.len() * dim {
            return Err(Error::input(format!(
                "{} coordinates do not form {} atoms of dimension {dim}",
                atoms.len(),
                weights.len()
            )));
        }
        if weights.is_empty() {
            return Err(Error::input("distribution needs at least one atom"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::input("weights must be finite and >= 0"));
        }
        if atoms.iter().any(|a| !a.is_finite()) {
            return Err(Error::input("atoms must be finite"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::input(format!("weights sum to {total}, expected 1")));
        }
        Ok(DiscreteDistribution { dim, atoms, weights })
    }

    /// Uniform weights over the given atoms.
    pub fn uniform(dim: usize, atoms: Vec<f64>) -> Result<Self> {
        if dim == 0 || !atoms.len().is_multiple_of(dim) || atoms.is_empty() {
            return Err(Error::input("atoms do not match the dimension"));
        }
        let n = atoms.len() / dim;
        DiscreteDistribution::new(dim, atoms, vec![1.0 / n as f64; n])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        &self.atoms[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms_flat(&self) -> &[f64] {
        &self.atoms
    }

    /// `(atom, weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.atoms.chunks_exact(self.dim).zip(self.weights.iter().copied())
    }

    /// `E[f(ξ)]`.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        self.iter().map(|(a, w)| w * f(a)).sum()
    }
}
