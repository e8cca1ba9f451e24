//! Atom files: one atom per line, whitespace-separated coordinates and an
//! optional trailing weight. Blank lines and lines starting with `#` are
//! skipped.

use std::path::Path;

use crate::distribution::{DiscreteDistribution, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};

fn parse_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| Error::input(format!("line {}: {tok:?}: {e}", no + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::input(format!("line {}: {} columns, expected {first}", no + 1, row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::input("atom file holds no atoms"));
    }
    Ok(rows)
}

/// Parses atom text.
///
/// With `dim` given, a row of `dim + 1` columns carries a weight. Without it,
/// the last column is read as weights when there are at least two columns and
/// that column is nonnegative and sums to one.
pub fn parse_atoms(text: &str, dim: Option<usize>) -> Result<DiscreteDistribution> {
    let rows = parse_rows(text)?;
    let cols = rows[0].len();
    let weighted = match dim {
        Some(d) if cols == d => false,
        Some(d) if cols == d + 1 => true,
        Some(d) => return Err(Error::input(format!("atoms have {cols} columns, expected {d} or {}", d + 1))),
        None => {
            cols >= 2
                && rows.iter().all(|r| r[cols - 1] >= 0.0)
                && (rows.iter().map(|r| r[cols - 1]).sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL
        }
    };
    if weighted {
        let d = cols - 1;
        let atoms = rows.iter().flat_map(|r| r[..d].iter().copied()).collect();
        let weights = rows.iter().map(|r| r[d]).collect();
        DiscreteDistribution::new(d, atoms, weights)
    } else {
        DiscreteDistribution::uniform(cols, rows.concat())
    }
}

pub fn read_atoms(path: &Path, dim: Option<usize>) -> Result<DiscreteDistribution> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::input(format!("cannot read {}: {e}", path.display())))?;
    parse_atoms(&text, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_are_detected() {
        let d = parse_atoms("# pts\n0 1 0.25\n\n2 3 0.75\n", None).unwrap();
        assert_eq!(d.dim(), 2);
        assert_eq!(d.weights(), &[0.25, 0.75]);
        let u = parse_atoms("0 1\n2 3\n", None).unwrap();
        assert_eq!(u.dim(), 2);
        assert_eq!(u.weights(), &[0.5, 0.5]);
        let forced = parse_atoms("0 0.5\n2 0.5\n", Some(2)).unwrap();
        assert_eq!(forced.weights(), &[0.5, 0.5]);
        assert_eq!(forced.dim(), 2);
    }

    #[test]
    fn ragged_or_empty_files_fail() {
        assert!(parse_atoms("0 1\n2\n", None).is_err());
        assert!(parse_atoms("# nothing\n", None).is_err());
        assert!(parse_atoms("0 x\n", None).is_err());
        assert!(parse_atoms("0 1 2\n", Some(1)).is_err());
    }
}
