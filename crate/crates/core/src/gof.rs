//! Pearson chi-square goodness of fit of lattice counts against an exact pmf.

use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::increments::LatticePoint;
use crate::pmf::LatticePmf;

/// Bins are pooled until their expected count reaches this.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ChiSquareResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub bins: usize,
    /// Draws that landed where the reference pmf has no mass.
    pub outside: u64,
}

impl ChiSquareResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.outside == 0 && self.p_value > significance
    }
}

/// Pools support points in lexicographic order into bins with expected
/// count at least [`MIN_EXPECTED`]; the remainder joins the last bin.
pub fn chi_square_gof(
    counts: &BTreeMap<LatticePoint, u64>,
    expected: &LatticePmf,
) -> Result<ChiSquareResult> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::InvalidArgument("no observations".into()));
    }
    let n = total as f64;
    let mut bins: Vec<(f64, u64)> = Vec::new();
    let mut acc = (0.0, 0u64);
    let mut matched = 0u64;
    for (point, mass) in expected.iter() {
        let observed = counts.get(&LatticePoint(point)).copied().unwrap_or(0);
        matched += observed;
        acc.0 += mass * n;
        acc.1 += observed;
        if acc.0 >= MIN_EXPECTED {
            bins.push(acc);
            acc = (0.0, 0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0 {
        match bins.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => bins.push(acc),
        }
    }
    let outside = total - matched;
    if bins.len() < 2 {
        return Ok(ChiSquareResult {
            statistic: 0.0,
            dof: 0,
            p_value: if outside == 0 { 1.0 } else { 0.0 },
            bins: bins.len(),
            outside,
        });
    }
    let statistic: f64 = bins
        .iter()
        .map(|&(e, o)| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?
        .sf(statistic);
    Ok(ChiSquareResult {
        statistic,
        dof,
        p_value,
        bins: bins.len(),
        outside,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(pairs: &[(i64, u64)]) -> BTreeMap<LatticePoint, u64> {
        pairs.iter().map(|&(p, c)| (LatticePoint(vec![p]), c)).collect()
    }

    #[test]
    fn perfect_fit_has_p_value_one() {
        let pmf = LatticePmf::uniform_1d(0, 3).unwrap();
        let r = chi_square_gof(&counts(&[(0, 25), (1, 25), (2, 25), (3, 25)]), &pmf).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.dof, 3);
        assert!((r.p_value - 1.0).abs() < 1e-12);
        assert!(r.passes(1e-3));
    }

    #[test]
    fn gross_misfit_fails() {
        let pmf = LatticePmf::uniform_1d(0, 3).unwrap();
        let r = chi_square_gof(&counts(&[(0, 100), (1, 0), (2, 0), (3, 0)]), &pmf).unwrap();
        assert!(r.statistic > 200.0);
        assert!(!r.passes(1e-3));
    }

    #[test]
    fn draws_off_support_fail() {
        let pmf = LatticePmf::uniform_1d(0, 1).unwrap();
        let r = chi_square_gof(&counts(&[(0, 50), (1, 49), (7, 1)]), &pmf).unwrap();
        assert_eq!(r.outside, 1);
        assert!(!r.passes(1e-3));
    }

    #[test]
    fn small_bins_are_pooled() {
        let pmf = LatticePmf::uniform_1d(0, 9).unwrap();
        let c: Vec<(i64, u64)> = (0..10).map(|k| (k, 2)).collect();
        let r = chi_square_gof(&counts(&c), &pmf).unwrap();
        // 20 draws, expected 2 per point: pooled into bins of >= 5
        assert_eq!(r.bins, 3);
    }
}
