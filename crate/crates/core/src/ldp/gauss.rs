use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::g12;
use crate::increments::IncrementDistribution;
use crate::numerics::{ln_gamma, CompensatedSum};
use crate::pmf::LatticePmf;

/// `log Π_n(z) = Σ_{j=1}^n log(1 + z/j)`, summed in ascending `j`.
///
/// `Π_n(1) = n + 1` is returned in closed form.
pub fn log_product_pi(z: f64, n: u64) -> Result<f64> {
    if !(z > -1.0) || !z.is_finite() {
        return Err(Error::InvalidArgument(format!("Pi_n(z) needs z > -1, got {z}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("Pi_n needs n >= 1".into()));
    }
    if z == 0.0 {
        return Ok(0.0);
    }
    if z == 1.0 {
        return Ok(((n + 1) as f64).ln());
    }
    Ok((1..=n)
        .map(|j| (z / j as f64).ln_1p())
        .collect::<CompensatedSum>()
        .value())
}

/// `Π_n(z) Γ(z+1) / n^z`, which tends to 1.
pub fn gauss_ratio(z: f64, n: u64) -> Result<f64> {
    let log_pi = log_product_pi(z, n)?;
    if z == 0.0 {
        return Ok(1.0);
    }
    Ok((log_pi + ln_gamma(z + 1.0) - z * (n as f64).ln()).exp())
}

/// `Λ_n(λ) = (log Π_n(e(λ)) − log(n+1)) / log n` for `U_0 = δ₀`.
pub fn lambda_n(lambda: &[f64], n: u64, dist: &IncrementDistribution) -> Result<f64> {
    if n < 2 {
        return Err(Error::InvalidArgument("Lambda_n needs n >= 2".into()));
    }
    let e = dist.mgf(lambda)?;
    Ok((log_product_pi(e, n)? - ((n + 1) as f64).ln()) / (n as f64).ln())
}

/// `Λ_n` for a general start, adding `log E[e^{<λ,Z_0>}] / log n`.
pub fn lambda_n_with_start(
    lambda: &[f64],
    n: u64,
    dist: &IncrementDistribution,
    u0: &LatticePmf,
) -> Result<f64> {
    if u0.dim() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: dist.dim(),
            got: u0.dim(),
        });
    }
    let start: f64 = u0
        .iter()
        .map(|(p, m)| {
            m * p
                .iter()
                .zip(lambda)
                .map(|(&u, l)| u as f64 * l)
                .sum::<f64>()
                .exp()
        })
        .sum();
    Ok(lambda_n(lambda, n, dist)? + start.ln() / (n as f64).ln())
}

/// One row of the `lambda,Lambda_n,limit,gap` table.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaRow {
    pub lambda: Vec<f64>,
    pub n: u64,
    pub lambda_n: f64,
    /// `e(λ) − 1`
    pub limit: f64,
    /// `|Λ_n − limit|`
    pub gap: f64,
}

impl LambdaRow {
    pub fn compute(lambda: &[f64], n: u64, dist: &IncrementDistribution) -> Result<Self> {
        let value = lambda_n(lambda, n, dist)?;
        let limit = dist.mgf(lambda)? - 1.0;
        Ok(Self {
            lambda: lambda.to_vec(),
            n,
            lambda_n: value,
            limit,
            gap: (value - limit).abs(),
        })
    }
}

/// CSV `lambda,Lambda_n,limit,gap`; vector `λ` coordinates are joined by `;`.
pub fn lambda_n_csv(rows: &[LambdaRow]) -> String {
    let mut out = String::from("lambda,Lambda_n,limit,gap\n");
    for r in rows {
        let lam: Vec<String> = r.lambda.iter().map(|&l| g12(l)).collect();
        let _ = writeln!(
            out,
            "{},{},{},{}",
            lam.join(";"),
            g12(r.lambda_n),
            g12(r.limit),
            g12(r.gap)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::Preset;

    #[test]
    fn product_closed_forms() {
        assert!((log_product_pi(1.0, 3).unwrap() - 4f64.ln()).abs() < 1e-15);
        assert_eq!(log_product_pi(0.0, 1000).unwrap(), 0.0);
        // Pi_n(2) = (n+1)(n+2)/2
        let n = 10_000u64;
        let exact = (((n + 1) * (n + 2)) as f64 / 2.0).ln();
        assert!((log_product_pi(2.0, n).unwrap() - exact).abs() < 1e-12);
        let ratio = (n + 1) as f64 * (n + 2) as f64 / (2.0 * (n * n) as f64) * 2.0;
        assert!((ratio - 1.0).abs() < 1e-3);
        assert!((gauss_ratio(2.0, n).unwrap() - ratio).abs() < 1e-10);
        assert!(log_product_pi(-1.0, 5).is_err());
        assert!(log_product_pi(-1.5, 5).is_err());
    }

    #[test]
    fn gauss_ratio_values() {
        assert!((gauss_ratio(1.0, 1000).unwrap() - 1.001).abs() < 1e-12);
        assert_eq!(gauss_ratio(0.0, 17).unwrap(), 1.0);
        let gaps: Vec<f64> = [100u64, 1000, 10_000]
            .iter()
            .map(|&n| (gauss_ratio(1.5, n).unwrap() - 1.0).abs())
            .collect();
        assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2] && gaps[2] < 1e-2);
    }

    #[test]
    fn lambda_n_at_zero_is_exactly_zero() {
        for preset in [Preset::Det1d, Preset::Ssrw1d] {
            let dist = preset.distribution();
            for n in [2u64, 10, 12_345, 1_000_000] {
                assert_eq!(lambda_n(&[0.0], n, &dist).unwrap(), 0.0);
            }
        }
        let ne = Preset::Ne2d.distribution();
        assert_eq!(lambda_n(&[0.0, 0.0], 100, &ne).unwrap(), 0.0);
        assert!(lambda_n(&[0.0], 1, &Preset::Det1d.distribution()).is_err());
    }

    #[test]
    fn deterministic_walk_approaches_e_minus_one() {
        let det = Preset::Det1d.distribution();
        let v = lambda_n(&[1.0], 1_000_000, &det).unwrap();
        // first-order Gauss correction: Λ_n ≈ (e−1) − (log Γ(e+1) + log(1+1/n)) / log n
        let n = 1_000_000f64;
        let e = std::f64::consts::E;
        let predicted = (e - 1.0) - (ln_gamma(e + 1.0) + (1.0 + 1.0 / n).ln()) / n.ln();
        assert!((v - predicted).abs() < 1e-4);
    }

    #[test]
    fn start_correction_vanishes_for_delta0() {
        let ssrw = Preset::Ssrw1d.distribution();
        let a = lambda_n(&[0.7], 500, &ssrw).unwrap();
        let b = lambda_n_with_start(&[0.7], 500, &ssrw, &LatticePmf::delta0(1)).unwrap();
        assert_eq!(a, b);
        let u = LatticePmf::uniform_1d(-2, 2).unwrap();
        let c = lambda_n_with_start(&[0.7], 500, &ssrw, &u).unwrap();
        assert!(c > a);
    }

    #[test]
    fn csv_rows() {
        let det = Preset::Det1d.distribution();
        let row = LambdaRow::compute(&[0.5], 1000, &det).unwrap();
        let csv = lambda_n_csv(&[row]);
        assert!(csv.starts_with("lambda,Lambda_n,limit,gap\n0.5,"));
    }
}
