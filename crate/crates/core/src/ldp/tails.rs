use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::format::g12;
use crate::increments::IncrementDistribution;
use crate::mc;
use crate::pmf::LatticePmf;
use crate::urn::{exact_pmf, PmfSampler};

use super::gauss::log_product_pi;
use super::rate::{rate_function_numeric, Side};

/// Largest `n` the tilted sampler accepts (its jump-time table holds `n + 1` entries).
pub const MAX_TILTED_N: u64 = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub estimate: f64,
    pub std_err: f64,
    /// `std_err / estimate` (`+∞` for a zero estimate).
    pub rel_std_err: f64,
    pub lambda_star: f64,
}

/// Importance-sampling estimate of `P(Z_n ≥ a log n)` (upper side) or
/// `P(Z_n ≤ a log n)` (lower side) in dimension one.
///
/// Each summand law `m_j = (j/(j+1)) δ₀ + (1/(j+1)) p` is tilted by
/// `e^{λ* z} / m̂_j(λ*)` with `m̂_j(λ) = (j + e(λ))/(j+1)`, `λ*` the maximizer
/// of the rate function at `a`. The start `Z_0 ~ u0` is not tilted. The
/// likelihood ratio is `e^{−λ* S} Π_j m̂_j(λ*)` with `S` the tilted sum.
pub fn tilted_tail_mc(
    n: u64,
    a: f64,
    side: Side,
    dist: &IncrementDistribution,
    u0: &LatticePmf,
    samples: u64,
    seed: u64,
) -> Result<TailEstimate> {
    if dist.dim() != 1 || u0.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: dist.dim().max(u0.dim()),
        });
    }
    if !(2..=MAX_TILTED_N).contains(&n) {
        return Err(Error::InvalidArgument(format!(
            "tilted sampler needs 2 <= n <= {MAX_TILTED_N}, got {n}"
        )));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let rate = rate_function_numeric(&[a], dist)?;
    let lambda = match rate.lambda_star {
        Some(l) => l[0],
        None => {
            return Err(Error::InvalidArgument(format!(
                "tilting parameter diverges at a = {a}: the tail is empty"
            )))
        }
    };
    let e = dist.mgf(&[lambda])?;
    let tilted = dist.tilted(&[lambda])?;
    let log_norm = log_product_pi(e, n)? - ((n + 1) as f64).ln();

    // survival[b] = Σ_{k≤b} log(k/(k+e)): log P(no tilted jump in 1..=b)
    let mut survival = Vec::with_capacity(n as usize + 1);
    survival.push(0.0);
    let mut acc = 0.0;
    for k in 1..=n {
        acc += (-e / (k as f64 + e)).ln_1p();
        survival.push(acc);
    }
    let threshold = a * (n as f64).ln();
    let start = PmfSampler::new(u0);

    let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> f64 {
        let z0 = start.sample(rng).0[0];
        let mut sum = 0i64;
        let mut pos = 0usize;
        loop {
            let u: f64 = rng.random();
            let target = survival[pos] + u.ln();
            // first b > pos with survival[b] < target
            let b = pos + 1 + survival[pos + 1..].partition_point(|&s| s >= target);
            if b > n as usize {
                break;
            }
            sum += tilted.sample(rng).0[0];
            pos = b;
        }
        let z = (z0 + sum) as f64;
        let hit = match side {
            Side::Upper => z >= threshold,
            Side::Lower => z <= threshold,
        };
        if hit {
            (log_norm - lambda * sum as f64).exp()
        } else {
            0.0
        }
    };
    let weights = mc::parallel_values(samples, seed, draw);
    let count = weights.len() as f64;
    let mean = weights.iter().sum::<f64>() / count;
    let var = weights.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (count - 1.0);
    let std_err = (var / count).sqrt();
    Ok(TailEstimate {
        estimate: mean,
        std_err,
        rel_std_err: if mean > 0.0 { std_err / mean } else { f64::INFINITY },
        lambda_star: lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailMethod {
    Exact,
    Tilted,
}

/// One `n` of a tail-exponent report.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRecord {
    pub n: u64,
    pub method: TailMethod,
    pub tail_prob: f64,
    pub std_err: f64,
    /// `−log P / log n`, `+∞` for a zero probability.
    pub exponent: f64,
    /// `I(μ ± ε)`, the limit of the exponent.
    pub target_i: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct TailReportOptions {
    pub side: Side,
    /// Largest `n` served by the exact pmf.
    pub exact_limit: u64,
    /// Samples and seed for `n` beyond `exact_limit`.
    pub monte_carlo: Option<(u64, u64)>,
}

impl Default for TailReportOptions {
    fn default() -> Self {
        Self {
            side: Side::Upper,
            exact_limit: 100_000,
            monte_carlo: None,
        }
    }
}

/// Measured exponents of `P(Z_n / log n ≥ μ + ε)` (or `≤ μ − ε`) against `I(μ ± ε)`.
pub fn tail_exponent_report(
    ns: &[u64],
    eps: f64,
    dist: &IncrementDistribution,
    u0: &LatticePmf,
    options: TailReportOptions,
) -> Result<Vec<TailRecord>> {
    if dist.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: dist.dim(),
        });
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {eps}")));
    }
    let mu = dist.mean()[0];
    let a = match options.side {
        Side::Upper => mu + eps,
        Side::Lower => mu - eps,
    };
    let target_i = rate_function_numeric(&[a], dist)?.value;
    let mut records = Vec::with_capacity(ns.len());
    for &n in ns {
        if n < 2 {
            return Err(Error::InvalidArgument("tail report needs n >= 2".into()));
        }
        let log_n = (n as f64).ln();
        let (method, prob, err) = if n <= options.exact_limit {
            let pmf = exact_pmf(n, u0, dist)?;
            let p = match options.side {
                Side::Upper => pmf.upper_tail(a * log_n),
                Side::Lower => pmf.lower_tail(a * log_n),
            };
            (TailMethod::Exact, p, 0.0)
        } else {
            let (samples, seed) = options.monte_carlo.ok_or_else(|| {
                Error::InvalidArgument(format!(
                    "n = {n} exceeds the exact limit and no Monte Carlo samples/seed were given"
                ))
            })?;
            let est = tilted_tail_mc(n, a, options.side, dist, u0, samples, seed)?;
            (TailMethod::Tilted, est.estimate, est.std_err)
        };
        let exponent = if prob > 0.0 { -prob.ln() / log_n } else { f64::INFINITY };
        records.push(TailRecord {
            n,
            method,
            tail_prob: prob,
            std_err: err,
            exponent,
            target_i,
        });
    }
    Ok(records)
}

/// CSV `n,tail_prob,std_err,exponent,target_I`.
pub fn tail_records_csv(records: &[TailRecord]) -> String {
    let mut out = String::from("n,tail_prob,std_err,exponent,target_I\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.n,
            g12(r.tail_prob),
            g12(r.std_err),
            g12(r.exponent),
            g12(r.target_i)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::Preset;

    #[test]
    fn untilted_at_the_mean_is_plain_monte_carlo() {
        let ssrw = Preset::Ssrw1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let est = tilted_tail_mc(200, 0.0, Side::Upper, &ssrw, &u0, 40_000, 5).unwrap();
        assert_eq!(est.lambda_star, 0.0);
        let exact = exact_pmf(200, &u0, &ssrw).unwrap().upper_tail(0.0);
        // P(Z ≥ 0) = 1/2 + P(Z = 0)/2 for a symmetric law
        assert!(exact > 0.5);
        assert!((est.estimate - exact).abs() < 4.0 * est.std_err);
    }

    #[test]
    fn tilted_matches_exact_small_n() {
        let det = Preset::Det1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let n = 500u64;
        let a = 2.0;
        let exact = exact_pmf(n, &u0, &det).unwrap().upper_tail(a * (n as f64).ln());
        let est = tilted_tail_mc(n, a, Side::Upper, &det, &u0, 20_000, 9).unwrap();
        assert!((est.estimate - exact).abs() < 3.0 * est.std_err, "{est:?} vs {exact}");
        assert!(est.rel_std_err < 0.05);
    }

    #[test]
    fn lower_tail_via_negative_tilt() {
        let ssrw = Preset::Ssrw1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let n = 1000u64;
        let exact = exact_pmf(n, &u0, &ssrw).unwrap().lower_tail(-(n as f64).ln());
        let est = tilted_tail_mc(n, -1.0, Side::Lower, &ssrw, &u0, 20_000, 3).unwrap();
        assert!(est.lambda_star < 0.0);
        assert!((est.estimate - exact).abs() < 3.0 * est.std_err);
    }

    #[test]
    fn divergent_tilt_is_an_error() {
        let det = Preset::Det1d.distribution();
        let u0 = LatticePmf::delta0(1);
        assert!(tilted_tail_mc(100, -0.5, Side::Lower, &det, &u0, 100, 1).is_err());
    }

    #[test]
    fn report_targets() {
        let ssrw = Preset::Ssrw1d.distribution();
        let det = Preset::Det1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let r = tail_exponent_report(&[100], 1.0, &ssrw, &u0, TailReportOptions::default()).unwrap();
        assert!((r[0].target_i - 0.467160).abs() < 1e-6);
        let r = tail_exponent_report(&[100], 1.0, &det, &u0, TailReportOptions::default()).unwrap();
        assert!((r[0].target_i - 0.386294).abs() < 1e-6);
        assert_eq!(r[0].method, TailMethod::Exact);
        let err = tail_exponent_report(
            &[200],
            1.0,
            &det,
            &u0,
            TailReportOptions {
                exact_limit: 100,
                ..Default::default()
            },
        );
        assert!(err.is_err());
    }

    #[test]
    fn empty_tail_reports_infinite_exponent() {
        // det walk: Z_n ≤ n, so Z_n ≥ (1+ε) log n... is possible; use the lower tail at 1 − ε < 0
        let det = Preset::Det1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let r = tail_exponent_report(
            &[50],
            1.5,
            &det,
            &u0,
            TailReportOptions {
                side: Side::Lower,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r[0].tail_prob, 0.0);
        assert_eq!(r[0].exponent, f64::INFINITY);
        assert_eq!(r[0].target_i, f64::INFINITY);
    }
}
