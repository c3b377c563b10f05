use rand::Rng;

use crate::error::{Error, Result};
use crate::increments::{IncrementDistribution, LatticePoint};
use crate::pmf::LatticePmf;
use crate::urn::DEFAULT_MAX_CELLS;

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Truncated law of `W = X_1 + … + X_N`, `N ~ Poisson(1)`.
#[derive(Debug, Clone)]
pub struct CompoundPoisson {
    /// Sub-probability pmf `Σ_{k≤K} e^{-1}/k! p^{*k}`.
    pub pmf: LatticePmf,
    /// `P(N > K)`, the mass left out.
    pub deficit: f64,
    /// Largest `k` retained.
    pub terms: u64,
}

/// `P(N > k)` for `N ~ Poisson(1)`, summed from the tail terms.
fn poisson_one_tail(k: u64) -> f64 {
    let mut term = INV_E;
    for j in 1..=k + 1 {
        term /= j as f64;
    }
    let mut tail = 0.0;
    let mut j = k + 1;
    while term > 0.0 && term > 1e-30 * tail {
        tail += term;
        j += 1;
        term /= j as f64;
    }
    tail
}

/// Exact compound-Poisson pmf truncated at the first `K` with `P(N > K) < mass_tolerance`.
pub fn compound_poisson_pmf(dist: &IncrementDistribution, mass_tolerance: f64) -> Result<CompoundPoisson> {
    if !(mass_tolerance > 0.0 && mass_tolerance <= 1e-6) {
        return Err(Error::InvalidArgument(format!(
            "mass tolerance {mass_tolerance} outside (0, 1e-6]"
        )));
    }
    let mut terms = 0u64;
    while poisson_one_tail(terms) >= mass_tolerance {
        terms += 1;
    }
    let step = LatticePmf::from_points(dist.dim(), dist.atoms())?;
    let mut power = LatticePmf::delta0(dist.dim());
    let mut weight = INV_E;
    let mut total = power.scaled(weight);
    for k in 1..=terms {
        power = power.convolve(&step, DEFAULT_MAX_CELLS)?;
        weight /= k as f64;
        total = power.scaled_add(weight, &total);
    }
    total.trim();
    Ok(CompoundPoisson {
        pmf: total,
        deficit: poisson_one_tail(terms),
        terms,
    })
}

/// `N ~ Poisson(1)` by sequential inversion from `k = 0`.
pub fn sample_poisson_one<R: Rng + ?Sized>(rng: &mut R) -> u64 {
    let u: f64 = rng.random();
    let mut k = 0u64;
    let mut p = INV_E;
    let mut cdf = p;
    while u >= cdf && k < 200 {
        k += 1;
        p /= k as f64;
        cdf += p;
    }
    k
}

/// One draw of `W`.
pub fn compound_poisson_sample<R: Rng + ?Sized>(dist: &IncrementDistribution, rng: &mut R) -> LatticePoint {
    let n = sample_poisson_one(rng);
    let mut w = LatticePoint::origin(dist.dim());
    for _ in 0..n {
        w.add_assign(dist.sample(rng));
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::Preset;
    use crate::mc::stream_rng;

    #[test]
    fn inv_e_constant() {
        assert_eq!(INV_E, (-1f64).exp());
    }

    #[test]
    fn deterministic_walk_gives_poisson() {
        let det = Preset::Det1d.distribution();
        let cp = compound_poisson_pmf(&det, 1e-12).unwrap();
        let mut fact = 1.0;
        for k in 0..=cp.terms {
            if k > 0 {
                fact *= k as f64;
            }
            let m = cp.pmf.mass_at(&LatticePoint(vec![k as i64]));
            assert!((m - INV_E / fact).abs() < 1e-15, "k={k}");
        }
        assert!(cp.deficit < 1e-12);
        assert!(cp.pmf.total_mass() >= 1.0 - 1e-12);
    }

    #[test]
    fn ssrw_mass_at_zero_matches_series() {
        let ssrw = Preset::Ssrw1d.distribution();
        let cp = compound_poisson_pmf(&ssrw, 1e-12).unwrap();
        // P(W = 0) = e^{-1} Σ_m binom(2m, m) / (4^m (2m)!)
        let mut series = 0.0;
        let mut binom = 1.0;
        let mut fact2m = 1.0;
        for m in 0..10u32 {
            if m > 0 {
                let mm = m as f64;
                binom *= (2.0 * mm) * (2.0 * mm - 1.0) / (mm * mm);
                fact2m *= (2.0 * mm) * (2.0 * mm - 1.0);
            }
            series += binom / 4f64.powi(m as i32) / fact2m;
        }
        let oracle = INV_E * series;
        let got = cp.pmf.mass_at(&LatticePoint(vec![0]));
        assert!((oracle - 0.465759).abs() < 1e-6);
        assert!((got - oracle).abs() < 1e-12);
    }

    #[test]
    fn tolerance_is_validated() {
        let det = Preset::Det1d.distribution();
        assert!(compound_poisson_pmf(&det, 0.0).is_err());
        assert!(compound_poisson_pmf(&det, 1e-3).is_err());
        let cp = compound_poisson_pmf(&det, 1e-6).unwrap();
        assert!(cp.pmf.total_mass() >= 1.0 - 1e-6);
    }

    #[test]
    fn poisson_sampler_mean() {
        let mut rng = stream_rng(11, 0);
        let n = 200_000;
        let s: u64 = (0..n).map(|_| sample_poisson_one(&mut rng)).sum();
        let mean = s as f64 / n as f64;
        assert!((mean - 1.0).abs() < 4.0 / (n as f64).sqrt());
    }
}
