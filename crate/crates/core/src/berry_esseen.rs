//! Berry-Esseen quantities for `Z_n` and exact distances to the normal law.
//!
//! With `U_0 = δ₀`, `Z_n` is a sum of the independent summands `I_j X_j`,
//! whose second and third central moments give `ρ₂`, `ρ₃` (dimension one)
//! and `Σ_n`, `ρ₂^(d)`, `ρ₃^(d)` (general dimension). The bound in dimension
//! one carries the explicit constant [`BE_CONSTANT`]; the other bounds have
//! unspecified constants and are reported as ratios.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::format::g12;
use crate::increments::IncrementDistribution;
use crate::mc;
use crate::numerics::{determinant, minor, spd_sqrt_inverse, std_normal_cdf, CompensatedSum, SquareMatrix};
use crate::pmf::LatticePmf;
use crate::urn::{exact_pmf, sample_z_repr, PmfSampler};

/// Constant of the one-dimensional bound.
pub const BE_CONSTANT: f64 = 2.75;
/// Points per axis of the refinement grid used in Monte Carlo mode.
pub const REFINE_GRID_POINTS: usize = 64;
/// Confidence level parameter of the DKW error bar.
pub const DKW_DELTA: f64 = 0.05;

/// `h_n = Σ_{j=1}^n 1/(j+1)`.
pub fn harmonic_tail(n: u64) -> f64 {
    (1..=n).rev().map(|j| 1.0 / (j + 1) as f64).collect::<CompensatedSum>().value()
}

/// `Σ_{j=1}^n 1/(j+1)²`.
fn inverse_square_tail(n: u64) -> f64 {
    (1..=n)
        .rev()
        .map(|j| {
            let k = (j + 1) as f64;
            1.0 / (k * k)
        })
        .collect::<CompensatedSum>()
        .value()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoMoments {
    pub rho2: f64,
    pub rho3: f64,
}

impl RhoMoments {
    /// `ρ₃ / (√n ρ₂^{3/2}) = nρ₃ / (nρ₂)^{3/2}`, the bound without its constant.
    pub fn normalized(&self, n: u64) -> f64 {
        self.rho3 / ((n as f64).sqrt() * self.rho2.powf(1.5))
    }
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    Ok(())
}

/// `ρ₂` and `ρ₃` in dimension one, with `σ² = E[X₁²]`.
pub fn rho_moments_1d(n: u64, dist: &IncrementDistribution) -> Result<RhoMoments> {
    check_n(n)?;
    if dist.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: dist.dim(),
        });
    }
    let mu = dist.mean()[0];
    let sigma2 = dist.second_moment()[(0, 0)];
    let nf = n as f64;
    let rho2 = (sigma2 * harmonic_tail(n) - mu * mu * inverse_square_tail(n)) / nf;

    let mut third = CompensatedSum::new();
    for j in (1..=n).rev() {
        let k = (j + 1) as f64;
        third.add(dist.abs_central_third(0, mu / k) / k);
        third.add(mu.abs().powi(3) * j as f64 / (k * k * k * k));
    }
    Ok(RhoMoments {
        rho2,
        rho3: third.value() / nf,
    })
}

/// `2.75 ρ₃ / (√n ρ₂^{3/2})`, of order `1/√(log n)`.
pub fn be_bound_1d(n: u64, dist: &IncrementDistribution) -> Result<f64> {
    let rho = rho_moments_1d(n, dist)?;
    if !(rho.rho2 > 0.0) {
        return Err(Error::Degenerate(format!("rho2 = {} at n = {n}", rho.rho2)));
    }
    Ok(BE_CONSTANT * rho.normalized(n))
}

/// `sup_x |P((Z − center)/scale ≤ x) − Φ(x)|` for a pmf on Z, taken exactly
/// over both sides of every jump.
pub fn kolmogorov_distance_1d(pmf: &LatticePmf, center: f64, scale: f64) -> Result<f64> {
    if pmf.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: pmf.dim(),
        });
    }
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::InvalidArgument(format!("scale {scale} must be positive")));
    }
    let total = pmf.total_mass();
    let mut cdf = 0.0;
    let mut worst: f64 = 0.0;
    for (point, mass) in pmf.iter() {
        let phi = std_normal_cdf((point[0] as f64 - center) / scale);
        worst = worst.max((cdf / total - phi).abs());
        cdf += mass;
        worst = worst.max((cdf / total - phi).abs());
    }
    Ok(worst.min(1.0))
}

/// `Σ_n = Σ_{j=1}^n (1/(j+1)) (Σ − M/(j+1)) = h_n Σ − (Σ_j 1/(j+1)²) M`.
pub fn sigma_n(n: u64, dist: &IncrementDistribution) -> SquareMatrix {
    dist.second_moment()
        .scale(harmonic_tail(n))
        .add_scaled(dist.mean_outer(), -inverse_square_tail(n))
}

/// `(Σ_n, Σ_n^{-1/2})`; fails when the increments are degenerate.
pub fn sigma_n_whitener(n: u64, dist: &IncrementDistribution) -> Result<(SquareMatrix, SquareMatrix)> {
    check_n(n)?;
    let s = sigma_n(n, dist);
    match spd_sqrt_inverse(&s) {
        Ok(w) => Ok((s, w)),
        Err(e) => Err(Error::Degenerate(format!("Sigma_n is not positive definite: {e}"))),
    }
}

/// `β_j(i)` for coordinate `coord` (0-based).
pub fn beta(j: u64, coord: usize, dist: &IncrementDistribution) -> f64 {
    let k = (j + 1) as f64;
    let mu = dist.mean()[coord];
    dist.abs_central_third(coord, mu / k) / k + j as f64 / (k * k * k * k) * mu.abs().powi(3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RhoMomentsD {
    pub rho2: f64,
    pub rho3: f64,
    /// `γ_n(i)`, one per coordinate.
    pub gammas: Vec<f64>,
}

impl RhoMomentsD {
    /// `ρ₃^(d) / (√n (ρ₂^(d))^{3/2})`.
    pub fn normalized(&self, n: u64) -> f64 {
        self.rho3 / ((n as f64).sqrt() * self.rho2.powf(1.5))
    }
}

/// `ρ₂^(d)`, `ρ₃^(d)` and `γ_n(i)`.
///
/// In dimension one the minors are 0x0 with determinant 1, which reproduces
/// [`rho_moments_1d`].
pub fn rho_moments_d(n: u64, dist: &IncrementDistribution) -> Result<RhoMomentsD> {
    check_n(n)?;
    let d = dist.dim();
    let sigma = dist.second_moment();
    let m = dist.mean_outer();
    let nf = n as f64;

    let mut rho2 = CompensatedSum::new();
    let mut gamma2 = vec![f64::NEG_INFINITY; d];
    for j in (1..=n).rev() {
        let k = (j + 1) as f64;
        let a = sigma.add_scaled(m, -1.0 / k);
        let den = determinant(&minor(&a, 1, 1)?);
        if !(den > 0.0) {
            return Err(Error::Degenerate(format!(
                "det(Sigma(1,1) - M(1,1)/{k}) = {den} is not positive"
            )));
        }
        rho2.add(determinant(&a) / den / k);
        for (i, g) in gamma2.iter_mut().enumerate() {
            *g = g.max(determinant(&minor(&a, i + 1, i + 1)?) / den);
        }
    }
    let gammas: Vec<f64> = gamma2.iter().map(|g| g.max(0.0).sqrt()).collect();

    let mut rho3 = CompensatedSum::new();
    for j in (1..=n).rev() {
        for (i, g) in gammas.iter().enumerate() {
            rho3.add(g.powi(3) * beta(j, i, dist));
        }
    }
    Ok(RhoMomentsD {
        rho2: rho2.value() / nf,
        rho3: rho3.value() / (nf * d as f64),
        gammas,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupDistance {
    /// Lower bound on the supremum.
    pub distance: f64,
    /// Number of points at which the CDF difference was evaluated.
    pub evaluation_points: usize,
}

/// `sup_x |P((Z − center) W ≤ x) − Φ_d(x)|` over an evaluation set, with `≤`
/// coordinate-wise and `Φ_d` the standard normal CDF in dimension `d`.
///
/// The evaluation set is every transformed support point, taken both as a
/// closed and as an open lower quadrant. With `refine_grid` a tensor grid of
/// [`REFINE_GRID_POINTS`] per axis over the transformed range is added (only
/// for `d <= 3`).
pub fn multivariate_sup_distance(
    pmf: &LatticePmf,
    center: &[f64],
    whitener: &SquareMatrix,
    refine_grid: bool,
) -> Result<SupDistance> {
    let d = pmf.dim();
    if center.len() != d || whitener.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if center.len() != d { center.len() } else { whitener.dim() },
        });
    }
    let det = determinant(whitener);
    if !(det.abs() > 1e-300) || !det.is_finite() {
        return Err(Error::InvalidArgument("whitener is not invertible".into()));
    }
    let total = pmf.total_mass();
    let points: Vec<(Vec<f64>, f64)> = pmf
        .iter()
        .map(|(p, m)| {
            let centered: Vec<f64> = p.iter().zip(center).map(|(&z, c)| z as f64 - c).collect();
            (whitener.left_mul_vec(&centered), m / total)
        })
        .collect();
    let mut queries: Vec<Vec<f64>> = points.iter().map(|(y, _)| y.clone()).collect();
    if refine_grid && d <= 3 {
        queries.extend(refinement_grid(&points, d));
    }
    let masses = quadrant_masses(&points, &queries, d);
    let mut worst: f64 = 0.0;
    for (q, (closed, open)) in queries.iter().zip(masses) {
        let phi: f64 = q.iter().map(|&x| std_normal_cdf(x)).product();
        worst = worst.max((closed - phi).abs()).max((open - phi).abs());
    }
    Ok(SupDistance {
        distance: worst.min(1.0),
        evaluation_points: queries.len(),
    })
}

fn refinement_grid(points: &[(Vec<f64>, f64)], d: usize) -> Vec<Vec<f64>> {
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for (y, _) in points {
        for i in 0..d {
            lo[i] = lo[i].min(y[i]);
            hi[i] = hi[i].max(y[i]);
        }
    }
    let axes: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let step = (hi[i] - lo[i]) / (REFINE_GRID_POINTS - 1) as f64;
            (0..REFINE_GRID_POINTS).map(|k| lo[i] + step * k as f64).collect()
        })
        .collect();
    let mut grid = vec![Vec::new()];
    for axis in &axes {
        grid = grid
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                axis.iter().map(move |&x| {
                    let mut p = prefix.clone();
                    p.push(x);
                    p
                })
            })
            .collect();
    }
    grid
}

/// For each query `q`: (mass of `{y ≤ q}`, mass of `{y < q}`), coordinate-wise.
fn quadrant_masses(points: &[(Vec<f64>, f64)], queries: &[Vec<f64>], d: usize) -> Vec<(f64, f64)> {
    match d {
        1 => {
            let mut sorted: Vec<(f64, f64)> = points.iter().map(|(y, m)| (y[0], *m)).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut prefix = Vec::with_capacity(sorted.len() + 1);
            prefix.push(0.0);
            let mut acc = 0.0;
            for &(_, m) in &sorted {
                acc += m;
                prefix.push(acc);
            }
            queries
                .iter()
                .map(|q| {
                    let le = sorted.partition_point(|&(y, _)| y <= q[0]);
                    let lt = sorted.partition_point(|&(y, _)| y < q[0]);
                    (prefix[le], prefix[lt])
                })
                .collect()
        }
        2 => quadrant_masses_2d(points, queries),
        _ => queries
            .iter()
            .map(|q| {
                let mut closed = 0.0;
                let mut open = 0.0;
                for (y, m) in points {
                    if y.iter().zip(q).all(|(a, b)| a <= b) {
                        closed += m;
                    }
                    if y.iter().zip(q).all(|(a, b)| a < b) {
                        open += m;
                    }
                }
                (closed, open)
            })
            .collect(),
    }
}

struct Fenwick(Vec<f64>);

impl Fenwick {
    fn new(n: usize) -> Self {
        Self(vec![0.0; n + 1])
    }

    fn add(&mut self, idx: usize, v: f64) {
        let mut i = idx + 1;
        while i < self.0.len() {
            self.0[i] += v;
            i += i & i.wrapping_neg();
        }
    }

    /// Sum of the first `count` slots.
    fn prefix(&self, count: usize) -> f64 {
        let mut i = count;
        let mut s = 0.0;
        while i > 0 {
            s += self.0[i];
            i -= i & i.wrapping_neg();
        }
        s
    }
}

fn quadrant_masses_2d(points: &[(Vec<f64>, f64)], queries: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let mut ys: Vec<f64> = points.iter().map(|(y, _)| y[1]).collect();
    ys.sort_by(f64::total_cmp);
    ys.dedup();
    let rank = |v: f64| ys.partition_point(|&y| y < v);

    let mut pts: Vec<(f64, usize, f64)> = points.iter().map(|(y, m)| (y[0], rank(y[1]), *m)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut order: Vec<usize> = (0..queries.len()).collect();
    order.sort_by(|&a, &b| queries[a][0].total_cmp(&queries[b][0]));

    let mut out = vec![(0.0, 0.0); queries.len()];
    for strict in [false, true] {
        let mut tree = Fenwick::new(ys.len());
        let mut next = 0;
        for &qi in &order {
            let (qx, qy) = (queries[qi][0], queries[qi][1]);
            while next < pts.len() && (if strict { pts[next].0 < qx } else { pts[next].0 <= qx }) {
                tree.add(pts[next].1, pts[next].2);
                next += 1;
            }
            let count = if strict {
                ys.partition_point(|&y| y < qy)
            } else {
                ys.partition_point(|&y| y <= qy)
            };
            let mass = tree.prefix(count);
            if strict {
                out[qi].1 = mass;
            } else {
                out[qi].0 = mass;
            }
        }
    }
    out
}

/// Least-squares slope of `log(distance)` against `log(log n)`.
pub fn rate_regression(ns: &[u64], distances: &[f64]) -> Result<f64> {
    if ns.len() != distances.len() {
        return Err(Error::DimensionMismatch {
            expected: ns.len(),
            got: distances.len(),
        });
    }
    if ns.len() < 4 {
        return Err(Error::InvalidArgument("rate regression needs at least 4 points".into()));
    }
    if ns.iter().any(|&n| n < 2) || distances.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument(
            "rate regression needs n >= 2 and positive distances".into(),
        ));
    }
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln().ln()).collect();
    let ys: Vec<f64> = distances.iter().map(|v| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("degenerate regression: all n equal".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

/// How the measured distance is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistanceMode {
    Exact,
    MonteCarlo { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scaling {
    /// Divide the centered value by this.
    Scalar(f64),
    /// Multiply the centered row vector by this matrix.
    Matrix(SquareMatrix),
}

/// One row of a Berry-Esseen report.
#[derive(Debug, Clone, PartialEq)]
pub struct BeReport {
    pub n: u64,
    pub h_n: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// Theorem bound (dimension one, `U_0 = δ₀`), otherwise the bound
    /// without its unknown constant.
    pub bound: f64,
    pub distance: f64,
    pub ratio: f64,
    pub center: Vec<f64>,
    pub scaling: Scaling,
    /// True when `bound` carries the explicit constant and must dominate.
    pub theorem_applies: bool,
    pub evaluation_points: usize,
    /// DKW half-width in Monte Carlo mode.
    pub error_bar: Option<f64>,
}

fn is_delta0(u0: &LatticePmf) -> bool {
    u0.cells() == 1 && u0.lo().iter().all(|&c| c == 0)
}

fn law_of_z(
    n: u64,
    u0: &LatticePmf,
    dist: &IncrementDistribution,
    mode: DistanceMode,
) -> Result<(LatticePmf, Option<f64>)> {
    match mode {
        DistanceMode::Exact => Ok((exact_pmf(n, u0, dist)?, None)),
        DistanceMode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("samples must be positive".into()));
            }
            let sampler = PmfSampler::new(u0);
            let counts = mc::parallel_counts(samples, seed, |rng| sample_z_repr(n, &sampler, dist, rng));
            let bar = ((2.0 / DKW_DELTA).ln() / (2.0 * samples as f64)).sqrt();
            Ok((LatticePmf::from_counts(dist.dim(), &counts)?, Some(bar)))
        }
    }
}

/// Dimension-one report. With `U_0 = δ₀` the centering is `μ h_n`, the scale
/// `√(n ρ₂)` and the bound carries the constant 2.75; otherwise centering is
/// `μ log n`, scale `σ √(log n)` and the ratio is against `ρ₃/(√n ρ₂^{3/2})`.
pub fn be_report_1d(
    n: u64,
    dist: &IncrementDistribution,
    u0: &LatticePmf,
    mode: DistanceMode,
) -> Result<BeReport> {
    let rho = rho_moments_1d(n, dist)?;
    if !(rho.rho2 > 0.0) {
        return Err(Error::Degenerate(format!("rho2 = {} at n = {n}", rho.rho2)));
    }
    let h_n = harmonic_tail(n);
    let mu = dist.mean()[0];
    let theorem_applies = is_delta0(u0);
    let (center, scale, bound) = if theorem_applies {
        (mu * h_n, (n as f64 * rho.rho2).sqrt(), BE_CONSTANT * rho.normalized(n))
    } else {
        if n < 2 {
            return Err(Error::InvalidArgument("log-scaled report needs n >= 2".into()));
        }
        let log_n = (n as f64).ln();
        let sigma = dist.second_moment()[(0, 0)].sqrt();
        (mu * log_n, sigma * log_n.sqrt(), rho.normalized(n))
    };
    let (pmf, error_bar) = law_of_z(n, u0, dist, mode)?;
    let distance = kolmogorov_distance_1d(&pmf, center, scale)?;
    Ok(BeReport {
        n,
        h_n,
        rho2: rho.rho2,
        rho3: rho.rho3,
        bound,
        distance,
        ratio: distance / bound,
        center: vec![center],
        scaling: Scaling::Scalar(scale),
        theorem_applies,
        evaluation_points: pmf.iter().count(),
        error_bar,
    })
}

/// Dimension-`d` report. With `U_0 = δ₀`: centering `μ h_n`, whitener
/// `Σ_n^{-1/2}`; otherwise centering `μ log n`, whitener
/// `Σ^{-1/2} / √(log n)`. The ratio is against `ρ₃^(d)/(√n (ρ₂^(d))^{3/2})`.
pub fn be_report_d(
    n: u64,
    dist: &IncrementDistribution,
    u0: &LatticePmf,
    mode: DistanceMode,
) -> Result<BeReport> {
    let rho = rho_moments_d(n, dist)?;
    let h_n = harmonic_tail(n);
    let delta0 = is_delta0(u0);
    let (center, whitener) = if delta0 {
        let (_, w) = sigma_n_whitener(n, dist)?;
        (dist.mean().iter().map(|m| m * h_n).collect::<Vec<_>>(), w)
    } else {
        if n < 2 {
            return Err(Error::InvalidArgument("log-scaled report needs n >= 2".into()));
        }
        let log_n = (n as f64).ln();
        let w = spd_sqrt_inverse(dist.second_moment())
            .map_err(|e| Error::Degenerate(format!("Sigma is not positive definite: {e}")))?;
        (
            dist.mean().iter().map(|m| m * log_n).collect(),
            w.scale(1.0 / log_n.sqrt()),
        )
    };
    let bound = rho.normalized(n);
    let (pmf, error_bar) = law_of_z(n, u0, dist, mode)?;
    let sup = multivariate_sup_distance(&pmf, &center, &whitener, error_bar.is_some())?;
    Ok(BeReport {
        n,
        h_n,
        rho2: rho.rho2,
        rho3: rho.rho3,
        bound,
        distance: sup.distance,
        ratio: sup.distance / bound,
        center,
        scaling: Scaling::Matrix(whitener),
        theorem_applies: false,
        evaluation_points: sup.evaluation_points,
        error_bar,
    })
}

/// CSV with header `n,h_n,rho2,rho3,bound,distance,ratio`.
pub fn reports_to_csv(reports: &[BeReport]) -> String {
    let mut out = String::from("n,h_n,rho2,rho3,bound,distance,ratio\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.n,
            g12(r.h_n),
            g12(r.rho2),
            g12(r.rho3),
            g12(r.bound),
            g12(r.distance),
            g12(r.ratio)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::{LatticePoint, Preset};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn harmonic_values() {
        assert_eq!(harmonic_tail(0), 0.0);
        assert_eq!(harmonic_tail(1), 0.5);
        assert!(close(harmonic_tail(2), 5.0 / 6.0, 1e-15));
        let h = harmonic_tail(1_000_000);
        let l = 1e6f64.ln();
        assert!(h >= l - 1.0 && h <= l);
    }

    #[test]
    fn rho_1d_examples() {
        let det = Preset::Det1d.distribution();
        let r = rho_moments_1d(1, &det).unwrap();
        assert!(close(r.rho2, 0.25, 1e-15) && close(r.rho3, 0.125, 1e-15));
        let r2 = rho_moments_1d(2, &det).unwrap();
        assert!(close(r2.rho2, 17.0 / 72.0, 1e-15));
        let ssrw = Preset::Ssrw1d.distribution();
        let r = rho_moments_1d(1, &ssrw).unwrap();
        assert!(close(r.rho2, 0.5, 1e-15) && close(r.rho3, 0.5, 1e-15));
        assert!(rho_moments_1d(1, &Preset::Ne2d.distribution()).is_err());
        assert!(rho_moments_1d(0, &det).is_err());
    }

    #[test]
    fn bound_examples() {
        let ssrw = Preset::Ssrw1d.distribution();
        assert!(close(be_bound_1d(1, &ssrw).unwrap(), 2.75 * 2f64.sqrt(), 1e-12));
        let det = Preset::Det1d.distribution();
        assert!(close(be_bound_1d(1, &det).unwrap(), 2.75, 1e-12));
        let zero = IncrementDistribution::new(1, vec![(LatticePoint(vec![0]), 1.0)]).unwrap();
        assert!(matches!(be_bound_1d(5, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn bound_decays_like_inverse_root_log() {
        // ssrw: nρ₂ = nρ₃ = h_n, so bound·√(log n) = 2.75 √(log n / h_n) → 2.75
        let ssrw = Preset::Ssrw1d.distribution();
        let mut last = f64::INFINITY;
        for n in [100u64, 10_000, 1_000_000] {
            let scaled = be_bound_1d(n, &ssrw).unwrap() * (n as f64).ln().sqrt();
            let oracle = 2.75 * ((n as f64).ln() / harmonic_tail(n)).sqrt();
            assert!(close(scaled, oracle, 1e-9));
            assert!((scaled - 2.75).abs() < (last - 2.75).abs());
            last = scaled;
        }
        assert!((last - 2.75).abs() < 0.05);
        let det = Preset::Det1d.distribution();
        let a = be_bound_1d(10_000, &det).unwrap() * 1e4f64.ln().sqrt();
        let b = be_bound_1d(1_000_000, &det).unwrap() * 1e6f64.ln().sqrt();
        assert!((a / b - 1.0).abs() < 0.1);
    }

    #[test]
    fn kolmogorov_of_point_mass() {
        let d = LatticePmf::delta0(1);
        assert_eq!(kolmogorov_distance_1d(&d, 0.0, 1.0).unwrap(), 0.5);
        assert!(kolmogorov_distance_1d(&d, 0.0, 0.0).is_err());
    }

    #[test]
    fn kolmogorov_translation_invariance() {
        let ssrw = Preset::Ssrw1d.distribution();
        let u0 = LatticePmf::delta0(1);
        let a = exact_pmf(30, &u0, &ssrw).unwrap();
        let shifted = LatticePmf::delta(&LatticePoint(vec![7]));
        let b = exact_pmf(30, &shifted, &ssrw).unwrap();
        let da = kolmogorov_distance_1d(&a, 0.3, 1.7).unwrap();
        let db = kolmogorov_distance_1d(&b, 7.3, 1.7).unwrap();
        assert!(close(da, db, 1e-14));
    }

    #[test]
    fn sigma_n_examples() {
        let ne = Preset::Ne2d.distribution();
        let s = sigma_n(1, &ne);
        let expect = [3.0 / 16.0, -1.0 / 16.0, -1.0 / 16.0, 3.0 / 16.0];
        for (a, b) in s.entries().iter().zip(expect) {
            assert!(close(*a, b, 1e-15));
        }
        let det = Preset::Det1d.distribution();
        for n in [1, 2, 10, 1000] {
            let r = rho_moments_1d(n, &det).unwrap();
            assert!(close(sigma_n(n, &det)[(0, 0)], n as f64 * r.rho2, 1e-12));
        }
        let zero = IncrementDistribution::new(2, vec![(LatticePoint(vec![1, 1]), 1.0)]).unwrap();
        assert!(matches!(sigma_n_whitener(3, &zero), Err(Error::Degenerate(_))));
    }

    #[test]
    fn rho_d_examples() {
        let ne = Preset::Ne2d.distribution();
        let r = rho_moments_d(1, &ne).unwrap();
        assert!(close(r.rho2, 1.0 / 6.0, 1e-15));
        for n in [1, 5, 50] {
            let r = rho_moments_d(n, &ne).unwrap();
            assert!(r.gammas.iter().all(|g| close(*g, 1.0, 1e-15)));
        }
        for preset in [Preset::Det1d, Preset::Ssrw1d] {
            let dist = preset.distribution();
            for n in [1, 2, 17, 300] {
                let a = rho_moments_1d(n, &dist).unwrap();
                let b = rho_moments_d(n, &dist).unwrap();
                assert!(close(a.rho2, b.rho2, 1e-12) && close(a.rho3, b.rho3, 1e-12));
            }
        }
    }

    #[test]
    fn sup_distance_of_point_mass() {
        for d in 1..=3 {
            let pmf = LatticePmf::delta0(d);
            let s = multivariate_sup_distance(&pmf, &vec![0.0; d], &SquareMatrix::identity(d), false)
                .unwrap();
            assert!(close(s.distance, 1.0 - 0.5f64.powi(d as i32), 1e-15));
        }
        let bad = SquareMatrix::zeros(2);
        assert!(multivariate_sup_distance(&LatticePmf::delta0(2), &[0.0, 0.0], &bad, false).is_err());
    }

    #[test]
    fn fenwick_sweep_matches_brute_force() {
        let points: Vec<(Vec<f64>, f64)> = (0..40)
            .map(|k| {
                let x = ((k * 7) % 11) as f64 * 0.5;
                let y = ((k * 5) % 13) as f64 * 0.25;
                (vec![x, y], 1.0 / 40.0)
            })
            .collect();
        let mut queries: Vec<Vec<f64>> = points.iter().map(|(y, _)| y.clone()).collect();
        queries.push(vec![2.1, 1.3]);
        queries.push(vec![-1.0, 10.0]);
        let fast = quadrant_masses(&points, &queries, 2);
        for (q, (c, o)) in queries.iter().zip(fast) {
            let bc: f64 = points.iter().filter(|(y, _)| y[0] <= q[0] && y[1] <= q[1]).map(|p| p.1).sum();
            let bo: f64 = points.iter().filter(|(y, _)| y[0] < q[0] && y[1] < q[1]).map(|p| p.1).sum();
            assert!(close(c, bc, 1e-14) && close(o, bo, 1e-14));
        }
    }

    #[test]
    fn regression_examples() {
        let ns = [100u64, 1000, 10_000, 100_000];
        let synth: Vec<f64> = ns.iter().map(|&n| 0.3 / (n as f64).ln().sqrt()).collect();
        assert!(close(rate_regression(&ns, &synth).unwrap(), -0.5, 1e-10));
        assert!(close(rate_regression(&ns, &[0.2; 4]).unwrap(), 0.0, 1e-12));
        assert!(rate_regression(&[10, 10, 10, 10], &[0.1, 0.2, 0.3, 0.4]).is_err());
        assert!(rate_regression(&ns[..3], &synth[..3]).is_err());
        assert!(rate_regression(&ns, &[0.1, 0.0, 0.1, 0.1]).is_err());
    }

    #[test]
    fn csv_header_and_format() {
        let ssrw = Preset::Ssrw1d.distribution();
        let r = be_report_1d(10, &ssrw, &LatticePmf::delta0(1), DistanceMode::Exact).unwrap();
        let csv = reports_to_csv(&[r]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,h_n,rho2,rho3,bound,distance,ratio"));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 7);
        assert_eq!(row[0], "10");
    }
}
