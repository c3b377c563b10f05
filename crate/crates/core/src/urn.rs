//! The infinite-color urn: direct dynamics, the Bernoulli-mixture
//! representation of the selected color, and its exact law.
//!
//! At time `n` the urn holds weights `U_n` on Z^d of total mass `n + 1`.
//! A color `V` is drawn proportionally to the weights and the row of the
//! random-walk kernel at `V` is added, i.e. mass `p(w)` at `V + w` for every
//! increment atom `w`. The color drawn at time `n` is `Z_n`, and in law
//! `Z_n = Z_0 + Σ_{j≤n} I_j X_j` with independent `I_j ~ Bernoulli(1/(j+1))`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::increments::{IncrementDistribution, LatticePoint};
use crate::pmf::LatticePmf;

/// Default limit on the dense box used by [`exact_pmf`] (128 MiB of masses).
pub const DEFAULT_MAX_CELLS: usize = 1 << 24;
/// Cap on cell-atom updates in one exact computation (a few seconds).
pub const DEFAULT_MAX_WORK: u64 = 5_000_000_000;

/// Sparse urn configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct UrnState {
    time: u64,
    weights: BTreeMap<LatticePoint, f64>,
    total_mass: f64,
}

impl UrnState {
    /// Starts from a finitely supported probability vector `U_0`.
    pub fn new(u0: &LatticePmf) -> Self {
        let weights: BTreeMap<LatticePoint, f64> =
            u0.iter().map(|(p, m)| (LatticePoint(p), m)).collect();
        let total_mass = weights.values().sum();
        Self {
            time: 0,
            weights,
            total_mass,
        }
    }

    pub fn time(&self) -> u64 {
        self.time
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    pub fn weights(&self) -> &BTreeMap<LatticePoint, f64> {
        &self.weights
    }

    pub fn weight(&self, point: &LatticePoint) -> f64 {
        self.weights.get(point).copied().unwrap_or(0.0)
    }

    pub fn dim(&self) -> usize {
        self.weights.keys().next().map_or(0, LatticePoint::dim)
    }

    /// Draws a color with probability proportional to its weight.
    pub fn draw_color<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        let target = rng.random::<f64>() * self.total_mass;
        let mut acc = 0.0;
        let mut last = None;
        for (point, &w) in &self.weights {
            acc += w;
            last = Some(point);
            if target < acc {
                return point.clone();
            }
        }
        last.expect("urn is never empty").clone()
    }

    /// One draw-and-replace step; returns the chosen color.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        dist: &IncrementDistribution,
        rng: &mut R,
    ) -> Result<LatticePoint> {
        if dist.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: dist.dim(),
            });
        }
        let chosen = self.draw_color(rng);
        for (w, p) in dist.atoms() {
            *self.weights.entry(chosen.add(w)).or_insert(0.0) += p;
        }
        self.time += 1;
        self.total_mass += 1.0;
        Ok(chosen)
    }
}

/// Inverse-CDF sampler over the support of a pmf.
#[derive(Debug, Clone)]
pub struct PmfSampler {
    points: Vec<LatticePoint>,
    cumulative: Vec<f64>,
}

impl PmfSampler {
    pub fn new(pmf: &LatticePmf) -> Self {
        let mut acc = 0.0;
        let (points, cumulative) = pmf
            .iter()
            .map(|(p, m)| {
                acc += m;
                (LatticePoint(p), acc)
            })
            .unzip();
        Self { points, cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticePoint {
        if self.points.len() == 1 {
            return self.points[0].clone();
        }
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= u);
        self.points[idx.min(self.points.len() - 1)].clone()
    }
}

/// One draw of `Z_n` by running the urn for `n` steps from `u0` and then
/// drawing a color from `U_n / (n + 1)`.
pub fn sample_z_direct<R: Rng + ?Sized>(
    n: u64,
    u0: &LatticePmf,
    dist: &IncrementDistribution,
    rng: &mut R,
) -> Result<LatticePoint> {
    let mut urn = UrnState::new(u0);
    for _ in 0..n {
        urn.step(dist, rng)?;
    }
    Ok(urn.draw_color(rng))
}

/// One draw of `Z_0 + Σ_{j=1}^n I_j X_j`; `X_j` is drawn only when `I_j = 1`.
pub fn sample_z_repr<R: Rng + ?Sized>(
    n: u64,
    u0: &PmfSampler,
    dist: &IncrementDistribution,
    rng: &mut R,
) -> LatticePoint {
    let mut z = u0.sample(rng);
    for j in 1..=n {
        if rng.random::<f64>() * ((j + 1) as f64) < 1.0 {
            z.add_assign(dist.sample(rng));
        }
    }
    z
}

/// Exact law of `Z_n`: `u0` convolved with `(j/(j+1)) δ₀ + (1/(j+1)) p` for
/// `j = 1..=n`.
pub fn exact_pmf(n: u64, u0: &LatticePmf, dist: &IncrementDistribution) -> Result<LatticePmf> {
    exact_pmf_with_budget(n, u0, dist, DEFAULT_MAX_CELLS)
}

pub fn exact_pmf_with_budget(
    n: u64,
    u0: &LatticePmf,
    dist: &IncrementDistribution,
    max_cells: usize,
) -> Result<LatticePmf> {
    if u0.dim() != dist.dim() {
        return Err(Error::DimensionMismatch {
            expected: u0.dim(),
            got: dist.dim(),
        });
    }
    let atoms = dist.atoms().len() as u64;
    let mut work = 0u64;
    let mut pmf = u0.clone();
    for j in 1..=n {
        // boxes rarely shrink, so the current size projects a lower bound
        let per_step = pmf.cells() as u64 * atoms;
        let projected = work.saturating_add((n - j + 1).saturating_mul(per_step));
        if projected > DEFAULT_MAX_WORK {
            return Err(Error::BudgetExceeded {
                needed: usize::try_from(projected).unwrap_or(usize::MAX),
                limit: DEFAULT_MAX_WORK as usize,
            });
        }
        work += per_step;
        let jump = 1.0 / (j + 1) as f64;
        let stay = j as f64 / (j + 1) as f64;
        pmf = pmf.convolve_mixture(stay, jump, dist, max_cells)?;
    }
    Ok(pmf)
}
