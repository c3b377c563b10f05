//! Bounded increment distributions on the integer lattice.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{SquareMatrix, MAX_DIM};

const MASS_TOL: f64 = 1e-12;
/// Largest exponent `<λ, u>` accepted by the moment generating function.
pub const MGF_EXPONENT_LIMIT: f64 = 700.0;

/// A point of Z^d.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LatticePoint(pub Vec<i64>);

impl LatticePoint {
    pub fn origin(dim: usize) -> Self {
        Self(vec![0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    pub fn add(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn dot(&self, lambda: &[f64]) -> f64 {
        self.0.iter().zip(lambda).map(|(&u, l)| u as f64 * l).sum()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&u| (u * u) as f64).sum::<f64>().sqrt()
    }
}

impl From<Vec<i64>> for LatticePoint {
    fn from(v: Vec<i64>) -> Self {
        Self(v)
    }
}

impl fmt::Debug for LatticePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.0)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AtomSpec {
    pub point: Vec<i64>,
    pub prob: f64,
}

/// JSON form: `{"dim": d, "atoms": [{"point": [..], "prob": p}, ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub dim: usize,
    pub atoms: Vec<AtomSpec>,
}

/// Named presets accepted wherever a distribution spec is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    /// X = +1 surely.
    Det1d,
    /// Simple symmetric walk on Z.
    Ssrw1d,
    /// Unit steps north or east with probability 1/2 each.
    Ne2d,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Det1d => "det1d",
            Preset::Ssrw1d => "ssrw1d",
            Preset::Ne2d => "ne2d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "det1d" => Some(Preset::Det1d),
            "ssrw1d" => Some(Preset::Ssrw1d),
            "ne2d" => Some(Preset::Ne2d),
            _ => None,
        }
    }

    pub fn distribution(self) -> IncrementDistribution {
        let (dim, atoms) = match self {
            Preset::Det1d => (1, vec![(vec![1], 1.0)]),
            Preset::Ssrw1d => (1, vec![(vec![1], 0.5), (vec![-1], 0.5)]),
            Preset::Ne2d => (2, vec![(vec![1, 0], 0.5), (vec![0, 1], 0.5)]),
        };
        let mut dist = IncrementDistribution::new(
            dim,
            atoms.into_iter().map(|(p, q)| (LatticePoint(p), q)).collect(),
        )
        .expect("presets are valid");
        dist.preset = Some(self);
        dist
    }
}

/// Finite probability mass function on Z^d with cached moments.
#[derive(Debug, Clone)]
pub struct IncrementDistribution {
    dim: usize,
    atoms: Vec<(LatticePoint, f64)>,
    cumulative: Vec<f64>,
    mean: Vec<f64>,
    second_moment: SquareMatrix,
    mean_outer: SquareMatrix,
    preset: Option<Preset>,
}

impl IncrementDistribution {
    /// Validates the atoms and caches μ, Σ = E[XᵀX] and M = μᵀμ.
    pub fn new(dim: usize, atoms: Vec<(LatticePoint, f64)>) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::InvalidDistribution(format!(
                "dimension {dim} outside 1..={MAX_DIM}"
            )));
        }
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("no atoms".into()));
        }
        for (point, prob) in &atoms {
            if point.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: point.dim(),
                });
            }
            if !(prob.is_finite() && *prob > 0.0) {
                return Err(Error::InvalidDistribution(format!(
                    "probability {prob} at {point:?} must be positive"
                )));
            }
        }
        let mut sorted: Vec<&LatticePoint> = atoms.iter().map(|(p, _)| p).collect();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidDistribution(format!("duplicate point {:?}", w[0])));
        }
        let total: f64 = atoms.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidDistribution(format!("total mass {total} is not 1")));
        }

        let mut mean = vec![0.0; dim];
        let mut second_moment = SquareMatrix::zeros(dim);
        for (point, prob) in &atoms {
            for i in 0..dim {
                let ui = point.0[i] as f64;
                mean[i] += prob * ui;
                for j in 0..dim {
                    second_moment[(i, j)] += prob * ui * point.0[j] as f64;
                }
            }
        }
        let mut mean_outer = SquareMatrix::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                mean_outer[(i, j)] = mean[i] * mean[j];
            }
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();

        Ok(Self {
            dim,
            atoms,
            cumulative,
            mean,
            second_moment,
            mean_outer,
            preset: None,
        })
    }

    pub fn from_spec(spec: &DistributionSpec) -> Result<Self> {
        Self::new(
            spec.dim,
            spec.atoms
                .iter()
                .map(|a| (LatticePoint(a.point.clone()), a.prob))
                .collect(),
        )
    }

    /// Parses a preset name or an inline JSON spec.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        if let Some(preset) = Preset::from_name(trimmed) {
            return Ok(preset.distribution());
        }
        let spec: DistributionSpec =
            serde_json::from_str(trimmed).map_err(|e| Error::Parse(e.to_string()))?;
        Self::from_spec(&spec)
    }

    pub fn to_spec(&self) -> DistributionSpec {
        DistributionSpec {
            dim: self.dim,
            atoms: self
                .atoms
                .iter()
                .map(|(p, q)| AtomSpec {
                    point: p.0.clone(),
                    prob: *q,
                })
                .collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[(LatticePoint, f64)] {
        &self.atoms
    }

    /// The preset this distribution was parsed from, if any.
    pub fn preset(&self) -> Option<Preset> {
        self.preset
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Uncentered second moment E[X₁ᵀX₁].
    pub fn second_moment(&self) -> &SquareMatrix {
        &self.second_moment
    }

    /// μᵀμ.
    pub fn mean_outer(&self) -> &SquareMatrix {
        &self.mean_outer
    }

    /// (μ, Σ, M)
    pub fn moments(&self) -> (&[f64], &SquareMatrix, &SquareMatrix) {
        (&self.mean, &self.second_moment, &self.mean_outer)
    }

    /// Covariance Σ − M.
    pub fn covariance(&self) -> SquareMatrix {
        self.second_moment.add_scaled(&self.mean_outer, -1.0)
    }

    pub fn max_atom_norm(&self) -> f64 {
        self.atoms.iter().map(|(p, _)| p.norm()).fold(0.0, f64::max)
    }

    /// E|X^{(i)} − c|³ for coordinate `i` (0-based).
    pub fn abs_central_third(&self, coord: usize, shift: f64) -> f64 {
        self.atoms
            .iter()
            .map(|(p, q)| q * (p.0[coord] as f64 - shift).abs().powi(3))
            .sum()
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: lambda.len(),
            });
        }
        Ok(())
    }

    fn exponents(&self, lambda: &[f64]) -> Result<Vec<f64>> {
        self.check_lambda(lambda)?;
        self.atoms
            .iter()
            .map(|(p, _)| {
                let s = p.dot(lambda);
                if s > MGF_EXPONENT_LIMIT || s.is_nan() {
                    Err(Error::MgfOverflow(s))
                } else {
                    Ok(s)
                }
            })
            .collect()
    }

    /// e(λ) = Σ p(u) exp(<λ, u>).
    pub fn mgf(&self, lambda: &[f64]) -> Result<f64> {
        let exps = self.exponents(lambda)?;
        if lambda.iter().all(|&l| l == 0.0) {
            // normalization, free of the rounding in Σ p(u)
            return Ok(1.0);
        }
        Ok(self
            .atoms
            .iter()
            .zip(exps)
            .map(|((_, q), s)| q * s.exp())
            .sum())
    }

    /// (e(λ), ∇e(λ))
    pub fn mgf_with_gradient(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        let exps = self.exponents(lambda)?;
        let mut value = 0.0;
        let mut grad = vec![0.0; self.dim];
        for ((p, q), s) in self.atoms.iter().zip(exps) {
            let w = q * s.exp();
            value += w;
            for (g, &u) in grad.iter_mut().zip(&p.0) {
                *g += w * u as f64;
            }
        }
        Ok((value, grad))
    }

    /// (e(λ), ∇e(λ), ∇²e(λ))
    pub fn mgf_derivatives(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>, SquareMatrix)> {
        let exps = self.exponents(lambda)?;
        let d = self.dim;
        let mut value = 0.0;
        let mut grad = vec![0.0; d];
        let mut hess = SquareMatrix::zeros(d);
        for ((p, q), s) in self.atoms.iter().zip(exps) {
            let w = q * s.exp();
            value += w;
            for i in 0..d {
                let ui = p.0[i] as f64;
                grad[i] += w * ui;
                for j in 0..d {
                    hess[(i, j)] += w * ui * p.0[j] as f64;
                }
            }
        }
        Ok((value, grad, hess))
    }

    /// The exponentially tilted law p(u) e^{<λ,u>} / e(λ).
    pub fn tilted(&self, lambda: &[f64]) -> Result<Self> {
        let exps = self.exponents(lambda)?;
        let weights: Vec<f64> = self
            .atoms
            .iter()
            .zip(&exps)
            .map(|((_, q), s)| q * s.exp())
            .collect();
        let total: f64 = weights.iter().sum();
        let atoms = self
            .atoms
            .iter()
            .zip(weights)
            .map(|((p, _), w)| (p.clone(), w / total))
            .collect::<Vec<_>>();
        // renormalized exactly so validation does not trip on rounding
        let sum: f64 = atoms.iter().map(|(_, q)| q).sum();
        Self::new(
            self.dim,
            atoms.into_iter().map(|(p, q)| (p, q / sum)).collect(),
        )
    }

    /// Draws one increment by a cumulative scan over the atoms.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &LatticePoint {
        let u: f64 = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let idx = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.atoms.len() - 1);
        &self.atoms[idx].0
    }
}
