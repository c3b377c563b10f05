//! Dense probability mass functions over a bounded box of Z^d.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::increments::{IncrementDistribution, LatticePoint};
use crate::numerics::{CompensatedSum, SquareMatrix};

/// Masses below this are dropped from the box.
pub const TRIM_THRESHOLD: f64 = 1e-300;
const MASS_TOL: f64 = 1e-12;

/// Mass function stored densely over the axis-aligned box `lo ..= lo + shape - 1`.
///
/// The last coordinate varies fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticePmf {
    dim: usize,
    lo: Vec<i64>,
    shape: Vec<usize>,
    masses: Vec<f64>,
}

impl LatticePmf {
    pub fn delta(point: &LatticePoint) -> Self {
        Self {
            dim: point.dim(),
            lo: point.0.clone(),
            shape: vec![1; point.dim()],
            masses: vec![1.0],
        }
    }

    /// Point mass at the origin of Z^d.
    pub fn delta0(dim: usize) -> Self {
        Self::delta(&LatticePoint::origin(dim))
    }

    /// Builds a probability vector; masses must be nonnegative and sum to 1.
    pub fn from_points(dim: usize, points: &[(LatticePoint, f64)]) -> Result<Self> {
        let pmf = Self::from_points_unnormalized(dim, points)?;
        let total = pmf.total_mass();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidArgument(format!(
                "pmf total mass {total} is not 1"
            )));
        }
        Ok(pmf)
    }

    /// Like [`from_points`](Self::from_points) without the total-mass check.
    /// Repeated points accumulate.
    pub fn from_points_unnormalized(dim: usize, points: &[(LatticePoint, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("pmf needs at least one point".into()));
        }
        let mut lo = vec![i64::MAX; dim];
        let mut hi = vec![i64::MIN; dim];
        for (p, m) in points {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.dim(),
                });
            }
            if !(m.is_finite() && *m >= 0.0) {
                return Err(Error::InvalidArgument(format!("mass {m} at {p:?}")));
            }
            for i in 0..dim {
                lo[i] = lo[i].min(p.0[i]);
                hi[i] = hi[i].max(p.0[i]);
            }
        }
        let shape: Vec<usize> = lo.iter().zip(&hi).map(|(l, h)| (h - l + 1) as usize).collect();
        let mut pmf = Self {
            dim,
            masses: vec![0.0; shape.iter().product()],
            lo,
            shape,
        };
        for (p, m) in points {
            let idx = pmf.flat_index(&p.0).expect("inside box");
            pmf.masses[idx] += m;
        }
        pmf.trim();
        Ok(pmf)
    }

    /// Empirical law of integer-valued draws.
    pub fn from_counts(dim: usize, counts: &BTreeMap<LatticePoint, u64>) -> Result<Self> {
        let total: u64 = counts.values().sum();
        if total == 0 {
            return Err(Error::InvalidArgument("no samples".into()));
        }
        let points: Vec<(LatticePoint, f64)> = counts
            .iter()
            .map(|(p, &c)| (p.clone(), c as f64 / total as f64))
            .collect();
        Self::from_points_unnormalized(dim, &points)
    }

    /// Uniform law on the integers `lo..=hi` of Z.
    pub fn uniform_1d(lo: i64, hi: i64) -> Result<Self> {
        if hi < lo {
            return Err(Error::InvalidArgument(format!("empty range {lo}..={hi}")));
        }
        let w = 1.0 / (hi - lo + 1) as f64;
        Ok(Self {
            dim: 1,
            lo: vec![lo],
            shape: vec![(hi - lo + 1) as usize],
            masses: vec![w; (hi - lo + 1) as usize],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Lower corner of the box.
    pub fn lo(&self) -> &[i64] {
        &self.lo
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().copied().collect::<CompensatedSum>().value()
    }

    fn flat_index(&self, point: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (i, &x) in point.iter().enumerate().take(self.dim) {
            let off = x - self.lo[i];
            if off < 0 || off as usize >= self.shape[i] {
                return None;
            }
            idx = idx * self.shape[i] + off as usize;
        }
        Some(idx)
    }

    fn point_of(&self, mut flat: usize, out: &mut [i64]) {
        for i in (0..self.dim).rev() {
            out[i] = self.lo[i] + (flat % self.shape[i]) as i64;
            flat /= self.shape[i];
        }
    }

    pub fn mass_at(&self, point: &LatticePoint) -> f64 {
        if point.dim() != self.dim {
            return 0.0;
        }
        self.flat_index(&point.0).map_or(0.0, |i| self.masses[i])
    }

    /// Nonzero entries in lexicographic order of the point.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<i64>, f64)> + '_ {
        let mut buf = vec![0; self.dim];
        self.masses
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(move |(flat, &m)| {
                self.point_of(flat, &mut buf);
                (buf.clone(), m)
            })
    }

    /// Zeroes masses below [`TRIM_THRESHOLD`] and shrinks the box to the
    /// remaining support.
    pub fn trim(&mut self) {
        let d = self.dim;
        let mut new_lo = vec![usize::MAX; d];
        let mut new_hi = vec![0usize; d];
        let mut any = false;
        let mut idx = vec![0usize; d];
        for flat in 0..self.masses.len() {
            if self.masses[flat] < TRIM_THRESHOLD {
                self.masses[flat] = 0.0;
            } else {
                any = true;
                let mut f = flat;
                for i in (0..d).rev() {
                    idx[i] = f % self.shape[i];
                    f /= self.shape[i];
                }
                for i in 0..d {
                    new_lo[i] = new_lo[i].min(idx[i]);
                    new_hi[i] = new_hi[i].max(idx[i]);
                }
            }
        }
        if !any {
            // nothing representable survives; keep a single empty cell
            self.masses = vec![0.0];
            self.shape = vec![1; d];
            return;
        }
        if new_lo.iter().all(|&l| l == 0)
            && new_hi.iter().zip(&self.shape).all(|(&h, &s)| h + 1 == s)
        {
            return;
        }
        let new_shape: Vec<usize> = new_lo.iter().zip(&new_hi).map(|(l, h)| h - l + 1).collect();
        let mut masses = vec![0.0; new_shape.iter().product()];
        let mut counter = vec![0usize; d];
        for m in masses.iter_mut() {
            let mut src = 0usize;
            for i in 0..d {
                src = src * self.shape[i] + new_lo[i] + counter[i];
            }
            *m = self.masses[src];
            for i in (0..d).rev() {
                counter[i] += 1;
                if counter[i] < new_shape[i] {
                    break;
                }
                counter[i] = 0;
            }
        }
        for (lo, &shift) in self.lo.iter_mut().zip(&new_lo) {
            *lo += shift as i64;
        }
        self.shape = new_shape;
        self.masses = masses;
    }

    /// Convolves with the two-point mixture `stay·δ₀ + jump·p`.
    ///
    /// Fails with [`Error::BudgetExceeded`] if the grown box would hold more
    /// than `max_cells` cells.
    pub fn convolve_mixture(
        &self,
        stay: f64,
        jump: f64,
        dist: &IncrementDistribution,
        max_cells: usize,
    ) -> Result<Self> {
        if dist.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: dist.dim(),
            });
        }
        let d = self.dim;
        let mut min_shift = vec![0i64; d];
        let mut max_shift = vec![0i64; d];
        for (w, _) in dist.atoms() {
            for i in 0..d {
                min_shift[i] = min_shift[i].min(w.0[i]);
                max_shift[i] = max_shift[i].max(w.0[i]);
            }
        }
        let new_lo: Vec<i64> = self.lo.iter().zip(&min_shift).map(|(l, s)| l + s).collect();
        let new_shape: Vec<usize> = (0..d)
            .map(|i| self.shape[i] + (max_shift[i] - min_shift[i]) as usize)
            .collect();
        let cells = new_shape
            .iter()
            .try_fold(1usize, |acc, &s| acc.checked_mul(s))
            .unwrap_or(usize::MAX);
        if cells > max_cells {
            return Err(Error::BudgetExceeded {
                needed: cells,
                limit: max_cells,
            });
        }
        let strides = strides(&new_shape);
        let flat_offset = |shift: &[i64]| -> isize {
            (0..d)
                .map(|i| (shift[i] - min_shift[i]) as isize * strides[i] as isize)
                .sum()
        };
        let stay_offset = flat_offset(&vec![0; d]);
        let jumps: Vec<(isize, f64)> = dist
            .atoms()
            .iter()
            .map(|(w, p)| (flat_offset(&w.0), jump * p))
            .collect();

        let mut out = vec![0.0; cells];
        let mut counter = vec![0usize; d];
        let mut base = 0usize;
        for &m in &self.masses {
            if m != 0.0 {
                out[(base as isize + stay_offset) as usize] += stay * m;
                for &(off, w) in &jumps {
                    out[(base as isize + off) as usize] += w * m;
                }
            }
            // advance the odometer over the old box, tracking the flat index in the new box
            for i in (0..d).rev() {
                counter[i] += 1;
                base += strides[i];
                if counter[i] < self.shape[i] {
                    break;
                }
                base -= counter[i] * strides[i];
                counter[i] = 0;
            }
        }
        let mut pmf = Self {
            dim: d,
            lo: new_lo,
            shape: new_shape,
            masses: out,
        };
        pmf.trim();
        Ok(pmf)
    }

    /// Convolution with another pmf on the same lattice.
    pub fn convolve(&self, other: &Self, max_cells: usize) -> Result<Self> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        let d = self.dim;
        let new_lo: Vec<i64> = self.lo.iter().zip(&other.lo).map(|(a, b)| a + b).collect();
        let new_shape: Vec<usize> = self
            .shape
            .iter()
            .zip(&other.shape)
            .map(|(a, b)| a + b - 1)
            .collect();
        let cells: usize = new_shape.iter().product();
        if cells > max_cells {
            return Err(Error::BudgetExceeded {
                needed: cells,
                limit: max_cells,
            });
        }
        let new_strides = strides(&new_shape);
        let offsets = |pmf: &Self| -> Vec<(usize, f64)> {
            let mut buf = vec![0i64; d];
            pmf.masses
                .iter()
                .enumerate()
                .filter(|(_, &m)| m != 0.0)
                .map(|(flat, &m)| {
                    pmf.point_of(flat, &mut buf);
                    let off = (0..d)
                        .map(|i| (buf[i] - pmf.lo[i]) as usize * new_strides[i])
                        .sum();
                    (off, m)
                })
                .collect()
        };
        let a = offsets(self);
        let b = offsets(other);
        let mut out = vec![0.0; cells];
        for &(ia, ma) in &a {
            for &(ib, mb) in &b {
                out[ia + ib] += ma * mb;
            }
        }
        let mut pmf = Self {
            dim: d,
            lo: new_lo,
            shape: new_shape,
            masses: out,
        };
        pmf.trim();
        Ok(pmf)
    }

    pub(crate) fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.masses.iter_mut().for_each(|m| *m *= factor);
        out
    }

    /// Returns `self * factor + other` on the union box.
    pub(crate) fn scaled_add(&self, factor: f64, other: &Self) -> Self {
        let d = self.dim;
        let lo: Vec<i64> = (0..d).map(|i| self.lo[i].min(other.lo[i])).collect();
        let hi: Vec<i64> = (0..d)
            .map(|i| {
                (self.lo[i] + self.shape[i] as i64 - 1).max(other.lo[i] + other.shape[i] as i64 - 1)
            })
            .collect();
        let shape: Vec<usize> = (0..d).map(|i| (hi[i] - lo[i] + 1) as usize).collect();
        let mut out = Self {
            dim: d,
            masses: vec![0.0; shape.iter().product()],
            lo,
            shape,
        };
        let mut buf = vec![0i64; d];
        for (src, scale) in [(self, factor), (other, 1.0)] {
            for (flat, &m) in src.masses.iter().enumerate() {
                if m != 0.0 {
                    src.point_of(flat, &mut buf);
                    let idx = out.flat_index(&buf).expect("union box");
                    out.masses[idx] += scale * m;
                }
            }
        }
        out
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut sums = vec![CompensatedSum::new(); self.dim];
        for (p, m) in self.iter() {
            for (s, &x) in sums.iter_mut().zip(&p) {
                s.add(m * x as f64);
            }
        }
        let total = self.total_mass();
        sums.iter().map(|s| s.value() / total).collect()
    }

    /// Covariance about the mean, normalized by the total mass.
    pub fn covariance(&self) -> SquareMatrix {
        let d = self.dim;
        let mean = self.mean();
        let mut sums = vec![CompensatedSum::new(); d * d];
        for (p, m) in self.iter() {
            let c: Vec<f64> = p.iter().zip(&mean).map(|(&x, mu)| x as f64 - mu).collect();
            for i in 0..d {
                for j in i..d {
                    sums[i * d + j].add(m * c[i] * c[j]);
                }
            }
        }
        let total = self.total_mass();
        let mut cov = SquareMatrix::zeros(d);
        for i in 0..d {
            for j in i..d {
                let v = sums[i * d + j].value() / total;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov
    }

    /// Mass of `{u : u ≤ x}` coordinate-wise.
    pub fn cdf(&self, x: &[f64]) -> f64 {
        self.iter()
            .filter(|(p, _)| p.iter().zip(x).all(|(&u, &xi)| u as f64 <= xi))
            .map(|(_, m)| m)
            .collect::<CompensatedSum>()
            .value()
    }

    /// Mass of `{u : u ≥ a}` in dimension one.
    pub fn upper_tail(&self, a: f64) -> f64 {
        assert_eq!(self.dim, 1, "upper_tail is defined in dimension one");
        // sum from the far end so small tails are not swamped
        self.iter()
            .filter(|(p, _)| p[0] as f64 >= a)
            .map(|(_, m)| m)
            .collect::<Vec<_>>()
            .into_iter()
            .rev()
            .collect::<CompensatedSum>()
            .value()
    }

    /// Mass of `{u : u ≤ a}` in dimension one.
    pub fn lower_tail(&self, a: f64) -> f64 {
        assert_eq!(self.dim, 1, "lower_tail is defined in dimension one");
        self.iter()
            .filter(|(p, _)| p[0] as f64 <= a)
            .map(|(_, m)| m)
            .collect::<CompensatedSum>()
            .value()
    }

    /// CSV with header `c1,...,cd,mass`, one row per support point in
    /// lexicographic order. Masses use the shortest round-trip representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.dim {
            let _ = write!(out, "c{i},");
        }
        out.push_str("mass\n");
        for (p, m) in self.iter() {
            for c in &p {
                let _ = write!(out, "{c},");
            }
            let _ = writeln!(out, "{m:e}");
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 2 || cols[cols.len() - 1] != "mass" {
            return Err(Error::Parse(format!("bad pmf header {header:?}")));
        }
        let dim = cols.len() - 1;
        for (i, c) in cols[..dim].iter().enumerate() {
            if *c != format!("c{}", i + 1) {
                return Err(Error::Parse(format!("bad pmf header {header:?}")));
            }
        }
        let mut points = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != dim + 1 {
                return Err(Error::Parse(format!("bad pmf row {line:?}")));
            }
            let coords = fields[..dim]
                .iter()
                .map(|f| f.parse::<i64>().map_err(|e| Error::Parse(e.to_string())))
                .collect::<Result<Vec<_>>>()?;
            let mass = fields[dim]
                .parse::<f64>()
                .map_err(|e| Error::Parse(e.to_string()))?;
            points.push((LatticePoint(coords), mass));
        }
        Self::from_points(dim, &points)
    }
}

fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1usize; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}
