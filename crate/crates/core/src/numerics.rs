//! Small dense linear algebra (dimension at most 8) and scalar special functions.
//!
//! Matrices are stored row-major. Everything here is a pure function of its
//! inputs.

use std::fmt;
use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension the dense routines are meant for.
pub const MAX_DIM: usize = 8;

const JACOBI_MAX_SWEEPS: usize = 100;
const JACOBI_OFF_TOL: f64 = 1e-14;
const SYMMETRY_TOL: f64 = 1e-12;
const PD_RELATIVE_TOL: f64 = 1e-12;

/// Dense square matrix, row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major entries; all entries must be finite.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("matrix entries must be finite".into()));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_row_major(dim, entries)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matmul dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Row vector times matrix: `v · A`.
    pub fn left_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * factor).collect(),
        }
    }

    /// `self + factor * other`
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + factor * b)
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    fn check_symmetric(&self) -> Result<()> {
        let asym = self.max_asymmetry();
        if asym > SYMMETRY_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotSymmetric(asym));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.entries[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.entries[i * self.dim + j]
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[f64]> = (0..self.dim).map(|i| self.row(i)).collect();
        f.debug_struct("SquareMatrix")
            .field("dim", &self.dim)
            .field("rows", &rows)
            .finish()
    }
}

/// Standard normal distribution function.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Submatrix with row `i` and column `j` removed (1-based indices).
///
/// A 1x1 matrix yields the 0x0 matrix, whose determinant is 1.
pub fn minor(a: &SquareMatrix, i: usize, j: usize) -> Result<SquareMatrix> {
    let d = a.dim();
    if d == 0 || i == 0 || j == 0 || i > d || j > d {
        return Err(Error::IndexOutOfRange { row: i, col: j, dim: d });
    }
    let mut entries = Vec::with_capacity((d - 1) * (d - 1));
    for r in (0..d).filter(|&r| r != i - 1) {
        for c in (0..d).filter(|&c| c != j - 1) {
            entries.push(a[(r, c)]);
        }
    }
    Ok(SquareMatrix { dim: d - 1, entries })
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(a: &SquareMatrix) -> f64 {
    let d = a.dim();
    match d {
        0 => return 1.0,
        1 => return a[(0, 0)],
        2 => return a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)],
        _ => {}
    }
    let mut m = a.entries.clone();
    let mut det = 1.0;
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&r, &s| m[r * d + col].abs().total_cmp(&m[s * d + col].abs()))
            .expect("nonempty range");
        let p = m[pivot * d + col];
        if p == 0.0 {
            return 0.0;
        }
        if pivot != col {
            for c in 0..d {
                m.swap(pivot * d + c, col * d + c);
            }
            det = -det;
        }
        det *= p;
        for r in (col + 1)..d {
            let factor = m[r * d + col] / p;
            if factor == 0.0 {
                continue;
            }
            for c in col..d {
                m[r * d + c] -= factor * m[col * d + c];
            }
        }
    }
    det
}

/// Eigen-decomposition of a symmetric matrix.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    /// Eigenvalues, ascending.
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: SquareMatrix,
    pub sweeps: usize,
}

/// Cyclic Jacobi rotations. Fails if `a` is not symmetric.
pub fn symmetric_eigen(a: &SquareMatrix) -> Result<SymmetricEigen> {
    a.check_symmetric()?;
    let d = a.dim();
    let mut m = a.clone();
    // symmetrize exactly so rotations act on a truly symmetric matrix
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    let mut v = SquareMatrix::identity(d);
    let scale: f64 = m.entries.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut sweeps = 0;

    while sweeps < JACOBI_MAX_SWEEPS {
        let off: f64 = (0..d)
            .flat_map(|i| ((i + 1)..d).map(move |j| (i, j)))
            .map(|(i, j)| 2.0 * m[(i, j)] * m[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= JACOBI_OFF_TOL * scale || off == 0.0 {
            break;
        }
        sweeps += 1;
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]));
    let values = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = SquareMatrix::zeros(d);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..d {
            vectors[(r, new_col)] = v[(r, old_col)];
        }
    }
    Ok(SymmetricEigen {
        values,
        vectors,
        sweeps,
    })
}

/// Inverse of the positive definite square root, `A^{-1/2}`.
pub fn spd_sqrt_inverse(a: &SquareMatrix) -> Result<SquareMatrix> {
    let eig = symmetric_eigen(a)?;
    let d = a.dim();
    if d == 0 {
        return Ok(SquareMatrix::zeros(0));
    }
    let max = eig.values[d - 1];
    let min = eig.values[0];
    if !(max > 0.0) || min <= PD_RELATIVE_TOL * max {
        return Err(Error::NotPositiveDefinite { min, max });
    }
    let mut out = SquareMatrix::zeros(d);
    for (k, &lam) in eig.values.iter().enumerate() {
        let w = 1.0 / lam.sqrt();
        for i in 0..d {
            let vik = eig.vectors[(i, k)] * w;
            for j in 0..d {
                out[(i, j)] += vik * eig.vectors[(j, k)];
            }
        }
    }
    // exact symmetry
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (out[(i, j)] + out[(j, i)]);
            out[(i, j)] = avg;
            out[(j, i)] = avg;
        }
    }
    Ok(out)
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` if a pivot is not positive.
pub fn solve_spd(a: &SquareMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let d = a.dim();
    assert_eq!(b.len(), d);
    let mut l = SquareMatrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum();
            if i == j {
                let v = a[(i, i)] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[(i, i)] = v.sqrt();
            } else {
                l[(i, j)] = (a[(i, j)] - s) / l[(j, j)];
            }
        }
    }
    let mut y = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[(i, k)] * y[k]).sum();
        y[i] = (b[i] - s) / l[(i, i)];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = ((i + 1)..d).map(|k| l[(k, i)] * x[k]).sum();
        x[i] = (y[i] - s) / l[(i, i)];
    }
    Some(x)
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}
