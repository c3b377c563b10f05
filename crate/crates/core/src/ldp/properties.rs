use serde::Serialize;

use crate::error::Result;
use crate::increments::IncrementDistribution;

use super::rate::{one_sided_rate, rate_function_numeric, Side};

const TOL: f64 = 1e-8;
/// Points per cube-face edge for the sphere search in `d ≥ 3`.
const CUBE_GRID: usize = 24;

/// `max e(λ)` over the unit sphere: both endpoints in `d = 1`, a 1° circle in
/// `d = 2`, a normalized cube-surface grid beyond.
pub fn sphere_mgf_max(dist: &IncrementDistribution) -> Result<f64> {
    let d = dist.dim();
    let mut best = f64::NEG_INFINITY;
    let mut visit = |v: &[f64]| -> Result<()> {
        best = best.max(dist.mgf(v)?);
        Ok(())
    };
    match d {
        1 => {
            visit(&[1.0])?;
            visit(&[-1.0])?;
        }
        2 => {
            for deg in 0..360 {
                let t = (deg as f64).to_radians();
                visit(&[t.cos(), t.sin()])?;
            }
        }
        _ => {
            // points with one coordinate at ±1, the rest on a grid in [-1, 1]
            let m = CUBE_GRID;
            let mut v = vec![0.0; d];
            for face in 0..d {
                for sign in [-1.0, 1.0] {
                    let free = d - 1;
                    let total = (m + 1).pow(free as u32);
                    for mut idx in 0..total {
                        for (k, c) in v.iter_mut().enumerate() {
                            if k == face {
                                *c = sign;
                            } else {
                                *c = -1.0 + 2.0 * (idx % (m + 1)) as f64 / m as f64;
                                idx /= m + 1;
                            }
                        }
                        let norm = v.iter().map(|c| c * c).sum::<f64>().sqrt();
                        let u: Vec<f64> = v.iter().map(|c| c / norm).collect();
                        visit(&u)?;
                    }
                }
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    /// `false` when the check does not apply (monotonicity for `d > 1`).
    pub applicable: bool,
    pub passed: bool,
    pub failures: Vec<String>,
}

impl PropertyCheck {
    fn new(name: &'static str, applicable: bool, failures: Vec<String>) -> Self {
        Self {
            name,
            applicable,
            passed: failures.is_empty(),
            failures,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub checks: Vec<PropertyCheck>,
    /// `max e` over the unit sphere used by the growth bound.
    pub sphere_max: f64,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn fmt_point(x: &[f64]) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v}")).collect();
    format!("({})", parts.join(","))
}

/// Convexity, one-dimensional monotonicity, linear growth and the zero at the
/// mean of the numerically computed rate function over `grid`.
///
/// Midpoint convexity is tested on every pair, so the cost is quadratic in the
/// grid size.
pub fn rate_properties(dist: &IncrementDistribution, grid: &[Vec<f64>]) -> Result<PropertyReport> {
    let d = dist.dim();
    for x in grid {
        if x.len() != d {
            return Err(crate::Error::DimensionMismatch {
                expected: d,
                got: x.len(),
            });
        }
    }
    let values: Vec<f64> = grid
        .iter()
        .map(|x| rate_function_numeric(x, dist).map(|r| r.value))
        .collect::<Result<_>>()?;

    let mut convex = Vec::new();
    for i in 0..grid.len() {
        for j in i + 1..grid.len() {
            if !(values[i].is_finite() && values[j].is_finite()) {
                continue;
            }
            let mid: Vec<f64> = grid[i].iter().zip(&grid[j]).map(|(a, b)| 0.5 * (a + b)).collect();
            let im = rate_function_numeric(&mid, dist)?.value;
            let chord = 0.5 * (values[i] + values[j]);
            if !(im <= chord + TOL) {
                convex.push(format!(
                    "I{} = {im} > {chord} between {} and {}",
                    fmt_point(&mid),
                    fmt_point(&grid[i]),
                    fmt_point(&grid[j])
                ));
            }
        }
    }

    let mu = dist.mean();
    let mut monotone = Vec::new();
    if d == 1 {
        let m = mu[0];
        let mut order: Vec<usize> = (0..grid.len()).collect();
        order.sort_by(|&a, &b| grid[a][0].total_cmp(&grid[b][0]));
        for w in order.windows(2) {
            let (a, b) = (w[0], w[1]);
            let (xa, xb) = (grid[a][0], grid[b][0]);
            if xa >= m && values[b] < values[a] - TOL {
                monotone.push(format!("I decreases right of the mean: I({xa}) = {} > I({xb}) = {}", values[a], values[b]));
            }
            if xb <= m && values[a] < values[b] - TOL {
                monotone.push(format!("I increases left of the mean: I({xa}) = {} < I({xb}) = {}", values[a], values[b]));
            }
        }
        for (x, &v) in grid.iter().zip(&values) {
            let side = if x[0] >= m { Side::Upper } else { Side::Lower };
            let one = one_sided_rate(x[0], dist, side)?;
            let agree = if v.is_infinite() || one.is_infinite() {
                v == one
            } else {
                (v - one).abs() <= TOL
            };
            if !agree {
                monotone.push(format!("one-sided supremum at {} is {one}, full transform {v}", x[0]));
            }
        }
    }

    let sphere_max = sphere_mgf_max(dist)?;
    let mut growth = Vec::new();
    for (x, &v) in grid.iter().zip(&values) {
        let norm = x.iter().map(|c| c * c).sum::<f64>().sqrt();
        let lower = norm - sphere_max + 1.0;
        if !(v >= lower - TOL) {
            growth.push(format!("I{} = {v} below {lower}", fmt_point(x)));
        }
    }

    let mut minimum = Vec::new();
    let at_mean = rate_function_numeric(mu, dist)?;
    if at_mean.value.abs() > TOL {
        minimum.push(format!("I(mean) = {}", at_mean.value));
    }
    for (x, &v) in grid.iter().zip(&values) {
        if v < at_mean.value - TOL {
            minimum.push(format!("I{} = {v} below I(mean) = {}", fmt_point(x), at_mean.value));
        }
    }

    Ok(PropertyReport {
        checks: vec![
            PropertyCheck::new("midpoint_convexity", true, convex),
            PropertyCheck::new("monotone_one_sided", d == 1, monotone),
            PropertyCheck::new("growth_bound", true, growth),
            PropertyCheck::new("zero_at_mean", true, minimum),
        ],
        sphere_max,
    })
}
