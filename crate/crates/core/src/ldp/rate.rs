use std::fmt::Write as _;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::format::g12;
use crate::increments::{IncrementDistribution, Preset};
use crate::numerics::{solve_spd, SquareMatrix};

const MAX_ITERATIONS: usize = 500;
const GRADIENT_TOL: f64 = 1e-12;
/// `‖λ‖` beyond `DIVERGENCE_SCALE / max‖u‖` with `g` still increasing means `I(x) = +∞`.
const DIVERGENCE_SCALE: f64 = 60.0;
/// Gradient norm that counts as "bounded away from zero" past the threshold.
const DIVERGENCE_GRADIENT: f64 = 1e-8;

/// A convex log-MGF `Λ` with derivatives, the input of the Legendre transform.
pub trait LogMgf {
    fn dim(&self) -> usize;

    /// `(Λ(λ), ∇Λ(λ), ∇²Λ(λ))`
    fn derivatives(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>, SquareMatrix)>;

    fn value(&self, lambda: &[f64]) -> Result<f64> {
        Ok(self.derivatives(lambda)?.0)
    }

    /// Radius beyond which an increasing objective is declared divergent.
    fn divergence_radius(&self) -> f64;
}

/// `Λ(λ) = e(λ) − 1`, the limit of the urn's scaled log-MGF.
#[derive(Debug, Clone, Copy)]
pub struct UrnLogMgf<'a>(pub &'a IncrementDistribution);

impl LogMgf for UrnLogMgf<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn derivatives(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>, SquareMatrix)> {
        let (e, g, h) = self.0.mgf_derivatives(lambda)?;
        let e = if lambda.iter().all(|&l| l == 0.0) { 1.0 } else { e };
        Ok((e - 1.0, g, h))
    }

    fn divergence_radius(&self) -> f64 {
        DIVERGENCE_SCALE / self.0.max_atom_norm()
    }
}

/// `log E[e^{<λ,W>}]` for the compound Poisson sum `W`, evaluated through the
/// Poisson mixture `Σ_k e^{-1}/k! e(λ)^k` rather than its closed form.
#[derive(Debug, Clone, Copy)]
pub struct CompoundPoissonLogMgf<'a>(pub &'a IncrementDistribution);

/// Above this `e(λ)` the Poisson series is not summed.
const SERIES_LIMIT: f64 = 1e5;

impl CompoundPoissonLogMgf<'_> {
    /// `(log G, G'/G, G''/G)` for `G(t) = Σ_k e^{-1} t^k / k!`, summed in log space.
    fn poisson_series(t: f64) -> Result<(f64, f64, f64)> {
        if !(t >= 0.0) || t > SERIES_LIMIT {
            return Err(Error::MgfOverflow(t.ln()));
        }
        if t == 0.0 {
            return Ok((-1.0, 1.0, 1.0));
        }
        let log_t = t.ln();
        // log of the k-th term without the e^{-1} factor
        let log_term = |k: u64| k as f64 * log_t - crate::numerics::ln_gamma(k as f64 + 1.0);
        let peak = t.floor() as u64;
        let peak_log = log_term(peak);
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut k = 0u64;
        loop {
            let w = (log_term(k) - peak_log).exp();
            s0 += w;
            // G'  = Σ_k k t^{k-1}/k!  =  Σ_k (k/t) term_k
            s1 += w * k as f64 / t;
            s2 += w * (k as f64) * (k as f64 - 1.0) / (t * t);
            if k > peak && w < 1e-18 * s0 {
                break;
            }
            k += 1;
        }
        Ok((peak_log + s0.ln() - 1.0, s1 / s0, s2 / s0))
    }
}

impl LogMgf for CompoundPoissonLogMgf<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn derivatives(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>, SquareMatrix)> {
        let (e, ge, he) = self.0.mgf_derivatives(lambda)?;
        let (log_g, d1, d2) = Self::poisson_series(e)?;
        let d = ge.len();
        let grad: Vec<f64> = ge.iter().map(|g| d1 * g).collect();
        let mut hess = he.scale(d1);
        let curvature = d2 - d1 * d1;
        for i in 0..d {
            for j in 0..d {
                hess[(i, j)] += curvature * ge[i] * ge[j];
            }
        }
        Ok((log_g, grad, hess))
    }

    fn divergence_radius(&self) -> f64 {
        DIVERGENCE_SCALE / self.0.max_atom_norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    Converged,
    DivergedToInfinity,
}

/// `I(x) = sup_λ {<x,λ> − Λ(λ)}` with its maximizer.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFunctionResult {
    pub x: Vec<f64>,
    /// `+∞` when diverged.
    pub value: f64,
    pub lambda_star: Option<Vec<f64>>,
    pub status: RateStatus,
    pub iterations: usize,
}

impl RateFunctionResult {
    pub fn is_finite(&self) -> bool {
        self.status == RateStatus::Converged
    }
}

fn extended_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

#[derive(Serialize)]
#[serde(untagged)]
enum Coords<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
}

impl<'a> Coords<'a> {
    fn of(v: &'a [f64]) -> Self {
        if v.len() == 1 {
            Coords::Scalar(v[0])
        } else {
            Coords::Vector(v)
        }
    }
}

impl Serialize for RateFunctionResult {
    /// Scalars in dimension one, arrays otherwise; an infinite value is the
    /// string `"inf"`.
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            x: Coords<'a>,
            #[serde(serialize_with = "extended_real")]
            value: f64,
            lambda_star: Option<Coords<'a>>,
            status: RateStatus,
            iterations: usize,
        }
        Repr {
            x: Coords::of(&self.x),
            value: self.value,
            lambda_star: self.lambda_star.as_deref().map(Coords::of),
            status: self.status,
            iterations: self.iterations,
        }
        .serialize(s)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Maximizes the concave `g(λ) = <x,λ> − Λ(λ)` by damped Newton from `λ = 0`.
///
/// Steps are capped in length and halved until `g` increases (or, once `g`
/// is flat to rounding, until the gradient shrinks). If `‖λ‖` passes the
/// divergence radius while `g` still increases with non-vanishing gradient,
/// the result is `+∞`.
pub fn legendre_transform<F: LogMgf>(x: &[f64], f: &F) -> Result<RateFunctionResult> {
    let d = f.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("x must be finite".into()));
    }
    let radius = f.divergence_radius();
    let max_step = if radius.is_finite() { radius / 4.0 } else { 1.0 };
    let tol = GRADIENT_TOL * (1.0 + norm(x));

    let mut lambda = vec![0.0; d];
    let (lam0, grad_lam, mut hess) = f.derivatives(&lambda)?;
    let mut g = -lam0;
    let mut grad: Vec<f64> = x.iter().zip(&grad_lam).map(|(a, b)| a - b).collect();

    for iteration in 0..MAX_ITERATIONS {
        let grad_norm = norm(&grad);
        if grad_norm <= tol {
            return Ok(RateFunctionResult {
                x: x.to_vec(),
                value: g,
                lambda_star: Some(lambda),
                status: RateStatus::Converged,
                iterations: iteration,
            });
        }
        // Newton direction on a slightly regularized Hessian
        let ridge = 1e-12 * (1.0 + (0..d).map(|i| hess[(i, i)].abs()).sum::<f64>());
        let reg = hess.add_scaled(&SquareMatrix::identity(d), ridge);
        let mut step = solve_spd(&reg, &grad).unwrap_or_else(|| grad.clone());
        let step_norm = norm(&step);
        if step_norm > max_step {
            step.iter_mut().for_each(|s| *s *= max_step / step_norm);
        }

        let mut t = 1.0;
        let mut accepted = None;
        while t > 1e-14 {
            let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, s)| l + t * s).collect();
            match f.derivatives(&trial) {
                Ok((val, gl, h)) => {
                    let inner: f64 = x.iter().zip(&trial).map(|(a, b)| a * b).sum();
                    let g_trial = inner - val;
                    let grad_trial: Vec<f64> = x.iter().zip(&gl).map(|(a, b)| a - b).collect();
                    let flat = g_trial >= g - 4.0 * f64::EPSILON * (1.0 + g.abs());
                    if g_trial > g || (flat && norm(&grad_trial) < grad_norm) {
                        accepted = Some((trial, g_trial, grad_trial, h));
                        break;
                    }
                }
                Err(Error::MgfOverflow(_)) => {}
                Err(e) => return Err(e),
            }
            t *= 0.5;
        }
        let Some((trial, g_trial, grad_trial, h)) = accepted else {
            // no ascent available: stationary to working precision
            break;
        };
        let increased = g_trial > g;
        lambda = trial;
        g = g_trial;
        grad = grad_trial;
        hess = h;
        if norm(&lambda) > radius && increased && norm(&grad) > DIVERGENCE_GRADIENT {
            return Ok(RateFunctionResult {
                x: x.to_vec(),
                value: f64::INFINITY,
                lambda_star: None,
                status: RateStatus::DivergedToInfinity,
                iterations: iteration + 1,
            });
        }
    }
    if norm(&grad) <= 1e-8 {
        let iterations = MAX_ITERATIONS;
        return Ok(RateFunctionResult {
            x: x.to_vec(),
            value: g,
            lambda_star: Some(lambda),
            status: RateStatus::Converged,
            iterations,
        });
    }
    Err(Error::InvalidArgument(format!(
        "rate function solver did not converge at x = {x:?} (gradient norm {:e})",
        norm(&grad)
    )))
}

/// `I(x)` for the urn, the Legendre transform of `e(λ) − 1`.
pub fn rate_function_numeric(x: &[f64], dist: &IncrementDistribution) -> Result<RateFunctionResult> {
    legendre_transform(x, &UrnLogMgf(dist))
}

/// Closed forms for the two one-dimensional presets:
/// `x log x − x + 1` (deterministic walk; `+∞` for `x < 0`, 1 at 0) and
/// `x asinh x − √(1+x²) + 1` (simple symmetric walk).
pub fn rate_function_closed(preset: Preset, x: f64) -> Result<f64> {
    match preset {
        Preset::Det1d => Ok(if x < 0.0 {
            f64::INFINITY
        } else if x == 0.0 {
            1.0
        } else {
            x * x.ln() - x + 1.0
        }),
        Preset::Ssrw1d => Ok(x * x.asinh() - (1.0 + x * x).sqrt() + 1.0),
        other => Err(Error::InvalidArgument(format!(
            "no closed-form rate function for preset {}",
            other.name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `sup over λ ≥ 0`
    Upper,
    /// `sup over λ ≤ 0`
    Lower,
}

/// One-sided supremum `sup_{±λ ≥ 0} {xλ − e(λ) + 1}` in dimension one, by
/// bisection on the monotone derivative `x − e'(λ)`.
pub fn one_sided_rate(x: f64, dist: &IncrementDistribution, side: Side) -> Result<f64> {
    if dist.dim() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: dist.dim(),
        });
    }
    let sign = match side {
        Side::Upper => 1.0,
        Side::Lower => -1.0,
    };
    // h(t) = g(sign·t), t ≥ 0; h'(t) = sign·(x − e'(sign·t)) is nonincreasing
    let slope = |t: f64| -> Result<f64> {
        let (_, grad) = dist.mgf_with_gradient(&[sign * t])?;
        Ok(sign * (x - grad[0]))
    };
    let value = |t: f64| -> Result<f64> {
        let l = sign * t;
        Ok(x * l - dist.mgf(&[l])? + 1.0)
    };
    if slope(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    let limit = DIVERGENCE_SCALE / dist.max_atom_norm();
    let mut hi = 1.0f64.min(limit);
    while slope(hi)? > 0.0 {
        if hi >= limit {
            // still ascending at the divergence radius
            return Ok(if slope(hi)? > DIVERGENCE_GRADIENT {
                f64::INFINITY
            } else {
                value(hi)?
            });
        }
        hi = (2.0 * hi).min(limit);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if slope(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(value(lo)?.max(value(hi)?))
}

/// CSV `x,I_numeric,I_closed,abs_err,lambda_star` (dimension one).
pub fn rate_rows_csv(rows: &[(RateFunctionResult, Option<f64>)]) -> String {
    let mut out = String::from("x,I_numeric,I_closed,abs_err,lambda_star\n");
    for (r, closed) in rows {
        let x: Vec<String> = r.x.iter().map(|&v| g12(v)).collect();
        let lam = r
            .lambda_star
            .as_ref()
            .map(|l| l.iter().map(|&v| g12(v)).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        let (closed_s, err_s) = match closed {
            Some(c) => {
                let err = if c.is_infinite() && r.value.is_infinite() {
                    0.0
                } else {
                    (r.value - c).abs()
                };
                (g12(*c), g12(err))
            }
            None => (String::new(), String::new()),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            x.join(";"),
            g12(r.value),
            closed_s,
            err_s,
            lam
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::LatticePoint;

    #[test]
    fn deterministic_walk_examples() {
        let det = Preset::Det1d.distribution();
        let r = rate_function_numeric(&[1.0], &det).unwrap();
        assert_eq!(r.status, RateStatus::Converged);
        assert!(r.value.abs() < 1e-15);
        assert!(r.lambda_star.as_ref().unwrap()[0].abs() < 1e-15);

        let r = rate_function_numeric(&[2.0], &det).unwrap();
        assert!((r.value - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
        assert!((r.lambda_star.as_ref().unwrap()[0] - 2f64.ln()).abs() < 1e-10);

        let r = rate_function_numeric(&[-0.5], &det).unwrap();
        assert_eq!(r.status, RateStatus::DivergedToInfinity);
        assert_eq!(r.value, f64::INFINITY);
        assert!(r.lambda_star.is_none());
    }

    #[test]
    fn boundary_point_has_finite_value() {
        // I(0) = 1 for the deterministic walk, approached as λ → −∞
        let det = Preset::Det1d.distribution();
        let r = rate_function_numeric(&[0.0], &det).unwrap();
        assert_eq!(r.status, RateStatus::Converged);
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ssrw_examples() {
        let ssrw = Preset::Ssrw1d.distribution();
        let r = rate_function_numeric(&[0.0], &ssrw).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.lambda_star.unwrap(), vec![0.0]);
        let closed = rate_function_closed(Preset::Ssrw1d, 1.0).unwrap();
        assert!((closed - 0.467160).abs() < 1e-6);
        assert!((rate_function_numeric(&[1.0], &ssrw).unwrap().value - closed).abs() < 1e-12);
        // e = cosh is unbounded, so every x has a finite rate
        let far = rate_function_numeric(&[1.5], &ssrw).unwrap();
        assert_eq!(far.status, RateStatus::Converged);
        assert!((far.value - rate_function_closed(Preset::Ssrw1d, 1.5).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn closed_forms() {
        assert_eq!(rate_function_closed(Preset::Det1d, 0.0).unwrap(), 1.0);
        assert_eq!(rate_function_closed(Preset::Det1d, 1.0).unwrap(), 0.0);
        assert_eq!(rate_function_closed(Preset::Det1d, -0.1).unwrap(), f64::INFINITY);
        assert!(rate_function_closed(Preset::Ne2d, 1.0).is_err());
    }

    #[test]
    fn two_dimensional_solve() {
        let ne = Preset::Ne2d.distribution();
        // e(λ) = (e^{λ1} + e^{λ2})/2 separates: I(x) = Σ_i (x_i log(2 x_i) − x_i + 1/2)
        let x = [0.3, 1.2];
        let r = rate_function_numeric(&x, &ne).unwrap();
        let expect: f64 = x.iter().map(|&v| v * (2.0 * v).ln() - v + 0.5).sum();
        assert!((r.value - expect).abs() < 1e-10);
        let out = rate_function_numeric(&[-0.1, 0.5], &ne).unwrap();
        assert_eq!(out.status, RateStatus::DivergedToInfinity);
    }

    #[test]
    fn degenerate_direction_uses_fallback() {
        // support on the diagonal: the Hessian is singular everywhere
        let diag = IncrementDistribution::new(
            2,
            vec![(LatticePoint(vec![1, 1]), 0.5), (LatticePoint(vec![-1, -1]), 0.5)],
        )
        .unwrap();
        let r = rate_function_numeric(&[0.5, 0.5], &diag).unwrap();
        let closed = rate_function_closed(Preset::Ssrw1d, 0.5).unwrap();
        assert_eq!(r.status, RateStatus::Converged);
        assert!((r.value - closed).abs() < 1e-8);
        let off = rate_function_numeric(&[0.5, -0.5], &diag).unwrap();
        assert_eq!(off.status, RateStatus::DivergedToInfinity);
    }

    #[test]
    fn compound_poisson_route_agrees() {
        for preset in [Preset::Det1d, Preset::Ssrw1d] {
            let dist = preset.distribution();
            for &x in &[0.2, 0.9, 1.0, 1.7, 3.0] {
                let a = legendre_transform(&[x], &UrnLogMgf(&dist)).unwrap();
                let b = legendre_transform(&[x], &CompoundPoissonLogMgf(&dist)).unwrap();
                assert!((a.value - b.value).abs() < 1e-10, "{preset:?} x={x}");
            }
        }
    }

    #[test]
    fn one_sided_matches_full() {
        let det = Preset::Det1d.distribution();
        let up = one_sided_rate(2.0, &det, Side::Upper).unwrap();
        assert!((up - rate_function_closed(Preset::Det1d, 2.0).unwrap()).abs() < 1e-12);
        assert_eq!(one_sided_rate(2.0, &det, Side::Lower).unwrap(), 0.0);
        assert_eq!(one_sided_rate(-0.5, &det, Side::Lower).unwrap(), f64::INFINITY);
    }

    #[test]
    fn json_shape() {
        let det = Preset::Det1d.distribution();
        let r = rate_function_numeric(&[2.0], &det).unwrap();
        let v: serde_json::Value = serde_json::to_value(&r).unwrap();
        assert_eq!(v["status"], "converged");
        assert!((v["value"].as_f64().unwrap() - 0.386294).abs() < 1e-6);
        assert!((v["lambda_star"].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-6);
        let inf = rate_function_numeric(&[-0.5], &det).unwrap();
        let v: serde_json::Value = serde_json::to_value(&inf).unwrap();
        assert_eq!(v["value"], "inf");
        assert_eq!(v["status"], "diverged_to_infinity");
        assert!(v["lambda_star"].is_null());
    }
}
