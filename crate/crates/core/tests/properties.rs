use proptest::prelude::*;

use urnlab::berry_esseen::{rho_moments_1d, rho_moments_d, sigma_n};
use urnlab::ldp::{lambda_n, rate_function_numeric, RateStatus};
use urnlab::numerics::{determinant, spd_sqrt_inverse, symmetric_eigen, std_normal_cdf, SquareMatrix};
use urnlab::urn::exact_pmf;
use urnlab::{IncrementDistribution, LatticePmf, LatticePoint};

/// Random law on up to six atoms in `[-3, 3]^d`.
fn distribution(dim: usize) -> impl Strategy<Value = IncrementDistribution> {
    prop::collection::btree_map(prop::collection::vec(-3i64..=3, dim), 1u32..20, 1..=6).prop_map(move |atoms| {
        let total: u32 = atoms.values().sum();
        let atoms = atoms
            .into_iter()
            .map(|(p, w)| (LatticePoint(p), w as f64 / total as f64))
            .collect();
        IncrementDistribution::new(dim, atoms).unwrap()
    })
}

fn any_distribution() -> impl Strategy<Value = IncrementDistribution> {
    (1usize..=3).prop_flat_map(distribution)
}

/// A law with a step count small enough for its exact pmf box.
fn distribution_and_n() -> impl Strategy<Value = (IncrementDistribution, u64)> {
    (1usize..=3).prop_flat_map(|d| {
        let cap: u64 = [0, 80, 40, 12][d];
        (distribution(d), 1u64..cap)
    })
}

/// `A Aᵀ + c I` for a random `A`.
fn spd_matrix() -> impl Strategy<Value = SquareMatrix> {
    (1usize..=5).prop_flat_map(|d| {
        (prop::collection::vec(-2.0f64..2.0, d * d), 0.05f64..1.0).prop_map(move |(a, c)| {
            let a = SquareMatrix::from_row_major(d, a).unwrap();
            a.matmul(&a.transpose()).add_scaled(&SquareMatrix::identity(d), c)
        })
    })
}

fn max_diff(a: &SquareMatrix, b: &SquareMatrix) -> f64 {
    a.entries().iter().zip(b.entries()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mgf_at_zero_and_gradient(dist in any_distribution()) {
        let zero = vec![0.0; dist.dim()];
        prop_assert_eq!(dist.mgf(&zero).unwrap(), 1.0);
        let (_, grad) = dist.mgf_with_gradient(&zero).unwrap();
        for (g, m) in grad.iter().zip(dist.mean()) {
            prop_assert!((g - m).abs() < 1e-14);
        }
    }

    #[test]
    fn mgf_gradient_matches_finite_differences(
        dist in any_distribution(),
        seed in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let d = dist.dim();
        let lambda = &seed[..d];
        let (_, grad, hess) = dist.mgf_derivatives(lambda).unwrap();
        let h = 1e-6;
        for i in 0..d {
            let mut up = lambda.to_vec();
            let mut down = lambda.to_vec();
            up[i] += h;
            down[i] -= h;
            let fd = (dist.mgf(&up).unwrap() - dist.mgf(&down).unwrap()) / (2.0 * h);
            prop_assert!((fd - grad[i]).abs() < 1e-6 * (1.0 + grad[i].abs()), "grad {i}: {fd} vs {}", grad[i]);
            let (_, gu) = dist.mgf_with_gradient(&up).unwrap();
            let (_, gd) = dist.mgf_with_gradient(&down).unwrap();
            for j in 0..d {
                let fd = (gu[j] - gd[j]) / (2.0 * h);
                prop_assert!((fd - hess[(i, j)]).abs() < 1e-6 * (1.0 + hess[(i, j)].abs()));
            }
        }
    }

    #[test]
    fn covariance_is_psd(dist in any_distribution()) {
        let cov = dist.second_moment().add_scaled(dist.mean_outer(), -1.0);
        let eig = symmetric_eigen(&cov).unwrap();
        prop_assert!(eig.values[0] >= -1e-12);
    }

    #[test]
    fn sqrt_inverse_whitens(a in spd_matrix()) {
        let b = spd_sqrt_inverse(&a).unwrap();
        let id = SquareMatrix::identity(a.dim());
        let whitened = b.matmul(&a).matmul(&b);
        prop_assert!(max_diff(&whitened, &id) < 1e-10, "{whitened:?}");
        prop_assert!(b.max_asymmetry() < 1e-12);
    }

    #[test]
    fn determinant_is_eigenvalue_product(a in spd_matrix()) {
        let eig = symmetric_eigen(&a).unwrap();
        let product: f64 = eig.values.iter().product();
        let det = determinant(&a);
        prop_assert!((det - product).abs() <= 1e-10 * product.abs().max(1.0), "{det} vs {product}");
    }

    #[test]
    fn normal_cdf_reflection(x in -8.0f64..8.0) {
        prop_assert!((std_normal_cdf(x) + std_normal_cdf(-x) - 1.0).abs() <= 1e-14);
    }

    #[test]
    fn exact_pmf_is_a_deterministic_probability((dist, n) in distribution_and_n()) {
        let u0 = LatticePmf::delta0(dist.dim());
        let a = exact_pmf(n, &u0, &dist).unwrap();
        let b = exact_pmf(n, &u0, &dist).unwrap();
        prop_assert_eq!(a.masses(), b.masses());
        prop_assert!((a.total_mass() - 1.0).abs() < 1e-12);
        prop_assert!(a.masses().iter().all(|&m| m >= 0.0));
    }

    #[test]
    fn exact_mean_and_covariance((dist, n) in distribution_and_n()) {
        let d = dist.dim();
        let pmf = exact_pmf(n, &LatticePmf::delta0(d), &dist).unwrap();
        let h: f64 = (1..=n).map(|j| 1.0 / (j + 1) as f64).sum();
        for (m, mu) in pmf.mean().iter().zip(dist.mean()) {
            prop_assert!((m - mu * h).abs() < 1e-10 * (1.0 + (mu * h).abs()));
        }
        let cov = pmf.covariance();
        let target = sigma_n(n, &dist);
        prop_assert!(max_diff(&cov, &target) < 1e-9 * (1.0 + target.max_abs()));
    }

    #[test]
    fn d_moments_reduce_in_dimension_one(dist in distribution(1), n in 1u64..5000) {
        let one = rho_moments_1d(n, &dist).unwrap();
        if let Ok(d) = rho_moments_d(n, &dist) {
            prop_assert!((one.rho2 - d.rho2).abs() <= 1e-12 * one.rho2.abs().max(1.0));
            prop_assert!((one.rho3 - d.rho3).abs() <= 1e-12 * one.rho3.abs().max(1.0));
        }
    }

    #[test]
    fn lambda_n_vanishes_at_zero(dist in any_distribution(), n in 2u64..1_000_000) {
        prop_assert_eq!(lambda_n(&vec![0.0; dist.dim()], n, &dist).unwrap(), 0.0);
    }

    #[test]
    fn rate_first_order_condition(dist in distribution(1), t in 0.05f64..0.95) {
        // a point strictly inside the convex hull of the support
        let lo = dist.atoms().iter().map(|(p, _)| p.0[0]).min().unwrap() as f64;
        let hi = dist.atoms().iter().map(|(p, _)| p.0[0]).max().unwrap() as f64;
        prop_assume!(hi > lo);
        let x = lo + t * (hi - lo);
        let r = rate_function_numeric(&[x], &dist).unwrap();
        prop_assert_eq!(r.status, RateStatus::Converged);
        let lambda = r.lambda_star.unwrap();
        let (_, grad) = dist.mgf_with_gradient(&lambda).unwrap();
        prop_assert!((grad[0] - x).abs() < 1e-8, "{} vs {x}", grad[0]);
        prop_assert!(r.value >= 0.0);
    }
}
