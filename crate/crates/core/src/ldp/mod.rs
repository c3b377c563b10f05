//! Large deviations of `Z_n / log n` at speed `log n`.
//!
//! The scaled log-MGF `Λ_n(λ) = log E[e^{<λ,Z_n>}] / log n` converges to
//! `e(λ) − 1`, whose Legendre transform `I` is the rate function. `e − 1` is
//! also the log-MGF of the compound Poisson sum `W = X_1 + … + X_N`,
//! `N ~ Poisson(1)`, which gives an independent route to `I` and to tails.

mod compound;
mod gauss;
mod properties;
mod rate;
mod tails;

pub use compound::{compound_poisson_pmf, compound_poisson_sample, sample_poisson_one, CompoundPoisson};
pub use gauss::{gauss_ratio, lambda_n, lambda_n_with_start, log_product_pi, lambda_n_csv, LambdaRow};
pub use properties::{rate_properties, sphere_mgf_max, PropertyCheck, PropertyReport};
pub use rate::{
    legendre_transform, one_sided_rate, rate_function_closed, rate_function_numeric, rate_rows_csv,
    CompoundPoissonLogMgf, LogMgf, RateFunctionResult, RateStatus, Side, UrnLogMgf,
};
pub use tails::{
    tail_exponent_report, tail_records_csv, tilted_tail_mc, TailEstimate, TailMethod, TailRecord,
    TailReportOptions,
};
