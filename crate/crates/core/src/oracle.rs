//! Closed-form reference values for lognormal instantaneous variance,
//! `d sigma^2 = alpha sigma^2 dW`.
//!
//! The Malliavin derivative of the variance is `D_s sigma_r^2 = alpha sigma_r^2`
//! for `s <= r`, and the variance is a martingale, which gives every value
//! here in closed form.

/// Short-maturity limit of the ATM skew `dI_0/dk`: `rho alpha / 4`.
pub fn slope_limit(rho: f64, alpha: f64) -> f64 {
    rho * alpha / 4.0
}

/// `E[int_t^T int_s^T D_s sigma_r^2 dr ds] = alpha sigma0^2 tau^2 / 2`.
pub fn theorem_double_integral(sigma0: f64, alpha: f64, tau: f64) -> f64 {
    0.5 * alpha * sigma0 * sigma0 * tau * tau
}

/// Small-maturity value of `E[realized_vol * int sigma dW]`:
/// `alpha sigma0^2 tau / 4`.
pub fn sigma_dw_small_tau(sigma0: f64, alpha: f64, tau: f64) -> f64 {
    0.25 * alpha * sigma0 * sigma0 * tau
}

/// Skew limit from the Malliavin double integral:
/// `rho / (2 sigma0^2) * double_integral / tau^2`.
pub fn theorem_rhs_limit(rho: f64, sigma0: f64, alpha: f64, tau: f64) -> f64 {
    rho / (2.0 * sigma0 * sigma0) * theorem_double_integral(sigma0, alpha, tau) / (tau * tau)
}

/// Skew limit from the volatility-swap covariance route:
/// `rho * sigma_dw_small_tau / (sigma0^2 tau)`.
pub fn swap_route_limit(rho: f64, sigma0: f64, alpha: f64, tau: f64) -> f64 {
    rho * sigma_dw_small_tau(sigma0, alpha, tau) / (sigma0 * sigma0 * tau)
}

/// All oracle values for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValues {
    pub slope_limit: f64,
    pub sigma_dw_small_tau: f64,
    pub theorem_double_integral: f64,
    pub theorem_rhs_limit: f64,
}

impl OracleValues {
    pub fn new(rho: f64, sigma0: f64, alpha: f64, tau: f64) -> Self {
        Self {
            slope_limit: slope_limit(rho, alpha),
            sigma_dw_small_tau: sigma_dw_small_tau(sigma0, alpha, tau),
            theorem_double_integral: theorem_double_integral(sigma0, alpha, tau),
            theorem_rhs_limit: theorem_rhs_limit(rho, sigma0, alpha, tau),
        }
    }
}
