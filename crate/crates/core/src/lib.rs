//! Short-maturity implied volatility skew, volatility swaps and zero-vanna
//! implied volatilities under a stochastic volatility model with lognormal
//! instantaneous variance.
//!
//! - [`bs`]: Black-Scholes analytics and implied volatility.
//! - [`engine`]: Monte Carlo engine (mixing estimators, volatility swaps).
//! - [`smile`]: smiles from Monte Carlo prices, ATM skew, zero-vanna solving.
//! - [`lab`]: approximation checks and maturity-ladder limit experiments.
//! - [`oracle`]: closed-form reference values for the lognormal model.

pub mod bs;
pub mod engine;
pub mod error;
pub mod lab;
pub mod oracle;
pub mod rng;
pub mod smile;
pub mod stats;

pub use bs::{
    bs_log_otm_price, bs_otm_price, bs_price, bs_vega, d_plus_minus, implied_vol,
    implied_vol_log_otm, implied_vol_otm, zero_vanna_strike_flat, BSInputs, LogCoords, Side,
};
pub use engine::{
    conditional_call_price, dual_vol_swap, return_vol_covariance, sigma_dw_expectation,
    simulate_path, vol_swap, GridSpec, ModelSpec, PathBundle,
};
pub use error::{Error, Result};
pub use stats::{EstimateWithError, JointEstimate};
