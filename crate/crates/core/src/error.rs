use thiserror::Error;

/// Errors produced by the analytics, the Monte Carlo engine and the smile lab.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Domain(String),

    #[error("price {price} is outside the no-arbitrage bounds ({lower}, {upper})")]
    NoSolution { price: f64, lower: f64, upper: f64 },

    #[error("implied volatility did not converge after {iterations} iterations (best iterate {best}, residual {residual:e})")]
    NoConvergence {
        best: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("no implied volatility at strike {strike}: {source}")]
    Strike {
        strike: f64,
        #[source]
        source: Box<Error>,
    },

    #[error(
        "smile too noisy at strike {strike}: implied vol std error {std_error:e} exceeds {limit}"
    )]
    NoisySmile {
        strike: f64,
        std_error: f64,
        limit: f64,
    },

    #[error("skew window of half-width {half_width} holds {points} points, at least 5 are needed")]
    BandwidthTooSmall { half_width: f64, points: usize },

    #[error("strike range too narrow: d{side} does not change sign on [{k_low}, {k_high}]")]
    StrikeRangeTooNarrow { side: char, k_low: f64, k_high: f64 },

    #[error("extrapolation refused for {quantity}: std error {std_error:e} at tau {tau} exceeds {limit:e}")]
    ExtrapolationRefused {
        quantity: &'static str,
        tau: f64,
        std_error: f64,
        limit: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
