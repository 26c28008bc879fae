//! Black-Merton-Scholes analytics with zero rates and dividends.
//!
//! Prices are evaluated on the out-of-the-money side and in-the-money calls are
//! recovered by parity, so small time values keep full relative precision. The
//! implied volatility solver works on the logarithm of the out-of-the-money
//! price for the same reason.

use crate::error::{domain, Error, Result};

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Lower end of the implied volatility search bracket (annualized).
pub const IV_LOWER: f64 = 1e-8;
/// Upper end of the implied volatility search bracket (annualized).
pub const IV_UPPER: f64 = 5.0;
/// Iteration cap of the implied volatility solver.
pub const IV_MAX_ITER: usize = 100;

/// Standard normal distribution function via `erfc`, accurate to a few ulps
/// over the whole real line.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Which of the two zero-vanna conditions, `d- = 0` or `d+ = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Minus,
    Plus,
}

impl Side {
    pub fn symbol(self) -> char {
        match self {
            Side::Minus => '-',
            Side::Plus => '+',
        }
    }
}

/// Log spot `x = ln S` and log strike `k = ln K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogCoords {
    pub x: f64,
    pub k: f64,
}

impl LogCoords {
    pub fn from_prices(spot: f64, strike: f64) -> Result<Self> {
        if !(spot > 0.0 && spot.is_finite()) || !(strike > 0.0 && strike.is_finite()) {
            return Err(domain(format!(
                "spot and strike must be positive, got {spot} and {strike}"
            )));
        }
        Ok(Self {
            x: spot.ln(),
            k: strike.ln(),
        })
    }

    pub fn spot(&self) -> f64 {
        self.x.exp()
    }

    pub fn strike(&self) -> f64 {
        self.k.exp()
    }

    /// Log-moneyness `x - k`.
    pub fn moneyness(&self) -> f64 {
        self.x - self.k
    }
}

/// Validated inputs of the Black-Scholes formula.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BSInputs {
    spot: f64,
    strike: f64,
    vol: f64,
    tau: f64,
}

impl BSInputs {
    pub fn new(spot: f64, strike: f64, vol: f64, tau: f64) -> Result<Self> {
        for (name, v) in [
            ("spot", spot),
            ("strike", strike),
            ("vol", vol),
            ("tau", tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(Self {
            spot,
            strike,
            vol,
            tau,
        })
    }

    pub fn from_log(coords: LogCoords, vol: f64, tau: f64) -> Result<Self> {
        Self::new(coords.spot(), coords.strike(), vol, tau)
    }

    pub fn spot(&self) -> f64 {
        self.spot
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn vol(&self) -> f64 {
        self.vol
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_vol(&self, vol: f64) -> Result<Self> {
        Self::new(self.spot, self.strike, vol, self.tau)
    }

    fn log_moneyness(&self) -> f64 {
        (self.spot / self.strike).ln()
    }

    fn total_vol(&self) -> f64 {
        self.vol * self.tau.sqrt()
    }
}

/// `(d+, d-)` for the given inputs.
pub fn d_plus_minus(b: &BSInputs) -> (f64, f64) {
    d_pair(b.log_moneyness(), b.total_vol())
}

#[inline]
fn d_pair(log_moneyness: f64, total_vol: f64) -> (f64, f64) {
    let a = log_moneyness / total_vol;
    let h = 0.5 * total_vol;
    (a + h, a - h)
}

/// `d+` or `d-` from log coordinates; the zero-vanna conditions are roots of this.
pub fn d_side(x: f64, k: f64, vol: f64, tau: f64, side: Side) -> f64 {
    let (dp, dm) = d_pair(x - k, vol * tau.sqrt());
    match side {
        Side::Plus => dp,
        Side::Minus => dm,
    }
}

/// Undiscounted call price `S N(d+) - K N(d-)`.
pub fn bs_price(b: &BSInputs) -> f64 {
    let otm = bs_otm_price(b);
    if b.strike >= b.spot {
        otm
    } else {
        (b.spot - b.strike) + otm
    }
}

#[inline]
fn otm_price(spot: f64, strike: f64, log_moneyness: f64, total_vol: f64) -> f64 {
    let (dp, dm) = d_pair(log_moneyness, total_vol);
    let v = if strike >= spot {
        spot * norm_cdf(dp) - strike * norm_cdf(dm)
    } else {
        strike * norm_cdf(-dm) - spot * norm_cdf(-dp)
    };
    v.max(0.0)
}

/// `dC/dvol = S phi(d+) sqrt(tau)`.
pub fn bs_vega(b: &BSInputs) -> f64 {
    let (dp, _) = d_plus_minus(b);
    b.spot * norm_pdf(dp) * b.tau.sqrt()
}

/// Price of the out-of-the-money option: the call when `K >= S`, else the put
/// (by parity). Carries full relative precision where the call price does not.
pub fn bs_otm_price(b: &BSInputs) -> f64 {
    otm_price(b.spot, b.strike, b.log_moneyness(), b.total_vol())
}

fn check_market(spot: f64, strike: f64, tau: f64) -> Result<()> {
    if !(spot > 0.0 && spot.is_finite())
        || !(strike > 0.0 && strike.is_finite())
        || !(tau > 0.0 && tau.is_finite())
    {
        return Err(domain(format!(
            "spot, strike and tau must be positive, got {spot}, {strike}, {tau}"
        )));
    }
    Ok(())
}

/// Implied volatility of an undiscounted call.
///
/// Safeguarded Newton on `ln(otm price)` inside the bracket
/// `[IV_LOWER, IV_UPPER]`. Prices on or outside the no-arbitrage bounds
/// `(max(S - K, 0), S)` are rejected with [`Error::NoSolution`].
pub fn implied_vol(price: f64, spot: f64, strike: f64, tau: f64) -> Result<f64> {
    check_market(spot, strike, tau)?;
    let intrinsic = (spot - strike).max(0.0);
    let no_solution = Error::NoSolution {
        price,
        lower: intrinsic,
        upper: spot,
    };
    if !(price > intrinsic && price < spot) {
        return Err(no_solution);
    }
    let target = if strike >= spot {
        price
    } else {
        price - (spot - strike)
    };
    if target <= 0.0 {
        return Err(no_solution);
    }
    implied_vol_otm(target, spot, strike, tau)
}

/// Mills ratio `N(-x) / phi(x)`; continued fraction beyond 4, where the
/// direct ratio loses digits and eventually underflows.
fn mills_ratio(x: f64) -> f64 {
    if x < 4.0 {
        0.5 * libm::erfc(x / SQRT_2) / norm_pdf(x)
    } else {
        let mut t = x;
        for k in (1..=40).rev() {
            t = x + k as f64 / t;
        }
        1.0 / t
    }
}

/// `ln(otm price)` and its derivative in total vol `s = vol sqrt(tau)`, from
/// `otm = min(S, K) phi(u) (R(u) - R(u + s))`, `u = |ln(S/K)| / s - s / 2`.
fn log_otm_price(spot: f64, strike: f64, log_moneyness: f64, total_vol: f64) -> (f64, f64) {
    let u = log_moneyness.abs() / total_vol - 0.5 * total_vol;
    let diff = mills_ratio(u) - mills_ratio(u + total_vol);
    if !(diff > 0.0) {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let ln_phi = -0.5 * u * u + INV_SQRT_2PI.ln();
    (spot.min(strike).ln() + ln_phi + diff.ln(), 1.0 / diff)
}

/// Natural log of [`bs_otm_price`]; finite even where the price underflows.
pub fn bs_log_otm_price(b: &BSInputs) -> f64 {
    log_otm_price(b.spot, b.strike, b.log_moneyness(), b.total_vol()).0
}

struct Solve {
    vol: f64,
    /// `ln(otm(vol)) - ln(target)`.
    gap: f64,
    iterations: usize,
    bracketed: bool,
}

/// Safeguarded Newton on `ln(otm price)` in vol over `[IV_LOWER, IV_UPPER]`.
fn solve_log_otm(ln_target: f64, spot: f64, strike: f64, tau: f64) -> Solve {
    let m = (spot / strike).ln();
    let sqrt_tau = tau.sqrt();
    // gap and its derivative in vol
    let eval = |vol: f64| {
        let (lp, dlp) = log_otm_price(spot, strike, m, vol * sqrt_tau);
        (lp - ln_target, dlp * sqrt_tau)
    };
    let (mut lo, mut hi) = (IV_LOWER, IV_UPPER);
    for (edge, bad) in [(hi, eval(hi).0 < 0.0), (lo, eval(lo).0 > 0.0)] {
        if bad {
            return Solve {
                vol: edge,
                gap: eval(edge).0,
                iterations: 0,
                bracketed: false,
            };
        }
    }

    // Start at the inflection point of the price in vol when off the money,
    // where Newton on the price is monotone; Brenner-Subrahmanyam at the money.
    let mut vol = if m.abs() > 1e-12 {
        (2.0 * m.abs() / tau).sqrt()
    } else {
        (ln_target - spot.ln()).exp() * (2.0 * std::f64::consts::PI / tau).sqrt()
    };
    vol = vol.clamp(lo * 2.0, hi * 0.5);

    let mut gap = f64::NAN;
    for iter in 1..=IV_MAX_ITER {
        let (g, slope) = eval(vol);
        gap = g;
        if g == 0.0 {
            return Solve {
                vol,
                gap,
                iterations: iter,
                bracketed: true,
            };
        }
        if g > 0.0 {
            hi = vol;
        } else {
            lo = vol;
        }
        let newton = vol - g / slope;
        let next = if newton > lo && newton < hi {
            newton
        } else if hi > 4.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - vol).abs();
        vol = next;
        if step <= 4.0 * f64::EPSILON * vol
            || g.abs() <= 1e-15
            || hi - lo <= 4.0 * f64::EPSILON * hi
        {
            return Solve {
                vol,
                gap: eval(vol).0,
                iterations: iter,
                bracketed: true,
            };
        }
    }
    Solve {
        vol,
        gap,
        iterations: IV_MAX_ITER,
        bracketed: true,
    }
}

/// Implied volatility from the out-of-the-money price (see [`bs_otm_price`]),
/// which must lie strictly inside `(0, min(S, K))`.
pub fn implied_vol_otm(target: f64, spot: f64, strike: f64, tau: f64) -> Result<f64> {
    check_market(spot, strike, tau)?;
    let upper = spot.min(strike);
    if !(target > 0.0 && target < upper) {
        return Err(Error::NoSolution {
            price: target,
            lower: 0.0,
            upper,
        });
    }
    let sol = solve_log_otm(target.ln(), spot, strike, tau);
    let m = (spot / strike).ln();
    let residual = (otm_price(spot, strike, m, sol.vol * tau.sqrt()) - target).abs();
    if sol.bracketed && residual <= (1e-10 * spot).max(1e-12) {
        return Ok(sol.vol);
    }
    Err(Error::NoConvergence {
        best: sol.vol,
        residual,
        iterations: sol.iterations,
    })
}

/// Implied volatility from `ln(otm price)` (see [`bs_log_otm_price`]), for
/// prices too small to represent. Converged when the relative price error is
/// below `1e-9`.
pub fn implied_vol_log_otm(ln_price: f64, spot: f64, strike: f64, tau: f64) -> Result<f64> {
    check_market(spot, strike, tau)?;
    let upper = spot.min(strike);
    if !(ln_price.is_finite() && ln_price < upper.ln()) {
        return Err(Error::NoSolution {
            price: ln_price.exp(),
            lower: 0.0,
            upper,
        });
    }
    let sol = solve_log_otm(ln_price, spot, strike, tau);
    if sol.bracketed && sol.gap.abs() <= 1e-9 {
        return Ok(sol.vol);
    }
    Err(Error::NoConvergence {
        best: sol.vol,
        residual: sol.gap.abs(),
        iterations: sol.iterations,
    })
}

/// Zero-vanna log strike of a flat smile: `k- = x - vol^2 tau / 2` solves
/// `d- = 0`, `k+ = x + vol^2 tau / 2` solves `d+ = 0`.
pub fn zero_vanna_strike_flat(x: f64, vol: f64, tau: f64, side: Side) -> f64 {
    let half = 0.5 * vol * vol * tau;
    match side {
        Side::Minus => x - half,
        Side::Plus => x + half,
    }
}
