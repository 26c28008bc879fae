//! Experiments relating the ATM skew, (dual) volatility swaps and (dual)
//! zero-vanna implied vols, one maturity at a time and along a maturity ladder
//! extrapolated to zero.

use crate::bs::{bs_vega, BSInputs};
use crate::engine::{default_steps, estimate_controlled, GridSpec, ModelSpec};
use crate::error::{domain, Error, Result};
use crate::oracle;
use crate::rng::derive_seed;
use crate::smile::{
    add_control_means, atm_skew, controlled_call, default_strikes, smile_from_prices,
    zero_vanna_sensitivity, SkewEstimate, Smile, ZeroVannaPair,
};
use crate::stats::{EstimateWithError, JointEstimate};

/// Shortest maturity accepted on a ladder (years).
pub const MIN_LADDER_TAU: f64 = 1.0 / 1024.0;

/// Extrapolation is refused when a rung's standard error exceeds this share
/// of the ladder scale (see [`extrapolate_to_zero`]).
pub const MAX_ERROR_SHARE: f64 = 0.25;

/// Smallest ladder scale used by [`limit_experiment`]'s refusal rule, for
/// ladders whose exact values are all zero.
pub const RESOLUTION_FLOOR: f64 = 1e-8;

// extra path functionals after the strike prices
const VOL: usize = 0;
const DUAL_VOL: usize = 1;
const COVARIANCE: usize = 2;
const SIGMA_DW: usize = 3;
const MART: usize = 4;
const EXTRAS: usize = 5;

/// Everything measured at one maturity from a single set of paths.
#[derive(Debug, Clone, PartialEq)]
pub struct Rung {
    pub model: ModelSpec,
    pub grid: GridSpec,
    pub smile: Smile,
    pub skew: SkewEstimate,
    pub zero_vanna: ZeroVannaPair,
    pub vol_swap: EstimateWithError,
    pub dual_vol_swap: EstimateWithError,
    /// `E[(e^{x_T - x_t} - 1) realized_vol]`.
    pub covariance: EstimateWithError,
    /// `E[realized_vol * int sigma dW]`.
    pub sigma_dw: EstimateWithError,
    /// Sample mean of `e^{M_T}`, which should be one.
    pub mart_mean: EstimateWithError,
    /// `i_minus` and `i_plus` with their standard errors.
    pub i_minus: EstimateWithError,
    pub i_plus: EstimateWithError,
    /// `vol_swap - i_minus`.
    pub swap_gap_minus: EstimateWithError,
    /// `dual_vol_swap - i_plus`.
    pub swap_gap_plus: EstimateWithError,
    /// `i_plus - i_minus`.
    pub zv_spread: EstimateWithError,
    /// `rho * sigma_dw`.
    pub rho_sigma_dw: EstimateWithError,
    /// `(i_plus - i_minus) - rho * sigma_dw`.
    pub spread_gap: EstimateWithError,
    /// Normalized skew, covariance and zero-vanna spread.
    pub q_skew: EstimateWithError,
    pub q_cov: EstimateWithError,
    pub q_zv: EstimateWithError,
    pub heavy_tail: bool,
}

impl Rung {
    pub fn tau(&self) -> f64 {
        self.model.tau
    }

    /// `(i_plus - i0) + (i_minus - i0)`.
    pub fn equidistance_gap(&self) -> f64 {
        self.zero_vanna.i_plus + self.zero_vanna.i_minus - 2.0 * self.skew.i0
    }

    /// `2 dk / (I_0^2 tau)` with `2 dk = k_plus - k_minus`.
    pub fn strike_spread_ratio(&self) -> f64 {
        let z = &self.zero_vanna;
        (z.k_plus - z.k_minus) / (self.skew.i0 * self.skew.i0 * self.tau())
    }

    /// `I_0^2 tau * slope - (i_plus - i_minus)`.
    pub fn res1_gap(&self) -> f64 {
        self.skew.i0 * self.skew.i0 * self.tau() * self.skew.slope - self.zv_spread.value
    }
}

fn linear(joint: &JointEstimate, grad: &[f64], value: f64) -> EstimateWithError {
    EstimateWithError {
        value,
        std_error: joint.linear_std_error(grad),
        n: joint.n,
    }
}

/// Simulates one maturity and derives every rung quantity from the same paths.
pub fn run_rung(m: &ModelSpec, g: &GridSpec, strikes: &[f64]) -> Result<Rung> {
    let n = strikes.len();
    let dim = n + EXTRAS;
    // everything but the martingale check gets the path control variates
    let targets: Vec<usize> = (0..n + MART).collect();
    let mut joint = estimate_controlled(m, g, dim, &targets, |p, out| {
        for (o, &k) in out[..n].iter_mut().zip(strikes) {
            *o = controlled_call(m, p, k);
        }
        let e = &mut out[n..];
        e[VOL] = p.realized_vol;
        e[DUAL_VOL] = p.mart_factor * p.realized_vol;
        e[COVARIANCE] = (p.mart_factor - 1.0) * p.realized_vol;
        e[SIGMA_DW] = p.realized_vol * p.int_sigma_dw;
        e[MART] = p.mart_factor;
    })?;
    add_control_means(m, strikes, &mut joint, 0)?;
    let smile = smile_from_prices(m, strikes, &joint, 0)?;
    let skew = atm_skew(&smile)?;
    let sens = zero_vanna_sensitivity(&smile)?;
    let z = sens.pair;

    let inv_vega: Vec<f64> = smile
        .points()
        .iter()
        .zip(strikes)
        .map(|(p, &k)| Ok(1.0 / bs_vega(&BSInputs::new(m.spot, k, p.iv, m.tau)?)))
        .collect::<Result<_>>()?;
    let price_grad = |d_iv: &[f64], scale: f64| -> Vec<f64> {
        let mut g = vec![0.0; dim];
        for j in 0..n {
            g[j] = scale * d_iv[j] * inv_vega[j];
        }
        g
    };
    let unit = |i: usize, scale: f64| {
        let mut g = vec![0.0; dim];
        g[n + i] = scale;
        g
    };
    let add = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + y).collect() };

    let g_im = price_grad(&sens.d_i_minus, 1.0);
    let g_ip = price_grad(&sens.d_i_plus, 1.0);
    let g_spread = add(&g_ip, &price_grad(&sens.d_i_minus, -1.0));
    let mean = |i: usize| joint.mean[n + i];
    let rho = m.rho;
    let norm = 1.0 / (m.sigma0 * m.sigma0 * m.tau);

    let vol_swap = joint.estimate(n + VOL);
    let dual_vol_swap = joint.estimate(n + DUAL_VOL);
    let covariance = joint.estimate(n + COVARIANCE);
    let sigma_dw = joint.estimate(n + SIGMA_DW);
    let spread = z.i_plus - z.i_minus;

    Ok(Rung {
        model: *m,
        grid: *g,
        skew,
        zero_vanna: z,
        vol_swap,
        dual_vol_swap,
        covariance,
        sigma_dw,
        mart_mean: joint.estimate(n + MART),
        i_minus: linear(&joint, &g_im, z.i_minus),
        i_plus: linear(&joint, &g_ip, z.i_plus),
        swap_gap_minus: linear(
            &joint,
            &add(&unit(VOL, 1.0), &price_grad(&sens.d_i_minus, -1.0)),
            mean(VOL) - z.i_minus,
        ),
        swap_gap_plus: linear(
            &joint,
            &add(&unit(DUAL_VOL, 1.0), &price_grad(&sens.d_i_plus, -1.0)),
            mean(DUAL_VOL) - z.i_plus,
        ),
        zv_spread: linear(&joint, &g_spread, spread),
        rho_sigma_dw: linear(&joint, &unit(SIGMA_DW, rho), rho * mean(SIGMA_DW)),
        spread_gap: linear(
            &joint,
            &add(&g_spread, &unit(SIGMA_DW, -rho)),
            spread - rho * mean(SIGMA_DW),
        ),
        q_skew: EstimateWithError {
            value: skew.slope,
            std_error: skew.slope_std_error,
            n: joint.n,
        },
        q_cov: linear(&joint, &unit(COVARIANCE, norm), norm * mean(COVARIANCE)),
        q_zv: linear(
            &joint,
            &g_spread.iter().map(|v| v * norm).collect::<Vec<_>>(),
            norm * spread,
        ),
        heavy_tail: joint.any_heavy_tail(),
        smile,
    })
}

/// Differences behind the volatility-swap approximations at one maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapApproxReport {
    /// `vol_swap - i_minus`.
    pub swap_gap_minus: EstimateWithError,
    /// `dual_vol_swap - i_plus`.
    pub swap_gap_plus: EstimateWithError,
    /// `i_plus - i_minus`.
    pub zv_spread: EstimateWithError,
    /// `rho * E[realized_vol * int sigma dW]`.
    pub rho_sigma_dw: EstimateWithError,
    /// `zv_spread - rho_sigma_dw`.
    pub spread_gap: EstimateWithError,
    pub rung: Rung,
}

/// Compares the (dual) volatility swaps with the (dual) zero-vanna vols, and
/// the zero-vanna spread with `rho E[realized_vol int sigma dW]`. Uses the
/// default strike grid when `strikes` is empty.
pub fn check_swap_approximations(
    m: &ModelSpec,
    g: &GridSpec,
    strikes: &[f64],
) -> Result<SwapApproxReport> {
    let default;
    let strikes = if strikes.is_empty() {
        default = default_strikes(m);
        &default[..]
    } else {
        strikes
    };
    let rung = run_rung(m, g, strikes)?;
    Ok(SwapApproxReport {
        swap_gap_minus: rung.swap_gap_minus,
        swap_gap_plus: rung.swap_gap_plus,
        zv_spread: rung.zv_spread,
        rho_sigma_dw: rung.rho_sigma_dw,
        spread_gap: rung.spread_gap,
        rung,
    })
}

/// Affine fit `q(tau) = q0 + c tau` extrapolated to `tau = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    pub std_error: f64,
    /// Fitted `dq/dtau`.
    pub slope: f64,
}

/// Weighted least-squares affine fit in `tau` with weights `1 / se^2`
/// (flat when all errors vanish), evaluated at zero.
///
/// Refused when some rung's error exceeds [`MAX_ERROR_SHARE`] of the ladder
/// scale `max(spread of values, mean |value|, scale_floor)`: such a ladder
/// carries no usable information about the limit. The floor stands in for the
/// size the limit could take when the values themselves are all near zero.
pub fn extrapolate_to_zero(
    quantity: &'static str,
    taus: &[f64],
    values: &[EstimateWithError],
    scale_floor: f64,
) -> Result<Extrapolation> {
    if taus.len() != values.len() || taus.len() < 2 {
        return Err(domain("extrapolation needs at least two rungs"));
    }
    let lo = values.iter().map(|v| v.value).fold(f64::INFINITY, f64::min);
    let hi = values
        .iter()
        .map(|v| v.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let mean_abs = values.iter().map(|v| v.value.abs()).sum::<f64>() / values.len() as f64;
    let scale = (hi - lo).max(mean_abs).max(scale_floor);
    let limit = MAX_ERROR_SHARE * scale;
    for (t, v) in taus.iter().zip(values) {
        if v.std_error > limit {
            return Err(Error::ExtrapolationRefused {
                quantity,
                tau: *t,
                std_error: v.std_error,
                limit,
            });
        }
    }
    let exact = values.iter().all(|v| v.std_error == 0.0);
    let min_se = values
        .iter()
        .map(|v| v.std_error)
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min);
    let (mut s0, mut s1, mut s2, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&t, v) in taus.iter().zip(values) {
        let w = if exact {
            1.0
        } else {
            1.0 / v.std_error.max(min_se).powi(2)
        };
        s0 += w;
        s1 += w * t;
        s2 += w * t * t;
        sy += w * v.value;
        sty += w * t * v.value;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 0.0) {
        return Err(domain("degenerate maturity ladder"));
    }
    let intercept = (s2 * sy - s1 * sty) / det;
    let slope = (s0 * sty - s1 * sy) / det;
    let std_error = if exact { 0.0 } else { (s2 / det).sqrt() };
    Ok(Extrapolation {
        value: intercept,
        std_error,
        slope,
    })
}

/// Per-maturity limit quantities and their extrapolations to zero maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitReport {
    /// Strictly decreasing maturities.
    pub taus: Vec<f64>,
    /// ATM skew `dI_0/dk`.
    pub q_skew: Vec<EstimateWithError>,
    /// `E[(e^{x_T - x_t} - 1) realized_vol] / (sigma0^2 tau)`.
    pub q_cov: Vec<EstimateWithError>,
    /// `(i_plus - i_minus) / (sigma0^2 tau)`.
    pub q_zv: Vec<EstimateWithError>,
    /// Extrapolations of `q_skew`, `q_cov`, `q_zv`, in that order.
    pub extrapolated: [Extrapolation; 3],
    /// `rho alpha / 4`.
    pub reference_slope: f64,
    pub rungs: Vec<Rung>,
}

impl LimitReport {
    /// Whether extrapolated quantity `i` is within `max(k se, rel |reference|)`
    /// of the reference slope.
    pub fn extrapolated_within(&self, i: usize, k: f64, rel: f64) -> bool {
        let e = &self.extrapolated[i];
        (e.value - self.reference_slope).abs()
            <= (k * e.std_error).max(rel * self.reference_slope.abs())
    }
}

pub const QUANTITY_NAMES: [&str; 3] = ["q_skew", "q_cov", "q_zv"];

/// At least two maturities, strictly decreasing, none below [`MIN_LADDER_TAU`].
pub fn validate_ladder(taus: &[f64]) -> Result<()> {
    if taus.len() < 2 {
        return Err(domain("a ladder needs at least two maturities"));
    }
    if taus.iter().any(|t| !t.is_finite()) {
        return Err(domain("ladder maturities must be finite"));
    }
    if taus.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(domain("ladder maturities must be strictly decreasing"));
    }
    if taus[taus.len() - 1] < MIN_LADDER_TAU {
        return Err(domain(format!(
            "shortest maturity {} is below the floor {MIN_LADDER_TAU}",
            taus[taus.len() - 1]
        )));
    }
    Ok(())
}

/// Runs every maturity of the ladder with an independent seed derived from
/// `g.seed` and `max(g.steps, default_steps(tau))` steps, then extrapolates the
/// three limit quantities to zero maturity.
///
/// `strikes_per_tau` may be empty (default grids) or hold one strike list per
/// maturity.
pub fn limit_experiment(
    m: &ModelSpec,
    g: &GridSpec,
    taus: &[f64],
    strikes_per_tau: &[Vec<f64>],
) -> Result<LimitReport> {
    validate_ladder(taus)?;
    if !strikes_per_tau.is_empty() && strikes_per_tau.len() != taus.len() {
        return Err(domain("need one strike list per maturity"));
    }

    let mut rungs = Vec::with_capacity(taus.len());
    for (i, &tau) in taus.iter().enumerate() {
        let mt = m.with_tau(tau)?;
        let gt = GridSpec::new(
            g.steps.max(default_steps(tau)),
            g.paths,
            derive_seed(g.seed, i as u64),
            g.antithetic,
        )?;
        let strikes = match strikes_per_tau.get(i) {
            Some(s) => s.clone(),
            None => default_strikes(&mt),
        };
        rungs.push(run_rung(&mt, &gt, &strikes)?);
    }

    let q_skew: Vec<_> = rungs.iter().map(|r| r.q_skew).collect();
    let q_cov: Vec<_> = rungs.iter().map(|r| r.q_cov).collect();
    let q_zv: Vec<_> = rungs.iter().map(|r| r.q_zv).collect();
    // |rho alpha / 4| <= alpha / 4 bounds the limit for any correlation
    let floor = (0.25 * m.alpha).max(RESOLUTION_FLOOR);
    let extrapolated = [
        extrapolate_to_zero(QUANTITY_NAMES[0], taus, &q_skew, floor)?,
        extrapolate_to_zero(QUANTITY_NAMES[1], taus, &q_cov, floor)?,
        extrapolate_to_zero(QUANTITY_NAMES[2], taus, &q_zv, floor)?,
    ];
    Ok(LimitReport {
        taus: taus.to_vec(),
        q_skew,
        q_cov,
        q_zv,
        extrapolated,
        reference_slope: oracle::slope_limit(m.rho, m.alpha),
        rungs,
    })
}

/// Least-squares slope of `ln |y|` against `ln tau`, i.e. the empirical order
/// of convergence of `y` as `tau` shrinks, weighted by the relative errors.
pub fn convergence_order(taus: &[f64], values: &[EstimateWithError]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64, f64)> = taus
        .iter()
        .zip(values)
        .filter(|(_, v)| v.value != 0.0)
        .map(|(&t, v)| {
            let rel = (v.std_error / v.value.abs()).max(1e-3);
            (t.ln(), v.value.abs().ln(), 1.0 / (rel * rel))
        })
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (mut s0, mut s1, mut s2, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for &(x, y, w) in &pts {
        s0 += w;
        s1 += w * x;
        s2 += w * x * x;
        sy += w * y;
        sxy += w * x * y;
    }
    let det = s0 * s2 - s1 * s1;
    if !(det > 0.0) {
        return None;
    }
    let slope = (s0 * sxy - s1 * sy) / det;
    Some((slope, (s0 / det).sqrt()))
}
