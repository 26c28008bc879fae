//! Implied volatility smiles built from Monte Carlo prices: monotone cubic
//! interpolation, ATM skew by local quadratic regression, and zero-vanna
//! strikes.

use crate::bs::{bs_vega, d_side, implied_vol, BSInputs, Side};
use crate::engine::{
    conditional_call, constant_vol_call, constant_vol_call_mean, estimate_controlled, GridSpec,
    ModelSpec, PathBundle,
};
use crate::error::{domain, Error, Result};
use crate::stats::{quad_form, JointEstimate};

/// Strikes per smile.
pub const GRID_POINTS: usize = 13;
/// Half-width of the strike grid in units of `sigma0 sqrt(tau)`.
pub const GRID_HALF_WIDTH: f64 = 3.0;
/// Ratio of successive strike spacings away from the money.
pub const GRID_CLUSTERING: f64 = 1.5;
/// Half-width of the skew regression window in units of `sigma0 sqrt(tau)`.
pub const SKEW_BANDWIDTH: f64 = 1.0;
/// Largest implied-vol standard error accepted in a smile.
pub const MAX_IV_STD_ERROR: f64 = 0.01;

const MIN_FIT_POINTS: usize = 5;
const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    /// Log strike.
    pub k: f64,
    pub iv: f64,
    pub iv_std_error: f64,
}

/// Implied volatility as a function of log strike at one maturity.
#[derive(Debug, Clone, PartialEq)]
pub struct Smile {
    tau: f64,
    x: f64,
    points: Vec<SmilePoint>,
    /// Row-major covariance of the implied vols, when known.
    iv_cov: Option<Vec<f64>>,
    fit_half_width: f64,
    slopes: Vec<f64>,
}

impl Smile {
    /// Validates the strike ordering and that the ATM log strike `x` is strictly
    /// inside the strike range. `fit_half_width` is the skew regression window.
    pub fn new(tau: f64, x: f64, points: Vec<SmilePoint>, fit_half_width: f64) -> Result<Self> {
        if !(tau > 0.0) {
            return Err(domain(format!("tau must be positive, got {tau}")));
        }
        if points.len() < MIN_FIT_POINTS {
            return Err(domain(format!(
                "a smile needs at least {MIN_FIT_POINTS} points, got {}",
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[1].k > w[0].k)) {
            return Err(domain("smile strikes must be strictly increasing"));
        }
        if points
            .iter()
            .any(|p| !(p.iv > 0.0) || !(p.iv_std_error >= 0.0))
        {
            return Err(domain(
                "implied vols must be positive with nonnegative errors",
            ));
        }
        let (lo, hi) = (points[0].k, points[points.len() - 1].k);
        if !(lo < x && x < hi) {
            return Err(domain(format!(
                "ATM log strike {x} must lie strictly inside ({lo}, {hi})"
            )));
        }
        if !(fit_half_width > 0.0) {
            return Err(domain("fit half-width must be positive"));
        }
        let slopes = pchip_slopes(&points);
        Ok(Self {
            tau,
            x,
            points,
            iv_cov: None,
            fit_half_width,
            slopes,
        })
    }

    /// Attaches the full implied-vol covariance (row-major, `n x n`).
    pub fn with_covariance(mut self, cov: Vec<f64>) -> Result<Self> {
        let n = self.points.len();
        if cov.len() != n * n {
            return Err(domain(format!("covariance must be {n}x{n}")));
        }
        self.iv_cov = Some(cov);
        Ok(self)
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Log spot, which is also the ATM log strike.
    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn points(&self) -> &[SmilePoint] {
        &self.points
    }

    pub fn iv_cov(&self) -> Option<&[f64]> {
        self.iv_cov.as_deref()
    }

    pub fn fit_half_width(&self) -> f64 {
        self.fit_half_width
    }

    pub fn k_range(&self) -> (f64, f64) {
        (self.points[0].k, self.points[self.points.len() - 1].k)
    }

    /// Interpolated implied vol; `None` outside the sampled strikes.
    pub fn iv_at(&self, k: f64) -> Option<f64> {
        let (lo, hi) = self.k_range();
        if !(k >= lo && k <= hi) {
            return None;
        }
        let i = match self.points.partition_point(|p| p.k <= k) {
            0 => 0,
            j if j >= self.points.len() => self.points.len() - 2,
            j => j - 1,
        };
        let (p0, p1) = (&self.points[i], &self.points[i + 1]);
        let h = p1.k - p0.k;
        let t = (k - p0.k) / h;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(h00 * p0.iv + h10 * h * self.slopes[i] + h01 * p1.iv + h11 * h * self.slopes[i + 1])
    }

    fn with_ivs(&self, ivs: &[f64]) -> Smile {
        let points: Vec<SmilePoint> = self
            .points
            .iter()
            .zip(ivs)
            .map(|(p, &iv)| SmilePoint { iv, ..*p })
            .collect();
        let slopes = pchip_slopes(&points);
        Smile {
            tau: self.tau,
            x: self.x,
            points,
            iv_cov: None,
            fit_half_width: self.fit_half_width,
            slopes,
        }
    }
}

/// Fritsch-Carlson (PCHIP) knot derivatives: shape preserving, no overshoot.
fn pchip_slopes(p: &[SmilePoint]) -> Vec<f64> {
    let n = p.len();
    let h: Vec<f64> = p.windows(2).map(|w| w[1].k - w[0].k).collect();
    let delta: Vec<f64> = p
        .windows(2)
        .zip(&h)
        .map(|(w, h)| (w[1].iv - w[0].iv) / h)
        .collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        let (a, b) = (delta[i - 1], delta[i]);
        if a * b > 0.0 {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / a + w2 / b);
        }
    }
    d[0] = pchip_end(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = pchip_end(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

fn pchip_end(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() || m0 == 0.0 {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

/// Log strikes symmetric about `x` with half-width `3 sigma0 sqrt(tau)`,
/// spacing growing geometrically away from the money.
pub fn log_strike_grid(x: f64, sigma0: f64, tau: f64) -> Vec<f64> {
    let half = GRID_HALF_WIDTH * sigma0 * tau.sqrt();
    let side = GRID_POINTS / 2;
    let r = GRID_CLUSTERING;
    let denom = r.powi(side as i32) - 1.0;
    let offsets: Vec<f64> = (0..=side)
        .map(|j| half * (r.powi(j as i32) - 1.0) / denom)
        .collect();
    let mut ks: Vec<f64> = offsets.iter().rev().map(|o| x - o).collect();
    ks.extend(offsets.iter().skip(1).map(|o| x + o));
    ks
}

/// Default strike prices for a model: the exponential of [`log_strike_grid`].
pub fn default_strikes(m: &ModelSpec) -> Vec<f64> {
    log_strike_grid(m.log_spot(), m.sigma0, m.tau)
        .into_iter()
        .map(f64::exp)
        .collect()
}

/// Smile from joint price estimates: components `offset..offset + strikes.len()`
/// of `prices` are the call prices at `strikes`. Implied-vol errors and
/// covariances are propagated through the vegas.
pub fn smile_from_prices(
    m: &ModelSpec,
    strikes: &[f64],
    prices: &JointEstimate,
    offset: usize,
) -> Result<Smile> {
    let n = strikes.len();
    let mut points = Vec::with_capacity(n);
    let mut inv_vega = Vec::with_capacity(n);
    for (j, &strike) in strikes.iter().enumerate() {
        let est = prices.estimate(offset + j);
        let iv = implied_vol(est.value, m.spot, strike, m.tau).map_err(|e| Error::Strike {
            strike,
            source: Box::new(e),
        })?;
        let vega = bs_vega(&BSInputs::new(m.spot, strike, iv, m.tau)?);
        let iv_std_error = est.std_error / vega;
        if iv_std_error > MAX_IV_STD_ERROR {
            return Err(Error::NoisySmile {
                strike,
                std_error: iv_std_error,
                limit: MAX_IV_STD_ERROR,
            });
        }
        points.push(SmilePoint {
            k: strike.ln(),
            iv,
            iv_std_error,
        });
        inv_vega.push(1.0 / vega);
    }
    let mut cov = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            cov[i * n + j] = prices.cov(offset + i, offset + j) * inv_vega[i] * inv_vega[j];
        }
    }
    Smile::new(
        m.tau,
        m.log_spot(),
        points,
        SKEW_BANDWIDTH * m.sigma0 * m.tau.sqrt(),
    )?
    .with_covariance(cov)
}

/// Per-path call price sample used for smiles: the mixing price minus its
/// constant-vol control variate. Add [`constant_vol_call_mean`] to the sample
/// mean to recover the price.
pub fn controlled_call(m: &ModelSpec, p: &PathBundle, strike: f64) -> f64 {
    conditional_call(m, p, strike) - constant_vol_call(m, p, strike)
}

/// Turns means of [`controlled_call`] at `offset..` into call prices.
pub fn add_control_means(
    m: &ModelSpec,
    strikes: &[f64],
    joint: &mut JointEstimate,
    offset: usize,
) -> Result<()> {
    for (j, &k) in strikes.iter().enumerate() {
        joint.mean[offset + j] += constant_vol_call_mean(m, k)?;
    }
    Ok(())
}

/// Mixing-estimator smile at the given strike prices, with the constant-vol
/// and path control variates.
pub fn build_smile(m: &ModelSpec, g: &GridSpec, strikes: &[f64]) -> Result<Smile> {
    if strikes.iter().any(|&k| !(k > 0.0 && k.is_finite())) {
        return Err(domain("strikes must be positive"));
    }
    let n = strikes.len();
    let targets: Vec<usize> = (0..n).collect();
    let mut joint = estimate_controlled(m, g, n, &targets, |p, out| {
        for (o, &k) in out.iter_mut().zip(strikes) {
            *o = controlled_call(m, p, k);
        }
    })?;
    add_control_means(m, strikes, &mut joint, 0)?;
    smile_from_prices(m, strikes, &joint, 0)
}

/// ATM implied vol and skew.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewEstimate {
    pub i0: f64,
    pub slope: f64,
    pub slope_std_error: f64,
    /// Standard error of `i0`.
    pub i0_std_error: f64,
}

/// Weighted least-squares quadratic in `k - x` over the smile's fit window.
///
/// Weights are `1 / iv_std_error^2` (flat when every error is zero). When the
/// smile carries an implied-vol covariance the coefficient errors use the
/// sandwich form `A C A'`, which accounts for the correlation between strikes
/// priced on the same paths; otherwise `(X'WX)^-1`.
pub fn atm_skew(s: &Smile) -> Result<SkewEstimate> {
    let x0 = s.x;
    let idx: Vec<usize> = (0..s.points.len())
        .filter(|&i| (s.points[i].k - x0).abs() <= s.fit_half_width * (1.0 + 1e-12))
        .collect();
    if idx.len() < MIN_FIT_POINTS {
        return Err(Error::BandwidthTooSmall {
            half_width: s.fit_half_width,
            points: idx.len(),
        });
    }
    let all_exact = idx.iter().all(|&i| s.points[i].iv_std_error == 0.0);
    let min_se = idx
        .iter()
        .map(|&i| s.points[i].iv_std_error)
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min);
    let weight = |i: usize| {
        if all_exact {
            1.0
        } else {
            let e = s.points[i].iv_std_error.max(min_se);
            1.0 / (e * e)
        }
    };
    // centre on the point nearest the money so a flat smile fits exactly
    let y_ref = idx
        .iter()
        .map(|&i| s.points[i])
        .min_by(|a, b| (a.k - x0).abs().total_cmp(&(b.k - x0).abs()))
        .map(|p| p.iv)
        .unwrap_or(0.0);

    let mut xtwx = [[0.0f64; 3]; 3];
    let mut xtwy = [0.0f64; 3];
    for &i in &idx {
        let u = s.points[i].k - x0;
        let row = [1.0, u, u * u];
        let w = weight(i);
        let y = s.points[i].iv - y_ref;
        for a in 0..3 {
            xtwy[a] += w * row[a] * y;
            for b in 0..3 {
                xtwx[a][b] += w * row[a] * row[b];
            }
        }
    }
    let inv = invert3(&xtwx).ok_or_else(|| domain("singular skew regression"))?;
    let beta: Vec<f64> = (0..3)
        .map(|a| (0..3).map(|b| inv[a][b] * xtwy[b]).sum())
        .collect();

    let (var_i0, var_slope) = match &s.iv_cov {
        Some(cov) if !all_exact => {
            let n = s.points.len();
            // rows of A = (X'WX)^-1 X'W, as full-length vectors over the smile
            let mut a_rows = vec![vec![0.0; n]; 2];
            for &i in &idx {
                let u = s.points[i].k - x0;
                let row = [1.0, u, u * u];
                let w = weight(i);
                for (c, a_row) in a_rows.iter_mut().enumerate() {
                    a_row[i] = w * (0..3).map(|b| inv[c][b] * row[b]).sum::<f64>();
                }
            }
            (quad_form(cov, &a_rows[0]), quad_form(cov, &a_rows[1]))
        }
        _ if all_exact => (0.0, 0.0),
        _ => (inv[0][0], inv[1][1]),
    };
    Ok(SkewEstimate {
        i0: y_ref + beta[0],
        slope: beta[1],
        slope_std_error: var_slope.max(0.0).sqrt(),
        i0_std_error: var_i0.max(0.0).sqrt(),
    })
}

fn invert3(m: &[[f64; 3]; 3]) -> Option<[[f64; 3]; 3]> {
    let c =
        |r0: usize, c0: usize, r1: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 1, 2, 2), -c(1, 0, 2, 2), c(1, 0, 2, 1)],
        [-c(0, 1, 2, 2), c(0, 0, 2, 2), -c(0, 0, 2, 1)],
        [c(0, 1, 1, 2), -c(0, 0, 1, 2), c(0, 0, 1, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    if !det.is_finite() || det == 0.0 {
        return None;
    }
    let mut inv = [[0.0; 3]; 3];
    for (i, row) in inv.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cof[j][i] / det;
        }
    }
    Some(inv)
}

/// Zero-vanna log strikes and the implied vols there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroVannaPair {
    pub k_minus: f64,
    pub i_minus: f64,
    pub k_plus: f64,
    pub i_plus: f64,
}

/// Residual `d(I(k), k)` of one zero-vanna condition on the interpolated smile.
pub fn zero_vanna_residual(s: &Smile, k: f64, side: Side) -> Option<f64> {
    s.iv_at(k).map(|iv| d_side(s.x, k, iv, s.tau, side))
}

/// Solves `d-(I(k), k) = 0` and `d+(I(k), k) = 0` inside the sampled strikes.
pub fn zero_vanna_solve(s: &Smile) -> Result<ZeroVannaPair> {
    let (k_minus, i_minus) = solve_side(s, Side::Minus)?;
    let (k_plus, i_plus) = solve_side(s, Side::Plus)?;
    Ok(ZeroVannaPair {
        k_minus,
        i_minus,
        k_plus,
        i_plus,
    })
}

fn solve_side(s: &Smile, side: Side) -> Result<(f64, f64)> {
    let g = |k: f64| zero_vanna_residual(s, k, side).unwrap_or(f64::NAN);
    let (lo, hi) = s.k_range();
    // bracket between knots, taking the sign change nearest the money
    let ks: Vec<f64> = s.points.iter().map(|p| p.k).collect();
    let gs: Vec<f64> = ks.iter().map(|&k| g(k)).collect();
    let mut best: Option<(usize, f64)> = None;
    for i in 0..ks.len() - 1 {
        if gs[i] == 0.0 {
            return Ok((ks[i], s.points[i].iv));
        }
        if gs[i] * gs[i + 1] < 0.0 {
            let dist = (0.5 * (ks[i] + ks[i + 1]) - s.x).abs();
            if best.is_none_or(|(_, d)| dist < d) {
                best = Some((i, dist));
            }
        }
    }
    let Some((i, _)) = best else {
        return Err(Error::StrikeRangeTooNarrow {
            side: side.symbol(),
            k_low: lo,
            k_high: hi,
        });
    };
    let (mut a, mut b) = (ks[i], ks[i + 1]);
    let (mut ga, mut gb) = (gs[i], gs[i + 1]);
    let mut k = 0.5 * (a + b);
    // Illinois false position; the bracket always holds a sign change
    let mut last_side = 0i8;
    for _ in 0..200 {
        k = (a * gb - b * ga) / (gb - ga);
        if !(k > a && k < b) {
            k = 0.5 * (a + b);
        }
        let gk = g(k);
        if gk.abs() < 1e-13 || b - a <= 4.0 * f64::EPSILON * b.abs().max(1.0) {
            break;
        }
        if gk * ga < 0.0 {
            b = k;
            gb = gk;
            if last_side == -1 {
                ga *= 0.5;
            }
            last_side = -1;
        } else {
            a = k;
            ga = gk;
            if last_side == 1 {
                gb *= 0.5;
            }
            last_side = 1;
        }
    }
    let r = g(k);
    if !(r.abs() < ROOT_TOL) {
        return Err(domain(format!(
            "zero-vanna solve for d{} stalled with residual {r:e}",
            side.symbol()
        )));
    }
    let iv = s.iv_at(k).unwrap_or(f64::NAN);
    Ok((k, iv))
}

/// Derivatives of `(i_minus, i_plus, k_minus, k_plus)` with respect to each
/// sampled implied vol, by central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroVannaSensitivity {
    pub pair: ZeroVannaPair,
    pub d_i_minus: Vec<f64>,
    pub d_i_plus: Vec<f64>,
    pub d_k_minus: Vec<f64>,
    pub d_k_plus: Vec<f64>,
}

pub fn zero_vanna_sensitivity(s: &Smile) -> Result<ZeroVannaSensitivity> {
    let pair = zero_vanna_solve(s)?;
    let n = s.points.len();
    let base: Vec<f64> = s.points.iter().map(|p| p.iv).collect();
    let mut out = ZeroVannaSensitivity {
        pair,
        d_i_minus: vec![0.0; n],
        d_i_plus: vec![0.0; n],
        d_k_minus: vec![0.0; n],
        d_k_plus: vec![0.0; n],
    };
    for j in 0..n {
        let h = 1e-6 * base[j];
        let mut up = base.clone();
        up[j] += h;
        let mut dn = base.clone();
        dn[j] -= h;
        let pu = zero_vanna_solve(&s.with_ivs(&up))?;
        let pd = zero_vanna_solve(&s.with_ivs(&dn))?;
        out.d_i_minus[j] = (pu.i_minus - pd.i_minus) / (2.0 * h);
        out.d_i_plus[j] = (pu.i_plus - pd.i_plus) / (2.0 * h);
        out.d_k_minus[j] = (pu.k_minus - pd.k_minus) / (2.0 * h);
        out.d_k_plus[j] = (pu.k_plus - pd.k_plus) / (2.0 * h);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs::zero_vanna_strike_flat;

    fn synthetic(f: impl Fn(f64) -> f64, ks: &[f64], tau: f64, x: f64, bw: f64) -> Smile {
        let points = ks
            .iter()
            .map(|&k| SmilePoint {
                k,
                iv: f(k - x),
                iv_std_error: 0.0,
            })
            .collect();
        Smile::new(tau, x, points, bw).unwrap()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect()
    }

    #[test]
    fn smile_validation() {
        let p = |k: f64| SmilePoint {
            k,
            iv: 0.2,
            iv_std_error: 0.0,
        };
        let ok: Vec<_> = [-0.2, -0.1, 0.0, 0.1, 0.2].into_iter().map(p).collect();
        assert!(Smile::new(1.0, 0.0, ok.clone(), 0.3).is_ok());
        assert!(Smile::new(1.0, 0.2, ok.clone(), 0.3).is_err());
        assert!(Smile::new(1.0, 0.0, ok[..4].to_vec(), 0.3).is_err());
        let unsorted: Vec<_> = [-0.2, 0.1, 0.0, 0.15, 0.2].into_iter().map(p).collect();
        assert!(Smile::new(1.0, 0.0, unsorted, 0.3).is_err());
    }

    #[test]
    fn strike_grid_shape() {
        let ks = log_strike_grid(0.3, 0.2, 1.0 / 12.0);
        assert_eq!(ks.len(), GRID_POINTS);
        assert_eq!(ks[6], 0.3);
        let half = 3.0 * 0.2 * (1.0f64 / 12.0).sqrt();
        assert!((ks[0] - (0.3 - half)).abs() < 1e-15);
        assert!((ks[12] - (0.3 + half)).abs() < 1e-15);
        for i in 0..6 {
            assert!(((ks[12 - i] - 0.3) - (0.3 - ks[i])).abs() < 1e-15);
        }
        for i in 6..11 {
            assert!(ks[i + 2] - ks[i + 1] > ks[i + 1] - ks[i]);
        }
        let window = half / 3.0;
        assert!(ks.iter().filter(|&&k| (k - 0.3).abs() <= window).count() >= 5);
    }

    #[test]
    fn interpolation_reproduces_knots_and_stays_monotone() {
        let ks = linspace(-0.3, 0.3, 9);
        let s = synthetic(|u| 0.2 - 0.3 * u + 0.5 * u * u, &ks, 1.0, 0.0, 0.2);
        for p in s.points() {
            assert!((s.iv_at(p.k).unwrap() - p.iv).abs() < 1e-15);
        }
        assert!(s.iv_at(0.31).is_none());
        let s = synthetic(
            |u| 0.2 - 0.1 * u.signum() * u.abs().sqrt(),
            &ks,
            1.0,
            0.0,
            0.2,
        );
        let fine = linspace(-0.3, 0.3, 601);
        for w in fine.windows(2) {
            assert!(s.iv_at(w[1]).unwrap() <= s.iv_at(w[0]).unwrap() + 1e-15);
        }
    }

    #[test]
    fn flat_smile_has_zero_skew() {
        let ks = linspace(-0.2, 0.2, 9);
        let s = synthetic(|_| 0.23, &ks, 0.5, 0.0, 0.15);
        let sk = atm_skew(&s).unwrap();
        assert_eq!(sk.slope, 0.0);
        assert_eq!(sk.i0, 0.23);
    }

    #[test]
    fn linear_smile_is_fit_exactly() {
        let x = 0.1;
        let ks: Vec<f64> = linspace(-0.04, 0.04, 9)
            .into_iter()
            .map(|u| x + u)
            .collect();
        let s = synthetic(|u| 0.2 + 0.5 * u, &ks, 0.5, x, 0.05);
        let sk = atm_skew(&s).unwrap();
        assert!((sk.slope - 0.5).abs() < 1e-12);
        assert!((sk.i0 - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cubic_smile_within_taylor_bound() {
        let bw = 0.02;
        let ks = linspace(-0.02, 0.02, 9);
        let s = synthetic(|u| 0.2 + 0.5 * u + 2.0 * u * u * u, &ks, 0.5, 0.0, bw);
        let sk = atm_skew(&s).unwrap();
        let bound = 2.0 * bw * bw * 3.0 * 2.0;
        assert!((sk.slope - 0.5).abs() <= bound, "{}", sk.slope);
    }

    #[test]
    fn narrow_window_is_rejected() {
        let ks = linspace(-0.2, 0.2, 9);
        let s = synthetic(|_| 0.2, &ks, 0.5, 0.0, 0.06);
        assert!(matches!(
            atm_skew(&s),
            Err(Error::BandwidthTooSmall { points: 3, .. })
        ));
    }

    #[test]
    fn flat_smile_zero_vanna_matches_closed_form() {
        let ks = linspace(-0.3, 0.3, 13);
        let s = synthetic(|_| 0.2, &ks, 1.0, 0.0, 0.2);
        let z = zero_vanna_solve(&s).unwrap();
        assert!((z.k_minus - zero_vanna_strike_flat(0.0, 0.2, 1.0, Side::Minus)).abs() < 1e-10);
        assert!((z.k_plus - zero_vanna_strike_flat(0.0, 0.2, 1.0, Side::Plus)).abs() < 1e-10);
        assert_eq!(z.i_minus, 0.2);
        assert_eq!(z.i_plus, 0.2);
    }

    #[test]
    fn zero_vanna_residuals_and_ordering() {
        let ks = linspace(-0.5, 0.5, 13);
        let s = synthetic(|u| 0.25 - 0.2 * u + 0.3 * u * u, &ks, 0.75, 0.0, 0.3);
        let z = zero_vanna_solve(&s).unwrap();
        assert!(
            zero_vanna_residual(&s, z.k_minus, Side::Minus)
                .unwrap()
                .abs()
                < 1e-10
        );
        assert!(zero_vanna_residual(&s, z.k_plus, Side::Plus).unwrap().abs() < 1e-10);
        assert!(z.k_minus < 0.0 && 0.0 < z.k_plus);
        assert!(z.i_plus < z.i_minus);
    }

    #[test]
    fn narrow_strike_range_names_the_side() {
        // all strikes below the money: d+ stays positive
        let ks = linspace(-0.3, 0.001, 7);
        let s = synthetic(|_| 0.2, &ks, 1.0, 0.0005, 0.2);
        match zero_vanna_solve(&s) {
            Err(Error::StrikeRangeTooNarrow { side, .. }) => assert_eq!(side, '+'),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sensitivities_of_flat_smile() {
        let ks = linspace(-0.3, 0.3, 13);
        let s = synthetic(|_| 0.2, &ks, 1.0, 0.0, 0.2);
        let sens = zero_vanna_sensitivity(&s).unwrap();
        // a parallel shift of the smile moves both vols one for one
        let sum_m: f64 = sens.d_i_minus.iter().sum();
        let sum_p: f64 = sens.d_i_plus.iter().sum();
        assert!((sum_m - 1.0).abs() < 1e-6);
        assert!((sum_p - 1.0).abs() < 1e-6);
        // and the strikes by -/+ vol tau
        let sum_k: f64 = sens.d_k_minus.iter().sum();
        assert!((sum_k + 0.2).abs() < 1e-6);
    }
}
