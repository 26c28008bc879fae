//! Monte Carlo engine for the lognormal-variance stochastic volatility model
//!
//! ```text
//! S_T = S_t exp(-1/2 int sigma^2 du + int sigma (rho dW + rho_bar dZ)),
//! d sigma^2 = alpha sigma^2 dW.
//! ```
//!
//! Only the `W` path is simulated. Conditional on it, `ln S_T` is Gaussian, so
//! option prices are averages of Black-Scholes prices with spot `S e^{M_T}` and
//! volatility `rho_bar * realized_vol` (mixing), and share-measure expectations
//! are averages weighted by `e^{M_T}`.
//!
//! The variance is sampled exactly at the grid nodes. The `W` path is built by
//! Brownian-bridge bisection; normals are consumed in bridge order, so for
//! power-of-two step counts the `2N`-step path refines the `N`-step path
//! drawn from the same stream.

use crate::bs::{bs_price, BSInputs};
use crate::error::{domain, Result};
use crate::rng::NormalStream;
use crate::stats::{sample_moments_with, EstimateWithError, JointEstimate};

/// Parameters of the model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub spot: f64,
    /// Initial instantaneous volatility (annualized).
    pub sigma0: f64,
    /// Volatility of the instantaneous variance.
    pub alpha: f64,
    pub rho: f64,
    /// Time to maturity in years.
    pub tau: f64,
}

impl ModelSpec {
    pub fn new(spot: f64, sigma0: f64, alpha: f64, rho: f64, tau: f64) -> Result<Self> {
        let m = Self {
            spot,
            sigma0,
            alpha,
            rho,
            tau,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.spot > 0.0 && self.spot.is_finite()) {
            return Err(domain(format!("spot must be positive, got {}", self.spot)));
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return Err(domain(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(domain(format!(
                "alpha must be nonnegative, got {}",
                self.alpha
            )));
        }
        if !(self.rho.abs() <= 1.0) {
            return Err(domain(format!("rho must lie in [-1, 1], got {}", self.rho)));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(domain(format!("tau must be positive, got {}", self.tau)));
        }
        Ok(())
    }

    /// `sqrt(1 - rho^2)`.
    pub fn rho_bar(&self) -> f64 {
        (1.0 - self.rho * self.rho).max(0.0).sqrt()
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.spot, self.sigma0, self.alpha, self.rho, tau)
    }

    pub fn log_spot(&self) -> f64 {
        self.spot.ln()
    }
}

/// Time grid, path count and randomness of a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub antithetic: bool,
}

impl GridSpec {
    pub fn new(steps: usize, paths: usize, seed: u64, antithetic: bool) -> Result<Self> {
        let g = Self {
            steps,
            paths,
            seed,
            antithetic,
        };
        g.validate()?;
        Ok(g)
    }

    /// Antithetic grid with the default step count for `tau`.
    pub fn for_tau(tau: f64, paths: usize, seed: u64) -> Result<Self> {
        Self::new(default_steps(tau), paths, seed, true)
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(domain("steps must be at least 1"));
        }
        if self.paths < 2 {
            return Err(domain(format!(
                "paths must be at least 2, got {}",
                self.paths
            )));
        }
        if self.antithetic && !self.paths.is_multiple_of(2) {
            return Err(domain(format!(
                "antithetic sampling needs an even path count, got {}",
                self.paths
            )));
        }
        if self.antithetic && self.paths < 4 {
            return Err(domain("antithetic sampling needs at least two pairs"));
        }
        Ok(())
    }

    /// Independent samples: antithetic pairs count once.
    pub fn samples(&self) -> usize {
        if self.antithetic {
            self.paths / 2
        } else {
            self.paths
        }
    }
}

/// `max(64, ceil(512 tau))`.
pub fn default_steps(tau: f64) -> usize {
    ((512.0 * tau).ceil() as usize).max(64)
}

/// Path functionals of one simulated `W` path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathBundle {
    /// `sqrt(int_var / tau)`.
    pub realized_vol: f64,
    /// Trapezoidal `int sigma^2 du`.
    pub int_var: f64,
    /// Left-point Ito sum `sum sigma_i (W_{i+1} - W_i)`.
    pub int_sigma_dw: f64,
    /// `exp(-rho^2 int_var / 2 + rho int_sigma_dw)`.
    pub mart_factor: f64,
    /// `sigma_T^2`.
    pub terminal_var: f64,
    /// `W_T - W_t`.
    pub w_terminal: f64,
}

#[derive(Debug, Clone, Copy)]
struct BridgeNode {
    left: usize,
    mid: usize,
    right: usize,
    w_left: f64,
    w_right: f64,
    sd: f64,
}

/// Precomputed grid and bridge for one `(ModelSpec, GridSpec)`.
#[derive(Debug, Clone)]
pub struct PathSimulator {
    model: ModelSpec,
    grid: GridSpec,
    dt: f64,
    sqrt_tau: f64,
    bridge: Vec<BridgeNode>,
    /// `-alpha^2 t_i / 4`, half the log-variance drift at node `i`.
    half_drift: Vec<f64>,
}

impl PathSimulator {
    pub fn new(model: ModelSpec, grid: GridSpec) -> Result<Self> {
        model.validate()?;
        grid.validate()?;
        let n = grid.steps;
        let dt = model.tau / n as f64;
        let mut bridge = Vec::with_capacity(n.saturating_sub(1));
        let mut queue = std::collections::VecDeque::from([(0usize, n)]);
        while let Some((a, b)) = queue.pop_front() {
            if b - a < 2 {
                continue;
            }
            let m = (a + b) / 2;
            let (ta, tm, tb) = (a as f64, m as f64, b as f64);
            bridge.push(BridgeNode {
                left: a,
                mid: m,
                right: b,
                w_left: (tb - tm) / (tb - ta),
                w_right: (tm - ta) / (tb - ta),
                sd: ((tm - ta) * (tb - tm) / (tb - ta) * dt).sqrt(),
            });
            queue.push_back((a, m));
            queue.push_back((m, b));
        }
        let half_drift = (0..=n)
            .map(|i| -0.25 * model.alpha * model.alpha * (i as f64 * dt))
            .collect();
        Ok(Self {
            model,
            grid,
            dt,
            sqrt_tau: model.tau.sqrt(),
            bridge,
            half_drift,
        })
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Normals consumed per path.
    pub fn normals_per_path(&self) -> usize {
        self.grid.steps
    }

    fn stream_of(&self, path_index: usize) -> (u64, bool) {
        if self.grid.antithetic {
            ((path_index / 2) as u64, path_index % 2 == 1)
        } else {
            (path_index as u64, false)
        }
    }

    /// Path `path_index`; with antithetic sampling odd paths mirror `W` of
    /// the preceding even path.
    pub fn path(&self, path_index: usize) -> PathBundle {
        let (stream, flip) = self.stream_of(path_index);
        let mut z = vec![0.0; self.normals_per_path()];
        NormalStream::new(self.grid.seed, stream).fill(&mut z);
        let mut w = vec![0.0; self.grid.steps + 1];
        self.bundle(&z, if flip { -1.0 } else { 1.0 }, &mut w)
    }

    /// Calls `visit` with the one or two paths of independent sample `sample`.
    pub fn for_sample<F: FnMut(&PathBundle)>(
        &self,
        sample: usize,
        z: &mut Vec<f64>,
        w: &mut Vec<f64>,
        mut visit: F,
    ) {
        z.resize(self.normals_per_path(), 0.0);
        w.resize(self.grid.steps + 1, 0.0);
        NormalStream::new(self.grid.seed, sample as u64).fill(z);
        visit(&self.bundle(z, 1.0, w));
        if self.grid.antithetic {
            visit(&self.bundle(z, -1.0, w));
        }
    }

    fn bundle(&self, z: &[f64], sign: f64, w: &mut [f64]) -> PathBundle {
        let n = self.grid.steps;
        let m = &self.model;
        w[0] = 0.0;
        w[n] = sign * self.sqrt_tau * z[0];
        for (node, &zj) in self.bridge.iter().zip(&z[1..]) {
            w[node.mid] =
                node.w_left * w[node.left] + node.w_right * w[node.right] + sign * node.sd * zj;
        }

        let half_alpha = 0.5 * m.alpha;
        let mut vol_prev = m.sigma0;
        let mut var_prev = m.sigma0 * m.sigma0;
        let mut var_sum = 0.5 * var_prev;
        let mut ito = 0.0;
        for i in 1..=n {
            let vol = m.sigma0 * (half_alpha * w[i] + self.half_drift[i]).exp();
            let var = vol * vol;
            ito += vol_prev * (w[i] - w[i - 1]);
            var_sum += if i == n { 0.5 * var } else { var };
            vol_prev = vol;
            var_prev = var;
        }
        let int_var = var_sum * self.dt;
        let rho = m.rho;
        PathBundle {
            realized_vol: (int_var / m.tau).sqrt(),
            int_var,
            int_sigma_dw: ito,
            mart_factor: (-0.5 * rho * rho * int_var + rho * ito).exp(),
            terminal_var: var_prev,
            w_terminal: w[n],
        }
    }
}

/// Single path, a deterministic function of `(seed, path_index)`.
pub fn simulate_path(m: &ModelSpec, g: &GridSpec, path_index: usize) -> Result<PathBundle> {
    if path_index >= g.paths {
        return Err(domain(format!(
            "path index {path_index} out of range for {} paths",
            g.paths
        )));
    }
    Ok(PathSimulator::new(*m, *g)?.path(path_index))
}

/// Conditional call price given the `W` path: Black-Scholes with spot
/// `S e^{M_T}` and volatility `rho_bar * realized_vol`. Intrinsic value when
/// `|rho| = 1`.
pub fn conditional_call(m: &ModelSpec, p: &PathBundle, strike: f64) -> f64 {
    let fwd = m.spot * p.mart_factor;
    let vol = m.rho_bar() * p.realized_vol;
    if vol > 0.0 {
        match BSInputs::new(fwd, strike, vol, m.tau) {
            Ok(b) => bs_price(&b),
            Err(_) => (fwd - strike).max(0.0),
        }
    } else {
        (fwd - strike).max(0.0)
    }
}

/// Control variate for [`conditional_call`]: the same mixing price with the
/// volatility frozen at `sigma0` and the same `W`, i.e. spot
/// `S exp(rho sigma0 W_T - rho^2 sigma0^2 tau / 2)` and volatility
/// `rho_bar sigma0`. Its expectation is `bs_price(spot, strike, sigma0, tau)`.
pub fn constant_vol_call(m: &ModelSpec, p: &PathBundle, strike: f64) -> f64 {
    let rho = m.rho;
    let s0 = m.sigma0;
    let fwd = m.spot * (rho * s0 * p.w_terminal - 0.5 * rho * rho * s0 * s0 * m.tau).exp();
    let vol = m.rho_bar() * s0;
    if vol > 0.0 {
        match BSInputs::new(fwd, strike, vol, m.tau) {
            Ok(b) => bs_price(&b),
            Err(_) => (fwd - strike).max(0.0),
        }
    } else {
        (fwd - strike).max(0.0)
    }
}

/// Exact mean of [`constant_vol_call`].
pub fn constant_vol_call_mean(m: &ModelSpec, strike: f64) -> Result<f64> {
    Ok(bs_price(&BSInputs::new(m.spot, strike, m.sigma0, m.tau)?))
}

/// Number of zero-mean path functionals written by [`path_controls`].
pub const PATH_CONTROLS: usize = 4;

/// Path functionals with exactly zero mean: `e^{M_T} - 1`, its constant-vol
/// counterpart `e^{rho sigma0 W - rho^2 sigma0^2 tau / 2} - 1`, the centred
/// integrated variance over `tau` and `int sigma dW`.
pub fn path_controls(m: &ModelSpec, p: &PathBundle, out: &mut [f64]) {
    let rs = m.rho * m.sigma0;
    out[0] = p.mart_factor - 1.0;
    out[1] = (rs * p.w_terminal - 0.5 * rs * rs * m.tau).exp() - 1.0;
    out[2] = p.int_var / m.tau - m.sigma0 * m.sigma0;
    out[3] = p.int_sigma_dw;
}

/// As [`estimate_functionals`], then regresses the `targets` on
/// [`path_controls`] (appended after the `dim` functionals).
pub fn estimate_controlled<F>(
    m: &ModelSpec,
    g: &GridSpec,
    dim: usize,
    targets: &[usize],
    f: F,
) -> Result<JointEstimate>
where
    F: Fn(&PathBundle, &mut [f64]) + Sync,
{
    let joint = estimate_functionals(m, g, dim + PATH_CONTROLS, |p, out| {
        f(p, &mut out[..dim]);
        path_controls(m, p, &mut out[dim..]);
    })?;
    let controls: Vec<usize> = (dim..dim + PATH_CONTROLS).collect();
    let mut joint = joint.with_controls(targets, &controls);
    joint.mean.truncate(dim);
    let full = dim + PATH_CONTROLS;
    joint.cov = (0..dim * dim)
        .map(|ij| joint.cov[(ij / dim) * full + ij % dim])
        .collect();
    joint.heavy_tail.truncate(dim);
    Ok(joint)
}

/// Joint Monte Carlo estimate of `dim` path functionals written by `f`.
/// With antithetic sampling each sample is the average over the pair.
pub fn estimate_functionals<F>(
    m: &ModelSpec,
    g: &GridSpec,
    dim: usize,
    f: F,
) -> Result<JointEstimate>
where
    F: Fn(&PathBundle, &mut [f64]) + Sync,
{
    let sim = PathSimulator::new(*m, *g)?;
    let weight = if g.antithetic { 0.5 } else { 1.0 };
    let moments = sample_moments_with(
        g.samples(),
        dim,
        || (Vec::new(), Vec::new(), vec![0.0; dim]),
        |(z, w, tmp), sample, out| {
            out.fill(0.0);
            sim.for_sample(sample, z, w, |p| {
                f(p, tmp);
                for (o, t) in out.iter_mut().zip(tmp.iter()) {
                    *o += weight * t;
                }
            });
        },
    );
    Ok(moments.into_joint())
}

fn scalar<F>(m: &ModelSpec, g: &GridSpec, f: F) -> Result<EstimateWithError>
where
    F: Fn(&PathBundle) -> f64 + Sync,
{
    Ok(estimate_functionals(m, g, 1, |p, out| out[0] = f(p))?.estimate(0))
}

/// Mixing estimator of the undiscounted call price.
pub fn conditional_call_price(
    m: &ModelSpec,
    g: &GridSpec,
    strike: f64,
) -> Result<EstimateWithError> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(domain(format!("strike must be positive, got {strike}")));
    }
    scalar(m, g, |p| conditional_call(m, p, strike))
}

/// Volatility swap `E[realized_vol]`.
pub fn vol_swap(m: &ModelSpec, g: &GridSpec) -> Result<EstimateWithError> {
    scalar(m, g, |p| p.realized_vol)
}

/// Dual volatility swap `E[e^{x_T - x_t} realized_vol] = E[e^{M_T} realized_vol]`.
pub fn dual_vol_swap(m: &ModelSpec, g: &GridSpec) -> Result<EstimateWithError> {
    scalar(m, g, |p| p.mart_factor * p.realized_vol)
}

/// `E[(e^{x_T - x_t} - 1) realized_vol]`, paired on each path.
pub fn return_vol_covariance(m: &ModelSpec, g: &GridSpec) -> Result<EstimateWithError> {
    scalar(m, g, |p| (p.mart_factor - 1.0) * p.realized_vol)
}

/// `E[realized_vol * int sigma dW]`.
pub fn sigma_dw_expectation(m: &ModelSpec, g: &GridSpec) -> Result<EstimateWithError> {
    scalar(m, g, |p| p.realized_vol * p.int_sigma_dw)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(alpha: f64, rho: f64, tau: f64) -> ModelSpec {
        ModelSpec::new(1.0, 0.2, alpha, rho, tau).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::new(1.0, 0.2, 0.6, 1.5, 1.0).is_err());
        assert!(ModelSpec::new(1.0, 0.0, 0.6, 0.0, 1.0).is_err());
        assert!(ModelSpec::new(1.0, 0.2, -0.1, 0.0, 1.0).is_err());
        assert!(ModelSpec::new(1.0, 0.2, 0.6, 0.0, 0.0).is_err());
        assert!(ModelSpec::new(1.0, 0.2, 0.6, -1.0, 1.0).is_ok());
        assert!(GridSpec::new(0, 10, 1, false).is_err());
        assert!(GridSpec::new(8, 1, 1, false).is_err());
        assert!(GridSpec::new(8, 11, 1, true).is_err());
        assert!(GridSpec::new(8, 12, 1, true).is_ok());
    }

    #[test]
    fn default_step_rule() {
        assert_eq!(default_steps(1.0 / 252.0), 64);
        assert_eq!(default_steps(1.0 / 12.0), 64);
        assert_eq!(default_steps(1.0), 512);
        assert_eq!(default_steps(2.3), 1178);
    }

    #[test]
    fn bundle_identities() {
        let m = model(0.8, -0.6, 0.5);
        let g = GridSpec::new(37, 10, 9, true).unwrap();
        for i in 0..10 {
            let p = simulate_path(&m, &g, i).unwrap();
            let rv = (p.int_var / m.tau).sqrt();
            assert!((p.realized_vol / rv - 1.0).abs() < 1e-14);
            let mf = (-0.5 * m.rho * m.rho * p.int_var + m.rho * p.int_sigma_dw).exp();
            assert!((p.mart_factor / mf - 1.0).abs() < 1e-14);
        }
        assert!(simulate_path(&m, &g, 10).is_err());
    }

    #[test]
    fn constant_vol_paths() {
        let m = model(0.0, 0.3, 0.25);
        let g = GridSpec::new(16, 8, 3, false).unwrap();
        for i in 0..8 {
            let p = simulate_path(&m, &g, i).unwrap();
            assert!((p.realized_vol - 0.2).abs() < 1e-15);
            assert!((p.int_var - 0.04 * 0.25).abs() < 1e-16);
            assert!((p.int_sigma_dw - 0.2 * p.w_terminal).abs() < 1e-15);
        }
    }

    #[test]
    fn antithetic_paths_mirror() {
        let m = model(0.5, 0.0, 1.0);
        let g = GridSpec::new(8, 4, 1, true).unwrap();
        let a = simulate_path(&m, &g, 2).unwrap();
        let b = simulate_path(&m, &g, 3).unwrap();
        assert_eq!(a.w_terminal, -b.w_terminal);
    }

    #[test]
    fn refined_grid_shares_nodes() {
        let m = model(0.6, -0.5, 1.0);
        let coarse = PathSimulator::new(m, GridSpec::new(16, 2, 5, false).unwrap()).unwrap();
        let fine = PathSimulator::new(m, GridSpec::new(32, 2, 5, false).unwrap()).unwrap();
        let mut zc = vec![0.0; 16];
        let mut zf = vec![0.0; 32];
        NormalStream::new(5, 0).fill(&mut zc);
        NormalStream::new(5, 0).fill(&mut zf);
        let mut wc = vec![0.0; 17];
        let mut wf = vec![0.0; 33];
        coarse.bundle(&zc, 1.0, &mut wc);
        fine.bundle(&zf, 1.0, &mut wf);
        for i in 0..=16 {
            assert!((wc[i] - wf[2 * i]).abs() < 1e-15, "node {i}");
        }
    }

    #[test]
    fn bridge_increments_are_standard() {
        // sum of squared increments estimates tau; increments have variance dt
        let m = model(0.0, 0.0, 2.0);
        let sim = PathSimulator::new(m, GridSpec::new(24, 2, 11, false).unwrap()).unwrap();
        let (mut z, mut w) = (Vec::new(), Vec::new());
        let mut acc = vec![0.0; 24];
        let n = 20_000;
        for s in 0..n {
            sim.for_sample(s, &mut z, &mut w, |_| {});
            for i in 0..24 {
                let d = w[i + 1] - w[i];
                acc[i] += d * d;
            }
        }
        let dt = 2.0 / 24.0;
        for v in acc {
            let v = v / n as f64;
            assert!((v / dt - 1.0).abs() < 0.05, "{}", v / dt);
        }
    }

    #[test]
    fn rho_zero_kills_martingale_factor() {
        let m = model(0.6, 0.0, 0.1);
        let g = GridSpec::new(64, 1000, 2, true).unwrap();
        let a = vol_swap(&m, &g).unwrap();
        let b = dual_vol_swap(&m, &g).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn degenerate_correlation_uses_intrinsic() {
        let m = model(0.6, -1.0, 0.1);
        let p = PathBundle {
            realized_vol: 0.2,
            int_var: 0.004,
            int_sigma_dw: 0.01,
            mart_factor: 1.05,
            terminal_var: 0.04,
            w_terminal: 0.05,
        };
        assert!((conditional_call(&m, &p, 1.0) - 0.05).abs() < 1e-15);
        assert_eq!(conditional_call(&m, &p, 1.1), 0.0);
    }
}
