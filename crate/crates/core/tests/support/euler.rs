//! Brute-force two-Brownian Euler simulation of the spot, independent of the
//! engine's generator, bridge and mixing formula.

use rand::rngs::StdRng;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

/// ATM-or-any-strike call by direct simulation of
/// `dx = -sigma^2/2 dt + sigma (rho dW + rho_bar dZ)`,
/// `d sigma^2 = alpha sigma^2 dW` (log-Euler on the variance).
/// Returns `(mean, std_error)`.
#[allow(clippy::too_many_arguments)]
pub fn euler_call(
    spot: f64,
    sigma0: f64,
    alpha: f64,
    rho: f64,
    tau: f64,
    strike: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> (f64, f64) {
    let mut rng = StdRng::seed_from_u64(seed);
    let dt = tau / steps as f64;
    let sdt = dt.sqrt();
    let rho_bar = (1.0 - rho * rho).max(0.0).sqrt();
    let (mut s1, mut s2) = (0.0, 0.0);
    for _ in 0..paths {
        let mut x = spot.ln();
        let mut var = sigma0 * sigma0;
        for _ in 0..steps {
            let dw: f64 = StandardNormal.sample(&mut rng);
            let dz: f64 = StandardNormal.sample(&mut rng);
            let vol = var.sqrt();
            x += -0.5 * var * dt + vol * sdt * (rho * dw + rho_bar * dz);
            var *= (alpha * sdt * dw - 0.5 * alpha * alpha * dt).exp();
        }
        let payoff = (x.exp() - strike).max(0.0);
        s1 += payoff;
        s2 += payoff * payoff;
    }
    let n = paths as f64;
    let mean = s1 / n;
    let var = (s2 / n - mean * mean) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}
