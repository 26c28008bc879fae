//! Sample moments with a reduction order that does not depend on the number of
//! worker threads.
//!
//! Samples are grouped into fixed chunks of [`CHUNK`] consecutive indices. Each
//! chunk is accumulated sequentially, and chunk results are merged by a
//! pairwise tree over chunk order, so any thread partition yields bit-identical
//! moments.

use rayon::prelude::*;

/// Samples per reduction chunk.
pub const CHUNK: usize = 256;

/// Largest supported sample dimension.
pub const MAX_DIM: usize = 64;

/// Share of the absolute sum above which a single sample is a heavy-tail warning.
pub const HEAVY_TAIL_SHARE: f64 = 0.01;

/// Monte Carlo point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    /// Number of independent samples; an antithetic pair counts once.
    pub n: usize,
}

impl EstimateWithError {
    pub fn exact(value: f64) -> Self {
        Self {
            value,
            std_error: 0.0,
            n: 1,
        }
    }

    /// `|value - reference| <= k * std_error`.
    pub fn within(&self, reference: f64, k: f64) -> bool {
        (self.value - reference).abs() <= k * self.std_error
    }
}

/// Running mean and co-moment matrix of a `dim`-vector sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    dim: usize,
    n: usize,
    mean: Vec<f64>,
    /// Row-major `dim x dim` sum of centered cross products.
    comoment: Vec<f64>,
    max_abs: Vec<f64>,
    sum_abs: Vec<f64>,
}

impl Moments {
    pub fn new(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "at most {MAX_DIM} components");
        Self {
            dim,
            n: 0,
            mean: vec![0.0; dim],
            comoment: vec![0.0; dim * dim],
            max_abs: vec![0.0; dim],
            sum_abs: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.n
    }

    /// Welford update with one sample.
    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        self.n += 1;
        let n = self.n as f64;
        let d = self.dim;
        let mut delta = [0.0f64; MAX_DIM];
        for i in 0..d {
            delta[i] = x[i] - self.mean[i];
            self.mean[i] += delta[i] / n;
        }
        for i in 0..d {
            let after = x[i] - self.mean[i];
            let row = &mut self.comoment[i * d..(i + 1) * d];
            for (c, dj) in row.iter_mut().zip(&delta[..d]) {
                *c += after * dj;
            }
            let a = x[i].abs();
            self.sum_abs[i] += a;
            self.max_abs[i] = self.max_abs[i].max(a);
        }
    }

    /// Combines two disjoint samples.
    pub fn merge(&self, other: &Moments) -> Moments {
        assert_eq!(self.dim, other.dim);
        if self.n == 0 {
            return other.clone();
        }
        if other.n == 0 {
            return self.clone();
        }
        let d = self.dim;
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let delta: Vec<f64> = (0..d).map(|i| other.mean[i] - self.mean[i]).collect();
        let mean = (0..d).map(|i| self.mean[i] + delta[i] * nb / n).collect();
        let mut comoment = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                comoment[i * d + j] = self.comoment[i * d + j]
                    + other.comoment[i * d + j]
                    + delta[i] * delta[j] * na * nb / n;
            }
        }
        Moments {
            dim: d,
            n: self.n + other.n,
            mean,
            comoment,
            max_abs: (0..d)
                .map(|i| self.max_abs[i].max(other.max_abs[i]))
                .collect(),
            sum_abs: (0..d).map(|i| self.sum_abs[i] + other.sum_abs[i]).collect(),
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    /// Unbiased sample covariance between components `i` and `j`.
    pub fn sample_cov(&self, i: usize, j: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        self.comoment[i * self.dim + j] / (self.n - 1) as f64
    }

    pub fn heavy_tail(&self, i: usize) -> bool {
        self.sum_abs[i] > 0.0 && self.max_abs[i] > HEAVY_TAIL_SHARE * self.sum_abs[i]
    }

    pub fn into_joint(self) -> JointEstimate {
        let d = self.dim;
        let n = self.n.max(1) as f64;
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                // symmetrize the Welford accumulation
                let c = 0.5 * (self.sample_cov(i, j) + self.sample_cov(j, i));
                cov[i * d + j] = c / n;
            }
            cov[i * d + i] = cov[i * d + i].max(0.0);
        }
        let heavy = (0..d).map(|i| self.heavy_tail(i)).collect();
        JointEstimate {
            mean: self.mean,
            cov,
            n: self.n,
            heavy_tail: heavy,
        }
    }
}

/// Joint estimate of several means from the same samples.
#[derive(Debug, Clone, PartialEq)]
pub struct JointEstimate {
    pub mean: Vec<f64>,
    /// Row-major covariance matrix of the sample means (already divided by `n`).
    pub cov: Vec<f64>,
    pub n: usize,
    /// Per component: the largest single sample exceeds 1% of the absolute sum.
    pub heavy_tail: Vec<bool>,
}

impl JointEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim() + j]
    }

    pub fn estimate(&self, i: usize) -> EstimateWithError {
        EstimateWithError {
            value: self.mean[i],
            std_error: self.cov(i, i).sqrt(),
            n: self.n,
        }
    }

    /// Standard error of `sum_i grad[i] * mean[i]` (delta method).
    pub fn linear_std_error(&self, grad: &[f64]) -> f64 {
        quad_form(&self.cov, grad).max(0.0).sqrt()
    }

    pub fn any_heavy_tail(&self) -> bool {
        self.heavy_tail.iter().any(|&h| h)
    }

    /// Regression control variates. The `controls` components have known
    /// zero mean; each target `y` becomes `y - beta' x` with the least-squares
    /// `beta`, and the covariance is mapped through the same linear map.
    /// Controls that are constant or collinear with earlier ones are skipped.
    pub fn with_controls(&self, targets: &[usize], controls: &[usize]) -> JointEstimate {
        let d = self.dim();
        // pivot-free Cholesky of the control block, dropping dependent columns
        let mut kept: Vec<usize> = Vec::new();
        let mut l: Vec<Vec<f64>> = Vec::new();
        for &c in controls {
            let var = self.cov(c, c);
            if !(var > 0.0) {
                continue;
            }
            let mut r = vec![0.0; kept.len() + 1];
            for a in 0..kept.len() {
                let mut s = self.cov(c, kept[a]);
                for b in 0..a {
                    s -= r[b] * l[a][b];
                }
                r[a] = s / l[a][a];
            }
            let resid = var - r[..kept.len()].iter().map(|v| v * v).sum::<f64>();
            if !(resid > 1e-10 * var) {
                continue;
            }
            r[kept.len()] = resid.sqrt();
            kept.push(c);
            l.push(r);
        }
        let k = kept.len();
        let mut a_map = vec![0.0; d * d];
        for i in 0..d {
            a_map[i * d + i] = 1.0;
        }
        if k > 0 {
            for &t in targets {
                // solve L L' beta = C_xy
                let mut z = vec![0.0; k];
                for a in 0..k {
                    let mut s = self.cov(kept[a], t);
                    for b in 0..a {
                        s -= l[a][b] * z[b];
                    }
                    z[a] = s / l[a][a];
                }
                let mut beta = vec![0.0; k];
                for a in (0..k).rev() {
                    let mut s = z[a];
                    for b in a + 1..k {
                        s -= l[b][a] * beta[b];
                    }
                    beta[a] = s / l[a][a];
                }
                for (a, &c) in kept.iter().enumerate() {
                    a_map[t * d + c] -= beta[a];
                }
            }
        }
        let mean = (0..d)
            .map(|i| (0..d).map(|j| a_map[i * d + j] * self.mean[j]).sum())
            .collect();
        let mut ac = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let a = a_map[i * d + j];
                if a != 0.0 {
                    for m in 0..d {
                        ac[i * d + m] += a * self.cov[j * d + m];
                    }
                }
            }
        }
        let mut cov = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] = (0..d).map(|m| ac[i * d + m] * a_map[j * d + m]).sum();
            }
        }
        JointEstimate {
            mean,
            cov,
            n: self.n,
            heavy_tail: self.heavy_tail.clone(),
        }
    }
}

/// `g' C g` for a row-major square `C`.
pub fn quad_form(cov: &[f64], g: &[f64]) -> f64 {
    let d = g.len();
    debug_assert_eq!(cov.len(), d * d);
    let mut s = 0.0;
    for i in 0..d {
        if g[i] == 0.0 {
            continue;
        }
        let mut row = 0.0;
        for j in 0..d {
            row += cov[i * d + j] * g[j];
        }
        s += g[i] * row;
    }
    s
}

/// Accumulates `n_samples` samples of dimension `dim`, where `fill(i, out)`
/// writes sample `i`. Chunks run in parallel on the current rayon pool.
pub fn sample_moments<F>(n_samples: usize, dim: usize, fill: F) -> Moments
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    sample_moments_with(n_samples, dim, || (), |_, i, out| fill(i, out))
}

/// As [`sample_moments`], with per-chunk scratch state built by `init`.
pub fn sample_moments_with<S, I, F>(n_samples: usize, dim: usize, init: I, fill: F) -> Moments
where
    I: Fn() -> S + Sync,
    F: Fn(&mut S, usize, &mut [f64]) + Sync,
{
    let n_chunks = n_samples.div_ceil(CHUNK);
    let chunks: Vec<Moments> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut state = init();
            let mut acc = Moments::new(dim);
            let mut buf = vec![0.0; dim];
            let end = ((c + 1) * CHUNK).min(n_samples);
            for i in c * CHUNK..end {
                fill(&mut state, i, &mut buf);
                acc.push(&buf);
            }
            acc
        })
        .collect();
    pairwise_merge(&chunks).unwrap_or_else(|| Moments::new(dim))
}

fn pairwise_merge(parts: &[Moments]) -> Option<Moments> {
    match parts.len() {
        0 => None,
        1 => Some(parts[0].clone()),
        len => {
            let (a, b) = parts.split_at(len / 2);
            Some(pairwise_merge(a)?.merge(&pairwise_merge(b)?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn controls_remove_correlated_noise() {
        // y = 1 + x + 0.1 e with zero-mean control x; a copy of x and a
        // constant column must be skipped
        let m = sample_moments(10_000, 4, |i, out| {
            let mut s = crate::rng::NormalStream::new(5, i as u64);
            let x = s.next_normal();
            let e = s.next_normal();
            out[0] = 1.0 + x + 0.1 * e;
            out[1] = x;
            out[2] = x;
            out[3] = 0.0;
        });
        let j = m.into_joint();
        let c = j.with_controls(&[0], &[1, 2, 3]);
        let raw = j.estimate(0);
        let adj = c.estimate(0);
        assert!(adj.std_error < 0.15 * raw.std_error);
        assert!((adj.std_error - 0.1 / 100.0).abs() < 1e-4);
        assert!((adj.value - 1.0).abs() < 4.0 * adj.std_error);
        assert_eq!(c.mean[1], j.mean[1]);
        assert_eq!(c.cov(1, 1), j.cov(1, 1));
    }

    #[test]
    fn moments_match_two_pass() {
        let xs: Vec<[f64; 2]> = (0..1000)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin() + 3.0, t.cos() * t.sin()]
            })
            .collect();
        let m = sample_moments(xs.len(), 2, |i, out| out.copy_from_slice(&xs[i]));
        let n = xs.len() as f64;
        let mx: f64 = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let my: f64 = xs.iter().map(|x| x[1]).sum::<f64>() / n;
        let cxy: f64 = xs.iter().map(|x| (x[0] - mx) * (x[1] - my)).sum::<f64>() / (n - 1.0);
        assert!((m.mean()[0] - mx).abs() < 1e-13);
        assert!((m.sample_cov(0, 1) - cxy).abs() < 1e-13);
        let j = m.into_joint();
        assert!((j.cov(1, 0) * n - cxy).abs() < 1e-13);
    }

    #[test]
    fn reduction_independent_of_pool_size() {
        let f = |i: usize, out: &mut [f64]| {
            out[0] = ((i as f64) * 1.618).fract();
            out[1] = out[0] * out[0];
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| sample_moments(100_003, 2, f))
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn constant_samples_have_zero_error() {
        let m = sample_moments(1000, 1, |_, out| out[0] = 0.2);
        let e = m.into_joint().estimate(0);
        assert_eq!(e.std_error, 0.0);
        assert!((e.value - 0.2).abs() < 1e-16);
    }

    #[test]
    fn heavy_tail_flag() {
        let m = sample_moments(1000, 1, |i, out| out[0] = if i == 7 { 1e3 } else { 1.0 });
        assert!(m.heavy_tail(0));
        let m = sample_moments(1000, 1, |_, out| out[0] = 1.0);
        assert!(!m.heavy_tail(0));
    }

    #[test]
    fn linear_std_error_of_difference() {
        let j = JointEstimate {
            mean: vec![1.0, 1.0],
            cov: vec![4.0, 3.0, 3.0, 4.0],
            n: 10,
            heavy_tail: vec![false, false],
        };
        assert!((j.linear_std_error(&[1.0, -1.0]) - 2f64.sqrt()).abs() < 1e-15);
    }
}
