//! Diagonal-covariance Gaussian mixture models trained by EM, with seeded
//! k-means++ initialization. Used as the universal background model for
//! i-vector extraction and as the one-class model for voice PAD.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::json_digest;

const LN_2PI: f64 = 1.8378770664093453;

/// Variance floor as a fraction of the per-dimension global variance.
const VAR_FLOOR_FRACTION: f64 = 1e-3;

/// Components whose weight underflows this are treated as degenerate.
const WEIGHT_FLOOR: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("too few frames: {got}, need at least {needed}")]
    TooFewFrames { got: usize, needed: usize },
    #[error("component {index} degenerated (weight underflow)")]
    DegenerateComponent { index: usize },
    #[error("dimension mismatch: model has {model}, data has {data}")]
    DimensionMismatch { model: usize, data: usize },
}

/// Gaussian mixture with diagonal covariances.
///
/// Invariants: weights sum to 1, every variance is at or above the floor
/// recorded at training time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagGmm {
    pub weights: Vec<f64>,
    /// K x D component means.
    pub means: Vec<Vec<f64>>,
    /// K x D per-dimension variances.
    pub variances: Vec<Vec<f64>>,
}

impl DiagGmm {
    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, |m| m.len())
    }

    pub fn digest(&self) -> String {
        json_digest(self)
    }

    fn check_dim(&self, frame_dim: usize) -> Result<(), GmmError> {
        if frame_dim != self.dim() {
            return Err(GmmError::DimensionMismatch {
                model: self.dim(),
                data: frame_dim,
            });
        }
        Ok(())
    }

    /// Per-component log densities `ln(N(x; mu_k, sigma_k^2))` for one frame.
    pub fn component_log_densities(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim() as f64;
        (0..self.num_components())
            .map(|k| {
                let mut quad = 0.0;
                let mut logdet = 0.0;
                for ((xi, mi), vi) in x.iter().zip(&self.means[k]).zip(&self.variances[k]) {
                    let diff = xi - mi;
                    quad += diff * diff / vi;
                    logdet += vi.ln();
                }
                -0.5 * (d * LN_2PI + logdet + quad)
            })
            .collect()
    }

    /// Log of the weighted mixture density for one frame.
    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let logs: Vec<f64> = self
            .component_log_densities(x)
            .iter()
            .zip(&self.weights)
            .map(|(lp, w)| lp + w.ln())
            .collect();
        log_sum_exp(&logs)
    }

    /// Posterior responsibilities for one frame, plus the frame log
    /// likelihood.
    pub fn responsibilities(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let logs: Vec<f64> = self
            .component_log_densities(x)
            .iter()
            .zip(&self.weights)
            .map(|(lp, w)| lp + w.ln())
            .collect();
        let total = log_sum_exp(&logs);
        (logs.iter().map(|l| (l - total).exp()).collect(), total)
    }

    /// Mean per-frame log likelihood over a set of frames.
    pub fn avg_log_likelihood(&self, frames: &[Vec<f64>]) -> Result<f64, GmmError> {
        if frames.is_empty() {
            return Err(GmmError::TooFewFrames { got: 0, needed: 1 });
        }
        self.check_dim(frames[0].len())?;
        let total: f64 = frames.iter().map(|f| self.log_likelihood(f)).sum();
        Ok(total / frames.len() as f64)
    }
}

pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m.is_infinite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn global_stats(frames: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = frames[0].len();
    let n = frames.len() as f64;
    let mut mean = vec![0.0; d];
    for f in frames {
        for (m, x) in mean.iter_mut().zip(f) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for f in frames {
        for ((v, x), m) in var.iter_mut().zip(f).zip(&mean) {
            let diff = x - m;
            *v += diff * diff;
        }
    }
    var.iter_mut().for_each(|v| *v /= n);
    (mean, var)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Seeded k-means++ center selection (selection only, no Lloyd iterations).
fn kmeans_pp_centers(frames: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(frames[rng.random_range(0..frames.len())].clone());
    let mut d2: Vec<f64> = frames.iter().map(|f| sq_dist(f, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // All points coincide with existing centers; pick uniformly.
            rng.random_range(0..frames.len())
        } else {
            let mut target = rng.random_range(0.0..total);
            let mut idx = 0;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    idx = i;
                    break;
                }
            }
            idx
        };
        centers.push(frames[next].clone());
        let c = centers.last().unwrap();
        for (dist, f) in d2.iter_mut().zip(frames) {
            *dist = dist.min(sq_dist(f, c));
        }
    }
    centers
}

/// EM-trained diagonal GMM plus the total log-likelihood recorded at each
/// iteration (evaluated with the parameters entering that iteration).
pub fn train_diag_gmm_traced(
    frames: &[Vec<f64>],
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<(DiagGmm, Vec<f64>), GmmError> {
    let needed = 10 * k;
    if frames.len() < needed {
        return Err(GmmError::TooFewFrames {
            got: frames.len(),
            needed,
        });
    }
    let d = frames[0].len();
    let (_, gvar) = global_stats(frames);
    let floor: Vec<f64> = gvar
        .iter()
        .map(|v| (v * VAR_FLOOR_FRACTION).max(1e-12))
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let means = kmeans_pp_centers(frames, k, &mut rng);
    let init_var: Vec<f64> = gvar
        .iter()
        .zip(&floor)
        .map(|(v, f)| v.max(*f))
        .collect();
    let mut gmm = DiagGmm {
        weights: vec![1.0 / k as f64; k],
        means,
        variances: vec![init_var; k],
    };

    let t = frames.len() as f64;
    let mut trace = Vec::with_capacity(iters);
    for _ in 0..iters {
        // E-step, accumulating sufficient statistics in one pass.
        let mut n = vec![0.0; k];
        let mut sum_x = vec![vec![0.0; d]; k];
        let mut sum_xx = vec![vec![0.0; d]; k];
        let mut total_ll = 0.0;
        for f in frames {
            let (resp, ll) = gmm.responsibilities(f);
            total_ll += ll;
            for (c, &g) in resp.iter().enumerate() {
                n[c] += g;
                for (i, &x) in f.iter().enumerate() {
                    sum_x[c][i] += g * x;
                    sum_xx[c][i] += g * x * x;
                }
            }
        }
        trace.push(total_ll);

        // M-step with variance flooring.
        for c in 0..k {
            let w = n[c] / t;
            if w < WEIGHT_FLOOR {
                return Err(GmmError::DegenerateComponent { index: c });
            }
            gmm.weights[c] = w;
            for i in 0..d {
                let mean = sum_x[c][i] / n[c];
                let var = (sum_xx[c][i] / n[c] - mean * mean).max(floor[i]);
                gmm.means[c][i] = mean;
                gmm.variances[c][i] = var;
            }
        }
        let wsum: f64 = gmm.weights.iter().sum();
        gmm.weights.iter_mut().for_each(|w| *w /= wsum);
    }

    Ok((gmm, trace))
}

/// Convenience wrapper over [`train_diag_gmm_traced`] discarding the trace.
pub fn train_diag_gmm(
    frames: &[Vec<f64>],
    k: usize,
    iters: usize,
    seed: u64,
) -> Result<DiagGmm, GmmError> {
    train_diag_gmm_traced(frames, k, iters, seed).map(|(g, _)| g)
}

/// Zeroth-order counts and centered first-order sums of a frame set under a
/// GMM: `N_k = sum_t gamma_k(t)`, `F_k = sum_t gamma_k(t) (x_t - mu_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaumWelchStats {
    pub n: Vec<f64>,
    /// K x D centered first-order sums.
    pub f: Vec<Vec<f64>>,
}

impl BaumWelchStats {
    pub fn zero(k: usize, d: usize) -> BaumWelchStats {
        BaumWelchStats {
            n: vec![0.0; k],
            f: vec![vec![0.0; d]; k],
        }
    }

    pub fn total_frames(&self) -> f64 {
        self.n.iter().sum()
    }
}

pub fn accumulate_bw_stats(
    frames: &[Vec<f64>],
    ubm: &DiagGmm,
) -> Result<BaumWelchStats, GmmError> {
    let k = ubm.num_components();
    let d = ubm.dim();
    let mut stats = BaumWelchStats::zero(k, d);
    for frame in frames {
        ubm.check_dim(frame.len())?;
        let (resp, _) = ubm.responsibilities(frame);
        for (c, &g) in resp.iter().enumerate() {
            stats.n[c] += g;
            for (i, &x) in frame.iter().enumerate() {
                stats.f[c][i] += g * (x - ubm.means[c][i]);
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng_frames(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect()
    }

    #[test]
    fn k1_matches_closed_form_mle() {
        // Data {1, 3} in 1-D: mean 2, biased variance 1, weight 1.
        let frames: Vec<Vec<f64>> = [1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0, 1.0, 3.0]
            .iter()
            .map(|&x| vec![x])
            .collect();
        let gmm = train_diag_gmm(&frames, 1, 5, 0).unwrap();
        assert!((gmm.weights[0] - 1.0).abs() < 1e-12);
        assert!((gmm.means[0][0] - 2.0).abs() < 1e-10);
        assert!((gmm.variances[0][0] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn two_separated_clusters_are_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 500usize;
        let mut frames = Vec::new();
        for _ in 0..n {
            frames.push(vec![gauss(&mut rng)]);
        }
        for _ in 0..n {
            frames.push(vec![10.0 + gauss(&mut rng)]);
        }
        let gmm = train_diag_gmm(&frames, 2, 20, 1).unwrap();
        let mut means: Vec<f64> = gmm.means.iter().map(|m| m[0]).collect();
        means.sort_by(|a, b| a.total_cmp(b));
        // Sampling oracle: cluster means land within 3 sigma / sqrt(n) of
        // the true centers.
        let tol = 3.0 / (n as f64).sqrt();
        assert!((means[0] - 0.0).abs() < tol, "mean {} vs 0", means[0]);
        assert!((means[1] - 10.0).abs() < tol, "mean {} vs 10", means[1]);
    }

    fn gauss(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller.
        let u1: f64 = rng.random_range(f64::EPSILON..1.0);
        let u2: f64 = rng.random_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    #[test]
    fn same_seed_gives_identical_model() {
        let frames = rng_frames(200, 3, 9);
        let a = train_diag_gmm(&frames, 4, 8, 77).unwrap();
        let b = train_diag_gmm(&frames, 4, 8, 77).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn log_likelihood_trace_is_monotone() {
        let frames = rng_frames(300, 2, 5);
        let (_, trace) = train_diag_gmm_traced(&frames, 4, 12, 3).unwrap();
        for w in trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-8, "LL decreased: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn too_few_frames_is_rejected() {
        let frames = rng_frames(15, 2, 5);
        assert!(matches!(
            train_diag_gmm(&frames, 2, 5, 0),
            Err(GmmError::TooFewFrames { needed: 20, .. })
        ));
    }

    #[test]
    fn bw_stats_single_frame_at_mean() {
        let gmm = DiagGmm {
            weights: vec![1.0],
            means: vec![vec![2.0, -1.0]],
            variances: vec![vec![1.0, 1.0]],
        };
        let stats = accumulate_bw_stats(&[vec![2.0, -1.0]], &gmm).unwrap();
        assert!((stats.n[0] - 1.0).abs() < 1e-15);
        assert!(stats.f[0].iter().all(|&v| v.abs() < 1e-15));
    }

    #[test]
    fn bw_counts_sum_to_frame_count() {
        let frames = rng_frames(123, 2, 8);
        let gmm = train_diag_gmm(&frames, 3, 5, 2).unwrap();
        let stats = accumulate_bw_stats(&frames, &gmm).unwrap();
        assert!((stats.total_frames() - 123.0).abs() < 1e-9);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn responsibilities_match_bruteforce_densities() {
        // Two-component toy model; gamma_k must equal the normalized
        // weighted densities computed directly.
        let gmm = DiagGmm {
            weights: vec![0.3, 0.7],
            means: vec![vec![0.0, 0.0], vec![2.0, 1.0]],
            variances: vec![vec![1.0, 0.5], vec![2.0, 1.5]],
        };
        let x = vec![1.0, 0.3];
        let (resp, _) = gmm.responsibilities(&x);

        let density = |k: usize| -> f64 {
            let mut p = gmm.weights[k];
            for i in 0..2 {
                let v = gmm.variances[k][i];
                let diff = x[i] - gmm.means[k][i];
                p *= (-diff * diff / (2.0 * v)).exp() / (2.0 * std::f64::consts::PI * v).sqrt();
            }
            p
        };
        let (p0, p1) = (density(0), density(1));
        assert!((resp[0] - p0 / (p0 + p1)).abs() < 1e-12);
        assert!((resp[1] - p1 / (p0 + p1)).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let frames = rng_frames(50, 2, 8);
        let gmm = train_diag_gmm(&frames, 2, 3, 1).unwrap();
        assert!(matches!(
            accumulate_bw_stats(&[vec![0.0; 3]], &gmm),
            Err(GmmError::DimensionMismatch { model: 2, data: 3 })
        ));
    }
}
