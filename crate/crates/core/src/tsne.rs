//! Exact t-SNE over cosine distances for 2-D embedding diagnostics.
//!
//! Input affinities come from the cosine-distance matrix with per-point
//! bandwidths bisected to a target perplexity. The layout is optimized by
//! gradient descent with momentum, per-coordinate adaptive gains, and an
//! early-exaggeration phase, and every iteration's KL divergence (against
//! the unexaggerated affinities) is recorded. O(N²) throughout;
//! diarization-scale inputs never need more.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::clustering::pairwise_cosine;
use crate::embedding::{EmbeddingSet, Projection2D, ProjectionMethod};
use crate::error::{Error, Result};

pub const DEFAULT_TSNE_ITERS: usize = 1000;
pub const DEFAULT_PERPLEXITY: f64 = 30.0;

const EARLY_EXAGGERATION: f64 = 12.0;
/// Iterations that run with exaggerated input affinities.
pub const EXAGGERATION_ITERS: usize = 250;
const MOMENTUM_SWITCH_ITER: usize = 250;
const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const MAX_LEARNING_RATE: f64 = 200.0;
const MIN_LEARNING_RATE: f64 = 10.0;
const MIN_GAIN: f64 = 0.01;
const INIT_SIGMA: f64 = 1e-4;

/// Step size from the sample-size heuristic `N / exaggeration`, clamped to
/// [10, 200]. The stock rate of 200 assumes thousands of points; the KL
/// gradient shrinks like 1/N, so a fixed 200 overshoots and scatters small
/// layouts during the exaggeration phase.
fn learning_rate(n: usize) -> f64 {
    (n as f64 / EARLY_EXAGGERATION).clamp(MIN_LEARNING_RATE, MAX_LEARNING_RATE)
}
const PERPLEXITY_TOL: f64 = 1e-3;
const MAX_BISECTION_STEPS: usize = 200;

/// The stock perplexity of 30, clamped below the feasibility bound
/// `(N−1)/3` for small inputs.
pub fn default_perplexity(n: usize) -> f64 {
    DEFAULT_PERPLEXITY.min((n as f64 - 1.0) / 3.0 - 1e-6)
}

/// Embeds the rows in 2-D by exact t-SNE, returning the layout and the KL
/// divergence after each iteration.
pub fn tsne_project(
    set: &EmbeddingSet,
    perplexity: f64,
    iters: usize,
    seed: u64,
) -> Result<(Projection2D, Vec<f64>)> {
    let n = set.len();
    if n < 4 {
        return Err(Error::Config(format!(
            "t-sne needs at least 4 rows, got {n}"
        )));
    }
    if !perplexity.is_finite() || perplexity <= 0.0 || perplexity >= (n as f64 - 1.0) / 3.0 {
        return Err(Error::Config(format!(
            "perplexity {perplexity} is infeasible for {n} rows; need 0 < perplexity < {}",
            (n as f64 - 1.0) / 3.0
        )));
    }
    if iters == 0 {
        return Err(Error::Config("t-sne needs at least one iteration".into()));
    }
    for row in 0..n {
        if set.vector(row).iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "embedding row {row} contains non-finite values"
            )));
        }
    }

    // Duplicate rows have mathematically identical affinities and gradients,
    // but summation order would let rounding noise seed the unstable
    // relative mode and slowly pull them apart. Giving duplicates the same
    // init position and bit-equal affinity rows keeps their trajectories
    // exactly identical, so they remain coincident.
    let duplicate_of: Vec<Option<usize>> = {
        let mut first: std::collections::HashMap<Vec<u32>, usize> = std::collections::HashMap::new();
        (0..n)
            .map(|i| {
                let key: Vec<u32> = set.vector(i).iter().map(|v| v.to_bits()).collect();
                match first.entry(key) {
                    std::collections::hash_map::Entry::Occupied(e) => Some(*e.get()),
                    std::collections::hash_map::Entry::Vacant(e) => {
                        e.insert(i);
                        None
                    }
                }
            })
            .collect()
    };

    let dist = pairwise_cosine(set);
    let mut conditional = conditional_affinities(&dist, n, perplexity);
    for b in 0..n {
        if let Some(a) = duplicate_of[b] {
            for j in 0..n {
                conditional[b * n + j] = if j == b {
                    0.0
                } else if j == a {
                    conditional[a * n + b]
                } else {
                    conditional[a * n + j]
                };
            }
        }
    }
    let p = symmetrize(&conditional, n);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = Normal::new(0.0, INIT_SIGMA).expect("constant sigma is valid");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [gaussian.sample(&mut rng), gaussian.sample(&mut rng)])
        .collect();
    for i in 0..n {
        if let Some(first) = duplicate_of[i] {
            y[i] = y[first];
        }
    }
    let mut velocity = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut kl_history = Vec::with_capacity(iters);
    let eta = learning_rate(n);

    for iter in 0..iters {
        let exaggeration = if iter < EXAGGERATION_ITERS {
            EARLY_EXAGGERATION
        } else {
            1.0
        };
        let momentum = if iter < MOMENTUM_SWITCH_ITER {
            INITIAL_MOMENTUM
        } else {
            FINAL_MOMENTUM
        };

        let weights = student_t_weights(&y);
        let z: f64 = weights.iter().sum::<f64>() - n as f64;

        let gradient: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0f64; 2];
                for j in 0..n {
                    if j == i {
                        continue;
                    }
                    let w = weights[i * n + j];
                    let q = w / z;
                    let coeff = 4.0 * (exaggeration * p[i * n + j] - q) * w;
                    g[0] += coeff * (y[i][0] - y[j][0]);
                    g[1] += coeff * (y[i][1] - y[j][1]);
                }
                g
            })
            .collect();

        let mut mean = [0.0f64; 2];
        for i in 0..n {
            for axis in 0..2 {
                let g = gradient[i][axis];
                gains[i][axis] = if (g > 0.0) == (velocity[i][axis] > 0.0) {
                    (gains[i][axis] * 0.8).max(MIN_GAIN)
                } else {
                    gains[i][axis] + 0.2
                };
                velocity[i][axis] = momentum * velocity[i][axis] - eta * gains[i][axis] * g;
                y[i][axis] += velocity[i][axis];
                mean[axis] += y[i][axis];
            }
        }
        mean[0] /= n as f64;
        mean[1] /= n as f64;
        for point in &mut y {
            point[0] -= mean[0];
            point[1] -= mean[1];
        }

        kl_history.push(kl_divergence(&p, &y, n));
    }

    Ok((
        Projection2D {
            points: y,
            method: ProjectionMethod::Tsne {
                perplexity,
                iters,
                seed,
            },
        },
        kl_history,
    ))
}

/// Conditional affinity matrix: row i holds `p_{j|i}` with the bandwidth
/// bisected until the row's perplexity is within tolerance of the target.
fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut beta = 1.0f64;
            let mut beta_min = 0.0f64;
            let mut beta_max = f64::INFINITY;
            let mut row = vec![0.0f64; n];
            for _ in 0..MAX_BISECTION_STEPS {
                let (perp, _) = row_perplexity(dist, n, i, beta, &mut row);
                if (perp - perplexity).abs() <= PERPLEXITY_TOL {
                    break;
                }
                if perp > perplexity {
                    beta_min = beta;
                    beta = if beta_max.is_finite() {
                        (beta + beta_max) / 2.0
                    } else {
                        beta * 2.0
                    };
                } else {
                    beta_max = beta;
                    beta = (beta + beta_min) / 2.0;
                }
            }
            row
        })
        .collect();
    rows.into_iter().flatten().collect()
}

/// Fills `row` with the conditional distribution for point `i` at bandwidth
/// `beta`, returning its perplexity and the shifted partition sum.
fn row_perplexity(dist: &[f64], n: usize, i: usize, beta: f64, row: &mut [f64]) -> (f64, f64) {
    let shift = (0..n)
        .filter(|&j| j != i)
        .map(|j| dist[i * n + j])
        .fold(f64::INFINITY, f64::min);
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for j in 0..n {
        if j == i {
            row[j] = 0.0;
            continue;
        }
        let d = dist[i * n + j] - shift;
        let w = (-beta * d).exp();
        row[j] = w;
        sum += w;
        weighted += d * w;
    }
    for r in row.iter_mut() {
        *r /= sum;
    }
    let entropy_nats = sum.ln() + beta * weighted / sum;
    (entropy_nats.exp(), sum)
}

/// Joint affinities `P = (C + Cᵀ)/(2N)`; sums to 1.
fn symmetrize(conditional: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (conditional[i * n + j] + conditional[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Unnormalized Student-t weights `1/(1+‖y_i−y_j‖²)`; the diagonal holds 1
/// and is subtracted out by callers.
fn student_t_weights(y: &[[f64; 2]]) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let yi = y[i];
            y.iter().map(move |yj| {
                let dx = yi[0] - yj[0];
                let dy = yi[1] - yj[1];
                1.0 / (1.0 + dx * dx + dy * dy)
            })
        })
        .collect()
}

/// KL(P‖Q) over distinct pairs, against the unexaggerated P.
fn kl_divergence(p: &[f64], y: &[[f64; 2]], n: usize) -> f64 {
    let weights = student_t_weights(y);
    let z: f64 = weights.iter().sum::<f64>() - n as f64;
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let pij = p[i * n + j];
            if pij <= 0.0 {
                continue;
            }
            let qij = (weights[i * n + j] / z).max(1e-12);
            kl += pij * (pij / qij).ln();
        }
    }
    kl
}
