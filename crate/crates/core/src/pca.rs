//! Principal component analysis for 2-D embedding diagnostics.
//!
//! Components come from iterated power method on the sample covariance with
//! Gram–Schmidt deflation. The covariance is never formed: each product
//! `C·v = Xᶜᵀ(Xᶜ·v)/(N−1)` works directly on the centered data, which keeps
//! the cost linear in the embedding width.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::embedding::{EmbeddingSet, Projection2D, ProjectionMethod};
use crate::error::{Error, Result};

const MAX_POWER_ITERS: usize = 10_000;
const START_SEED: u64 = 0x9CA;

/// Top eigenpairs of an embedding set's sample covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaDecomposition {
    /// Orthonormal components, largest eigenvalue first; each component's
    /// largest-magnitude coordinate is positive.
    pub components: Vec<Vec<f64>>,
    /// Covariance eigenvalue per component, descending.
    pub eigenvalues: Vec<f64>,
    /// Trace of the covariance (sum of all its eigenvalues).
    pub total_variance: f64,
    /// Per-coordinate mean the data was centered with.
    pub mean: Vec<f64>,
}

/// Computes the top `dims` principal components of the embedding rows.
pub fn principal_components(set: &EmbeddingSet, dims: usize) -> Result<PcaDecomposition> {
    let n = set.len();
    let dim = set.dim();
    if dims == 0 || dims > dim {
        return Err(Error::Config(format!(
            "cannot extract {dims} components from width-{dim} embeddings"
        )));
    }
    if n < dims + 1 {
        return Err(Error::Config(format!(
            "pca needs at least {} rows for {dims} components, got {n}",
            dims + 1
        )));
    }

    let mut mean = vec![0.0f64; dim];
    for row in 0..n {
        for (m, &v) in mean.iter_mut().zip(set.vector(row)) {
            if !v.is_finite() {
                return Err(Error::Config(format!(
                    "embedding row {row} contains non-finite values"
                )));
            }
            *m += v as f64;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }

    let mut centered = vec![0.0f64; n * dim];
    for row in 0..n {
        for (j, &v) in set.vector(row).iter().enumerate() {
            centered[row * dim + j] = v as f64 - mean[j];
        }
    }

    let total_variance =
        centered.iter().map(|x| x * x).sum::<f64>() / (n - 1) as f64;
    if total_variance <= 0.0 {
        return Err(Error::DegenerateData(
            "all embedding rows are identical; covariance is zero".into(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED);
    let mut components: Vec<Vec<f64>> = Vec::with_capacity(dims);
    let mut eigenvalues = Vec::with_capacity(dims);
    let lambda_tol = 1e-13 * total_variance;
    let breakdown = 1e-15 * total_variance;

    for _ in 0..dims {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        orthogonalize(&mut v, &components);
        if normalize(&mut v) < 1e-12 {
            v = orthogonal_basis_vector(dim, &components);
        }

        let mut lambda = 0.0;
        for _ in 0..MAX_POWER_ITERS {
            let mut w = cov_mul(&centered, n, dim, &v);
            orthogonalize(&mut w, &components);
            let next_lambda = dot(&v, &w);
            let norm = normalize(&mut w);
            if norm <= breakdown {
                v = orthogonal_basis_vector(dim, &components);
                lambda = 0.0;
                break;
            }
            v = w;
            if (next_lambda - lambda).abs() <= lambda_tol {
                lambda = next_lambda;
                break;
            }
            lambda = next_lambda;
        }

        fix_sign(&mut v);
        components.push(v);
        eigenvalues.push(lambda.max(0.0));
    }

    Ok(PcaDecomposition {
        components,
        eigenvalues,
        total_variance,
        mean,
    })
}

/// Projects the embedding rows onto their top two principal components.
pub fn pca_project(set: &EmbeddingSet) -> Result<Projection2D> {
    let pca = principal_components(set, 2)?;
    let points = (0..set.len())
        .map(|row| {
            let mut point = [0.0f64; 2];
            for (axis, component) in pca.components.iter().enumerate() {
                point[axis] = set
                    .vector(row)
                    .iter()
                    .zip(component.iter().zip(&pca.mean))
                    .map(|(&x, (c, m))| (x as f64 - m) * c)
                    .sum();
            }
            point
        })
        .collect();
    Ok(Projection2D {
        points,
        method: ProjectionMethod::Pca {
            explained_variance: [
                pca.eigenvalues[0] / pca.total_variance,
                pca.eigenvalues[1] / pca.total_variance,
            ],
        },
    })
}

/// `Xᶜᵀ(Xᶜ·v)/(n−1)` without materializing the covariance.
fn cov_mul(centered: &[f64], n: usize, dim: usize, v: &[f64]) -> Vec<f64> {
    let row_dots: Vec<f64> = centered
        .par_chunks_exact(dim)
        .map(|row| dot(row, v))
        .collect();
    let mut out = vec![0.0f64; dim];
    for (row, &t) in centered.chunks_exact(dim).zip(&row_dots) {
        for (o, &x) in out.iter_mut().zip(row) {
            *o += t * x;
        }
    }
    let scale = 1.0 / (n - 1) as f64;
    for o in &mut out {
        *o *= scale;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let coeff = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= coeff * y;
        }
    }
}

/// Scales to unit length, returning the pre-scaling norm.
fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
    norm
}

/// Deterministic unit vector orthogonal to `basis`: the coordinate axis with
/// the largest residual after Gram–Schmidt.
fn orthogonal_basis_vector(dim: usize, basis: &[Vec<f64>]) -> Vec<f64> {
    let mut best: Option<(f64, Vec<f64>)> = None;
    for i in 0..dim {
        let mut e = vec![0.0f64; dim];
        e[i] = 1.0;
        orthogonalize(&mut e, basis);
        let norm = dot(&e, &e).sqrt();
        if best.as_ref().map_or(true, |(bn, _)| norm > *bn) {
            best = Some((norm, e));
        }
    }
    let (_, mut e) = best.expect("dim is positive");
    normalize(&mut e);
    e
}

/// Flips the component so its largest-magnitude coordinate is positive.
fn fix_sign(v: &mut [f64]) {
    let mut lead = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[lead].abs() {
            lead = i;
        }
    }
    if v[lead] < 0.0 {
        for x in v.iter_mut() {
            *x = -*x;
        }
    }
}
