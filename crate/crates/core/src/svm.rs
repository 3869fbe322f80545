//! Speaker identification with one-vs-one linear SVMs over embeddings.
//!
//! Each unordered class pair gets a binary hinge-loss classifier trained by
//! subgradient descent; queries are identified by majority vote across all
//! `K(K-1)/2` pairs.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::nn::serialize::{decode_f32_blob, read_container, write_container};

const SVM_MAGIC: &[u8; 8] = b"VOXSVM01";

/// Binary linear classifier for one unordered class pair.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmPair {
    /// Hyperplane normal, one weight per embedding dimension.
    pub weights: Vec<f32>,
    pub bias: f32,
    /// `(i, j)` with `i < j`; scores at or above zero choose `i`.
    pub class_pair: (usize, usize),
    /// Hinge penalty weight the pair was trained with.
    pub c: f64,
}

impl LinearSvmPair {
    /// Signed distance-like score `w.x + b`.
    pub fn score(&self, x: &[f32]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::Dimension(format!(
                "query dim {} vs pair dim {}",
                x.len(),
                self.weights.len()
            )));
        }
        let mut acc = 0.0f64;
        for (w, v) in self.weights.iter().zip(x) {
            acc += *w as f64 * *v as f64;
        }
        Ok(acc + self.bias as f64)
    }

    /// The pair's vote for a query; ties go to the lower class id.
    pub fn decide(&self, x: &[f32]) -> Result<usize> {
        Ok(if self.score(x)? >= 0.0 {
            self.class_pair.0
        } else {
            self.class_pair.1
        })
    }

    /// Full objective `(1/2)|w|^2 + C * sum hinge(1 - y(w.x + b))` over a
    /// labeled set, `true` meaning the pair's first class.
    pub fn objective(&self, x: &[&[f32]], y: &[bool]) -> Result<f64> {
        let norm = self
            .weights
            .iter()
            .map(|w| *w as f64 * *w as f64)
            .sum::<f64>()
            / 2.0;
        let mut hinge = 0.0;
        for (row, &positive) in x.iter().zip(y) {
            let sign = if positive { 1.0 } else { -1.0 };
            hinge += (1.0 - sign * self.score(row)?).max(0.0);
        }
        Ok(norm + self.c * hinge)
    }
}

/// Trains one pair by epoch-shuffled subgradient descent.
///
/// Minimizes `(1/2)|w|^2 + C * sum hinge(1 - y(w.x + b))` with the step
/// schedule `1/(lambda t)` where `lambda = 1/(C m)`. The bias rides along
/// as a constant-one feature, so it shares the shrink step and the ball
/// projection that keeps iterates inside radius `1/sqrt(lambda)`; without
/// both, the first steps fling the bias to `C m` and it never recovers
/// within a sane epoch budget. `y[k] = true` marks `class_pair.0`. With
/// `C = 0` only the regularizer remains and the weights stay at zero. The
/// same seed reproduces the exact weights.
pub fn train_svm_pair(
    x: &[&[f32]],
    y: &[bool],
    c: f64,
    epochs: usize,
    seed: u64,
    class_pair: (usize, usize),
) -> Result<LinearSvmPair> {
    if x.len() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows vs {} labels",
            x.len(),
            y.len()
        )));
    }
    if x.is_empty() {
        return Err(Error::Config("svm training set is empty".into()));
    }
    let dim = x[0].len();
    if dim == 0 || x.iter().any(|row| row.len() != dim) {
        return Err(Error::Dimension(
            "svm rows must share one positive dimension".into(),
        ));
    }
    if x.iter().any(|row| row.iter().any(|v| !v.is_finite())) {
        return Err(Error::Config("svm rows must be finite".into()));
    }
    if !c.is_finite() || c < 0.0 {
        return Err(Error::Config(format!("C must be finite and >= 0, got {c}")));
    }
    if class_pair.0 >= class_pair.1 {
        return Err(Error::Config(format!(
            "class pair ({}, {}) must be ordered",
            class_pair.0, class_pair.1
        )));
    }
    if y.iter().all(|&p| p) || y.iter().all(|&p| !p) {
        return Err(Error::Config(
            "svm training needs both classes present".into(),
        ));
    }
    if epochs == 0 {
        return Err(Error::Config("epochs must be positive".into()));
    }

    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    if c > 0.0 {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = x.len() as f64;
        let lambda = 1.0 / (c * m);
        let radius_sq = c * m;
        let mut order: Vec<usize> = (0..x.len()).collect();
        let mut t = 0u64;
        for _ in 0..epochs {
            order.shuffle(&mut rng);
            for &idx in &order {
                t += 1;
                let eta = 1.0 / (lambda * t as f64);
                let sign = if y[idx] { 1.0 } else { -1.0 };
                let mut score = b;
                for (wk, v) in w.iter().zip(x[idx]) {
                    score += wk * *v as f64;
                }
                let shrink = 1.0 - eta * lambda;
                for wk in &mut w {
                    *wk *= shrink;
                }
                b *= shrink;
                if sign * score < 1.0 {
                    for (wk, v) in w.iter_mut().zip(x[idx]) {
                        *wk += eta * sign * *v as f64;
                    }
                    b += eta * sign;
                }
                let norm_sq = b * b + w.iter().map(|v| v * v).sum::<f64>();
                if norm_sq > radius_sq {
                    let scale = (radius_sq / norm_sq).sqrt();
                    for wk in &mut w {
                        *wk *= scale;
                    }
                    b *= scale;
                }
            }
        }
    }

    if w.iter().any(|v| !v.is_finite()) || !b.is_finite() {
        return Err(Error::Internal(
            "svm training produced non-finite weights".into(),
        ));
    }
    Ok(LinearSvmPair {
        weights: w.into_iter().map(|v| v as f32).collect(),
        bias: b as f32,
        class_pair,
        c,
    })
}

/// One-vs-one ensemble over classes `0..num_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmEnsemble {
    pairs: Vec<LinearSvmPair>,
    num_classes: usize,
    dim: usize,
}

impl SvmEnsemble {
    /// Assembles an ensemble, checking it holds exactly one pair per
    /// unordered class pair, in lexicographic order, with equal dimensions.
    pub fn from_pairs(pairs: Vec<LinearSvmPair>, num_classes: usize) -> Result<SvmEnsemble> {
        if num_classes < 2 {
            return Err(Error::Config(format!(
                "ensemble needs at least 2 classes, got {num_classes}"
            )));
        }
        let expected: Vec<(usize, usize)> = (0..num_classes)
            .flat_map(|i| ((i + 1)..num_classes).map(move |j| (i, j)))
            .collect();
        let got: Vec<(usize, usize)> = pairs.iter().map(|p| p.class_pair).collect();
        if got != expected {
            return Err(Error::Config(format!(
                "ensemble pairs {got:?} do not cover the {} class pairs in order",
                expected.len()
            )));
        }
        let dim = pairs[0].weights.len();
        if pairs.iter().any(|p| p.weights.len() != dim) {
            return Err(Error::Dimension(
                "ensemble pairs must share one dimension".into(),
            ));
        }
        Ok(SvmEnsemble {
            pairs,
            num_classes,
            dim,
        })
    }

    pub fn pairs(&self) -> &[LinearSvmPair] {
        &self.pairs
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Embedding dimension every query must match.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes the ensemble as a `VOXSVM01` container.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let header = SvmHeader {
            dim: self.dim,
            num_classes: self.num_classes,
            pairs: self
                .pairs
                .iter()
                .map(|p| PairMeta {
                    class_a: p.class_pair.0,
                    class_b: p.class_pair.1,
                    c: p.c,
                })
                .collect(),
        };
        let header_json = serde_json::to_vec(&header)
            .map_err(|e| Error::Internal(format!("svm header encode failed: {e}")))?;
        let blobs: Vec<Vec<f32>> = self
            .pairs
            .iter()
            .map(|p| {
                let mut blob = p.weights.clone();
                blob.push(p.bias);
                blob
            })
            .collect();
        let blob_refs: Vec<&[f32]> = blobs.iter().map(|b| b.as_slice()).collect();
        write_container(path.as_ref(), SVM_MAGIC, &header_json, &blob_refs)
    }

    /// Loads a `VOXSVM01` container, validating header and blob length.
    pub fn load(path: impl AsRef<Path>) -> Result<SvmEnsemble> {
        let path = path.as_ref();
        let (header_bytes, blob) = read_container(path, SVM_MAGIC)?;
        let header: SvmHeader = serde_json::from_slice(&header_bytes)
            .map_err(|e| Error::Format(format!("{}: bad svm header: {e}", path.display())))?;
        let per_pair = header.dim + 1;
        let expected_bytes = header.pairs.len() * per_pair * 4;
        if blob.len() != expected_bytes {
            return Err(Error::Format(format!(
                "{}: blob is {} bytes, expected {expected_bytes}",
                path.display(),
                blob.len()
            )));
        }
        let mut pairs = Vec::with_capacity(header.pairs.len());
        for (k, meta) in header.pairs.iter().enumerate() {
            let mut values = decode_f32_blob(&blob, k * per_pair * 4, per_pair)?;
            let bias = values.pop().expect("per_pair is at least 1");
            pairs.push(LinearSvmPair {
                weights: values,
                bias,
                class_pair: (meta.class_a, meta.class_b),
                c: meta.c,
            });
        }
        SvmEnsemble::from_pairs(pairs, header.num_classes)
    }
}

#[derive(Serialize, Deserialize)]
struct SvmHeader {
    dim: usize,
    num_classes: usize,
    pairs: Vec<PairMeta>,
}

#[derive(Serialize, Deserialize)]
struct PairMeta {
    class_a: usize,
    class_b: usize,
    c: f64,
}

/// Trains one pair per unordered class pair on a labeled embedding set.
///
/// Labels must cover `0..K` with no gaps and every class needs at least one
/// row; each pair trains only on its two classes' rows, in parallel, with a
/// per-pair seed derived from `seed`.
pub fn train_ensemble(
    set: &EmbeddingSet,
    c: f64,
    epochs: usize,
    seed: u64,
) -> Result<SvmEnsemble> {
    let labels = set
        .labels()
        .ok_or_else(|| Error::Config("embedding set has no labels".into()))?;
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    if num_classes < 2 {
        return Err(Error::Config(format!(
            "ensemble needs at least 2 classes, got {num_classes}"
        )));
    }
    let mut counts = vec![0usize; num_classes];
    for &l in labels {
        counts[l] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Config(format!(
            "class {missing} has no rows; labels must cover 0..{num_classes}"
        )));
    }

    let index: Vec<(usize, usize)> = (0..num_classes)
        .flat_map(|i| ((i + 1)..num_classes).map(move |j| (i, j)))
        .collect();
    let pairs: Result<Vec<LinearSvmPair>> = index
        .par_iter()
        .map(|&(i, j)| {
            let mut x = Vec::new();
            let mut y = Vec::new();
            for (row, &label) in labels.iter().enumerate() {
                if label == i || label == j {
                    x.push(set.vector(row));
                    y.push(label == i);
                }
            }
            let pair_seed =
                seed.wrapping_add(((i * num_classes + j) as u64).wrapping_mul(0x9E3779B97F4A7C15));
            train_svm_pair(&x, &y, c, epochs, pair_seed, (i, j))
        })
        .collect();
    SvmEnsemble::from_pairs(pairs?, num_classes)
}

/// Majority vote across all pairs: returns the winning class and one vote
/// count per class; vote ties go to the lowest class id.
pub fn identify(ensemble: &SvmEnsemble, embedding: &[f32]) -> Result<(usize, Vec<usize>)> {
    if embedding.len() != ensemble.dim {
        return Err(Error::Dimension(format!(
            "query dim {} vs ensemble dim {}",
            embedding.len(),
            ensemble.dim
        )));
    }
    let mut votes = vec![0usize; ensemble.num_classes];
    for pair in &ensemble.pairs {
        votes[pair.decide(embedding)?] += 1;
    }
    let mut winner = 0;
    for (class, &v) in votes.iter().enumerate() {
        if v > votes[winner] {
            winner = class;
        }
    }
    Ok((winner, votes))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::embedding::set_for_tests;

    fn rows(points: &[Vec<f32>]) -> Vec<&[f32]> {
        points.iter().map(|p| p.as_slice()).collect()
    }

    /// Exhaustive separating-line check in 2-D: some pair-difference or
    /// mean-difference direction must order the classes with a gap.
    fn separable_by_some_line(points: &[Vec<f32>], labels: &[bool]) -> bool {
        let mut candidates: Vec<[f64; 2]> = Vec::new();
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                candidates.push([
                    (points[i][0] - points[j][0]) as f64,
                    (points[i][1] - points[j][1]) as f64,
                ]);
            }
        }
        candidates.iter().any(|n| {
            let project = |p: &Vec<f32>| n[0] * p[0] as f64 + n[1] * p[1] as f64;
            let pos: Vec<f64> = points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l)
                .map(|(p, _)| project(p))
                .collect();
            let neg: Vec<f64> = points
                .iter()
                .zip(labels)
                .filter(|(_, &l)| !l)
                .map(|(p, _)| project(p))
                .collect();
            let pos_min = pos.iter().cloned().fold(f64::INFINITY, f64::min);
            let neg_max = neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let pos_max = pos.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let neg_min = neg.iter().cloned().fold(f64::INFINITY, f64::min);
            pos_min > neg_max || neg_min > pos_max
        })
    }

    #[test]
    fn two_points_on_a_line_classify_and_flip_at_zero() {
        let points = vec![vec![1.0f32], vec![-1.0f32]];
        let pair = train_svm_pair(&rows(&points), &[true, false], 1.0, 60, 42, (0, 1)).unwrap();
        assert_eq!(pair.decide(&[1.0]).unwrap(), 0);
        assert_eq!(pair.decide(&[-1.0]).unwrap(), 1);
        let flip = -pair.bias as f64 / pair.weights[0] as f64;
        assert!(flip.abs() <= 0.1, "sign flip at {flip}, expected near 0");
    }

    #[test]
    fn separable_clusters_reach_full_training_accuracy() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for k in 0..40 {
            let positive = k % 2 == 0;
            let (cx, cy) = if positive { (2.0, 0.5) } else { (-1.5, -1.0) };
            points.push(vec![
                cx + rng.gen_range(-0.5..0.5),
                cy + rng.gen_range(-0.5..0.5),
            ]);
            labels.push(positive);
        }
        assert!(separable_by_some_line(&points, &labels));

        let pair = train_svm_pair(&rows(&points), &labels, 1.0, 80, 42, (0, 1)).unwrap();
        for (p, &positive) in points.iter().zip(&labels) {
            let expected = if positive { 0 } else { 1 };
            assert_eq!(pair.decide(p).unwrap(), expected);
        }
        assert!(pair.objective(&rows(&points), &labels).unwrap().is_finite());
    }

    #[test]
    fn c_zero_leaves_weights_at_zero() {
        let points = vec![vec![1.0f32, 0.0], vec![-1.0, 0.5]];
        let pair = train_svm_pair(&rows(&points), &[true, false], 0.0, 50, 42, (0, 1)).unwrap();
        assert!(pair.weights.iter().all(|&w| w == 0.0));
        assert_eq!(pair.bias, 0.0);
    }

    #[test]
    fn degenerate_training_inputs_are_rejected() {
        let points = vec![vec![1.0f32], vec![2.0f32]];
        assert!(matches!(
            train_svm_pair(&rows(&points), &[true, true], 1.0, 10, 42, (0, 1)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_svm_pair(&rows(&points), &[true], 1.0, 10, 42, (0, 1)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            train_svm_pair(&rows(&points), &[true, false], -1.0, 10, 42, (0, 1)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            train_svm_pair(&rows(&points), &[true, false], 1.0, 10, 42, (1, 1)),
            Err(Error::Config(_))
        ));
    }

    /// Labeled clusters at distinct coordinate axes, `per` rows each.
    fn clustered_set(num_classes: usize, per: usize, seed: u64) -> EmbeddingSet {
        let dim = num_classes.max(3) + 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        let mut labels = Vec::new();
        for class in 0..num_classes {
            for _ in 0..per {
                let mut v = vec![0.0f32; dim];
                for (axis, value) in v.iter_mut().enumerate() {
                    *value = if axis == class { 3.0 } else { 0.0 } + rng.gen_range(-0.3..0.3);
                }
                vectors.push(v);
                labels.push(class);
            }
        }
        let mut set = set_for_tests(&vectors);
        set.set_labels(Some(labels)).unwrap();
        set
    }

    #[test]
    fn ensemble_has_one_pair_per_class_pair() {
        let two = train_ensemble(&clustered_set(2, 3, 1), 1.0, 30, 42).unwrap();
        assert_eq!(two.pairs().len(), 1);
        let four = train_ensemble(&clustered_set(4, 3, 2), 1.0, 30, 42).unwrap();
        assert_eq!(four.pairs().len(), 6);
        assert_eq!(four.num_classes(), 4);
    }

    #[test]
    fn votes_always_sum_to_pair_count() {
        let ensemble = train_ensemble(&clustered_set(4, 4, 3), 1.0, 30, 42).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let query: Vec<f32> = (0..ensemble.dim()).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (winner, votes) = identify(&ensemble, &query).unwrap();
            assert_eq!(votes.iter().sum::<usize>(), 6);
            assert!(winner < 4);
            assert_eq!(votes[winner], *votes.iter().max().unwrap());
        }
    }

    #[test]
    fn held_out_points_identify_their_cluster() {
        let train = clustered_set(3, 12, 4);
        let held_out = clustered_set(3, 6, 17);
        let ensemble = train_ensemble(&train, 1.0, 50, 42).unwrap();
        let mut correct = 0;
        for row in 0..held_out.len() {
            let (winner, _) = identify(&ensemble, held_out.vector(row)).unwrap();
            if winner == held_out.labels().unwrap()[row] {
                correct += 1;
            }
        }
        let accuracy = correct as f64 / held_out.len() as f64;
        assert!(accuracy >= 0.9, "held-out accuracy {accuracy}");
    }

    #[test]
    fn vote_cycle_breaks_to_the_lowest_class() {
        let pair = |w: f32, ij: (usize, usize)| LinearSvmPair {
            weights: vec![w],
            bias: 0.0,
            class_pair: ij,
            c: 1.0,
        };
        // At x = 1: (0,1) votes 0, (0,2) votes 2, (1,2) votes 1.
        let ensemble = SvmEnsemble::from_pairs(
            vec![pair(1.0, (0, 1)), pair(-1.0, (0, 2)), pair(1.0, (1, 2))],
            3,
        )
        .unwrap();
        let (winner, votes) = identify(&ensemble, &[1.0]).unwrap();
        assert_eq!(votes, vec![1, 1, 1]);
        assert_eq!(winner, 0);
    }

    #[test]
    fn mismatched_queries_and_label_gaps_are_rejected() {
        let ensemble = train_ensemble(&clustered_set(2, 3, 5), 1.0, 20, 42).unwrap();
        assert!(matches!(
            identify(&ensemble, &[0.0]),
            Err(Error::Dimension(_))
        ));

        let mut gappy = clustered_set(2, 3, 6);
        gappy.set_labels(Some(vec![0, 0, 0, 2, 2, 2])).unwrap();
        assert!(matches!(
            train_ensemble(&gappy, 1.0, 20, 42),
            Err(Error::Config(_))
        ));

        let unlabeled = set_for_tests(&[vec![0.0f32; 3], vec![1.0f32; 3]]);
        assert!(matches!(
            train_ensemble(&unlabeled, 1.0, 20, 42),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn ensemble_round_trips_through_voxsvm01() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("speakers.voxsvm");
        let ensemble = train_ensemble(&clustered_set(3, 4, 7), 1.0, 30, 42).unwrap();
        ensemble.save(&path).unwrap();
        let back = SvmEnsemble::load(&path).unwrap();
        assert_eq!(ensemble, back);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes[..8].copy_from_slice(b"VOXCNN01");
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(SvmEnsemble::load(&path), Err(Error::Format(_))));

        let original = {
            bytes[..8].copy_from_slice(b"VOXSVM01");
            bytes
        };
        std::fs::write(&path, &original[..original.len() - 4]).unwrap();
        assert!(matches!(SvmEnsemble::load(&path), Err(Error::Format(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn separable_sets_train_to_full_accuracy(
            seed in 0u64..1000,
            n in 4usize..20,
            dim in 2usize..4,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let normal: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0f64)).collect();
            let scale = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(scale > 0.1);
            let normal: Vec<f64> = normal.iter().map(|v| v / scale).collect();

            let mut points = Vec::new();
            let mut labels = Vec::new();
            for _ in 0..n {
                let positive = rng.gen_bool(0.5);
                let offset = rng.gen_range(1.0..2.5) * if positive { 1.0 } else { -1.0 };
                let free: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let along = free.iter().zip(&normal).map(|(f, n)| f * n).sum::<f64>();
                let point: Vec<f32> = (0..dim)
                    .map(|a| (free[a] - along * normal[a] + offset * normal[a]) as f32)
                    .collect();
                points.push(point);
                labels.push(positive);
            }
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));

            let pair = train_svm_pair(&rows(&points), &labels, 10.0, 200, seed, (0, 1)).unwrap();
            for (p, &positive) in points.iter().zip(&labels) {
                let expected = if positive { 0 } else { 1 };
                prop_assert_eq!(pair.decide(p).unwrap(), expected);
            }
        }
    }
}
