//! Agglomerative clustering of embeddings under the cosine metric.
//!
//! Average-linkage merges build a [`Dendrogram`]; the speaker count is read
//! off the dendrogram as the largest jump between consecutive merge
//! distances, and cutting at that jump yields per-window cluster labels.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::nn::Real;

/// Cap on the estimated speaker count: the gap search inspects only the last
/// `min(N−1, MAX_ESTIMATED_SPEAKERS)` merges, shielding the statistic from
/// leaf-level noise.
pub const MAX_ESTIMATED_SPEAKERS: usize = 20;

static ZERO_VECTOR_WARNINGS: AtomicU64 = AtomicU64::new(0);

/// Process-wide count of [`cosine_distance`] calls that hit a zero vector
/// and fell back to the neutral distance.
pub fn zero_vector_warnings() -> u64 {
    ZERO_VECTOR_WARNINGS.load(Ordering::Relaxed)
}

/// Cosine distance `1 − u·v/(‖u‖‖v‖)`, accumulated at f64 and clamped to
/// [0, 2]. A zero vector has no direction; its distance to anything is
/// defined as the neutral 1 and counted in [`zero_vector_warnings`].
pub fn cosine_distance<T: Real>(u: &[T], v: &[T]) -> f64 {
    debug_assert_eq!(u.len(), v.len(), "cosine distance needs equal lengths");
    let mut dot = 0.0;
    let mut norm_u = 0.0;
    let mut norm_v = 0.0;
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a.as_f64(), b.as_f64());
        dot += a * b;
        norm_u += a * a;
        norm_v += b * b;
    }
    if norm_u == 0.0 || norm_v == 0.0 {
        ZERO_VECTOR_WARNINGS.fetch_add(1, Ordering::Relaxed);
        return 1.0;
    }
    (1.0 - dot / (norm_u.sqrt() * norm_v.sqrt())).clamp(0.0, 2.0)
}

/// Full N×N cosine-distance matrix, row-major: zero diagonal, symmetric,
/// entries in [0, 2]. Pairs are computed in parallel.
pub fn pairwise_cosine(set: &EmbeddingSet) -> Vec<f64> {
    let n = set.len();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| cosine_distance(set.vector(i), set.vector(j)))
                .collect()
        })
        .collect();
    let mut dist = vec![0.0; n * n];
    for (i, row) in upper.into_iter().enumerate() {
        for (offset, d) in row.into_iter().enumerate() {
            let j = i + 1 + offset;
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    dist
}

/// One agglomerative merge. Cluster ids follow the usual linkage
/// convention: leaves are `0..N`, and the i-th merge creates cluster `N+i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Merge {
    /// Smaller of the two merged cluster ids.
    pub cluster_a: usize,
    /// Larger of the two merged cluster ids.
    pub cluster_b: usize,
    /// Average-linkage cosine distance at which the merge happened.
    pub distance: f64,
    /// Leaf count of the merged cluster.
    pub size: usize,
}

/// Ordered merge history of an agglomerative clustering run: N−1 merges over
/// N leaves, with non-decreasing distances.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dendrogram {
    num_leaves: usize,
    merges: Vec<Merge>,
}

impl Dendrogram {
    pub fn num_leaves(&self) -> usize {
        self.num_leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("dendrogram encoding failed: {e}")))
    }
}

/// Flat clustering produced by cutting a dendrogram. Labels are `0..K` and
/// numbered by each cluster's smallest leaf index.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// One label per leaf.
    pub labels: Vec<usize>,
    pub num_clusters: usize,
    /// Distance the cut corresponds to: the requested threshold, or for a
    /// count cut the distance of the last merge kept (0 when none).
    pub cut_distance: f64,
}

/// Average-linkage agglomerative clustering of the embedding rows under the
/// cosine metric. Ties pick the pair with the smallest ids.
pub fn agglomerate(set: &EmbeddingSet) -> Result<Dendrogram> {
    let n = set.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "clustering needs at least 2 embeddings, got {n}"
        )));
    }
    for row in 0..n {
        if set.vector(row).iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!(
                "embedding row {row} contains non-finite values"
            )));
        }
    }
    let dist = pairwise_cosine(set);
    Ok(agglomerate_from_matrix(n, &dist))
}

/// Merge loop over a precomputed symmetric distance matrix, using the
/// Lance–Williams average-linkage update
/// `d(a∪b, k) = (|a|·d(a,k) + |b|·d(b,k)) / (|a|+|b|)`.
pub(crate) fn agglomerate_from_matrix(n: usize, dist: &[f64]) -> Dendrogram {
    assert_eq!(dist.len(), n * n, "distance matrix must be n×n");
    let mut d = dist.to_vec();
    let mut ids: Vec<usize> = (0..n).collect();
    let mut sizes = vec![1usize; n];
    let mut alive = vec![true; n];
    let mut merges = Vec::with_capacity(n - 1);

    for step in 0..n - 1 {
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..n {
            if !alive[i] {
                continue;
            }
            for j in (i + 1)..n {
                if !alive[j] {
                    continue;
                }
                let dij = d[i * n + j];
                let (lo, hi) = if ids[i] < ids[j] {
                    (ids[i], ids[j])
                } else {
                    (ids[j], ids[i])
                };
                let closer = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => {
                        dij < bd || (dij == bd && (lo, hi) < (blo, bhi))
                    }
                };
                if closer {
                    best = Some((dij, lo, hi, i, j));
                }
            }
        }
        let (distance, lo, hi, si, sj) = best.expect("two clusters always remain");

        let merged_size = sizes[si] + sizes[sj];
        for k in 0..n {
            if !alive[k] || k == si || k == sj {
                continue;
            }
            let dk = (sizes[si] as f64 * d[si * n + k] + sizes[sj] as f64 * d[sj * n + k])
                / merged_size as f64;
            d[si * n + k] = dk;
            d[k * n + si] = dk;
        }
        alive[sj] = false;
        ids[si] = n + step;
        sizes[si] = merged_size;
        merges.push(Merge {
            cluster_a: lo,
            cluster_b: hi,
            distance,
            size: merged_size,
        });
    }
    Dendrogram { num_leaves: n, merges }
}

/// Merge distances below this floor read as within-speaker noise during gap
/// inspection; flooring also keeps ratios finite when merges start at zero.
pub const GAP_DISTANCE_FLOOR: f64 = 1e-3;

/// A gap counts as a cluster boundary only when the floored merge distance
/// at least triples across it.
pub const MIN_GAP_RATIO: f64 = 3.0;

/// Speaker count read off a dendrogram's merge-distance gaps.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerCountEstimate {
    pub count: usize,
    /// Midpoint of the gap the estimate splits at; cutting here reproduces
    /// `count` clusters.
    pub cut_distance: f64,
    /// True when no inspected gap reached [`MIN_GAP_RATIO`], so the estimate
    /// degenerated to a single cluster.
    pub degenerate: bool,
}

/// Estimates how many speakers the leaves cover.
///
/// Same-speaker windows embed orders of magnitude closer together than
/// cross-speaker windows, so the boundary between within-speaker and
/// between-speaker merges appears as the largest relative jump in the merge
/// distances `d_1 ≤ … ≤ d_{N−1}`. With distances floored at
/// [`GAP_DISTANCE_FLOOR`], the estimate picks the largest ratio
/// `d_{i+1} / d_i` among the last `min(N−1, MAX_ESTIMATED_SPEAKERS)` merges
/// (ties keep the earliest gap) and reports the cluster count just before
/// merge `i+1`. When the window covers the whole sequence, the first merge's
/// ratio is taken against the floor itself, so leaves that never merge
/// tightly can estimate up to N speakers. If no ratio reaches
/// [`MIN_GAP_RATIO`], every inspected merge reads as within-speaker noise
/// and the estimate degenerates to one cluster.
pub fn estimate_speaker_count(dendro: &Dendrogram) -> SpeakerCountEstimate {
    let n = dendro.num_leaves;
    let merges = dendro.merges();
    let m = merges.len();
    if m == 0 {
        return SpeakerCountEstimate {
            count: 1,
            cut_distance: 0.0,
            degenerate: true,
        };
    }
    let window = m.min(MAX_ESTIMATED_SPEAKERS);
    let floored = |i: usize| merges[i].distance.max(GAP_DISTANCE_FLOOR);
    let first = m - window;
    let mut best: Option<(f64, usize)> = None;
    if window == m {
        best = Some((floored(0) / GAP_DISTANCE_FLOOR, first));
    }
    for i in first..(m - 1) {
        let ratio = floored(i + 1) / floored(i);
        if best.map_or(true, |(br, _)| ratio > br) {
            best = Some((ratio, i + 1));
        }
    }
    match best {
        // `boundary` is the first merge past the gap; undoing it and
        // everything after leaves n - boundary clusters.
        Some((ratio, boundary)) if ratio > MIN_GAP_RATIO => SpeakerCountEstimate {
            count: n - boundary,
            cut_distance: if boundary == 0 {
                merges[0].distance / 2.0
            } else {
                (merges[boundary - 1].distance + merges[boundary].distance) / 2.0
            },
            degenerate: false,
        },
        _ => SpeakerCountEstimate {
            count: 1,
            cut_distance: merges[m - 1].distance,
            degenerate: true,
        },
    }
}

/// How to cut a dendrogram into a flat clustering.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CutTarget {
    /// Keep exactly this many clusters (undo the last K−1 merges).
    Count(usize),
    /// Keep every merge at or below this distance.
    Distance(f64),
}

/// Cuts the dendrogram, labeling clusters by ascending smallest leaf index.
pub fn cut(dendro: &Dendrogram, target: CutTarget) -> Result<ClusterAssignment> {
    let n = dendro.num_leaves;
    let (applied, cut_distance) = match target {
        CutTarget::Count(k) => {
            if k < 1 || k > n {
                return Err(Error::Config(format!(
                    "cannot cut {n} leaves into {k} clusters"
                )));
            }
            let applied = n - k;
            let last = if applied == 0 {
                0.0
            } else {
                dendro.merges[applied - 1].distance
            };
            (applied, last)
        }
        CutTarget::Distance(t) => {
            if !t.is_finite() {
                return Err(Error::Config(format!("cut distance {t} must be finite")));
            }
            let applied = dendro
                .merges
                .iter()
                .take_while(|m| m.distance <= t)
                .count();
            (applied, t)
        }
    };

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut merge_leaf = Vec::with_capacity(applied);
    for merge in &dendro.merges[..applied] {
        let leaf_of = |id: usize, merge_leaf: &[usize]| {
            if id < n {
                id
            } else {
                merge_leaf[id - n]
            }
        };
        let la = leaf_of(merge.cluster_a, &merge_leaf);
        let lb = leaf_of(merge.cluster_b, &merge_leaf);
        let ra = find(&mut parent, la);
        let rb = find(&mut parent, lb);
        debug_assert_ne!(ra, rb, "merge joins two disjoint clusters");
        parent[rb] = ra;
        merge_leaf.push(ra);
    }

    let mut label_of_root = vec![usize::MAX; n];
    let mut labels = vec![0usize; n];
    let mut num_clusters = 0;
    for leaf in 0..n {
        let root = find(&mut parent, leaf);
        if label_of_root[root] == usize::MAX {
            label_of_root[root] = num_clusters;
            num_clusters += 1;
        }
        labels[leaf] = label_of_root[root];
    }

    Ok(ClusterAssignment {
        labels,
        num_clusters,
        cut_distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeSet;

    fn set_from(vectors: &[Vec<f32>]) -> EmbeddingSet {
        let dim = vectors[0].len();
        let flat: Vec<f32> = vectors.iter().flatten().copied().collect();
        let n = vectors.len();
        EmbeddingSet::new(
            dim,
            flat,
            (0..n).map(|i| i as f64).collect(),
            vec!["test".to_string(); n],
            None,
        )
        .unwrap()
    }

    fn random_vectors(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
        (0..n)
            .map(|_| loop {
                let v: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                if v.iter().map(|x| x * x).sum::<f32>().sqrt() > 0.1 {
                    return v;
                }
            })
            .collect()
    }

    /// Average linkage recomputed from scratch each step: the distance
    /// between two clusters is the mean leaf-pair distance.
    fn brute_force_linkage(n: usize, d0: &[f64]) -> Vec<Merge> {
        let mut clusters: Vec<(usize, Vec<usize>)> = (0..n).map(|i| (i, vec![i])).collect();
        let mut merges = Vec::new();
        for step in 0..n - 1 {
            let mut best: Option<(f64, usize, usize, usize, usize)> = None;
            for i in 0..clusters.len() {
                for j in (i + 1)..clusters.len() {
                    let mut sum = 0.0;
                    for &a in &clusters[i].1 {
                        for &b in &clusters[j].1 {
                            sum += d0[a * n + b];
                        }
                    }
                    let dij = sum / (clusters[i].1.len() * clusters[j].1.len()) as f64;
                    let (lo, hi) = if clusters[i].0 < clusters[j].0 {
                        (clusters[i].0, clusters[j].0)
                    } else {
                        (clusters[j].0, clusters[i].0)
                    };
                    let closer = match best {
                        None => true,
                        Some((bd, blo, bhi, _, _)) => {
                            dij < bd || (dij == bd && (lo, hi) < (blo, bhi))
                        }
                    };
                    if closer {
                        best = Some((dij, lo, hi, i, j));
                    }
                }
            }
            let (distance, lo, hi, pi, pj) = best.unwrap();
            let mut leaves = clusters[pi].1.clone();
            leaves.extend_from_slice(&clusters[pj].1);
            let size = leaves.len();
            clusters.remove(pj);
            clusters.remove(pi);
            clusters.push((n + step, leaves));
            merges.push(Merge {
                cluster_a: lo,
                cluster_b: hi,
                distance,
                size,
            });
        }
        merges
    }

    /// Connected components of the leaves after the first `applied` merges,
    /// found by BFS over the explicit merge forest.
    fn forest_components(n: usize, merges: &[Merge], applied: usize) -> Vec<usize> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n + applied];
        for (i, m) in merges[..applied].iter().enumerate() {
            let node = n + i;
            adjacency[m.cluster_a].push(node);
            adjacency[node].push(m.cluster_a);
            adjacency[m.cluster_b].push(node);
            adjacency[node].push(m.cluster_b);
        }
        let mut component = vec![usize::MAX; n + applied];
        let mut count = 0;
        for leaf in 0..n {
            if component[leaf] != usize::MAX {
                continue;
            }
            let mut queue = vec![leaf];
            component[leaf] = count;
            while let Some(node) = queue.pop() {
                for &next in &adjacency[node] {
                    if component[next] == usize::MAX {
                        component[next] = count;
                        queue.push(next);
                    }
                }
            }
            count += 1;
        }
        component.truncate(n);
        component
    }

    fn as_partition(labels: &[usize]) -> BTreeSet<BTreeSet<usize>> {
        let k = labels.iter().max().unwrap() + 1;
        let mut sets = vec![BTreeSet::new(); k];
        for (i, &l) in labels.iter().enumerate() {
            sets[l].insert(i);
        }
        sets.into_iter().collect()
    }

    #[test]
    fn cosine_distance_closed_forms() {
        let u = [0.3f32, -0.7, 2.0];
        assert!(cosine_distance(&u, &u) < 1e-12);
        assert!((cosine_distance(&[1.0f32, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-12);
        let expected = 1.0 - 1.0 / 2f64.sqrt();
        assert!((cosine_distance(&[1.0f32, 0.0], &[1.0, 1.0]) - expected).abs() < 1e-9);
        assert!((cosine_distance(&[1.0f32, 0.0], &[-1.0, 0.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_gets_neutral_distance_and_a_warning() {
        let before = zero_vector_warnings();
        assert_eq!(cosine_distance(&[0.0f32, 0.0], &[1.0, 2.0]), 1.0);
        assert_eq!(cosine_distance(&[1.0f32, 2.0], &[0.0, 0.0]), 1.0);
        assert!(zero_vector_warnings() >= before + 2);
    }

    #[test]
    fn nearest_pair_merges_first() {
        let deg = |a: f64| vec![a.to_radians().cos() as f32, a.to_radians().sin() as f32];
        let set = set_from(&[deg(0.0), deg(60.0), deg(90.0)]);
        let dendro = agglomerate(&set).unwrap();
        let merges = dendro.merges();
        assert_eq!((merges[0].cluster_a, merges[0].cluster_b), (1, 2));
        assert!((merges[0].distance - (1.0 - 30f64.to_radians().cos())).abs() < 1e-6);
        assert_eq!((merges[1].cluster_a, merges[1].cluster_b), (0, 3));
        assert!((merges[1].distance - 0.75).abs() < 1e-6);
    }

    #[test]
    fn identical_points_merge_at_zero_with_id_tiebreak() {
        let set = set_from(&vec![vec![0.3, 0.4, 0.5]; 5]);
        let dendro = agglomerate(&set).unwrap();
        for merge in dendro.merges() {
            assert!(merge.distance <= 1e-12);
        }
        let pairs: Vec<(usize, usize)> = dendro
            .merges()
            .iter()
            .map(|m| (m.cluster_a, m.cluster_b))
            .collect();
        assert_eq!(pairs, vec![(0, 1), (2, 3), (4, 5), (6, 7)]);

        let estimate = estimate_speaker_count(&dendro);
        assert!(estimate.degenerate);
        assert_eq!(estimate.count, 1);
    }

    #[test]
    fn fewer_than_two_embeddings_is_a_config_error() {
        let set = set_from(&[vec![1.0, 0.0]]);
        assert!(matches!(agglomerate(&set), Err(Error::Config(_))));
    }

    #[test]
    fn matches_brute_force_oracle_on_small_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x11ce);
        for trial in 0..150 {
            let n = rng.gen_range(2..=8);
            let dim = rng.gen_range(2..=5);
            let set = set_from(&random_vectors(&mut rng, n, dim));
            let dist = pairwise_cosine(&set);
            let got = agglomerate(&set).unwrap();
            let want = brute_force_linkage(n, &dist);

            assert_eq!(got.merges().len(), want.len());
            let mut previous = 0.0;
            for (g, w) in got.merges().iter().zip(&want) {
                assert_eq!(
                    (g.cluster_a, g.cluster_b, g.size),
                    (w.cluster_a, w.cluster_b, w.size),
                    "trial {trial} diverged from the oracle"
                );
                assert!((g.distance - w.distance).abs() < 1e-9);
                assert!(g.distance >= previous - 1e-9, "distances must not decrease");
                previous = g.distance;
            }
        }
    }

    #[test]
    fn cut_matches_forest_component_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xc0de);
        for _ in 0..80 {
            let n = rng.gen_range(2..=8);
            let set = set_from(&random_vectors(&mut rng, n, 3));
            let dendro = agglomerate(&set).unwrap();
            for k in 1..=n {
                let assignment = cut(&dendro, CutTarget::Count(k)).unwrap();
                assert_eq!(assignment.num_clusters, k);
                let mut seen = vec![0usize; k];
                for &l in &assignment.labels {
                    seen[l] += 1;
                }
                assert!(seen.iter().all(|&c| c > 0), "every cluster is non-empty");

                let oracle = forest_components(n, dendro.merges(), n - k);
                assert_eq!(as_partition(&assignment.labels), as_partition(&oracle));
            }
        }
    }

    #[test]
    fn cut_by_distance_thresholds_the_merge_list() {
        let set = set_from(&[
            vec![1.0, 0.0],
            vec![0.99, 0.14],
            vec![0.0, 1.0],
            vec![0.14, 0.99],
        ]);
        let dendro = agglomerate(&set).unwrap();
        let all = cut(&dendro, CutTarget::Distance(2.0)).unwrap();
        assert_eq!(all.num_clusters, 1);
        let none = cut(&dendro, CutTarget::Distance(-0.1)).unwrap();
        assert_eq!(none.num_clusters, 4);
        assert_eq!(none.labels, vec![0, 1, 2, 3]);

        let mid = (dendro.merges()[1].distance + dendro.merges()[2].distance) / 2.0;
        let two = cut(&dendro, CutTarget::Distance(mid)).unwrap();
        assert_eq!(two.num_clusters, 2);
        assert_eq!(two.labels, vec![0, 0, 1, 1]);
    }

    #[test]
    fn cut_extremes_and_bad_requests() {
        let set = set_from(&random_vectors(&mut ChaCha8Rng::seed_from_u64(5), 6, 3));
        let dendro = agglomerate(&set).unwrap();
        assert_eq!(
            cut(&dendro, CutTarget::Count(6)).unwrap().labels,
            vec![0, 1, 2, 3, 4, 5]
        );
        assert_eq!(
            cut(&dendro, CutTarget::Count(1)).unwrap().labels,
            vec![0; 6]
        );
        assert!(matches!(
            cut(&dendro, CutTarget::Count(0)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            cut(&dendro, CutTarget::Count(7)),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            cut(&dendro, CutTarget::Distance(f64::NAN)),
            Err(Error::Config(_))
        ));
    }

    fn jittered_blobs(bases: &[Vec<f32>], per_blob: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vectors = Vec::new();
        for base in bases {
            for _ in 0..per_blob {
                vectors.push(
                    base.iter()
                        .map(|&x| x + rng.gen_range(-0.02..0.02))
                        .collect(),
                );
            }
        }
        vectors
    }

    #[test]
    fn two_far_blobs_estimate_two_speakers() {
        let bases = vec![vec![1.0, 0.1, 0.1, 0.1], vec![0.1, 1.0, 0.1, 0.1]];
        let vectors = jittered_blobs(&bases, 6, 7);
        let dendro = agglomerate(&set_from(&vectors)).unwrap();
        let estimate = estimate_speaker_count(&dendro);
        assert!(!estimate.degenerate);
        assert_eq!(estimate.count, 2);

        let assignment = cut(&dendro, CutTarget::Count(estimate.count)).unwrap();
        assert_eq!(assignment.labels, [vec![0; 6], vec![1; 6]].concat());

        let by_distance = cut(&dendro, CutTarget::Distance(estimate.cut_distance)).unwrap();
        assert_eq!(by_distance.labels, assignment.labels);
    }

    #[test]
    fn three_blobs_estimate_three_and_match_ground_truth() {
        let bases = vec![
            vec![1.0, 0.1, 0.1, 0.1, 0.1, 0.1],
            vec![0.1, 1.0, 0.1, 0.1, 0.1, 0.1],
            vec![0.1, 0.1, 1.0, 0.1, 0.1, 0.1],
        ];
        let vectors = jittered_blobs(&bases, 12, 21);
        let dendro = agglomerate(&set_from(&vectors)).unwrap();
        let estimate = estimate_speaker_count(&dendro);
        assert_eq!(estimate.count, 3);

        let labels = cut(&dendro, CutTarget::Count(3)).unwrap().labels;
        let truth: Vec<usize> = (0..36).map(|i| i / 12).collect();
        assert_eq!(labels, truth);
    }

    #[test]
    fn scaling_all_vectors_changes_nothing() {
        let bases = vec![vec![1.0, 0.1, 0.1, 0.1], vec![0.1, 1.0, 0.1, 0.1]];
        let vectors = jittered_blobs(&bases, 5, 31);
        let scaled: Vec<Vec<f32>> = vectors
            .iter()
            .map(|v| v.iter().map(|x| x * 3.7).collect())
            .collect();

        let a = agglomerate(&set_from(&vectors)).unwrap();
        let b = agglomerate(&set_from(&scaled)).unwrap();
        for (ma, mb) in a.merges().iter().zip(b.merges()) {
            assert_eq!((ma.cluster_a, ma.cluster_b), (mb.cluster_a, mb.cluster_b));
            assert!((ma.distance - mb.distance).abs() < 1e-6);
        }
        assert_eq!(
            estimate_speaker_count(&a).count,
            estimate_speaker_count(&b).count
        );
    }

    #[test]
    fn dendrogram_exports_json() {
        let set = set_from(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        let dendro = agglomerate(&set).unwrap();
        let json = dendro.to_json().unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(parsed["num_leaves"], 3);
        assert_eq!(parsed["merges"].as_array().unwrap().len(), 2);
    }

    proptest! {
        #[test]
        fn permuting_input_order_preserves_the_partition(seed in 0u64..500, n in 4usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let vectors = random_vectors(&mut rng, n, 3);
            let set = set_from(&vectors);

            let dist = pairwise_cosine(&set);
            let mut off_diag: Vec<f64> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .map(|(i, j)| dist[i * n + j])
                .collect();
            off_diag.sort_by(f64::total_cmp);
            prop_assume!(off_diag.windows(2).all(|w| w[0] != w[1]));

            let mut perm: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                perm.swap(i, rng.gen_range(0..=i));
            }
            let permuted: Vec<Vec<f32>> = perm.iter().map(|&p| vectors[p].clone()).collect();

            let k = 3.min(n);
            let labels_a = cut(&agglomerate(&set).unwrap(), CutTarget::Count(k)).unwrap().labels;
            let labels_b = cut(&agglomerate(&set_from(&permuted)).unwrap(), CutTarget::Count(k))
                .unwrap()
                .labels;

            let mut unpermuted = vec![0usize; n];
            for (pos, &orig) in perm.iter().enumerate() {
                unpermuted[orig] = labels_b[pos];
            }
            prop_assert_eq!(as_partition(&labels_a), as_partition(&unpermuted));
        }

        #[test]
        fn merge_distances_never_decrease(seed in 0u64..500, n in 2usize..12) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let set = set_from(&random_vectors(&mut rng, n, 4));
            let dendro = agglomerate(&set).unwrap();
            for pair in dendro.merges().windows(2) {
                prop_assert!(pair[1].distance >= pair[0].distance - 1e-9);
            }
        }
    }
}
