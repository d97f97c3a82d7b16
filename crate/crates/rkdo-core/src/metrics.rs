//! Embedding-quality evaluation: k-means clustering, the two clustering
//! agreement scores, neighborhood label purity, and a frozen-feature linear
//! probe.

use crate::embedding::EmbeddingTable;
use crate::error::{Error, Result};
use crate::rng::{substream, StreamPurpose};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Gradient-descent iterations for the linear probe.
pub const PROBE_ITERS: usize = 500;
/// Learning rate for the linear probe.
pub const PROBE_LR: f64 = 0.1;

/// All evaluation scores for one embedding table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub linear_accuracy: f64,
    pub nmi: f64,
    pub ari: f64,
    pub neighborhood_accuracy: f64,
    pub k_used: usize,
    pub seed: u64,
}

impl MetricsReport {
    fn validate(self) -> Result<Self> {
        let in_range = self.linear_accuracy.is_finite()
            && (0.0..=1.0).contains(&self.linear_accuracy)
            && (0.0..=1.0).contains(&self.nmi)
            && (-1.0..=1.0).contains(&self.ari)
            && (0.0..=1.0).contains(&self.neighborhood_accuracy);
        if in_range {
            Ok(self)
        } else {
            Err(Error::invalid(format!("metrics out of range: {self:?}")))
        }
    }
}

/// Runs the full suite: k-means labels (k = number of classes) scored by NMI
/// and ARI, neighborhood accuracy with `neighbors` neighbors, and the linear
/// probe with an 80/20 split.
pub fn evaluate_embeddings(
    embeddings: &EmbeddingTable,
    labels: &[usize],
    neighbors: usize,
    seed: u64,
) -> Result<MetricsReport> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let clusters = kmeans(embeddings, k, seed, 100)?;
    MetricsReport {
        linear_accuracy: linear_probe(embeddings, labels, seed, 0.8)?,
        nmi: nmi(&clusters, labels)?,
        ari: ari(&clusters, labels)?,
        neighborhood_accuracy: neighborhood_accuracy(embeddings, labels, neighbors)?,
        k_used: k,
        seed,
    }
    .validate()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

/// Lloyd's algorithm with k-means++ seeding. Deterministic per seed;
/// assignment ties break to the lowest cluster index, and a cluster that
/// empties is re-seeded from the point farthest from its assigned center.
pub fn kmeans(
    embeddings: &EmbeddingTable,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Vec<usize>> {
    let n = embeddings.len();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "kmeans needs 1 <= k <= n, got k={k}, n={n}"
        )));
    }
    let d = embeddings.dim();
    let mut rng = substream(seed, StreamPurpose::Metrics);

    // k-means++ seeding.
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(k);
    centers.push(embeddings.row(rng.random_range(0..n)).to_vec());
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(embeddings.row(i), &centers[0]))
        .collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        } else {
            // All remaining mass is on duplicate coordinates; take the first
            // point that is not already a center.
            (0..n)
                .find(|&i| centers.iter().all(|c| c.as_slice() != embeddings.row(i)))
                .unwrap_or(0)
        };
        centers.push(embeddings.row(next).to_vec());
        for (i, dist) in d2.iter_mut().enumerate() {
            *dist = dist.min(sq_dist(embeddings.row(i), centers.last().unwrap()));
        }
    }

    let mut assignment = vec![0usize; n];
    for _ in 0..max_iters.max(1) {
        // Assign: strict improvement keeps the lowest index on ties.
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let mut best = (f64::INFINITY, 0usize);
            for (c, center) in centers.iter().enumerate() {
                let dist = sq_dist(embeddings.row(i), center);
                if dist < best.0 {
                    best = (dist, c);
                }
            }
            if *slot != best.1 {
                *slot = best.1;
                changed = true;
            }
        }
        // Update.
        let mut sums = vec![vec![0.0; d]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assignment[i]] += 1;
            for (s, v) in sums[assignment[i]].iter_mut().zip(embeddings.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the point farthest from its current center.
                let far = (0..n)
                    .max_by(|&a, &b| {
                        let da = sq_dist(embeddings.row(a), &centers[assignment[a]]);
                        let db = sq_dist(embeddings.row(b), &centers[assignment[b]]);
                        da.partial_cmp(&db).unwrap()
                    })
                    .unwrap();
                centers[c] = embeddings.row(far).to_vec();
                assignment[far] = c;
                changed = true;
            } else {
                for (j, s) in sums[c].iter().enumerate() {
                    centers[c][j] = s / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(assignment)
}

type Contingency = (Vec<Vec<usize>>, Vec<usize>, Vec<usize>);

fn contingency(a: &[usize], b: &[usize]) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "label lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::invalid("labels must be non-empty"));
    }
    let ka = a.iter().copied().max().unwrap() + 1;
    let kb = b.iter().copied().max().unwrap() + 1;
    let mut table = vec![vec![0usize; kb]; ka];
    let mut rows = vec![0usize; ka];
    let mut cols = vec![0usize; kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
        rows[x] += 1;
        cols[y] += 1;
    }
    Ok((table, rows, cols))
}

fn entropy(counts: &[usize], n: f64) -> f64 {
    let mut h = 0.0;
    for &c in counts {
        if c > 0 {
            let p = c as f64 / n;
            h -= p * p.ln();
        }
    }
    h
}

/// Mutual information between two labelings normalized by the arithmetic
/// mean of their entropies. Two single-cluster partitions carry no
/// information to disagree about, so the 0/0 case scores 1.
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    let (table, rows, cols) = contingency(a, b)?;
    let n = a.len() as f64;
    let ha = entropy(&rows, n);
    let hb = entropy(&cols, n);
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let pij = c as f64 / n;
                mi += pij * ((n * c as f64) / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (0.5 * (ha + hb))).clamp(0.0, 1.0))
}

fn choose2(c: usize) -> f64 {
    (c as f64) * (c as f64 - 1.0) / 2.0
}

/// Hubert-Arabie adjusted Rand index from contingency pair counts. When the
/// correction denominator vanishes (e.g. both partitions all-singletons) the
/// partitions agree trivially and the score is 1.
pub fn ari(a: &[usize], b: &[usize]) -> Result<f64> {
    let (table, rows, cols) = contingency(a, b)?;
    let total = choose2(a.len());
    let sum_ij: f64 = table
        .iter()
        .flat_map(|r| r.iter())
        .map(|&c| choose2(c))
        .sum();
    let sum_a: f64 = rows.iter().map(|&c| choose2(c)).sum();
    let sum_b: f64 = cols.iter().map(|&c| choose2(c)).sum();
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return Ok(1.0);
    }
    Ok(((sum_ij - expected) / (max - expected)).clamp(-1.0, 1.0))
}

/// Fraction, over all points, of each point's `m` nearest neighbors
/// (Euclidean, self excluded, distance ties broken by lower index) that share
/// the point's label.
pub fn neighborhood_accuracy(
    embeddings: &EmbeddingTable,
    labels: &[usize],
    m: usize,
) -> Result<f64> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::invalid("labels length must match embeddings"));
    }
    if m == 0 || m >= n {
        return Err(Error::invalid(format!(
            "neighborhood size needs 1 <= m < n, got m={m}, n={n}"
        )));
    }
    let mut total = 0.0;
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(n - 1);
    for i in 0..n {
        order.clear();
        for j in 0..n {
            if j != i {
                order.push((sq_dist(embeddings.row(i), embeddings.row(j)), j));
            }
        }
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let same = order
            .iter()
            .take(m)
            .filter(|&&(_, j)| labels[j] == labels[i])
            .count();
        total += same as f64 / m as f64;
    }
    Ok(total / n as f64)
}

/// Multinomial logistic regression on frozen embeddings: a deterministic
/// `train_frac` split, 500 full-batch gradient steps at rate 0.1, held-out
/// accuracy reported. Argmax ties resolve to the lowest class index.
pub fn linear_probe(
    embeddings: &EmbeddingTable,
    labels: &[usize],
    split_seed: u64,
    train_frac: f64,
) -> Result<f64> {
    let n = embeddings.len();
    if labels.len() != n {
        return Err(Error::invalid("labels length must match embeddings"));
    }
    if !(0.0 < train_frac && train_frac < 1.0) {
        return Err(Error::invalid("train_frac must lie in (0,1)"));
    }
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let d = embeddings.dim();

    // Deterministic shuffle, then split.
    let mut rng = substream(split_seed, StreamPurpose::Metrics);
    let mut index: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        index.swap(i, j);
    }
    let n_train = ((n as f64) * train_frac).floor() as usize;
    let (train, test) = index.split_at(n_train);
    if test.is_empty() || train.is_empty() {
        return Err(Error::invalid("split leaves an empty side"));
    }
    let mut train_classes: Vec<bool> = vec![false; k];
    for &i in train {
        train_classes[labels[i]] = true;
    }
    if train_classes.iter().filter(|&&c| c).count() < 2 {
        return Err(Error::invalid(
            "train split holds fewer than 2 classes; probe is degenerate",
        ));
    }

    // Weights are (k x d) plus bias per class, all zero-initialized.
    let mut w = vec![0.0; k * d];
    let mut bias = vec![0.0; k];
    let inv_m = 1.0 / train.len() as f64;
    let mut logits = vec![0.0; k];
    let mut grad_w = vec![0.0; k * d];
    let mut grad_b = vec![0.0; k];
    for _ in 0..PROBE_ITERS {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        grad_b.iter_mut().for_each(|g| *g = 0.0);
        for &i in train {
            let x = embeddings.row(i);
            for c in 0..k {
                let mut s = bias[c];
                for j in 0..d {
                    s += w[c * d + j] * x[j];
                }
                logits[c] = s;
            }
            let max = logits.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            let mut denom = 0.0;
            for l in logits.iter_mut() {
                *l = (*l - max).exp();
                denom += *l;
            }
            for c in 0..k {
                let p = logits[c] / denom;
                let err = p - if labels[i] == c { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad_w[c * d + j] += err * x[j] * inv_m;
                }
                grad_b[c] += err * inv_m;
            }
        }
        for (x, g) in w.iter_mut().zip(&grad_w) {
            *x -= PROBE_LR * g;
        }
        for (x, g) in bias.iter_mut().zip(&grad_b) {
            *x -= PROBE_LR * g;
        }
    }

    let mut correct = 0usize;
    for &i in test {
        let x = embeddings.row(i);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for c in 0..k {
            let mut s = bias[c];
            for j in 0..d {
                s += w[c * d + j] * x[j];
            }
            if s > best.0 {
                best = (s, c);
            }
        }
        if best.1 == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::make_blobs;

    fn blobs_embeddings(seed: u64) -> (EmbeddingTable, Vec<usize>) {
        let ds = make_blobs(2, 20, 2, 0.05, seed).unwrap();
        let e = EmbeddingTable::from_rows(ds.len(), 2, ds.points_flat().to_vec()).unwrap();
        (e, ds.labels().to_vec())
    }

    #[test]
    fn kmeans_recovers_separated_blobs() {
        let (e, labels) = blobs_embeddings(42);
        let clusters = kmeans(&e, 2, 42, 100).unwrap();
        assert_eq!(ari(&clusters, &labels).unwrap(), 1.0);
    }

    #[test]
    fn kmeans_k_equals_n_gives_singletons() {
        let e = EmbeddingTable::from_rows(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        let clusters = kmeans(&e, 4, 0, 50).unwrap();
        let mut sorted = clusters.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 4, "expected one point per cluster");
        // Inertia zero: every point sits on its own centroid.
        for i in 0..4 {
            for j in 0..4 {
                if clusters[i] == clusters[j] {
                    assert_eq!(i, j);
                }
            }
        }
    }

    #[test]
    fn kmeans_k1_assigns_everything_together() {
        let (e, _) = blobs_embeddings(7);
        let clusters = kmeans(&e, 1, 7, 50).unwrap();
        assert!(clusters.iter().all(|&c| c == 0));
    }

    #[test]
    fn kmeans_rejects_bad_k() {
        let (e, _) = blobs_embeddings(1);
        assert!(kmeans(&e, 0, 1, 10).is_err());
        assert!(kmeans(&e, e.len() + 1, 1, 10).is_err());
    }

    #[test]
    fn nmi_identical_partitions_score_one() {
        assert_eq!(nmi(&[0, 0, 1, 1, 2], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
        // Permuting label names changes nothing.
        assert_eq!(nmi(&[2, 2, 0, 0, 1], &[0, 0, 1, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_constant_versus_split_is_zero() {
        assert_eq!(nmi(&[0, 0, 0, 0], &[0, 0, 1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn nmi_both_single_cluster_is_one() {
        assert_eq!(nmi(&[0, 0, 0], &[0, 0, 0]).unwrap(), 1.0);
    }

    #[test]
    fn nmi_matches_contingency_oracle() {
        // a=[0,0,1,1], b=[0,1,1,1]: spell the contingency computation out.
        let ha = 2.0f64.ln(); // two balanced classes
        let hb = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        let mi = 0.25 * (4.0f64 / (2.0 * 1.0)).ln()
            + 0.25 * (4.0f64 / (2.0 * 3.0)).ln()
            + 0.5 * (4.0f64 * 2.0 / (2.0 * 3.0)).ln();
        let expected = mi / (0.5 * (ha + hb));
        let got = nmi(&[0, 0, 1, 1], &[0, 1, 1, 1]).unwrap();
        assert!((got - expected).abs() < 1e-12, "got {got}, oracle {expected}");
    }

    #[test]
    fn ari_identical_partitions_score_one() {
        assert_eq!(ari(&[0, 1, 1, 2], &[0, 1, 1, 2]).unwrap(), 1.0);
        assert_eq!(ari(&[1, 0, 0, 2], &[0, 1, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn ari_matches_pair_counting_oracle() {
        // Brute force over all C(4,2) pairs for a=[0,0,1,1], b=[0,1,0,1].
        let a = [0usize, 0, 1, 1];
        let b = [0usize, 1, 0, 1];
        let mut both = 0.0;
        let mut in_a = 0.0;
        let mut in_b = 0.0;
        let mut total = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                total += 1.0;
                let sa = a[i] == a[j];
                let sb = b[i] == b[j];
                if sa && sb {
                    both += 1.0;
                }
                if sa {
                    in_a += 1.0;
                }
                if sb {
                    in_b += 1.0;
                }
            }
        }
        let expected_index = in_a * in_b / total;
        let max_index = 0.5 * (in_a + in_b);
        let oracle = (both - expected_index) / (max_index - expected_index);
        let got = ari(&a, &b).unwrap();
        assert!((got - oracle).abs() < 1e-12);
        assert!((got + 0.5).abs() < 1e-12, "this fixture scores exactly -0.5");
    }

    #[test]
    fn ari_independent_partitions_center_near_zero() {
        let mut rng = substream(123, StreamPurpose::Metrics);
        let mut sum = 0.0;
        let draws = 1000;
        for _ in 0..draws {
            let a: Vec<usize> = (0..100).map(|_| rng.random_range(0..3)).collect();
            let b: Vec<usize> = (0..100).map(|_| rng.random_range(0..3)).collect();
            sum += ari(&a, &b).unwrap();
        }
        let mean = sum / draws as f64;
        assert!(mean.abs() < 0.02, "mean ARI of independent labels: {mean}");
    }

    #[test]
    fn scores_are_symmetric() {
        let a = [0usize, 0, 1, 2, 1, 0];
        let b = [1usize, 0, 1, 2, 2, 0];
        assert!((nmi(&a, &b).unwrap() - nmi(&b, &a).unwrap()).abs() < 1e-15);
        assert!((ari(&a, &b).unwrap() - ari(&b, &a).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn neighborhood_accuracy_extremes() {
        let (e, labels) = blobs_embeddings(5);
        assert_eq!(neighborhood_accuracy(&e, &labels, 1).unwrap(), 1.0);
        // m = n-1 counts every other point: exactly the mean class prior
        // correction (n_c - 1) / (n - 1).
        let n = e.len();
        let expected: f64 = labels
            .iter()
            .map(|&c| {
                let n_c = labels.iter().filter(|&&x| x == c).count();
                (n_c - 1) as f64 / (n - 1) as f64
            })
            .sum::<f64>()
            / n as f64;
        let got = neighborhood_accuracy(&e, &labels, n - 1).unwrap();
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn neighborhood_accuracy_rotation_and_scale_invariant() {
        let (e, labels) = blobs_embeddings(9);
        let base = neighborhood_accuracy(&e, &labels, 3).unwrap();
        // Rotate by 30 degrees and scale by 2.5.
        let (s, c) = (30f64.to_radians().sin(), 30f64.to_radians().cos());
        let mut coords = Vec::with_capacity(e.len() * 2);
        for i in 0..e.len() {
            let p = e.row(i);
            coords.push(2.5 * (c * p[0] - s * p[1]));
            coords.push(2.5 * (s * p[0] + c * p[1]));
        }
        let moved = EmbeddingTable::from_rows(e.len(), 2, coords).unwrap();
        let got = neighborhood_accuracy(&moved, &labels, 3).unwrap();
        assert_eq!(base, got);
    }

    #[test]
    fn linear_probe_separable_data_is_perfect() {
        let (e, labels) = blobs_embeddings(42);
        assert_eq!(linear_probe(&e, &labels, 42, 0.8).unwrap(), 1.0);
    }

    #[test]
    fn linear_probe_on_label_feature_is_perfect() {
        let labels: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let coords: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
        let e = EmbeddingTable::from_rows(30, 1, coords).unwrap();
        assert_eq!(linear_probe(&e, &labels, 0, 0.8).unwrap(), 1.0);
    }

    #[test]
    fn linear_probe_shuffled_labels_near_chance() {
        let (e, mut labels) = blobs_embeddings(11);
        let mut rng = substream(99, StreamPurpose::Metrics);
        let mut sum = 0.0;
        let reps = 20;
        for _ in 0..reps {
            for i in (1..labels.len()).rev() {
                let j = rng.random_range(0..=i);
                labels.swap(i, j);
            }
            sum += linear_probe(&e, &labels, 3, 0.8).unwrap();
        }
        let mean = sum / reps as f64;
        assert!(
            (mean - 0.5).abs() < 0.2,
            "shuffled 2-class accuracy averaged {mean}"
        );
    }

    #[test]
    fn linear_probe_rejects_degenerate_splits() {
        let e = EmbeddingTable::from_rows(4, 1, vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert!(linear_probe(&e, &[0, 0, 0, 0], 0, 0.5).is_err());
        assert!(linear_probe(&e, &[0, 1, 0, 1], 0, 1.0).is_err());
    }

    #[test]
    fn evaluate_embeddings_produces_in_range_report() {
        let (e, labels) = blobs_embeddings(42);
        let report = evaluate_embeddings(&e, &labels, 5, 42).unwrap();
        assert_eq!(report.k_used, 2);
        assert!(report.linear_accuracy >= 0.9);
        assert!(report.nmi >= 0.9);
        assert!(report.ari >= 0.9);
        assert!(report.neighborhood_accuracy >= 0.9);
    }
}
