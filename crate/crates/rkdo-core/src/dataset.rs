//! Deterministic synthetic point clouds: Gaussian blobs, concentric rings,
//! two moons, and the paired-view augmentation that doubles a dataset into
//! jittered positive pairs.

use crate::error::{Error, Result};
use crate::io;
use crate::rng::{substream, StreamPurpose};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// An immutable labeled point cloud in a small ambient space, optionally
/// carrying a pairing of augmented views.
#[derive(Debug, Clone, PartialEq)]
pub struct PointDataset {
    points: Vec<f64>,
    n: usize,
    dim: usize,
    labels: Vec<usize>,
    pair_map: Option<Vec<usize>>,
    seed: u64,
}

impl PointDataset {
    /// Assembles a dataset from raw parts, validating shape, label range, and
    /// (when present) that the pair map is a fixed-point-free involution.
    pub fn from_parts(
        points: Vec<f64>,
        n: usize,
        dim: usize,
        labels: Vec<usize>,
        pair_map: Option<Vec<usize>>,
        seed: u64,
    ) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid(format!(
                "dataset needs positive dimensions, got {n}x{dim}"
            )));
        }
        if points.len() != n * dim {
            return Err(Error::invalid(format!(
                "expected {} coordinates, got {}",
                n * dim,
                points.len()
            )));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite coordinates"));
        }
        if labels.len() != n {
            return Err(Error::invalid(format!(
                "expected {n} labels, got {}",
                labels.len()
            )));
        }
        if let Some(map) = &pair_map {
            if map.len() != n {
                return Err(Error::invalid(format!(
                    "pair map has {} entries, expected {n}",
                    map.len()
                )));
            }
            for (i, &j) in map.iter().enumerate() {
                if j >= n || j == i || map[j] != i {
                    return Err(Error::invalid(format!(
                        "pair map is not a fixed-point-free involution at index {i}"
                    )));
                }
            }
        }
        Ok(PointDataset {
            points,
            n,
            dim,
            labels,
            pair_map,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points_flat(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn pair_map(&self) -> Option<&[usize]> {
        self.pair_map.as_deref()
    }

    /// Number of distinct classes, assuming labels occupy [0, k).
    pub fn class_count(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }

    /// Squared Euclidean distance between points `i` and `j`.
    pub fn sq_distance(&self, i: usize, j: usize) -> f64 {
        let a = self.point(i);
        let b = self.point(j);
        let mut acc = 0.0;
        for k in 0..self.dim {
            let d = a[k] - b[k];
            acc += d * d;
        }
        acc
    }

    /// CSV rendering with header `x1..xD,label,pair`; the pair column is
    /// empty when no pair map is present.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in 1..=self.dim {
            out.push_str(&format!("x{c},"));
        }
        out.push_str("label,pair\n");
        for i in 0..self.n {
            for v in self.point(i) {
                out.push_str(&io::csv_f64(*v));
                out.push(',');
            }
            out.push_str(&self.labels[i].to_string());
            out.push(',');
            if let Some(map) = &self.pair_map {
                out.push_str(&map[i].to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Content fingerprint of the CSV rendering, used in run manifests.
    pub fn content_hash(&self) -> String {
        io::sha256_hex(self.to_csv().as_bytes())
    }
}

/// Vertices of a regular simplex with unit pairwise distances, expressed in
/// k-1 coordinates. Built by centering the scaled standard basis of R^k and
/// re-expressing it in an orthonormal basis of the sum-zero hyperplane.
fn simplex_vertices(k: usize) -> Vec<Vec<f64>> {
    // Raw vertices e_i / sqrt(2) minus their centroid, in R^k.
    let s = 1.0 / 2f64.sqrt();
    let centroid = s / k as f64;
    let raw: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            (0..k)
                .map(|j| if i == j { s - centroid } else { -centroid })
                .collect()
        })
        .collect();
    // Orthonormal basis of the sum-zero hyperplane via Gram-Schmidt on
    // e_j - e_k.
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k - 1);
    for j in 0..k - 1 {
        let mut v = vec![0.0; k];
        v[j] = 1.0;
        v[k - 1] = -1.0;
        for b in &basis {
            let proj: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            for (x, y) in v.iter_mut().zip(b) {
                *x -= proj * y;
            }
        }
        let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut v {
            *x /= norm;
        }
        basis.push(v);
    }
    raw.iter()
        .map(|p| {
            basis
                .iter()
                .map(|b| p.iter().zip(b).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect()
}

/// `k` Gaussian clusters of `n_per` points each in `dim` ambient dimensions.
/// Cluster centers sit on a regular simplex with unit pairwise separation, so
/// `sigma` directly controls overlap (e.g. sigma = 0.1 puts centers ten
/// standard deviations apart).
pub fn make_blobs(k: usize, n_per: usize, dim: usize, sigma: f64, seed: u64) -> Result<PointDataset> {
    if k < 2 || n_per < 2 {
        return Err(Error::invalid(format!(
            "blobs need k >= 2 and n_per >= 2, got k={k}, n_per={n_per}"
        )));
    }
    if sigma <= 0.0 || sigma.is_nan() {
        return Err(Error::invalid(format!("sigma must be positive, got {sigma}")));
    }
    if dim < k - 1 {
        return Err(Error::invalid(format!(
            "{k} equidistant centers need at least {} dims, got {dim}",
            k - 1
        )));
    }
    let centers = simplex_vertices(k);
    let mut rng = substream(seed, StreamPurpose::Dataset);
    let n = k * n_per;
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per {
            for axis in 0..dim {
                let base = if axis < center.len() { center[axis] } else { 0.0 };
                let noise: f64 = StandardNormal.sample(&mut rng);
                points.push(base + sigma * noise);
            }
            labels.push(c);
        }
    }
    PointDataset::from_parts(points, n, dim, labels, None, seed)
}

/// `k` concentric rings in the plane with radii 1, 3, 5, ... and radial
/// Gaussian noise of scale `noise`.
pub fn make_rings(k: usize, n_per: usize, noise: f64, seed: u64) -> Result<PointDataset> {
    if k < 1 || n_per < 1 {
        return Err(Error::invalid("rings need k >= 1 and n_per >= 1"));
    }
    if noise < 0.0 {
        return Err(Error::invalid("noise must be nonnegative"));
    }
    let mut rng = substream(seed, StreamPurpose::Dataset);
    let n = k * n_per;
    let mut points = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for ring in 0..k {
        let radius = 1.0 + 2.0 * ring as f64;
        for _ in 0..n_per {
            let angle = rng.random::<f64>() * std::f64::consts::TAU;
            let jitter: f64 = StandardNormal.sample(&mut rng);
            let r = radius + noise * jitter;
            points.push(r * angle.cos());
            points.push(r * angle.sin());
            labels.push(ring);
        }
    }
    PointDataset::from_parts(points, n, 2, labels, None, seed)
}

/// The classic interleaved half-circles, `n_per` points per moon, with
/// isotropic Gaussian noise of scale `noise`.
pub fn make_moons(n_per: usize, noise: f64, seed: u64) -> Result<PointDataset> {
    if n_per < 2 {
        return Err(Error::invalid("moons need n_per >= 2"));
    }
    if noise < 0.0 {
        return Err(Error::invalid("noise must be nonnegative"));
    }
    let mut rng = substream(seed, StreamPurpose::Dataset);
    let n = 2 * n_per;
    let mut points = Vec::with_capacity(n * 2);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n_per {
        let theta = std::f64::consts::PI * i as f64 / (n_per - 1) as f64;
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        points.push(theta.cos() + noise * nx);
        points.push(theta.sin() + noise * ny);
        labels.push(0);
    }
    for i in 0..n_per {
        let theta = std::f64::consts::PI * i as f64 / (n_per - 1) as f64;
        let nx: f64 = StandardNormal.sample(&mut rng);
        let ny: f64 = StandardNormal.sample(&mut rng);
        points.push(1.0 - theta.cos() + noise * nx);
        points.push(0.5 - theta.sin() + noise * ny);
        labels.push(1);
    }
    PointDataset::from_parts(points, n, 2, labels, None, seed)
}

/// Expands each point into two independently jittered views at indices 2i and
/// 2i+1, linked through the pair map. Labels are inherited, so the label
/// distribution is preserved exactly.
pub fn augment_pairs(ds: &PointDataset, jitter_sigma: f64, seed: u64) -> Result<PointDataset> {
    if jitter_sigma < 0.0 {
        return Err(Error::invalid("jitter_sigma must be nonnegative"));
    }
    let mut rng = substream(seed, StreamPurpose::Jitter);
    let n = ds.len() * 2;
    let dim = ds.dim();
    let mut points = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    let mut pair_map = Vec::with_capacity(n);
    for i in 0..ds.len() {
        for view in 0..2 {
            for &coord in ds.point(i) {
                let noise: f64 = StandardNormal.sample(&mut rng);
                points.push(coord + jitter_sigma * noise);
            }
            labels.push(ds.labels()[i]);
            pair_map.push(2 * i + 1 - view);
        }
    }
    PointDataset::from_parts(points, n, dim, labels, Some(pair_map), seed)
}
