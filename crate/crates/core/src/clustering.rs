//! Per-period k-means over row-normalized feature vectors.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data_model::{DataError, TrainingDataset};

pub const MAX_LLOYD_ITERATIONS: usize = 300;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("cannot form {clusters} clusters from {points} points")]
    TooManyClusters { clusters: usize, points: usize },
    #[error("cluster count must be at least 1")]
    ZeroClusters,
    #[error("feature dimension mismatch: got {got}, expected {expected}")]
    Dimension { got: usize, expected: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Per-row centering and ℓ₂ scaling of the feature matrix `W` (rows = features, columns = days).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowNormalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    /// Rows with zero variance; they are mapped to zero.
    pub degenerate: Vec<bool>,
}

impl RowNormalization {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Applies the stored transform to one raw feature vector (one column of `W`).
    pub fn apply(&self, w: &[f64]) -> Result<Vec<f64>, ClusterError> {
        if w.len() != self.dim() {
            return Err(ClusterError::Dimension { got: w.len(), expected: self.dim() });
        }
        Ok(w.iter()
            .enumerate()
            .map(|(j, &v)| if self.degenerate[j] { 0.0 } else { (v - self.mean[j]) / self.scale[j] })
            .collect())
    }
}

/// Centers each row to mean zero and scales it to unit ℓ₂ norm.
pub fn normalize_rows(w: &[Vec<f64>]) -> (Vec<Vec<f64>>, RowNormalization) {
    let mut out = Vec::with_capacity(w.len());
    let mut params = RowNormalization { mean: Vec::new(), scale: Vec::new(), degenerate: Vec::new() };
    for row in w {
        let k = row.len().max(1) as f64;
        let mean = row.iter().sum::<f64>() / k;
        let centered: Vec<f64> = row.iter().map(|v| v - mean).collect();
        let norm = centered.iter().map(|v| v * v).sum::<f64>().sqrt();
        let degenerate = !(norm > 1e-12 * (1.0 + mean.abs()));
        params.mean.push(mean);
        params.scale.push(if degenerate { 1.0 } else { norm });
        params.degenerate.push(degenerate);
        out.push(if degenerate { vec![0.0; row.len()] } else { centered.iter().map(|v| v / norm).collect() });
    }
    (out, params)
}

/// Transposes a rows-by-columns matrix into its column vectors (one per day).
pub fn columns(w: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = w.first().map_or(0, Vec::len);
    (0..k).map(|c| w.iter().map(|row| row[c]).collect()).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, cen) in centroids.iter().enumerate() {
        let d = sq_dist(point, cen);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    /// Cluster label of each point, numbered by first appearance.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sse: f64,
    pub iterations: usize,
    /// Within-cluster SSE after each Lloyd update of the winning run.
    pub sse_history: Vec<f64>,
}

/// Within-cluster sum of squared distances to the cluster means.
pub fn within_cluster_sse(points: &[Vec<f64>], labels: &[usize], clusters: usize) -> f64 {
    let cents = centroids_of(points, labels, clusters);
    points.iter().zip(labels).map(|(p, &l)| sq_dist(p, &cents[l])).sum()
}

fn centroids_of(points: &[Vec<f64>], labels: &[usize], clusters: usize) -> Vec<Vec<f64>> {
    let dim = points.first().map_or(0, Vec::len);
    let mut sums = vec![vec![0.0; dim]; clusters];
    let mut counts = vec![0usize; clusters];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        if n > 0 {
            for v in s.iter_mut() {
                *v /= n as f64;
            }
        }
    }
    sums
}

fn kmeans_pp(points: &[Vec<f64>], clusters: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut cents = vec![points[rng.gen_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &cents[0])).collect();
    while cents.len() < clusters {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut r = rng.gen::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    pick = i;
                    break;
                }
                r -= d;
            }
            pick
        } else {
            rng.gen_range(0..points.len())
        };
        cents.push(points[idx].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &cents[cents.len() - 1]));
        }
    }
    cents
}

fn relabel_by_first_appearance(labels: &[usize], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<Vec<f64>>) {
    let mut map = vec![usize::MAX; centroids.len()];
    let mut next = 0;
    for &l in labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    for m in map.iter_mut() {
        if *m == usize::MAX {
            *m = next;
            next += 1;
        }
    }
    let mut cents = vec![Vec::new(); centroids.len()];
    for (old, &new) in map.iter().enumerate() {
        cents[new] = centroids[old].clone();
    }
    (labels.iter().map(|&l| map[l]).collect(), cents)
}

fn lloyd(points: &[Vec<f64>], mut cents: Vec<Vec<f64>>) -> KMeansResult {
    let clusters = cents.len();
    let mut labels: Vec<usize> = points.iter().map(|p| nearest(p, &cents).0).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    loop {
        // Re-seed empty clusters at the point farthest from its own centroid.
        loop {
            let mut counts = vec![0usize; clusters];
            for &l in &labels {
                counts[l] += 1;
            }
            let Some(empty) = counts.iter().position(|&n| n == 0) else { break };
            let (far, _) = points
                .iter()
                .enumerate()
                .filter(|(i, _)| counts[labels[*i]] > 1)
                .map(|(i, p)| (i, sq_dist(p, &cents[labels[i]])))
                .fold((usize::MAX, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
            if far == usize::MAX {
                break;
            }
            labels[far] = empty;
            cents[empty] = points[far].clone();
        }
        cents = centroids_of(points, &labels, clusters);
        history.push(points.iter().zip(&labels).map(|(p, &l)| sq_dist(p, &cents[l])).sum());
        iterations += 1;
        let new_labels: Vec<usize> = points
            .iter()
            .zip(&labels)
            .map(|(p, &l)| {
                // Keep the current label on exact ties so the fixpoint is reachable.
                let (c, d) = nearest(p, &cents);
                if sq_dist(p, &cents[l]) <= d {
                    l
                } else {
                    c
                }
            })
            .collect();
        if new_labels == labels || iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        labels = new_labels;
    }
    let sse = *history.last().unwrap_or(&0.0);
    let (labels, centroids) = relabel_by_first_appearance(&labels, &cents);
    KMeansResult { labels, centroids, sse, iterations, sse_history: history }
}

/// k-means++ seeded Lloyd iterations, best of `restarts` runs by within-cluster SSE.
pub fn kmeans(points: &[Vec<f64>], clusters: usize, seed: u64, restarts: usize) -> Result<KMeansResult, ClusterError> {
    if clusters == 0 {
        return Err(ClusterError::ZeroClusters);
    }
    if clusters > points.len() {
        return Err(ClusterError::TooManyClusters { clusters, points: points.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..restarts.max(1) {
        let run = lloyd(points, kmeans_pp(points, clusters, &mut rng));
        if best.as_ref().map_or(true, |b| run.sse < b.sse) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub t: usize,
    pub num_clusters: usize,
    pub centroids: Vec<Vec<f64>>,
    /// Day indices (positions in the training set) per cluster, ascending.
    pub members: Vec<Vec<usize>>,
    pub labels: Vec<usize>,
    pub normalization: RowNormalization,
    pub sse: f64,
}

impl ClusterModel {
    /// Nearest-centroid label for a raw feature vector.
    pub fn label(&self, w: &[f64]) -> Result<usize, ClusterError> {
        let z = self.normalization.apply(w)?;
        Ok(nearest(&z, &self.centroids).0)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.members.iter().map(Vec::len).collect()
    }
}

/// Builds `W_t` from the dataset, normalizes it and runs k-means.
pub fn cluster_period(
    ds: &TrainingDataset,
    t: usize,
    clusters: usize,
    seed: u64,
    restarts: usize,
) -> Result<ClusterModel, ClusterError> {
    let cols: Vec<Vec<f64>> = (0..ds.len()).map(|k| ds.build_feature_vector(k, t)).collect::<Result<_, _>>()?;
    if cols.is_empty() {
        return Err(ClusterError::TooManyClusters { clusters, points: 0 });
    }
    let rows = columns(&cols);
    let (norm_rows, normalization) = normalize_rows(&rows);
    let points = columns(&norm_rows);
    let res = kmeans(&points, clusters, seed, restarts)?;
    let mut members = vec![Vec::new(); clusters];
    for (k, &l) in res.labels.iter().enumerate() {
        members[l].push(k);
    }
    Ok(ClusterModel {
        t,
        num_clusters: clusters,
        centroids: res.centroids,
        members,
        labels: res.labels,
        normalization,
        sse: res.sse,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_hand_example() {
        let (z, p) = normalize_rows(&[vec![1.0, 2.0, 3.0], vec![5.0, 5.0, 5.0]]);
        let s = 1.0 / 2f64.sqrt();
        assert!((z[0][0] + s).abs() < 1e-15 && z[0][1].abs() < 1e-15 && (z[0][2] - s).abs() < 1e-15);
        assert_eq!(z[1], vec![0.0; 3]);
        assert_eq!(p.degenerate, vec![false, true]);
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, 3.0], vec![4.0, 5.0]];
        let r = kmeans(&pts, 1, 1, 3).unwrap();
        assert_eq!(r.labels, vec![0, 0, 0]);
        assert_eq!(r.centroids[0], vec![2.0, 3.0]);
    }

    #[test]
    fn too_many_clusters_rejected() {
        let pts = vec![vec![0.0], vec![1.0]];
        assert!(matches!(kmeans(&pts, 3, 1, 1), Err(ClusterError::TooManyClusters { .. })));
    }

    #[test]
    fn separated_clouds_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut pts = Vec::new();
        for i in 0..40 {
            let off = if i % 2 == 0 { 0.0 } else { 10.0 };
            pts.push(vec![off + rng.gen::<f64>(), off + rng.gen::<f64>()]);
        }
        let r = kmeans(&pts, 2, 4, 5).unwrap();
        for (i, &l) in r.labels.iter().enumerate() {
            assert_eq!(l, i % 2);
        }
    }

    #[test]
    fn duplicate_points_still_fill_every_cluster() {
        let pts = vec![vec![1.0]; 4];
        let r = kmeans(&pts, 3, 0, 2).unwrap();
        let mut counts = [0; 3];
        for &l in &r.labels {
            counts[l] += 1;
        }
        assert!(counts.iter().all(|&c| c > 0));
    }
}
