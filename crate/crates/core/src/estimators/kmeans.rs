//! k-means with k-means++ seeding, and silhouette-based choice of k.

use rand::Rng;

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::families::partition::Partition;
use crate::selection::stream_rng;

pub const RESTARTS: usize = 5;
pub const MAX_LLOYD_STEPS: usize = 300;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone)]
struct Fit {
    labels: Vec<usize>,
    objective: f64,
}

fn plus_plus_centers(data: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = data.n();
    let mut centers = vec![data.row(rng.gen_range(0..n)).to_vec()];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(data.row(i), &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.gen_range(0..n)
        };
        let c = data.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(data.row(i), &c));
        }
        centers.push(c);
    }
    centers
}

/// Nearest center, ties to the lowest index.
fn assign(data: &FeatureMatrix, centers: &[Vec<f64>]) -> Vec<usize> {
    (0..data.n())
        .map(|i| {
            let row = data.row(i);
            let mut best = (0, f64::INFINITY);
            for (c, center) in centers.iter().enumerate() {
                let d = sq_dist(row, center);
                if d < best.1 {
                    best = (c, d);
                }
            }
            best.0
        })
        .collect()
}

fn objective(data: &FeatureMatrix, centers: &[Vec<f64>], labels: &[usize]) -> f64 {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| sq_dist(data.row(i), &centers[c]))
        .sum()
}

/// Moves the point farthest from its center into each empty cluster, taking
/// only from clusters with more than one point.
fn fill_empty(data: &FeatureMatrix, centers: &mut [Vec<f64>], labels: &mut [usize]) {
    let k = centers.len();
    loop {
        let mut sizes = vec![0usize; k];
        labels.iter().for_each(|&c| sizes[c] += 1);
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let donor = (0..labels.len())
            .filter(|&i| sizes[labels[i]] > 1)
            .max_by(|&a, &b| {
                let da = sq_dist(data.row(a), &centers[labels[a]]);
                let db = sq_dist(data.row(b), &centers[labels[b]]);
                da.total_cmp(&db).then(b.cmp(&a))
            })
            .expect("k ≤ n leaves a cluster with two points");
        labels[donor] = empty;
        centers[empty] = data.row(donor).to_vec();
    }
}

fn update_centers(data: &FeatureMatrix, labels: &[usize], k: usize) -> Vec<Vec<f64>> {
    let d = data.d();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for (s, x) in sums[c].iter_mut().zip(data.row(i)) {
            *s += x;
        }
    }
    for (s, &n) in sums.iter_mut().zip(&counts) {
        s.iter_mut().for_each(|x| *x /= n as f64);
    }
    sums
}

fn lloyd(data: &FeatureMatrix, k: usize, rng: &mut impl Rng) -> Fit {
    let mut centers = plus_plus_centers(data, k, rng);
    let mut labels = assign(data, &centers);
    fill_empty(data, &mut centers, &mut labels);
    let mut obj = f64::INFINITY;
    for _ in 0..MAX_LLOYD_STEPS {
        centers = update_centers(data, &labels, k);
        let now = objective(data, &centers, &labels);
        debug_assert!(
            now <= obj + 1e-9 * obj.abs().max(1.0),
            "objective rose from {obj} to {now}"
        );
        obj = now;
        let mut next = assign(data, &centers);
        fill_empty(data, &mut centers, &mut next);
        if next == labels {
            break;
        }
        labels = next;
    }
    let objective = objective(data, &centers, &labels);
    Fit { labels, objective }
}

/// k-means on the rows of `data`: the best of [`RESTARTS`] seeded k-means++
/// runs. Blocks are never empty.
pub fn kmeans_estimate(data: &FeatureMatrix, k: usize, seed: u64) -> Result<Partition> {
    let n = data.n();
    if k == 0 || k > n {
        return Err(Error::Domain(format!("need 1 ≤ k ≤ {n}, got k = {k}")));
    }
    if k == n {
        return Ok(Partition::singletons(n));
    }
    let best = (0..RESTARTS)
        .map(|r| lloyd(data, k, &mut stream_rng(seed, r as u64)))
        .min_by(|a, b| a.objective.total_cmp(&b.objective))
        .expect("at least one restart");
    Ok(Partition::from_labels(&best.labels))
}

/// Mean silhouette width with Euclidean distance; points alone in their
/// block score zero.
pub fn mean_silhouette(data: &FeatureMatrix, partition: &Partition) -> Result<f64> {
    let n = data.n();
    let dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| sq_dist(data.row(i), data.row(j)).sqrt()).collect())
        .collect();
    if dist.iter().flatten().all(|&d| d == 0.0) {
        return Err(Error::Degenerate("all points coincide".into()));
    }
    let blocks = partition.num_blocks();
    let mut total = 0.0;
    for i in 0..n {
        let mut sum = vec![0.0; blocks];
        let mut count = vec![0usize; blocks];
        for j in 0..n {
            if j != i {
                sum[partition.label(j)] += dist[i][j];
                count[partition.label(j)] += 1;
            }
        }
        let own = partition.label(i);
        if count[own] == 0 {
            continue;
        }
        let a = sum[own] / count[own] as f64;
        let b = (0..blocks)
            .filter(|&c| c != own && count[c] > 0)
            .map(|c| sum[c] / count[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 && b.is_finite() {
            total += (b - a) / m;
        }
    }
    Ok(total / n as f64)
}

/// The `k` in `grid` with the largest mean silhouette, ties to the smaller `k`.
pub fn silhouette_select_k(data: &FeatureMatrix, grid: &[usize], seed: u64) -> Result<usize> {
    match grid {
        [] => Err(Error::Domain("empty k grid".into())),
        [k] => Ok(*k),
        _ => {
            let n = data.n();
            if let Some(k) = grid.iter().find(|&&k| k < 2 || k + 1 > n) {
                return Err(Error::Domain(format!("k = {k} outside 2..={}", n.saturating_sub(1))));
            }
            let mut sorted = grid.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            let mut best: Option<(usize, f64)> = None;
            for k in sorted {
                let s = mean_silhouette(data, &kmeans_estimate(data, k, seed)?)?;
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((k, s));
                }
            }
            Ok(best.expect("nonempty grid").0)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    fn blobs(centers: &[(f64, f64)], per: usize, sd: f64, seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = stream_rng(seed, 0);
        let noise = Normal::new(0.0, sd).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, &(x, y)) in centers.iter().enumerate() {
            for _ in 0..per {
                rows.push(vec![x + noise.sample(&mut rng), y + noise.sample(&mut rng)]);
                truth.push(c);
            }
        }
        (FeatureMatrix::from_rows(rows).unwrap(), truth)
    }

    #[test]
    fn extreme_k_values() {
        let (data, _) = blobs(&[(0.0, 0.0), (10.0, 0.0)], 4, 0.1, 1);
        assert_eq!(kmeans_estimate(&data, 8, 0).unwrap(), Partition::singletons(8));
        assert_eq!(kmeans_estimate(&data, 1, 0).unwrap(), Partition::one_block(8));
        assert!(kmeans_estimate(&data, 9, 0).is_err());
        assert!(kmeans_estimate(&data, 0, 0).is_err());
    }

    #[test]
    fn recovers_two_planted_blobs() {
        for seed in 0..20 {
            let (data, truth) = blobs(&[(0.0, 0.0), (10.0, 0.0)], 15, 0.1, seed);
            assert_eq!(kmeans_estimate(&data, 2, seed).unwrap(), Partition::from_labels(&truth));
            assert_eq!(silhouette_select_k(&data, &[2, 3, 4, 5], seed).unwrap(), 2);
        }
    }

    #[test]
    fn three_far_blobs_select_three() {
        let (data, _) = blobs(&[(0.0, 0.0), (20.0, 0.0), (10.0, 17.32)], 10, 0.3, 7);
        assert_eq!(silhouette_select_k(&data, &[2, 3, 4, 5], 7).unwrap(), 3);
        assert_eq!(silhouette_select_k(&data, &[4], 7).unwrap(), 4);
    }

    #[test]
    fn no_empty_blocks_with_duplicate_points() {
        let data = FeatureMatrix::from_rows(vec![vec![1.0], vec![1.0], vec![1.0], vec![2.0]]).unwrap();
        let part = kmeans_estimate(&data, 3, 3).unwrap();
        assert_eq!(part.num_blocks(), 3);
    }

    #[test]
    fn coincident_points_are_degenerate() {
        let data = FeatureMatrix::from_rows(vec![vec![1.0, 1.0]; 5]).unwrap();
        assert!(matches!(
            silhouette_select_k(&data, &[2, 3], 0),
            Err(Error::Degenerate(_))
        ));
    }
}
