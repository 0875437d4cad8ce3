//! Agglomerative hierarchical clustering with Ward linkage.
//!
//! Greedy merging via the Lance-Williams recurrence on squared Euclidean
//! dissimilarities: each step joins the pair causing the least increase of
//! within-cluster variance. Ties are broken by the lexicographically lowest
//! active index pair, and final labels are ordered by each cluster's
//! smallest member index, so assignments are fully deterministic.

/// Cut the Ward dendrogram over `points` at `num_clusters` clusters.
/// Returns one label in `0..k` per point, `k = min(num_clusters, len)`.
pub fn ward_clusters(points: &[Vec<f64>], num_clusters: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let k = num_clusters.clamp(1, n);

    // dense symmetric matrix of squared distances between active clusters
    let mut dist = vec![0.0f64; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = squared_euclidean(&points[i], &points[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }

    let mut active: Vec<usize> = (0..n).collect();
    let mut size = vec![1usize; n];
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();

    while active.len() > k {
        let mut best = (f64::INFINITY, 0usize, 0usize); // (d, slot_a, slot_b)
        for a in 0..active.len() {
            for b in (a + 1)..active.len() {
                let d = dist[active[a] * n + active[b]];
                if d < best.0 {
                    best = (d, a, b);
                }
            }
        }
        let (d_ij, slot_i, slot_j) = best;
        let (i, j) = (active[slot_i], active[slot_j]);

        // Lance-Williams update for Ward's method, merging j into i
        let (ni, nj) = (size[i] as f64, size[j] as f64);
        for &h in &active {
            if h == i || h == j {
                continue;
            }
            let nh = size[h] as f64;
            let d_new = ((ni + nh) * dist[i * n + h] + (nj + nh) * dist[j * n + h]
                - nh * d_ij)
                / (ni + nj + nh);
            dist[i * n + h] = d_new;
            dist[h * n + i] = d_new;
        }
        size[i] += size[j];
        let moved = std::mem::take(&mut members[j]);
        members[i].extend(moved);
        active.remove(slot_j);
    }

    // label clusters by ascending smallest member index
    let mut clusters: Vec<&Vec<usize>> = active.iter().map(|&i| &members[i]).collect();
    clusters.sort_by_key(|m| *m.iter().min().unwrap());
    let mut labels = vec![0usize; n];
    for (label, cluster) in clusters.iter().enumerate() {
        for &point in cluster.iter() {
            labels[point] = label;
        }
    }
    labels
}

fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
