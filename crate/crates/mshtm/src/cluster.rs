//! Density-based clustering of embedded sentences: an optional SVD
//! projection to a low-dimensional space, then HDBSCAN over the mutual
//! reachability graph.
//!
//! The clustering pipeline is the classic one: per-point core distances,
//! a minimum spanning tree of the mutual reachability distances, a
//! single-linkage hierarchy from the sorted tree edges, condensation at
//! `min_cluster_size`, and excess-of-mass cluster selection. Points that
//! never join a selected cluster get the noise label `-1`.
//!
//! Core distances use the k-th nearest *other* point, so a point is never
//! its own neighbor: with points 0, 1, 10 on a line and `min_samples = 2`,
//! the core distance of the first point is 10, not 1.
//!
//! Everything is deterministic for fixed input order. The minimum spanning
//! tree breaks distance ties by the lower vertex index, and parallel
//! reductions use a total order so chunking cannot change the result.

use ndarray::{Array2, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::instrument;
use crate::linalg::truncated_svd;

#[derive(Debug, thiserror::Error)]
pub enum ClusterError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("point matrix has a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReduceMethod {
    Svd,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReduceConfig {
    pub method: ReduceMethod,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ReduceConfig {
    fn default() -> Self {
        ReduceConfig { method: ReduceMethod::Svd, dim: 5, seed: 0 }
    }
}

/// Projects points onto the top principal directions of the mean-centered
/// data. Requesting at least as many dimensions as the data already has
/// returns the input unchanged.
pub fn reduce(points: &Array2<f64>, config: &ReduceConfig) -> Array2<f64> {
    let (n, d) = points.dim();
    if config.method == ReduceMethod::None || config.dim >= d || n == 0 {
        return points.to_owned();
    }
    let k = config.dim.min(n).max(1);
    let mut centered = points.to_owned();
    let means = centered.mean_axis(ndarray::Axis(0)).expect("n > 0");
    for mut row in centered.rows_mut() {
        row -= &means;
    }
    let svd = truncated_svd(&centered, k, config.seed);
    let mut scores = svd.u;
    for (j, &s) in svd.s.iter().enumerate() {
        scores.column_mut(j).mapv_inplace(|v| v * s);
    }
    scores
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Cosine,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdbscanConfig {
    pub min_cluster_size: usize,
    /// Neighbor count for core distances; defaults to `min_cluster_size`.
    pub min_samples: Option<usize>,
    pub metric: Metric,
}

impl HdbscanConfig {
    pub fn new(min_cluster_size: usize, min_samples: Option<usize>, metric: Metric) -> Self {
        instrument::record_cluster_config_build();
        HdbscanConfig { min_cluster_size, min_samples, metric }
    }

    fn effective_min_samples(&self) -> usize {
        self.min_samples.unwrap_or(self.min_cluster_size)
    }
}

impl Default for HdbscanConfig {
    fn default() -> Self {
        HdbscanConfig::new(15, None, Metric::Euclidean)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterLabels {
    /// One label per input row; `-1` is noise, clusters count from 0.
    pub labels: Vec<i64>,
    pub n_clusters: usize,
}

impl ClusterLabels {
    pub fn n_noise(&self) -> usize {
        self.labels.iter().filter(|&&l| l == -1).count()
    }
}

fn distance(a: ArrayView1<f64>, b: ArrayView1<f64>, metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean => {
            let mut sum = 0.0;
            for (x, y) in a.iter().zip(b.iter()) {
                let d = x - y;
                sum += d * d;
            }
            sum.sqrt()
        }
        Metric::Cosine => {
            let mut dot = 0.0;
            let mut na = 0.0;
            let mut nb = 0.0;
            for (x, y) in a.iter().zip(b.iter()) {
                dot += x * y;
                na += x * x;
                nb += y * y;
            }
            if na == 0.0 && nb == 0.0 {
                0.0
            } else if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                (1.0 - dot / (na.sqrt() * nb.sqrt())).max(0.0)
            }
        }
    }
}

fn check_finite(points: &Array2<f64>) -> Result<(), ClusterError> {
    for ((row, col), v) in points.indexed_iter() {
        if !v.is_finite() {
            return Err(ClusterError::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Distance to the `min_samples`-th nearest other point (clamped to the
/// farthest other point when fewer exist).
pub fn core_distances(points: &Array2<f64>, min_samples: usize, metric: Metric) -> Vec<f64> {
    let n = points.nrows();
    if n <= 1 {
        return vec![0.0; n];
    }
    let k = min_samples.max(1).min(n - 1);
    (0..n)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(n - 1),
            |buf, i| {
                buf.clear();
                let pi = points.row(i);
                for j in 0..n {
                    if j != i {
                        buf.push(distance(pi, points.row(j), metric));
                    }
                }
                let (_, kth, _) = buf.select_nth_unstable_by(k - 1, |a, b| a.total_cmp(b));
                *kth
            },
        )
        .collect()
}

/// Minimum spanning tree of the mutual reachability graph, as
/// `(low_vertex, high_vertex, weight)` edges sorted by weight, then by
/// vertex indices.
pub fn mutual_reachability_mst(
    points: &Array2<f64>,
    core: &[f64],
    metric: Metric,
) -> Vec<(usize, usize, f64)> {
    let n = points.nrows();
    if n <= 1 {
        return Vec::new();
    }
    let mreach = |a: usize, b: usize| -> f64 {
        distance(points.row(a), points.row(b), metric).max(core[a]).max(core[b])
    };

    let mut in_tree = vec![false; n];
    let mut best_dist = vec![f64::INFINITY; n];
    let mut best_from = vec![0usize; n];
    in_tree[0] = true;
    best_dist
        .par_iter_mut()
        .enumerate()
        .skip(1)
        .for_each(|(j, d)| *d = mreach(0, j));

    let mut edges = Vec::with_capacity(n - 1);
    for _ in 1..n {
        let (_, next) = (0..n)
            .into_par_iter()
            .filter(|&j| !in_tree[j])
            .map(|j| (best_dist[j], j))
            .reduce(
                || (f64::INFINITY, usize::MAX),
                |a, b| if (a.0, a.1) <= (b.0, b.1) { a } else { b },
            );
        debug_assert!(next != usize::MAX);
        in_tree[next] = true;
        let (a, b) = (best_from[next].min(next), best_from[next].max(next));
        edges.push((a, b, best_dist[next]));

        let in_tree_ref = &in_tree;
        best_dist
            .par_iter_mut()
            .zip(best_from.par_iter_mut())
            .enumerate()
            .for_each(|(j, (d, f))| {
                if !in_tree_ref[j] {
                    let cand = mreach(next, j);
                    if cand < *d {
                        *d = cand;
                        *f = next;
                    }
                }
            });
    }
    edges.sort_by(|a, b| {
        a.2.total_cmp(&b.2).then_with(|| a.0.cmp(&b.0)).then_with(|| a.1.cmp(&b.1))
    });
    edges
}

/// One merge in the single-linkage hierarchy. Nodes `0..n` are points;
/// merge `step` creates node `n + step`.
struct Merge {
    left: usize,
    right: usize,
    dist: f64,
    size: usize,
}

fn single_linkage(n: usize, sorted_edges: &[(usize, usize, f64)]) -> Vec<Merge> {
    let mut parent: Vec<usize> = (0..n).collect();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut sizes: Vec<usize> = vec![1; 2 * n - 1];

    fn find(parent: &mut Vec<usize>, mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }

    let mut merges = Vec::with_capacity(n - 1);
    for &(a, b, dist) in sorted_edges {
        let ra = find(&mut parent, a);
        let rb = find(&mut parent, b);
        debug_assert_ne!(ra, rb, "spanning tree edges never form cycles");
        let node = n + merges.len();
        let (na, nb) = (node_of[ra], node_of[rb]);
        sizes[node] = sizes[na] + sizes[nb];
        merges.push(Merge { left: na, right: nb, dist, size: sizes[node] });
        parent[ra] = rb;
        node_of[rb] = node;
    }
    merges
}

/// Condensed tree: clusters keep their identity through splits that only
/// shed fewer than `min_cluster_size` points.
struct CondensedTree {
    /// (parent cluster, child cluster, lambda at split, child size)
    cluster_rows: Vec<(usize, usize, f64, usize)>,
    /// (parent cluster, point, lambda at which the point leaves)
    point_rows: Vec<(usize, usize, f64)>,
    root: usize,
    next_cluster: usize,
}

const DIST_FLOOR: f64 = 1e-12;

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> CondensedTree {
    let root_node = n + merges.len() - 1;
    let mut relabel: Vec<Option<usize>> = vec![None; n + merges.len()];
    relabel[root_node] = Some(n);
    let mut tree = CondensedTree {
        cluster_rows: Vec::new(),
        point_rows: Vec::new(),
        root: n,
        next_cluster: n + 1,
    };

    let collect_leaves = |start: usize, out: &mut Vec<usize>| {
        let mut stack = vec![start];
        while let Some(node) = stack.pop() {
            if node < n {
                out.push(node);
            } else {
                let m = &merges[node - n];
                stack.push(m.left);
                stack.push(m.right);
            }
        }
    };

    let node_size = |node: usize| if node < n { 1 } else { merges[node - n].size };

    let mut queue = std::collections::VecDeque::new();
    queue.push_back(root_node);
    let mut leaves_buf = Vec::new();
    while let Some(node) = queue.pop_front() {
        if node < n {
            continue;
        }
        let merge = &merges[node - n];
        let cluster = relabel[node].expect("enqueued nodes carry a cluster id");
        let lambda = 1.0 / merge.dist.max(DIST_FLOOR);
        let (ls, rs) = (node_size(merge.left), node_size(merge.right));

        if ls >= min_cluster_size && rs >= min_cluster_size {
            for &child in [merge.left, merge.right].iter() {
                let id = tree.next_cluster;
                tree.next_cluster += 1;
                relabel[child] = Some(id);
                tree.cluster_rows.push((cluster, id, lambda, node_size(child)));
                queue.push_back(child);
            }
        } else if ls < min_cluster_size && rs < min_cluster_size {
            leaves_buf.clear();
            collect_leaves(node, &mut leaves_buf);
            for &p in &leaves_buf {
                tree.point_rows.push((cluster, p, lambda));
            }
        } else {
            let (keep, shed) =
                if ls >= min_cluster_size { (merge.left, merge.right) } else { (merge.right, merge.left) };
            relabel[keep] = Some(cluster);
            queue.push_back(keep);
            leaves_buf.clear();
            collect_leaves(shed, &mut leaves_buf);
            for &p in &leaves_buf {
                tree.point_rows.push((cluster, p, lambda));
            }
        }
    }
    tree
}

/// Excess-of-mass stability per condensed cluster.
fn stabilities(tree: &CondensedTree) -> Vec<f64> {
    let count = tree.next_cluster - tree.root;
    let mut birth = vec![0.0f64; count];
    for &(_, child, lambda, _) in &tree.cluster_rows {
        birth[child - tree.root] = lambda;
    }
    let mut stability = vec![0.0f64; count];
    for &(parent, _, lambda, size) in &tree.cluster_rows {
        stability[parent - tree.root] += (lambda - birth[parent - tree.root]) * size as f64;
    }
    for &(parent, _, lambda) in &tree.point_rows {
        stability[parent - tree.root] += lambda - birth[parent - tree.root];
    }
    stability
}

/// Selects clusters by excess of mass: a parent beats its children when its
/// stability is at least the sum of theirs. The root cannot be selected.
fn select_clusters(tree: &CondensedTree, stability: &[f64]) -> Vec<usize> {
    let count = tree.next_cluster - tree.root;
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); count];
    for &(parent, child, _, _) in &tree.cluster_rows {
        children[parent - tree.root].push(child);
    }

    let mut selected = vec![true; count];
    selected[0] = false;
    let mut score = stability.to_vec();
    for id in (tree.root + 1..tree.next_cluster).rev() {
        let idx = id - tree.root;
        if children[idx].is_empty() {
            continue;
        }
        let child_sum: f64 = children[idx].iter().map(|&c| score[c - tree.root]).sum();
        if child_sum > score[idx] {
            selected[idx] = false;
            score[idx] = child_sum;
        } else {
            let mut stack: Vec<usize> = children[idx].clone();
            while let Some(c) = stack.pop() {
                selected[c - tree.root] = false;
                stack.extend(children[c - tree.root].iter().copied());
            }
        }
    }
    (tree.root..tree.next_cluster).filter(|&c| selected[c - tree.root]).collect()
}

fn label_points(
    n: usize,
    tree: &CondensedTree,
    selected: &[usize],
) -> ClusterLabels {
    let count = tree.next_cluster - tree.root;
    let mut parent_of: Vec<usize> = vec![usize::MAX; count];
    for &(parent, child, _, _) in &tree.cluster_rows {
        parent_of[child - tree.root] = parent;
    }
    let mut label_of_cluster: Vec<i64> = vec![-1; count];
    for (i, &c) in selected.iter().enumerate() {
        label_of_cluster[c - tree.root] = i as i64;
    }

    let mut labels = vec![-1i64; n];
    for &(parent, point, _) in &tree.point_rows {
        let mut cluster = parent;
        loop {
            if label_of_cluster[cluster - tree.root] >= 0 {
                labels[point] = label_of_cluster[cluster - tree.root];
                break;
            }
            let up = parent_of[cluster - tree.root];
            if up == usize::MAX {
                break;
            }
            cluster = up;
        }
    }
    ClusterLabels { labels, n_clusters: selected.len() }
}

/// Runs HDBSCAN over the rows of `points`.
pub fn hdbscan(points: &Array2<f64>, config: &HdbscanConfig) -> Result<ClusterLabels, ClusterError> {
    if config.min_cluster_size < 2 {
        return Err(ClusterError::InvalidConfig(
            "min_cluster_size must be at least 2".into(),
        ));
    }
    check_finite(points)?;
    let n = points.nrows();
    if n == 0 {
        return Ok(ClusterLabels { labels: Vec::new(), n_clusters: 0 });
    }
    if n < config.min_cluster_size {
        return Ok(ClusterLabels { labels: vec![-1; n], n_clusters: 0 });
    }

    let core = core_distances(points, config.effective_min_samples(), config.metric);
    let edges = mutual_reachability_mst(points, &core, config.metric);

    if edges.last().map(|e| e.2 == 0.0).unwrap_or(false) {
        return Ok(ClusterLabels { labels: vec![0; n], n_clusters: 1 });
    }

    let merges = single_linkage(n, &edges);
    let tree = condense(n, &merges, config.min_cluster_size);
    let stability = stabilities(&tree);
    let selected = select_clusters(&tree, &stability);
    Ok(label_points(n, &tree, &selected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn blob(rng: &mut ChaCha8Rng, center: &[f64], spread: f64, count: usize) -> Vec<Vec<f64>> {
        (0..count)
            .map(|_| {
                center
                    .iter()
                    .map(|&c| c + spread * (rng.gen::<f64>() - 0.5))
                    .collect()
            })
            .collect()
    }

    fn to_matrix(rows: Vec<Vec<f64>>) -> Array2<f64> {
        let d = rows[0].len();
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        Array2::from_shape_vec((rows.len(), d), flat).unwrap()
    }

    /// Adjusted Rand index between two labelings (noise treated as its own
    /// label per point pair).
    fn ari(a: &[i64], b: &[i64]) -> f64 {
        assert_eq!(a.len(), b.len());
        let n = a.len();
        let mut both = 0u64;
        let mut in_a = 0u64;
        let mut in_b = 0u64;
        for i in 0..n {
            for j in (i + 1)..n {
                let same_a = a[i] == a[j];
                let same_b = b[i] == b[j];
                if same_a {
                    in_a += 1;
                }
                if same_b {
                    in_b += 1;
                }
                if same_a && same_b {
                    both += 1;
                }
            }
        }
        let pairs = (n * (n - 1) / 2) as f64;
        let expected = in_a as f64 * in_b as f64 / pairs;
        let max_index = (in_a + in_b) as f64 / 2.0;
        if (max_index - expected).abs() < 1e-12 {
            return 1.0;
        }
        (both as f64 - expected) / (max_index - expected)
    }

    #[test]
    fn core_distance_uses_other_points_only() {
        let points = array![[0.0], [1.0], [10.0]];
        let core = core_distances(&points, 2, Metric::Euclidean);
        assert_eq!(core, vec![10.0, 9.0, 10.0]);
    }

    #[test]
    fn core_distance_clamps_when_neighbors_run_out() {
        let points = array![[0.0], [3.0]];
        let core = core_distances(&points, 5, Metric::Euclidean);
        assert_eq!(core, vec![3.0, 3.0]);
    }

    #[test]
    fn mst_spans_with_mutual_reachability_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut rows = blob(&mut rng, &[0.0, 0.0], 2.0, 12);
        rows.extend(blob(&mut rng, &[8.0, 8.0], 2.0, 12));
        let points = to_matrix(rows);
        let core = core_distances(&points, 3, Metric::Euclidean);
        let edges = mutual_reachability_mst(&points, &core, Metric::Euclidean);

        assert_eq!(edges.len(), points.nrows() - 1);
        let mut seen = vec![false; points.nrows()];
        seen[0] = true;
        for &(a, b, w) in &edges {
            let base = distance(points.row(a), points.row(b), Metric::Euclidean);
            let expect = base.max(core[a]).max(core[b]);
            assert!((w - expect).abs() < 1e-12);
            seen[a] = true;
            seen[b] = true;
        }
        assert!(seen.iter().all(|&s| s), "tree must touch every vertex");
        for pair in edges.windows(2) {
            assert!(pair[0].2 <= pair[1].2, "edges sorted by weight");
        }
    }

    #[test]
    fn two_separated_blobs_are_found() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut rows = blob(&mut rng, &[0.0, 0.0], 1.0, 30);
        rows.extend(blob(&mut rng, &[20.0, 0.0], 1.0, 30));
        let points = to_matrix(rows);
        let config = HdbscanConfig::new(8, None, Metric::Euclidean);
        let result = hdbscan(&points, &config).unwrap();

        assert_eq!(result.n_clusters, 2);
        let truth: Vec<i64> = (0..60).map(|i| if i < 30 { 0 } else { 1 }).collect();
        let score = ari(&result.labels, &truth);
        assert!(score > 0.95, "ari {score}");
    }

    #[test]
    fn three_blobs_with_uniform_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut rows = blob(&mut rng, &[0.0, 0.0], 1.0, 40);
        rows.extend(blob(&mut rng, &[15.0, 0.0], 1.0, 40));
        rows.extend(blob(&mut rng, &[0.0, 15.0], 1.0, 40));
        for _ in 0..10 {
            rows.push(vec![rng.gen::<f64>() * 30.0 - 7.0, rng.gen::<f64>() * 30.0 - 7.0]);
        }
        let points = to_matrix(rows);
        let config = HdbscanConfig::new(10, None, Metric::Euclidean);
        let result = hdbscan(&points, &config).unwrap();
        assert_eq!(result.n_clusters, 3, "noise {}", result.n_noise());

        let mut truth: Vec<i64> = Vec::new();
        truth.extend(std::iter::repeat(0).take(40));
        truth.extend(std::iter::repeat(1).take(40));
        truth.extend(std::iter::repeat(2).take(40));
        truth.extend(std::iter::repeat(-1).take(10));
        let core: Vec<(i64, i64)> = result
            .labels
            .iter()
            .zip(&truth)
            .filter(|&(_, &t)| t >= 0)
            .map(|(&l, &t)| (l, t))
            .collect();
        let (mine, theirs): (Vec<i64>, Vec<i64>) = core.into_iter().unzip();
        assert!(ari(&mine, &theirs) > 0.9);
    }

    #[test]
    fn identical_points_form_one_cluster() {
        let points = Array2::from_elem((20, 3), 1.5);
        let config = HdbscanConfig::new(5, None, Metric::Euclidean);
        let result = hdbscan(&points, &config).unwrap();
        assert_eq!(result.n_clusters, 1);
        assert!(result.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn too_few_points_are_all_noise() {
        let points = Array2::from_elem((4, 2), 0.0);
        let config = HdbscanConfig::new(5, None, Metric::Euclidean);
        let result = hdbscan(&points, &config).unwrap();
        assert_eq!(result.labels, vec![-1; 4]);
        assert_eq!(result.n_clusters, 0);
    }

    #[test]
    fn labels_are_permutation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut rows = blob(&mut rng, &[0.0, 0.0], 1.5, 25);
        rows.extend(blob(&mut rng, &[12.0, 5.0], 1.5, 25));
        rows.extend(blob(&mut rng, &[-6.0, 14.0], 1.5, 25));
        let n = rows.len();

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let permuted: Vec<Vec<f64>> = order.iter().map(|&i| rows[i].clone()).collect();

        let config = HdbscanConfig::new(8, None, Metric::Euclidean);
        let original = hdbscan(&to_matrix(rows), &config).unwrap();
        let shuffled = hdbscan(&to_matrix(permuted), &config).unwrap();

        let remapped: Vec<i64> = order.iter().map(|&i| original.labels[i]).collect();
        assert!(
            ari(&remapped, &shuffled.labels) > 0.999,
            "partitions must agree up to label names"
        );
    }

    #[test]
    fn non_finite_points_are_rejected() {
        let mut points = Array2::zeros((10, 2));
        points[[3, 1]] = f64::NAN;
        let config = HdbscanConfig::new(3, None, Metric::Euclidean);
        match hdbscan(&points, &config) {
            Err(ClusterError::NonFinite { row: 3, col: 1 }) => {}
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn min_cluster_size_below_two_is_rejected() {
        let points = Array2::zeros((10, 2));
        let config = HdbscanConfig { min_cluster_size: 1, min_samples: None, metric: Metric::Euclidean };
        assert!(matches!(hdbscan(&points, &config), Err(ClusterError::InvalidConfig(_))));
    }

    #[test]
    fn cosine_metric_separates_directions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut rows = Vec::new();
        for i in 0..40 {
            let (base, jitter) = if i < 20 { ([1.0, 0.0, 0.0], 0.05) } else { ([0.0, 0.0, 1.0], 0.05) };
            let v: Vec<f64> =
                base.iter().map(|&b| b + jitter * (rng.gen::<f64>() - 0.5)).collect();
            let norm: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
        let config = HdbscanConfig::new(6, None, Metric::Cosine);
        let result = hdbscan(&to_matrix(rows), &config).unwrap();
        assert_eq!(result.n_clusters, 2);
        let truth: Vec<i64> = (0..40).map(|i| if i < 20 { 0 } else { 1 }).collect();
        assert!(ari(&result.labels, &truth) > 0.95);
    }

    #[test]
    fn reduce_preserves_distances_when_data_is_planar() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut rows = Vec::new();
        for _ in 0..30 {
            let (a, b) = (rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0);
            rows.push(vec![a, b, 2.0 * a - b, a + 3.0 * b, 0.5 * a]);
        }
        let points = to_matrix(rows);
        let reduced = reduce(&points, &ReduceConfig { method: ReduceMethod::Svd, dim: 2, seed: 0 });
        assert_eq!(reduced.dim(), (30, 2));
        for i in 0..30 {
            for j in (i + 1)..30 {
                let orig = distance(points.row(i), points.row(j), Metric::Euclidean);
                let red = distance(reduced.row(i), reduced.row(j), Metric::Euclidean);
                assert!(
                    (orig - red).abs() < 1e-8,
                    "distance ({i},{j}) changed: {orig} vs {red}"
                );
            }
        }
    }

    #[test]
    fn reduce_none_and_wide_requests_pass_through() {
        let points = array![[1.0, 2.0], [3.0, 4.0]];
        let none = reduce(&points, &ReduceConfig { method: ReduceMethod::None, dim: 1, seed: 0 });
        assert_eq!(none, points);
        let wide = reduce(&points, &ReduceConfig { method: ReduceMethod::Svd, dim: 7, seed: 0 });
        assert_eq!(wide, points);
    }

    #[test]
    fn reduce_is_seeded_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> =
            (0..40).map(|_| (0..16).map(|_| rng.gen::<f64>()).collect()).collect();
        let points = to_matrix(rows);
        let config = ReduceConfig { method: ReduceMethod::Svd, dim: 4, seed: 9 };
        assert_eq!(reduce(&points, &config), reduce(&points, &config));
    }

    #[test]
    fn config_constructions_are_counted() {
        let before = instrument::build_counters();
        let _cfg = HdbscanConfig::new(15, None, Metric::Euclidean);
        let delta = instrument::build_counters().delta_since(&before);
        assert!(delta.cluster_config_builds >= 1);
    }
}
