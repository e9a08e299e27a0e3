use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{euclidean, Matrix, NumericsError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Euclidean,
    /// Number of coordinates that differ. Meant for {0,1}-valued rows.
    Hamming,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Euclidean => euclidean(a, b),
            Metric::Hamming => a.iter().zip(b).filter(|(x, y)| x != y).count() as f64,
        }
    }
}

/// k nearest neighbors of every point, excluding the point itself.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborGraph {
    pub k: usize,
    pub indices: Vec<Vec<usize>>,
    pub distances: Vec<Vec<f64>>,
}

impl NeighborGraph {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Undirected adjacency: an edge is kept if present in either direction.
    pub fn symmetrized(&self) -> Vec<Vec<(usize, f64)>> {
        let n = self.len();
        let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for i in 0..n {
            for (&j, &d) in self.indices[i].iter().zip(&self.distances[i]) {
                adj[i].push((j, d));
                adj[j].push((i, d));
            }
        }
        for list in &mut adj {
            list.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
            list.dedup_by_key(|e| e.0);
        }
        adj
    }

    /// Connected components of the symmetrized graph, largest first
    /// (ties by smallest member). Each component's members are sorted.
    pub fn components(&self) -> Vec<Vec<usize>> {
        components_of(&self.symmetrized())
    }
}

#[derive(PartialEq)]
struct Candidate {
    dist: f64,
    idx: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist.total_cmp(&other.dist).then(self.idx.cmp(&other.idx))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Exact k-NN graph by pairwise scan. Ties in distance go to the smaller row index.
pub fn knn_graph(points: &Matrix, k: usize, metric: Metric) -> Result<NeighborGraph, NumericsError> {
    let n = points.rows();
    if k >= n {
        return Err(NumericsError::KTooLarge { k, n });
    }
    let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..n)
        .into_par_iter()
        .map(|i| nearest(points, points.row(i), k, metric, Some(i)))
        .collect();
    let (indices, distances) = rows.into_iter().unzip();
    Ok(NeighborGraph { k, indices, distances })
}

/// The `k` rows of `points` closest to `query`, optionally skipping one row.
/// Ordered by (distance, index).
pub fn nearest(
    points: &Matrix,
    query: &[f64],
    k: usize,
    metric: Metric,
    skip: Option<usize>,
) -> (Vec<usize>, Vec<f64>) {
    // Max-heap holding the best k seen so far.
    let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
    if k > 0 {
        for j in 0..points.rows() {
            if Some(j) == skip {
                continue;
            }
            let cand = Candidate {
                dist: metric.distance(query, points.row(j)),
                idx: j,
            };
            if heap.len() < k {
                heap.push(cand);
            } else if let Some(top) = heap.peek() {
                if cand < *top {
                    heap.pop();
                    heap.push(cand);
                }
            }
        }
    }
    let sorted = heap.into_sorted_vec();
    sorted.into_iter().map(|c| (c.idx, c.dist)).unzip()
}

/// All-pairs shortest path lengths over the symmetrized graph (Dijkstra per source).
pub fn geodesic_distances(g: &NeighborGraph) -> Result<Matrix, NumericsError> {
    let adj = g.symmetrized();
    let comps = components_of(&adj);
    if comps.len() > 1 {
        return Err(NumericsError::Disconnected {
            component_sizes: comps.iter().map(Vec::len).collect(),
        });
    }
    Ok(shortest_paths(&adj))
}

/// Shortest paths on an explicit adjacency list; unreachable pairs are `+inf`.
pub(crate) fn shortest_paths(adj: &[Vec<(usize, f64)>]) -> Matrix {
    let n = adj.len();
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|s| dijkstra(adj, s)).collect();
    let mut data = Vec::with_capacity(n * n);
    for r in rows {
        data.extend(r);
    }
    Matrix::from_raw(n, n, data)
}

fn dijkstra(adj: &[Vec<(usize, f64)>], source: usize) -> Vec<f64> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(std::cmp::Reverse(Candidate { dist: 0.0, idx: source }));
    while let Some(std::cmp::Reverse(Candidate { dist: d, idx: u })) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(std::cmp::Reverse(Candidate { dist: nd, idx: v }));
            }
        }
    }
    dist
}

pub(crate) fn components_of(adj: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut label = vec![usize::MAX; n];
    let mut comps = Vec::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        let id = comps.len();
        let mut members = vec![start];
        label[start] = id;
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if label[v] == usize::MAX {
                    label[v] = id;
                    members.push(v);
                    stack.push(v);
                }
            }
        }
        members.sort_unstable();
        comps.push(members);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph_from_edges(n: usize, edges: &[(usize, usize, f64)]) -> NeighborGraph {
        let mut indices = vec![Vec::new(); n];
        let mut distances = vec![Vec::new(); n];
        for &(a, b, w) in edges {
            indices[a].push(b);
            distances[a].push(w);
        }
        NeighborGraph { k: 1, indices, distances }
    }

    #[test]
    fn collinear_neighbors() {
        let p = Matrix::from_rows(&[[0.0], [1.0], [3.0]]).unwrap();
        let g = knn_graph(&p, 1, Metric::Euclidean).unwrap();
        assert_eq!(g.indices, vec![vec![1], vec![0], vec![1]]);
    }

    #[test]
    fn coincident_points_pick_each_other() {
        let p = Matrix::from_rows(&[[2.0, 2.0], [2.0, 2.0]]).unwrap();
        let g = knn_graph(&p, 1, Metric::Euclidean).unwrap();
        assert_eq!(g.indices, vec![vec![1], vec![0]]);
        assert_eq!(g.distances, vec![vec![0.0], vec![0.0]]);
    }

    #[test]
    fn k_too_large() {
        let p = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert!(matches!(knn_graph(&p, 2, Metric::Euclidean), Err(NumericsError::KTooLarge { .. })));
    }

    #[test]
    fn hamming_counts_differences() {
        assert_eq!(Metric::Hamming.distance(&[1.0, 0.0, 1.0], &[0.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn path_and_triangle() {
        let g = graph_from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let d = geodesic_distances(&g).unwrap();
        assert_eq!(d[(0, 2)], 2.0);
        assert_eq!(d[(2, 0)], 2.0);
        let t = graph_from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]);
        let d = geodesic_distances(&t).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(d[(i, j)], if i == j { 0.0 } else { 1.0 });
            }
        }
    }

    #[test]
    fn disconnected_reports_sizes() {
        let g = graph_from_edges(5, &[(0, 1, 1.0), (2, 3, 1.0), (3, 4, 1.0)]);
        match geodesic_distances(&g) {
            Err(NumericsError::Disconnected { component_sizes }) => assert_eq!(component_sizes, vec![3, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
