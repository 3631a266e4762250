//! Graph data model: CSR adjacency, features, multi-hot labels, and the
//! symmetric-normalized propagation operator.

use crate::error::{Error, Result};
use crate::tensor::Tensor2;

/// Immutable node/edge store. Undirected edges are kept as two directed arcs
/// in CSR form with sorted column indices.
#[derive(Debug, Clone)]
pub struct Graph {
    pub num_nodes: usize,
    /// Number of stored arcs (2x the undirected edge count, self-loops excluded).
    pub num_arcs: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    /// N x d node features.
    pub features: Tensor2,
    /// N x C multi-hot labels (entries 0.0 or 1.0).
    pub labels: Tensor2,
}

impl Graph {
    /// Build a graph from an undirected edge list. Edges are symmetrized,
    /// deduplicated, and self-loops dropped (the canonical self-loop is added
    /// later by normalization).
    pub fn from_edges(
        num_nodes: usize,
        edges: &[(usize, usize)],
        features: Tensor2,
        labels: Tensor2,
    ) -> Result<Graph> {
        if features.rows != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "features have {} rows for {} nodes",
                features.rows, num_nodes
            )));
        }
        if labels.rows != num_nodes {
            return Err(Error::InvalidGraph(format!(
                "labels have {} rows for {} nodes",
                labels.rows, num_nodes
            )));
        }
        if labels.data.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::InvalidGraph("labels must be 0/1".into()));
        }
        let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        for &(u, v) in edges {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) out of range for {num_nodes} nodes"
                )));
            }
            if u == v {
                continue;
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        let mut row_offsets = Vec::with_capacity(num_nodes + 1);
        let mut col_indices = Vec::new();
        row_offsets.push(0);
        for list in neighbors.iter_mut() {
            list.sort_unstable();
            list.dedup();
            col_indices.extend_from_slice(list);
            row_offsets.push(col_indices.len());
        }
        Ok(Graph {
            num_nodes,
            num_arcs: col_indices.len(),
            row_offsets,
            col_indices,
            features,
            labels,
        })
    }

    pub fn num_features(&self) -> usize {
        self.features.cols
    }

    pub fn num_labels(&self) -> usize {
        self.labels.cols
    }

    /// Undirected edge count.
    pub fn num_edges(&self) -> usize {
        self.num_arcs / 2
    }

    pub fn degree(&self, node: usize) -> usize {
        self.row_offsets[node + 1] - self.row_offsets[node]
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[node]..self.row_offsets[node + 1]]
    }

    /// Undirected edge list with u < v, in sorted order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.num_edges());
        for u in 0..self.num_nodes {
            for &v in self.neighbors(u) {
                if u < v {
                    edges.push((u, v));
                }
            }
        }
        edges
    }
}

/// Symmetric-normalized adjacency with self-loops in CSR form:
/// entry (i,j) = 1/sqrt((d_i+1)(d_j+1)).
#[derive(Debug, Clone)]
pub struct NormalizedAdjacency {
    pub num_nodes: usize,
    pub row_offsets: Vec<usize>,
    pub col_indices: Vec<usize>,
    pub values: Vec<f64>,
}

/// Computes D^(-1/2)(A+I)D^(-1/2) with D the degree matrix of A+I.
/// Isolated nodes keep a single self-loop of weight 1.
pub fn normalize_adjacency(graph: &Graph) -> NormalizedAdjacency {
    let n = graph.num_nodes;
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| 1.0 / ((graph.degree(i) + 1) as f64).sqrt())
        .collect();
    let mut row_offsets = Vec::with_capacity(n + 1);
    let mut col_indices = Vec::with_capacity(graph.num_arcs + n);
    let mut values = Vec::with_capacity(graph.num_arcs + n);
    row_offsets.push(0);
    for i in 0..n {
        // merge sorted neighbor list with the self-loop at position i
        let mut placed_self = false;
        for &j in graph.neighbors(i) {
            if !placed_self && j > i {
                col_indices.push(i);
                values.push(inv_sqrt[i] * inv_sqrt[i]);
                placed_self = true;
            }
            col_indices.push(j);
            values.push(inv_sqrt[i] * inv_sqrt[j]);
        }
        if !placed_self {
            col_indices.push(i);
            values.push(inv_sqrt[i] * inv_sqrt[i]);
        }
        row_offsets.push(col_indices.len());
    }
    NormalizedAdjacency {
        num_nodes: n,
        row_offsets,
        col_indices,
        values,
    }
}

impl NormalizedAdjacency {
    /// Sparse-dense product: row i of the result is sum_j A[i][j] * dense[j].
    /// Accumulation order is fixed (CSR order) so results are bit-stable.
    pub fn spmm(&self, dense: &Tensor2) -> Result<Tensor2> {
        if dense.rows != self.num_nodes {
            return Err(Error::ShapeMismatch(format!(
                "spmm: adjacency is {}x{} but dense has {} rows",
                self.num_nodes, self.num_nodes, dense.rows
            )));
        }
        let h = dense.cols;
        let mut out = Tensor2::zeros(self.num_nodes, h);
        for i in 0..self.num_nodes {
            let out_row = &mut out.data[i * h..(i + 1) * h];
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                let j = self.col_indices[k];
                let w = self.values[k];
                let src = &dense.data[j * h..(j + 1) * h];
                for (o, &s) in out_row.iter_mut().zip(src) {
                    *o += w * s;
                }
            }
        }
        Ok(out)
    }

    pub fn to_dense(&self) -> Tensor2 {
        let n = self.num_nodes;
        let mut t = Tensor2::zeros(n, n);
        for i in 0..n {
            for k in self.row_offsets[i]..self.row_offsets[i + 1] {
                t.set(i, self.col_indices[k], self.values[k]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn featureless(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edges(n, edges, Tensor2::zeros(n, 1), Tensor2::zeros(n, 1)).unwrap()
    }

    /// Dense reference: D^(-1/2)(A+I)D^(-1/2) computed entrywise.
    fn dense_normalized(g: &Graph) -> Tensor2 {
        let n = g.num_nodes;
        let mut a = Tensor2::eye(n);
        for u in 0..n {
            for &v in g.neighbors(u) {
                a.set(u, v, 1.0);
            }
        }
        let deg: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
        let mut out = Tensor2::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, a.get(i, j) / (deg[i] * deg[j]).sqrt());
            }
        }
        out
    }

    #[test]
    fn two_node_edge_gives_quarter_split() {
        let g = featureless(2, &[(0, 1)]);
        let adj = normalize_adjacency(&g);
        let dense = adj.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                assert!((dense.get(i, j) - 0.5).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn isolated_node_is_unit_self_loop() {
        let g = featureless(1, &[]);
        let adj = normalize_adjacency(&g);
        assert_eq!(adj.col_indices, vec![0]);
        assert!((adj.values[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn three_node_path_hand_values() {
        let g = featureless(3, &[(0, 1), (1, 2)]);
        let adj = normalize_adjacency(&g).to_dense();
        assert!((adj.get(0, 1) - 1.0 / 6.0f64.sqrt()).abs() < 1e-12);
        assert!((adj.get(1, 1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn self_loops_in_input_are_dropped() {
        let g = featureless(2, &[(0, 0), (0, 1)]);
        assert_eq!(g.num_arcs, 2);
        let adj = normalize_adjacency(&g);
        // each row: self-loop + neighbor
        assert_eq!(adj.values.len(), 4);
    }

    #[test]
    fn duplicate_edges_deduplicated() {
        let g = featureless(3, &[(0, 1), (1, 0), (0, 1)]);
        assert_eq!(g.num_arcs, 2);
    }

    #[test]
    fn normalization_matches_dense_reference_randomized() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..40 {
            let n = rng.gen_range(1..=32);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.2) {
                        edges.push((u, v));
                    }
                }
            }
            let g = featureless(n, &edges);
            let got = normalize_adjacency(&g).to_dense();
            let want = dense_normalized(&g);
            assert!(got.max_abs_diff(&want) < 1e-12);
        }
    }

    #[test]
    fn spmm_identity_and_two_node() {
        let g = featureless(2, &[(0, 1)]);
        let adj = normalize_adjacency(&g);
        let x = Tensor2::from_rows(&[vec![2.0], vec![0.0]]);
        let y = adj.spmm(&x).unwrap();
        assert!((y.get(0, 0) - 1.0).abs() < 1e-15);
        assert!((y.get(1, 0) - 1.0).abs() < 1e-15);

        // isolated nodes: adjacency is the identity
        let gi = featureless(3, &[]);
        let adji = normalize_adjacency(&gi);
        let xi = Tensor2::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        assert!(adji.spmm(&xi).unwrap().max_abs_diff(&xi) < 1e-15);
    }

    #[test]
    fn spmm_matches_dense_matmul_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..=8);
            let mut edges = Vec::new();
            for u in 0..n {
                for v in (u + 1)..n {
                    if rng.gen_bool(0.4) {
                        edges.push((u, v));
                    }
                }
            }
            let g = featureless(n, &edges);
            let adj = normalize_adjacency(&g);
            let h = rng.gen_range(1..=3);
            let x = Tensor2 {
                rows: n,
                cols: h,
                data: (0..n * h).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let fast = adj.spmm(&x).unwrap();
            let slow = adj.to_dense().matmul(&x).unwrap();
            assert!(fast.max_abs_diff(&slow) < 1e-12);
        }
    }

    #[test]
    fn spmm_rejects_row_mismatch() {
        let g = featureless(2, &[(0, 1)]);
        let adj = normalize_adjacency(&g);
        assert!(adj.spmm(&Tensor2::zeros(3, 1)).is_err());
    }

    #[test]
    fn out_of_range_edge_rejected() {
        let r = Graph::from_edges(2, &[(0, 5)], Tensor2::zeros(2, 1), Tensor2::zeros(2, 1));
        assert!(r.is_err());
    }
}
