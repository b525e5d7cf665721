//! Element-adjacency (dual) graph of a tetrahedral mesh.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::TetMesh;
use crate::{Error, Result};

/// Undirected simple graph stored as sorted adjacency lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DualGraph {
    neighbors: Vec<Vec<usize>>,
    n_edges: usize,
}

impl DualGraph {
    /// Builds a graph from undirected edges. Self-loops and duplicate edges
    /// are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Contract(format!("edge ({a},{b}) out of range for n={n}")));
            }
            if a == b {
                return Err(Error::Contract(format!("self-loop at node {a}")));
            }
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for (i, nb) in neighbors.iter_mut().enumerate() {
            nb.sort_unstable();
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Contract(format!("duplicate edge at node {i}")));
            }
        }
        Ok(DualGraph {
            neighbors,
            n_edges: edges.len(),
        })
    }

    fn from_sorted_lists(neighbors: Vec<Vec<usize>>) -> Self {
        let n_edges = neighbors.iter().map(Vec::len).sum::<usize>() / 2;
        DualGraph { neighbors, n_edges }
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    /// Degree vector D.
    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    /// Undirected edges `(i, j)` with `i < j`, lexicographically ordered.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges);
        for (i, nb) in self.neighbors.iter().enumerate() {
            out.extend(nb.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// Number of edges whose endpoints carry different labels.
    pub fn cut<L: PartialEq>(&self, labels: &[L]) -> usize {
        self.edges()
            .into_iter()
            .filter(|&(i, j)| labels[i] != labels[j])
            .count()
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut neighbors = vec![Vec::new(); self.n()];
        for (i, nb) in self.neighbors.iter().enumerate() {
            let mut mapped: Vec<usize> = nb.iter().map(|&j| perm[j]).collect();
            mapped.sort_unstable();
            neighbors[perm[i]] = mapped;
        }
        DualGraph {
            neighbors,
            n_edges: self.n_edges,
        }
    }

    /// Subgraph induced by `subset`, renumbered densely in `subset` order.
    pub fn induced_subgraph(&self, subset: &[usize]) -> Result<InducedSubgraph> {
        if subset.is_empty() {
            return Err(Error::Contract("induced subgraph of an empty node set".into()));
        }
        let mut to_local = vec![usize::MAX; self.n()];
        for (local, &g) in subset.iter().enumerate() {
            if g >= self.n() {
                return Err(Error::Contract(format!("node {g} out of range")));
            }
            if to_local[g] != usize::MAX {
                return Err(Error::Contract(format!("node {g} listed twice")));
            }
            to_local[g] = local;
        }
        let neighbors = subset
            .iter()
            .map(|&g| {
                let mut nb: Vec<usize> = self.neighbors[g]
                    .iter()
                    .filter_map(|&j| (to_local[j] != usize::MAX).then(|| to_local[j]))
                    .collect();
                nb.sort_unstable();
                nb
            })
            .collect();
        Ok(InducedSubgraph {
            graph: DualGraph::from_sorted_lists(neighbors),
            to_parent: subset.to_vec(),
        })
    }

    /// Connected components of the subgraph induced by `subset`.
    ///
    /// Returns one label per entry of `subset` (same order), numbered
    /// `0..C` in order of first appearance. Uses an explicit stack.
    pub fn connected_components(&self, subset: &[usize]) -> Vec<usize> {
        const NONE: usize = usize::MAX;
        let mut slot = HashMap::with_capacity(subset.len());
        for (k, &g) in subset.iter().enumerate() {
            slot.insert(g, k);
        }
        let mut label = vec![NONE; subset.len()];
        let mut next = 0;
        let mut stack = Vec::new();
        for start in 0..subset.len() {
            if label[start] != NONE {
                continue;
            }
            label[start] = next;
            stack.push(start);
            while let Some(k) = stack.pop() {
                for j in &self.neighbors[subset[k]] {
                    if let Some(&kj) = slot.get(j) {
                        if label[kj] == NONE {
                            label[kj] = next;
                            stack.push(kj);
                        }
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Component labels over the whole graph.
    pub fn components(&self) -> Vec<usize> {
        let all: Vec<usize> = (0..self.n()).collect();
        self.connected_components(&all)
    }

    pub fn is_connected(&self) -> bool {
        self.n() == 0 || self.components().iter().all(|&c| c == 0)
    }

    /// Edge list as CSV `i,j` (0-based, `i < j`).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j\n");
        for (i, j) in self.edges() {
            let _ = writeln!(s, "{i},{j}");
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// An induced subgraph and the map from its nodes back to the parent's.
#[derive(Clone, Debug)]
pub struct InducedSubgraph {
    pub graph: DualGraph,
    pub to_parent: Vec<usize>,
}

/// Face-adjacency graph: node `i` is tet `i`; nodes are joined when their
/// tets share a triangular face.
pub fn extract_dual_graph(mesh: &TetMesh) -> Result<DualGraph> {
    let n = mesh.n_tets();
    let mut faces: Vec<([usize; 3], usize)> = Vec::with_capacity(4 * n);
    for (t, tet) in mesh.tets().iter().enumerate() {
        for skip in 0..4 {
            let mut f = [0usize; 3];
            let mut k = 0;
            for (s, &v) in tet.iter().enumerate() {
                if s != skip {
                    f[k] = v;
                    k += 1;
                }
            }
            f.sort_unstable();
            faces.push((f, t));
        }
    }
    faces.sort_unstable();

    let mut neighbors = vec![Vec::new(); n];
    let mut i = 0;
    while i < faces.len() {
        let mut j = i + 1;
        while j < faces.len() && faces[j].0 == faces[i].0 {
            j += 1;
        }
        match j - i {
            1 => {}
            2 => {
                let (a, b) = (faces[i].1, faces[i + 1].1);
                if a != b {
                    neighbors[a].push(b);
                    neighbors[b].push(a);
                }
            }
            _ => return Err(Error::NonManifold { face: faces[i].0 }),
        }
        i = j;
    }
    for nb in &mut neighbors {
        nb.sort_unstable();
        nb.dedup();
    }
    Ok(DualGraph::from_sorted_lists(neighbors))
}
