//! Weighted CSR graphs for the multilevel bisector.

use crate::graph::DualGraph;

#[derive(Clone, Debug)]
pub(crate) struct WGraph {
    pub xadj: Vec<usize>,
    pub adj: Vec<usize>,
    pub ew: Vec<i64>,
    pub vw: Vec<i64>,
}

impl WGraph {
    pub fn unit(g: &DualGraph) -> Self {
        let mut xadj = Vec::with_capacity(g.n() + 1);
        let mut adj = Vec::new();
        xadj.push(0);
        for i in 0..g.n() {
            adj.extend_from_slice(g.neighbors(i));
            xadj.push(adj.len());
        }
        WGraph {
            ew: vec![1; adj.len()],
            vw: vec![1; g.n()],
            xadj,
            adj,
        }
    }

    pub fn n(&self) -> usize {
        self.vw.len()
    }

    pub fn total_weight(&self) -> i64 {
        self.vw.iter().sum()
    }

    pub fn edges(&self, u: usize) -> impl Iterator<Item = (usize, i64)> + '_ {
        let r = self.xadj[u]..self.xadj[u + 1];
        self.adj[r.clone()].iter().copied().zip(self.ew[r].iter().copied())
    }

    /// Weighted cut of a 0/1 labelling.
    pub fn cut(&self, labels: &[u8]) -> i64 {
        let mut c = 0;
        for u in 0..self.n() {
            for (v, w) in self.edges(u) {
                if u < v && labels[u] != labels[v] {
                    c += w;
                }
            }
        }
        c
    }

    /// Weight of side 0.
    pub fn side0_weight(&self, labels: &[u8]) -> i64 {
        self.vw.iter().zip(labels).filter(|(_, &l)| l == 0).map(|(w, _)| w).sum()
    }

    /// Contracts `cmap` groups; edge weights between groups are summed.
    pub fn contract(&self, cmap: &[usize], nc: usize) -> WGraph {
        let mut vw = vec![0; nc];
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); nc];
        for u in 0..self.n() {
            vw[cmap[u]] += self.vw[u];
            members[cmap[u]].push(u);
        }
        let mut xadj = Vec::with_capacity(nc + 1);
        let mut adj = Vec::new();
        let mut ew = Vec::new();
        let mut slot = vec![usize::MAX; nc];
        xadj.push(0);
        for (c, mem) in members.iter().enumerate() {
            let start = adj.len();
            for &u in mem {
                for (v, w) in self.edges(u) {
                    let cv = cmap[v];
                    if cv == c {
                        continue;
                    }
                    if slot[cv] == usize::MAX || slot[cv] < start {
                        slot[cv] = adj.len();
                        adj.push(cv);
                        ew.push(w);
                    } else {
                        ew[slot[cv]] += w;
                    }
                }
            }
            xadj.push(adj.len());
        }
        WGraph { xadj, adj, ew, vw }
    }
}
