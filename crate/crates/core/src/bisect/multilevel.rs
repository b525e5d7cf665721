//! Multilevel bisection: heavy-edge coarsening, greedy graph growing, FM
//! refinement during uncoarsening.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use super::fm::{refine, MAX_PASSES};
use super::wgraph::WGraph;
use super::{check_rows, BisectionLabels, BisectionModel};
use crate::features::FeatureMatrix;
use crate::graph::DualGraph;
use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_BALANCE: f64 = 0.1;
const COARSEST: usize = 30;
const INIT_TRIALS: usize = 4;

/// Admissible weight range of side 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    pub lo: i64,
    pub hi: i64,
}

impl Bounds {
    pub(crate) fn infeasibility(self, w0: i64) -> i64 {
        if w0 < self.lo {
            self.lo - w0
        } else if w0 > self.hi {
            w0 - self.hi
        } else {
            0
        }
    }
}

/// Integer bounds for `|S₀| / total ∈ [0.5 − eps, 0.5 + eps]`, widened to the
/// most balanced split when the interval holds no integer.
pub fn balance_bounds(total: i64, eps: f64) -> Bounds {
    let t = total as f64;
    let mut lo = ((0.5 - eps) * t - 1e-9).ceil() as i64;
    let mut hi = ((0.5 + eps) * t + 1e-9).floor() as i64;
    lo = lo.min(total / 2);
    hi = hi.max((total + 1) / 2);
    if total >= 2 {
        lo = lo.max(1);
        hi = hi.min(total - 1);
    }
    Bounds { lo, hi }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MultilevelBisector {
    pub balance: f64,
}

impl Default for MultilevelBisector {
    fn default() -> Self {
        MultilevelBisector { balance: DEFAULT_BALANCE }
    }
}

impl BisectionModel for MultilevelBisector {
    fn name(&self) -> &str {
        "multilevel"
    }

    fn bisect(&self, graph: &DualGraph, x: &FeatureMatrix, seed: u64) -> Result<BisectionLabels> {
        check_rows(graph, x)?;
        let n = graph.n();
        if n <= 1 {
            return BisectionLabels::new(vec![0; n]);
        }
        let comp = graph.components();
        let n_comp = comp.iter().max().map_or(0, |m| m + 1);
        if n_comp == 1 {
            return multilevel_bisect(graph, self.balance, seed);
        }
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
        for (i, &c) in comp.iter().enumerate() {
            members[c].push(i);
        }
        members.sort_by_key(|m| Reverse(m.len()));
        let b = balance_bounds(n as i64, self.balance);
        let mut labels = vec![0u8; n];
        let mut w = [0usize; 2];
        let mut rest = &members[..];
        if members[0].len() as i64 > b.hi {
            let sub = graph.induced_subgraph(&members[0])?;
            let inner = if sub.graph.n() >= 2 {
                multilevel_bisect(&sub.graph, self.balance, seed)?
            } else {
                BisectionLabels::new(vec![0])?
            };
            for (local, &parent) in sub.to_parent.iter().enumerate() {
                labels[parent] = inner.get(local);
                w[inner.get(local) as usize] += 1;
            }
            rest = &members[1..];
        }
        for m in rest {
            let side = usize::from(w[1] < w[0]);
            for &i in m {
                labels[i] = side as u8;
            }
            w[side] += m.len();
        }
        BisectionLabels::new(labels)
    }
}

/// Multilevel bisection of a connected graph with `n ≥ 2` nodes.
pub fn multilevel_bisect(graph: &DualGraph, eps: f64, seed: u64) -> Result<BisectionLabels> {
    if graph.n() < 2 {
        return Err(Error::Contract(format!("multilevel bisection needs n >= 2, got {}", graph.n())));
    }
    if !(0.0..0.5).contains(&eps) {
        return Err(Error::Config(format!("balance tolerance {eps} outside [0, 0.5)")));
    }
    if !graph.is_connected() {
        return Err(Error::Contract("multilevel bisection needs a connected graph; split by components first".into()));
    }
    let mut rng = seed::rng(seed);
    let fine = WGraph::unit(graph);
    let b = balance_bounds(fine.total_weight(), eps);
    let max_vw = ((fine.total_weight() as f64 * 1.5 / COARSEST as f64).ceil() as i64).max(2);

    let mut levels = vec![fine];
    let mut maps: Vec<Vec<usize>> = Vec::new();
    while levels.last().expect("non-empty").n() > COARSEST {
        let g = levels.last().expect("non-empty");
        let (cmap, nc) = heavy_edge_matching(g, max_vw, &mut rng);
        if nc * 20 > g.n() * 19 {
            break;
        }
        let coarse = g.contract(&cmap, nc);
        maps.push(cmap);
        levels.push(coarse);
    }

    let mut labels = initial_bisection(levels.last().expect("non-empty"), b, &mut rng);
    for level in (0..maps.len()).rev() {
        let cmap = &maps[level];
        labels = cmap.iter().map(|&c| labels[c]).collect();
        let g = &levels[level];
        rebalance(g, &mut labels, b);
        refine(g, &mut labels, b, MAX_PASSES);
    }
    BisectionLabels::new(labels)
}

fn heavy_edge_matching(g: &WGraph, max_vw: i64, rng: &mut impl Rng) -> (Vec<usize>, usize) {
    let mut order: Vec<usize> = (0..g.n()).collect();
    order.shuffle(rng);
    let mut mate = vec![usize::MAX; g.n()];
    for &u in &order {
        if mate[u] != usize::MAX {
            continue;
        }
        let mut best: Option<(usize, i64)> = None;
        for (v, w) in g.edges(u) {
            if mate[v] == usize::MAX && g.vw[u] + g.vw[v] <= max_vw && best.is_none_or(|(_, bw)| w > bw) {
                best = Some((v, w));
            }
        }
        let v = best.map_or(u, |(v, _)| v);
        mate[u] = v;
        mate[v] = u;
    }
    let mut cmap = vec![usize::MAX; g.n()];
    let mut nc = 0;
    for &u in &order {
        if cmap[u] == usize::MAX {
            cmap[u] = nc;
            cmap[mate[u]] = nc;
            nc += 1;
        }
    }
    (cmap, nc)
}

fn bfs_farthest(g: &WGraph, start: usize) -> usize {
    let mut dist = vec![usize::MAX; g.n()];
    dist[start] = 0;
    let mut q = VecDeque::from([start]);
    let mut last = start;
    while let Some(u) = q.pop_front() {
        last = u;
        for (v, _) in g.edges(u) {
            if dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    last
}

/// Grows side 0 from `start` by best-gain frontier nodes until it holds half the weight.
fn grow(g: &WGraph, start: usize) -> Vec<u8> {
    let total = g.total_weight();
    let mut labels = vec![1u8; g.n()];
    let mut gain: Vec<i64> = (0..g.n()).map(|u| -g.edges(u).map(|(_, w)| w).sum::<i64>()).collect();
    let mut heap = BinaryHeap::new();
    let mut w0 = 0;
    let mut next = Some(start);
    while let Some(u) = next {
        labels[u] = 0;
        w0 += g.vw[u];
        if 2 * w0 >= total {
            break;
        }
        for (v, w) in g.edges(u) {
            if labels[v] == 1 {
                gain[v] += 2 * w;
                heap.push((gain[v], Reverse(v)));
            }
        }
        next = None;
        while let Some((gv, Reverse(v))) = heap.pop() {
            if labels[v] == 1 && gain[v] == gv {
                next = Some(v);
                break;
            }
        }
    }
    labels
}

/// Moves the best-gain nodes off the overweight side until the bounds hold
/// or no single move helps.
fn rebalance(g: &WGraph, labels: &mut [u8], b: Bounds) {
    loop {
        let w0 = g.side0_weight(labels);
        let inf = b.infeasibility(w0);
        if inf == 0 {
            return;
        }
        let from = if w0 > b.hi { 0u8 } else { 1u8 };
        let mut best: Option<(i64, usize)> = None;
        for u in (0..g.n()).filter(|&u| labels[u] == from) {
            let nw0 = if from == 0 { w0 - g.vw[u] } else { w0 + g.vw[u] };
            if b.infeasibility(nw0) >= inf {
                continue;
            }
            let gain: i64 = g.edges(u).map(|(v, w)| if labels[v] == from { -w } else { w }).sum();
            if best.is_none_or(|(bg, _)| gain > bg) {
                best = Some((gain, u));
            }
        }
        match best {
            Some((_, u)) => labels[u] = 1 - from,
            None => return,
        }
    }
}

fn initial_bisection(g: &WGraph, b: Bounds, rng: &mut impl Rng) -> Vec<u8> {
    let mut best: Option<((i64, i64), Vec<u8>)> = None;
    for _ in 0..INIT_TRIALS.min(g.n()) {
        let start = rng.random_range(0..g.n());
        let peripheral = bfs_farthest(g, bfs_farthest(g, start));
        let mut labels = grow(g, peripheral);
        rebalance(g, &mut labels, b);
        refine(g, &mut labels, b, MAX_PASSES);
        let score = (b.infeasibility(g.side0_weight(&labels)), g.cut(&labels));
        if best.as_ref().is_none_or(|(s, _)| score < *s) {
            best = Some((score, labels));
        }
    }
    best.expect("at least one trial").1
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DualGraph {
        DualGraph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    fn grid(nx: usize, ny: usize, nz: usize) -> DualGraph {
        let id = |i: usize, j: usize, k: usize| (k * ny + j) * nx + i;
        let mut e = Vec::new();
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if i + 1 < nx {
                        e.push((id(i, j, k), id(i + 1, j, k)));
                    }
                    if j + 1 < ny {
                        e.push((id(i, j, k), id(i, j + 1, k)));
                    }
                    if k + 1 < nz {
                        e.push((id(i, j, k), id(i, j, k + 1)));
                    }
                }
            }
        }
        DualGraph::from_edges(nx * ny * nz, &e).unwrap()
    }

    #[test]
    fn bounds() {
        assert_eq!(balance_bounds(10, 0.1), Bounds { lo: 4, hi: 6 });
        assert_eq!(balance_bounds(3, 0.1), Bounds { lo: 1, hi: 2 });
        assert_eq!(balance_bounds(2, 0.0), Bounds { lo: 1, hi: 1 });
    }

    #[test]
    fn path_of_eight() {
        let l = multilevel_bisect(&path(8), 0.1, 0).unwrap();
        assert_eq!(path(8).cut(l.as_slice()), 1);
        assert!((3..=5).contains(&l.count(0)));
    }

    #[test]
    fn complete_six() {
        let e: Vec<_> = (0..6).flat_map(|i| (i + 1..6).map(move |j| (i, j))).collect();
        let g = DualGraph::from_edges(6, &e).unwrap();
        let l = multilevel_bisect(&g, 0.1, 0).unwrap();
        assert_eq!(l.count(0), 3);
        assert_eq!(g.cut(l.as_slice()), 9);
    }

    #[test]
    fn grid_cube() {
        let g = grid(4, 4, 4);
        for s in 0..5 {
            let l = multilevel_bisect(&g, 0.1, s).unwrap();
            assert!(g.cut(l.as_slice()) <= 24, "{}", g.cut(l.as_slice()));
            let f = l.count(0) as f64 / 64.0;
            assert!((0.4..=0.6).contains(&f));
        }
    }

    #[test]
    fn larger_grid_goes_through_coarsening() {
        let g = grid(12, 10, 8);
        let l = multilevel_bisect(&g, 0.1, 7).unwrap();
        let f = l.count(0) as f64 / g.n() as f64;
        assert!((0.4..=0.6).contains(&f));
        // A plane cut across the longest axis costs 80 edges.
        assert!(g.cut(l.as_slice()) <= 120, "{}", g.cut(l.as_slice()));
        assert_eq!(l, multilevel_bisect(&g, 0.1, 7).unwrap());
    }

    #[test]
    fn contract_errors() {
        let g = DualGraph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        assert!(matches!(multilevel_bisect(&g, 0.1, 0), Err(Error::Contract(_))));
        assert!(matches!(multilevel_bisect(&path(1), 0.1, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn wrapper_packs_components() {
        let g = DualGraph::from_edges(6, &[(0, 1), (1, 2), (3, 4)]).unwrap();
        let x = FeatureMatrix::new(6, 4, vec![0.0; 24]).unwrap();
        let l = MultilevelBisector::default().bisect(&g, &x, 0).unwrap();
        assert!(l.is_proper());
        assert_eq!(g.cut(l.as_slice()), 0);
    }
}
