//! Fiduccia–Mattheyses refinement with gain buckets.

use super::multilevel::{balance_bounds, Bounds};
use super::wgraph::WGraph;
use super::BisectionLabels;
use crate::graph::DualGraph;

pub(crate) const MAX_PASSES: usize = 10;
const STALL_LIMIT: usize = 100;

/// Refines `labels` on the unit-weight `graph` under the node-count balance
/// `|S₀|/n ∈ [0.5 − eps, 0.5 + eps]`. The cut never increases.
pub fn fm_refine(graph: &DualGraph, labels: &BisectionLabels, eps: f64) -> BisectionLabels {
    let g = WGraph::unit(graph);
    let mut out = labels.as_slice().to_vec();
    let b = balance_bounds(g.total_weight(), eps);
    refine(&g, &mut out, b, MAX_PASSES);
    BisectionLabels::new(out).expect("labels stay binary")
}

pub(crate) fn refine(g: &WGraph, labels: &mut [u8], b: Bounds, max_passes: usize) {
    let before = g.cut(labels);
    for _ in 0..max_passes {
        if !pass(g, labels, b) {
            break;
        }
    }
    debug_assert!(g.cut(labels) <= before, "refinement increased the cut");
}

struct Buckets {
    lists: Vec<Vec<usize>>,
    offset: i64,
    top: usize,
}

impl Buckets {
    fn new(max_gain: i64) -> Self {
        Buckets {
            lists: vec![Vec::new(); (2 * max_gain + 1) as usize],
            offset: max_gain,
            top: 0,
        }
    }

    fn push(&mut self, u: usize, gain: i64) {
        let i = (gain + self.offset) as usize;
        self.lists[i].push(u);
        self.top = self.top.max(i);
    }

    /// Highest-gain entry for which `valid` holds; stale entries are dropped.
    fn peek(&mut self, valid: impl Fn(usize, i64) -> bool) -> Option<(usize, i64)> {
        loop {
            let gain = self.top as i64 - self.offset;
            match self.lists[self.top].last() {
                Some(&u) if valid(u, gain) => return Some((u, gain)),
                Some(_) => {
                    self.lists[self.top].pop();
                }
                None if self.top == 0 => return None,
                None => self.top -= 1,
            }
        }
    }
}

fn pass(g: &WGraph, labels: &mut [u8], b: Bounds) -> bool {
    let n = g.n();
    let mut gain = vec![0i64; n];
    let mut max_gain = 0;
    for u in 0..n {
        let mut wdeg = 0;
        for (v, w) in g.edges(u) {
            wdeg += w;
            gain[u] += if labels[v] == labels[u] { -w } else { w };
        }
        max_gain = max_gain.max(wdeg);
    }
    let mut buckets = [Buckets::new(max_gain), Buckets::new(max_gain)];
    for u in 0..n {
        buckets[labels[u] as usize].push(u, gain[u]);
    }
    let mut locked = vec![false; n];
    let mut w0 = g.side0_weight(labels);
    let start_cut = g.cut(labels);
    let start_inf = b.infeasibility(w0);
    // Moves may leave the balance window by up to one vertex weight mid-pass.
    let slack = start_inf.max(g.vw.iter().copied().max().unwrap_or(1));
    let mut cut = start_cut;
    let mut best = (start_inf, start_cut);
    let mut best_len = 0;
    let mut moves = Vec::new();
    let mut stall = 0;

    loop {
        let inf = b.infeasibility(w0);
        let mut choice: Option<(usize, i64, i64)> = None;
        for s in 0..2u8 {
            let top = buckets[s as usize].peek(|u, gu| !locked[u] && labels[u] == s && gain[u] == gu);
            let Some((u, gu)) = top else { continue };
            let nw0 = if s == 0 { w0 - g.vw[u] } else { w0 + g.vw[u] };
            let ninf = b.infeasibility(nw0);
            if ninf > slack && ninf >= inf {
                continue;
            }
            let heavier = if s == 0 { 2 * w0 >= g.total_weight() } else { 2 * w0 < g.total_weight() };
            let better = match choice {
                None => true,
                Some((_, cg, _)) => gu > cg || (gu == cg && heavier),
            };
            if better {
                choice = Some((u, gu, nw0));
            }
        }
        let Some((u, gu, nw0)) = choice else { break };
        let from = labels[u];
        labels[u] = 1 - from;
        locked[u] = true;
        cut -= gu;
        w0 = nw0;
        for (v, w) in g.edges(u) {
            if locked[v] {
                continue;
            }
            gain[v] += if labels[v] == from { 2 * w } else { -2 * w };
            buckets[labels[v] as usize].push(v, gain[v]);
        }
        moves.push(u);
        let state = (b.infeasibility(w0), cut);
        if cut <= start_cut && state.0 <= start_inf && state < best {
            best = state;
            best_len = moves.len();
            stall = 0;
        } else {
            stall += 1;
            if stall > STALL_LIMIT {
                break;
            }
        }
    }
    for &u in &moves[best_len..] {
        labels[u] = 1 - labels[u];
    }
    best_len > 0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> DualGraph {
        DualGraph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn optimal_split_unchanged() {
        let g = path(8);
        let l = BisectionLabels::new(vec![0, 0, 0, 0, 1, 1, 1, 1]).unwrap();
        assert_eq!(fm_refine(&g, &l, 0.1), l);
    }

    #[test]
    fn misplaced_node_is_moved() {
        let g = path(8);
        let l = BisectionLabels::new(vec![0, 0, 0, 1, 0, 1, 1, 1]).unwrap();
        let before = g.cut(l.as_slice());
        let out = fm_refine(&g, &l, 0.1);
        assert!(g.cut(out.as_slice()) + 1 <= before);
        assert_eq!(g.cut(out.as_slice()), 1);
    }

    #[test]
    fn random_labels_never_get_worse() {
        use rand::Rng;
        let mut rng = crate::seed::rng(3);
        for _ in 0..50 {
            let n = rng.random_range(2..40);
            let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
            for _ in 0..n {
                let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
                if a != b && !edges.contains(&(a.min(b), a.max(b))) && !edges.contains(&(a.max(b), a.min(b))) {
                    edges.push((a.min(b), a.max(b)));
                }
            }
            let g = DualGraph::from_edges(n, &edges).unwrap();
            let l = BisectionLabels::from_fn(n, |_| rng.random_range(0..2)).unwrap();
            let out = fm_refine(&g, &l, 0.1);
            assert!(g.cut(out.as_slice()) <= g.cut(l.as_slice()));
        }
    }
}
