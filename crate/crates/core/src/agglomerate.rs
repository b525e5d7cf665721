//! Recursive bisection of a tetrahedral mesh into polyhedral elements.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bisect::{BisectionLabels, BisectionModel};
use crate::features::{build_features, principal_axis_rotation, FeatureMatrix};
use crate::graph::{extract_dual_graph, DualGraph};
use crate::mesh::{Agglomeration, TetMesh};
use crate::par::Exec;
use crate::seed;
use crate::{Error, Result};

pub const DEFAULT_MIN_ELEMENT_SIZE: usize = 2;
pub const DEFAULT_MAX_DEPTH: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSize {
    /// Target diameter h*.
    Absolute(f64),
    /// h* as a fraction of the mesh diameter, in (0, 1].
    Fraction(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgglomerationConfig {
    pub target: TargetSize,
    /// Disconnected pieces with fewer tets are merged into a neighbor.
    pub min_element_size: usize,
    pub seed: u64,
    pub max_depth: usize,
    pub exec: Exec,
}

impl AgglomerationConfig {
    pub fn new(target: TargetSize) -> Self {
        AgglomerationConfig {
            target,
            min_element_size: DEFAULT_MIN_ELEMENT_SIZE,
            seed: 0,
            max_depth: DEFAULT_MAX_DEPTH,
            exec: Exec::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_exec(mut self, exec: Exec) -> Self {
        self.exec = exec;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.target {
            TargetSize::Absolute(h) if !(h.is_finite() && h > 0.0) => {
                Err(Error::Config(format!("target size must be positive, got {h}")))
            }
            TargetSize::Fraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(Error::Config(format!("target fraction must lie in (0, 1], got {f}")))
            }
            _ => Ok(()),
        }
    }

    /// h* for `mesh`.
    pub fn target_diameter(&self, mesh: &TetMesh) -> f64 {
        match self.target {
            TargetSize::Absolute(h) => h,
            TargetSize::Fraction(f) => f * region_diameter(mesh),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AgglomerationOutcome {
    pub agglomeration: Agglomeration,
    /// Per element: whether connectivity repair merged pieces into it.
    pub repaired: Vec<bool>,
    pub target_diameter: f64,
    pub n_bisections: usize,
    pub depth: usize,
    /// Connected components of the input mesh.
    pub n_components: usize,
}

/// Largest distance between two vertices of the mesh.
pub fn region_diameter(mesh: &TetMesh) -> f64 {
    mesh.diameter()
}

/// Empty-side repair: a one-sided labelling becomes a median split along the
/// principal axis of the node centroids.
pub fn adjust_partition(labels: BisectionLabels, x: &FeatureMatrix) -> BisectionLabels {
    let n = labels.len();
    if n <= 1 || labels.is_proper() {
        return labels;
    }
    let coords = x.all_coords();
    let rot = principal_axis_rotation(&coords);
    let mut order: Vec<(f64, usize)> = coords.iter().enumerate().map(|(i, &p)| (rot.apply(p)[0], i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out = vec![1u8; n];
    for &(_, i) in &order[..n / 2] {
        out[i] = 0;
    }
    BisectionLabels::new(out).expect("binary labels")
}

fn fingerprint(tets: &[usize]) -> u64 {
    tets.iter().fold(seed::mix(tets.len() as u64), |h, &t| seed::mix(h ^ t as u64))
}

struct Item {
    tets: Vec<usize>,
    seed: u64,
}

enum Step {
    Final(Vec<usize>),
    Split(Item, Item),
}

/// Runs the recursive bisection with `model` and repairs connectivity.
pub fn agglomerate<M: BisectionModel + ?Sized>(
    mesh: &TetMesh,
    model: &M,
    cfg: &AgglomerationConfig,
) -> Result<AgglomerationOutcome> {
    cfg.validate()?;
    if mesh.n_tets() == 0 {
        return Err(Error::Contract("cannot agglomerate an empty mesh".into()));
    }
    let graph = extract_dual_graph(mesh)?;
    let x = build_features(mesh, model.needs_physical())?;
    let h = cfg.target_diameter(mesh);

    let comp = graph.components();
    let n_components = comp.iter().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_components];
    for (t, &c) in comp.iter().enumerate() {
        members[c].push(t);
    }
    let mut frontier: Vec<Item> = members
        .into_iter()
        .map(|tets| Item {
            seed: seed::derive(cfg.seed, [fingerprint(&tets)]),
            tets,
        })
        .collect();

    let mut labels = vec![usize::MAX; mesh.n_tets()];
    let mut n_el = 0;
    let mut n_bisections = 0;
    let mut depth = 0;
    while !frontier.is_empty() {
        if depth > cfg.max_depth {
            return Err(Error::Numeric(format!("recursion exceeded depth {}", cfg.max_depth)));
        }
        let steps = cfg.exec.map(&frontier, |item| step(mesh, &graph, &x, model, h, item));
        let mut next = Vec::new();
        for s in steps {
            match s? {
                Step::Final(tets) => {
                    for t in tets {
                        labels[t] = n_el;
                    }
                    n_el += 1;
                }
                Step::Split(a, b) => {
                    n_bisections += 1;
                    next.push(a);
                    next.push(b);
                }
            }
        }
        frontier = next;
        if !frontier.is_empty() {
            depth += 1;
        }
    }

    let raw = Agglomeration::from_labels(&labels);
    let (agglomeration, repaired) = enforce_connectivity(&raw, &graph, cfg.min_element_size);
    Ok(AgglomerationOutcome {
        agglomeration,
        repaired,
        target_diameter: h,
        n_bisections,
        depth,
        n_components,
    })
}

fn step<M: BisectionModel + ?Sized>(
    mesh: &TetMesh,
    graph: &DualGraph,
    x: &FeatureMatrix,
    model: &M,
    h: f64,
    item: &Item,
) -> Result<Step> {
    if item.tets.len() <= 1 || mesh.diameter_of(&item.tets) <= h {
        return Ok(Step::Final(item.tets.clone()));
    }
    let sub = graph.induced_subgraph(&item.tets)?;
    let xs = x.gather(&item.tets);
    let labels = model.bisect(&sub.graph, &xs, item.seed)?;
    if labels.len() != item.tets.len() {
        return Err(Error::Contract(format!(
            "model '{}' returned {} labels for {} nodes",
            model.name(),
            labels.len(),
            item.tets.len()
        )));
    }
    let labels = adjust_partition(labels, &xs);
    let mut sides = [Vec::new(), Vec::new()];
    for (local, &t) in item.tets.iter().enumerate() {
        sides[labels.get(local) as usize].push(t);
    }
    let [a, b] = sides;
    let child = |tets: Vec<usize>| Item {
        seed: seed::derive(item.seed, [fingerprint(&tets)]),
        tets,
    };
    Ok(Step::Split(child(a), child(b)))
}

/// Splits disconnected elements: the largest piece keeps the element, pieces
/// with at least `min_size` tets become new elements and smaller pieces join
/// the neighboring element sharing the most faces (lowest id on ties). If the
/// largest piece is itself smaller than `min_size` it is absorbed as well.
///
/// Returns the compacted agglomeration and, per element, whether pieces were
/// merged into it.
pub fn enforce_connectivity(agg: &Agglomeration, graph: &DualGraph, min_size: usize) -> (Agglomeration, Vec<bool>) {
    let mut assign = agg.assignment().to_vec();
    let mut elements: Vec<Vec<usize>> = agg.elements().to_vec();
    let mut repaired = vec![false; elements.len()];
    loop {
        let mut changed = false;
        for e in 0..elements.len() {
            let tets = &elements[e];
            if tets.len() <= 1 {
                continue;
            }
            let comp = graph.connected_components(tets);
            let n_comp = comp.iter().max().map_or(0, |m| m + 1);
            if n_comp <= 1 {
                continue;
            }
            let mut pieces: Vec<Vec<usize>> = vec![Vec::new(); n_comp];
            for (k, &c) in comp.iter().enumerate() {
                pieces[c].push(tets[k]);
            }
            let keep = (0..n_comp).max_by(|&a, &b| pieces[a].len().cmp(&pieces[b].len()).then(b.cmp(&a))).expect("pieces");
            // When even the largest piece is undersized, every piece may be absorbed.
            let absorb_all = pieces[keep].len() < min_size;
            let mut kept = Vec::new();
            for (c, piece) in pieces.into_iter().enumerate() {
                if c == keep && !absorb_all {
                    kept = piece;
                    continue;
                }
                let target = if piece.len() >= min_size {
                    None
                } else {
                    best_neighbor(&piece, e, &assign, graph, elements.len())
                };
                if c == keep && target.is_none() {
                    kept = piece;
                    continue;
                }
                match target {
                    Some(t) => {
                        for &tet in &piece {
                            assign[tet] = t;
                        }
                        elements[t].extend_from_slice(&piece);
                        elements[t].sort_unstable();
                        repaired[t] = true;
                    }
                    None => {
                        let id = elements.len();
                        for &tet in &piece {
                            assign[tet] = id;
                        }
                        elements.push(piece);
                        repaired.push(false);
                    }
                }
            }
            elements[e] = kept;
            changed = true;
        }
        if !changed {
            break;
        }
    }
    let out = Agglomeration::from_labels(&assign);
    let mut flags = vec![false; out.n_elements()];
    for (old, tets) in elements.iter().enumerate() {
        if let Some(&t) = tets.first() {
            flags[out.assignment()[t]] |= repaired[old];
        }
    }
    (out, flags)
}

fn best_neighbor(piece: &[usize], own: usize, assign: &[usize], graph: &DualGraph, n_el: usize) -> Option<usize> {
    let mut shared = vec![0usize; n_el];
    for &t in piece {
        for &u in graph.neighbors(t) {
            if assign[u] != own {
                shared[assign[u]] += 1;
            }
        }
    }
    let best = (0..n_el).filter(|&e| shared[e] > 0).max_by(|&a, &b| shared[a].cmp(&shared[b]).then(b.cmp(&a)))?;
    Some(best)
}

#[derive(Serialize, Deserialize)]
struct AggFile {
    mesh: String,
    n_elements: usize,
    assignment: Vec<usize>,
}

/// `{"mesh": ..., "n_elements": N, "assignment": [...]}`.
pub fn agg_json(mesh_name: &str, agg: &Agglomeration) -> String {
    serde_json::to_string(&AggFile {
        mesh: mesh_name.to_string(),
        n_elements: agg.n_elements(),
        assignment: agg.assignment().to_vec(),
    })
    .expect("assignment serializes")
}

pub fn write_agg_json(path: impl AsRef<Path>, mesh_name: &str, agg: &Agglomeration) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, agg_json(mesh_name, agg)).map_err(|e| Error::io(path, e))
}

/// Reads an assignment file; returns the source mesh name and the agglomeration.
pub fn read_agg_json(path: impl AsRef<Path>) -> Result<(String, Agglomeration)> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: AggFile =
        serde_json::from_str(&text).map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    let agg = Agglomeration::from_assignment(f.assignment)?;
    if agg.n_elements() != f.n_elements {
        return Err(Error::Validation(format!(
            "{}: n_elements is {} but the assignment uses {}",
            path.display(),
            f.n_elements,
            agg.n_elements()
        )));
    }
    Ok((f.mesh, agg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bisect::{KMeansBisector, MultilevelBisector};
    use crate::mesh::synth;

    fn path(n: usize) -> DualGraph {
        DualGraph::from_edges(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(AgglomerationConfig::new(TargetSize::Fraction(1.5)).validate().is_err());
        assert!(AgglomerationConfig::new(TargetSize::Fraction(0.0)).validate().is_err());
        assert!(AgglomerationConfig::new(TargetSize::Absolute(-1.0)).validate().is_err());
        assert!(AgglomerationConfig::new(TargetSize::Fraction(1.0)).validate().is_ok());
    }

    #[test]
    fn small_mesh_is_one_element() {
        let m = synth::unit_cube(2, 0.1, 0);
        let out = agglomerate(&m, &KMeansBisector::default(), &AgglomerationConfig::new(TargetSize::Fraction(1.0))).unwrap();
        assert_eq!(out.agglomeration.n_elements(), 1);
        assert_eq!(out.n_bisections, 0);
    }

    #[test]
    fn adjust_cases() {
        let x = FeatureMatrix::new(10, 4, (0..10).flat_map(|i| [i as f64, 0.0, 0.0, 1.0]).collect()).unwrap();
        let fixed = adjust_partition(BisectionLabels::new(vec![0; 10]).unwrap(), &x);
        assert_eq!(fixed.count(0), 5);
        let mut sides = fixed.side(0);
        sides.sort();
        assert!(sides == vec![0, 1, 2, 3, 4] || sides == vec![5, 6, 7, 8, 9]);
        let ok = BisectionLabels::new(vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 1]).unwrap();
        assert_eq!(adjust_partition(ok.clone(), &x), ok);
        let one = FeatureMatrix::new(1, 4, vec![0.0; 4]).unwrap();
        assert_eq!(adjust_partition(BisectionLabels::new(vec![0]).unwrap(), &one).as_slice(), &[0]);
    }

    #[test]
    fn repair_merges_small_pieces_into_neighbors() {
        // Path 0-1-2-3: element 0 = {0, 3}, element 1 = {1, 2}.
        let g = path(4);
        let agg = Agglomeration::from_assignment(vec![0, 1, 1, 0]).unwrap();
        let (out, rep) = enforce_connectivity(&agg, &g, 2);
        assert_eq!(out.assignment(), &[0, 0, 0, 0]);
        assert_eq!(rep, vec![true]);
        // Path of 5: element 0 = {0, 1, 4}; the singleton {4} joins element 1.
        let g = path(5);
        let agg = Agglomeration::from_assignment(vec![0, 0, 1, 1, 0]).unwrap();
        let (out, rep) = enforce_connectivity(&agg, &g, 2);
        assert_eq!(out.assignment(), &[0, 0, 1, 1, 1]);
        assert_eq!(rep, vec![false, true]);
    }

    #[test]
    fn repair_absorbs_all_undersized_pieces() {
        // Path 0-1-2-3: element 0 = {0, 3} between singletons {1} and {2}.
        let g = path(4);
        let agg = Agglomeration::from_assignment(vec![0, 1, 2, 0]).unwrap();
        let (out, rep) = enforce_connectivity(&agg, &g, 2);
        assert_eq!(out.n_elements(), 2);
        assert_eq!(out.assignment(), &[0, 0, 1, 1]);
        assert_eq!(rep, vec![true, true]);
    }

    #[test]
    fn repair_keeps_large_pieces() {
        // Path of 7: element 0 = {0,1,5,6}, element 1 = {2,3,4}.
        let g = path(7);
        let agg = Agglomeration::from_assignment(vec![0, 0, 1, 1, 1, 0, 0]).unwrap();
        let (out, rep) = enforce_connectivity(&agg, &g, 2);
        assert_eq!(out.n_elements(), 3);
        assert_eq!(out.assignment(), &[0, 0, 1, 1, 1, 2, 2]);
        assert!(rep.iter().all(|r| !r));
        let (same, _) = enforce_connectivity(&out, &g, 2);
        assert_eq!(same, out);
    }

    #[test]
    fn cube_run_invariants() {
        let m = synth::unit_cube(4, 0.15, 1);
        let g = extract_dual_graph(&m).unwrap();
        let cfg = AgglomerationConfig::new(TargetSize::Fraction(0.4)).with_seed(3);
        for model in [&KMeansBisector::default() as &dyn BisectionModel, &MultilevelBisector::default()] {
            let out = agglomerate(&m, model, &cfg).unwrap();
            let agg = &out.agglomeration;
            assert!(agg.n_elements() > 1);
            for (e, tets) in agg.elements().iter().enumerate() {
                assert_eq!(g.connected_components(tets).iter().max(), Some(&0));
                if !out.repaired[e] {
                    assert!(m.diameter_of(tets) <= out.target_diameter);
                }
            }
            let again = agglomerate(&m, model, &cfg).unwrap();
            assert_eq!(again.agglomeration, out.agglomeration);
        }
    }

    #[test]
    fn agg_json_round_trip() {
        let agg = Agglomeration::from_assignment(vec![0, 1, 1, 0]).unwrap();
        assert_eq!(agg_json("cube.msh", &agg), r#"{"mesh":"cube.msh","n_elements":2,"assignment":[0,1,1,0]}"#);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.agg.json");
        write_agg_json(&p, "cube.msh", &agg).unwrap();
        assert_eq!(read_agg_json(&p).unwrap(), ("cube.msh".to_string(), agg));
    }
}
