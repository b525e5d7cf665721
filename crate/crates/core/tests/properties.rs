use std::collections::BTreeMap;

use proptest::prelude::*;

use polyagg::agglomerate::{agglomerate, AgglomerationConfig, TargetSize};
use polyagg::bisect::{
    balance_bounds, fm_refine, kmeans2, multilevel_bisect, BisectionLabels, BisectionModel, KMeansBisector,
    MultilevelBisector,
};
use polyagg::features::{build_features, minmax_unit, normalize_features, smooth_over_neighbors, NormMode, NormOptions};
use polyagg::graph::{extract_dual_graph, DualGraph};
use polyagg::loss::{normalized_cut_loss, physical_penalty, PhysicalPenaltyMatrix};
use polyagg::mesh::{read_msh, synth, write_msh, TetMesh};
use polyagg::nn::{init_params, model_forward, ModelConfig, Tensor2};
use polyagg::quality::{circle_ratio, heterogeneous_elements, min_enclosing_ball, uniformity_factors, evaluate};
use polyagg::Exec;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 64, ..ProptestConfig::default() }
}

/// Random connected graph: a random tree plus extra edges.
fn connected_graph(max_n: usize) -> impl Strategy<Value = DualGraph> {
    (2..=max_n).prop_flat_map(|n| {
        let parents: Vec<_> = (1..n).map(|v| 0..v).collect();
        (parents, prop::collection::vec((0..n, 0..n), 0..=n)).prop_map(move |(parents, extra)| {
            let mut edges: Vec<(usize, usize)> = parents.into_iter().enumerate().map(|(i, p)| (p, i + 1)).collect();
            for (a, b) in extra {
                let e = (a.min(b), a.max(b));
                if a != b && !edges.contains(&e) {
                    edges.push(e);
                }
            }
            DualGraph::from_edges(n, &edges).unwrap()
        })
    })
}

fn permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<_>>()).prop_shuffle()
}

fn small_mesh() -> impl Strategy<Value = TetMesh> {
    (1usize..=3, 1usize..=3, 1usize..=3, 0.0..0.2f64, any::<u64>())
        .prop_map(|(a, b, c, jitter, seed)| synth::box_mesh([a, b, c], [0.0; 3], [1.0, 0.8, 1.2], jitter, seed))
}

fn soft_labels(n: usize) -> impl Strategy<Value = Tensor2> {
    prop::collection::vec(0.01..0.99f64, n).prop_map(move |p| Tensor2::from_fn(n, 2, |i, k| if k == 0 { p[i] } else { 1.0 - p[i] }))
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn tet_volume_ignores_vertex_order(mesh in small_mesh(), perm in permutation(4)) {
        let tets: Vec<[usize; 4]> = mesh.tets().iter().map(|t| [t[perm[0]], t[perm[1]], t[perm[2]], t[perm[3]]]).collect();
        let shuffled = TetMesh::new(mesh.vertices().to_vec(), tets, mesh.region_of_tet().to_vec(), None).unwrap();
        for t in 0..mesh.n_tets() {
            prop_assert!(rel_close(mesh.tet_geometry(t).volume, shuffled.tet_geometry(t).volume, 1e-14));
        }
        prop_assert_eq!(extract_dual_graph(&mesh).unwrap(), extract_dual_graph(&shuffled).unwrap());
    }

    #[test]
    fn msh_round_trip(mesh in small_mesh()) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msh");
        write_msh(&mesh, &path).unwrap();
        let back = read_msh(&path).unwrap();
        prop_assert_eq!(back.vertices(), mesh.vertices());
        prop_assert_eq!(back.tets(), mesh.tets());
        prop_assert_eq!(back.region_of_tet(), mesh.region_of_tet());
        write_msh(&back, &path).unwrap();
        let again = read_msh(&path).unwrap();
        prop_assert_eq!(again.vertices(), mesh.vertices());
    }

    #[test]
    fn submesh_volumes_sum_to_total(mesh in small_mesh(), labels in prop::collection::vec(0usize..3, 162)) {
        let mut parts: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for t in 0..mesh.n_tets() {
            parts.entry(labels[t]).or_default().push(t);
        }
        let sum: f64 = parts.values().map(|p| mesh.submesh(p).unwrap().mesh.total_volume()).sum();
        prop_assert!(rel_close(sum, mesh.total_volume(), 1e-12));
    }

    #[test]
    fn dual_graph_edge_bound(mesh in small_mesh()) {
        let g = extract_dual_graph(&mesh).unwrap();
        prop_assert!(g.n_edges() <= 2 * mesh.n_tets());
    }

    #[test]
    fn components_partition_the_subset(g in connected_graph(16), keep in prop::collection::vec(any::<bool>(), 16)) {
        let subset: Vec<usize> = (0..g.n()).filter(|&i| keep[i]).collect();
        let comp = g.connected_components(&subset);
        prop_assert_eq!(comp.len(), subset.len());
        let n_comp = comp.iter().max().map_or(0, |m| m + 1);
        for c in 0..n_comp {
            prop_assert!(comp.contains(&c));
        }
        for (a, &u) in subset.iter().enumerate() {
            for &v in g.neighbors(u) {
                if let Some(b) = subset.iter().position(|&w| w == v) {
                    prop_assert_eq!(comp[a], comp[b]);
                }
            }
        }
    }

    #[test]
    fn enhanced_normalization_ignores_translation(mesh in small_mesh(), shift in prop::array::uniform3(-50.0..50.0f64)) {
        let moved = TetMesh::new(
            mesh.vertices().iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect(),
            mesh.tets().to_vec(),
            mesh.region_of_tet().to_vec(),
            None,
        ).unwrap();
        let g = extract_dual_graph(&mesh).unwrap();
        let opts = NormOptions::new(NormMode::Enhanced);
        let a = normalize_features(&build_features(&mesh, false).unwrap(), &g, opts).unwrap();
        let b = normalize_features(&build_features(&moved, false).unwrap(), &g, opts).unwrap();
        for (x, y) in a.data().iter().zip(b.data()) {
            prop_assert!((x - y).abs() <= 1e-9, "{} vs {}", x, y);
        }
    }

    #[test]
    fn smoothing_is_convex(g in connected_graph(20), raw in prop::collection::vec(-5.0..5.0f64, 20), include_self in any::<bool>()) {
        let unit = minmax_unit(&raw[..g.n()]);
        let s = smooth_over_neighbors(&unit, &g, include_self);
        let (lo, hi) = unit.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        for v in s {
            prop_assert!(v >= lo - 1e-15 && v <= hi + 1e-15);
        }
    }

    #[test]
    fn model_is_permutation_equivariant(
        (g, perm) in connected_graph(14).prop_flat_map(|g| { let n = g.n(); (Just(g), permutation(n)) }),
        seed in any::<u64>(),
        feats in prop::collection::vec(-1.0..1.0f64, 14 * 5),
    ) {
        let n = g.n();
        for config in [ModelConfig::Base, ModelConfig::HeteroEnhanced] {
            let w = config.input_width();
            let x = polyagg::features::FeatureMatrix::new(n, w, feats[..n * w].to_vec()).unwrap();
            let params = init_params(config, seed);
            let y = model_forward(&g, &x, &params, Exec::Sequential).unwrap();
            let yp = model_forward(&g.permuted(&perm), &x.permuted(&perm), &params, Exec::Sequential).unwrap();
            prop_assert!(y.permute_rows(&perm).max_abs_diff(&yp) <= 1e-12);
            for i in 0..n {
                prop_assert!((y.get(i, 0) + y.get(i, 1) - 1.0).abs() <= 1e-12);
                prop_assert!(y.row(i).iter().all(|v| v.is_finite()));
            }
        }
    }

    #[test]
    fn losses_are_permutation_and_swap_invariant(
        (g, perm, y) in connected_graph(12).prop_flat_map(|g| { let n = g.n(); (Just(g), permutation(n), soft_labels(n)) }),
        rho in prop::collection::vec(0.5..20.0f64, 12),
    ) {
        let n = g.n();
        let l = normalized_cut_loss(&y, &g).unwrap();
        let lp = normalized_cut_loss(&y.permute_rows(&perm), &g.permuted(&perm)).unwrap();
        prop_assert!(rel_close(l, lp, 1e-12));
        let swapped = Tensor2::from_fn(n, 2, |i, k| y.get(i, 1 - k));
        prop_assert!(rel_close(l, normalized_cut_loss(&swapped, &g).unwrap(), 1e-12));
        let p = PhysicalPenaltyMatrix::from_rho(&rho[..n]);
        let pen = physical_penalty(&p, &y).unwrap();
        prop_assert!(rel_close(pen, physical_penalty(&p.permute_rows(&perm), &y.permute_rows(&perm)).unwrap(), 1e-12));
        prop_assert!((0.0..=n as f64).contains(&pen));
    }

    #[test]
    fn expected_cut_matches_pairwise_oracle((g, y) in connected_graph(10).prop_flat_map(|g| { let n = g.n(); (Just(g), soft_labels(n)) })) {
        let n = g.n();
        let mut adj = vec![vec![0.0; n]; n];
        for (u, v) in g.edges() {
            adj[u][v] = 1.0;
            adj[v][u] = 1.0;
        }
        let mut expected = 0.0;
        for k in 0..2 {
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                let d: f64 = adj[i].iter().sum();
                den += y.get(i, k) * d;
                for j in 0..n {
                    num += adj[i][j] * y.get(i, k) * (1.0 - y.get(j, k));
                }
            }
            expected += num / den;
        }
        prop_assert!(rel_close(normalized_cut_loss(&y, &g).unwrap(), expected, 1e-12));
    }

    #[test]
    fn fm_never_increases_cut(g in connected_graph(40), bits in prop::collection::vec(0u8..2, 40), eps in 0.0..0.3f64) {
        let start = BisectionLabels::new(bits[..g.n()].to_vec()).unwrap();
        let refined = fm_refine(&g, &start, eps);
        prop_assert!(g.cut(refined.as_slice()) <= g.cut(start.as_slice()));
    }

    #[test]
    fn multilevel_is_balanced_and_deterministic(g in connected_graph(60), seed in any::<u64>()) {
        let a = multilevel_bisect(&g, 0.1, seed).unwrap();
        let b = multilevel_bisect(&g, 0.1, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let bounds = balance_bounds(g.n() as i64, 0.1);
        let zeros = a.count(0) as i64;
        prop_assert!(zeros >= bounds.lo && zeros <= bounds.hi, "{} not in [{}, {}]", zeros, bounds.lo, bounds.hi);
    }

    #[test]
    fn kmeans_labels_are_nearest_centers(points in prop::collection::vec(prop::array::uniform3(-3.0..3.0f64), 3..40), seed in any::<u64>()) {
        let r = kmeans2(&points, seed, 4, 100).unwrap();
        let d2 = |p: &[f64; 3], c: &[f64; 3]| (0..3).map(|a| (p[a] - c[a]).powi(2)).sum::<f64>();
        for (p, &l) in points.iter().zip(r.labels.as_slice()) {
            let own = d2(p, &r.centers[l as usize]);
            let other = d2(p, &r.centers[1 - l as usize]);
            prop_assert!(own <= other + 1e-12);
        }
    }

    #[test]
    fn agglomeration_is_a_connected_partition(mesh in small_mesh(), frac in 0.2..0.9f64, seed in any::<u64>()) {
        let graph = extract_dual_graph(&mesh).unwrap();
        for model in [&MultilevelBisector::default() as &dyn BisectionModel, &KMeansBisector::default()] {
            let cfg = AgglomerationConfig::new(TargetSize::Fraction(frac)).with_seed(seed).with_exec(Exec::Sequential);
            let out = agglomerate(&mesh, model, &cfg).unwrap();
            let again = agglomerate(&mesh, model, &cfg).unwrap();
            prop_assert_eq!(&out.agglomeration, &again.agglomeration);
            let agg = &out.agglomeration;
            let mut seen = vec![0; mesh.n_tets()];
            for (e, tets) in agg.elements().iter().enumerate() {
                for &t in tets {
                    seen[t] += 1;
                }
                prop_assert!(graph.connected_components(tets).iter().all(|&c| c == 0));
                if !out.repaired[e] && tets.len() > 1 {
                    prop_assert!(mesh.diameter_of(tets) <= out.target_diameter);
                }
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn quality_metric_bounds(mesh in small_mesh(), seed in any::<u64>(), scale in 0.1..10.0f64) {
        let cfg = AgglomerationConfig::new(TargetSize::Fraction(0.5)).with_seed(seed).with_exec(Exec::Sequential);
        let agg = agglomerate(&mesh, &MultilevelBisector::default(), &cfg).unwrap().agglomeration;
        for tets in agg.elements() {
            prop_assert!(circle_ratio(&mesh, tets, seed).value <= 1.0 + 1e-12);
        }
        let report = evaluate(&mesh, &agg, seed, Exec::Sequential).unwrap();
        let uf = uniformity_factors(&agg.elements().iter().map(|t| mesh.diameter_of(t)).collect::<Vec<_>>());
        prop_assert_eq!(uf.iter().copied().fold(0.0, f64::max), 1.0);
        let scaled = TetMesh::new(
            mesh.vertices().iter().map(|p| p.map(|c| c * scale)).collect(),
            mesh.tets().to_vec(),
            mesh.region_of_tet().to_vec(),
            None,
        ).unwrap();
        let scaled_report = evaluate(&scaled, &agg, seed, Exec::Sequential).unwrap();
        prop_assert!(rel_close(report.mean_vd(), scaled_report.mean_vd(), 1e-9));
    }

    #[test]
    fn he_ignores_rho_values(seed in any::<u64>(), a in 0.1..100.0f64, b in 0.1..100.0f64) {
        prop_assume!((a - b).abs() > 1e-6);
        let mesh = synth::two_region_cube(3, 1, 1, (1.0, 2.0), 0.1, seed);
        let relabeled = mesh.clone().with_params(BTreeMap::from([(1, a), (2, b)])).unwrap();
        let cfg = AgglomerationConfig::new(TargetSize::Fraction(0.6)).with_seed(seed);
        let agg = agglomerate(&mesh, &KMeansBisector::default(), &cfg).unwrap().agglomeration;
        prop_assert_eq!(heterogeneous_elements(&mesh, &agg).unwrap(), heterogeneous_elements(&relabeled, &agg).unwrap());
    }

    #[test]
    fn enclosing_ball_contains_points(points in prop::collection::vec(prop::array::uniform3(-2.0..2.0f64), 1..30), seed in any::<u64>()) {
        let ball = min_enclosing_ball(&points, seed);
        for p in &points {
            let d = (0..3).map(|a| (p[a] - ball.center[a]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(d <= ball.radius + 1e-9);
        }
    }
}
