//! Synthetic structured tetrahedral meshes for datasets, tests and benches.
//!
//! Boxes are split into hexahedral cells, each cut into six tetrahedra around
//! the cell's main diagonal. The split is conforming across cells. Interior
//! vertices may be jittered so meshes are not perfectly regular.

use std::collections::BTreeMap;

use rand::Rng;

use super::{Point3, RegionId, TetMesh};

/// The six axis orderings that cut a unit cell along its (0,0,0)–(1,1,1) diagonal.
const KUHN: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

struct Grid {
    cells: [usize; 3],
}

impl Grid {
    fn vertex(&self, i: usize, j: usize, k: usize) -> usize {
        let [nx, ny, _] = self.cells;
        i + (nx + 1) * (j + (ny + 1) * k)
    }
}

fn build(
    cells: [usize; 3],
    lo: Point3,
    hi: Point3,
    jitter: f64,
    seed: u64,
    pin: Option<(usize, usize)>,
    region: impl Fn([usize; 3]) -> RegionId,
) -> (Vec<Point3>, Vec<[usize; 4]>, Vec<RegionId>) {
    assert!(cells.iter().all(|&c| c > 0), "box needs at least one cell per axis");
    let grid = Grid { cells };
    let [nx, ny, nz] = cells;
    let h: [f64; 3] = std::array::from_fn(|a| (hi[a] - lo[a]) / cells[a] as f64);
    let mut rng = crate::seed::rng(seed);

    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                let idx = [i, j, k];
                let mut p: Point3 = std::array::from_fn(|a| lo[a] + idx[a] as f64 * h[a]);
                let interior = (0..3).all(|a| idx[a] > 0 && idx[a] < cells[a]);
                if jitter > 0.0 && interior {
                    for a in 0..3 {
                        let d = (rng.random::<f64>() * 2.0 - 1.0) * jitter * h[a];
                        if pin != Some((a, idx[a])) {
                            p[a] += d;
                        }
                    }
                }
                vertices.push(p);
            }
        }
    }

    let mut tets = Vec::with_capacity(6 * nx * ny * nz);
    let mut regions = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let label = region([i, j, k]);
                for order in KUHN {
                    let mut c = [i, j, k];
                    let mut tet = [grid.vertex(c[0], c[1], c[2]); 4];
                    for (s, &axis) in order.iter().enumerate() {
                        c[axis] += 1;
                        tet[s + 1] = grid.vertex(c[0], c[1], c[2]);
                    }
                    tets.push(tet);
                    regions.push(label);
                }
            }
        }
    }
    (vertices, tets, regions)
}

/// Box `[lo, hi]` with `cells` hexahedral cells per axis (six tets each),
/// single region labelled 1 and no physical parameters. `jitter` is the
/// maximum interior vertex displacement as a fraction of the cell size;
/// values up to 0.2 keep every tet positively oriented.
pub fn box_mesh(cells: [usize; 3], lo: Point3, hi: Point3, jitter: f64, seed: u64) -> TetMesh {
    let (v, t, r) = build(cells, lo, hi, jitter, seed, None, |_| 1);
    TetMesh::new(v, t, r, None).expect("structured box mesh is valid")
}

/// Unit cube with `n` cells per axis (6n³ tets).
pub fn unit_cube(n: usize, jitter: f64, seed: u64) -> TetMesh {
    box_mesh([n; 3], [0.0; 3], [1.0; 3], jitter, seed)
}

/// Unit cube split by the grid plane `axis = split / n` into region 1
/// (below, ρ = `rho.0`) and region 2 (above, ρ = `rho.1`). Jitter never moves
/// vertices off the interface plane.
pub fn two_region_cube(
    n: usize,
    axis: usize,
    split: usize,
    rho: (f64, f64),
    jitter: f64,
    seed: u64,
) -> TetMesh {
    let (v, t, r) = build([n; 3], [0.0; 3], [1.0; 3], jitter, seed, Some((axis, split)), |c| {
        if c[axis] < split {
            1
        } else {
            2
        }
    });
    let params = BTreeMap::from([(1, rho.0), (2, rho.1)]);
    TetMesh::new(v, t, r, Some(params)).expect("structured box mesh is valid")
}
