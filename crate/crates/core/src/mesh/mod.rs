//! Tetrahedral meshes, agglomerations and their file formats.

pub mod geom;
mod msh;
mod params;
pub mod synth;
mod vtk;

use std::collections::BTreeMap;
use std::path::Path;

pub use geom::Point3;
pub use msh::{read_msh, write_msh};
pub use params::{read_params, sidecar_path, write_params};
pub use vtk::write_vtk;

use crate::{Error, Result};

/// Region label of a tetrahedron (the MSH physical tag).
pub type RegionId = i64;

/// Relative volume below which a tetrahedron is considered degenerate.
const ZERO_VOLUME_REL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TetGeometry {
    pub volume: f64,
    pub centroid: Point3,
}

/// An immutable, validated tetrahedral mesh with per-region physical values.
///
/// Construction reorients negatively oriented tetrahedra so every tet has
/// positive signed volume.
#[derive(Clone, Debug, PartialEq)]
pub struct TetMesh {
    vertices: Vec<Point3>,
    tets: Vec<[usize; 4]>,
    region_of_tet: Vec<RegionId>,
    param_of_region: BTreeMap<RegionId, f64>,
    has_params: bool,
}

impl TetMesh {
    /// Builds a mesh. With `params = None` every region gets ρ = 0 and the mesh
    /// is flagged as carrying no physical data.
    pub fn new(
        vertices: Vec<Point3>,
        mut tets: Vec<[usize; 4]>,
        region_of_tet: Vec<RegionId>,
        params: Option<BTreeMap<RegionId, f64>>,
    ) -> Result<Self> {
        if tets.is_empty() {
            return Err(Error::Validation("mesh has no tetrahedra".into()));
        }
        if region_of_tet.len() != tets.len() {
            return Err(Error::Validation(format!(
                "{} region labels for {} tetrahedra",
                region_of_tet.len(),
                tets.len()
            )));
        }
        if let Some(bad) = vertices.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Validation(format!("vertex {bad} has a non-finite coordinate")));
        }
        let nv = vertices.len();
        for (t, tet) in tets.iter().enumerate() {
            if let Some(&v) = tet.iter().find(|&&v| v >= nv) {
                return Err(Error::Validation(format!(
                    "tet {t} references vertex {v} but the mesh has {nv} vertices"
                )));
            }
            for a in 0..4 {
                for b in a + 1..4 {
                    if tet[a] == tet[b] {
                        return Err(Error::Validation(format!(
                            "tet {t} repeats vertex {}",
                            tet[a]
                        )));
                    }
                }
            }
        }

        let bbox_volume = {
            let (lo, hi) = bounding_box(&vertices);
            (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2])
        };
        let min_volume = ZERO_VOLUME_REL * bbox_volume;
        for (t, tet) in tets.iter_mut().enumerate() {
            let p = tet.map(|v| vertices[v]);
            let signed = geom::det6(p[0], p[1], p[2], p[3]) / 6.0;
            if signed.abs() < min_volume || signed.abs() == 0.0 {
                return Err(Error::Validation(format!(
                    "tet {t} has zero volume ({signed:e})"
                )));
            }
            if signed < 0.0 {
                tet.swap(2, 3);
            }
        }

        let has_params = params.is_some();
        let mut param_of_region = params.unwrap_or_default();
        for &r in &region_of_tet {
            if has_params {
                if !param_of_region.contains_key(&r) {
                    return Err(Error::Validation(format!(
                        "region {r} has no physical parameter"
                    )));
                }
            } else {
                param_of_region.insert(r, 0.0);
            }
        }
        if let Some((r, v)) = param_of_region.iter().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Validation(format!(
                "region {r} has invalid physical parameter {v}"
            )));
        }

        Ok(TetMesh {
            vertices,
            tets,
            region_of_tet,
            param_of_region,
            has_params,
        })
    }

    /// Replaces the physical parameters of every region.
    pub fn with_params(self, params: BTreeMap<RegionId, f64>) -> Result<Self> {
        TetMesh::new(self.vertices, self.tets, self.region_of_tet, Some(params))
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn tets(&self) -> &[[usize; 4]] {
        &self.tets
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn region_of_tet(&self) -> &[RegionId] {
        &self.region_of_tet
    }

    pub fn param_of_region(&self) -> &BTreeMap<RegionId, f64> {
        &self.param_of_region
    }

    /// Whether physical parameters were supplied explicitly.
    pub fn has_params(&self) -> bool {
        self.has_params
    }

    pub fn rho_of_tet(&self, t: usize) -> f64 {
        self.param_of_region[&self.region_of_tet[t]]
    }

    pub fn tet_points(&self, t: usize) -> [Point3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Volume (|det| / 6) and vertex-average centroid of tet `t`.
    pub fn tet_geometry(&self, t: usize) -> TetGeometry {
        let p = self.tet_points(t);
        TetGeometry {
            volume: geom::tet_volume(&p),
            centroid: geom::centroid(&p),
        }
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.tet_geometry(t).volume).sum()
    }

    /// Sorted, deduplicated vertex ids used by a set of tets.
    pub fn vertices_of(&self, tets: &[usize]) -> Vec<usize> {
        let mut vs: Vec<usize> = tets.iter().flat_map(|&t| self.tets[t]).collect();
        vs.sort_unstable();
        vs.dedup();
        vs
    }

    /// Largest vertex-to-vertex distance over a set of tets.
    pub fn diameter_of(&self, tets: &[usize]) -> f64 {
        let pts: Vec<Point3> = self
            .vertices_of(tets)
            .into_iter()
            .map(|v| self.vertices[v])
            .collect();
        geom::diameter(&pts)
    }

    /// Largest distance between two vertices used by the mesh.
    pub fn diameter(&self) -> f64 {
        let all: Vec<usize> = (0..self.n_tets()).collect();
        self.diameter_of(&all)
    }

    /// Extracts the sub-mesh made of `tets`, dropping unused vertices.
    pub fn submesh(&self, tets: &[usize]) -> Result<SubMesh> {
        if tets.is_empty() {
            return Err(Error::Contract("submesh of an empty tet set".into()));
        }
        let mut parent_to_local = vec![None; self.n_tets()];
        for (local, &t) in tets.iter().enumerate() {
            if t >= self.n_tets() {
                return Err(Error::Contract(format!("tet index {t} out of range")));
            }
            if parent_to_local[t].replace(local).is_some() {
                return Err(Error::Contract(format!("tet index {t} listed twice")));
            }
        }
        let used = self.vertices_of(tets);
        let mut vmap = vec![usize::MAX; self.n_vertices()];
        for (local, &v) in used.iter().enumerate() {
            vmap[v] = local;
        }
        let mesh = TetMesh {
            vertices: used.iter().map(|&v| self.vertices[v]).collect(),
            tets: tets.iter().map(|&t| self.tets[t].map(|v| vmap[v])).collect(),
            region_of_tet: tets.iter().map(|&t| self.region_of_tet[t]).collect(),
            param_of_region: {
                let mut m = BTreeMap::new();
                for &t in tets {
                    let r = self.region_of_tet[t];
                    m.insert(r, self.param_of_region[&r]);
                }
                m
            },
            has_params: self.has_params,
        };
        Ok(SubMesh {
            mesh,
            tet_to_parent: tets.to_vec(),
            parent_to_local,
            vertex_to_parent: used,
        })
    }
}

pub fn bounding_box(points: &[Point3]) -> (Point3, Point3) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    (lo, hi)
}

/// A sub-mesh together with its index maps back into the parent mesh.
#[derive(Clone, Debug)]
pub struct SubMesh {
    pub mesh: TetMesh,
    /// Local tet index → parent tet index.
    pub tet_to_parent: Vec<usize>,
    /// Parent tet index → local tet index, `None` for tets not selected.
    pub parent_to_local: Vec<Option<usize>>,
    /// Local vertex index → parent vertex index.
    pub vertex_to_parent: Vec<usize>,
}

/// Loads an MSH 2.2 file together with its `<stem>.params.json` sidecar when
/// one exists next to it.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let path = path.as_ref();
    let mesh = read_msh(path)?;
    let sidecar = sidecar_path(path);
    if sidecar.exists() {
        let params = read_params(&sidecar)?;
        mesh.with_params(params)
    } else {
        Ok(mesh)
    }
}

/// A partition of a mesh's tets into agglomerated elements.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Agglomeration {
    assignment: Vec<usize>,
    elements: Vec<Vec<usize>>,
}

impl Agglomeration {
    /// Validates that ids are contiguous from 0 and every element is non-empty.
    pub fn from_assignment(assignment: Vec<usize>) -> Result<Self> {
        let n_el = assignment.iter().copied().max().map_or(0, |m| m + 1);
        let mut elements = vec![Vec::new(); n_el];
        for (t, &e) in assignment.iter().enumerate() {
            elements[e].push(t);
        }
        if let Some(e) = elements.iter().position(Vec::is_empty) {
            return Err(Error::Contract(format!("element id {e} is unused")));
        }
        Ok(Agglomeration {
            assignment,
            elements,
        })
    }

    /// Relabels arbitrary element keys to contiguous ids in order of each
    /// element's smallest tet index.
    pub fn from_labels(labels: &[usize]) -> Self {
        let mut remap = std::collections::HashMap::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = remap.len();
                *remap.entry(*l).or_insert(next)
            })
            .collect();
        Self::from_assignment(assignment).expect("compacted labels are contiguous")
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn elements(&self) -> &[Vec<usize>] {
        &self.elements
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_tets(&self) -> usize {
        self.assignment.len()
    }

    pub(crate) fn check_source(&self, mesh: &TetMesh) -> Result<()> {
        if self.n_tets() != mesh.n_tets() {
            return Err(Error::Contract(format!(
                "agglomeration covers {} tets but the mesh has {}",
                self.n_tets(),
                mesh.n_tets()
            )));
        }
        Ok(())
    }
}
