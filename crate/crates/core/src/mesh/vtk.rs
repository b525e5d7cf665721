use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Agglomeration, TetMesh};
use crate::{Error, Result};

const VTK_TETRA: u8 = 10;

/// Writes a legacy ASCII VTK unstructured grid with one cell per tet and the
/// cell arrays `element_id` and `rho`.
pub fn write_vtk(mesh: &TetMesh, agg: &Agglomeration, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    agg.check_source(mesh)?;
    fs::write(path, format_vtk(mesh, agg)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_vtk(mesh: &TetMesh, agg: &Agglomeration) -> String {
    let n = mesh.n_tets();
    let mut s = String::with_capacity(64 * (n + mesh.n_vertices()));
    s.push_str("# vtk DataFile Version 3.0\npolyagg agglomeration\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(s, "POINTS {} double", mesh.n_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", p[0], p[1], p[2]);
    }
    let _ = writeln!(s, "CELLS {n} {}", 5 * n);
    for t in mesh.tets() {
        let _ = writeln!(s, "4 {} {} {} {}", t[0], t[1], t[2], t[3]);
    }
    let _ = writeln!(s, "CELL_TYPES {n}");
    for _ in 0..n {
        let _ = writeln!(s, "{VTK_TETRA}");
    }
    let _ = writeln!(s, "CELL_DATA {n}");
    s.push_str("SCALARS element_id int 1\nLOOKUP_TABLE default\n");
    for e in agg.assignment() {
        let _ = writeln!(s, "{e}");
    }
    s.push_str("SCALARS rho double 1\nLOOKUP_TABLE default\n");
    for t in 0..n {
        let _ = writeln!(s, "{}", mesh.rho_of_tet(t));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::synth;

    /// Independent reading of the text: the section after `header` as tokens.
    fn section<'a>(text: &'a str, header: &str) -> Vec<&'a str> {
        let mut lines = text.lines().skip_while(|l| !l.starts_with(header));
        let n: usize = lines.next().unwrap().split_whitespace().nth(1).unwrap().parse().unwrap();
        let mut lines = lines.skip_while(|l| l.starts_with("SCALARS") || l.starts_with("LOOKUP"));
        (0..n).map(|_| lines.next().unwrap()).collect()
    }

    #[test]
    fn single_element() {
        let m = synth::box_mesh([1, 1, 1], [0.0; 3], [1.0; 3], 0.0, 0);
        let one = TetMesh::new(m.vertices().to_vec(), vec![m.tets()[0]], vec![1], None).unwrap();
        let agg = Agglomeration::from_assignment(vec![0]).unwrap();
        let text = format_vtk(&one, &agg);
        assert!(text.contains("CELLS 1 5\n"));
        assert!(text.contains("CELL_TYPES 1\n10\n"));
        assert!(text.contains("SCALARS element_id int 1\nLOOKUP_TABLE default\n0\n"));
    }

    #[test]
    fn cell_count_and_ids() {
        let m = synth::box_mesh([2, 1, 1], [0.0; 3], [2.0, 1.0, 1.0], 0.0, 0);
        let labels: Vec<usize> = (0..m.n_tets()).map(|t| t % 2).collect();
        let agg = Agglomeration::from_assignment(labels.clone()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.vtk");
        write_vtk(&m, &agg, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(section(&text, "CELLS").len(), m.n_tets());
        let types = section(&text, "CELL_TYPES");
        assert!(types.iter().all(|t| *t == "10"));
        let cd = section(&text, "CELL_DATA");
        let ids: Vec<usize> = cd.iter().map(|s| s.parse().unwrap()).collect();
        assert_eq!(ids, labels);
    }

    #[test]
    fn rejects_foreign_agglomeration() {
        let m = synth::box_mesh([1, 1, 1], [0.0; 3], [1.0; 3], 0.0, 0);
        let agg = Agglomeration::from_assignment(vec![0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(write_vtk(&m, &agg, dir.path().join("x.vtk")).is_err());
    }
}
