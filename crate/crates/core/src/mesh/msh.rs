//! GMSH MSH 2.2 ASCII reader and writer.
//!
//! Only tetrahedra (element type 4) are kept; the first element tag (the
//! physical tag) becomes the region label. Nodes not referenced by any
//! tetrahedron are dropped and the rest renumbered densely in file order.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{Point3, RegionId, TetMesh};
use crate::{Error, Result};

const TET_TYPE: i64 = 4;

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    /// Next non-blank line, trimmed.
    fn next(&mut self) -> Option<&'a str> {
        for (i, l) in self.inner.by_ref() {
            self.line = i + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Some(t);
            }
        }
        None
    }

    fn expect(&mut self, what: &str) -> Result<&'a str> {
        let line = self.line;
        self.next().ok_or_else(|| Error::Parse {
            line: line + 1,
            msg: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: Option<&str>, what: &str) -> Result<T> {
    let tok = tok.ok_or_else(|| lines.err(format!("missing {what}")))?;
    tok.parse()
        .map_err(|_| lines.err(format!("invalid {what} '{tok}'")))
}

fn parse_count(lines: &mut Lines, section: &str) -> Result<usize> {
    let l = lines.expect(&format!("{section} count"))?;
    let mut it = l.split_whitespace();
    let n = parse_num(lines, it.next(), &format!("{section} count"))?;
    if it.next().is_some() {
        return Err(lines.err(format!("malformed {section} count line '{l}'")));
    }
    Ok(n)
}

fn expect_end(lines: &mut Lines, section: &str, count: usize) -> Result<()> {
    let end = format!("$End{section}");
    let l = lines.expect(&end)?;
    if l != end {
        return Err(lines.err(format!(
            "expected {end} after {count} {section} rows, found '{l}' ($ {section} count disagrees with listed rows)"
        )));
    }
    Ok(())
}

/// Parses an MSH 2.2 ASCII file into a [`TetMesh`] with ρ = 0 everywhere.
pub fn read_msh(path: impl AsRef<Path>) -> Result<TetMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_msh(&text)
}

pub(crate) fn parse_msh(text: &str) -> Result<TetMesh> {
    let mut lines = Lines::new(text);
    let mut saw_format = false;
    let mut nodes: Option<(HashMap<i64, usize>, Vec<Point3>)> = None;
    let mut tets_raw: Vec<([i64; 4], RegionId)> = Vec::new();
    let mut saw_elements = false;

    while let Some(header) = lines.next() {
        match header {
            "$MeshFormat" => {
                let l = lines.expect("format line")?;
                let mut it = l.split_whitespace();
                let version = it.next().unwrap_or("");
                if version != "2.2" {
                    return Err(Error::UnsupportedFormat(format!(
                        "MSH version {version}; only 2.2 ASCII is supported"
                    )));
                }
                let file_type: i64 = parse_num(&lines, it.next(), "file type")?;
                if file_type != 0 {
                    return Err(Error::UnsupportedFormat("binary MSH".into()));
                }
                expect_end(&mut lines, "MeshFormat", 1)?;
                saw_format = true;
            }
            "$Nodes" => {
                if !saw_format {
                    return Err(lines.err("$Nodes before $MeshFormat"));
                }
                let n = parse_count(&mut lines, "Nodes")?;
                let mut ids = HashMap::with_capacity(n);
                let mut pts = Vec::with_capacity(n);
                for _ in 0..n {
                    let l = lines.expect("node row")?;
                    if l.starts_with('$') {
                        return Err(lines.err(format!(
                            "found '{l}' after {} of {n} node rows ($Nodes count disagrees with listed rows)",
                            pts.len()
                        )));
                    }
                    let mut it = l.split_whitespace();
                    let id: i64 = parse_num(&lines, it.next(), "node id")?;
                    let p = [
                        parse_num(&lines, it.next(), "x coordinate")?,
                        parse_num(&lines, it.next(), "y coordinate")?,
                        parse_num(&lines, it.next(), "z coordinate")?,
                    ];
                    if ids.insert(id, pts.len()).is_some() {
                        return Err(lines.err(format!("duplicate node id {id}")));
                    }
                    pts.push(p);
                }
                expect_end(&mut lines, "Nodes", n)?;
                nodes = Some((ids, pts));
            }
            "$Elements" => {
                if !saw_format {
                    return Err(lines.err("$Elements before $MeshFormat"));
                }
                let n = parse_count(&mut lines, "Elements")?;
                for k in 0..n {
                    let l = lines.expect("element row")?;
                    if l.starts_with('$') {
                        return Err(lines.err(format!(
                            "found '{l}' after {k} of {n} element rows ($Elements count disagrees with listed rows)"
                        )));
                    }
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    let mut it = toks.iter().copied();
                    let _id: i64 = parse_num(&lines, it.next(), "element id")?;
                    let ty: i64 = parse_num(&lines, it.next(), "element type")?;
                    let ntags: usize = parse_num(&lines, it.next(), "tag count")?;
                    let mut tags = Vec::with_capacity(ntags);
                    for _ in 0..ntags {
                        tags.push(parse_num::<i64>(&lines, it.next(), "element tag")?);
                    }
                    if ty != TET_TYPE {
                        continue;
                    }
                    let mut v = [0i64; 4];
                    for slot in &mut v {
                        *slot = parse_num(&lines, it.next(), "tet node")?;
                    }
                    if it.next().is_some() {
                        return Err(lines.err("too many nodes for a tetrahedron"));
                    }
                    tets_raw.push((v, tags.first().copied().unwrap_or(0)));
                }
                expect_end(&mut lines, "Elements", n)?;
                saw_elements = true;
            }
            h if h.starts_with("$End") => {
                return Err(lines.err(format!("unexpected '{h}'")));
            }
            h if h.starts_with('$') => {
                // Skip unknown sections such as $PhysicalNames.
                let end = format!("$End{}", &h[1..]);
                loop {
                    let l = lines.expect(&end)?;
                    if l == end {
                        break;
                    }
                }
            }
            other => {
                return Err(lines.err(format!("expected a section header, found '{other}'")));
            }
        }
    }

    if !saw_format {
        return Err(Error::Parse {
            line: 1,
            msg: "missing $MeshFormat section".into(),
        });
    }
    let (ids, pts) = nodes.ok_or_else(|| lines.err("missing $Nodes section"))?;
    if !saw_elements {
        return Err(lines.err("missing $Elements section"));
    }

    // Dense renumbering of the nodes actually used, in file order.
    let mut used = vec![false; pts.len()];
    let mut tets_file = Vec::with_capacity(tets_raw.len());
    let mut regions = Vec::with_capacity(tets_raw.len());
    for (t, (v, region)) in tets_raw.iter().enumerate() {
        let mut idx = [0usize; 4];
        for k in 0..4 {
            idx[k] = *ids.get(&v[k]).ok_or_else(|| {
                Error::Validation(format!("tet {t} references missing node {}", v[k]))
            })?;
            used[idx[k]] = true;
        }
        tets_file.push(idx);
        regions.push(*region);
    }
    let mut remap = vec![usize::MAX; pts.len()];
    let mut vertices = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        if used[i] {
            remap[i] = vertices.len();
            vertices.push(*p);
        }
    }
    let tets = tets_file.into_iter().map(|t| t.map(|v| remap[v])).collect();
    TetMesh::new(vertices, tets, regions, None)
}

/// Writes the mesh as MSH 2.2 ASCII. Coordinates use the shortest
/// representation that round-trips exactly.
pub fn write_msh(mesh: &TetMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_msh(mesh)).map_err(|e| Error::io(path, e))
}

pub(crate) fn format_msh(mesh: &TetMesh) -> String {
    let mut s = String::new();
    s.push_str("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n");
    let _ = writeln!(s, "$Nodes\n{}", mesh.n_vertices());
    for (i, p) in mesh.vertices().iter().enumerate() {
        let _ = writeln!(s, "{} {} {} {}", i + 1, p[0], p[1], p[2]);
    }
    s.push_str("$EndNodes\n");
    let _ = writeln!(s, "$Elements\n{}", mesh.n_tets());
    for (t, tet) in mesh.tets().iter().enumerate() {
        let r = mesh.region_of_tet()[t];
        let _ = writeln!(
            s,
            "{} 4 2 {r} {r} {} {} {} {}",
            t + 1,
            tet[0] + 1,
            tet[1] + 1,
            tet[2] + 1,
            tet[3] + 1
        );
    }
    s.push_str("$EndElements\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE_TET: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
4
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
$EndNodes
$Elements
1
1 4 2 7 1 1 2 3 4
$EndElements
";

    // Two tets sharing face (2,3,4); a triangle and a point element that must
    // be ignored; node 9 unused; tags 1 and 2.
    const TWO_TETS: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
3 1 \"left\"
3 2 \"right\"
$EndPhysicalNames
$Nodes
6
1 0 0 0
2 1 0 0
3 0 1 0
4 0 0 1
5 1 1 1
9 5 5 5
$EndNodes
$Elements
4
1 15 2 0 0 9
2 2 2 3 3 2 3 4
3 4 2 1 11 1 2 3 4
4 4 2 2 12 5 2 3 4
$EndElements
";

    #[test]
    fn minimal_file() {
        let m = parse_msh(ONE_TET).unwrap();
        assert_eq!(m.n_tets(), 1);
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.region_of_tet(), &[7]);
        assert!(!m.has_params());
        assert_eq!(m.rho_of_tet(0), 0.0);
    }

    #[test]
    fn two_regions_and_ignored_elements() {
        let m = parse_msh(TWO_TETS).unwrap();
        assert_eq!(m.region_of_tet(), &[1, 2]);
        assert_eq!(m.n_vertices(), 5);
        assert_eq!(m.vertices()[4], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn count_mismatch_is_a_parse_error() {
        let bad = ONE_TET.replace("$Elements\n1\n", "$Elements\n2\n");
        match parse_msh(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 14),
            other => panic!("expected parse error, got {other:?}"),
        }
        let short = ONE_TET.replace("$Nodes\n4\n", "$Nodes\n3\n");
        assert!(matches!(parse_msh(&short), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_other_versions() {
        let v4 = ONE_TET.replace("2.2 0 8", "4.1 0 8");
        assert!(matches!(parse_msh(&v4), Err(Error::UnsupportedFormat(_))));
        let bin = ONE_TET.replace("2.2 0 8", "2.2 1 8");
        assert!(matches!(parse_msh(&bin), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn missing_node_is_validation_error() {
        let bad = ONE_TET.replace("1 4 2 7 1 1 2 3 4", "1 4 2 7 1 1 2 3 8");
        assert!(matches!(parse_msh(&bad), Err(Error::Validation(_))));
    }

    #[test]
    fn malformed_header_reports_line() {
        let bad = ONE_TET.replace("$Nodes", "Nodes");
        match parse_msh(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
