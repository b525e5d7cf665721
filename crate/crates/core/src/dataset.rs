//! Directories of MSH meshes used as training sets.

use std::path::{Path, PathBuf};

use crate::mesh::{load_mesh, TetMesh};
use crate::nn::ModelConfig;
use crate::train::Sample;
use crate::{Error, Result};

/// `.msh` files directly inside `dir`, sorted by file name.
pub fn list_msh(dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let rd = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in rd {
        let p = entry.map_err(|e| Error::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("msh")) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Every mesh in `dir` with its file stem.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<(String, TetMesh)>> {
    let dir = dir.as_ref();
    let paths = list_msh(dir)?;
    if paths.is_empty() {
        return Err(Error::Config(format!("no .msh files in {}", dir.display())));
    }
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, load_mesh(&p)?))
        })
        .collect()
}

/// Training samples for `model`; the heterogeneous model needs every mesh to
/// carry region parameters.
pub fn load_samples(dir: impl AsRef<Path>, model: ModelConfig) -> Result<Vec<Sample>> {
    let physical = model == ModelConfig::HeteroEnhanced;
    load_dir(dir)?
        .into_iter()
        .map(|(name, mesh)| {
            Sample::from_mesh(name.clone(), &mesh, physical)
                .map_err(|e| match e {
                    Error::Config(msg) => Error::Config(format!("{name}: {msg}")),
                    other => other,
                })
        })
        .collect()
}
