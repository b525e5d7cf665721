//! `<mesh>.params.json` sidecar: `{"regions": {"<label>": <rho>}}`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RegionId;
use crate::{Error, Result};

#[derive(Serialize, Deserialize)]
struct Sidecar {
    regions: BTreeMap<String, f64>,
}

/// `dir/cube.msh` → `dir/cube.params.json`.
pub fn sidecar_path(mesh_path: impl AsRef<Path>) -> PathBuf {
    mesh_path.as_ref().with_extension("params.json")
}

pub fn read_params(path: impl AsRef<Path>) -> Result<BTreeMap<RegionId, f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar: Sidecar = serde_json::from_str(&text)
        .map_err(|e| Error::Validation(format!("{}: {e}", path.display())))?;
    sidecar
        .regions
        .into_iter()
        .map(|(k, v)| {
            let label = k.trim().parse::<RegionId>().map_err(|_| {
                Error::Validation(format!("{}: region label '{k}' is not an integer", path.display()))
            })?;
            Ok((label, v))
        })
        .collect()
}

pub fn write_params(params: &BTreeMap<RegionId, f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let sidecar = Sidecar {
        regions: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
    };
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
