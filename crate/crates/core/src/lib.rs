//! Agglomeration of tetrahedral meshes into polyhedral meshes.
//!
//! The pipeline recursively bisects the element-adjacency (dual) graph of a
//! tetrahedral mesh until every piece is smaller than a target diameter. The
//! bisection model is pluggable: a graph neural network trained on the
//! expected normalized cut ([`bisect::GnnBisector`]), k-means on element
//! centroids ([`bisect::KMeansBisector`]) or a multilevel
//! coarsen/grow/refine bisector ([`bisect::MultilevelBisector`]).
//!
//! ```no_run
//! use polyagg::{agglomerate::{agglomerate, AgglomerationConfig, TargetSize}, bisect::KMeansBisector, mesh};
//!
//! let mesh = mesh::load_mesh("cube.msh")?;
//! let cfg = AgglomerationConfig::new(TargetSize::Fraction(0.25));
//! let out = agglomerate(&mesh, &KMeansBisector::default(), &cfg)?;
//! println!("{} elements", out.agglomeration.n_elements());
//! # Ok::<(), polyagg::Error>(())
//! ```

pub mod agglomerate;
pub mod bisect;
pub mod dataset;
mod error;
pub mod features;
pub mod graph;
pub mod loss;
pub mod mesh;
pub mod nn;
pub mod optim;
pub mod par;
pub mod quality;
pub mod seed;
pub mod train;

pub use error::{Error, Result};
pub use par::Exec;
