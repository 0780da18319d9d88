//! Semantic occupancy mapping with Bayesian kernel inference.
//!
//! Scans are turned into labeled training points plus free-space evidence,
//! bucketed per block, and folded into per-voxel Dirichlet concentrations
//! with a compactly supported kernel. Free space can be represented by
//! points sampled along the beams or by the beams themselves, retrieved
//! through an R-tree keyed on spherical coordinates.

pub mod error;
pub mod freespace;
pub mod geometry;
pub mod kernel;
pub mod occupancy_map;
pub mod scan;
pub mod sim2d;
pub mod spherical_index;
pub mod synthetic;

pub use error::MapError;
pub use freespace::{FreeSpaceStrategy, SamplingConfig};
pub use geometry::{Beam, ClassId, Point3, SphericalCoord, Vector3};
pub use kernel::{BeamWeighting, KernelParams};
pub use occupancy_map::{update_map, BlockMap, MapConfig};
pub use scan::{LabeledPoint, Scan};
