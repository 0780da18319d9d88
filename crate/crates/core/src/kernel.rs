//! Sparse kernel and along-beam weights.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geometry::{point_to_segment, Beam, Point3};

pub const SUPPORT_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Support radius `l` in meters.
    pub length: f64,
    /// Scale `sigma0`.
    pub scale: f64,
}

impl Default for KernelParams {
    fn default() -> Self {
        Self {
            length: 0.3,
            scale: 0.1,
        }
    }
}

impl KernelParams {
    pub fn new(length: f64, scale: f64) -> Result<Self, MapError> {
        let p = Self { length, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), MapError> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(MapError::InvalidConfig(format!(
                "kernel length must be > 0, got {}",
                self.length
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(MapError::InvalidConfig(format!(
                "kernel scale must be > 0, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Compactly supported kernel value at distance `d`.
///
/// Zero for `d >= l`; otherwise
/// `sigma0 * ((2 + cos(2 pi r)) / 3 + sin(2 pi r) / (2 pi))` with `r = d / l`.
///
/// The value just inside the support is close to `sigma0`, so the cut-off is
/// a jump. Distances within a relative [`SUPPORT_TOLERANCE`] of `l` count as
/// outside: voxel lattices with `l` equal to the resolution produce exact-`l`
/// distances that only differ from `l` by rounding.
#[inline]
pub fn sparse_kernel(d: f64, params: &KernelParams) -> f64 {
    if d >= params.length * (1.0 - SUPPORT_TOLERANCE) {
        return 0.0;
    }
    let (s, c) = (2.0 * PI * d / params.length).sin_cos();
    params.scale * ((2.0 + c) / 3.0 + s / (2.0 * PI))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamWeighting {
    #[default]
    Uniform,
    /// Grows from 0 at the sensor to 1 at the hit.
    Linear,
    /// Triangle peaking at mid-beam, zero at both ends.
    Bilinear,
}

impl BeamWeighting {
    /// Weight at range fraction `s` in `[0, 1]`.
    #[inline]
    pub fn weight(self, s: f64) -> f64 {
        match self {
            BeamWeighting::Uniform => 1.0,
            BeamWeighting::Linear => s,
            BeamWeighting::Bilinear => 1.0 - (2.0 * s - 1.0).abs(),
        }
    }
}

pub fn beam_weight(s: f64, w: BeamWeighting) -> f64 {
    w.weight(s)
}

pub fn weighted_line_kernel(
    p: &Point3,
    beam: &Beam,
    params: &KernelParams,
    w: BeamWeighting,
) -> f64 {
    let d = point_to_segment(p, beam);
    w.weight(d.s) * sparse_kernel(d.distance, params)
}
