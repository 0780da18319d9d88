//! Coordinate types, spherical conversion and point-to-segment distance.
//!
//! Spherical coordinates are always taken relative to a sensor origin:
//! `r` is the range, `phi` the azimuth in `[-pi, pi)` measured from +x
//! towards +y, and `theta` the signed elevation above the xy-plane in
//! `[-pi/2, pi/2]`.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::MapError;

pub type Point3 = nalgebra::Point3<f64>;
pub type Vector3 = nalgebra::Vector3<f64>;

/// Class index carried by a lidar return. `0` is reserved for free space
/// inside the map, so for hits it means "unlabeled".
pub type ClassId = u16;

pub fn is_finite(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalCoord {
    pub r: f64,
    pub phi: f64,
    pub theta: f64,
}

impl SphericalCoord {
    pub fn new(r: f64, phi: f64, theta: f64) -> Self {
        Self { r, phi, theta }
    }

    pub fn is_valid(&self) -> bool {
        self.r.is_finite()
            && self.r >= 0.0
            && (-PI..PI).contains(&self.phi)
            && (-FRAC_PI_2..=FRAC_PI_2).contains(&self.theta)
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    // rem_euclid can return exactly 2pi for tiny negative inputs
    if w >= PI {
        -PI
    } else {
        w
    }
}

/// Spherical coordinates of `hit` as seen from `origin`.
pub fn to_spherical(origin: &Point3, hit: &Point3) -> Result<SphericalCoord, MapError> {
    let d = hit - origin;
    let r = d.norm();
    if !r.is_finite() {
        return Err(MapError::NonFinite);
    }
    if r == 0.0 {
        return Err(MapError::DegenerateBeam);
    }
    let horiz = d.x.hypot(d.y);
    let mut phi = d.y.atan2(d.x);
    if phi >= PI {
        phi = -PI;
    }
    let theta = d.z.atan2(horiz);
    Ok(SphericalCoord { r, phi, theta })
}

pub fn from_spherical(origin: &Point3, s: &SphericalCoord) -> Point3 {
    let (sp, cp) = s.phi.sin_cos();
    let (st, ct) = s.theta.sin_cos();
    origin + Vector3::new(s.r * ct * cp, s.r * ct * sp, s.r * st)
}

/// A lidar return: the segment from the sensor origin to a labeled hit.
#[derive(Clone, Debug, PartialEq)]
pub struct Beam {
    origin: Point3,
    endpoint: Point3,
    label: ClassId,
    spherical: SphericalCoord,
}

impl Beam {
    pub fn new(origin: Point3, endpoint: Point3, label: ClassId) -> Result<Self, MapError> {
        if !is_finite(&origin) || !is_finite(&endpoint) {
            return Err(MapError::NonFinite);
        }
        let spherical = to_spherical(&origin, &endpoint)?;
        Ok(Self {
            origin,
            endpoint,
            label,
            spherical,
        })
    }

    pub fn origin(&self) -> &Point3 {
        &self.origin
    }

    pub fn endpoint(&self) -> &Point3 {
        &self.endpoint
    }

    pub fn label(&self) -> ClassId {
        self.label
    }

    pub fn spherical(&self) -> &SphericalCoord {
        &self.spherical
    }

    pub fn range(&self) -> f64 {
        self.spherical.r
    }

    /// Point at range fraction `s` along the beam.
    pub fn at_fraction(&self, s: f64) -> Point3 {
        self.origin + (self.endpoint - self.origin) * s
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentDistance {
    pub distance: f64,
    /// Fraction along the beam of the closest point, in `[0, 1]`.
    pub s: f64,
}

pub fn point_to_segment(p: &Point3, beam: &Beam) -> SegmentDistance {
    segment_distance(p, &beam.origin, &beam.endpoint)
}

#[inline]
pub(crate) fn segment_distance(p: &Point3, a: &Point3, b: &Point3) -> SegmentDistance {
    let ab = b - a;
    let ap = p - a;
    let len2 = ab.norm_squared();
    let s = if len2 > 0.0 {
        (ap.dot(&ab) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let foot = a + ab * s;
    SegmentDistance {
        distance: (p - foot).norm(),
        s,
    }
}
