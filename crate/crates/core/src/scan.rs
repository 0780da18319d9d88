use crate::error::MapError;
use crate::geometry::{is_finite, Beam, ClassId, Point3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledPoint {
    pub position: Point3,
    pub label: ClassId,
}

impl LabeledPoint {
    pub fn new(position: Point3, label: ClassId) -> Self {
        Self { position, label }
    }
}

/// One sensor frame: a shared origin and the beams to every return.
#[derive(Clone, Debug)]
pub struct Scan {
    origin: Point3,
    beams: Vec<Beam>,
}

impl Scan {
    /// Builds beams from `origin` to every hit. Zero-length and non-finite
    /// returns are rejected rather than skipped.
    pub fn new(origin: Point3, hits: &[LabeledPoint]) -> Result<Self, MapError> {
        if !is_finite(&origin) {
            return Err(MapError::NonFinite);
        }
        let beams = hits
            .iter()
            .map(|h| Beam::new(origin, h.position, h.label))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { origin, beams })
    }

    pub fn from_beams(origin: Point3, beams: Vec<Beam>) -> Result<Self, MapError> {
        if !is_finite(&origin) {
            return Err(MapError::NonFinite);
        }
        if let Some(b) = beams.iter().find(|b| *b.origin() != origin) {
            return Err(MapError::OriginMismatch {
                expected: origin.coords.into(),
                found: b.origin().coords.into(),
            });
        }
        Ok(Self { origin, beams })
    }

    pub fn origin(&self) -> &Point3 {
        &self.origin
    }

    pub fn beams(&self) -> &[Beam] {
        &self.beams
    }

    pub fn len(&self) -> usize {
        self.beams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beams.is_empty()
    }

    pub fn hits(&self) -> impl Iterator<Item = LabeledPoint> + '_ {
        self.beams
            .iter()
            .map(|b| LabeledPoint::new(*b.endpoint(), b.label()))
    }
}
