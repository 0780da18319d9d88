//! Free-space training data built from the beams of a scan.
//!
//! Point strategies place samples strictly between the sensor and the hit.
//! Randomized strategies draw a fixed number of samples per beam from a
//! per-beam ChaCha stream keyed by `(seed, beam index)`, so the result does
//! not depend on how beams are scheduled across threads.

use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::geometry::{Beam, Point3};
use crate::kernel::BeamWeighting;
use crate::scan::Scan;
use crate::spherical_index::SphericalRTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeSample {
    pub position: Point3,
    pub source_beam: usize,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FreeSpaceStrategy {
    #[default]
    None,
    EvenlySpaced {
        gap: f64,
    },
    UniformRandom {
        count: usize,
    },
    LinearWeighted {
        count: usize,
    },
    LineBased {
        weighting: BeamWeighting,
    },
}

impl FreeSpaceStrategy {
    pub fn validate(&self) -> Result<(), MapError> {
        match *self {
            FreeSpaceStrategy::EvenlySpaced { gap } if !(gap > 0.0 && gap.is_finite()) => Err(
                MapError::InvalidConfig(format!("sampling gap must be > 0, got {gap}")),
            ),
            FreeSpaceStrategy::UniformRandom { count: 0 }
            | FreeSpaceStrategy::LinearWeighted { count: 0 } => Err(MapError::InvalidConfig(
                "samples per beam must be >= 1".into(),
            )),
            _ => Ok(()),
        }
    }

    pub fn is_line_based(&self) -> bool {
        matches!(self, FreeSpaceStrategy::LineBased { .. })
    }
}

impl fmt::Display for FreeSpaceStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FreeSpaceStrategy::None => write!(f, "none"),
            FreeSpaceStrategy::EvenlySpaced { gap } => write!(f, "even:{gap}"),
            FreeSpaceStrategy::UniformRandom { count } => write!(f, "uniform:{count}"),
            FreeSpaceStrategy::LinearWeighted { count } => write!(f, "linear:{count}"),
            FreeSpaceStrategy::LineBased { weighting } => {
                let w = match weighting {
                    BeamWeighting::Uniform => "uniform",
                    BeamWeighting::Linear => "linear",
                    BeamWeighting::Bilinear => "bilinear",
                };
                write!(f, "line:{w}")
            }
        }
    }
}

impl FromStr for FreeSpaceStrategy {
    type Err = MapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || {
            MapError::InvalidConfig(format!(
                "bad free-space strategy '{s}', expected none|even:<gap>|uniform:<k>|linear:<k>|line:<uniform|linear|bilinear>"
            ))
        };
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let strategy = match (kind, arg) {
            ("none", None) => FreeSpaceStrategy::None,
            ("even", Some(a)) => FreeSpaceStrategy::EvenlySpaced {
                gap: a.parse().map_err(|_| bad())?,
            },
            ("uniform", Some(a)) => FreeSpaceStrategy::UniformRandom {
                count: a.parse().map_err(|_| bad())?,
            },
            ("linear", Some(a)) => FreeSpaceStrategy::LinearWeighted {
                count: a.parse().map_err(|_| bad())?,
            },
            ("line", Some(a)) => FreeSpaceStrategy::LineBased {
                weighting: match a {
                    "uniform" => BeamWeighting::Uniform,
                    "linear" => BeamWeighting::Linear,
                    "bilinear" => BeamWeighting::Bilinear,
                    _ => return Err(bad()),
                },
            },
            _ => return Err(bad()),
        };
        strategy.validate()?;
        Ok(strategy)
    }
}

impl TryFrom<String> for FreeSpaceStrategy {
    type Error = MapError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<FreeSpaceStrategy> for String {
    fn from(value: FreeSpaceStrategy) -> Self {
        value.to_string()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub strategy: FreeSpaceStrategy,
    pub rng_seed: u64,
}

/// Free-space evidence for one frame.
#[derive(Debug)]
pub enum FreeSpaceData {
    None,
    Points(Vec<FreeSample>),
    Lines {
        index: SphericalRTree,
        weighting: BeamWeighting,
    },
}

impl FreeSpaceData {
    pub fn points(&self) -> &[FreeSample] {
        match self {
            FreeSpaceData::Points(p) => p,
            _ => &[],
        }
    }
}

/// Deterministic RNG stream for one beam.
pub fn beam_rng(seed: u64, beam_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(beam_index as u64);
    rng
}

fn sample_at_range(beam: &Beam, index: usize, r: f64) -> FreeSample {
    FreeSample {
        position: beam.at_fraction(r / beam.range()),
        source_beam: index,
        weight: 1.0,
    }
}

/// Keeps `r` inside the open interval `(0, r_max)`.
#[inline]
fn open_range(r: f64, r_max: f64) -> f64 {
    if r >= r_max {
        r_max * (1.0 - f64::EPSILON)
    } else {
        r
    }
}

pub fn sample_evenly(beam: &Beam, gap: f64) -> Vec<FreeSample> {
    sample_evenly_indexed(beam, 0, gap)
}

fn sample_evenly_indexed(beam: &Beam, index: usize, gap: f64) -> Vec<FreeSample> {
    let r_max = beam.range();
    let mut out = Vec::new();
    let mut k = 1usize;
    loop {
        let r = k as f64 * gap;
        if r >= r_max {
            break;
        }
        out.push(sample_at_range(beam, index, r));
        k += 1;
    }
    out
}

pub fn sample_linear_weighted<R: Rng + ?Sized>(
    beam: &Beam,
    count: usize,
    rng: &mut R,
) -> Vec<FreeSample> {
    sample_linear_weighted_indexed(beam, 0, count, rng)
}

fn sample_linear_weighted_indexed<R: Rng + ?Sized>(
    beam: &Beam,
    index: usize,
    count: usize,
    rng: &mut R,
) -> Vec<FreeSample> {
    let r_max = beam.range();
    (0..count)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            // inverse CDF of p(r) = 2r / r_max^2
            sample_at_range(beam, index, open_range(r_max * u.sqrt(), r_max))
        })
        .collect()
}

pub fn sample_uniform<R: Rng + ?Sized>(beam: &Beam, count: usize, rng: &mut R) -> Vec<FreeSample> {
    sample_uniform_indexed(beam, 0, count, rng)
}

fn sample_uniform_indexed<R: Rng + ?Sized>(
    beam: &Beam,
    index: usize,
    count: usize,
    rng: &mut R,
) -> Vec<FreeSample> {
    let r_max = beam.range();
    (0..count)
        .map(|_| {
            let u: f64 = rng.sample(Open01);
            sample_at_range(beam, index, open_range(r_max * u, r_max))
        })
        .collect()
}

pub fn build_free_space(scan: &Scan, cfg: &SamplingConfig) -> Result<FreeSpaceData, MapError> {
    cfg.strategy.validate()?;
    let beams = scan.beams();
    let seed = cfg.rng_seed;
    let per_beam = |f: &(dyn Fn(usize, &Beam) -> Vec<FreeSample> + Sync)| -> Vec<FreeSample> {
        beams
            .par_iter()
            .enumerate()
            .map(|(i, b)| f(i, b))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    };
    Ok(match cfg.strategy {
        FreeSpaceStrategy::None => FreeSpaceData::None,
        FreeSpaceStrategy::EvenlySpaced { gap } => {
            FreeSpaceData::Points(per_beam(&|i, b| sample_evenly_indexed(b, i, gap)))
        }
        FreeSpaceStrategy::UniformRandom { count } => FreeSpaceData::Points(per_beam(&|i, b| {
            sample_uniform_indexed(b, i, count, &mut beam_rng(seed, i))
        })),
        FreeSpaceStrategy::LinearWeighted { count } => FreeSpaceData::Points(per_beam(&|i, b| {
            sample_linear_weighted_indexed(b, i, count, &mut beam_rng(seed, i))
        })),
        FreeSpaceStrategy::LineBased { weighting } => FreeSpaceData::Lines {
            index: SphericalRTree::build(beams.to_vec(), *scan.origin())?,
            weighting,
        },
    })
}
