//! Lidar sequences in the public driving-benchmark layout: `NNNNNN.bin`
//! scans of float32 `x, y, z, intensity`, `NNNNNN.label` files with one
//! u32 per point, and a poses file with one row-major 3x4 transform per
//! line. Poses must already map lidar coordinates to the world frame.

use std::fs;
use std::ops::Range;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bkimap::{LabeledPoint, Point3, Scan};

use crate::classes::LabelMap;

/// Rigid transform `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
            translation: [0.0; 3],
        }
    }

    /// From the 12 numbers of a 3x4 matrix in row-major order. Rejects
    /// anything that is not a proper rotation within `1e-4`.
    pub fn from_row_major(m: &[f64; 12]) -> Result<Self> {
        let rotation = [[m[0], m[1], m[2]], [m[4], m[5], m[6]], [m[8], m[9], m[10]]];
        let translation = [m[3], m[7], m[11]];
        if m.iter().any(|v| !v.is_finite()) {
            bail!("non-finite entry");
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[k][i] * rotation[k][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-4 {
                    bail!("rotation block is not orthonormal");
                }
            }
        }
        let r = &rotation;
        let det = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1])
            - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
            + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
        if det < 0.0 {
            bail!("rotation block is a reflection");
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        std::array::from_fn(|i| {
            r[i][0] * p[0] + r[i][1] * p[1] + r[i][2] * p[2] + self.translation[i]
        })
    }
}

/// One frame in world coordinates. Labels hold the raw semantic id (lower
/// 16 bits of the label word) until [`Frame::to_scan`] maps them.
#[derive(Clone, Debug)]
pub struct Frame {
    pub index: usize,
    pub pose: Pose,
    pub points: Vec<LabeledPoint>,
}

impl Frame {
    pub fn name(&self) -> String {
        format!("{:06}", self.index)
    }

    /// Sensor origin: the pose translation.
    pub fn origin(&self) -> Point3 {
        Point3::from(self.pose.translation)
    }

    /// Scan for the mapper. Returns at the sensor origin (zero range) carry
    /// no direction and are dropped.
    pub fn to_scan(&self, labels: LabelMap, num_classes: u16) -> Result<Scan> {
        let origin = self.origin();
        let mut hits = Vec::with_capacity(self.points.len());
        for p in &self.points {
            if (p.position - origin).norm() < 1e-6 {
                continue;
            }
            let label = labels.apply(p.label);
            if label > num_classes {
                bail!(
                    "frame {}: label {} exceeds class count {num_classes} (raw ids need label_map = \"semantic-kitti\")",
                    self.name(),
                    label
                );
            }
            hits.push(LabeledPoint::new(p.position, label));
        }
        Scan::new(origin, &hits).with_context(|| format!("frame {}", self.name()))
    }
}

#[derive(Clone, Debug, Default)]
pub struct FrameSource {
    pub frames: Vec<Frame>,
}

impl FrameSource {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

pub fn read_poses(path: &Path) -> Result<Vec<Pose>> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read poses file {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let values: Vec<f64> = line
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .with_context(|| format!("pose line {}: not a number", i + 1))?;
            let m: [f64; 12] = values.try_into().map_err(|v: Vec<f64>| {
                anyhow::anyhow!("pose line {}: expected 12 values, found {}", i + 1, v.len())
            })?;
            Pose::from_row_major(&m).with_context(|| format!("pose line {}", i + 1))
        })
        .collect()
}

fn read_exact_records(path: &Path, record: usize) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    if bytes.len() % record != 0 {
        bail!(
            "{}: size {} is not a multiple of {record} bytes",
            path.display(),
            bytes.len()
        );
    }
    Ok(bytes)
}

/// Reads one frame and transforms it into the world frame.
pub fn read_frame(scan: &Path, label: &Path, pose: Pose, index: usize) -> Result<Frame> {
    let name = format!("{index:06}");
    let raw = read_exact_records(scan, 16).with_context(|| format!("frame {name}"))?;
    let words = read_exact_records(label, 4).with_context(|| format!("frame {name}"))?;
    let (n, m) = (raw.len() / 16, words.len() / 4);
    if n != m {
        bail!(
            "frame {name}: {n} points in {} but {m} labels in {}",
            scan.display(),
            label.display()
        );
    }
    let f32_at = |b: &[u8]| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64;
    let points = raw
        .chunks_exact(16)
        .zip(words.chunks_exact(4))
        .map(|(p, l)| {
            let local = [f32_at(&p[0..4]), f32_at(&p[4..8]), f32_at(&p[8..12])];
            let word = u32::from_le_bytes([l[0], l[1], l[2], l[3]]);
            LabeledPoint::new(Point3::from(pose.apply(local)), (word & 0xFFFF) as u16)
        })
        .collect();
    Ok(Frame {
        index,
        pose,
        points,
    })
}

/// A sequence on disk, read one frame at a time.
#[derive(Clone, Debug)]
pub struct Sequence {
    scan_dir: PathBuf,
    label_dir: PathBuf,
    poses: Vec<Pose>,
}

impl Sequence {
    pub fn open(scan_dir: &Path, label_dir: &Path, poses_file: &Path) -> Result<Self> {
        Ok(Self {
            scan_dir: scan_dir.to_path_buf(),
            label_dir: label_dir.to_path_buf(),
            poses: read_poses(poses_file)?,
        })
    }

    /// Number of posed frames.
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    pub fn check_range(&self, range: &Range<usize>) -> Result<()> {
        if range.end > self.len() {
            bail!(
                "frames {range:?} requested but the sequence has {} poses",
                self.len()
            );
        }
        Ok(())
    }

    pub fn frame(&self, index: usize) -> Result<Frame> {
        let pose = *self
            .poses
            .get(index)
            .with_context(|| format!("frame {index:06} has no pose"))?;
        let scan = self.scan_dir.join(format!("{index:06}.bin"));
        let label = self.label_dir.join(format!("{index:06}.label"));
        read_frame(&scan, &label, pose, index)
    }
}

/// Loads frames `range` (all posed frames when `None`).
pub fn load_frames(
    scan_dir: &Path,
    label_dir: &Path,
    poses_file: &Path,
    range: Option<Range<usize>>,
) -> Result<FrameSource> {
    let seq = Sequence::open(scan_dir, label_dir, poses_file)?;
    let range = range.unwrap_or(0..seq.len());
    seq.check_range(&range)?;
    let frames = range.map(|i| seq.frame(i)).collect::<Result<_>>()?;
    Ok(FrameSource { frames })
}
