#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn scans(&self) -> PathBuf {
        self.dir.path().join("velodyne")
    }

    pub fn labels(&self) -> PathBuf {
        self.dir.path().join("labels")
    }

    pub fn poses(&self) -> PathBuf {
        self.dir.path().join("poses.txt")
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }
}

/// Points as sensor-frame `(x, y, z, label word)`.
pub type RawFrame = Vec<([f32; 3], u32)>;

pub fn write_frame(fx: &Fixture, index: usize, points: &RawFrame) {
    fs::create_dir_all(fx.scans()).unwrap();
    fs::create_dir_all(fx.labels()).unwrap();
    let mut bin = Vec::new();
    let mut lab = Vec::new();
    for (p, l) in points {
        for v in p.iter().chain(&[0.5f32]) {
            bin.extend_from_slice(&v.to_le_bytes());
        }
        lab.extend_from_slice(&l.to_le_bytes());
    }
    fs::write(fx.scans().join(format!("{index:06}.bin")), bin).unwrap();
    fs::write(fx.labels().join(format!("{index:06}.label")), lab).unwrap();
}

/// Rows of 12 numbers, row-major 3x4.
pub fn write_poses(fx: &Fixture, poses: &[[f64; 12]]) {
    let text: String = poses
        .iter()
        .map(|p| {
            p.iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(" ")
                + "\n"
        })
        .collect();
    fs::write(fx.poses(), text).unwrap();
}

pub const IDENTITY: [f64; 12] = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0];
/// Quarter turn about z, then a shift by (10, 2, 0.5).
pub const TURN_AND_SHIFT: [f64; 12] =
    [0.0, -1.0, 0.0, 10.0, 1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 1.0, 0.5];

/// Two small frames: a wall of building (13) points ahead of the sensor and
/// one car (1) return, labels carrying an instance id in the upper bits.
pub fn two_frame_fixture() -> Fixture {
    let fx = Fixture {
        dir: tempfile::tempdir().unwrap(),
    };
    let mut frame: RawFrame = Vec::new();
    for i in 0..20 {
        for j in 0..5 {
            frame.push(([6.0, -2.0 + 0.2 * i as f32, -1.0 + 0.4 * j as f32], 13));
        }
    }
    frame.push(([3.0, 0.0, 0.0], (7 << 16) | 1));
    write_frame(&fx, 0, &frame);
    write_frame(&fx, 1, &frame);
    write_poses(&fx, &[IDENTITY, TURN_AND_SHIFT]);
    fx
}
