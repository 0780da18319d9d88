//! Deterministic 2D scan simulator.
//!
//! Scenes are walls plus polygonal objects that move along per-frame
//! trajectories. Scans are produced by exact ray casting and fed to the 3D
//! mapper as a single horizontal slice: sensor and hits share one z value,
//! placed at the center of voxel layer 0, so every beam has zero elevation.

mod raycast;
mod run;
mod scenario;

pub use raycast::{raycast, Ray2, Scan2D};
pub use run::{
    run_scenario, write_metrics_csv, FrameMetrics, ScenarioReport, Simulation, METRICS_HEADER,
};
pub use scenario::{load_scenario, parse_scenario};

use crate::geometry::ClassId;

pub type Vec2 = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2 {
    pub fn apply(&self, p: Vec2) -> Vec2 {
        let (s, c) = self.yaw.sin_cos();
        [self.x + c * p[0] - s * p[1], self.y + s * p[0] + c * p[1]]
    }

    fn lerp(&self, o: &Pose2, t: f64) -> Pose2 {
        Pose2 {
            x: self.x + (o.x - self.x) * t,
            y: self.y + (o.y - self.y) * t,
            yaw: self.yaw + (o.yaw - self.yaw) * t,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Wall {
    pub from: Vec2,
    pub to: Vec2,
    pub class: ClassId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DynamicObject {
    /// Closed polygon in the object frame.
    pub polygon: Vec<Vec2>,
    pub class: ClassId,
    /// One pose per frame; the last pose holds once the list runs out.
    pub trajectory: Vec<Pose2>,
}

impl DynamicObject {
    pub fn pose(&self, frame: usize) -> Pose2 {
        self.trajectory[frame.min(self.trajectory.len() - 1)]
    }

    /// World-frame edges at `frame`.
    pub fn edges(&self, frame: usize) -> Vec<(Vec2, Vec2)> {
        let pose = self.pose(frame);
        let pts: Vec<Vec2> = self.polygon.iter().map(|p| pose.apply(*p)).collect();
        (0..pts.len())
            .map(|i| (pts[i], pts[(i + 1) % pts.len()]))
            .collect()
    }
}

pub(crate) fn linear_trajectory(start: Pose2, end: Pose2, frames: usize) -> Vec<Pose2> {
    if frames <= 1 {
        return vec![start];
    }
    (0..frames)
        .map(|f| start.lerp(&end, f as f64 / (frames - 1) as f64))
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sensor {
    pub origin: Vec2,
    pub beams: usize,
    /// Angle of the first beam, radians.
    pub start_angle: f64,
    /// Angular span covered by the beams, radians.
    pub fov: f64,
    pub max_range: f64,
}

impl Sensor {
    pub fn angles(&self) -> Vec<f64> {
        let full = (self.fov - std::f64::consts::TAU).abs() < 1e-12;
        let n = self.beams;
        let div = if full || n == 1 {
            n as f64
        } else {
            (n - 1) as f64
        };
        (0..n)
            .map(|i| self.start_angle + self.fov * i as f64 / div)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene2D {
    pub name: String,
    pub frames: usize,
    pub sensor: Sensor,
    pub walls: Vec<Wall>,
    pub objects: Vec<DynamicObject>,
}
