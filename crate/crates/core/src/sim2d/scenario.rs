//! TOML scenario files.
//!
//! ```toml
//! name = "example"
//! frames = 10
//!
//! [sensor]
//! origin = [0.0, 0.0]
//! beams = 720
//! fov_deg = 360.0        # optional, default 360
//! start_deg = 0.0        # optional
//! max_range = 30.0
//!
//! [[wall]]
//! from = [-10.0, 10.0]
//! to = [10.0, 10.0]
//! class = 13
//!
//! [[object]]
//! class = 1
//! polygon = [[-1.0, -0.5], [1.0, -0.5], [1.0, 0.5], [-1.0, 0.5]]
//! start = [-7.0, 2.0, 0.0]   # x, y, yaw; linear motion over all frames
//! end = [7.0, 2.0, 0.0]
//! # or: poses = [[x, y, yaw], ...], one per frame
//! ```

use std::path::Path;

use serde::Deserialize;

use super::{linear_trajectory, DynamicObject, Pose2, Scene2D, Sensor, Vec2, Wall};
use crate::error::MapError;
use crate::geometry::ClassId;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorFile {
    origin: Vec2,
    beams: usize,
    #[serde(default = "full_circle")]
    fov_deg: f64,
    #[serde(default)]
    start_deg: f64,
    max_range: f64,
}

fn full_circle() -> f64 {
    360.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WallFile {
    from: Vec2,
    to: Vec2,
    class: ClassId,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectFile {
    class: ClassId,
    polygon: Vec<Vec2>,
    start: Option<[f64; 3]>,
    end: Option<[f64; 3]>,
    poses: Option<Vec<[f64; 3]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: String,
    frames: usize,
    sensor: SensorFile,
    #[serde(default)]
    wall: Vec<WallFile>,
    #[serde(default)]
    object: Vec<ObjectFile>,
}

fn pose(p: [f64; 3]) -> Pose2 {
    Pose2 {
        x: p[0],
        y: p[1],
        yaw: p[2],
    }
}

fn bad(msg: String) -> MapError {
    MapError::Scenario(msg)
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let orient =
        |p: Vec2, q: Vec2, r: Vec2| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
    let (d1, d2) = (orient(a, b, c), orient(a, b, d));
    let (d3, d4) = (orient(c, d, a), orient(c, d, b));
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn is_simple(poly: &[Vec2]) -> bool {
    let n = poly.len();
    for i in 0..n {
        for j in i + 1..n {
            // adjacent edges share a vertex
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(poly[i], poly[(i + 1) % n], poly[j], poly[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

pub fn parse_scenario(text: &str) -> Result<Scene2D, MapError> {
    let f: ScenarioFile = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
    if f.frames == 0 {
        return Err(bad("frames must be >= 1".into()));
    }
    let s = &f.sensor;
    if s.beams == 0 {
        return Err(bad("sensor needs at least one beam".into()));
    }
    if !(s.max_range > 0.0 && s.max_range.is_finite()) || !finite(&s.origin) {
        return Err(bad(
            "sensor origin and max_range must be finite, max_range > 0".into(),
        ));
    }
    if !(s.fov_deg > 0.0 && s.fov_deg <= 360.0) || !s.start_deg.is_finite() {
        return Err(bad(format!(
            "fov_deg must be in (0, 360], got {}",
            s.fov_deg
        )));
    }
    let sensor = Sensor {
        origin: s.origin,
        beams: s.beams,
        start_angle: s.start_deg.to_radians(),
        fov: if s.fov_deg == 360.0 {
            std::f64::consts::TAU
        } else {
            s.fov_deg.to_radians()
        },
        max_range: s.max_range,
    };

    let mut walls = Vec::with_capacity(f.wall.len());
    for (i, w) in f.wall.into_iter().enumerate() {
        if !finite(&w.from) || !finite(&w.to) || w.from == w.to {
            return Err(bad(format!("wall {i} is degenerate or non-finite")));
        }
        walls.push(Wall {
            from: w.from,
            to: w.to,
            class: w.class,
        });
    }

    let mut objects = Vec::with_capacity(f.object.len());
    for (i, o) in f.object.into_iter().enumerate() {
        if o.polygon.len() < 3 || !o.polygon.iter().all(|p| finite(p)) {
            return Err(bad(format!(
                "object {i}: polygon needs >= 3 finite vertices"
            )));
        }
        if !is_simple(&o.polygon) {
            return Err(bad(format!("object {i}: polygon is self-intersecting")));
        }
        let trajectory = match (o.start, o.end, o.poses) {
            (Some(a), Some(b), None) => linear_trajectory(pose(a), pose(b), f.frames),
            (Some(a), None, None) => vec![pose(a)],
            (None, None, Some(p)) if !p.is_empty() => p.into_iter().map(pose).collect(),
            _ => {
                return Err(bad(format!(
                    "object {i}: give either start (and optionally end) or a non-empty poses list"
                )))
            }
        };
        if !trajectory.iter().all(|p| finite(&[p.x, p.y, p.yaw])) {
            return Err(bad(format!("object {i}: non-finite pose")));
        }
        objects.push(DynamicObject {
            polygon: o.polygon,
            class: o.class,
            trajectory,
        });
    }

    Ok(Scene2D {
        name: f.name,
        frames: f.frames,
        sensor,
        walls,
        objects,
    })
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scene2D, MapError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
    parse_scenario(&text)
}
