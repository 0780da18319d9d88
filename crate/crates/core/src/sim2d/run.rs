use std::io::{self, Write};
use std::time::Instant;

use rustc_hash::FxHashSet;

use super::{raycast, Scan2D, Scene2D, Vec2};
use crate::error::MapError;
use crate::geometry::Point3;
use crate::occupancy_map::{
    predicted_class, update_map, BlockMap, MapConfig, VoxelKey, FREE_CLASS,
};
use crate::scan::{LabeledPoint, Scan};

pub const METRICS_HEADER: &str = "frame,class,node_count,false_negatives,frame_ms";

#[derive(Clone, Debug, PartialEq)]
pub struct FrameMetrics {
    pub frame: usize,
    /// Voxels of the map slice predicted as each category, free included.
    pub class_counts: Vec<usize>,
    /// Static-wall voxels that received evidence yet are predicted free.
    pub false_negatives: usize,
    /// Wall time of the map update.
    pub frame_ms: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioReport {
    pub scene: String,
    pub frames: Vec<FrameMetrics>,
}

impl ScenarioReport {
    pub fn final_count(&self, class: u16) -> usize {
        self.frames
            .last()
            .map_or(0, |f| f.class_counts[class as usize])
    }
}

/// Frame-by-frame driver. The map is a one-voxel-thick slice at layer 0.
pub struct Simulation {
    scene: Scene2D,
    map: BlockMap,
    frame: usize,
    wall_voxels: Vec<VoxelKey>,
}

impl Simulation {
    pub fn new(scene: Scene2D, cfg: MapConfig) -> Result<Self, MapError> {
        let map = BlockMap::new(cfg)?;
        let wall_voxels = rasterize_walls(&scene, map.config().resolution);
        Ok(Self {
            scene,
            map,
            frame: 0,
            wall_voxels,
        })
    }

    pub fn map(&self) -> &BlockMap {
        &self.map
    }

    pub fn scene(&self) -> &Scene2D {
        &self.scene
    }

    /// Index of the next frame to simulate.
    pub fn frame(&self) -> usize {
        self.frame
    }

    pub fn plane_z(&self) -> f64 {
        0.5 * self.map.config().resolution
    }

    pub fn wall_voxels(&self) -> &[VoxelKey] {
        &self.wall_voxels
    }

    pub fn scan(&self, frame: usize) -> Scan2D {
        let s = &self.scene.sensor;
        raycast(&self.scene, s.origin, &s.angles(), frame)
    }

    /// Lifts a 2D scan onto the map plane; misses are dropped.
    pub fn to_scan(&self, scan: &Scan2D) -> Result<Scan, MapError> {
        let z = self.plane_z();
        let origin = Point3::new(scan.origin[0], scan.origin[1], z);
        let pts: Vec<LabeledPoint> = scan
            .hits()
            .map(|(p, label)| LabeledPoint {
                position: Point3::new(p[0], p[1], z),
                label,
            })
            .collect();
        Scan::new(origin, &pts)
    }

    pub fn step(&mut self) -> Result<FrameMetrics, MapError> {
        let frame = self.frame;
        let scan = self.to_scan(&self.scan(frame))?;
        let t = Instant::now();
        if !scan.is_empty() {
            update_map(&mut self.map, &scan)?;
        }
        let frame_ms = t.elapsed().as_secs_f64() * 1e3;
        self.frame += 1;
        Ok(FrameMetrics {
            frame,
            class_counts: self.slice_histogram(),
            false_negatives: self.false_negatives(),
            frame_ms,
        })
    }

    /// Predicted-class histogram over layer-0 voxels.
    pub fn slice_histogram(&self) -> Vec<usize> {
        let mut h = vec![0; self.map.config().categories()];
        for (k, a) in self.map.voxels() {
            if k.0[2] == 0 {
                h[predicted_class(a) as usize] += 1;
            }
        }
        h
    }

    pub fn false_negatives(&self) -> usize {
        let cfg = self.map.config();
        let prior_sum = cfg.prior * cfg.categories() as f64;
        self.wall_voxels
            .iter()
            .filter(|k| {
                self.map.alpha(k).is_some_and(|a| {
                    let sum: f64 = a.iter().sum();
                    sum > prior_sum * (1.0 + 1e-9) && predicted_class(a) == FREE_CLASS
                })
            })
            .count()
    }
}

fn rasterize_walls(scene: &Scene2D, res: f64) -> Vec<VoxelKey> {
    let z = 0.5 * res;
    let mut seen = FxHashSet::default();
    let mut out = Vec::new();
    for w in &scene.walls {
        let (a, b): (Vec2, Vec2) = (w.from, w.to);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let steps = (len / (0.1 * res)).ceil() as usize;
        for i in 0..=steps {
            let t = i as f64 / steps as f64;
            let p = Point3::new(a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, z);
            let k = VoxelKey::of(&p, res);
            if seen.insert(k) {
                out.push(k);
            }
        }
    }
    out
}

/// Runs `frames` frames (the scene's own count when `None`).
pub fn run_scenario(
    scene: &Scene2D,
    cfg: &MapConfig,
    frames: Option<usize>,
) -> Result<ScenarioReport, MapError> {
    let n = frames.unwrap_or(scene.frames);
    let mut sim = Simulation::new(scene.clone(), cfg.clone())?;
    let frames = (0..n).map(|_| sim.step()).collect::<Result<Vec<_>, _>>()?;
    Ok(ScenarioReport {
        scene: scene.name.clone(),
        frames,
    })
}

/// One row per frame and semantic class.
pub fn write_metrics_csv<W: Write>(report: &ScenarioReport, mut out: W) -> io::Result<()> {
    writeln!(out, "{METRICS_HEADER}")?;
    for f in &report.frames {
        for (class, n) in f.class_counts.iter().enumerate().skip(1) {
            writeln!(
                out,
                "{},{},{},{},{:.3}",
                f.frame, class, n, f.false_negatives, f.frame_ms
            )?;
        }
    }
    Ok(())
}
