#![allow(dead_code)]

use bkimap::geometry::point_to_segment;
use bkimap::kernel::sparse_kernel;
use bkimap::occupancy_map::{prepare_training, TrainingSet};
use bkimap::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn config(strategy: &str, seed: u64) -> MapConfig {
    MapConfig {
        free_space: SamplingConfig {
            strategy: strategy.parse().unwrap(),
            rng_seed: seed,
        },
        ..MapConfig::default()
    }
}

/// Random small scene: up to `max_points` hits scattered within a few meters
/// of a random origin, classes `0..=classes` (0 = unlabeled).
pub fn random_scan(rng: &mut ChaCha8Rng, max_points: usize, classes: u16) -> Scan {
    let origin = Point3::new(
        rng.random_range(-2.0..2.0),
        rng.random_range(-2.0..2.0),
        rng.random_range(-1.0..1.0),
    );
    let n = rng.random_range(1..=max_points);
    // a few surfaces so that hits cluster like real returns
    let centers: Vec<Point3> = (0..3)
        .map(|_| {
            origin
                + Vector3::new(
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-4.0..4.0),
                    rng.random_range(-1.5..1.5),
                )
        })
        .collect();
    let pts: Vec<LabeledPoint> = (0..n)
        .map(|_| {
            let c = centers[rng.random_range(0..centers.len())];
            let p = c + Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-0.5..0.5),
            );
            LabeledPoint {
                position: p,
                label: rng.random_range(0..=classes),
            }
        })
        .filter(|p| (p.position - origin).norm() > 1e-3)
        .collect();
    Scan::new(origin, &pts).unwrap()
}

/// Evidence a voxel center receives from one frame, by exhaustive loops over
/// every training point and every beam.
pub fn brute_force_increment(center: &Point3, training: &TrainingSet, cfg: &MapConfig) -> Vec<f64> {
    let mut inc = vec![0.0; cfg.categories()];
    for p in &training.points {
        let d = (p.position - center).norm();
        inc[p.label as usize] += p.weight * sparse_kernel(d, &cfg.kernel);
    }
    if let Some((index, weighting)) = &training.lines {
        for b in index.beams() {
            let sd = point_to_segment(center, b);
            inc[0] += weighting.weight(sd.s) * sparse_kernel(sd.distance, &cfg.kernel);
        }
    }
    inc
}

/// Integrates `scan` and compares every voxel of the resulting map with the
/// exhaustive oracle. Returns the largest absolute deviation.
pub fn update_and_compare(map: &mut BlockMap, scan: &Scan) -> f64 {
    let mut cfg = map.config().clone();
    cfg.free_space.rng_seed = map.next_frame_seed();
    let training = prepare_training(scan, &cfg).unwrap();
    let before = map.clone();
    update_map(map, scan).unwrap();
    let prior = vec![cfg.prior; cfg.categories()];
    let mut worst: f64 = 0.0;
    for (key, alpha) in map.voxels() {
        let old = before.alpha(&key).unwrap_or(&prior);
        let inc = brute_force_increment(&key.center(cfg.resolution), &training, &cfg);
        for c in 0..alpha.len() {
            worst = worst.max((alpha[c] - (old[c] + inc[c])).abs());
        }
    }
    // voxels outside the map must not be owed any point evidence
    for p in &training.points {
        let key = occupancy_map::VoxelKey::of(&p.position, cfg.resolution);
        assert!(map.alpha(&key).is_some(), "training point's voxel missing");
    }
    worst
}

/// Lidar-like beams: `rings x columns` directions with elevation in
/// [-25, 3] degrees plus jitter, ranges uniform in [5, 50] m.
pub fn lidar_like_beams(
    rng: &mut ChaCha8Rng,
    origin: Point3,
    rings: usize,
    columns: usize,
) -> Vec<Beam> {
    let mut out = Vec::with_capacity(rings * columns);
    for i in 0..rings {
        let el = (-25.0 + 28.0 * i as f64 / (rings.max(2) - 1) as f64).to_radians();
        for j in 0..columns {
            let az = std::f64::consts::TAU * j as f64 / columns as f64 - std::f64::consts::PI
                + rng.random_range(0.0..1e-3);
            let r = rng.random_range(5.0..50.0);
            let d = Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin());
            out.push(Beam::new(origin, origin + d * r, 1).unwrap());
        }
    }
    out
}

/// Query point within 30 m of the origin, inside the lidar's field of view.
pub fn lidar_query(rng: &mut ChaCha8Rng, origin: Point3) -> Point3 {
    let r = rng.random_range(2.0..30.0);
    let el = rng.random_range(-25.0f64..3.0).to_radians();
    let az = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    origin + Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin()) * r
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vector3 {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Beams in random directions from a random origin, 5 cm to 30 m long.
pub fn random_beams(rng: &mut ChaCha8Rng, beams: usize) -> (Point3, Vec<Beam>) {
    let origin = Point3::new(
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    );
    let list = (0..beams)
        .map(|_| {
            let r = rng.random_range(0.05..30.0);
            Beam::new(origin, origin + random_unit(rng) * r, 1).unwrap()
        })
        .collect();
    (origin, list)
}

/// Query point and radius; half of the queries sit near a beam (endpoints
/// included), some near the sensor, the rest anywhere within 35 m.
pub fn random_query(rng: &mut ChaCha8Rng, origin: Point3, beams: &[Beam]) -> (Point3, f64) {
    let l = rng.random_range(0.05..1.5);
    let q = match rng.random_range(0..4) {
        0 | 1 => {
            let b = &beams[rng.random_range(0..beams.len())];
            b.at_fraction(rng.random_range(-0.1..1.1))
                + random_unit(rng) * rng.random_range(0.0..1.3 * l)
        }
        2 => origin + random_unit(rng) * rng.random_range(0.0..3.0 * l),
        _ => origin + random_unit(rng) * rng.random_range(0.0..35.0),
    };
    (q, l)
}

pub fn random_index_case(rng: &mut ChaCha8Rng, beams: usize) -> (Point3, Vec<Beam>, Point3, f64) {
    let (origin, list) = random_beams(rng, beams);
    let (q, l) = random_query(rng, origin, &list);
    (origin, list, q, l)
}
