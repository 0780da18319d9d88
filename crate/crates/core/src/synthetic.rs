//! Synthetic rotating-lidar frames of a street scene.
//!
//! The scene is a straight street between two building rows: ground split
//! into road, sidewalk and terrain strips, boxes for buildings, vegetation,
//! poles, parked cars and cars driving along the road. Classes follow the
//! 19-category driving scheme. Everything is deterministic given the seed.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::{ClassId, Point3, Vector3};
use crate::scan::LabeledPoint;

pub const CAR: ClassId = 1;
pub const PERSON: ClassId = 6;
pub const ROAD: ClassId = 9;
pub const SIDEWALK: ClassId = 11;
pub const BUILDING: ClassId = 13;
pub const VEGETATION: ClassId = 15;
pub const TERRAIN: ClassId = 17;
pub const POLE: ClassId = 18;

const GROUND_Z: f64 = -1.73;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point3,
    pub max: Point3,
}

impl Aabb {
    fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self {
            min: Point3::from(min),
            max: Point3::from(max),
        }
    }

    /// Entry distance of the ray `o + t d`, if any and positive.
    fn ray_entry(&self, o: &Point3, d: &Vector3) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            let inv = 1.0 / d[i];
            let (mut a, mut b) = ((self.min[i] - o[i]) * inv, (self.max[i] - o[i]) * inv);
            if a > b {
                std::mem::swap(&mut a, &mut b);
            }
            // NaN from 0 * inf means the ray is parallel and inside the slab
            if a.is_nan() || b.is_nan() {
                continue;
            }
            t0 = t0.max(a);
            t1 = t1.min(b);
            if t0 > t1 {
                return None;
            }
        }
        (t0 > 0.0).then_some(t0)
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticWorld {
    pub boxes: Vec<(Aabb, ClassId)>,
}

impl SyntheticWorld {
    /// Street scene at time step `frame`. Static content depends only on the
    /// seed; driving cars advance 1.5 m per frame.
    pub fn street(seed: u64, frame: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut boxes = vec![
            (
                Aabb::new([-70.0, 12.0, GROUND_Z], [70.0, 20.0, 12.0]),
                BUILDING,
            ),
            (
                Aabb::new([-70.0, -20.0, GROUND_Z], [70.0, -12.0, 9.0]),
                BUILDING,
            ),
            (
                Aabb::new([65.0, -12.0, GROUND_Z], [72.0, 12.0, 6.0]),
                BUILDING,
            ),
            (
                Aabb::new([-72.0, -12.0, GROUND_Z], [-65.0, 12.0, 6.0]),
                BUILDING,
            ),
        ];
        for side in [-1.0, 1.0] {
            let mut x = -60.0 + rng.random_range(0.0..6.0);
            while x < 60.0 {
                let y = side * 8.5;
                match rng.random_range(0..3) {
                    0 => boxes.push((
                        Aabb::new([x - 0.1, y - 0.1, GROUND_Z], [x + 0.1, y + 0.1, 3.5]),
                        POLE,
                    )),
                    _ => {
                        let r = rng.random_range(0.8..1.6);
                        boxes.push((
                            Aabb::new(
                                [x - r, y - r, GROUND_Z + 0.5],
                                [x + r, y + r, GROUND_Z + 2.0 + r],
                            ),
                            VEGETATION,
                        ));
                    }
                }
                x += rng.random_range(5.0..12.0);
            }
            // parked cars
            let mut x = -55.0 + rng.random_range(0.0..4.0);
            while x < 55.0 {
                let y = side * 5.0;
                boxes.push((car_box(x, y), CAR));
                x += rng.random_range(6.0..14.0);
            }
        }
        let t = frame as f64;
        for (x0, y, v) in [(-30.0, 1.8, 1.5), (10.0, -1.8, -1.5), (-5.0, 1.8, 1.5)] {
            let x = wrap(x0 + v * t, 60.0);
            boxes.push((car_box(x, y), CAR));
        }
        let px = wrap(-8.0 + 0.15 * t, 50.0);
        boxes.push((
            Aabb::new(
                [px - 0.25, 6.7, GROUND_Z],
                [px + 0.25, 7.2, GROUND_Z + 1.75],
            ),
            PERSON,
        ));
        Self { boxes }
    }

    fn ground_class(y: f64) -> ClassId {
        match y.abs() {
            a if a < 4.0 => ROAD,
            a if a < 7.0 => SIDEWALK,
            _ => TERRAIN,
        }
    }

    /// Nearest hit along the unit ray `d` from `o` within `max_range`.
    pub fn cast(&self, o: &Point3, d: &Vector3, max_range: f64) -> Option<(f64, ClassId)> {
        let mut best: Option<(f64, ClassId)> = None;
        if d.z < 0.0 {
            let t = (GROUND_Z - o.z) / d.z;
            if t > 0.0 {
                let y = o.y + t * d.y;
                best = Some((t, Self::ground_class(y)));
            }
        }
        for (b, class) in &self.boxes {
            if let Some(t) = b.ray_entry(o, d) {
                if best.is_none_or(|(bt, _)| t < bt) {
                    best = Some((t, *class));
                }
            }
        }
        best.filter(|(t, _)| *t <= max_range)
    }
}

fn wrap(x: f64, half: f64) -> f64 {
    (x + half).rem_euclid(2.0 * half) - half
}

fn car_box(x: f64, y: f64) -> Aabb {
    Aabb::new(
        [x - 2.1, y - 0.9, GROUND_Z + 0.2],
        [x + 2.1, y + 0.9, GROUND_Z + 1.5],
    )
}

/// Rotating multi-ring lidar.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticLidar {
    pub rings: usize,
    pub columns: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub max_range: f64,
    /// Half-width of uniform range noise, meters.
    pub range_noise: f64,
}

impl SyntheticLidar {
    pub fn new(rings: usize, columns: usize) -> Self {
        Self {
            rings,
            columns,
            elevation_min_deg: -24.8,
            elevation_max_deg: 2.0,
            max_range: 80.0,
            range_noise: 0.02,
        }
    }

    /// 64 rings by 1024 columns, 65,536 beams.
    pub fn hdl64() -> Self {
        Self::new(64, 1024)
    }

    pub fn directions(&self) -> Vec<Vector3> {
        let mut out = Vec::with_capacity(self.rings * self.columns);
        for ring in 0..self.rings {
            let f = if self.rings == 1 {
                0.5
            } else {
                ring as f64 / (self.rings - 1) as f64
            };
            let el = (self.elevation_min_deg
                + f * (self.elevation_max_deg - self.elevation_min_deg))
                .to_radians();
            for col in 0..self.columns {
                let az =
                    std::f64::consts::TAU * col as f64 / self.columns as f64 - std::f64::consts::PI;
                out.push(Vector3::new(
                    el.cos() * az.cos(),
                    el.cos() * az.sin(),
                    el.sin(),
                ));
            }
        }
        out
    }

    pub fn scan(&self, world: &SyntheticWorld, origin: Point3, seed: u64) -> Vec<LabeledPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.directions()
            .into_iter()
            .filter_map(|d| {
                let (t, label) = world.cast(&origin, &d, self.max_range)?;
                let noise = if self.range_noise > 0.0 {
                    rng.random_range(-self.range_noise..=self.range_noise)
                } else {
                    0.0
                };
                let t = (t + noise).max(0.05);
                Some(LabeledPoint {
                    position: origin + d * t,
                    label,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticFrame {
    pub origin: Point3,
    pub points: Vec<LabeledPoint>,
}

/// Street sequence with the sensor driving along x at 1 m per frame.
pub fn street_sequence(lidar: &SyntheticLidar, frames: usize, seed: u64) -> Vec<SyntheticFrame> {
    (0..frames)
        .map(|f| {
            let world = SyntheticWorld::street(seed, f);
            let origin = Point3::new(-10.0 + f as f64, -1.8, 0.0);
            let points = lidar.scan(
                &world,
                origin,
                seed ^ (f as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
            );
            SyntheticFrame { origin, points }
        })
        .collect()
}
