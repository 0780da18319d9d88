use super::{Scene2D, Vec2};
use crate::geometry::ClassId;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray2 {
    pub angle: f64,
    /// `None` when nothing is hit within the maximum range.
    pub range: Option<f64>,
    pub label: ClassId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scan2D {
    pub origin: Vec2,
    pub rays: Vec<Ray2>,
    pub max_range: f64,
}

impl Scan2D {
    /// Hit positions and labels; misses are skipped.
    pub fn hits(&self) -> impl Iterator<Item = (Vec2, ClassId)> + '_ {
        self.rays.iter().filter_map(|r| {
            r.range.map(|d| {
                let (s, c) = r.angle.sin_cos();
                ([self.origin[0] + d * c, self.origin[1] + d * s], r.label)
            })
        })
    }
}

/// Distance along the ray `o + t * dir` (unit `dir`) to segment `a-b`.
fn ray_segment(o: Vec2, dir: Vec2, a: Vec2, b: Vec2) -> Option<f64> {
    let e = [b[0] - a[0], b[1] - a[1]];
    let denom = dir[0] * e[1] - dir[1] * e[0];
    if denom.abs() < 1e-15 {
        return None;
    }
    let w = [a[0] - o[0], a[1] - o[1]];
    let t = (w[0] * e[1] - w[1] * e[0]) / denom;
    let u = (w[0] * dir[1] - w[1] * dir[0]) / denom;
    (t > 0.0 && (0.0..=1.0).contains(&u)).then_some(t)
}

pub fn raycast(scene: &Scene2D, origin: Vec2, angles: &[f64], frame: usize) -> Scan2D {
    let mut edges: Vec<(Vec2, Vec2, ClassId)> = scene
        .walls
        .iter()
        .map(|w| (w.from, w.to, w.class))
        .collect();
    for obj in &scene.objects {
        edges.extend(obj.edges(frame).into_iter().map(|(a, b)| (a, b, obj.class)));
    }
    let max_range = scene.sensor.max_range;
    let rays = angles
        .iter()
        .map(|&angle| {
            let (s, c) = angle.sin_cos();
            let mut best: Option<(f64, ClassId)> = None;
            for &(a, b, class) in &edges {
                if let Some(t) = ray_segment(origin, [c, s], a, b) {
                    if t <= max_range && best.is_none_or(|(bt, _)| t < bt) {
                        best = Some((t, class));
                    }
                }
            }
            Ray2 {
                angle,
                range: best.map(|b| b.0),
                label: best.map(|b| b.1).unwrap_or(0),
            }
        })
        .collect();
    Scan2D {
        origin,
        rays,
        max_range,
    }
}
