//! Two-phase map update.
//!
//! Phase one turns a scan into training data: labeled hits, plus free
//! space either as sampled points or as a spherical index over the beams.
//! Points are bucketed per block in one pass. Phase two collects the test
//! blocks (training blocks, existing blocks within kernel reach of them and,
//! for line-based free space, existing blocks the beams pass near) and
//! accumulates kernel-weighted evidence into every voxel of every test block.
//! Test blocks are independent, so inference runs in parallel and writes
//! back in sorted key order.

use rayon::prelude::*;
use rustc_hash::FxHashSet;

use super::downsample::downsample;
use super::gather::{
    block_reach, collect_test_blocks, for_each_neighbor, gather_training, TrainingBuckets,
};
use super::{BlockKey, BlockMap, MapConfig, VoxelKey, FREE_CLASS};
use crate::error::MapError;
use crate::freespace::{build_free_space, FreeSpaceData};
use crate::geometry::{ClassId, Point3};
use crate::kernel::{sparse_kernel, BeamWeighting};
use crate::scan::{LabeledPoint, Scan};
use crate::spherical_index::SphericalRTree;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainingPoint {
    pub position: Point3,
    /// Category index; [`FREE_CLASS`] for free-space samples.
    pub label: ClassId,
    pub weight: f64,
}

/// Training data of one frame.
#[derive(Debug)]
pub struct TrainingSet {
    /// Labeled hits followed by free-space samples.
    pub points: Vec<TrainingPoint>,
    pub hit_count: usize,
    pub lines: Option<(SphericalRTree, BeamWeighting)>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UpdateStats {
    pub beams: usize,
    pub hit_points: usize,
    pub free_points: usize,
    pub training_blocks: usize,
    pub test_blocks: usize,
    pub new_blocks: usize,
}

/// Phase one without the bucketing: validated, downsampled training data.
///
/// The cloud is downsampled first and every later step (hits, sampled free
/// points, beam lines) works on the representatives. Sampled free points are
/// downsampled once more on their own.
pub fn prepare_training(scan: &Scan, cfg: &MapConfig) -> Result<TrainingSet, MapError> {
    if scan.is_empty() {
        return Err(MapError::EmptyScan);
    }
    let max = cfg.num_classes;
    if let Some(b) = scan.beams().iter().find(|b| b.label() > max) {
        return Err(MapError::LabelOutOfRange {
            label: b.label(),
            max,
        });
    }
    let leaf = cfg.downsample_leaf;
    let reduced;
    let scan = if leaf > 0.0 {
        reduced = downsample_scan(scan, leaf)?;
        &reduced
    } else {
        scan
    };
    // unlabeled returns still carry free space
    let mut points: Vec<TrainingPoint> = scan
        .beams()
        .iter()
        .filter(|b| b.label() != FREE_CLASS)
        .map(|b| TrainingPoint {
            position: *b.endpoint(),
            label: b.label(),
            weight: 1.0,
        })
        .collect();
    let hit_count = points.len();

    let mut lines = None;
    match build_free_space(scan, &cfg.free_space)? {
        FreeSpaceData::None => {}
        FreeSpaceData::Points(samples) => {
            let mut free: Vec<_> = samples
                .into_iter()
                .map(|s| TrainingPoint {
                    position: s.position,
                    label: FREE_CLASS,
                    weight: s.weight,
                })
                .collect();
            if leaf > 0.0 {
                free = downsample(&free, leaf);
            }
            points.extend(free);
        }
        FreeSpaceData::Lines { index, weighting } => {
            lines = Some((index.with_inflation(cfg.index_inflation), weighting));
        }
    }
    Ok(TrainingSet {
        points,
        hit_count,
        lines,
    })
}

/// Voxel-grid downsampling of a whole scan. Representatives that collapse
/// onto the sensor origin are dropped.
fn downsample_scan(scan: &Scan, leaf: f64) -> Result<Scan, MapError> {
    let pts: Vec<TrainingPoint> = scan
        .beams()
        .iter()
        .map(|b| TrainingPoint {
            position: *b.endpoint(),
            label: b.label(),
            weight: 1.0,
        })
        .collect();
    let origin = *scan.origin();
    let reps: Vec<LabeledPoint> = downsample(&pts, leaf)
        .into_iter()
        .filter(|p| (p.position - origin).norm() > 1e-9)
        .map(|p| LabeledPoint {
            position: p.position,
            label: p.label,
        })
        .collect();
    Scan::new(origin, &reps)
}

/// Integrates one scan into the map.
pub fn update_map(map: &mut BlockMap, scan: &Scan) -> Result<UpdateStats, MapError> {
    let mut cfg = map.config().clone();
    cfg.free_space.rng_seed = map.next_frame_seed();
    let training = prepare_training(scan, &cfg)?;
    let buckets = gather_training(&training.points, &cfg);
    let training_blocks: FxHashSet<BlockKey> = buckets.keys().copied().collect();
    let mut test_blocks = collect_test_blocks(&training_blocks, map);
    if let Some((index, _)) = &training.lines {
        test_blocks.extend(blocks_near_beams(index, map));
    }
    let mut keys: Vec<BlockKey> = test_blocks.into_iter().collect();
    keys.sort_unstable();

    let ctx = InferenceContext {
        cfg: &cfg,
        buckets: &buckets,
        lines: training.lines.as_ref().map(|(t, w)| (t, *w)),
        reach: block_reach(&cfg),
    };
    let increments: Vec<Vec<f64>> = keys.par_iter().map(|k| ctx.infer_block(k)).collect();

    let mut new_blocks = 0;
    for (key, inc) in keys.iter().zip(increments) {
        if !map.contains_block(key) {
            new_blocks += 1;
        }
        let block = map.block_mut_or_new(*key);
        for (a, d) in block.alpha.iter_mut().zip(inc) {
            *a += d;
        }
    }
    map.frames += 1;
    Ok(UpdateStats {
        beams: scan.len(),
        hit_points: training.hit_count,
        free_points: training.points.len() - training.hit_count,
        training_blocks: training_blocks.len(),
        test_blocks: keys.len(),
        new_blocks,
    })
}

struct InferenceContext<'a> {
    cfg: &'a MapConfig,
    buckets: &'a TrainingBuckets,
    lines: Option<(&'a SphericalRTree, BeamWeighting)>,
    reach: i32,
}

impl InferenceContext<'_> {
    fn infer_block(&self, key: &BlockKey) -> Vec<f64> {
        let cfg = self.cfg;
        let c1 = cfg.categories();
        let bs = cfg.block_size;
        let n_vox = (bs as usize).pow(3);
        let l = cfg.kernel.length;
        let mut inc = vec![0.0; n_vox * c1];

        let (lo, hi) = key.bounds(cfg);
        let inside = |p: &Point3| {
            p.x > lo.x - l
                && p.x < hi.x + l
                && p.y > lo.y - l
                && p.y < hi.y + l
                && p.z > lo.z - l
                && p.z < hi.z + l
        };
        let mut local: Vec<&TrainingPoint> = Vec::new();
        for_each_neighbor(key, self.reach, |n| {
            if let Some(bucket) = self.buckets.get(&n) {
                local.extend(bucket.iter().filter(|p| inside(&p.position)));
            }
        });

        // Points scatter into the voxels of this block within reach. Each
        // voxel still sums its contributions in `local` order.
        let res = cfg.resolution;
        let base = key.voxel(0, bs).0;
        let bsi = bs as i32;
        for p in &local {
            let mut range = [(0i32, 0i32); 3];
            for (i, r) in range.iter_mut().enumerate() {
                let lo_v = ((p.position[i] - l) / res - 0.5).floor() as i32 - base[i];
                let hi_v = ((p.position[i] + l) / res - 0.5).ceil() as i32 - base[i];
                *r = (lo_v.max(0), hi_v.min(bsi - 1));
            }
            for z in range[2].0..=range[2].1 {
                for y in range[1].0..=range[1].1 {
                    for x in range[0].0..=range[0].1 {
                        let off = (x + bsi * (y + bsi * z)) as usize;
                        let center = key.voxel(off, bs).center(res);
                        let d = (p.position - center).norm();
                        if d < l {
                            inc[off * c1 + p.label as usize] +=
                                p.weight * sparse_kernel(d, &cfg.kernel);
                        }
                    }
                }
            }
        }

        if let Some((index, weighting)) = self.lines {
            for off in 0..n_vox {
                let center = key.voxel(off, bs).center(res);
                let mut free = 0.0;
                index.for_each_near(&center, l, |_, sd| {
                    free += weighting.weight(sd.s) * sparse_kernel(sd.distance, &cfg.kernel);
                });
                inc[off * c1 + FREE_CLASS as usize] += free;
            }
        }
        inc
    }
}

/// Existing blocks within kernel reach of any block a beam passes through.
fn blocks_near_beams(index: &SphericalRTree, map: &BlockMap) -> FxHashSet<BlockKey> {
    let cfg = map.config();
    let edge = cfg.block_edge();
    let mut traversed = FxHashSet::default();
    for b in index.beams() {
        traverse_blocks(index.origin(), b.endpoint(), edge, |k| {
            traversed.insert(k);
        });
    }
    let reach = block_reach(cfg);
    let mut out = FxHashSet::default();
    for k in &traversed {
        for_each_neighbor(k, reach, |n| {
            if map.contains_block(&n) {
                out.insert(n);
            }
        });
    }
    out
}

/// Visits every grid cell of edge `edge` that the segment `a -> b` passes
/// through (3D DDA).
pub(crate) fn traverse_blocks(a: &Point3, b: &Point3, edge: f64, mut f: impl FnMut(BlockKey)) {
    let cell = |p: &Point3| VoxelKey::of(p, edge).0;
    let mut cur = cell(a);
    let end = cell(b);
    let dir = b - a;
    let mut step = [0i32; 3];
    let mut t_max = [f64::INFINITY; 3];
    let mut t_delta = [f64::INFINITY; 3];
    for i in 0..3 {
        if dir[i] > 0.0 {
            step[i] = 1;
            t_max[i] = ((cur[i] + 1) as f64 * edge - a[i]) / dir[i];
            t_delta[i] = edge / dir[i];
        } else if dir[i] < 0.0 {
            step[i] = -1;
            t_max[i] = (cur[i] as f64 * edge - a[i]) / dir[i];
            t_delta[i] = -edge / dir[i];
        }
    }
    let budget: i32 = (0..3).map(|i| (end[i] - cur[i]).abs()).sum::<i32>() + 3;
    for _ in 0..budget {
        f(BlockKey(cur));
        if cur == end {
            return;
        }
        let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
            0
        } else if t_max[1] <= t_max[2] {
            1
        } else {
            2
        };
        if t_max[axis] > 1.0 {
            break;
        }
        cur[axis] += step[axis];
        t_max[axis] += t_delta[axis];
    }
    f(BlockKey(end));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freespace::{FreeSpaceStrategy, SamplingConfig};
    use crate::scan::LabeledPoint;

    fn cfg(classes: u16) -> MapConfig {
        MapConfig {
            num_classes: classes,
            downsample_leaf: 0.0,
            ..MapConfig::default()
        }
    }

    #[test]
    fn single_hit_at_voxel_center() {
        let mut map = BlockMap::new(cfg(2)).unwrap();
        let key = VoxelKey([10, 3, 2]);
        let c = key.center(0.3);
        let scan = Scan::new(Point3::new(0.15, 0.15, 0.15), &[LabeledPoint::new(c, 1)]).unwrap();
        update_map(&mut map, &scan).unwrap();
        let a = map.alpha(&key).unwrap();
        assert!((a[1] - 0.101).abs() < 1e-12);
        assert_eq!(a[0], 0.001);
        assert_eq!(a[2], 0.001);

        let q = map.query_cell(&c);
        assert_eq!(q.class, 1);
        assert!(q.occupied);
        let expect = [0.001 / 0.103, 0.101 / 0.103, 0.001 / 0.103];
        for (p, e) in q.probabilities.iter().zip(expect) {
            assert!((p - e).abs() < 1e-12);
        }
        assert!((q.probabilities[1] - 0.9806).abs() < 1e-4);
        assert_eq!(map.count_class_nodes(1), 1);

        // far voxel in the same block stays at the prior
        let far = map.alpha(&VoxelKey([15, 7, 7])).unwrap();
        assert_eq!(far, &[0.001; 3]);
    }

    #[test]
    fn line_midpoint_gets_full_free_mass() {
        let mut c = cfg(2);
        c.free_space = SamplingConfig {
            strategy: FreeSpaceStrategy::LineBased {
                weighting: BeamWeighting::Bilinear,
            },
            rng_seed: 0,
        };
        let mut map = BlockMap::new(c).unwrap();
        let mid = VoxelKey([10, 0, 0]);
        let mid_c = mid.center(0.3);
        // pre-existing block around the beam midpoint
        map.touch_block(mid.block(8));
        let origin = Point3::new(0.15, 0.15, 0.15);
        let hit = Point3::new(2.0 * mid_c.x - origin.x, 0.15, 0.15);
        let scan = Scan::new(origin, &[LabeledPoint::new(hit, 2)]).unwrap();
        update_map(&mut map, &scan).unwrap();
        let a = map.alpha(&mid).unwrap();
        assert!((a[0] - 0.101).abs() < 1e-12, "{a:?}");
    }

    #[test]
    fn free_update_flips_class() {
        let mut map = BlockMap::new(cfg(2)).unwrap();
        let key = VoxelKey([4, 4, 4]);
        let c = key.center(0.3);
        let scan = Scan::new(Point3::origin(), &[LabeledPoint::new(c, 1)]).unwrap();
        update_map(&mut map, &scan).unwrap();
        assert_eq!(map.count_class_nodes(1), 1);
        map.add_evidence(&key, &[0.2, 0.0, 0.0]);
        assert_eq!(map.count_class_nodes(1), 0);
    }

    #[test]
    fn rejects_bad_labels_and_empty_scans() {
        let mut map = BlockMap::new(cfg(2)).unwrap();
        let scan = Scan::new(
            Point3::origin(),
            &[LabeledPoint::new(Point3::new(1.0, 0.0, 0.0), 3)],
        )
        .unwrap();
        assert!(matches!(
            update_map(&mut map, &scan),
            Err(MapError::LabelOutOfRange { label: 3, max: 2 })
        ));
        let empty = Scan::new(Point3::origin(), &[]).unwrap();
        assert_eq!(update_map(&mut map, &empty), Err(MapError::EmptyScan));
    }

    #[test]
    fn dda_visits_contiguous_cells() {
        let cases = [
            (Point3::new(0.1, 0.1, 0.1), Point3::new(7.3, -3.2, 1.1)),
            (Point3::new(-0.5, 2.0, 0.0), Point3::new(-0.5, 2.0, 9.0)),
            (Point3::new(1.0, 1.0, 1.0), Point3::new(1.1, 1.0, 1.0)),
            (Point3::new(0.0, 0.0, 0.0), Point3::new(-4.8, -4.8, 0.0)),
        ];
        for (a, b) in cases {
            let mut seen = Vec::new();
            traverse_blocks(&a, &b, 2.4, |k| seen.push(k));
            assert_eq!(seen.first().unwrap().0, VoxelKey::of(&a, 2.4).0);
            assert_eq!(seen.last().unwrap().0, VoxelKey::of(&b, 2.4).0);
            for w in seen.windows(2) {
                assert!(w[0].chebyshev(&w[1]) <= 1);
            }
            // dense sampling never leaves the visited set
            for i in 0..=1000 {
                let p = a + (b - a) * (i as f64 / 1000.0);
                let k = BlockKey(VoxelKey::of(&p, 2.4).0);
                assert!(
                    seen.iter()
                        .any(|s| s.chebyshev(&k) == 0
                            || (s.chebyshev(&k) <= 1 && on_boundary(&p, 2.4))),
                    "{p:?}"
                );
            }
        }
    }

    fn on_boundary(p: &Point3, edge: f64) -> bool {
        (0..3).any(|i| {
            let f = p[i] / edge;
            (f - f.round()).abs() < 1e-9
        })
    }
}
