use rustc_hash::FxHashMap;

use super::update::TrainingPoint;
use super::VoxelKey;
use crate::geometry::{Point3, Vector3};

struct Leaf {
    sum: Vector3,
    weight: f64,
    count: usize,
    votes: FxHashMap<u16, usize>,
    first: usize,
}

/// Voxel-grid filter: one centroid per occupied leaf, labeled with the
/// leaf's majority label (ties to the smallest id). Output follows the order
/// in which leaves were first hit, so it is deterministic for a given input.
pub fn downsample(points: &[TrainingPoint], leaf: f64) -> Vec<TrainingPoint> {
    assert!(leaf > 0.0, "leaf must be > 0");
    let mut leaves: FxHashMap<VoxelKey, Leaf> = FxHashMap::default();
    for (i, p) in points.iter().enumerate() {
        let l = leaves
            .entry(VoxelKey::of(&p.position, leaf))
            .or_insert_with(|| Leaf {
                sum: Vector3::zeros(),
                weight: 0.0,
                count: 0,
                votes: FxHashMap::default(),
                first: i,
            });
        l.sum += p.position.coords;
        l.weight += p.weight;
        l.count += 1;
        *l.votes.entry(p.label).or_default() += 1;
    }
    let mut out: Vec<(usize, TrainingPoint)> = leaves
        .into_values()
        .map(|l| {
            let label = l
                .votes
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(k, _)| *k)
                .unwrap();
            let n = l.count as f64;
            (
                l.first,
                TrainingPoint {
                    position: Point3::from(l.sum / n),
                    label,
                    weight: l.weight / n,
                },
            )
        })
        .collect();
    out.sort_unstable_by_key(|(first, _)| *first);
    out.into_iter().map(|(_, p)| p).collect()
}
