use rustc_hash::{FxHashMap, FxHashSet};

use super::update::TrainingPoint;
use super::{BlockKey, BlockMap, MapConfig};

pub type TrainingBuckets = FxHashMap<BlockKey, Vec<TrainingPoint>>;

/// Buckets training points by block in linear time: one pass counts the
/// points of each block, a second fills buckets allocated at their final size.
pub fn gather_training(points: &[TrainingPoint], cfg: &MapConfig) -> TrainingBuckets {
    let keys: Vec<BlockKey> = points
        .iter()
        .map(|p| BlockKey::of(&p.position, cfg))
        .collect();
    let mut counts: FxHashMap<BlockKey, usize> = FxHashMap::default();
    for k in &keys {
        *counts.entry(*k).or_default() += 1;
    }
    let mut buckets: TrainingBuckets = counts
        .into_iter()
        .map(|(k, n)| (k, Vec::with_capacity(n)))
        .collect();
    for (k, p) in keys.iter().zip(points) {
        buckets.get_mut(k).unwrap().push(*p);
    }
    buckets
}

/// Chebyshev radius, in blocks, of the kernel support.
pub fn block_reach(cfg: &MapConfig) -> i32 {
    (cfg.kernel.length / cfg.block_edge()).ceil() as i32
}

pub(crate) fn for_each_neighbor(key: &BlockKey, reach: i32, mut f: impl FnMut(BlockKey)) {
    for dz in -reach..=reach {
        for dy in -reach..=reach {
            for dx in -reach..=reach {
                f(BlockKey([key.0[0] + dx, key.0[1] + dy, key.0[2] + dz]));
            }
        }
    }
}

/// Training blocks plus every existing map block within kernel reach of one.
pub fn collect_test_blocks(training: &FxHashSet<BlockKey>, map: &BlockMap) -> FxHashSet<BlockKey> {
    let reach = block_reach(map.config());
    let mut out = training.clone();
    for key in training {
        for_each_neighbor(key, reach, |n| {
            if map.contains_block(&n) {
                out.insert(n);
            }
        });
    }
    out
}
