//! Block-hashed semantic occupancy map.
//!
//! Every voxel holds a Dirichlet concentration vector over `C + 1`
//! categories where index 0 is free space and `1..=C` are semantic classes.
//! Voxels are grouped into cubic blocks of `B^3` voxels that are allocated
//! lazily in a hash map.

mod downsample;
mod export;
mod gather;
mod update;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::MapError;
use crate::freespace::SamplingConfig;
use crate::geometry::{ClassId, Point3};
use crate::kernel::KernelParams;
use crate::spherical_index::DEFAULT_INFLATION;

pub use downsample::downsample;
pub use export::{class_color, write_csv, write_ply, write_ply_points, CSV_HEADER};
pub use gather::{block_reach, collect_test_blocks, gather_training, TrainingBuckets};
pub use update::{prepare_training, update_map, TrainingPoint, TrainingSet, UpdateStats};

pub const FREE_CLASS: ClassId = 0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MapConfig {
    /// Voxel edge in meters.
    pub resolution: f64,
    pub kernel: KernelParams,
    /// Dirichlet prior per category.
    pub prior: f64,
    /// Number of semantic classes, free space excluded.
    pub num_classes: u16,
    /// Voxels per block edge.
    pub block_size: u32,
    pub free_space: SamplingConfig,
    /// Voxel-grid leaf for the input cloud and for free samples; `0` disables it.
    pub downsample_leaf: f64,
    /// Angular inflation of spherical index queries.
    pub index_inflation: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            resolution: 0.3,
            kernel: KernelParams::default(),
            prior: 0.001,
            num_classes: 19,
            block_size: 8,
            free_space: SamplingConfig::default(),
            downsample_leaf: 0.1,
            index_inflation: DEFAULT_INFLATION,
        }
    }
}

impl MapConfig {
    pub fn validate(&self) -> Result<(), MapError> {
        let bad = |m: String| Err(MapError::InvalidConfig(m));
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return bad(format!("resolution must be > 0, got {}", self.resolution));
        }
        if !(self.prior > 0.0 && self.prior.is_finite()) {
            return bad(format!("prior must be > 0, got {}", self.prior));
        }
        if self.num_classes == 0 {
            return bad("num_classes must be >= 1".into());
        }
        if self.block_size == 0 || self.block_size > 64 {
            return bad(format!(
                "block_size must be in 1..=64, got {}",
                self.block_size
            ));
        }
        if !(self.downsample_leaf >= 0.0 && self.downsample_leaf.is_finite()) {
            return bad(format!(
                "downsample leaf must be >= 0, got {}",
                self.downsample_leaf
            ));
        }
        if !(self.index_inflation >= 1.0 && self.index_inflation.is_finite()) {
            return bad(format!(
                "index inflation must be >= 1, got {}",
                self.index_inflation
            ));
        }
        self.kernel.validate()?;
        self.free_space.strategy.validate()
    }

    /// Categories per voxel including free space.
    pub fn categories(&self) -> usize {
        self.num_classes as usize + 1
    }

    pub fn block_edge(&self) -> f64 {
        self.block_size as f64 * self.resolution
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VoxelKey(pub [i32; 3]);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockKey(pub [i32; 3]);

impl VoxelKey {
    pub fn of(p: &Point3, resolution: f64) -> Self {
        VoxelKey([
            (p.x / resolution).floor() as i32,
            (p.y / resolution).floor() as i32,
            (p.z / resolution).floor() as i32,
        ])
    }

    pub fn center(&self, resolution: f64) -> Point3 {
        Point3::new(
            (self.0[0] as f64 + 0.5) * resolution,
            (self.0[1] as f64 + 0.5) * resolution,
            (self.0[2] as f64 + 0.5) * resolution,
        )
    }

    pub fn block(&self, block_size: u32) -> BlockKey {
        let b = block_size as i32;
        BlockKey(self.0.map(|v| v.div_euclid(b)))
    }

    /// Linear offset of this voxel inside its block.
    pub fn offset_in_block(&self, block_size: u32) -> usize {
        let b = block_size as i32;
        let [x, y, z] = self.0.map(|v| v.rem_euclid(b) as usize);
        let b = block_size as usize;
        x + b * (y + b * z)
    }
}

impl BlockKey {
    pub fn of(p: &Point3, cfg: &MapConfig) -> Self {
        VoxelKey::of(p, cfg.resolution).block(cfg.block_size)
    }

    pub fn voxel(&self, offset: usize, block_size: u32) -> VoxelKey {
        let b = block_size as usize;
        let (x, y, z) = (offset % b, (offset / b) % b, offset / (b * b));
        let bs = block_size as i32;
        VoxelKey([
            self.0[0] * bs + x as i32,
            self.0[1] * bs + y as i32,
            self.0[2] * bs + z as i32,
        ])
    }

    pub fn chebyshev(&self, other: &BlockKey) -> i32 {
        (0..3)
            .map(|i| (self.0[i] - other.0[i]).abs())
            .max()
            .unwrap()
    }

    /// World-space `(min, max)` corners.
    pub fn bounds(&self, cfg: &MapConfig) -> (Point3, Point3) {
        let e = cfg.block_edge();
        let min = Point3::new(
            self.0[0] as f64 * e,
            self.0[1] as f64 * e,
            self.0[2] as f64 * e,
        );
        (min, Point3::new(min.x + e, min.y + e, min.z + e))
    }
}

/// Concentration vector of one voxel.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletCell {
    pub alpha: Vec<f64>,
}

impl DirichletCell {
    pub fn prior(categories: usize, alpha0: f64) -> Self {
        Self {
            alpha: vec![alpha0; categories],
        }
    }

    pub fn probabilities(&self) -> Vec<f64> {
        let sum: f64 = self.alpha.iter().sum();
        self.alpha.iter().map(|a| a / sum).collect()
    }

    pub fn predicted_class(&self) -> ClassId {
        predicted_class(&self.alpha)
    }
}

/// Argmax over a concentration vector; ties resolve to the lowest index,
/// so free space wins every tie it takes part in.
pub fn predicted_class(alpha: &[f64]) -> ClassId {
    let mut best = 0;
    for (k, &a) in alpha.iter().enumerate().skip(1) {
        if a > alpha[best] {
            best = k;
        }
    }
    best as ClassId
}

#[derive(Clone, Debug, PartialEq)]
pub struct CellQuery {
    pub probabilities: Vec<f64>,
    pub class: ClassId,
    pub occupied: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Block {
    /// `B^3 * (C + 1)` concentrations, voxel-major.
    pub(crate) alpha: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct BlockMap {
    cfg: MapConfig,
    blocks: FxHashMap<BlockKey, Block>,
    frames: u64,
}

impl BlockMap {
    pub fn new(cfg: MapConfig) -> Result<Self, MapError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            blocks: FxHashMap::default(),
            frames: 0,
        })
    }

    pub fn config(&self) -> &MapConfig {
        &self.cfg
    }

    /// Number of scans integrated so far.
    pub fn frames_integrated(&self) -> u64 {
        self.frames
    }

    /// Free-space sampling seed of the next frame. Frame 0 uses the configured
    /// seed as is; later frames get distinct streams.
    pub fn next_frame_seed(&self) -> u64 {
        self.cfg
            .free_space
            .rng_seed
            .wrapping_add(self.frames.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn block_count(&self) -> usize {
        self.blocks.len()
    }

    pub fn voxel_count(&self) -> usize {
        self.blocks.len() * (self.cfg.block_size as usize).pow(3)
    }

    pub fn contains_block(&self, key: &BlockKey) -> bool {
        self.blocks.contains_key(key)
    }

    pub fn block_keys(&self) -> impl Iterator<Item = &BlockKey> {
        self.blocks.keys()
    }

    /// Block keys in ascending order.
    pub fn sorted_block_keys(&self) -> Vec<BlockKey> {
        let mut keys: Vec<_> = self.blocks.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub(crate) fn new_block(&self) -> Block {
        Block {
            alpha: vec![
                self.cfg.prior;
                (self.cfg.block_size as usize).pow(3) * self.cfg.categories()
            ],
        }
    }

    /// Allocates a block at the prior if it does not exist yet.
    pub fn touch_block(&mut self, key: BlockKey) {
        if !self.blocks.contains_key(&key) {
            let b = self.new_block();
            self.blocks.insert(key, b);
        }
    }

    pub(crate) fn block_mut_or_new(&mut self, key: BlockKey) -> &mut Block {
        if !self.blocks.contains_key(&key) {
            let b = self.new_block();
            self.blocks.insert(key, b);
        }
        self.blocks.get_mut(&key).unwrap()
    }

    /// Concentrations of an existing voxel.
    pub fn alpha(&self, key: &VoxelKey) -> Option<&[f64]> {
        let c = self.cfg.categories();
        let block = self.blocks.get(&key.block(self.cfg.block_size))?;
        let off = key.offset_in_block(self.cfg.block_size) * c;
        Some(&block.alpha[off..off + c])
    }

    pub fn cell(&self, key: &VoxelKey) -> Option<DirichletCell> {
        self.alpha(key).map(|a| DirichletCell { alpha: a.to_vec() })
    }

    /// Every existing voxel with its concentrations, blocks in key order.
    pub fn voxels(&self) -> impl Iterator<Item = (VoxelKey, &[f64])> + '_ {
        let c = self.cfg.categories();
        let bs = self.cfg.block_size;
        self.sorted_block_keys().into_iter().flat_map(move |bk| {
            let block = &self.blocks[&bk];
            block
                .alpha
                .chunks_exact(c)
                .enumerate()
                .map(move |(off, a)| (bk.voxel(off, bs), a))
        })
    }

    pub fn query_cell(&self, position: &Point3) -> CellQuery {
        let key = VoxelKey::of(position, self.cfg.resolution);
        let probabilities = match self.alpha(&key) {
            Some(a) => {
                let sum: f64 = a.iter().sum();
                a.iter().map(|v| v / sum).collect()
            }
            None => vec![1.0 / self.cfg.categories() as f64; self.cfg.categories()],
        };
        let class = predicted_class(&probabilities);
        CellQuery {
            probabilities,
            class,
            occupied: class != FREE_CLASS,
        }
    }

    pub fn count_class_nodes(&self, class: ClassId) -> usize {
        let c = self.cfg.categories();
        self.blocks
            .values()
            .flat_map(|b| b.alpha.chunks_exact(c))
            .filter(|a| predicted_class(a) == class)
            .count()
    }

    /// Node counts for every category, index = class id.
    pub fn class_histogram(&self) -> Vec<usize> {
        let c = self.cfg.categories();
        let mut counts = vec![0; c];
        for b in self.blocks.values() {
            for a in b.alpha.chunks_exact(c) {
                counts[predicted_class(a) as usize] += 1;
            }
        }
        counts
    }

    /// Applies a caller-computed increment to one voxel; used by tests and
    /// by replaying exported evidence.
    pub fn add_evidence(&mut self, key: &VoxelKey, increments: &[f64]) {
        let c = self.cfg.categories();
        assert_eq!(increments.len(), c);
        let bs = self.cfg.block_size;
        let off = key.offset_in_block(bs) * c;
        let block = self.block_mut_or_new(key.block(bs));
        for (a, inc) in block.alpha[off..off + c].iter_mut().zip(increments) {
            *a += inc;
        }
    }
}
