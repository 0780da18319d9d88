//! Run configuration: a TOML file overlaid with command-line flags.
//!
//! ```toml
//! [map]
//! resolution = 0.3
//! free_space = { strategy = "line:bilinear", rng_seed = 7 }
//!
//! [run]
//! threads = 4
//! frames = "0..100"
//! out = "out"
//! label_map = "semantic-kitti"
//!
//! [bench]
//! strategies = ["none", "even:1", "line:bilinear"]
//!
//! [classes]
//! 1 = "car"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use bkimap::{FreeSpaceStrategy, MapConfig};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::classes::{ClassNames, LabelMap};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub map: MapConfig,
    pub run: RunOptions,
    pub bench: BenchOptions,
    /// Class id (decimal) to display name, over the default table.
    pub classes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunOptions {
    /// Worker threads for the mapper; 0 picks one per core.
    pub threads: usize,
    pub frames: Option<FrameRange>,
    pub out: PathBuf,
    pub label_map: LabelMap,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            threads: 0,
            frames: None,
            out: PathBuf::from("out"),
            label_map: LabelMap::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchOptions {
    /// One benchmark configuration per strategy, otherwise equal to `map`.
    pub strategies: Vec<FreeSpaceStrategy>,
    /// Frames of the built-in synthetic sequence when no dataset is given.
    pub synthetic_frames: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            strategies: ["none", "even:1", "line:bilinear"]
                .map(|s| s.parse().unwrap())
                .to_vec(),
            synthetic_frames: 5,
        }
    }
}

/// Frame interval: `a..b` (end exclusive), `a..=b`, `a..` or a single `a`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FrameRange {
    pub start: usize,
    pub end: Option<usize>,
}

impl FrameRange {
    /// Concrete range over a sequence of `len` frames.
    pub fn to_range(self, len: usize) -> Range<usize> {
        self.start..self.end.unwrap_or(len)
    }
}

impl FromStr for FrameRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("bad frame range '{s}', expected a..b, a..=b, a.. or a");
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let r = if let Some((a, b)) = s.split_once("..=") {
            FrameRange {
                start: num(a)?,
                end: Some(num(b)? + 1),
            }
        } else if let Some((a, b)) = s.split_once("..") {
            FrameRange {
                start: num(a)?,
                end: if b.trim().is_empty() {
                    None
                } else {
                    Some(num(b)?)
                },
            }
        } else {
            let a = num(s)?;
            FrameRange {
                start: a,
                end: Some(a + 1),
            }
        };
        if r.end.is_some_and(|e| e <= r.start) {
            return Err(format!("empty frame range '{s}'"));
        }
        Ok(r)
    }
}

impl fmt::Display for FrameRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.end {
            Some(e) => write!(f, "{}..{e}", self.start),
            None => write!(f, "{}..", self.start),
        }
    }
}

impl TryFrom<String> for FrameRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FrameRange> for String {
    fn from(r: FrameRange) -> Self {
        r.to_string()
    }
}

/// Options shared by every subcommand. Each one overrides its counterpart
/// in the `--config` file.
#[derive(Args, Clone, Debug, Default)]
pub struct MapFlags {
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Voxel edge in meters.
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Kernel support radius in meters.
    #[arg(long)]
    pub kernel_length: Option<f64>,
    /// Kernel magnitude.
    #[arg(long)]
    pub kernel_scale: Option<f64>,
    /// Dirichlet prior per category.
    #[arg(long)]
    pub prior: Option<f64>,
    /// Semantic classes, free space excluded.
    #[arg(long)]
    pub num_classes: Option<u16>,
    /// none | even:<gap> | uniform:<k> | linear:<k> | line:<uniform|linear|bilinear>.
    /// Repeat to benchmark several strategies.
    #[arg(long)]
    pub free_space: Vec<FreeSpaceStrategy>,
    /// Voxels per block edge.
    #[arg(long)]
    pub block_size: Option<u32>,
    /// Voxel-grid leaf in meters; 0 disables downsampling.
    #[arg(long)]
    pub downsample_leaf: Option<f64>,
    /// Angular inflation of spherical index queries.
    #[arg(long)]
    pub index_inflation: Option<f64>,
    /// Seed of the free-space samplers.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 picks one per core.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Frames to process: a..b, a..=b, a.. or a.
    #[arg(long)]
    pub frames: Option<FrameRange>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// identity | semantic-kitti.
    #[arg(long)]
    pub label_map: Option<LabelMap>,
    /// Display name for a class, as ID=NAME. Repeatable.
    #[arg(long, value_name = "ID=NAME")]
    pub class_name: Vec<String>,
}

impl MapFlags {
    /// Loads the config file (if any), applies the flags and validates.
    pub fn resolve(&self) -> Result<AppConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => AppConfig::default(),
        };
        let m = &mut cfg.map;
        set(&mut m.resolution, self.resolution);
        set(&mut m.kernel.length, self.kernel_length);
        set(&mut m.kernel.scale, self.kernel_scale);
        set(&mut m.prior, self.prior);
        set(&mut m.num_classes, self.num_classes);
        set(&mut m.block_size, self.block_size);
        set(&mut m.downsample_leaf, self.downsample_leaf);
        set(&mut m.index_inflation, self.index_inflation);
        set(&mut m.free_space.rng_seed, self.seed);
        if let Some(first) = self.free_space.first() {
            m.free_space.strategy = *first;
            cfg.bench.strategies = self.free_space.clone();
        }
        set(&mut cfg.run.threads, self.threads);
        if self.frames.is_some() {
            cfg.run.frames = self.frames;
        }
        if let Some(out) = &self.out {
            cfg.run.out = out.clone();
        }
        set(&mut cfg.run.label_map, self.label_map);
        for entry in &self.class_name {
            let Some((id, name)) = entry.split_once('=') else {
                bail!("--class-name expects ID=NAME, got '{entry}'");
            };
            cfg.classes.insert(id.trim().to_string(), name.to_string());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl AppConfig {
    pub fn validate(&self) -> Result<()> {
        self.map.validate()?;
        if self.bench.strategies.is_empty() {
            bail!("bench.strategies is empty");
        }
        for s in &self.bench.strategies {
            s.validate()?;
        }
        self.class_names()?;
        Ok(())
    }

    pub fn class_names(&self) -> Result<ClassNames> {
        ClassNames::new(self.map.num_classes, &self.classes)
    }

    /// One map configuration per benchmark strategy.
    pub fn bench_configs(&self) -> Vec<MapConfig> {
        self.bench
            .strategies
            .iter()
            .map(|s| {
                let mut c = self.map.clone();
                c.free_space.strategy = *s;
                c
            })
            .collect()
    }
}

pub fn load_config(path: &Path) -> Result<AppConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("config {}", path.display()))
}
