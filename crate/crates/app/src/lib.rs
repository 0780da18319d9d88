//! Dataset ingestion, configuration, benchmarks and the `bkimap` command.

pub mod bench;
pub mod classes;
pub mod cli;
pub mod config;
pub mod dataset;

pub use bench::{run_benchmark, run_config, write_bench_csv, MapRun, RunReport};
pub use classes::{ClassNames, LabelMap, DEFAULT_CLASS_NAMES};
pub use config::{AppConfig, FrameRange, MapFlags};
pub use dataset::{load_frames, Frame, FrameSource, Pose, Sequence};
