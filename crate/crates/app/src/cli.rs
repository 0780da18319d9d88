//! Command-line surface. Exit codes: 0 success, 2 bad configuration,
//! 3 bad input data, 1 anything else (such as an unwritable output).

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use bkimap::occupancy_map::{write_csv, write_ply, write_ply_points};
use bkimap::sim2d::{load_scenario, run_scenario, write_metrics_csv, ScenarioReport};
use bkimap::synthetic::{street_sequence, SyntheticLidar};
use bkimap::{MapConfig, Point3, Scan};
use clap::{Args, Parser, Subcommand};

use crate::bench::{summary, write_bench_csv, MapRun, RunReport};
use crate::config::{AppConfig, MapFlags};
use crate::dataset::Sequence;

#[derive(Parser, Debug)]
#[command(
    name = "bkimap",
    version,
    about = "Semantic occupancy mapping with line-based free space"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a map from a lidar sequence and export it as CSV and PLY.
    BuildMap(BuildMapArgs),
    /// Run a 2D scenario file and write per-frame metrics.
    Sim2d(Sim2dArgs),
    /// Compare configurations on a sequence (synthetic if none is given).
    Bench(BenchArgs),
    /// Convert an exported map CSV to a PLY of its occupied voxels.
    Export(ExportArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct DatasetArgs {
    /// Directory of NNNNNN.bin scans.
    #[arg(long)]
    pub scans: Option<PathBuf>,
    /// Directory of NNNNNN.label files.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Poses file, one row-major 3x4 lidar-to-world transform per line.
    #[arg(long)]
    pub poses: Option<PathBuf>,
}

impl DatasetArgs {
    fn paths(&self) -> Option<(&Path, &Path, &Path)> {
        Some((
            self.scans.as_deref()?,
            self.labels.as_deref()?,
            self.poses.as_deref()?,
        ))
    }

    fn any(&self) -> bool {
        self.scans.is_some() || self.labels.is_some() || self.poses.is_some()
    }
}

#[derive(Args, Debug)]
pub struct BuildMapArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[command(flatten)]
    pub flags: MapFlags,
}

#[derive(Args, Debug)]
pub struct Sim2dArgs {
    /// Scenario TOML file.
    pub scenario: PathBuf,
    #[command(flatten)]
    pub flags: MapFlags,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Frames of the synthetic sequence used without a dataset.
    #[arg(long)]
    pub synthetic_frames: Option<usize>,
    #[command(flatten)]
    pub flags: MapFlags,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    /// Map CSV written by build-map.
    pub input: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub error: anyhow::Error,
}

impl CliError {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 2,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 3,
            error: error.into(),
        }
    }

    pub fn other(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: 1,
            error: error.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::BuildMap(a) => build_map(&a),
        Command::Sim2d(a) => sim2d(&a),
        Command::Bench(a) => bench(&a),
        Command::Export(a) => export(&a),
    }
}

fn resolve(flags: &MapFlags) -> CliResult<AppConfig> {
    flags.resolve().map_err(CliError::config)
}

fn single_strategy(flags: &MapFlags) -> CliResult<()> {
    if flags.free_space.len() > 1 {
        return Err(CliError::config(anyhow!(
            "--free-space given {} times; only bench accepts several",
            flags.free_space.len()
        )));
    }
    Ok(())
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(CliError::other)?;
    pool.install(f)
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(CliError::other)?;
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot create {}", path.display()))
        .map_err(CliError::other)
}

fn open_sequence(
    data: &DatasetArgs,
    cfg: &AppConfig,
) -> CliResult<(Sequence, std::ops::Range<usize>)> {
    let (scans, labels, poses) = data.paths().ok_or_else(|| {
        CliError::config(anyhow!(
            "--scans, --labels and --poses must be given together"
        ))
    })?;
    let seq = Sequence::open(scans, labels, poses).map_err(CliError::data)?;
    let range = cfg
        .run
        .frames
        .map_or(0..seq.len(), |r| r.to_range(seq.len()));
    seq.check_range(&range).map_err(CliError::data)?;
    Ok((seq, range))
}

/// Streams the sequence into one fresh map; file I/O stays outside the
/// timed update.
fn map_sequence(
    seq: &Sequence,
    range: std::ops::Range<usize>,
    app: &AppConfig,
    map_cfg: &MapConfig,
    id: usize,
    verbose: bool,
) -> CliResult<MapRun> {
    let mut run = MapRun::new(map_cfg, id).map_err(CliError::config)?;
    for i in range {
        let frame = seq.frame(i).map_err(CliError::data)?;
        let scan = frame
            .to_scan(app.run.label_map, map_cfg.num_classes)
            .map_err(CliError::data)?;
        let ms = run
            .integrate(&scan)
            .with_context(|| format!("frame {}", frame.name()))
            .map_err(CliError::data)?;
        if verbose {
            eprintln!("frame {}: {} points, {ms:.1} ms", frame.name(), scan.len());
        }
    }
    Ok(run)
}

fn build_map(args: &BuildMapArgs) -> CliResult<()> {
    single_strategy(&args.flags)?;
    let cfg = resolve(&args.flags)?;
    let (seq, range) = open_sequence(&args.data, &cfg)?;
    let run = in_pool(cfg.run.threads, || {
        map_sequence(&seq, range, &cfg, &cfg.map, 0, true)
    })?;
    let (report, map) = run.finish();
    let out = &cfg.run.out;
    write_csv(&map, create(out, "map.csv")?).map_err(CliError::other)?;
    write_ply(&map, create(out, "map.ply")?).map_err(CliError::other)?;
    write_report(out, "frames.csv", std::slice::from_ref(&report))?;
    print!(
        "{}",
        summary(&[report], &cfg.class_names().map_err(CliError::config)?)
    );
    println!("wrote {}", out.display());
    Ok(())
}

fn write_report(out: &Path, name: &str, reports: &[RunReport]) -> CliResult<()> {
    write_bench_csv(reports, create(out, name)?).map_err(CliError::other)
}

fn sim2d(args: &Sim2dArgs) -> CliResult<()> {
    single_strategy(&args.flags)?;
    let cfg = resolve(&args.flags)?;
    let scene = load_scenario(&args.scenario).map_err(CliError::data)?;
    // the map is stateful, so frames before the range still run
    let range = cfg
        .run
        .frames
        .map_or(0..scene.frames, |r| r.to_range(scene.frames));
    let mut report = in_pool(cfg.run.threads, || {
        run_scenario(&scene, &cfg.map, Some(range.end)).map_err(CliError::config)
    })?;
    report.frames.retain(|f| range.contains(&f.frame));
    let name = format!("{}_metrics.csv", scene.name);
    let mut w = create(&cfg.run.out, &name)?;
    write_metrics_csv(&report, &mut w)
        .and_then(|_| w.flush())
        .map_err(CliError::other)?;
    print_scenario(&report, &cfg)?;
    println!("wrote {}", cfg.run.out.join(name).display());
    Ok(())
}

fn print_scenario(report: &ScenarioReport, cfg: &AppConfig) -> CliResult<()> {
    let names = cfg.class_names().map_err(CliError::config)?;
    if let Some(last) = report.frames.last() {
        let counts: Vec<String> = last
            .class_counts
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, &n)| n > 0)
            .map(|(c, n)| format!("{}={n}", names.name(c as u16)))
            .collect();
        println!(
            "{} [{}] frame {}: {}; false negatives {}",
            report.scene,
            cfg.map.free_space.strategy,
            last.frame,
            counts.join(" "),
            last.false_negatives
        );
    }
    Ok(())
}

fn bench(args: &BenchArgs) -> CliResult<()> {
    let mut cfg = resolve(&args.flags)?;
    if let Some(n) = args.synthetic_frames {
        cfg.bench.synthetic_frames = n;
    }
    let configs = cfg.bench_configs();
    let reports = if args.data.any() {
        let (seq, range) = open_sequence(&args.data, &cfg)?;
        in_pool(cfg.run.threads, || {
            configs
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    map_sequence(&seq, range.clone(), &cfg, c, i, false).map(|r| r.finish().0)
                })
                .collect::<CliResult<Vec<_>>>()
        })?
    } else {
        let total = cfg.bench.synthetic_frames;
        let range = cfg.run.frames.map_or(0..total, |r| r.to_range(total));
        let frames = street_sequence(
            &SyntheticLidar::hdl64(),
            range.end,
            cfg.map.free_space.rng_seed,
        );
        let scans = frames[range]
            .iter()
            .map(|f| Scan::new(f.origin, &f.points))
            .collect::<Result<Vec<_>, _>>()
            .map_err(CliError::data)?;
        in_pool(cfg.run.threads, || {
            crate::bench::run_benchmark(&scans, &configs).map_err(CliError::config)
        })?
    };
    write_report(&cfg.run.out, "bench.csv", &reports)?;
    let mut echo = create(&cfg.run.out, "bench_configs.toml")?;
    for r in &reports {
        let text = toml::to_string(&r.config).map_err(CliError::other)?;
        writeln!(echo, "[config_{}]\n{text}", r.config_id).map_err(CliError::other)?;
    }
    echo.flush().map_err(CliError::other)?;
    print!(
        "{}",
        summary(&reports, &cfg.class_names().map_err(CliError::config)?)
    );
    println!("wrote {}", cfg.run.out.display());
    Ok(())
}

#[derive(serde::Deserialize)]
struct MapRow {
    x: f64,
    y: f64,
    z: f64,
    class: u16,
}

fn export(args: &ExportArgs) -> CliResult<()> {
    let mut reader = csv::Reader::from_path(&args.input)
        .with_context(|| format!("cannot read {}", args.input.display()))
        .map_err(CliError::data)?;
    let mut points = Vec::new();
    for row in reader.deserialize() {
        let row: MapRow = row
            .with_context(|| format!("{}", args.input.display()))
            .map_err(CliError::data)?;
        if row.class != 0 {
            points.push((Point3::new(row.x, row.y, row.z), row.class));
        }
    }
    let stem = args
        .input
        .file_stem()
        .map_or("map".into(), |s| s.to_string_lossy().into_owned());
    let name = format!("{stem}.ply");
    let mut w = create(&args.out, &name)?;
    write_ply_points(&points, &mut w)
        .and_then(|_| w.flush())
        .map_err(CliError::other)?;
    println!(
        "{} occupied voxels -> {}",
        points.len(),
        args.out.join(name).display()
    );
    Ok(())
}
