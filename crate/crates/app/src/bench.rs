//! Benchmark harness: builds one map per configuration over the same frames
//! and records per-frame update time and class node counts.

use std::io::Write;
use std::time::Instant;

use bkimap::{update_map, BlockMap, MapConfig, MapError, Scan};

use crate::classes::ClassNames;

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub config_id: usize,
    pub config: MapConfig,
    /// Wall time of each map update, ms; file I/O excluded.
    pub frame_ms: Vec<f64>,
    /// Per frame, node counts for classes `1..=C` after that frame.
    pub class_nodes: Vec<Vec<usize>>,
}

impl RunReport {
    pub fn mean_ms(&self) -> f64 {
        self.frame_ms.iter().sum::<f64>() / self.frame_ms.len().max(1) as f64
    }

    /// Sample standard deviation; 0 for a single frame.
    pub fn std_ms(&self) -> f64 {
        let n = self.frame_ms.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean_ms();
        (self.frame_ms.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    }

    pub fn final_nodes(&self) -> &[usize] {
        self.class_nodes.last().map_or(&[], Vec::as_slice)
    }
}

/// A map under construction plus its running report.
pub struct MapRun {
    map: BlockMap,
    report: RunReport,
}

impl MapRun {
    pub fn new(cfg: &MapConfig, config_id: usize) -> Result<Self, MapError> {
        Ok(Self {
            map: BlockMap::new(cfg.clone())?,
            report: RunReport {
                config_id,
                config: cfg.clone(),
                frame_ms: Vec::new(),
                class_nodes: Vec::new(),
            },
        })
    }

    /// Integrates one frame; returns its update time in ms.
    pub fn integrate(&mut self, scan: &Scan) -> Result<f64, MapError> {
        let t = Instant::now();
        update_map(&mut self.map, scan)?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        self.report.frame_ms.push(ms);
        self.report
            .class_nodes
            .push(self.map.class_histogram()[1..].to_vec());
        Ok(ms)
    }

    pub fn map(&self) -> &BlockMap {
        &self.map
    }

    pub fn finish(self) -> (RunReport, BlockMap) {
        (self.report, self.map)
    }
}

/// Integrates every scan into a fresh map built from `cfg`.
pub fn run_config(
    scans: &[Scan],
    cfg: &MapConfig,
    config_id: usize,
) -> Result<(RunReport, BlockMap), MapError> {
    let mut run = MapRun::new(cfg, config_id)?;
    for scan in scans {
        run.integrate(scan)?;
    }
    Ok(run.finish())
}

pub fn run_benchmark(scans: &[Scan], configs: &[MapConfig]) -> Result<Vec<RunReport>, MapError> {
    configs
        .iter()
        .enumerate()
        .map(|(i, cfg)| run_config(scans, cfg, i).map(|(r, _)| r))
        .collect()
}

/// Columns `config_id,frame,ms,class_1_nodes,...`, one row per frame.
pub fn write_bench_csv<W: Write>(reports: &[RunReport], out: W) -> csv::Result<()> {
    let classes = reports
        .iter()
        .map(|r| r.config.num_classes)
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "config_id".to_string(),
        "frame".to_string(),
        "ms".to_string(),
    ];
    header.extend((1..=classes).map(|c| format!("class_{c}_nodes")));
    w.write_record(&header)?;
    for r in reports {
        for (frame, (ms, nodes)) in r.frame_ms.iter().zip(&r.class_nodes).enumerate() {
            let mut row = vec![
                r.config_id.to_string(),
                frame.to_string(),
                format!("{ms:.3}"),
            ];
            row.extend(
                (0..classes as usize)
                    .map(|c| nodes.get(c).map_or(String::new(), |n| n.to_string())),
            );
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table: one block per configuration.
pub fn summary(reports: &[RunReport], names: &ClassNames) -> String {
    let mut s = String::new();
    for r in reports {
        s += &format!(
            "config {} [{}]: {} frames, {:.2} +- {:.2} ms/frame\n",
            r.config_id,
            r.config.free_space.strategy,
            r.frame_ms.len(),
            r.mean_ms(),
            r.std_ms()
        );
        let nodes: Vec<String> = r
            .final_nodes()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(i, n)| format!("{}={n}", names.name(i as u16 + 1)))
            .collect();
        s += &format!(
            "  final nodes: {}\n",
            if nodes.is_empty() {
                "-".into()
            } else {
                nodes.join(" ")
            }
        );
    }
    s
}
