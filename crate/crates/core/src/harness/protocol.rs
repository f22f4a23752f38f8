use std::path::Path;

use serde::{Deserialize, Serialize};

use super::metrics::IOU_THRESHOLD;
use super::stats::{aggregate_stats, SummaryStats};
use super::train::{train, RunResult, TrainConfig};
use crate::data::{make_partitions, Sample};
use crate::error::{Error, Result};
use crate::models::{build_model, ModelConfig};

pub const RUNS_FILE: &str = "runs.csv";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    pub partitions: usize,
    pub train_fraction: f64,
    /// Partition k uses seed `base_seed + k`; its model is initialized from
    /// the same seed.
    pub base_seed: u64,
}

impl ProtocolConfig {
    pub fn new(model: ModelConfig) -> Self {
        Self { model, train: TrainConfig::default(), partitions: 10, train_fraction: 0.8, base_seed: 0 }
    }
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSummary {
    pub model: String,
    pub scale: String,
    pub config: ProtocolConfig,
    pub iou_definition: String,
    pub quartile_method: String,
    pub test_iou: SummaryStats,
    pub runs: Vec<RunResult>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub runs: Vec<RunResult>,
    pub stats: SummaryStats,
}

fn fmt_f64(v: f64) -> String {
    // Shortest representation that round-trips, identical on every platform.
    format!("{v:?}")
}

/// One `runs.csv` row; epoch losses are `;`-joined in a single column.
#[derive(Serialize, Deserialize)]
struct CsvRow {
    model: String,
    scale: String,
    partition_seed: u64,
    test_iou: String,
    epoch_losses: String,
}

pub fn write_runs_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in runs {
        let losses: Vec<String> = r.epoch_losses.iter().map(|&l| fmt_f64(l)).collect();
        w.serialize(CsvRow {
            model: r.model.clone(),
            scale: r.scale.clone(),
            partition_seed: r.partition_seed,
            test_iou: fmt_f64(r.test_iou),
            epoch_losses: losses.join(";"),
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| {
            let row: CsvRow = row?;
            let num = |v: &str| v.parse::<f64>().map_err(|_| Error::Argument(format!("bad number {v:?} in runs file")));
            let epoch_losses = if row.epoch_losses.is_empty() {
                Vec::new()
            } else {
                row.epoch_losses.split(';').map(num).collect::<Result<_>>()?
            };
            Ok(RunResult {
                test_iou: num(&row.test_iou)?,
                model: row.model,
                scale: row.scale,
                partition_seed: row.partition_seed,
                epoch_losses,
            })
        })
        .collect()
}

pub fn write_summary(path: &Path, summary: &ProtocolSummary) -> Result<()> {
    let mut text = serde_json::to_string_pretty(summary)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Trains one fresh model per partition, in seed order, and summarizes the
/// test IoUs. With `out_dir`, `runs.csv` is rewritten after every finished
/// run (so a failure leaves the completed runs on disk) and `summary.json` is
/// written at the end.
pub fn run_protocol(cfg: &ProtocolConfig, dataset: &[Sample], out_dir: Option<&Path>) -> Result<ProtocolOutcome> {
    cfg.model.validate()?;
    if cfg.partitions == 0 {
        return Err(Error::Config("protocol needs at least one partition".into()));
    }
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let ids: Vec<String> = dataset.iter().map(|s| s.id.clone()).collect();
    let partitions = make_partitions(&ids, cfg.partitions, cfg.train_fraction, cfg.base_seed)?;

    let mut runs = Vec::with_capacity(partitions.len());
    for p in &partitions {
        let mut model = build_model(&cfg.model, p.seed)?;
        let run = train(&mut model, p, dataset, &cfg.train)?;
        log::info!("{} seed {}: test IoU {:.4}", cfg.model.tag(), p.seed, run.test_iou);
        runs.push(run);
        if let Some(dir) = out_dir {
            write_runs_csv(&dir.join(RUNS_FILE), &runs)?;
        }
    }

    let ious: Vec<f64> = runs.iter().map(|r| r.test_iou).collect();
    let stats = aggregate_stats(&ious)?;
    if let Some(dir) = out_dir {
        let summary = ProtocolSummary {
            model: cfg.model.variant.tag().into(),
            scale: cfg.model.scale.tag().into(),
            config: cfg.clone(),
            iou_definition: format!("per-image IoU at threshold {IOU_THRESHOLD}, averaged over the test split"),
            quartile_method: "linear interpolation at position p*(n-1); upper_quartile is Q1, lower_quartile is Q3"
                .into(),
            test_iou: stats.clone(),
            runs: runs.clone(),
        };
        write_summary(&dir.join(SUMMARY_FILE), &summary)?;
    }
    Ok(ProtocolOutcome { runs, stats })
}
