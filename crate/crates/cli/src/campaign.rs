use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use shopbot_core::executor::{self, Artifacts, Executor, RunConfig, RunLog};
use shopbot_core::metrics::{CampaignReport, Taxonomy};

use crate::artifacts::{load_roadmap, load_robot, load_store, require_file, write_file};

/// Campaign file. Relative paths are resolved against the file's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    pub store: PathBuf,
    pub robot: PathBuf,
    pub roadmap: PathBuf,
    pub output: PathBuf,
    pub seed: u64,
    pub n_runs: usize,
    /// Summed simulated time after which no further run is started, s.
    #[serde(default)]
    pub time_budget_s: Option<f64>,
    #[serde(default)]
    pub run: RunConfig,
}

impl CampaignConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        require_file(path)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: CampaignConfig =
            serde_json::from_str(&text).with_context(|| format!("invalid campaign config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.store, &mut cfg.robot, &mut cfg.roadmap, &mut cfg.output] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.n_runs == 0 {
            bail!("invalid campaign config {}: n_runs must be at least 1", path.display());
        }
        cfg.run.validate().with_context(|| format!("invalid campaign config {}", path.display()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
    Csv,
}

fn log_name(index: usize) -> String {
    format!("run_{index:05}.jsonl")
}

pub fn run_campaign(config: &Path, workers: usize) -> anyhow::Result<()> {
    let cfg = CampaignConfig::load(config)?;
    let store = load_store(&cfg.store)?;
    let model = load_robot(&cfg.robot)?;
    let (roadmap, cmap) = load_roadmap(&cfg.roadmap, &model)?;
    let art = Artifacts { store: &store, model: &model, roadmap: &roadmap, cmap: &cmap };
    let ex = Executor::new(art, cfg.run.clone())?;
    let logs = executor::run_campaign(&ex, cfg.n_runs, cfg.seed, cfg.time_budget_s, workers)?;

    let log_dir = cfg.output.join("logs");
    fs::create_dir_all(&log_dir).with_context(|| format!("creating {}", log_dir.display()))?;
    clear_logs(&log_dir)?;
    let mut reread = Vec::with_capacity(logs.len());
    for (i, log) in logs.iter().enumerate() {
        let text = log.to_jsonl();
        write_file(&log_dir.join(log_name(i)), &text)?;
        reread.push(RunLog::from_jsonl(&text)?);
    }
    // the report is computed from the serialized logs so that `report` reproduces it
    let report = CampaignReport::from_logs(&reread, &Taxonomy::default())?;
    write_file(&cfg.output.join("report.json"), report.to_json())?;
    write_file(&cfg.output.join("report.txt"), report.to_text())?;
    write_file(&cfg.output.join("runs.csv"), report.to_csv())?;
    print!("{}", report.to_text());
    println!();
    println!("output written to {}", cfg.output.display());
    Ok(())
}

/// Removes run logs of an earlier campaign in the same directory.
fn clear_logs(dir: &Path) -> anyhow::Result<()> {
    for p in jsonl_files(dir)? {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.starts_with("run_") {
            fs::remove_file(&p).with_context(|| format!("removing {}", p.display()))?;
        }
    }
    Ok(())
}

fn jsonl_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = entry?.path();
        if p.is_file() && p.extension().is_some_and(|e| e == "jsonl") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// Reads the logs of every directory in order, files sorted by name.
pub fn read_logs(dirs: &[PathBuf]) -> anyhow::Result<Vec<RunLog>> {
    let mut logs = Vec::new();
    for dir in dirs {
        if !dir.is_dir() {
            bail!("{}: directory not found", dir.display());
        }
        for p in jsonl_files(dir)? {
            let text = fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
            let log = RunLog::from_jsonl(&text).with_context(|| format!("parsing {}", p.display()))?;
            log.check_well_formed().with_context(|| format!("checking {}", p.display()))?;
            logs.push(log);
        }
    }
    if logs.is_empty() {
        bail!("no run logs (*.jsonl) found");
    }
    Ok(logs)
}

pub fn report(dirs: &[PathBuf], format: Format) -> anyhow::Result<()> {
    let logs = read_logs(dirs)?;
    let report = CampaignReport::from_logs(&logs, &Taxonomy::default())?;
    let out = match format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
        Format::Csv => report.to_csv(),
    };
    print!("{out}");
    Ok(())
}
