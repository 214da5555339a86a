//! Subcommand dispatch, artifact writing and the run manifest.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use paqs::protocols::{
    replay_schedule, run_aslo, run_baseline, run_tea, EnsembleStats, FeedbackSchedule, RunOptions,
};
use paqs::tangle::{run_tangle, TangleStats};
use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, RawConfig, RunConfig};
use crate::output::{read_csv, render_csv, sha256_hex};

pub const FIDELITY_HEADER: [&str; 3] = ["time_us", "mean_fidelity", "sem"];
pub const SCHEDULE_HEADER: [&str; 3] = ["time_us", "a1", "a2"];
pub const HISTOGRAM_HEADER: [&str; 4] = ["snapshot_time_us", "bin_lo_rad", "bin_hi_rad", "frequency"];
pub const TANGLE_HEADER: [&str; 3] = ["time_us", "mean_tangle", "sem"];
pub const MANIFEST_FILE: &str = "manifest.json";
pub const WORKERS_ENV: &str = "PAQS_SIM_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Tea,
    Aslo,
    Replay,
    Baseline,
    Tangle,
    Schedule,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Tea => "tea",
            Subcommand::Aslo => "aslo",
            Subcommand::Replay => "replay",
            Subcommand::Baseline => "baseline",
            Subcommand::Tangle => "tangle",
            Subcommand::Schedule => "schedule",
        }
    }

    /// Config `protocol` values this subcommand accepts.
    fn accepts(self, protocol: &str) -> bool {
        match self {
            Subcommand::Tea => protocol == "tea",
            Subcommand::Baseline => matches!(protocol, "baseline" | "baseline-no-feedback"),
            Subcommand::Tangle => protocol == "tangle",
            Subcommand::Aslo | Subcommand::Replay | Subcommand::Schedule => {
                matches!(protocol, "aslo" | "replay" | "schedule")
            }
        }
    }
}

#[derive(Debug)]
pub enum CliError {
    Config(ConfigError),
    Usage(String),
    Run(String),
    Io(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "{e}"),
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Run(m) => write!(f, "run failed: {m}"),
            CliError::Io(m) => write!(f, "i/o error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 2,
            CliError::Run(_) | CliError::Io(_) => 1,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<paqs::Error> for CliError {
    fn from(e: paqs::Error) -> Self {
        CliError::Run(e.to_string())
    }
}

/// Exit status when every artifact was written but trajectories aborted.
pub const EXIT_ABORTED: i32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbortRecord {
    pub trajectory: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub config: RawConfig,
    pub config_sha256: String,
    /// Identifies the configuration a schedule belongs to; checked on replay.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_fingerprint: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule_source: Option<String>,
    pub workers: usize,
    pub trajectories_completed: usize,
    pub aborted: Vec<AbortRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub large_angle_fraction: Option<f64>,
    pub wall_time_s: f64,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, Default)]
pub struct CliOptions {
    pub workers: Option<usize>,
    pub schedule: Option<PathBuf>,
    pub raw_steps: bool,
}

/// Worker count: `PAQS_SIM_WORKERS` beats the flag, the flag beats the
/// machine default.
pub fn resolve_workers(flag: Option<usize>, env: Option<&str>) -> Result<usize, CliError> {
    let n = match env {
        Some(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| CliError::Usage(format!("{WORKERS_ENV}={v:?} is not a worker count")))?,
        None => flag.unwrap_or_else(paqs::parallel::default_workers),
    };
    if n == 0 {
        return Err(CliError::Usage("worker count must be at least 1".into()));
    }
    Ok(n)
}

struct Pending {
    file: &'static str,
    text: String,
    rows: usize,
}

fn csv(file: &'static str, header: &[&str], rows: Vec<Vec<f64>>) -> Result<Pending, CliError> {
    let n = rows.len();
    let text = render_csv(header, &rows)
        .map_err(|e| CliError::Run(format!("non-finite value in {file}, column {} row {}", e.column, e.row)))?;
    Ok(Pending { file, text, rows: n })
}

fn fidelity_rows(stats: &EnsembleStats) -> Vec<Vec<f64>> {
    (0..stats.times.len()).map(|i| vec![stats.times[i], stats.mean_fidelity[i], stats.sem[i]]).collect()
}

fn schedule_rows(s: &FeedbackSchedule) -> Vec<Vec<f64>> {
    (0..s.times.len()).map(|i| vec![s.times[i], s.a1[i], s.a2[i]]).collect()
}

fn tangle_artifacts(stats: &TangleStats) -> Result<Vec<Pending>, CliError> {
    let n = stats.times.len();
    let fid = (0..n).map(|i| vec![stats.times[i], stats.mean_fidelity[i], stats.sem_fidelity[i]]).collect();
    let tau = (0..n).map(|i| vec![stats.times[i], stats.mean_tangle[i], stats.sem_tangle[i]]).collect();
    let hist = stats
        .histograms
        .iter()
        .flat_map(|h| (0..h.frequency.len()).map(move |b| vec![h.time, h.edges[b], h.edges[b + 1], h.frequency[b]]))
        .collect();
    Ok(vec![
        csv("fidelity.csv", &FIDELITY_HEADER, fid)?,
        csv("tangle.csv", &TANGLE_HEADER, tau)?,
        csv("histogram.csv", &HISTOGRAM_HEADER, hist)?,
    ])
}

/// Load a schedule CSV and the fingerprint from the manifest beside it.
pub fn load_schedule(path: &Path) -> Result<FeedbackSchedule, CliError> {
    let rows = read_csv(path, &SCHEDULE_HEADER).map_err(CliError::Io)?;
    let manifest_path = path.parent().unwrap_or(Path::new(".")).join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&manifest_path).map_err(|e| {
        CliError::Io(format!("schedule needs its manifest {}: {e}", manifest_path.display()))
    })?;
    let manifest: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    let fingerprint = manifest
        .schedule_fingerprint
        .ok_or_else(|| CliError::Run(format!("{} records no schedule", manifest_path.display())))?;
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    let bytes = std::fs::read(path).map_err(|e| CliError::Io(e.to_string()))?;
    if let Some(a) = manifest.artifacts.iter().find(|a| a.file == file) {
        if a.sha256 != sha256_hex(&bytes) {
            return Err(CliError::Run(format!("{} does not match the digest in its manifest", path.display())));
        }
    }
    Ok(FeedbackSchedule {
        times: rows.iter().map(|r| r[0]).collect(),
        a1: rows.iter().map(|r| r[1]).collect(),
        a2: rows.iter().map(|r| r[2]).collect(),
        fingerprint,
    })
}

pub struct RunReport {
    pub manifest: RunManifest,
    pub manifest_path: PathBuf,
}

impl RunReport {
    pub fn aborted(&self) -> usize {
        self.manifest.aborted.len()
    }
}

fn aborts(list: &[(u64, String)]) -> Vec<AbortRecord> {
    list.iter().map(|(i, r)| AbortRecord { trajectory: *i, reason: r.clone() }).collect()
}

pub fn run(cmd: Subcommand, cfg: &RunConfig, opts: &CliOptions) -> Result<RunReport, CliError> {
    if !cmd.accepts(&cfg.raw.protocol) {
        return Err(CliError::Config(ConfigError {
            key: Some("protocol".into()),
            message: format!("{:?} cannot be run by the {} subcommand", cfg.raw.protocol, cmd.name()),
        }));
    }
    if cmd == Subcommand::Replay && opts.schedule.is_none() {
        return Err(CliError::Usage("replay requires --schedule <path>".into()));
    }
    if cmd == Subcommand::Replay && cfg.protocol.n_traj == 0 {
        return Err(CliError::Config(ConfigError { key: Some("n_traj".into()), message: "must be at least 1".into() }));
    }
    let workers = resolve_workers(opts.workers, std::env::var(WORKERS_ENV).ok().as_deref())?;
    let mut run_opts = RunOptions::with_workers(workers);
    run_opts.raw_steps = opts.raw_steps;
    let config = &cfg.protocol;
    let start = Instant::now();

    let mut pending = Vec::new();
    let mut aborted = Vec::new();
    let mut completed = 1;
    let mut large = None;
    let mut fingerprint = None;
    let mut source = None;
    match cmd {
        Subcommand::Tea | Subcommand::Baseline => {
            let stats = if cmd == Subcommand::Tea { run_tea(config, &run_opts)? } else { run_baseline(config, &run_opts)? };
            pending.push(csv("fidelity.csv", &FIDELITY_HEADER, fidelity_rows(&stats))?);
            aborted = aborts(&stats.aborted);
            completed = stats.n_traj;
            if cmd == Subcommand::Tea {
                large = Some(stats.large_angle_fraction);
            }
        }
        Subcommand::Aslo | Subcommand::Schedule => {
            let out = run_aslo(config, &run_opts)?;
            if cmd == Subcommand::Aslo {
                pending.push(csv("fidelity.csv", &FIDELITY_HEADER, fidelity_rows(&out.stats))?);
            }
            pending.push(csv("schedule.csv", &SCHEDULE_HEADER, schedule_rows(&out.schedule))?);
            fingerprint = Some(out.schedule.fingerprint.clone());
        }
        Subcommand::Replay => {
            let path = opts.schedule.as_ref().expect("checked above");
            let schedule = load_schedule(path)?;
            let stats = replay_schedule(&schedule, config, &run_opts)?;
            pending.push(csv("fidelity.csv", &FIDELITY_HEADER, fidelity_rows(&stats))?);
            aborted = aborts(&stats.aborted);
            completed = stats.n_traj;
            source = Some(path.display().to_string());
        }
        Subcommand::Tangle => {
            let stats = run_tangle(config, &run_opts)?;
            pending.extend(tangle_artifacts(&stats)?);
            aborted = aborts(&stats.aborted);
            completed = stats.n_traj;
        }
    }

    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let mut artifacts = Vec::new();
    for p in pending {
        let path = dir.join(p.file);
        std::fs::write(&path, p.text.as_bytes()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        artifacts.push(Artifact { file: p.file.into(), sha256: sha256_hex(p.text.as_bytes()), rows: p.rows });
    }
    let echo = serde_json::to_string(&cfg.raw).expect("config serializes");
    let manifest = RunManifest {
        subcommand: cmd.name().into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.raw.clone(),
        config_sha256: sha256_hex(echo.as_bytes()),
        schedule_fingerprint: fingerprint,
        schedule_source: source,
        workers,
        trajectories_completed: completed,
        aborted,
        large_angle_fraction: large,
        wall_time_s: start.elapsed().as_secs_f64(),
        artifacts,
    };
    let manifest_path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    std::fs::write(&manifest_path, text).map_err(|e| CliError::Io(format!("{}: {e}", manifest_path.display())))?;
    Ok(RunReport { manifest, manifest_path })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn env_overrides_flag() {
        assert_eq!(resolve_workers(Some(4), Some("2")).unwrap(), 2);
        assert_eq!(resolve_workers(Some(4), None).unwrap(), 4);
        assert!(resolve_workers(None, None).unwrap() >= 1);
        assert!(matches!(resolve_workers(Some(4), Some("many")), Err(CliError::Usage(_))));
        assert!(matches!(resolve_workers(Some(0), None), Err(CliError::Usage(_))));
    }

    #[test]
    fn protocol_compatibility() {
        assert!(Subcommand::Tea.accepts("tea"));
        assert!(!Subcommand::Tea.accepts("aslo"));
        assert!(Subcommand::Replay.accepts("aslo"));
        assert!(Subcommand::Schedule.accepts("replay"));
        assert!(Subcommand::Baseline.accepts("baseline-no-feedback"));
        assert!(!Subcommand::Tangle.accepts("tea"));
    }
}
