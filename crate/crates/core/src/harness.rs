//! Scenario configuration, seeded campaign execution, and result
//! serialization: the user-facing entry point behind the CLI.
//!
//! A campaign executes `runs` independent simulations with sequential
//! seeds and writes per-run per-node CSVs, confusion matrices for the
//! flagged nodes, a `summary.json` with aggregate statistics, and a
//! `manifest.json` tying every artifact back to the configuration and
//! trace hashes. Runs may execute in parallel (capped by the
//! `FLYSAFE_THREADS` environment variable); a single collector writes all
//! files so outputs are byte-stable.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::adversary::{AdversaryConfig, DetectorConfig, FalsifyStrategy};
use crate::kernel::{LatencyRule, Placement, RadioConfig, Simulation, SimulationConfig};
use crate::metrics::{
    compute_run_metrics, gamma_confusion, ConfusionMatrix, GroundTruthView, MetricsOptions,
    NodeMetrics, RunMetrics,
};
use crate::mobility::AreaBounds;
use crate::model::{SlotConfig, UavId};
use crate::protocol::ProtocolConfig;

/// Adversary section of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdversarySpec {
    pub malicious_ids: Vec<u32>,
    pub strategy: FalsifyStrategy,
    pub active_from_s: f64,
    /// Lying window end; omitted means the whole run.
    pub active_until_s: Option<f64>,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            malicious_ids: Vec::new(),
            strategy: FalsifyStrategy::UniformInArea,
            active_from_s: 0.0,
            active_until_s: None,
        }
    }
}

/// Complete scenario description. An empty JSON object yields the
/// reference configuration: 40 UAVs over 1.5 km x 1.5 km at 300 ft,
/// 20 m/s, 115 m range, 1.5 s slots, 1200 s missions, no adversary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub area_x_m: f64,
    pub area_y_m: f64,
    pub n_uavs: u32,
    pub speed_mps: f64,
    pub altitude_m: f64,
    pub range_m: f64,
    pub lambda_s: f64,
    pub lambda_min_s: f64,
    pub lambda_max_s: f64,
    pub sim_time_s: f64,
    pub runs: u32,
    pub seed: u64,
    pub loss_prob: f64,
    pub latency: LatencyRule,
    pub adversary: AdversarySpec,
    pub detector: DetectorConfig,
    pub gt_excludes_blocked: bool,
    pub block_threshold: u32,
    /// Nodes whose confusion matrices are written out; empty selects the
    /// malicious ids plus the two lowest honest ids when an adversary is
    /// configured.
    pub confusion_nodes: Vec<u32>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_x_m: 1500.0,
            area_y_m: 1500.0,
            n_uavs: 40,
            speed_mps: 20.0,
            altitude_m: 91.44,
            range_m: 115.0,
            lambda_s: 1.5,
            lambda_min_s: 0.1,
            lambda_max_s: 10.0,
            sim_time_s: 1200.0,
            runs: 35,
            seed: 1,
            loss_prob: 0.0,
            latency: LatencyRule::default(),
            adversary: AdversarySpec::default(),
            detector: DetectorConfig::default(),
            gt_excludes_blocked: false,
            block_threshold: 3,
            confusion_nodes: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid config at `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("run with seed {seed} failed: {message}")]
    RunFailed { seed: u64, message: String },
    #[error("summaries disagree on metric keys; missing: {0:?}")]
    KeyMismatch(Vec<String>),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl ScenarioConfig {
    /// Reference scenario with only honest nodes.
    pub fn preset_baseline() -> Self {
        Self::default()
    }

    /// Reference scenario plus one lying node, judged by the oracle
    /// detector.
    pub fn preset_baseattk() -> Self {
        Self {
            adversary: AdversarySpec {
                malicious_ids: vec![0],
                ..AdversarySpec::default()
            },
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::preset_baseline()),
            "baseattk" => Some(Self::preset_baseattk()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let fail = |field: &str, message: &str| {
            Err(HarnessError::Validation {
                field: field.to_string(),
                message: message.to_string(),
            })
        };
        if self.n_uavs == 0 {
            return fail("n_uavs", "at least one UAV is required");
        }
        if self.area_x_m <= 0.0 || self.area_y_m <= 0.0 {
            return fail("area_x_m/area_y_m", "area dimensions must be positive");
        }
        if self.speed_mps <= 0.0 {
            return fail("speed_mps", "flight speed must be positive");
        }
        if self.altitude_m <= 0.0 {
            return fail("altitude_m", "altitude must be positive");
        }
        if self.range_m <= 0.0 {
            return fail("range_m", "communication range must be positive");
        }
        if self.lambda_s <= 0.0
            || self.lambda_min_s > self.lambda_s
            || self.lambda_s > self.lambda_max_s
        {
            return fail(
                "lambda_s",
                "slot duration must be positive and inside [lambda_min_s, lambda_max_s]",
            );
        }
        if self.sim_time_s <= 0.0 {
            return fail("sim_time_s", "simulation time must be positive");
        }
        if self.runs == 0 {
            return fail("runs", "at least one run is required");
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return fail("loss_prob", "loss probability must lie in [0, 1]");
        }
        if let LatencyRule::Uniform { min_s, max_s } = self.latency {
            if min_s < 0.0 || max_s < min_s {
                return fail("latency", "latency bounds must satisfy 0 <= min <= max");
            }
        }
        for id in &self.adversary.malicious_ids {
            if *id >= self.n_uavs {
                return fail(
                    "adversary.malicious_ids",
                    &format!("id {id} outside deployed range [0, {})", self.n_uavs),
                );
            }
        }
        if let Some(until) = self.adversary.active_until_s {
            if until < self.adversary.active_from_s {
                return fail(
                    "adversary.active_until_s",
                    "active window must not end before it starts",
                );
            }
        }
        if self.detector.vmax <= 0.0 {
            return fail("detector.vmax", "vmax must be positive");
        }
        if self.detector.slack < 0.0 {
            return fail("detector.slack", "slack must be non-negative");
        }
        if self.block_threshold == 0 {
            return fail("block_threshold", "block threshold must be at least 1");
        }
        for id in &self.confusion_nodes {
            if *id >= self.n_uavs {
                return fail(
                    "confusion_nodes",
                    &format!("id {id} outside deployed range [0, {})", self.n_uavs),
                );
            }
        }
        Ok(())
    }

    /// Resolve into kernel parameters for one seeded run.
    pub fn to_simulation(&self, seed: u64) -> SimulationConfig {
        SimulationConfig {
            n_uavs: self.n_uavs as usize,
            bounds: AreaBounds::new(0.0, self.area_x_m, 0.0, self.area_y_m),
            altitude_m: self.altitude_m,
            speed_mps: self.speed_mps,
            slot: SlotConfig {
                lambda_s: self.lambda_s,
                lambda_min_s: self.lambda_min_s,
                lambda_max_s: self.lambda_max_s,
            },
            radio: RadioConfig {
                range_m: self.range_m,
                loss_prob: self.loss_prob,
                latency: self.latency,
            },
            protocol: ProtocolConfig {
                block_threshold: self.block_threshold,
                coverage_radius_m: self.range_m,
                ..ProtocolConfig::default()
            },
            adversary: AdversaryConfig {
                malicious_ids: self
                    .adversary
                    .malicious_ids
                    .iter()
                    .map(|&id| UavId(id))
                    .collect(),
                strategy: self.adversary.strategy,
                active_from: self.adversary.active_from_s,
                active_until: self.adversary.active_until_s.unwrap_or(f64::INFINITY),
            },
            detector: self.detector,
            sim_time_s: self.sim_time_s,
            seed,
            placement: Placement::UniformRandom,
        }
    }

    /// The nodes whose confusion matrices get written.
    pub fn flagged_nodes(&self) -> Vec<UavId> {
        if !self.confusion_nodes.is_empty() {
            let set: BTreeSet<u32> = self.confusion_nodes.iter().copied().collect();
            return set.into_iter().map(UavId).collect();
        }
        if self.adversary.malicious_ids.is_empty() {
            return Vec::new();
        }
        let malicious: BTreeSet<u32> = self.adversary.malicious_ids.iter().copied().collect();
        let mut flagged: Vec<UavId> = malicious.iter().copied().map(UavId).collect();
        let mut honest = 0;
        for id in 0..self.n_uavs {
            if !malicious.contains(&id) {
                flagged.push(UavId(id));
                honest += 1;
                if honest == 2 {
                    break;
                }
            }
        }
        flagged.sort();
        flagged
    }

    pub fn metrics_options(&self) -> MetricsOptions {
        MetricsOptions {
            gt_excludes_blocked: self.gt_excludes_blocked,
        }
    }
}

/// Parse and validate a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Aggregate statistics of one metric over all (run, node) samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub stddev: f64,
    pub ci95_halfwidth: f64,
    pub n: usize,
}

impl MetricStats {
    fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        if n == 0 {
            return Self {
                mean: 0.0,
                min: 0.0,
                max: 0.0,
                stddev: 0.0,
                ci95_halfwidth: 0.0,
                n,
            };
        }
        let mean = xs.iter().sum::<f64>() / n as f64;
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        let stddev = var.sqrt();
        Self {
            mean,
            min,
            max,
            stddev,
            ci95_halfwidth: 1.96 * stddev / (n as f64).sqrt(),
            n,
        }
    }
}

/// Campaign output as persisted in `summary.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub config: ScenarioConfig,
    pub runs: u32,
    pub metrics: BTreeMap<String, MetricStats>,
    pub upsilon_unmatched_total: u64,
}

pub const METRIC_COLUMNS: [&str; 17] = [
    "psi_s",
    "aoii_mean_s",
    "aoii_max_s",
    "aoi_mean_s",
    "omega_mean_m",
    "gamma_mean",
    "phi",
    "upsilon_mean_ms",
    "msgs_hm_sent",
    "msgs_hm_received",
    "msgs_im_sent",
    "msgs_im_received",
    "msgs_tm_sent",
    "msgs_tm_received",
    "msgs_sn_sent",
    "msgs_sn_received",
    "upsilon_unmatched",
];

fn node_metric_values(m: &NodeMetrics) -> [f64; 16] {
    [
        m.psi_s,
        m.aoii_mean_s,
        m.aoii_max_s,
        m.aoi_mean_s,
        m.omega_mean_m,
        m.gamma_mean,
        m.phi as f64,
        m.upsilon_mean_ms,
        m.counters.sent.hm as f64,
        m.counters.received.hm as f64,
        m.counters.sent.im as f64,
        m.counters.received.im as f64,
        m.counters.sent.tm as f64,
        m.counters.received.tm as f64,
        m.counters.sent.sn as f64,
        m.counters.received.sn as f64,
    ]
}

struct RunArtifacts {
    seed: u64,
    metrics: RunMetrics,
    confusions: Vec<(UavId, ConfusionMatrix)>,
    trace_hash: String,
}

fn execute_run(cfg: &ScenarioConfig, seed: u64) -> Result<RunArtifacts, HarnessError> {
    let result = std::panic::catch_unwind(|| {
        let sim = Simulation::new(cfg.to_simulation(seed));
        let trace = sim.run(cfg.sim_time_s);
        let metrics = compute_run_metrics(&trace, &cfg.metrics_options());
        let gt = GroundTruthView::build(&trace, &cfg.metrics_options());
        let confusions = cfg
            .flagged_nodes()
            .into_iter()
            .map(|id| (id, gamma_confusion(&trace, &gt, id)))
            .collect();
        RunArtifacts {
            seed,
            metrics,
            confusions,
            trace_hash: trace.content_hash(),
        }
    });
    result.map_err(|panic| HarnessError::RunFailed {
        seed,
        message: panic
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| panic.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".to_string()),
    })
}

fn campaign_threads(runs: usize) -> usize {
    std::env::var("FLYSAFE_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| {
            std::thread::available_parallelism()
                .map(|n| n.get())
                .unwrap_or(1)
        })
        .min(runs.max(1))
}

/// Execute every seeded run and write all result files.
pub fn run_campaign(cfg: &ScenarioConfig, out_dir: &Path) -> Result<CampaignSummary, HarnessError> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;

    let runs = cfg.runs as usize;
    let threads = campaign_threads(runs);
    let results: Mutex<Vec<Option<Result<RunArtifacts, HarnessError>>>> =
        Mutex::new((0..runs).map(|_| None).collect());
    let next = AtomicUsize::new(0);

    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= runs {
                    break;
                }
                let outcome = execute_run(cfg, cfg.seed + k as u64);
                results.lock().unwrap()[k] = Some(outcome);
            });
        }
    });

    let collected = results.into_inner().unwrap();
    let mut artifacts = Vec::with_capacity(runs);
    for slot in collected {
        artifacts.push(slot.expect("every run slot filled")?);
    }

    // Single collector writes everything in run order.
    let mut samples: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    let mut unmatched_total = 0u64;
    for (k, art) in artifacts.iter().enumerate() {
        let csv_path = out_dir.join(format!("metrics_run{k}.csv"));
        std::fs::write(&csv_path, render_metrics_csv(&art.metrics)).map_err(io_err(&csv_path))?;
        for (id, matrix) in &art.confusions {
            let path = out_dir.join(format!("confusion_run{k}_node{}.csv", id.0));
            std::fs::write(&path, render_confusion_csv(matrix)).map_err(io_err(&path))?;
        }
        for node in &art.metrics.nodes {
            for (col, value) in METRIC_COLUMNS.iter().zip(node_metric_values(node)) {
                samples.entry(col).or_default().push(value);
            }
        }
        unmatched_total += art.metrics.upsilon_unmatched;
    }
    samples.insert(
        "upsilon_unmatched",
        artifacts
            .iter()
            .map(|a| a.metrics.upsilon_unmatched as f64)
            .collect(),
    );

    let summary = CampaignSummary {
        config: cfg.clone(),
        runs: cfg.runs,
        metrics: samples
            .into_iter()
            .map(|(k, v)| (k.to_string(), MetricStats::from_samples(&v)))
            .collect(),
        upsilon_unmatched_total: unmatched_total,
    };

    let summary_path = out_dir.join("summary.json");
    std::fs::write(
        &summary_path,
        serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )
    .map_err(io_err(&summary_path))?;

    let manifest = serde_json::json!({
        "config_sha256": config_hash(cfg),
        "traces": artifacts
            .iter()
            .enumerate()
            .map(|(k, a)| serde_json::json!({
                "run": k,
                "seed": a.seed,
                "trace_sha256": a.trace_hash,
            }))
            .collect::<Vec<_>>(),
    });
    let manifest_path = out_dir.join("manifest.json");
    std::fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serializes"),
    )
    .map_err(io_err(&manifest_path))?;

    Ok(summary)
}

pub fn config_hash(cfg: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(cfg).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn render_metrics_csv(metrics: &RunMetrics) -> String {
    let mut out = String::from(
        "node_id,psi_s,aoii_mean_s,aoii_max_s,aoi_mean_s,omega_mean_m,gamma_mean,phi,\
         upsilon_mean_ms,msgs_hm_sent,msgs_hm_received,msgs_im_sent,msgs_im_received,\
         msgs_tm_sent,msgs_tm_received,msgs_sn_sent,msgs_sn_received\n",
    );
    for node in &metrics.nodes {
        let c = &node.counters;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            node.node.0,
            node.psi_s,
            node.aoii_mean_s,
            node.aoii_max_s,
            node.aoi_mean_s,
            node.omega_mean_m,
            node.gamma_mean,
            node.phi,
            node.upsilon_mean_ms,
            c.sent.hm,
            c.received.hm,
            c.sent.im,
            c.received.im,
            c.sent.tm,
            c.received.tm,
            c.sent.sn,
            c.received.sn,
        )
        .expect("string write");
    }
    out
}

fn render_confusion_csv(matrix: &ConfusionMatrix) -> String {
    let dim = matrix.dim();
    let mut out = String::from("true_count");
    for p in 0..dim {
        write!(out, ",perceived_{p}").expect("string write");
    }
    out.push('\n');
    for (t, row) in matrix.counts.iter().enumerate() {
        write!(out, "{t}").expect("string write");
        for c in row {
            write!(out, ",{c}").expect("string write");
        }
        out.push('\n');
    }
    out
}

/// Per-metric difference between two campaign summaries.
#[derive(Debug, Clone, Serialize)]
pub struct MetricDelta {
    pub a_mean: f64,
    pub b_mean: f64,
    pub abs_delta: f64,
    pub rel_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub metrics: BTreeMap<String, MetricDelta>,
}

impl ComparisonReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<22} {:>14} {:>14} {:>14} {:>10}",
            "metric", "a_mean", "b_mean", "delta", "rel"
        )
        .expect("string write");
        for (name, d) in &self.metrics {
            let rel = d
                .rel_delta
                .map(|r| format!("{:+.2}%", r * 100.0))
                .unwrap_or_else(|| "n/a".to_string());
            writeln!(
                out,
                "{:<22} {:>14.6} {:>14.6} {:>+14.6} {:>10}",
                name, d.a_mean, d.b_mean, d.abs_delta, rel
            )
            .expect("string write");
        }
        out
    }
}

pub fn load_summary(path: &Path) -> Result<CampaignSummary, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    })
}

/// Compare two summaries metric by metric. Both must expose exactly the
/// same metric keys.
pub fn compare(a: &CampaignSummary, b: &CampaignSummary) -> Result<ComparisonReport, HarnessError> {
    let missing: Vec<String> = a
        .metrics
        .keys()
        .filter(|k| !b.metrics.contains_key(*k))
        .chain(b.metrics.keys().filter(|k| !a.metrics.contains_key(*k)))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::KeyMismatch(missing));
    }
    let metrics = a
        .metrics
        .iter()
        .map(|(name, sa)| {
            let sb = &b.metrics[name];
            let abs_delta = sb.mean - sa.mean;
            let rel_delta = (sa.mean != 0.0).then(|| abs_delta / sa.mean);
            (
                name.clone(),
                MetricDelta {
                    a_mean: sa.mean,
                    b_mean: sb.mean,
                    abs_delta,
                    rel_delta,
                },
            )
        })
        .collect();
    Ok(ComparisonReport { metrics })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(runs: u32, seed: u64) -> ScenarioConfig {
        ScenarioConfig {
            n_uavs: 5,
            area_x_m: 300.0,
            area_y_m: 300.0,
            sim_time_s: 30.0,
            runs,
            seed,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn empty_object_yields_reference_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, ScenarioConfig::default());
        assert_eq!(cfg.n_uavs, 40);
        assert_eq!(cfg.sim_time_s, 1200.0);
        assert_eq!(cfg.range_m, 115.0);
        assert_eq!(cfg.runs, 35);
        assert!(cfg.adversary.malicious_ids.is_empty());
        cfg.validate().unwrap();
    }

    #[test]
    fn baseattk_preset_has_one_malicious_node() {
        let cfg = ScenarioConfig::preset("baseattk").unwrap();
        assert_eq!(cfg.adversary.malicious_ids, vec![0]);
        cfg.validate().unwrap();
        assert!(ScenarioConfig::preset("nonsense").is_none());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = serde_json::from_str::<ScenarioConfig>(r#"{"n_uav": 4}"#);
        assert!(err.is_err());
    }

    #[test]
    fn zero_uavs_fail_validation() {
        let cfg = ScenarioConfig {
            n_uavs: 0,
            ..ScenarioConfig::default()
        };
        let err = cfg.validate().unwrap_err();
        assert!(matches!(err, HarnessError::Validation { field, .. } if field == "n_uavs"));
    }

    #[test]
    fn out_of_range_malicious_id_fails_validation() {
        let mut cfg = ScenarioConfig::default();
        cfg.adversary.malicious_ids = vec![40];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn campaign_writes_expected_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(2, 7);
        let summary = run_campaign(&cfg, dir.path()).unwrap();
        assert!(dir.path().join("metrics_run0.csv").exists());
        assert!(dir.path().join("metrics_run1.csv").exists());
        assert!(dir.path().join("summary.json").exists());
        assert!(dir.path().join("manifest.json").exists());
        assert_eq!(summary.runs, 2);
        // Row count equals the fleet size (plus header).
        let csv = std::fs::read_to_string(dir.path().join("metrics_run0.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + cfg.n_uavs as usize);
    }

    #[test]
    fn campaign_outputs_are_deterministic() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let cfg = small(2, 9);
        run_campaign(&cfg, a.path()).unwrap();
        run_campaign(&cfg, b.path()).unwrap();
        for name in ["metrics_run0.csv", "metrics_run1.csv", "summary.json", "manifest.json"] {
            let fa = std::fs::read(a.path().join(name)).unwrap();
            let fb = std::fs::read(b.path().join(name)).unwrap();
            assert_eq!(fa, fb, "{name} must be byte-identical");
        }
    }

    #[test]
    fn summary_statistics_match_recomputation_from_csv() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(2, 11);
        let summary = run_campaign(&cfg, dir.path()).unwrap();
        let mut psi_samples = Vec::new();
        for k in 0..2 {
            let csv = std::fs::read_to_string(dir.path().join(format!("metrics_run{k}.csv"))).unwrap();
            for line in csv.lines().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                psi_samples.push(fields[1].parse::<f64>().unwrap());
            }
        }
        let stats = MetricStats::from_samples(&psi_samples);
        let reported = &summary.metrics["psi_s"];
        assert!((stats.mean - reported.mean).abs() < 1e-9);
        assert!((stats.stddev - reported.stddev).abs() < 1e-9);
        assert!((stats.min - reported.min).abs() < 1e-9);
        assert!((stats.max - reported.max).abs() < 1e-9);
    }

    #[test]
    fn attack_campaign_emits_confusion_csvs_for_flagged_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(1, 13);
        cfg.adversary.malicious_ids = vec![0];
        let flagged = cfg.flagged_nodes();
        assert_eq!(flagged, vec![UavId(0), UavId(1), UavId(2)]);
        run_campaign(&cfg, dir.path()).unwrap();
        for id in [0, 1, 2] {
            assert!(dir.path().join(format!("confusion_run0_node{id}.csv")).exists());
        }
    }

    #[test]
    fn compare_identical_summaries_has_zero_deltas() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(1, 17);
        let summary = run_campaign(&cfg, dir.path()).unwrap();
        let report = compare(&summary, &summary).unwrap();
        for delta in report.metrics.values() {
            assert_eq!(delta.abs_delta, 0.0);
        }
        assert!(report.to_text().contains("psi_s"));
    }

    #[test]
    fn compare_rejects_mismatched_keys() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small(1, 19);
        let a = run_campaign(&cfg, dir.path()).unwrap();
        let mut b = a.clone();
        b.metrics.remove("phi");
        let err = compare(&a, &b).unwrap_err();
        assert!(matches!(err, HarnessError::KeyMismatch(keys) if keys == vec!["phi".to_string()]));
    }

    #[test]
    fn load_config_round_trip(){
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("scenario.json");
        std::fs::write(&path, r#"{"n_uavs": 6, "sim_time_s": 45.0, "runs": 1}"#).unwrap();
        let cfg = load_config(&path).unwrap();
        assert_eq!(cfg.n_uavs, 6);
        assert_eq!(cfg.sim_time_s, 45.0);
        // Everything else keeps its defaults.
        assert_eq!(cfg.range_m, 115.0);
    }
}
