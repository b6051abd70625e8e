//! Result records, CSV/JSON export and the summaries the figures use.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

use starris_core::agents::TrainLog;

use crate::BenchError;

pub const RESULTS_FORMAT: &str = "starris-results";
pub const RESULTS_VERSION: u32 = 1;

/// One row per (scheme, sweep value, seed, episode). Field order is the
/// CSV column order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub scheme: String,
    /// Empty outside sweeps.
    pub sweep_param: String,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub episode: usize,
    pub mean_reward: f64,
    pub mean_ee_bits_per_hz_per_watt: f64,
    pub violation_rate: f64,
    /// Wall-clock of the whole run this episode belongs to.
    pub wallclock_s: f64,
}

impl ResultRecord {
    pub fn from_log(scheme: &str, sweep: Option<(&str, f64)>, seed: u64, log: &TrainLog, wallclock_s: f64) -> Vec<Self> {
        log.records
            .iter()
            .map(|r| Self {
                scheme: scheme.to_string(),
                sweep_param: sweep.map(|s| s.0.to_string()).unwrap_or_default(),
                sweep_value: sweep.map(|s| s.1),
                seed,
                episode: r.episode,
                mean_reward: r.mean_reward,
                mean_ee_bits_per_hz_per_watt: r.mean_ee,
                violation_rate: r.violation_rate,
                wallclock_s,
            })
            .collect()
    }
}

pub fn to_csv(records: &[ResultRecord]) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_COLUMNS).expect("in-memory write");
    for r in records {
        w.serialize(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
}

pub const CSV_COLUMNS: [&str; 9] = [
    "scheme",
    "sweep_param",
    "sweep_value",
    "seed",
    "episode",
    "mean_reward",
    "mean_ee_bits_per_hz_per_watt",
    "violation_rate",
    "wallclock_s",
];

pub fn from_csv(text: &str) -> Result<Vec<ResultRecord>, BenchError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| BenchError::Input(e.to_string()))?;
    if headers.iter().ne(CSV_COLUMNS) {
        return Err(BenchError::Input(format!("unexpected CSV header {:?}", headers.iter().collect::<Vec<_>>())));
    }
    r.deserialize().collect::<Result<_, _>>().map_err(|e| BenchError::Input(e.to_string()))
}

/// SHA-256 of the CSV with wall-clock times blanked, so repeated runs with
/// identical seeds hash identically.
pub fn digest(records: &[ResultRecord]) -> String {
    let stripped: Vec<ResultRecord> = records.iter().map(|r| ResultRecord { wallclock_s: 0.0, ..r.clone() }).collect();
    Sha256::digest(to_csv(&stripped).as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ResultsFile {
    format: String,
    version: u32,
    digest: String,
    records: Vec<ResultRecord>,
}

pub fn to_json(records: &[ResultRecord]) -> String {
    let f = ResultsFile {
        format: RESULTS_FORMAT.into(),
        version: RESULTS_VERSION,
        digest: digest(records),
        records: records.to_vec(),
    };
    serde_json::to_string_pretty(&f).expect("records serialise")
}

pub fn from_json(text: &str) -> Result<Vec<ResultRecord>, BenchError> {
    let f: ResultsFile = serde_json::from_str(text).map_err(|e| BenchError::Input(e.to_string()))?;
    if f.format != RESULTS_FORMAT || f.version != RESULTS_VERSION {
        return Err(BenchError::Input(format!("unsupported results file {} v{}", f.format, f.version)));
    }
    if digest(&f.records) != f.digest {
        return Err(BenchError::Input("results digest mismatch".into()));
    }
    Ok(f.records)
}

pub fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}

/// Reads records from a `.csv` or `.json` export.
pub fn load(path: &Path) -> Result<Vec<ResultRecord>, BenchError> {
    let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => from_json(&text),
        _ => from_csv(&text),
    }
}

/// Mean over the last `ceil(fraction · n)` entries.
pub fn tail_mean(xs: &[f64], fraction: f64) -> f64 {
    let k = ((xs.len() as f64 * fraction).ceil() as usize).clamp(1, xs.len().max(1));
    xs[xs.len() - k..].iter().sum::<f64>() / k as f64
}

/// Mean over the first `ceil(fraction · n)` entries.
pub fn head_mean(xs: &[f64], fraction: f64) -> f64 {
    let k = ((xs.len() as f64 * fraction).ceil() as usize).clamp(1, xs.len().max(1));
    xs[..k].iter().sum::<f64>() / k as f64
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Converged figures of one run: means over the final 10% of episodes.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub scheme: String,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub episodes: usize,
    pub first_reward: f64,
    pub final_reward: f64,
    pub final_ee: f64,
    pub final_violation_rate: f64,
}

pub const CONVERGED_FRACTION: f64 = 0.1;

pub fn summarize(records: &[ResultRecord]) -> Vec<RunSummary> {
    let mut groups: BTreeMap<(String, Option<u64>, u64), Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.scheme.clone(), r.sweep_value.map(f64::to_bits), r.seed)).or_default().push(r);
    }
    let mut out: Vec<RunSummary> = groups
        .into_values()
        .map(|mut g| {
            g.sort_by_key(|r| r.episode);
            let col = |f: fn(&ResultRecord) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
            let rewards = col(|r| r.mean_reward);
            RunSummary {
                scheme: g[0].scheme.clone(),
                sweep_value: g[0].sweep_value,
                seed: g[0].seed,
                episodes: g.len(),
                first_reward: head_mean(&rewards, CONVERGED_FRACTION),
                final_reward: tail_mean(&rewards, CONVERGED_FRACTION),
                final_ee: tail_mean(&col(|r| r.mean_ee_bits_per_hz_per_watt), CONVERGED_FRACTION),
                final_violation_rate: tail_mean(&col(|r| r.violation_rate), CONVERGED_FRACTION),
            }
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.scheme, a.seed).cmp(&(&b.scheme, b.seed)).then(a.sweep_value.unwrap_or(0.0).total_cmp(&b.sweep_value.unwrap_or(0.0)))
    });
    out
}

/// First episode whose trailing `window`-episode mean reward reaches
/// `threshold`.
pub fn episodes_to_reach(rewards: &[f64], threshold: f64, window: usize) -> Option<usize> {
    let w = window.max(1);
    (w - 1..rewards.len()).find(|&e| rewards[e + 1 - w..=e].iter().sum::<f64>() / w as f64 >= threshold).map(|e| e + 1)
}
