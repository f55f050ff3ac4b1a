//! Experiment harnesses: per-stage latency over growing datasets, and score
//! trajectories under repeated violations. Both drive the real middleware.

mod trajectory;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use trajectory::{
    run_trajectory, violation_draws, RunSeries, Scenario, ScenarioSeries, TrajectoryConfig, TrajectoryReport,
};

use crate::middleware::{MiddlewareConfig, StageTimings, TrustedMiddleware};
use crate::ontology::vocab::{PERMITTED_USES, RDF_TYPE, TST_USER};
use crate::ontology::DataCategoryRef;
use crate::policy::{DataRequest, PolicyRegistry};
use crate::store::{load_lines, Graph, Term};
use crate::synth::{generate, GeneratorSpec, CUSTODIAN, CUSTODIAN_INVENTORY};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o: {0}")]
    Io(String),
    #[error("invalid: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// From a file extension; CSV unless it is `.json`.
    pub fn for_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

/// The four instrumented stages, in table order.
pub const STAGES: [&str; 4] = [
    "recipientPolicyCheck",
    "dataCredibilityCheck",
    "trustScoreUpdate",
    "dataRetrieval",
];

fn stage_value(t: &StageTimings, stage: usize) -> f64 {
    match stage {
        0 => t.recipient_policy_check,
        1 => t.data_credibility_check,
        2 => t.trust_score_update,
        _ => t.data_retrieval,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
}

impl Stats {
    /// Nearest-rank percentiles. Empty input gives zeros.
    pub fn of(samples: &[f64]) -> Stats {
        if samples.is_empty() {
            return Stats {
                mean: 0.0,
                p50: 0.0,
                p95: 0.0,
            };
        }
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let rank = |q: f64| s[((q * s.len() as f64).ceil() as usize).clamp(1, s.len()) - 1];
        Stats {
            mean: s.iter().sum::<f64>() / s.len() as f64,
            p50: rank(0.5),
            p95: rank(0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SizeLatency {
    pub size: usize,
    pub label: String,
    /// Keyed by stage name, in table order.
    pub stages: Vec<(String, Stats)>,
    /// End to end.
    pub total: Stats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LatencyReport {
    pub seed: u64,
    pub transaction_count: usize,
    pub sizes: Vec<SizeLatency>,
}

/// `1000` as `1K`, `1000000` as `1M`.
pub fn size_label(n: usize) -> String {
    match n {
        n if n >= 1_000_000 && n % 1_000_000 == 0 => format!("{}M", n / 1_000_000),
        n if n >= 1_000 && n % 1_000 == 0 => format!("{}K", n / 1_000),
        n => n.to_string(),
    }
}

/// Parses `1k,10k,100k,1m` (suffixes case-insensitive).
pub fn parse_sizes(text: &str) -> Result<Vec<usize>, BenchError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let lower = s.to_ascii_lowercase();
            let (digits, mult) = match lower.strip_suffix('k') {
                Some(d) => (d, 1_000),
                None => match lower.strip_suffix('m') {
                    Some(d) => (d, 1_000_000),
                    None => (lower.as_str(), 1),
                },
            };
            digits
                .parse::<usize>()
                .ok()
                .and_then(|d| d.checked_mul(mult))
                .filter(|&n| n > 0)
                .ok_or_else(|| BenchError::Invalid(format!("bad size {s:?}")))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LatencyConfig {
    pub sizes: Vec<usize>,
    pub transactions: usize,
    pub seed: u64,
    /// Directory of pre-generated `<label>.nt` datasets; missing ones are generated.
    pub data_dir: Option<PathBuf>,
}

impl Default for LatencyConfig {
    fn default() -> Self {
        LatencyConfig {
            sizes: vec![1_000, 10_000, 100_000],
            transactions: 1000,
            seed: 1,
            data_dir: None,
        }
    }
}

fn dataset(cfg: &LatencyConfig, size: usize) -> Result<Graph, BenchError> {
    if let Some(dir) = &cfg.data_dir {
        let path = dir.join(format!("{}.nt", size_label(size)));
        if path.exists() {
            let mut g = Graph::new();
            let f = std::fs::File::open(&path).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
            load_lines(&mut g, std::io::BufReader::new(f))
                .map_err(|e| BenchError::Invalid(format!("{}: {e}", path.display())))?;
            return Ok(g);
        }
        tracing::warn!(path = %path.display(), "no dataset; generating one");
    }
    generate(&GeneratorSpec::new(cfg.seed, size)).map_err(|e| BenchError::Invalid(e.to_string()))
}

/// Every (user, category, purpose) the policies fully accept, with the
/// custodian holding the data.
pub fn compliant_requests(graph: &Graph, policies: &PolicyRegistry) -> Vec<DataRequest> {
    let users = graph.subjects(
        &Term::iri(RDF_TYPE).expect("valid"),
        &Term::iri(TST_USER).expect("valid"),
    );
    let mut out = Vec::new();
    for u in &users {
        for c in CUSTODIAN_INVENTORY {
            for p in PERMITTED_USES {
                let req = DataRequest {
                    request_id: "probe".into(),
                    user: u.lexical().to_string(),
                    custodian: CUSTODIAN.into(),
                    category: DataCategoryRef::new(*c).expect("inventory categories"),
                    purpose: p.to_string(),
                    timestamp: None,
                };
                if policies
                    .evaluate(&req, graph)
                    .is_ok_and(|r| r.compliant && r.custodian_has_data)
                {
                    out.push(req);
                }
            }
        }
    }
    out
}

/// Times `transactions` randomized compliant requests against each size.
pub fn run_latency(cfg: &LatencyConfig) -> Result<LatencyReport, BenchError> {
    if cfg.transactions == 0 {
        return Err(BenchError::Invalid("transactions must be positive".into()));
    }
    let mut sizes = Vec::with_capacity(cfg.sizes.len());
    for &size in &cfg.sizes {
        let graph = dataset(cfg, size)?;
        let policies = PolicyRegistry::builtin();
        let candidates = compliant_requests(&graph, &policies);
        if candidates.is_empty() {
            return Err(BenchError::Invalid(format!(
                "no compliant request exists at size {size}"
            )));
        }
        let tm = TrustedMiddleware::new(graph, MiddlewareConfig::default(), policies);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mut samples: Vec<StageTimings> = Vec::with_capacity(cfg.transactions);
        for n in 0..cfg.transactions {
            let mut req = candidates.choose(&mut rng).expect("non-empty").clone();
            req.request_id = format!("{}-{n}", size_label(size));
            let (resp, t) = tm
                .handle_request_timed(&req)
                .map_err(|e| BenchError::Invalid(format!("request {}: {e}", req.request_id)))?;
            if !resp.decision.granted {
                return Err(BenchError::Invalid(format!("request {} was denied", req.request_id)));
            }
            samples.push(t);
        }
        let stages = STAGES
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let v: Vec<f64> = samples.iter().map(|t| stage_value(t, i)).collect();
                (name.to_string(), Stats::of(&v))
            })
            .collect();
        let totals: Vec<f64> = samples.iter().map(|t| t.total).collect();
        tracing::info!(size, "latency run complete");
        sizes.push(SizeLatency {
            size,
            label: size_label(size),
            stages,
            total: Stats::of(&totals),
        });
    }
    Ok(LatencyReport {
        seed: cfg.seed,
        transaction_count: cfg.transactions,
        sizes,
    })
}

impl LatencyReport {
    pub fn stage(&self, size: usize, stage: &str) -> Option<Stats> {
        self.sizes
            .iter()
            .find(|s| s.size == size)?
            .stages
            .iter()
            .find(|(n, _)| n == stage)
            .map(|(_, s)| *s)
    }

    /// One row per stage, `mean`, `p50` and `p95` columns per size.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("stage");
        for s in &self.sizes {
            for stat in ["mean", "p50", "p95"] {
                write!(out, ",{}_{stat}", s.label).expect("string write");
            }
        }
        out.push('\n');
        for (i, stage) in STAGES.iter().enumerate() {
            out.push_str(stage);
            for s in &self.sizes {
                let st = s.stages[i].1;
                write!(out, ",{},{},{}", st.mean, st.p50, st.p95).expect("string write");
            }
            out.push('\n');
        }
        out
    }
}

/// Writes `report` as CSV or pretty JSON.
pub fn emit_report<R: Serialize>(
    report: &R,
    csv: impl FnOnce(&R) -> String,
    format: ReportFormat,
    path: &Path,
) -> Result<(), BenchError> {
    let text = match format {
        ReportFormat::Csv => csv(report),
        ReportFormat::Json => serde_json::to_string_pretty(report).map_err(|e| BenchError::Invalid(e.to_string()))?,
    };
    std::fs::write(path, text).map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))
}
