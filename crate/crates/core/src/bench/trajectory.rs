use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::middleware::{MiddlewareConfig, TrustedMiddleware};
use crate::ontology::vocab::*;
use crate::ontology::DataCategoryRef;
use crate::policy::{DataRequest, PolicyRegistry};
use crate::store::{Graph, Term};
use crate::synth::{generate, organization_iri, strip_properties, GeneratorSpec, CUSTODIAN};
use crate::trust::{PenaltyConfig, Score, ScoreName};

/// Patients in the trajectory universe. Scores only depend on decisions, not on
/// result size, and fewer than the completeness sample means the probe sees
/// every instance.
const TRAJECTORY_PATIENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// A user whose organization holds an agreement asks for a purpose it does not permit.
    UserWithDuaViolations,
    /// A user whose organization holds no agreement asks for data.
    UserWithoutDua,
    /// Users ask for a category their agreement lists but the custodian lacks.
    OrgMissingCategory,
    /// Users ask for a category whose records lack a declared property.
    OrgMissingProperties,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::UserWithDuaViolations,
        Scenario::UserWithoutDua,
        Scenario::OrgMissingCategory,
        Scenario::OrgMissingProperties,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::UserWithDuaViolations => "user-with-dua-violations",
            Scenario::UserWithoutDua => "user-without-dua",
            Scenario::OrgMissingCategory => "org-missing-category",
            Scenario::OrgMissingProperties => "org-missing-properties",
        }
    }

    /// The score the scenario tracks.
    pub fn score(self) -> ScoreName {
        match self {
            Scenario::UserWithDuaViolations | Scenario::UserWithoutDua => ScoreName::Behavior,
            _ => ScoreName::Credibility,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub violation_prob: f64,
    pub penalties: PenaltyConfig,
    /// Transactions per run at most.
    pub cap: u32,
    pub runs: usize,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            violation_prob: 0.3,
            penalties: PenaltyConfig::default(),
            cap: 2000,
            runs: 1000,
            seed: 1,
            scenarios: Scenario::ALL.to_vec(),
        }
    }
}

/// One run: the tracked score after transaction 0 and after every
/// transaction that changed it, plus the last transaction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunSeries {
    pub run: usize,
    pub points: Vec<(u32, Score)>,
    /// Transaction at which the score reached zero.
    pub transactions_to_zero: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ScenarioSeries {
    pub scenario: Scenario,
    pub score: ScoreName,
    pub runs: Vec<RunSeries>,
    /// Over runs that reached zero; `None` if none did.
    pub mean_transactions_to_zero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrajectoryReport {
    pub rng_seed: u64,
    pub violation_prob: f64,
    pub scenarios: Vec<ScenarioSeries>,
}

/// The violation draws of one run, in transaction order. The harness
/// consumes exactly this sequence.
pub fn violation_draws(seed: u64, scenario: Scenario, run: usize, prob: f64, cap: u32) -> Vec<bool> {
    let mut rng = draw_rng(seed, scenario, run);
    (0..cap).map(|_| rng.random_bool(prob)).collect()
}

fn draw_rng(seed: u64, scenario: Scenario, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lane = Scenario::ALL.iter().position(|s| *s == scenario).expect("listed") as u64;
    rng.set_stream(run as u64 * Scenario::ALL.len() as u64 + lane);
    rng
}

fn first_user(g: &Graph, org: &str) -> String {
    g.subjects(
        &Term::iri(SYN_IS_AFFILIATED_WITH).expect("valid"),
        &Term::iri(org).expect("valid"),
    )
    .iter()
    .map(|t| t.lexical().to_string())
    .min()
    .expect("every organization has users")
}

/// The universe, the tracked principal and the (violating, clean) requests.
struct Setup {
    graph: Graph,
    tracked: String,
    violating: DataRequest,
    clean: DataRequest,
}

fn request(user: &str, category: &str, purpose: &str) -> DataRequest {
    DataRequest {
        request_id: String::new(),
        user: user.to_string(),
        custodian: CUSTODIAN.to_string(),
        category: DataCategoryRef::new(category).expect("vocabulary category"),
        purpose: purpose.to_string(),
        timestamp: None,
    }
}

fn setup(scenario: Scenario, seed: u64) -> Setup {
    let spec = GeneratorSpec::new(seed, TRAJECTORY_PATIENTS);
    let mut graph = generate(&spec).expect("default spec is valid");
    // organization 0 may take every held category for public health,
    // organization 5 holds the risk-factor agreement, the last has none
    let public = first_user(&graph, &organization_iri(0));
    let risk = first_user(&graph, &organization_iri(5));
    let outsider = first_user(&graph, &organization_iri(spec.org_count - 1));
    let clean = request(&public, SYN_PATIENT, DUA_PUBLIC_HEALTH);
    let (tracked, violating, clean) = match scenario {
        Scenario::UserWithDuaViolations => (
            public.clone(),
            request(&public, SYN_PATIENT, DUA_IRB_APPROVED_RESEARCH),
            clean,
        ),
        // the outsider has no legitimate request; clean transactions come from another user
        Scenario::UserWithoutDua => (
            outsider.clone(),
            request(&outsider, SYN_PATIENT, DUA_PUBLIC_HEALTH),
            clean,
        ),
        Scenario::OrgMissingCategory => (
            CUSTODIAN.to_string(),
            request(&risk, SYN_RISK_FACTOR, DUA_IRB_APPROVED_RESEARCH),
            clean,
        ),
        Scenario::OrgMissingProperties => {
            strip_properties(&mut graph, SYN_HAS_SYMPTOM);
            (
                CUSTODIAN.to_string(),
                clean,
                request(&public, SYN_ENCOUNTER, DUA_PUBLIC_HEALTH),
            )
        }
    };
    Setup {
        graph,
        tracked,
        violating,
        clean,
    }
}

fn run_one(setup: &Setup, scenario: Scenario, cfg: &TrajectoryConfig, run: usize) -> Result<RunSeries, BenchError> {
    let mw_cfg = MiddlewareConfig {
        penalties: cfg.penalties,
        ..MiddlewareConfig::default()
    };
    let tm = TrustedMiddleware::new(setup.graph.clone(), mw_cfg, PolicyRegistry::builtin());
    let name = scenario.score();
    let read = |tm: &TrustedMiddleware| {
        tm.trust_record(&setup.tracked)
            .and_then(|r| r.score(name))
            .expect("tracked principal carries the score")
    };
    let mut rng = draw_rng(cfg.seed, scenario, run);
    let mut last = read(&tm);
    let mut points = vec![(0, last)];
    let mut to_zero = None;
    for t in 1..=cfg.cap {
        let template = if rng.random_bool(cfg.violation_prob) {
            &setup.violating
        } else {
            &setup.clean
        };
        let mut req = template.clone();
        req.request_id = format!("{}-{run}-{t}", scenario.name());
        tm.handle_request(&req)
            .map_err(|e| BenchError::Invalid(format!("{}: {e}", req.request_id)))?;
        let now = read(&tm);
        if now != last || t == cfg.cap {
            points.push((t, now));
            last = now;
        }
        if now.is_zero() {
            to_zero = Some(t);
            break;
        }
    }
    Ok(RunSeries {
        run,
        points,
        transactions_to_zero: to_zero,
    })
}

/// Simulates every scenario `runs` times through the middleware. Runs are
/// independent and execute in parallel; results do not depend on scheduling.
pub fn run_trajectory(cfg: &TrajectoryConfig) -> Result<TrajectoryReport, BenchError> {
    if !(0.0..=1.0).contains(&cfg.violation_prob) {
        return Err(BenchError::Invalid("violation probability must be in [0, 1]".into()));
    }
    cfg.penalties
        .validate()
        .map_err(|e| BenchError::Invalid(e.to_string()))?;
    let mut scenarios = Vec::with_capacity(cfg.scenarios.len());
    for &scenario in &cfg.scenarios {
        let setup = setup(scenario, cfg.seed);
        let runs = (0..cfg.runs)
            .into_par_iter()
            .map(|run| run_one(&setup, scenario, cfg, run))
            .collect::<Result<Vec<_>, _>>()?;
        let reached: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.transactions_to_zero)
            .map(f64::from)
            .collect();
        let mean = (!reached.is_empty()).then(|| reached.iter().sum::<f64>() / reached.len() as f64);
        tracing::info!(scenario = scenario.name(), mean_transactions_to_zero = ?mean, "trajectory complete");
        scenarios.push(ScenarioSeries {
            scenario,
            score: scenario.score(),
            runs,
            mean_transactions_to_zero: mean,
        });
    }
    Ok(TrajectoryReport {
        rng_seed: cfg.seed,
        violation_prob: cfg.violation_prob,
        scenarios,
    })
}

impl TrajectoryReport {
    /// Long format: one row per recorded point.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,run,transaction,score\n");
        for s in &self.scenarios {
            for r in &s.runs {
                for (t, v) in &r.points {
                    writeln!(out, "{},{},{t},{v}", s.scenario.name(), r.run).expect("string write");
                }
            }
        }
        out
    }
}
