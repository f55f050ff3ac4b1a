//! The trusted middleware: runs the data exchange cycle for each request,
//! keeps trust state, logs every committed change and propagates score
//! updates to peer instances.

mod config;
pub mod http;
mod log;
mod propagation;

use std::path::Path;
use std::sync::{Mutex, RwLock};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::MiddlewareConfig;
pub use log::{read_log, LogRecord};
pub use propagation::{Chaos, HttpTransport, LocalTransport, PeerReport, ScoreUpdate, Transport};

use crate::ontology::vocab::RDF_TYPE;
use crate::ontology::{DataCategoryRef, DuaRecord, OntologyError, PrincipalKind};
use crate::policy::{
    penalty_for, ComplianceResult, DataRequest, PenaltyTarget, PolicyError, PolicyOutcome, PolicyRegistry, PolicyStatus,
};
use crate::query::{eval_select, BindingSet, Query, QueryForm};
use crate::store::{Graph, Namespaces, PatternTerm, Term, TriplePattern};
use crate::trust::{
    apply_org_identity_penalty, apply_org_penalty, apply_user_penalty, assess, check_lockout, rewrite_dua_reset,
    Assessment, PenaltyKind, Score, ScoreName, TrustError, TrustRecord, TrustRegistry,
};
use log::TransactionLog;
use propagation::Outbox;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MiddlewareError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid: {0}")]
    Invalid(String),
    #[error("conflict: {0}")]
    Conflict(String),
    #[error("replay diverged: {0}")]
    Replay(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl From<PolicyError> for MiddlewareError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::NotFound(m) => MiddlewareError::NotFound(m),
            e => MiddlewareError::Invalid(e.to_string()),
        }
    }
}

impl From<TrustError> for MiddlewareError {
    fn from(e: TrustError) -> Self {
        match e {
            TrustError::NotFound(m) => MiddlewareError::NotFound(m),
            TrustError::State(m) => MiddlewareError::Conflict(m),
            TrustError::Conflict(m) => MiddlewareError::Conflict(format!("<{m}> is already registered")),
            TrustError::Ontology(e) => e.into(),
            e => MiddlewareError::Invalid(e.to_string()),
        }
    }
}

impl From<OntologyError> for MiddlewareError {
    fn from(e: OntologyError) -> Self {
        match e {
            OntologyError::NotFound(m) => MiddlewareError::NotFound(m),
            e => MiddlewareError::Invalid(e.to_string()),
        }
    }
}

/// A score change made while handling a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AppliedPenalty {
    pub principal: String,
    pub kind: PenaltyKind,
    pub score: ScoreName,
    pub before: Score,
    pub after: Score,
    pub forgiven: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AccessDecision {
    pub granted: bool,
    pub compliance: ComplianceResult,
    pub assessment: Assessment,
    pub applied_penalties: Vec<AppliedPenalty>,
    /// The pair was locked out when the request arrived.
    pub lockout_triggered: bool,
}

impl AccessDecision {
    /// `granted` is exactly compliant, trusted and not locked out.
    pub fn is_consistent(&self) -> bool {
        self.granted == (self.compliance.compliant && self.assessment.passed && !self.lockout_triggered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataResponse {
    pub request_id: String,
    pub decision: AccessDecision,
    /// Present exactly when granted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<BindingSet>,
    pub custodian_notices: Vec<String>,
}

impl DataResponse {
    pub fn is_consistent(&self) -> bool {
        self.decision.is_consistent() && self.records.is_some() == self.decision.granted
    }
}

/// Wall time of each instrumented stage of one request, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StageTimings {
    pub recipient_policy_check: f64,
    pub data_credibility_check: f64,
    pub trust_score_update: f64,
    pub data_retrieval: f64,
    pub total: f64,
}

struct Core {
    registry: TrustRegistry,
    log: TransactionLog,
}

/// One middleware instance. Decisions and the score changes they cause
/// commit under one lock, in log order; retrieval runs after it is released.
pub struct TrustedMiddleware {
    config: MiddlewareConfig,
    policies: PolicyRegistry,
    // lock order: core, then graph
    core: Mutex<Core>,
    graph: RwLock<Graph>,
    outbox: Outbox,
}

fn not_evaluated(policies: &PolicyRegistry) -> ComplianceResult {
    ComplianceResult {
        per_policy: policies
            .policies()
            .iter()
            .map(|p| PolicyOutcome {
                policy_id: p.id.clone(),
                scope: p.scope,
                status: PolicyStatus::NotEvaluated,
                failure_penalty: p.failure_penalty,
            })
            .collect(),
        compliant: false,
        custodian_has_data: false,
        custodian_complete: false,
    }
}

/// Updates for every score cell that differs between two states of a record.
fn changed_cells(before: &TrustRecord, after: &TrustRecord, origin: &str) -> Vec<ScoreUpdate> {
    ScoreName::ALL
        .into_iter()
        .filter_map(|name| {
            let cell = after.cell(name)?;
            (before.cell(name) != Some(cell)).then(|| ScoreUpdate {
                principal: after.iri().to_string(),
                principal_kind: after.kind(),
                score: name,
                value: cell.value,
                version: cell.version,
                origin: origin.to_string(),
            })
        })
        .collect()
}

/// Every instance of `category` with its properties that occur in the graph.
pub fn retrieve(category: &DataCategoryRef, graph: &Graph) -> BindingSet {
    let var = |name: &str| PatternTerm::var(name);
    let iri = |s: &str| Term::iri(s).expect("vocabulary IRI");
    let mut bgp = vec![TriplePattern::new(var("instance"), iri(RDF_TYPE), iri(category.iri()))];
    let mut projection = vec!["instance".to_string()];
    for p in category.properties() {
        let term = iri(p);
        let used = graph
            .id_of(&term)
            .is_some_and(|id| graph.scan(None, Some(id), None).next().is_some());
        if !used {
            continue;
        }
        let name = p.rsplit(['#', '/']).next().expect("non-empty").to_string();
        bgp.push(TriplePattern::new(var("instance"), term, var(&name)));
        projection.push(name);
    }
    let q = Query {
        form: QueryForm::Select,
        prologue: Namespaces::empty(),
        bgp,
        filters: Vec::new(),
        projection,
        delete_template: Vec::new(),
        insert_template: Vec::new(),
    };
    eval_select(&q, graph).expect("built as a select")
}

impl TrustedMiddleware {
    /// Registers every principal in `graph` and projects their scores into it.
    pub fn new(mut graph: Graph, config: MiddlewareConfig, policies: PolicyRegistry) -> Self {
        let registry = TrustRegistry::from_graph(&graph);
        registry.project_all(&mut graph);
        TrustedMiddleware {
            config,
            policies,
            core: Mutex::new(Core {
                registry,
                log: TransactionLog::default(),
            }),
            graph: RwLock::new(graph),
            outbox: Outbox::default(),
        }
    }

    pub fn with_peers<I, S>(self, peers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for p in peers {
            self.outbox.add_peer(p.as_ref());
        }
        self
    }

    pub fn with_log_file(self, path: &Path) -> Result<Self, MiddlewareError> {
        {
            let mut core = self.core.lock().expect("core lock");
            let keep = core.log.records().is_some();
            core.log = TransactionLog::open(path)?;
            if keep {
                core.log.keep_in_memory();
            }
        }
        Ok(self)
    }

    /// Also keeps log records in memory; see [`TrustedMiddleware::log_records`].
    pub fn with_memory_log(self) -> Self {
        self.core.lock().expect("core lock").log.keep_in_memory();
        self
    }

    pub fn config(&self) -> &MiddlewareConfig {
        &self.config
    }

    pub fn policies(&self) -> &PolicyRegistry {
        &self.policies
    }

    pub fn trust_record(&self, principal: &str) -> Option<TrustRecord> {
        self.core.lock().expect("core lock").registry.get(principal).cloned()
    }

    pub fn registry_snapshot(&self) -> TrustRegistry {
        self.core.lock().expect("core lock").registry.clone()
    }

    pub fn log_records(&self) -> Option<Vec<LogRecord>> {
        self.core.lock().expect("core lock").log.records().map(<[_]>::to_vec)
    }

    /// Runs `f` under the graph read lock.
    pub fn read_graph<T>(&self, f: impl FnOnce(&Graph) -> T) -> T {
        f(&self.graph.read().expect("graph lock"))
    }

    /// Whether the graph's score triples match the registry.
    pub fn projection_consistent(&self) -> bool {
        let core = self.core.lock().expect("core lock");
        let g = self.graph.read().expect("graph lock");
        core.registry.projection_consistent(&g)
    }

    pub fn handle_request(&self, request: &DataRequest) -> Result<DataResponse, MiddlewareError> {
        self.handle_request_timed(request).map(|(r, _)| r)
    }

    /// Runs the exchange cycle and reports how long each stage took.
    pub fn handle_request_timed(&self, request: &DataRequest) -> Result<(DataResponse, StageTimings), MiddlewareError> {
        let result = self.exchange(request);
        if let Err(e) = &result {
            tracing::warn!(request_id = %request.request_id, error = %e, "request rejected");
        }
        result
    }

    fn exchange(&self, request: &DataRequest) -> Result<(DataResponse, StageTimings), MiddlewareError> {
        let started = Instant::now();
        let mut timings = StageTimings::default();
        let (decision, notices) = {
            let mut core = self.core.lock().expect("core lock");
            let (decision, notices, changed, trust_time) = {
                let g = self.graph.read().expect("graph lock");
                self.decide(&mut core.registry, request, &g, &mut timings)?
            };
            let update_started = Instant::now();
            if !changed.is_empty() {
                let mut g = self.graph.write().expect("graph lock");
                for iri in &changed {
                    core.registry.project(iri, &mut g)?;
                }
            }
            timings.trust_score_update = (trust_time + update_started.elapsed()).as_secs_f64();
            core.log.append(LogRecord::Request {
                request_id: request.request_id.clone(),
                request: request.clone(),
                decision: decision.clone(),
                timings,
            })?;
            (decision, notices)
        };
        let records = decision.granted.then(|| {
            let t = Instant::now();
            let rows = retrieve(&request.category, &self.graph.read().expect("graph lock"));
            timings.data_retrieval = t.elapsed().as_secs_f64();
            rows
        });
        timings.total = started.elapsed().as_secs_f64();
        tracing::debug!(request_id = %request.request_id, granted = decision.granted, "request handled");
        Ok((
            DataResponse {
                request_id: request.request_id.clone(),
                decision,
                records,
                custodian_notices: notices,
            },
            timings,
        ))
    }

    /// The decision and its score changes, applied to `registry`. Returns the
    /// principals whose scores changed and the time spent on trust updates.
    fn decide(
        &self,
        registry: &mut TrustRegistry,
        request: &DataRequest,
        g: &Graph,
        timings: &mut StageTimings,
    ) -> Result<(AccessDecision, Vec<String>, Vec<String>, Duration), MiddlewareError> {
        let (user, custodian) = request.resolve(g)?;
        let org = user.affiliation.clone().expect("users have an affiliation");
        for iri in [&user.iri, &custodian.iri, &org] {
            registry.require(iri)?;
        }
        let lockout = check_lockout(registry.require(&custodian.iri)?, registry.require(&org)?)?;
        let compliance = if lockout {
            not_evaluated(&self.policies)
        } else {
            let staged = self.policies.evaluate_staged(request, g, self.config.probe_sample)?;
            timings.recipient_policy_check = staged.recipient_time.as_secs_f64();
            timings.data_credibility_check = staged.credibility_time.as_secs_f64();
            staged.result
        };

        let trust_started = Instant::now();
        let assessment = assess(registry.require(&user.iri)?, &self.config.assessment)?;
        let granted = compliance.compliant && assessment.passed && !lockout;
        let before: Vec<TrustRecord> = [&user.iri, &custodian.iri, &org]
            .into_iter()
            .map(|i| registry.require(i).cloned())
            .collect::<Result<_, _>>()?;
        let mut applied = Vec::new();
        let mut notices = Vec::new();
        let penalties = &self.config.penalties;
        let assignment = if lockout { None } else { penalty_for(&compliance) };
        match assignment {
            Some(a) if a.target == PenaltyTarget::User => {
                let o = apply_user_penalty(registry.require_mut(&user.iri)?, a.kind, penalties)?;
                applied.push((user.iri.clone(), o));
                if self.config.org_identity_penalty && !o.forgiven {
                    let o = apply_org_identity_penalty(registry.require_mut(&org)?, a.kind, penalties)?;
                    applied.push((org.clone(), o));
                }
            }
            Some(a) => {
                let o = apply_org_penalty(registry.require_mut(&custodian.iri)?, a.kind, penalties)?;
                applied.push((custodian.iri.clone(), o));
                notices.push(match a.kind {
                    PenaltyKind::MissingCategory => format!(
                        "data custodian <{}> does not hold <{}>",
                        custodian.iri,
                        request.category.iri()
                    ),
                    _ => format!(
                        "data custodian <{}> holds incomplete <{}> records",
                        custodian.iri,
                        request.category.iri()
                    ),
                });
            }
            None => {}
        }
        let newly_locked = !lockout
            && custodian.iri != org
            && check_lockout(registry.require(&custodian.iri)?, registry.require(&org)?)?;
        if newly_locked {
            let (c, o) = registry.pair_mut(&custodian.iri, &org)?;
            c.lock_with(o.iri());
            o.lock_with(c.iri());
            notices.push(format!(
                "exchanges between <{}> and <{org}> are suspended until their DUA is rewritten",
                custodian.iri
            ));
        }
        let mut changed = Vec::new();
        for b in &before {
            let after = registry.require(b.iri())?;
            let updates = changed_cells(b, after, &self.config.tm_id);
            if !updates.is_empty() {
                changed.push(b.iri().to_string());
                self.outbox.enqueue(&updates);
            }
        }
        let decision = AccessDecision {
            granted,
            compliance,
            assessment,
            applied_penalties: applied
                .into_iter()
                .map(|(principal, o)| AppliedPenalty {
                    principal,
                    kind: o.kind,
                    score: o.score,
                    before: o.before,
                    after: o.after,
                    forgiven: o.forgiven,
                })
                .collect(),
            lockout_triggered: lockout,
        };
        Ok((decision, notices, changed, trust_started.elapsed()))
    }

    /// Applies replica updates that are newer than local state. Returns how
    /// many changed it; stale and duplicate updates are ignored. The batch
    /// is rejected whole if any update is malformed.
    pub fn receive_scores(&self, updates: &[ScoreUpdate]) -> Result<usize, MiddlewareError> {
        for u in updates {
            Term::iri(&u.principal).map_err(|e| MiddlewareError::Invalid(e.to_string()))?;
            let applies = match u.score {
                ScoreName::Behavior => u.principal_kind == PrincipalKind::User,
                ScoreName::Credibility => u.principal_kind == PrincipalKind::Organization,
                ScoreName::Identity => true,
            };
            if !applies {
                return Err(MiddlewareError::Invalid(format!(
                    "a {} has no {} score",
                    u.principal_kind, u.score
                )));
            }
        }
        let mut core = self.core.lock().expect("core lock");
        for u in updates {
            if let Some(r) = core.registry.get(&u.principal) {
                if r.kind() != u.principal_kind {
                    return Err(MiddlewareError::Invalid(format!(
                        "<{}> is a {}, update says {}",
                        u.principal,
                        r.kind(),
                        u.principal_kind
                    )));
                }
            }
        }
        let mut applied = Vec::new();
        for u in updates {
            if core
                .registry
                .merge_remote(&u.principal, u.principal_kind, u.score, u.value, u.version)?
            {
                applied.push(u.clone());
            }
        }
        if !applied.is_empty() {
            let mut g = self.graph.write().expect("graph lock");
            let mut principals: Vec<&str> = applied.iter().map(|u| u.principal.as_str()).collect();
            principals.sort_unstable();
            principals.dedup();
            for p in principals {
                core.registry.project(p, &mut g)?;
            }
            drop(g);
            let n = applied.len();
            core.log.append(LogRecord::Scores { updates: applied })?;
            return Ok(n);
        }
        Ok(0)
    }

    /// Rewrites the DUA of a locked-out pair, clearing the lockout.
    pub fn rewrite_dua(&self, dua: &DuaRecord) -> Result<(), MiddlewareError> {
        dua.validate()?;
        let mut core = self.core.lock().expect("core lock");
        let before = [
            core.registry.require(&dua.custodian)?.clone(),
            core.registry.require(&dua.recipient)?.clone(),
        ];
        {
            let mut g = self.graph.write().expect("graph lock");
            let (c, r) = core.registry.pair_mut(&dua.custodian, &dua.recipient)?;
            rewrite_dua_reset(c, r, dua, &mut g)?;
            for b in &before {
                core.registry.project(b.iri(), &mut g)?;
            }
        }
        for b in &before {
            let after = core.registry.require(b.iri())?;
            self.outbox.enqueue(&changed_cells(b, after, &self.config.tm_id));
        }
        core.log.append(LogRecord::DuaRewrite { dua: dua.clone() })?;
        tracing::info!(custodian = %dua.custodian, recipient = %dua.recipient, "agreement rewritten");
        Ok(())
    }

    /// Re-executes logged changes in order. Each replayed decision must equal
    /// the logged one. Returns the number of records applied.
    pub fn replay<'a>(&self, records: impl IntoIterator<Item = &'a LogRecord>) -> Result<usize, MiddlewareError> {
        let mut n = 0;
        for r in records {
            match r {
                LogRecord::Request {
                    request_id,
                    request,
                    decision,
                    ..
                } => {
                    let got = self.handle_request(request)?;
                    if &got.decision != decision {
                        return Err(MiddlewareError::Replay(format!(
                            "request {request_id} decided differently"
                        )));
                    }
                }
                LogRecord::DuaRewrite { dua } => self.rewrite_dua(dua)?,
                LogRecord::Scores { updates } => {
                    self.receive_scores(updates)?;
                }
            }
            n += 1;
        }
        Ok(n)
    }
}
