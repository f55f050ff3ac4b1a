//! DUA compliance policies as parameterized ASK templates, and the
//! evaluation of a data request against them.

mod template;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use template::{PolicyParams, PolicyRegistry, PolicyScope, PolicyTemplate, PLACEHOLDERS};

use crate::ontology::vocab::{is_permitted_use, RDF_TYPE};
use crate::ontology::{category_inventory, DataCategoryRef, OntologyError, PrincipalKind, PrincipalRef};
use crate::query::eval_ask;
use crate::store::{Graph, Term};
use crate::trust::PenaltyKind;

/// Instances the completeness probe inspects by default.
pub const DEFAULT_PROBE_SAMPLE: usize = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolicyError {
    #[error("substitution failed: {0}")]
    Substitution(String),
    #[error("policy {id}: {message}")]
    Template { id: String, message: String },
    #[error("policy {id} uses undeclared vocabulary <{iri}>")]
    Undeclared { id: String, iri: String },
    #[error("policy {0} is already registered")]
    Duplicate(String),
    #[error("{0}")]
    Io(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("invalid request: {0}")]
    Invalid(String),
}

impl From<OntologyError> for PolicyError {
    fn from(e: OntologyError) -> Self {
        match e {
            OntologyError::NotFound(m) => PolicyError::NotFound(m),
            OntologyError::Integrity(m) | OntologyError::Invalid(m) => PolicyError::Invalid(m),
        }
    }
}

/// A user's request for one data category from one custodian.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DataRequest {
    pub request_id: String,
    /// IRI of a `tst:User`.
    pub user: String,
    /// IRI of the custodian organization.
    pub custodian: String,
    pub category: DataCategoryRef,
    /// A permitted-use individual.
    pub purpose: String,
    /// Caller-supplied; not interpreted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<String>,
}

impl DataRequest {
    /// Resolves both parties in the graph and checks the purpose.
    pub fn resolve(&self, graph: &Graph) -> Result<(PrincipalRef, PrincipalRef), PolicyError> {
        if self.request_id.is_empty() {
            return Err(PolicyError::Invalid("requestId is empty".into()));
        }
        if !is_permitted_use(&self.purpose) {
            return Err(PolicyError::Invalid(format!(
                "<{}> is not a permitted use",
                self.purpose
            )));
        }
        let user = PrincipalRef::load(graph, &self.user)?;
        if user.kind != PrincipalKind::User {
            return Err(PolicyError::NotFound(format!("<{}> is not a user", self.user)));
        }
        let custodian = PrincipalRef::load(graph, &self.custodian)?;
        if custodian.kind != PrincipalKind::Organization {
            return Err(PolicyError::NotFound(format!(
                "<{}> is not an organization",
                self.custodian
            )));
        }
        for p in [&user, &custodian] {
            if p.label.is_empty() {
                return Err(PolicyError::Invalid(format!("<{}> has no rdfs:label", p.iri)));
            }
        }
        Ok((user, custodian))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PolicyStatus {
    Passed,
    Failed,
    NotEvaluated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PolicyOutcome {
    pub policy_id: String,
    pub scope: PolicyScope,
    pub status: PolicyStatus,
    pub failure_penalty: Option<PenaltyKind>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ComplianceResult {
    /// In registry order.
    pub per_policy: Vec<PolicyOutcome>,
    /// Every recipient-scope policy passed. Custodian-scope policies judge
    /// the custodian, not the request, and do not enter here.
    pub compliant: bool,
    /// Every custodian-scope policy passed.
    pub custodian_has_data: bool,
    /// The completeness probe passed; false when it was not run.
    pub custodian_complete: bool,
}

/// Who a penalty lands on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyTarget {
    User,
    Custodian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PenaltyAssignment {
    pub kind: PenaltyKind,
    pub target: PenaltyTarget,
}

/// A result with the time spent on each side of the check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagedEvaluation {
    pub result: ComplianceResult,
    /// Recipient-scope policies.
    pub recipient_time: Duration,
    /// Custodian-scope policies plus the completeness probe.
    pub credibility_time: Duration,
}

/// Whether `category` has at least one instance and every declared property
/// of the category appears on at least one of the first `sample` instances.
pub fn completeness_probe(graph: &Graph, category: &DataCategoryRef, sample: usize) -> bool {
    let (Some(ty), Ok(class)) = (
        graph.id_of(&Term::iri(RDF_TYPE).expect("valid")),
        Term::iri(category.iri()),
    ) else {
        return false;
    };
    let Some(class) = graph.id_of(&class) else {
        return false;
    };
    let instances: Vec<_> = graph
        .scan(None, Some(ty), Some(class))
        .take(sample.max(1))
        .map(|[s, _, _]| s)
        .collect();
    if instances.is_empty() {
        return false;
    }
    category.properties().iter().all(|p| {
        let Some(p) = graph.id_of(&Term::iri(p).expect("vocabulary IRI")) else {
            return false;
        };
        instances
            .iter()
            .any(|&s| graph.scan(Some(s), Some(p), None).next().is_some())
    })
}

impl PolicyRegistry {
    pub fn evaluate(&self, request: &DataRequest, graph: &Graph) -> Result<ComplianceResult, PolicyError> {
        self.evaluate_staged(request, graph, DEFAULT_PROBE_SAMPLE)
            .map(|s| s.result)
    }

    /// Evaluates in order. The first failing recipient-scope policy stops
    /// evaluation; custodian-scope failures do not.
    pub fn evaluate_staged(
        &self,
        request: &DataRequest,
        graph: &Graph,
        probe_sample: usize,
    ) -> Result<StagedEvaluation, PolicyError> {
        let (user, custodian) = request.resolve(graph)?;
        let inventory: Vec<String> = category_inventory(graph, &custodian.iri).into_iter().collect();
        let params = PolicyParams {
            user_label: user.label,
            custodian_label: custodian.label,
            category_iri: request.category.iri().to_string(),
            category_list: inventory,
            purpose_iri: request.purpose.clone(),
        };
        let mut recipient_time = Duration::ZERO;
        let mut credibility_time = Duration::ZERO;
        let mut per_policy = Vec::with_capacity(self.policies().len());
        let mut stopped = false;
        for p in self.policies() {
            let status = if stopped {
                PolicyStatus::NotEvaluated
            } else {
                let start = Instant::now();
                let passed = self.check(p, &params, graph)?;
                let spent = start.elapsed();
                match p.scope {
                    PolicyScope::Recipient => recipient_time += spent,
                    PolicyScope::Custodian => credibility_time += spent,
                }
                stopped = !passed && p.scope == PolicyScope::Recipient;
                if passed {
                    PolicyStatus::Passed
                } else {
                    PolicyStatus::Failed
                }
            };
            per_policy.push(PolicyOutcome {
                policy_id: p.id.clone(),
                scope: p.scope,
                status,
                failure_penalty: p.failure_penalty,
            });
        }
        let all_passed = |scope| {
            per_policy
                .iter()
                .filter(|o| o.scope == scope)
                .all(|o| o.status == PolicyStatus::Passed)
        };
        let compliant = all_passed(PolicyScope::Recipient);
        let custodian_has_data = all_passed(PolicyScope::Custodian);
        let custodian_complete = compliant && custodian_has_data && {
            let start = Instant::now();
            let complete = completeness_probe(graph, &request.category, probe_sample);
            credibility_time += start.elapsed();
            complete
        };
        Ok(StagedEvaluation {
            result: ComplianceResult {
                per_policy,
                compliant,
                custodian_has_data,
                custodian_complete,
            },
            recipient_time,
            credibility_time,
        })
    }

    fn check(&self, p: &PolicyTemplate, params: &PolicyParams, graph: &Graph) -> Result<bool, PolicyError> {
        // An IN over nothing cannot match; the template cannot be rendered either.
        if params.category_list.is_empty() && p.placeholders().contains(&"categoryList") {
            return Ok(false);
        }
        let q = self.compiled(p, params)?;
        eval_ask(&q, graph).map_err(|e| PolicyError::Template {
            id: p.id.clone(),
            message: e.to_string(),
        })
    }
}

/// The one penalty a result calls for, if any.
pub fn penalty_for(result: &ComplianceResult) -> Option<PenaltyAssignment> {
    if let Some(failed) = result
        .per_policy
        .iter()
        .find(|o| o.scope == PolicyScope::Recipient && o.status == PolicyStatus::Failed)
    {
        return failed.failure_penalty.map(|kind| PenaltyAssignment {
            kind,
            target: PenaltyTarget::User,
        });
    }
    if !result.compliant {
        return None;
    }
    let custodian = |kind| {
        Some(PenaltyAssignment {
            kind,
            target: PenaltyTarget::Custodian,
        })
    };
    if !result.custodian_has_data {
        let kind = result
            .per_policy
            .iter()
            .find(|o| o.scope == PolicyScope::Custodian && o.status == PolicyStatus::Failed)
            .and_then(|o| o.failure_penalty)
            .unwrap_or(PenaltyKind::MissingCategory);
        return custodian(kind);
    }
    if !result.custodian_complete {
        return custodian(PenaltyKind::MissingProperties);
    }
    None
}
