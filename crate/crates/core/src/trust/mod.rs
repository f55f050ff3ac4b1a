//! Trust-score lifecycle: initialization, weighted assessment, penalties,
//! lockout and recovery by rewriting the agreement.

mod registry;
mod score;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use registry::TrustRegistry;
pub use score::{Score, SCALE};

use crate::ontology::vocab::{TST_BEHAVIOR_TRUST, TST_CREDIBILITY, TST_IDENTITY_TRUST_SCORE};
use crate::ontology::{write_dua, DuaRecord, OntologyError, PrincipalKind, PrincipalRef};
use crate::store::Graph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TrustError {
    #[error("<{0}> is already registered")]
    Conflict(String),
    #[error("<{0}> is not registered")]
    NotFound(String),
    #[error("<{iri}> is a {actual}, expected a {expected}")]
    Kind {
        iri: String,
        expected: PrincipalKind,
        actual: PrincipalKind,
    },
    #[error("penalty {penalty} does not apply to a {kind}")]
    PenaltyKind { penalty: PenaltyKind, kind: PrincipalKind },
    #[error("invalid state: {0}")]
    State(String),
    #[error("agreement mismatch: {0}")]
    Mismatch(String),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ScoreName {
    Behavior,
    Identity,
    Credibility,
}

impl ScoreName {
    pub const ALL: [ScoreName; 3] = [ScoreName::Behavior, ScoreName::Identity, ScoreName::Credibility];

    /// Predicate of the score's graph projection.
    pub fn predicate(self) -> &'static str {
        match self {
            ScoreName::Behavior => TST_BEHAVIOR_TRUST,
            ScoreName::Identity => TST_IDENTITY_TRUST_SCORE,
            ScoreName::Credibility => TST_CREDIBILITY,
        }
    }

    pub fn from_predicate(iri: &str) -> Option<ScoreName> {
        ScoreName::ALL.into_iter().find(|s| s.predicate() == iri)
    }
}

impl std::fmt::Display for ScoreName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreName::Behavior => "behavior",
            ScoreName::Identity => "identity",
            ScoreName::Credibility => "credibility",
        })
    }
}

/// A score and the record version that last wrote it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCell {
    pub value: Score,
    pub version: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrustRecord {
    pub principal: PrincipalRef,
    /// Users only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub behavior: Option<ScoreCell>,
    pub identity: ScoreCell,
    /// Organizations only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub credibility: Option<ScoreCell>,
    pub version: u64,
    /// Organizations this one may not exchange with until the agreement is rewritten.
    pub locked_with: BTreeSet<String>,
    /// Violations forgiven under the tolerance grace.
    pub forgiven: u32,
}

/// Fresh record with every applicable score at 1 and version 1.
pub fn init_principal(principal: PrincipalRef) -> TrustRecord {
    let one = ScoreCell {
        value: Score::ONE,
        version: 1,
    };
    let user = principal.kind == PrincipalKind::User;
    TrustRecord {
        principal,
        behavior: user.then_some(one),
        identity: one,
        credibility: (!user).then_some(one),
        version: 1,
        locked_with: BTreeSet::new(),
        forgiven: 0,
    }
}

impl TrustRecord {
    pub fn iri(&self) -> &str {
        &self.principal.iri
    }

    pub fn kind(&self) -> PrincipalKind {
        self.principal.kind
    }

    pub fn score(&self, name: ScoreName) -> Option<Score> {
        self.cell(name).map(|c| c.value)
    }

    pub fn cell(&self, name: ScoreName) -> Option<ScoreCell> {
        match name {
            ScoreName::Behavior => self.behavior,
            ScoreName::Identity => Some(self.identity),
            ScoreName::Credibility => self.credibility,
        }
    }

    fn cell_mut(&mut self, name: ScoreName) -> Option<&mut ScoreCell> {
        match name {
            ScoreName::Behavior => self.behavior.as_mut(),
            ScoreName::Identity => Some(&mut self.identity),
            ScoreName::Credibility => self.credibility.as_mut(),
        }
    }

    /// Bumps the record version; every local mutation goes through here.
    fn bump(&mut self) -> u64 {
        self.version += 1;
        self.version
    }

    /// Sets a score locally, stamping it with a new version.
    pub fn set_score(&mut self, name: ScoreName, value: Score) -> Result<(), TrustError> {
        if self.cell(name).is_none() {
            return Err(TrustError::State(format!("a {} has no {name} score", self.kind())));
        }
        let v = self.bump();
        *self.cell_mut(name).expect("checked above") = ScoreCell { value, version: v };
        Ok(())
    }

    /// Adopts a replica's value iff it is newer, or equally new and lower.
    /// Returns whether the record changed.
    pub fn merge(&mut self, name: ScoreName, value: Score, version: u64) -> bool {
        let Some(cell) = self.cell_mut(name) else {
            return false;
        };
        if version > cell.version || (version == cell.version && value < cell.value) {
            *cell = ScoreCell { value, version };
            self.version = (self.version + 1).max(version);
            true
        } else {
            false
        }
    }

    pub fn lock_with(&mut self, other: &str) -> bool {
        let added = self.locked_with.insert(other.to_string());
        if added {
            self.bump();
        }
        added
    }

    fn expect_kind(&self, expected: PrincipalKind) -> Result<(), TrustError> {
        if self.kind() == expected {
            Ok(())
        } else {
            Err(TrustError::Kind {
                iri: self.iri().to_string(),
                expected,
                actual: self.kind(),
            })
        }
    }
}

/// Weights and grant threshold of the assessment. Weights are kept in
/// score units and compared exactly; they need not sum to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssessmentConfig {
    w_behavior: u64,
    w_identity: u64,
    pub threshold: Score,
}

impl AssessmentConfig {
    pub fn new(w_behavior: f64, w_identity: f64, threshold: Score) -> Result<Self, TrustError> {
        let units = |w: f64, what: &str| {
            if (0.0..=1e6).contains(&w) {
                Ok((w * SCALE as f64).round() as u64)
            } else {
                Err(TrustError::InvalidConfig(format!(
                    "{what} weight {w} must be a non-negative number"
                )))
            }
        };
        let (b, i) = (units(w_behavior, "behavior")?, units(w_identity, "identity")?);
        if b + i == 0 {
            return Err(TrustError::InvalidConfig("weights must not both be zero".into()));
        }
        Ok(AssessmentConfig {
            w_behavior: b,
            w_identity: i,
            threshold,
        })
    }

    /// Normalized (behavior, identity) weights.
    pub fn weights(&self) -> (f64, f64) {
        let total = (self.w_behavior + self.w_identity) as f64;
        (self.w_behavior as f64 / total, self.w_identity as f64 / total)
    }
}

impl Default for AssessmentConfig {
    fn default() -> Self {
        AssessmentConfig::new(0.5, 0.5, Score::from_units(SCALE / 2).expect("in range")).expect("valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assessment {
    pub passed: bool,
    pub weighted_average: f64,
}

/// Weighted average of behavior and identity against the threshold (inclusive).
pub fn assess(record: &TrustRecord, cfg: &AssessmentConfig) -> Result<Assessment, TrustError> {
    record.expect_kind(PrincipalKind::User)?;
    let b = record.behavior.expect("users carry behavior").value.units() as u64;
    let i = record.identity.value.units() as u64;
    let (wb, wi) = (cfg.w_behavior, cfg.w_identity);
    let weighted = wb * b + wi * i;
    let total = wb + wi;
    Ok(Assessment {
        passed: weighted >= cfg.threshold.units() as u64 * total,
        weighted_average: weighted as f64 / total as f64 / SCALE as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PenaltyKind {
    DuaViolation,
    NoDuaRequest,
    MissingCategory,
    MissingProperties,
}

impl PenaltyKind {
    pub fn applies_to(self) -> PrincipalKind {
        match self {
            PenaltyKind::DuaViolation | PenaltyKind::NoDuaRequest => PrincipalKind::User,
            PenaltyKind::MissingCategory | PenaltyKind::MissingProperties => PrincipalKind::Organization,
        }
    }
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyKind::DuaViolation => "duaViolation",
            PenaltyKind::NoDuaRequest => "noDuaRequest",
            PenaltyKind::MissingCategory => "missingCategory",
            PenaltyKind::MissingProperties => "missingProperties",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PenaltyConfig {
    pub dua_violation: Score,
    pub no_dua_request: Score,
    pub missing_category: Score,
    pub missing_properties: Score,
    /// User violations forgiven before deductions begin.
    pub tolerance_grace: u32,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        let units = |u| Score::from_units(u).expect("in range");
        PenaltyConfig {
            dua_violation: units(100),
            no_dua_request: units(200),
            missing_category: units(200),
            missing_properties: units(100),
            tolerance_grace: 0,
        }
    }
}

impl PenaltyConfig {
    pub fn deduction(&self, kind: PenaltyKind) -> Score {
        match kind {
            PenaltyKind::DuaViolation => self.dua_violation,
            PenaltyKind::NoDuaRequest => self.no_dua_request,
            PenaltyKind::MissingCategory => self.missing_category,
            PenaltyKind::MissingProperties => self.missing_properties,
        }
    }

    pub fn validate(&self) -> Result<(), TrustError> {
        for kind in [
            PenaltyKind::DuaViolation,
            PenaltyKind::NoDuaRequest,
            PenaltyKind::MissingCategory,
            PenaltyKind::MissingProperties,
        ] {
            if self.deduction(kind).is_zero() {
                return Err(TrustError::InvalidConfig(format!("{kind} deduction must be in (0, 1]")));
            }
        }
        Ok(())
    }
}

/// What a penalty did to its score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PenaltyOutcome {
    pub kind: PenaltyKind,
    pub score: ScoreName,
    pub before: Score,
    pub after: Score,
    /// Absorbed by the tolerance grace instead of deducted.
    pub forgiven: bool,
}

/// The penalty must target `target`, and so must the record.
fn check_penalty(record: &TrustRecord, kind: PenaltyKind, target: PrincipalKind) -> Result<(), TrustError> {
    if kind.applies_to() == target && record.kind() == target {
        Ok(())
    } else {
        Err(TrustError::PenaltyKind {
            penalty: kind,
            kind: record.kind(),
        })
    }
}

/// Deducts from a user's behavior score, unless the grace still covers it.
pub fn apply_user_penalty(
    record: &mut TrustRecord,
    kind: PenaltyKind,
    cfg: &PenaltyConfig,
) -> Result<PenaltyOutcome, TrustError> {
    check_penalty(record, kind, PrincipalKind::User)?;
    let before = record.score(ScoreName::Behavior).expect("users carry behavior");
    if record.forgiven < cfg.tolerance_grace {
        record.forgiven += 1;
        record.bump();
        return Ok(PenaltyOutcome {
            kind,
            score: ScoreName::Behavior,
            before,
            after: before,
            forgiven: true,
        });
    }
    let after = before.deduct(cfg.deduction(kind));
    record.set_score(ScoreName::Behavior, after)?;
    Ok(PenaltyOutcome {
        kind,
        score: ScoreName::Behavior,
        before,
        after,
        forgiven: false,
    })
}

/// Deducts from an organization's credibility score.
pub fn apply_org_penalty(
    record: &mut TrustRecord,
    kind: PenaltyKind,
    cfg: &PenaltyConfig,
) -> Result<PenaltyOutcome, TrustError> {
    check_penalty(record, kind, PrincipalKind::Organization)?;
    let before = record
        .score(ScoreName::Credibility)
        .expect("organizations carry credibility");
    let after = before.deduct(cfg.deduction(kind));
    record.set_score(ScoreName::Credibility, after)?;
    Ok(PenaltyOutcome {
        kind,
        score: ScoreName::Credibility,
        before,
        after,
        forgiven: false,
    })
}

/// Deducts a user penalty's amount from the user's organization's identity.
pub fn apply_org_identity_penalty(
    org: &mut TrustRecord,
    kind: PenaltyKind,
    cfg: &PenaltyConfig,
) -> Result<PenaltyOutcome, TrustError> {
    org.expect_kind(PrincipalKind::Organization)?;
    let before = org.identity.value;
    let after = before.deduct(cfg.deduction(kind));
    org.set_score(ScoreName::Identity, after)?;
    Ok(PenaltyOutcome {
        kind,
        score: ScoreName::Identity,
        before,
        after,
        forgiven: false,
    })
}

/// True when exchanges between the two organizations are blocked.
pub fn check_lockout(custodian: &TrustRecord, recipient: &TrustRecord) -> Result<bool, TrustError> {
    custodian.expect_kind(PrincipalKind::Organization)?;
    recipient.expect_kind(PrincipalKind::Organization)?;
    Ok(custodian.score(ScoreName::Credibility).is_some_and(Score::is_zero)
        || recipient.identity.value.is_zero()
        || custodian.locked_with.contains(recipient.iri())
        || recipient.locked_with.contains(custodian.iri()))
}

/// Re-enables a locked pair: persists `dua`, clears the lock and restores
/// the scores that caused it to 1.
pub fn rewrite_dua_reset(
    custodian: &mut TrustRecord,
    recipient: &mut TrustRecord,
    dua: &DuaRecord,
    graph: &mut Graph,
) -> Result<(), TrustError> {
    if !check_lockout(custodian, recipient)? {
        return Err(TrustError::State(format!(
            "<{}> and <{}> are not locked",
            custodian.iri(),
            recipient.iri()
        )));
    }
    if dua.custodian != custodian.iri() || dua.recipient != recipient.iri() {
        return Err(TrustError::Mismatch(format!(
            "agreement binds <{}> and <{}>, expected <{}> and <{}>",
            dua.custodian,
            dua.recipient,
            custodian.iri(),
            recipient.iri()
        )));
    }
    write_dua(graph, dua)?;
    if custodian.locked_with.remove(recipient.iri()) {
        custodian.bump();
    }
    if recipient.locked_with.remove(custodian.iri()) {
        recipient.bump();
    }
    if custodian.score(ScoreName::Credibility).is_some_and(Score::is_zero) {
        custodian.set_score(ScoreName::Credibility, Score::ONE)?;
    }
    if recipient.identity.value.is_zero() {
        recipient.set_score(ScoreName::Identity, Score::ONE)?;
    }
    Ok(())
}
