//! The trust, DUA and contact-tracing vocabularies and the instance-level
//! views the rest of the crate reads through: DUAs, principals and data
//! categories.

mod schema;
pub mod vocab;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{bootstrap_vocabulary, declarations, is_declared, vocabulary_graph};

use crate::store::{Graph, PatternTerm, Term, Triple, TriplePattern};
use vocab::*;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("not found: {0}")]
    NotFound(String),
    #[error("integrity violation: {0}")]
    Integrity(String),
    #[error("invalid record: {0}")]
    Invalid(String),
}

fn iri(s: &str) -> Term {
    Term::iri(s).expect("vocabulary IRIs are valid")
}

/// First object of `subject predicate ?o` in term order.
fn first_object(g: &Graph, subject: &Term, predicate: &str) -> Option<Term> {
    g.objects(subject, &iri(predicate)).into_iter().next()
}

fn has_type(g: &Graph, subject: &Term, class: &str) -> bool {
    g.objects(subject, &iri(RDF_TYPE))
        .iter()
        .any(|t| t.as_iri().is_some_and(|c| canonical_class(c) == class))
}

/// A data usage agreement between a custodian and a recipient organization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DuaRecord {
    pub iri: String,
    pub custodian: String,
    pub recipient: String,
    /// Data-category class IRIs.
    #[serde(default)]
    pub requested_data: BTreeSet<String>,
    #[serde(default)]
    pub permitted_use_or_disclosure: BTreeSet<String>,
    #[serde(default)]
    pub term: String,
    #[serde(default)]
    pub termination_effect: String,
    #[serde(default)]
    pub termination_cause: String,
    #[serde(default)]
    pub storage: String,
    #[serde(default)]
    pub access: String,
    #[serde(default)]
    pub protections: String,
}

impl DuaRecord {
    pub fn new(iri: impl Into<String>, custodian: impl Into<String>, recipient: impl Into<String>) -> Self {
        DuaRecord {
            iri: iri.into(),
            custodian: custodian.into(),
            recipient: recipient.into(),
            requested_data: BTreeSet::new(),
            permitted_use_or_disclosure: BTreeSet::new(),
            term: String::new(),
            termination_effect: String::new(),
            termination_cause: String::new(),
            storage: String::new(),
            access: String::new(),
            protections: String::new(),
        }
    }

    pub fn validate(&self) -> Result<(), OntologyError> {
        for (what, v) in [
            ("iri", &self.iri),
            ("custodian", &self.custodian),
            ("recipient", &self.recipient),
        ] {
            Term::iri(v).map_err(|e| OntologyError::Invalid(format!("{what}: {e}")))?;
        }
        if self.custodian == self.recipient {
            return Err(OntologyError::Invalid(format!(
                "custodian and recipient are both <{}>",
                self.custodian
            )));
        }
        if let Some(c) = self.requested_data.iter().find(|c| !is_data_category(c)) {
            return Err(OntologyError::Invalid(format!("<{c}> is not a data category")));
        }
        if let Some(u) = self.permitted_use_or_disclosure.iter().find(|u| !is_permitted_use(u)) {
            return Err(OntologyError::Invalid(format!(
                "<{u}> is not a permitted use or disclosure"
            )));
        }
        Ok(())
    }

    fn term_node(&self) -> String {
        format!("{}-term", self.iri)
    }

    fn security_node(&self) -> String {
        format!("{}-security", self.iri)
    }

    fn triples(&self) -> Vec<Triple> {
        let s = iri(&self.iri);
        let t = |s: &Term, p: &str, o: Term| Triple::new(s.clone(), iri(p), o).expect("validated record");
        let mut out = vec![
            t(&s, RDF_TYPE, iri(DUA_DATA_USAGE_AGREEMENT)),
            t(&s, DUA_HAS_DATA_CUSTODIAN, iri(&self.custodian)),
            t(&s, DUA_HAS_RECIPIENT, iri(&self.recipient)),
        ];
        // plain literal of the absolute IRI, the form the access policies match
        out.extend(
            self.requested_data
                .iter()
                .map(|c| t(&s, DUA_REQUESTED_DATA, Term::plain(c))),
        );
        out.extend(
            self.permitted_use_or_disclosure
                .iter()
                .map(|u| t(&s, DUA_HAS_PERMITTED_USE_OR_DISCLOSURE, iri(u))),
        );
        let sections = [
            (
                self.term_node(),
                DUA_HAS_TERM_AND_TERMINATION,
                DUA_TERM_AND_TERMINATION,
                [
                    (DUA_TERM, &self.term),
                    (DUA_TERMINATION_EFFECT, &self.termination_effect),
                    (DUA_TERMINATION_CAUSE, &self.termination_cause),
                ],
            ),
            (
                self.security_node(),
                DUA_HAS_DATA_SECURITY_PLAN,
                DUA_DATA_SECURITY_PLAN,
                [
                    (DUA_STORAGE, &self.storage),
                    (DUA_ACCESS, &self.access),
                    (DUA_PROTECTIONS, &self.protections),
                ],
            ),
        ];
        for (node, link, class, fields) in sections {
            if fields.iter().all(|(_, v)| v.is_empty()) {
                continue;
            }
            let n = iri(&node);
            out.push(t(&s, link, n.clone()));
            out.push(t(&n, RDF_TYPE, iri(class)));
            for (p, v) in fields {
                if !v.is_empty() {
                    out.push(t(&n, p, Term::plain(v)));
                }
            }
        }
        out
    }
}

/// A DUA as read from a graph, with notes about absent optional sections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuaRead {
    pub record: DuaRecord,
    pub warnings: Vec<String>,
}

pub fn read_dua(graph: &Graph, dua: &str) -> Result<DuaRead, OntologyError> {
    let s = Term::iri(dua).map_err(|_| OntologyError::NotFound(dua.to_string()))?;
    if !has_type(graph, &s, DUA_DATA_USAGE_AGREEMENT) {
        return Err(OntologyError::NotFound(format!(
            "<{dua}> is not a data usage agreement"
        )));
    }
    let party = |p: &str, role: &str| -> Result<String, OntologyError> {
        let found = graph.objects(&s, &iri(p));
        match found.as_slice() {
            [one] if one.is_iri() => Ok(one.lexical().to_string()),
            [] => Err(OntologyError::Integrity(format!("<{dua}> has no {role}"))),
            _ => Err(OntologyError::Integrity(format!(
                "<{dua}> needs exactly one IRI {role}"
            ))),
        }
    };
    let mut record = DuaRecord::new(
        dua,
        party(DUA_HAS_DATA_CUSTODIAN, "custodian")?,
        party(DUA_HAS_RECIPIENT, "recipient")?,
    );
    if record.custodian == record.recipient {
        return Err(OntologyError::Integrity(format!(
            "<{dua}> names <{}> as both custodian and recipient",
            record.custodian
        )));
    }
    // stored as IRIs or as plain literals of the IRI
    record.requested_data = graph
        .objects(&s, &iri(DUA_REQUESTED_DATA))
        .iter()
        .map(|t| t.lexical().to_string())
        .collect();
    record.permitted_use_or_disclosure = graph
        .objects(&s, &iri(DUA_HAS_PERMITTED_USE_OR_DISCLOSURE))
        .iter()
        .filter_map(|t| t.as_iri().map(str::to_string))
        .collect();

    let mut warnings = Vec::new();
    if record.requested_data.is_empty() {
        warnings.push("no requested data".to_string());
    }
    if record.permitted_use_or_disclosure.is_empty() {
        warnings.push("no permitted use or disclosure".to_string());
    }
    let field = |node: &Term, p: &str| {
        first_object(graph, node, p)
            .map(|t| t.lexical().to_string())
            .unwrap_or_default()
    };
    match first_object(graph, &s, DUA_HAS_TERM_AND_TERMINATION) {
        Some(n) => {
            record.term = field(&n, DUA_TERM);
            record.termination_effect = field(&n, DUA_TERMINATION_EFFECT);
            record.termination_cause = field(&n, DUA_TERMINATION_CAUSE);
        }
        None => warnings.push("no term and termination section".to_string()),
    }
    match first_object(graph, &s, DUA_HAS_DATA_SECURITY_PLAN) {
        Some(n) => {
            record.storage = field(&n, DUA_STORAGE);
            record.access = field(&n, DUA_ACCESS);
            record.protections = field(&n, DUA_PROTECTIONS);
        }
        None => warnings.push("no data security plan".to_string()),
    }
    Ok(DuaRead { record, warnings })
}

/// Replaces every triple rooted at the record's IRI (including its section
/// nodes) with the record's triples. Returns the number written.
pub fn write_dua(graph: &mut Graph, record: &DuaRecord) -> Result<usize, OntologyError> {
    record.validate()?;
    let s = iri(&record.iri);
    let mut roots: BTreeSet<Term> = [iri(&record.term_node()), iri(&record.security_node())].into();
    for link in [DUA_HAS_TERM_AND_TERMINATION, DUA_HAS_DATA_SECURITY_PLAN] {
        roots.extend(graph.objects(&s, &iri(link)).into_iter().filter(Term::is_iri));
    }
    graph.remove_subject(&s);
    for r in &roots {
        graph.remove_subject(r);
    }
    let triples = record.triples();
    let n = triples.len();
    for t in triples {
        graph.insert(t);
    }
    Ok(n)
}

/// IRIs of every DUA in the graph, sorted.
pub fn dua_iris(graph: &Graph) -> Vec<String> {
    graph
        .subjects(&iri(RDF_TYPE), &iri(DUA_DATA_USAGE_AGREEMENT))
        .iter()
        .filter_map(|t| t.as_iri().map(str::to_string))
        .collect()
}

/// DUAs binding exactly this custodian and recipient.
pub fn duas_between(graph: &Graph, custodian: &str, recipient: &str) -> Vec<String> {
    let (c, r) = (iri(custodian), iri(recipient));
    dua_iris(graph)
        .into_iter()
        .filter(|d| {
            let s = iri(d);
            graph.contains(&Triple::new(s.clone(), iri(DUA_HAS_DATA_CUSTODIAN), c.clone()).expect("valid"))
                && graph.contains(&Triple::new(s, iri(DUA_HAS_RECIPIENT), r.clone()).expect("valid"))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrincipalKind {
    User,
    Organization,
}

impl std::fmt::Display for PrincipalKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PrincipalKind::User => "user",
            PrincipalKind::Organization => "organization",
        })
    }
}

/// A user or organization that holds trust scores.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrincipalRef {
    pub iri: String,
    pub kind: PrincipalKind,
    pub label: String,
    /// The user's organization; always `None` for organizations.
    pub affiliation: Option<String>,
}

impl PrincipalRef {
    /// Reads a principal from the graph. Users must have exactly one affiliation.
    pub fn load(graph: &Graph, principal: &str) -> Result<PrincipalRef, OntologyError> {
        let s = Term::iri(principal).map_err(|_| OntologyError::NotFound(principal.to_string()))?;
        let label = first_object(graph, &s, RDFS_LABEL)
            .map(|t| t.lexical().to_string())
            .unwrap_or_default();
        if has_type(graph, &s, TST_USER) {
            let orgs = graph.objects(&s, &iri(SYN_IS_AFFILIATED_WITH));
            let [org] = orgs.as_slice() else {
                return Err(OntologyError::Integrity(format!(
                    "user <{principal}> has {} affiliations",
                    orgs.len()
                )));
            };
            Ok(PrincipalRef {
                iri: principal.to_string(),
                kind: PrincipalKind::User,
                label,
                affiliation: Some(org.lexical().to_string()),
            })
        } else if has_type(graph, &s, SYN_ORGANIZATION) {
            Ok(PrincipalRef {
                iri: principal.to_string(),
                kind: PrincipalKind::Organization,
                label,
                affiliation: None,
            })
        } else {
            Err(OntologyError::NotFound(format!(
                "<{principal}> is neither a user nor an organization"
            )))
        }
    }

    /// Finds the user carrying `label`.
    pub fn user_by_label(graph: &Graph, label: &str) -> Result<PrincipalRef, OntologyError> {
        let found: Vec<Term> = graph
            .subjects(&iri(RDFS_LABEL), &Term::plain(label))
            .into_iter()
            .filter(|s| has_type(graph, s, TST_USER))
            .collect();
        match found.as_slice() {
            [one] => PrincipalRef::load(graph, one.lexical()),
            [] => Err(OntologyError::NotFound(format!("no user labelled {label:?}"))),
            _ => Err(OntologyError::Integrity(format!("several users labelled {label:?}"))),
        }
    }
}

/// Every user and organization in the graph, sorted by IRI. Users whose
/// affiliation is not unique are skipped.
pub fn principals(graph: &Graph) -> Vec<PrincipalRef> {
    let mut iris: BTreeSet<String> = BTreeSet::new();
    for class in std::iter::once(TST_USER)
        .chain(std::iter::once(SYN_ORGANIZATION))
        .chain(
            CLASS_ALIASES
                .iter()
                .filter(|(_, c)| *c == SYN_ORGANIZATION)
                .map(|(a, _)| *a),
        )
    {
        iris.extend(
            graph
                .subjects(&iri(RDF_TYPE), &iri(class))
                .iter()
                .filter_map(|t| t.as_iri().map(str::to_string)),
        );
    }
    iris.iter().filter_map(|i| PrincipalRef::load(graph, i).ok()).collect()
}

/// A requestable data category.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct DataCategoryRef(String);

impl DataCategoryRef {
    pub fn new(iri: impl Into<String>) -> Result<Self, OntologyError> {
        let iri = iri.into();
        if is_data_category(&iri) {
            Ok(DataCategoryRef(iri))
        } else {
            Err(OntologyError::NotFound(format!("<{iri}> is not a data category")))
        }
    }

    pub fn iri(&self) -> &str {
        &self.0
    }

    /// Properties every complete instance of the category carries.
    pub fn properties(&self) -> &'static [&'static str] {
        category_properties(&self.0).expect("checked at construction")
    }
}

impl TryFrom<String> for DataCategoryRef {
    type Error = OntologyError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        DataCategoryRef::new(s)
    }
}

impl From<DataCategoryRef> for String {
    fn from(c: DataCategoryRef) -> String {
        c.0
    }
}

impl std::fmt::Display for DataCategoryRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// The categories an organization advertises via `syn:hasDataCategory`.
pub fn category_inventory(graph: &Graph, organization: &str) -> BTreeSet<String> {
    let Ok(s) = Term::iri(organization) else {
        return BTreeSet::new();
    };
    graph
        .objects(&s, &iri(SYN_HAS_DATA_CATEGORY))
        .iter()
        .map(|t| t.lexical().to_string())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub iri: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

pub const RULE_AFFILIATION: &str = "single-affiliation";
pub const RULE_DUA_PARTIES: &str = "dua-parties";
pub const RULE_SCORE_RANGE: &str = "score-range";

/// Checks the instance-level rules: each user has exactly one affiliation,
/// each DUA names a custodian and a recipient, and each trust-score literal
/// is a number in `[0, 1]`.
pub fn validate_instances(graph: &Graph) -> ValidationReport {
    let mut violations = Vec::new();
    let mut push = |iri: &Term, rule: &str, message: String| {
        violations.push(Violation {
            iri: iri.lexical().to_string(),
            rule: rule.to_string(),
            message,
        })
    };
    for user in graph.subjects(&iri(RDF_TYPE), &iri(TST_USER)) {
        let n = graph.objects(&user, &iri(SYN_IS_AFFILIATED_WITH)).len();
        if n != 1 {
            push(
                &user,
                RULE_AFFILIATION,
                format!("user has {n} affiliations, expected 1"),
            );
        }
    }
    for dua in graph.subjects(&iri(RDF_TYPE), &iri(DUA_DATA_USAGE_AGREEMENT)) {
        for (p, role) in [(DUA_HAS_DATA_CUSTODIAN, "custodian"), (DUA_HAS_RECIPIENT, "recipient")] {
            if graph.objects(&dua, &iri(p)).is_empty() {
                push(&dua, RULE_DUA_PARTIES, format!("agreement has no {role}"));
            }
        }
    }
    for p in [TST_BEHAVIOR_TRUST, TST_IDENTITY_TRUST_SCORE, TST_CREDIBILITY] {
        for t in graph.matches(&TriplePattern::new(
            PatternTerm::var("s"),
            iri(p),
            PatternTerm::var("o"),
        )) {
            let o = t.object();
            let ok = !o.is_iri()
                && o.lexical()
                    .parse::<f64>()
                    .is_ok_and(|v| v.is_finite() && (0.0..=1.0).contains(&v));
            if !ok {
                push(
                    t.subject(),
                    RULE_SCORE_RANGE,
                    format!("<{p}> value {o} is not a number in [0, 1]"),
                );
            }
        }
    }
    ValidationReport { violations }
}
