//! Class, property and individual declarations of the three vocabularies.

use std::collections::BTreeSet;

use super::vocab::*;
use crate::store::{Graph, Term, Triple};

const CLASSES: &[&str] = &[
    SYN_DATA,
    SYN_ORGANIZATION,
    SYN_PATIENT,
    SYN_ENCOUNTER,
    SYN_OBSERVATION,
    SYN_TEST_RESULT,
    SYN_CONTACT_TRACE,
    SYN_PRE_EXISTING_CONDITION,
    SYN_SYMPTOM,
    SYN_INTERVIEW,
    SYN_RISK_FACTOR,
    SYN_LOCATING_INFORMATION,
    DUA_DATA_USAGE_AGREEMENT,
    DUA_TERM_AND_TERMINATION,
    DUA_DATA_SECURITY_PLAN,
    DUA_PERMITTED_USE_OR_DISCLOSURE,
    TST_USER,
    TST_TRUST,
    TST_IDENTITY_TRUST,
    TST_BEHAVIORAL_TRUST,
    TST_VERACITY,
    TST_OBJECTIVITY,
    TST_TRUTHFULNESS,
    TST_CREDIBILITY_CLASS,
    TST_PROVENANCE,
];

const SUBCLASSES: &[(&str, &str)] = &[
    (TST_IDENTITY_TRUST, TST_TRUST),
    (TST_BEHAVIORAL_TRUST, TST_TRUST),
    (TST_VERACITY, TST_TRUST),
    (TST_PROVENANCE, TST_TRUST),
    (TST_OBJECTIVITY, TST_VERACITY),
    (TST_TRUTHFULNESS, TST_VERACITY),
    (TST_CREDIBILITY_CLASS, TST_VERACITY),
];

/// (property, domain, range)
const OBJECT_PROPERTIES: &[(&str, &str, &str)] = &[
    (SYN_IS_AFFILIATED_WITH, TST_USER, SYN_ORGANIZATION),
    (SYN_HAS_DATA_CATEGORY, SYN_ORGANIZATION, SYN_DATA),
    (SYN_HAS_ENCOUNTER, SYN_PATIENT, SYN_ENCOUNTER),
    (SYN_HAS_OBSERVATION, SYN_PATIENT, SYN_OBSERVATION),
    (DUA_HAS_RECIPIENT, DUA_DATA_USAGE_AGREEMENT, SYN_ORGANIZATION),
    (DUA_HAS_DATA_CUSTODIAN, DUA_DATA_USAGE_AGREEMENT, SYN_ORGANIZATION),
    (
        DUA_HAS_PERMITTED_USE_OR_DISCLOSURE,
        DUA_DATA_USAGE_AGREEMENT,
        DUA_PERMITTED_USE_OR_DISCLOSURE,
    ),
    (
        DUA_HAS_TERM_AND_TERMINATION,
        DUA_DATA_USAGE_AGREEMENT,
        DUA_TERM_AND_TERMINATION,
    ),
    (
        DUA_HAS_DATA_SECURITY_PLAN,
        DUA_DATA_USAGE_AGREEMENT,
        DUA_DATA_SECURITY_PLAN,
    ),
];

/// (property, domain, range); an empty domain leaves it undeclared.
const DATATYPE_PROPERTIES: &[(&str, &str, &str)] = &[
    (SYN_HAS_TEST_RESULT, SYN_PATIENT, XSD_STRING),
    (SYN_HAD_CONTACT_WITH, SYN_PATIENT, XSD_STRING),
    (SYN_HAS_PRE_EXISTING_CONDITION, SYN_PATIENT, XSD_STRING),
    (SYN_HAS_SYMPTOM, SYN_PATIENT, XSD_STRING),
    (SYN_HAS_INTERVIEW_DATE, SYN_PATIENT, XSD_DATE),
    (SYN_HAS_RISK_FACTOR, SYN_PATIENT, XSD_STRING),
    (SYN_HAS_LOCATING_INFORMATION, SYN_PATIENT, XSD_STRING),
    (SYN_ENCOUNTER_TYPE, SYN_ENCOUNTER, XSD_STRING),
    (SYN_ENCOUNTER_DATE, SYN_ENCOUNTER, XSD_DATE),
    (SYN_OBSERVATION_CODE, SYN_OBSERVATION, XSD_STRING),
    (SYN_OBSERVATION_VALUE, SYN_OBSERVATION, XSD_STRING),
    (DUA_REQUESTED_DATA, DUA_DATA_USAGE_AGREEMENT, XSD_STRING),
    (DUA_TERM, DUA_TERM_AND_TERMINATION, XSD_STRING),
    (DUA_TERMINATION_EFFECT, DUA_TERM_AND_TERMINATION, XSD_STRING),
    (DUA_TERMINATION_CAUSE, DUA_TERM_AND_TERMINATION, XSD_STRING),
    (DUA_STORAGE, DUA_DATA_SECURITY_PLAN, XSD_STRING),
    (DUA_ACCESS, DUA_DATA_SECURITY_PLAN, XSD_STRING),
    (DUA_PROTECTIONS, DUA_DATA_SECURITY_PLAN, XSD_STRING),
    (TST_BEHAVIOR_TRUST, "", XSD_FLOAT),
    (TST_IDENTITY_TRUST_SCORE, "", XSD_FLOAT),
    (TST_CREDIBILITY, "", XSD_FLOAT),
];

const INDIVIDUAL_LABELS: &[(&str, &str)] = &[
    (DUA_IRB_APPROVED_RESEARCH, "IRB approved research"),
    (DUA_PUBLIC_HEALTH, "public health"),
    (DUA_HEALTH_CARE_OPERATION, "health care operation"),
];

fn iri(s: &str) -> Term {
    Term::iri(s).expect("vocabulary IRIs are valid")
}

fn decl(s: &str, p: &str, o: &str) -> Triple {
    Triple::new(iri(s), iri(p), iri(o)).expect("valid declaration")
}

/// Every declaration triple, in a fixed order.
pub fn declarations() -> Vec<Triple> {
    let mut out = Vec::new();
    for c in CLASSES {
        out.push(decl(c, RDF_TYPE, OWL_CLASS));
    }
    for (c, _) in DATA_CATEGORIES {
        if *c != SYN_DATA {
            out.push(decl(c, RDFS_SUBCLASS_OF, SYN_DATA));
        }
    }
    for (sub, sup) in SUBCLASSES {
        out.push(decl(sub, RDFS_SUBCLASS_OF, sup));
    }
    for (p, d, r) in OBJECT_PROPERTIES {
        out.push(decl(p, RDF_TYPE, OWL_OBJECT_PROPERTY));
        out.push(decl(p, RDFS_DOMAIN, d));
        out.push(decl(p, RDFS_RANGE, r));
    }
    for (p, d, r) in DATATYPE_PROPERTIES {
        out.push(decl(p, RDF_TYPE, OWL_DATATYPE_PROPERTY));
        if !d.is_empty() {
            out.push(decl(p, RDFS_DOMAIN, d));
        }
        out.push(decl(p, RDFS_RANGE, r));
    }
    for (ind, label) in INDIVIDUAL_LABELS {
        out.push(decl(ind, RDF_TYPE, OWL_NAMED_INDIVIDUAL));
        out.push(decl(ind, RDF_TYPE, DUA_PERMITTED_USE_OR_DISCLOSURE));
        out.push(Triple::new(iri(ind), iri(RDFS_LABEL), Term::plain(label)).expect("valid label"));
    }
    out
}

/// Adds every declaration missing from `graph`; returns how many were new.
pub fn bootstrap_vocabulary(graph: &mut Graph) -> usize {
    declarations().into_iter().filter(|t| graph.insert(t.clone())).count()
}

/// A graph holding only the vocabulary declarations.
pub fn vocabulary_graph() -> Graph {
    let mut g = Graph::new();
    bootstrap_vocabulary(&mut g);
    g
}

/// IRIs the vocabulary declares, plus the W3C vocabulary terms it builds on.
pub fn is_declared(iri: &str) -> bool {
    [RDF, RDFS, XSD, OWL].iter().any(|ns| iri.starts_with(ns)) || declared_subjects().contains(iri)
}

fn declared_subjects() -> &'static BTreeSet<String> {
    static SET: std::sync::OnceLock<BTreeSet<String>> = std::sync::OnceLock::new();
    SET.get_or_init(|| {
        declarations()
            .iter()
            .filter_map(|t| t.subject().as_iri().map(str::to_string))
            .collect()
    })
}
