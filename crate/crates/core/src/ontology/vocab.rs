//! IRIs of the contact-tracing (`syn:`), data-usage-agreement (`dua:`) and
//! trust (`tst:`) vocabularies, plus the W3C terms they lean on.

pub const RDF: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#";
pub const RDFS: &str = "http://www.w3.org/2000/01/rdf-schema#";
pub const XSD: &str = "http://www.w3.org/2001/XMLSchema#";
pub const OWL: &str = "http://www.w3.org/2002/07/owl#";
pub const SYN: &str = "http://example.org/syn#";
pub const DUA: &str = "http://example.org/dua#";
pub const TST: &str = "http://example.org/trust#";

pub const PREFIXES: &[(&str, &str)] = &[
    ("rdf", RDF),
    ("rdfs", RDFS),
    ("xsd", XSD),
    ("owl", OWL),
    ("syn", SYN),
    ("dua", DUA),
    ("tst", TST),
];

pub const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
pub const RDF_PLAIN_LITERAL: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#PlainLiteral";
pub const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
pub const RDFS_COMMENT: &str = "http://www.w3.org/2000/01/rdf-schema#comment";
pub const RDFS_SUBCLASS_OF: &str = "http://www.w3.org/2000/01/rdf-schema#subClassOf";
pub const RDFS_DOMAIN: &str = "http://www.w3.org/2000/01/rdf-schema#domain";
pub const RDFS_RANGE: &str = "http://www.w3.org/2000/01/rdf-schema#range";
pub const XSD_FLOAT: &str = "http://www.w3.org/2001/XMLSchema#float";
pub const XSD_DOUBLE: &str = "http://www.w3.org/2001/XMLSchema#double";
pub const XSD_DECIMAL: &str = "http://www.w3.org/2001/XMLSchema#decimal";
pub const XSD_STRING: &str = "http://www.w3.org/2001/XMLSchema#string";
pub const XSD_DATE: &str = "http://www.w3.org/2001/XMLSchema#date";
pub const XSD_INTEGER: &str = "http://www.w3.org/2001/XMLSchema#integer";
pub const OWL_CLASS: &str = "http://www.w3.org/2002/07/owl#Class";
pub const OWL_OBJECT_PROPERTY: &str = "http://www.w3.org/2002/07/owl#ObjectProperty";
pub const OWL_DATATYPE_PROPERTY: &str = "http://www.w3.org/2002/07/owl#DatatypeProperty";
pub const OWL_NAMED_INDIVIDUAL: &str = "http://www.w3.org/2002/07/owl#NamedIndividual";

// contact tracing application ontology
pub const SYN_DATA: &str = "http://example.org/syn#Data";
pub const SYN_ORGANIZATION: &str = "http://example.org/syn#Organization";
pub const SYN_PATIENT: &str = "http://example.org/syn#Patient";
pub const SYN_ENCOUNTER: &str = "http://example.org/syn#Encounter";
pub const SYN_OBSERVATION: &str = "http://example.org/syn#Observation";
pub const SYN_TEST_RESULT: &str = "http://example.org/syn#TestResult";
pub const SYN_CONTACT_TRACE: &str = "http://example.org/syn#ContactTrace";
pub const SYN_PRE_EXISTING_CONDITION: &str = "http://example.org/syn#PreExistingCondition";
pub const SYN_SYMPTOM: &str = "http://example.org/syn#Symptom";
pub const SYN_INTERVIEW: &str = "http://example.org/syn#Interview";
pub const SYN_RISK_FACTOR: &str = "http://example.org/syn#RiskFactor";
pub const SYN_LOCATING_INFORMATION: &str = "http://example.org/syn#LocatingInformation";

pub const SYN_IS_AFFILIATED_WITH: &str = "http://example.org/syn#isAffiliatedWith";
pub const SYN_HAS_DATA_CATEGORY: &str = "http://example.org/syn#hasDataCategory";
pub const SYN_HAS_TEST_RESULT: &str = "http://example.org/syn#hasTestResult";
pub const SYN_HAD_CONTACT_WITH: &str = "http://example.org/syn#hadContactWith";
pub const SYN_HAS_PRE_EXISTING_CONDITION: &str = "http://example.org/syn#hasPreExistingCondition";
pub const SYN_HAS_SYMPTOM: &str = "http://example.org/syn#hasSymptom";
pub const SYN_HAS_INTERVIEW_DATE: &str = "http://example.org/syn#hasInterviewDate";
pub const SYN_HAS_RISK_FACTOR: &str = "http://example.org/syn#hasRiskFactor";
pub const SYN_HAS_LOCATING_INFORMATION: &str = "http://example.org/syn#hasLocatingInformation";
pub const SYN_HAS_ENCOUNTER: &str = "http://example.org/syn#hasEncounter";
pub const SYN_HAS_OBSERVATION: &str = "http://example.org/syn#hasObservation";
pub const SYN_ENCOUNTER_TYPE: &str = "http://example.org/syn#encounterType";
pub const SYN_ENCOUNTER_DATE: &str = "http://example.org/syn#encounterDate";
pub const SYN_OBSERVATION_CODE: &str = "http://example.org/syn#observationCode";
pub const SYN_OBSERVATION_VALUE: &str = "http://example.org/syn#observationValue";

// data usage agreement ontology
pub const DUA_DATA_USAGE_AGREEMENT: &str = "http://example.org/dua#DataUsageAgreement";
pub const DUA_TERM_AND_TERMINATION: &str = "http://example.org/dua#TermAndTermination";
pub const DUA_DATA_SECURITY_PLAN: &str = "http://example.org/dua#DataSecurityPlan";
pub const DUA_PERMITTED_USE_OR_DISCLOSURE: &str = "http://example.org/dua#PermittedUseOrDisclosure";
pub const DUA_HAS_RECIPIENT: &str = "http://example.org/dua#hasRecipient";
pub const DUA_HAS_DATA_CUSTODIAN: &str = "http://example.org/dua#hasDataCustodian";
pub const DUA_REQUESTED_DATA: &str = "http://example.org/dua#requestedData";
pub const DUA_HAS_PERMITTED_USE_OR_DISCLOSURE: &str = "http://example.org/dua#hasPermittedUseOrDisclosure";
pub const DUA_HAS_TERM_AND_TERMINATION: &str = "http://example.org/dua#hasTermAndTermination";
pub const DUA_HAS_DATA_SECURITY_PLAN: &str = "http://example.org/dua#hasDataSecurityPlan";
pub const DUA_TERM: &str = "http://example.org/dua#term";
pub const DUA_TERMINATION_EFFECT: &str = "http://example.org/dua#terminationEffect";
pub const DUA_TERMINATION_CAUSE: &str = "http://example.org/dua#terminationCause";
pub const DUA_STORAGE: &str = "http://example.org/dua#storage";
pub const DUA_ACCESS: &str = "http://example.org/dua#access";
pub const DUA_PROTECTIONS: &str = "http://example.org/dua#protections";
pub const DUA_IRB_APPROVED_RESEARCH: &str = "http://example.org/dua#IRBApprovedResearch";
pub const DUA_PUBLIC_HEALTH: &str = "http://example.org/dua#PublicHealth";
pub const DUA_HEALTH_CARE_OPERATION: &str = "http://example.org/dua#HealthCareOperation";

// trust ontology
pub const TST_USER: &str = "http://example.org/trust#User";
pub const TST_TRUST: &str = "http://example.org/trust#Trust";
pub const TST_IDENTITY_TRUST: &str = "http://example.org/trust#IdentityTrust";
pub const TST_BEHAVIORAL_TRUST: &str = "http://example.org/trust#BehavioralTrust";
pub const TST_VERACITY: &str = "http://example.org/trust#Veracity";
pub const TST_OBJECTIVITY: &str = "http://example.org/trust#Objectivity";
pub const TST_TRUTHFULNESS: &str = "http://example.org/trust#Truthfulness";
pub const TST_CREDIBILITY_CLASS: &str = "http://example.org/trust#Credibility";
pub const TST_PROVENANCE: &str = "http://example.org/trust#Provenance";
pub const TST_BEHAVIOR_TRUST: &str = "http://example.org/trust#behaviorTrust";
pub const TST_IDENTITY_TRUST_SCORE: &str = "http://example.org/trust#identityTrust";
pub const TST_CREDIBILITY: &str = "http://example.org/trust#credibility";

/// Classes from the DUA and trust ontologies that the application ontology
/// supersedes. Bootstrap never declares the left-hand IRIs.
pub const CLASS_ALIASES: &[(&str, &str)] = &[
    ("http://example.org/dua#Organization", SYN_ORGANIZATION),
    ("http://example.org/dua#Data", SYN_DATA),
    ("http://example.org/trust#Organization", SYN_ORGANIZATION),
    ("http://example.org/trust#Data", SYN_DATA),
];

/// The enumerated permitted-use individuals.
pub const PERMITTED_USES: &[&str] = &[DUA_IRB_APPROVED_RESEARCH, DUA_PUBLIC_HEALTH, DUA_HEALTH_CARE_OPERATION];

/// Requestable data categories and the properties every complete instance
/// of the category carries. Patient facets other than encounters and
/// observations are stored as literal-valued properties of the patient, so
/// their classes have no properties of their own.
pub const DATA_CATEGORIES: &[(&str, &[&str])] = &[
    (
        SYN_PATIENT,
        &[
            SYN_HAS_TEST_RESULT,
            SYN_HAD_CONTACT_WITH,
            SYN_HAS_PRE_EXISTING_CONDITION,
            SYN_HAS_SYMPTOM,
            SYN_HAS_INTERVIEW_DATE,
            SYN_HAS_RISK_FACTOR,
            SYN_HAS_LOCATING_INFORMATION,
            SYN_HAS_ENCOUNTER,
            SYN_HAS_OBSERVATION,
        ],
    ),
    (SYN_ENCOUNTER, &[SYN_ENCOUNTER_TYPE, SYN_ENCOUNTER_DATE]),
    (SYN_OBSERVATION, &[SYN_OBSERVATION_CODE, SYN_OBSERVATION_VALUE]),
    (SYN_TEST_RESULT, &[]),
    (SYN_CONTACT_TRACE, &[]),
    (SYN_PRE_EXISTING_CONDITION, &[]),
    (SYN_SYMPTOM, &[]),
    (SYN_INTERVIEW, &[]),
    (SYN_RISK_FACTOR, &[]),
    (SYN_LOCATING_INFORMATION, &[]),
];

/// Property IRIs of a data category, or `None` if `iri` is not a category.
pub fn category_properties(iri: &str) -> Option<&'static [&'static str]> {
    DATA_CATEGORIES.iter().find(|(c, _)| *c == iri).map(|(_, props)| *props)
}

pub fn is_data_category(iri: &str) -> bool {
    category_properties(iri).is_some()
}

pub fn is_permitted_use(iri: &str) -> bool {
    PERMITTED_USES.contains(&iri)
}

/// Resolves superseded class IRIs to their application-ontology form.
pub fn canonical_class(iri: &str) -> &str {
    CLASS_ALIASES
        .iter()
        .find(|(alias, _)| *alias == iri)
        .map_or(iri, |(_, canonical)| canonical)
}
