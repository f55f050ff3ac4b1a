//! Seeded generator for the contact-tracing patient corpus and the
//! organization, user and DUA demographics around it.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::vocab::*;
use crate::ontology::{bootstrap_vocabulary, write_dua, DuaRecord};
use crate::store::{Graph, Term, Triple};

pub const CUSTODIAN: &str = "http://example.org/syn#data_custodian";
pub const CUSTODIAN_LABEL: &str = "DataCustodian";

/// Categories the custodian advertises.
pub const CUSTODIAN_INVENTORY: &[&str] = &[SYN_PATIENT, SYN_ENCOUNTER, SYN_OBSERVATION];

const ROLES: &[&str] = &[
    "physician",
    "nurse",
    "research_scientist",
    "epidemiologist",
    "data_analyst",
];
const TEST_RESULTS: &[&str] = &["positive", "negative", "inconclusive"];
const CONDITIONS: &[&str] = &["none", "asthma", "diabetes", "hypertension", "copd", "obesity"];
const SYMPTOMS: &[&str] = &["none", "fever", "cough", "fatigue", "anosmia", "dyspnea"];
const RISK_FACTORS: &[&str] = &[
    "none",
    "age over 65",
    "healthcare worker",
    "immunocompromised",
    "smoker",
];
const LOCATIONS: &[&str] = &["home", "dormitory", "nursing facility", "shelter", "hospital"];
const ENCOUNTER_TYPES: &[&str] = &["outpatient", "inpatient", "emergency", "telehealth"];
const OBSERVATION_CODES: &[&str] = &[
    "body-temperature",
    "oxygen-saturation",
    "respiratory-rate",
    "heart-rate",
];

/// Requested data and purpose for recipients past the patient-granting ones.
const OTHER_GRANTS: &[(&str, &str)] = &[
    (SYN_ENCOUNTER, DUA_HEALTH_CARE_OPERATION),
    (SYN_RISK_FACTOR, DUA_IRB_APPROVED_RESEARCH),
    (SYN_OBSERVATION, DUA_HEALTH_CARE_OPERATION),
];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("invalid generator spec: {0}")]
pub struct SpecError(String);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratorSpec {
    pub seed: u64,
    pub patient_count: usize,
    pub org_count: usize,
    pub user_count: usize,
    pub dua_count: usize,
    pub patient_dua_count: usize,
    pub public_health_dua_count: usize,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            seed: 1,
            patient_count: 1000,
            org_count: 10,
            user_count: 100,
            dua_count: 7,
            patient_dua_count: 4,
            public_health_dua_count: 2,
        }
    }
}

impl GeneratorSpec {
    pub fn new(seed: u64, patient_count: usize) -> Self {
        GeneratorSpec {
            seed,
            patient_count,
            ..GeneratorSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        if self.patient_count == 0 {
            return Err(SpecError("patientCount must be positive".into()));
        }
        if self.org_count == 0 || self.user_count == 0 {
            return Err(SpecError("orgCount and userCount must be positive".into()));
        }
        if !(self.public_health_dua_count <= self.patient_dua_count
            && self.patient_dua_count <= self.dua_count
            && self.dua_count <= self.org_count)
        {
            return Err(SpecError(
                "need publicHealthDuaCount <= patientDuaCount <= duaCount <= orgCount".into(),
            ));
        }
        // user numbers are three digits
        if self.user_count > 900 {
            return Err(SpecError("userCount is at most 900".into()));
        }
        if self.patient_count > 9_999_999 {
            return Err(SpecError("patientCount is at most 9999999".into()));
        }
        Ok(())
    }
}

fn iri(s: &str) -> Term {
    Term::iri(s).expect("generated IRIs are valid")
}

fn add(g: &mut Graph, s: &Term, p: &str, o: Term) {
    g.insert(Triple::new(s.clone(), iri(p), o).expect("well-formed"));
}

fn date(rng: &mut ChaCha8Rng) -> Term {
    let month = rng.random_range(1..=12u32);
    let day = rng.random_range(1..=28u32);
    Term::typed(format!("2020-{month:02}-{day:02}"), XSD_DATE).expect("valid datatype")
}

fn pick(rng: &mut ChaCha8Rng, xs: &[&str]) -> Term {
    Term::plain(xs.choose(rng).expect("non-empty"))
}

pub fn patient_iri(n: usize) -> String {
    format!("{SYN}patient_{n:07}")
}

pub fn organization_iri(k: usize) -> String {
    format!("{SYN}org_{:02}", k + 1)
}

/// `patientCount` patients, each with one encounter and one observation
/// and one value per facet: 16 triples per patient.
pub fn generate_patients(spec: &GeneratorSpec) -> Result<Graph, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut g = Graph::new();
    for n in 1..=spec.patient_count {
        let p = iri(&patient_iri(n));
        let enc = iri(&format!("{SYN}encounter_{n:07}"));
        let obs = iri(&format!("{SYN}observation_{n:07}"));
        add(&mut g, &p, RDF_TYPE, iri(SYN_PATIENT));
        add(&mut g, &p, SYN_HAS_TEST_RESULT, pick(&mut rng, TEST_RESULTS));
        let contact = rng.random_range(1..=spec.patient_count);
        add(
            &mut g,
            &p,
            SYN_HAD_CONTACT_WITH,
            Term::plain(format!("patient_{contact:07}")),
        );
        add(&mut g, &p, SYN_HAS_PRE_EXISTING_CONDITION, pick(&mut rng, CONDITIONS));
        add(&mut g, &p, SYN_HAS_SYMPTOM, pick(&mut rng, SYMPTOMS));
        add(&mut g, &p, SYN_HAS_INTERVIEW_DATE, date(&mut rng));
        add(&mut g, &p, SYN_HAS_RISK_FACTOR, pick(&mut rng, RISK_FACTORS));
        add(&mut g, &p, SYN_HAS_LOCATING_INFORMATION, pick(&mut rng, LOCATIONS));
        add(&mut g, &p, SYN_HAS_ENCOUNTER, enc.clone());
        add(&mut g, &p, SYN_HAS_OBSERVATION, obs.clone());
        add(&mut g, &enc, RDF_TYPE, iri(SYN_ENCOUNTER));
        add(&mut g, &enc, SYN_ENCOUNTER_TYPE, pick(&mut rng, ENCOUNTER_TYPES));
        add(&mut g, &enc, SYN_ENCOUNTER_DATE, date(&mut rng));
        add(&mut g, &obs, RDF_TYPE, iri(SYN_OBSERVATION));
        add(&mut g, &obs, SYN_OBSERVATION_CODE, pick(&mut rng, OBSERVATION_CODES));
        let value = format!("{}.{}", rng.random_range(35..=100u32), rng.random_range(0..10u32));
        add(&mut g, &obs, SYN_OBSERVATION_VALUE, Term::plain(value));
    }
    Ok(g)
}

/// The agreement organization `k` (zero-based) holds, if any.
fn dua_for(spec: &GeneratorSpec, k: usize) -> Option<DuaRecord> {
    if k >= spec.dua_count {
        return None;
    }
    let mut d = DuaRecord::new(format!("{SYN}dua_{:02}", k + 1), CUSTODIAN, organization_iri(k));
    let (categories, purpose): (&[&str], &str) = if k < spec.public_health_dua_count {
        (CUSTODIAN_INVENTORY, DUA_PUBLIC_HEALTH)
    } else if k < spec.patient_dua_count {
        (&[SYN_PATIENT], DUA_IRB_APPROVED_RESEARCH)
    } else {
        let (c, p) = &OTHER_GRANTS[(k - spec.patient_dua_count) % OTHER_GRANTS.len()];
        (std::slice::from_ref(c), p)
    };
    d.requested_data = categories.iter().map(|c| c.to_string()).collect();
    d.permitted_use_or_disclosure.insert(purpose.to_string());
    d.term = "12 months".into();
    d.termination_effect = "return or destroy all data".into();
    d.termination_cause = "material breach".into();
    d.storage = "encrypted at rest".into();
    d.access = "named users only".into();
    d.protections = "audit logging".into();
    Some(d)
}

/// Organizations, the custodian with its inventory, users and DUAs.
/// User `k` belongs to organization `k mod orgCount`.
pub fn generate_demographics(spec: &GeneratorSpec) -> Result<Graph, SpecError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(1);
    let mut g = Graph::new();
    let custodian = iri(CUSTODIAN);
    add(&mut g, &custodian, RDF_TYPE, iri(SYN_ORGANIZATION));
    add(&mut g, &custodian, RDFS_LABEL, Term::plain(CUSTODIAN_LABEL));
    for c in CUSTODIAN_INVENTORY {
        add(&mut g, &custodian, SYN_HAS_DATA_CATEGORY, iri(c));
    }
    for k in 0..spec.org_count {
        let o = iri(&organization_iri(k));
        add(&mut g, &o, RDF_TYPE, iri(SYN_ORGANIZATION));
        add(&mut g, &o, RDFS_LABEL, Term::plain(format!("Organization{:02}", k + 1)));
        if let Some(d) = dua_for(spec, k) {
            write_dua(&mut g, &d).expect("generated agreements are valid");
        }
    }
    let mut numbers: Vec<u32> = (100..1000).collect();
    numbers.shuffle(&mut rng);
    for (k, n) in numbers.into_iter().take(spec.user_count).enumerate() {
        let role = ROLES.choose(&mut rng).expect("non-empty");
        let label = format!("{role}_{n}");
        let u = iri(&format!("{SYN}{label}"));
        add(&mut g, &u, RDF_TYPE, iri(TST_USER));
        add(&mut g, &u, RDFS_LABEL, Term::plain(&label));
        add(
            &mut g,
            &u,
            SYN_IS_AFFILIATED_WITH,
            iri(&organization_iri(k % spec.org_count)),
        );
    }
    Ok(g)
}

/// Vocabulary, demographics and patients in one graph.
pub fn generate(spec: &GeneratorSpec) -> Result<Graph, SpecError> {
    let mut g = generate_demographics(spec)?;
    bootstrap_vocabulary(&mut g);
    g.extend_from(&generate_patients(spec)?);
    Ok(g)
}

/// Withdraws a category from the custodian: its inventory entry and every
/// triple about its instances. Returns the triples removed.
pub fn strip_category(g: &mut Graph, category: &str) -> usize {
    let mut removed = g.remove_matching(
        Some(&iri(CUSTODIAN)),
        Some(&iri(SYN_HAS_DATA_CATEGORY)),
        Some(&iri(category)),
    );
    for s in g.subjects(&iri(RDF_TYPE), &iri(category)) {
        removed += g.remove_subject(&s);
    }
    removed
}

/// Removes every triple using `property`. Returns the triples removed.
pub fn strip_properties(g: &mut Graph, property: &str) -> usize {
    g.remove_matching(None, Some(&iri(property)), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::validate_instances;
    use crate::query::{eval_select, Query};
    use crate::store::serialize_lines;
    use std::collections::{BTreeMap, BTreeSet};

    fn count(g: &Graph, query: &str) -> usize {
        eval_select(&Query::parse(query).unwrap(), g).unwrap().len()
    }

    #[test]
    fn patient_count_is_exact() {
        let g = generate_patients(&GeneratorSpec::new(1, 1000)).unwrap();
        assert_eq!(count(&g, "SELECT ?p WHERE { ?p a syn:Patient }"), 1000);
        assert_eq!(count(&g, "SELECT ?o WHERE { ?o a syn:Observation }"), 1000);
        assert_eq!(g.len(), 16 * 1000);
    }

    #[test]
    fn same_seed_same_bytes_other_seed_same_shape() {
        let a = serialize_lines(&generate(&GeneratorSpec::new(1, 200)).unwrap());
        let b = serialize_lines(&generate(&GeneratorSpec::new(1, 200)).unwrap());
        assert_eq!(a, b);
        let c = generate(&GeneratorSpec::new(2, 200)).unwrap();
        assert_ne!(a, serialize_lines(&c));
        assert_eq!(a.lines().count(), c.len());
    }

    #[test]
    fn every_patient_has_each_facet_once() {
        let g = generate_patients(&GeneratorSpec::new(5, 50)).unwrap();
        let props = crate::ontology::DataCategoryRef::new(SYN_PATIENT).unwrap().properties();
        for n in 1..=50 {
            let p = iri(&patient_iri(n));
            for prop in props {
                assert_eq!(g.objects(&p, &iri(prop)).len(), 1, "{prop} on {n}");
            }
        }
    }

    #[test]
    fn default_demographics_match_published_counts() {
        let g = generate_demographics(&GeneratorSpec::default()).unwrap();
        let orgs = count(&g, "SELECT ?o WHERE { ?o a syn:Organization }");
        assert_eq!(orgs, 11, "ten recipients plus the custodian");
        assert_eq!(count(&g, "SELECT ?u WHERE { ?u a tst:User }"), 100);
        assert_eq!(
            count(&g, "SELECT ?d WHERE { ?d dua:hasDataCustodian syn:data_custodian }"),
            7
        );
        let patient = "SELECT ?d WHERE { ?d dua:requestedData syn:Patient^^rdf:PlainLiteral }";
        assert_eq!(count(&g, patient), 4);
        let public = "SELECT ?d WHERE { ?d dua:requestedData syn:Patient^^rdf:PlainLiteral . ?d dua:hasPermittedUseOrDisclosure dua:PublicHealth }";
        assert_eq!(count(&g, public), 2);
    }

    #[test]
    fn users_are_spread_evenly_with_unique_labels() {
        let g = generate_demographics(&GeneratorSpec::default()).unwrap();
        let rows = eval_select(
            &Query::parse("SELECT ?u ?l ?o WHERE { ?u a tst:User . ?u rdfs:label ?l . ?u syn:isAffiliatedWith ?o }")
                .unwrap(),
            &g,
        )
        .unwrap();
        let mut per_org: BTreeMap<String, usize> = BTreeMap::new();
        let mut labels = BTreeSet::new();
        for r in 0..rows.len() {
            *per_org
                .entry(rows.get(r, "o").unwrap().lexical().to_string())
                .or_default() += 1;
            labels.insert(rows.get(r, "l").unwrap().lexical().to_string());
        }
        assert_eq!(per_org.len(), 10);
        assert!(per_org.values().all(|&n| n == 10));
        assert_eq!(labels.len(), 100);
    }

    #[test]
    fn generated_graph_validates() {
        assert!(validate_instances(&generate(&GeneratorSpec::new(3, 100)).unwrap()).is_empty());
        let odd = GeneratorSpec {
            org_count: 3,
            user_count: 7,
            dua_count: 3,
            patient_dua_count: 1,
            public_health_dua_count: 0,
            ..GeneratorSpec::new(9, 10)
        };
        assert!(validate_instances(&generate(&odd).unwrap()).is_empty());
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = GeneratorSpec {
            patient_dua_count: 8,
            ..GeneratorSpec::default()
        };
        assert!(bad.validate().is_err());
        assert!(GeneratorSpec::new(1, 0).validate().is_err());
    }

    #[test]
    fn stripping_keeps_the_corpora_aligned() {
        let spec = GeneratorSpec::new(4, 100);
        let full = generate(&spec).unwrap();
        let mut no_obs = full.clone();
        assert_eq!(strip_category(&mut no_obs, SYN_OBSERVATION), 1 + 3 * 100);
        assert_eq!(count(&no_obs, "SELECT ?o WHERE { ?o a syn:Observation }"), 0);
        let mut no_symptom = full.clone();
        assert_eq!(strip_properties(&mut no_symptom, SYN_HAS_SYMPTOM), 100);
        assert_eq!(no_symptom.len(), full.len() - 100);
    }
}
