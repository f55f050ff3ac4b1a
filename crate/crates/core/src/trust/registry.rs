use std::collections::BTreeMap;

use super::{init_principal, Score, ScoreName, TrustError, TrustRecord};
use crate::ontology::vocab::XSD_FLOAT;
use crate::ontology::{principals, PrincipalKind, PrincipalRef};
use crate::store::{Graph, Term, Triple};

/// The authoritative score table. The graph only holds a projection of it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TrustRegistry {
    records: BTreeMap<String, TrustRecord>,
}

fn iri(s: &str) -> Term {
    Term::iri(s).expect("valid IRI")
}

impl TrustRegistry {
    pub fn new() -> Self {
        TrustRegistry::default()
    }

    /// Initializes every user and organization in the graph, then adopts
    /// score triples already present in it (out-of-range values are ignored).
    pub fn from_graph(graph: &Graph) -> Self {
        let mut reg = TrustRegistry::new();
        for p in principals(graph) {
            let subject = iri(&p.iri);
            let mut rec = init_principal(p);
            for name in ScoreName::ALL {
                let adopted = graph
                    .objects(&subject, &iri(name.predicate()))
                    .iter()
                    .filter(|t| !t.is_iri())
                    .filter_map(|t| t.lexical().parse::<Score>().ok())
                    .min();
                if let (Some(v), Some(cell)) = (adopted, rec.cell(name)) {
                    match name {
                        ScoreName::Behavior => rec.behavior = Some(super::ScoreCell { value: v, ..cell }),
                        ScoreName::Identity => rec.identity.value = v,
                        ScoreName::Credibility => rec.credibility = Some(super::ScoreCell { value: v, ..cell }),
                    }
                }
            }
            reg.records.insert(rec.iri().to_string(), rec);
        }
        reg
    }

    pub fn register(&mut self, principal: PrincipalRef) -> Result<&TrustRecord, TrustError> {
        use std::collections::btree_map::Entry;
        match self.records.entry(principal.iri.clone()) {
            Entry::Occupied(_) => Err(TrustError::Conflict(principal.iri)),
            Entry::Vacant(v) => Ok(v.insert(init_principal(principal))),
        }
    }

    pub fn get(&self, principal: &str) -> Option<&TrustRecord> {
        self.records.get(principal)
    }

    pub fn get_mut(&mut self, principal: &str) -> Option<&mut TrustRecord> {
        self.records.get_mut(principal)
    }

    pub fn require(&self, principal: &str) -> Result<&TrustRecord, TrustError> {
        self.get(principal)
            .ok_or_else(|| TrustError::NotFound(principal.to_string()))
    }

    pub fn require_mut(&mut self, principal: &str) -> Result<&mut TrustRecord, TrustError> {
        self.records
            .get_mut(principal)
            .ok_or_else(|| TrustError::NotFound(principal.to_string()))
    }

    /// Two distinct records mutably.
    pub fn pair_mut(&mut self, a: &str, b: &str) -> Result<(&mut TrustRecord, &mut TrustRecord), TrustError> {
        if a == b {
            return Err(TrustError::State(format!("<{a}> paired with itself")));
        }
        self.require(a)?;
        self.require(b)?;
        let mut iter = self
            .records
            .iter_mut()
            .filter(|(k, _)| k.as_str() == a || k.as_str() == b);
        let (k1, r1) = iter.next().expect("present");
        let (_, r2) = iter.next().expect("present");
        Ok(if k1 == a { (r1, r2) } else { (r2, r1) })
    }

    pub fn iter(&self) -> impl Iterator<Item = &TrustRecord> {
        self.records.values()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Applies a replica's score. An unknown principal is registered first.
    pub fn merge_remote(
        &mut self,
        principal: &str,
        kind: PrincipalKind,
        name: ScoreName,
        value: Score,
        version: u64,
    ) -> Result<bool, TrustError> {
        if !self.records.contains_key(principal) {
            Term::iri(principal).map_err(|e| TrustError::State(e.to_string()))?;
            self.register(PrincipalRef {
                iri: principal.to_string(),
                kind,
                label: String::new(),
                affiliation: None,
            })?;
        }
        let rec = self.require_mut(principal)?;
        if rec.kind() != kind {
            return Err(TrustError::Kind {
                iri: principal.to_string(),
                expected: rec.kind(),
                actual: kind,
            });
        }
        Ok(rec.merge(name, value, version))
    }

    /// Rewrites the principal's score triples to match the registry.
    pub fn project(&self, principal: &str, graph: &mut Graph) -> Result<(), TrustError> {
        let rec = self.require(principal)?;
        let s = iri(principal);
        for name in ScoreName::ALL {
            let p = iri(name.predicate());
            graph.remove_matching(Some(&s), Some(&p), None);
            if let Some(v) = rec.score(name) {
                let lit = Term::typed(v.to_string(), XSD_FLOAT).expect("canonical decimal");
                graph.insert(Triple::new(s.clone(), p, lit).expect("valid triple"));
            }
        }
        Ok(())
    }

    pub fn project_all(&self, graph: &mut Graph) {
        for k in self.records.keys() {
            self.project(k, graph).expect("registered");
        }
    }

    /// Whether the graph's score triples equal the registry, for every principal.
    pub fn projection_consistent(&self, graph: &Graph) -> bool {
        self.records.values().all(|rec| {
            let s = iri(rec.iri());
            ScoreName::ALL.into_iter().all(|name| {
                let found = graph.objects(&s, &iri(name.predicate()));
                let expected: Vec<Term> = rec
                    .score(name)
                    .map(|v| Term::typed(v.to_string(), XSD_FLOAT).expect("canonical"))
                    .into_iter()
                    .collect();
                found == expected
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::load_lines;
    use crate::trust::{apply_user_penalty, PenaltyConfig, PenaltyKind};

    const U: &str = "http://example.org/syn#u";
    const O: &str = "http://example.org/syn#o";

    fn graph() -> Graph {
        let mut g = Graph::new();
        let text = "syn:u rdf:type tst:User .\nsyn:u rdfs:label \"research_scientist_731\" .\nsyn:u syn:isAffiliatedWith syn:o .\nsyn:o rdf:type syn:Organization .\nsyn:u tst:behaviorTrust \"0.75\"^^xsd:float .\n";
        load_lines(&mut g, text.as_bytes()).unwrap();
        g
    }

    #[test]
    fn from_graph_initializes_and_adopts_existing_scores() {
        let reg = TrustRegistry::from_graph(&graph());
        assert_eq!(reg.len(), 2);
        assert_eq!(
            reg.get(U).unwrap().score(ScoreName::Behavior).unwrap().to_string(),
            "0.75"
        );
        assert_eq!(reg.get(O).unwrap().score(ScoreName::Credibility), Some(Score::ONE));
    }

    #[test]
    fn duplicate_registration_conflicts() {
        let mut reg = TrustRegistry::from_graph(&graph());
        let again = reg.get(U).unwrap().principal.clone();
        assert_eq!(reg.register(again).unwrap_err(), TrustError::Conflict(U.into()));
    }

    #[test]
    fn projection_tracks_mutations() {
        let mut g = graph();
        let mut reg = TrustRegistry::from_graph(&g);
        reg.project_all(&mut g);
        assert!(reg.projection_consistent(&g));
        apply_user_penalty(
            reg.get_mut(U).unwrap(),
            PenaltyKind::DuaViolation,
            &PenaltyConfig::default(),
        )
        .unwrap();
        assert!(!reg.projection_consistent(&g));
        reg.project(U, &mut g).unwrap();
        assert!(reg.projection_consistent(&g));
        let lit = g.objects(&iri(U), &iri(ScoreName::Behavior.predicate()));
        assert_eq!(lit, vec![Term::typed("0.74", XSD_FLOAT).unwrap()]);
    }

    #[test]
    fn pair_mut_returns_in_argument_order() {
        let mut reg = TrustRegistry::from_graph(&graph());
        let (a, b) = reg.pair_mut(U, O).unwrap();
        assert_eq!((a.iri(), b.iri()), (U, O));
        let (a, b) = reg.pair_mut(O, U).unwrap();
        assert_eq!((a.iri(), b.iri()), (O, U));
        assert!(reg.pair_mut(U, U).is_err());
    }

    #[test]
    fn merge_remote_registers_unknown_and_checks_kind() {
        let mut reg = TrustRegistry::new();
        let half = Score::from_units(5000).unwrap();
        assert!(reg
            .merge_remote(O, PrincipalKind::Organization, ScoreName::Credibility, half, 3)
            .unwrap());
        assert_eq!(reg.get(O).unwrap().score(ScoreName::Credibility), Some(half));
        assert!(reg
            .merge_remote(O, PrincipalKind::User, ScoreName::Behavior, half, 9)
            .is_err());
    }
}
