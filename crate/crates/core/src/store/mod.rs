//! In-memory triple store.
//!
//! Terms are interned into a dictionary; each triple is kept in three ordered
//! index sets keyed by `(s, p, o)`, `(p, o, s)` and `(o, s, p)` so that any
//! pattern with at least one ground position resolves to a range scan.

mod lines;
mod term;

use std::collections::{BTreeMap, BTreeSet};
use std::ops::RangeInclusive;

use rustc_hash::FxHashMap;
use thiserror::Error;

pub use lines::{load_lines, serialize_lines};
pub use term::{PatternTerm, Term, Triple, TriplePattern};

use crate::ontology::vocab;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("malformed term: {0}")]
    MalformedTerm(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("line {line}, column {column}: unknown prefix `{prefix}:`")]
    UnknownPrefix { line: usize, column: usize, prefix: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Interned term identifier, local to one [`Graph`].
pub type TermId = u32;

/// Prefix to namespace IRI map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Namespaces {
    map: BTreeMap<String, String>,
}

impl Namespaces {
    pub fn empty() -> Self {
        Namespaces { map: BTreeMap::new() }
    }

    pub fn insert(&mut self, prefix: impl Into<String>, iri: impl Into<String>) {
        self.map.insert(prefix.into(), iri.into());
    }

    pub fn get(&self, prefix: &str) -> Option<&str> {
        self.map.get(prefix).map(String::as_str)
    }

    pub fn expand(&self, prefix: &str, local: &str) -> Option<String> {
        self.get(prefix).map(|ns| format!("{ns}{local}"))
    }

    /// Shortest `prefix:local` spelling of `iri`, if some namespace covers it
    /// and the local part is a plain name.
    pub fn compact(&self, iri: &str) -> Option<String> {
        self.map
            .iter()
            .filter_map(|(prefix, ns)| {
                let local = iri.strip_prefix(ns.as_str())?;
                let plain = !local.is_empty() && local.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-');
                plain.then(|| format!("{prefix}:{local}"))
            })
            .min_by_key(String::len)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.map.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

impl Default for Namespaces {
    /// The prefixes the policy listings rely on: syn, dua, tst, rdf, rdfs,
    /// xsd, plus owl for vocabulary declarations.
    fn default() -> Self {
        let mut ns = Namespaces::empty();
        for (p, iri) in vocab::PREFIXES {
            ns.insert(*p, *iri);
        }
        ns
    }
}

#[derive(Clone, Debug, Default)]
struct Dictionary {
    terms: Vec<Term>,
    // id_of runs several times per request; SipHash was a measurable share of it
    ids: FxHashMap<Term, TermId>,
}

impl Dictionary {
    fn intern(&mut self, term: Term) -> TermId {
        if let Some(&id) = self.ids.get(&term) {
            return id;
        }
        let id = TermId::try_from(self.terms.len()).expect("term dictionary overflow");
        self.terms.push(term.clone());
        self.ids.insert(term, id);
        id
    }
}

type Key = [TermId; 3];

/// A set of triples with SPO/POS/OSP indexes.
#[derive(Clone, Debug)]
pub struct Graph {
    dict: Dictionary,
    spo: BTreeSet<Key>,
    pos: BTreeSet<Key>,
    osp: BTreeSet<Key>,
    namespaces: Namespaces,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::new()
    }
}

impl PartialEq for Graph {
    /// Content equality: same triple set, regardless of interning order.
    fn eq(&self, other: &Self) -> bool {
        self.len() == other.len() && self.sorted_triples() == other.sorted_triples()
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::with_namespaces(Namespaces::default())
    }

    pub fn with_namespaces(namespaces: Namespaces) -> Self {
        Graph {
            dict: Dictionary::default(),
            spo: BTreeSet::new(),
            pos: BTreeSet::new(),
            osp: BTreeSet::new(),
            namespaces,
        }
    }

    pub fn namespaces(&self) -> &Namespaces {
        &self.namespaces
    }

    pub fn namespaces_mut(&mut self) -> &mut Namespaces {
        &mut self.namespaces
    }

    pub fn len(&self) -> usize {
        self.spo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spo.is_empty()
    }

    /// Adds `t`; returns false if it was already present.
    pub fn insert(&mut self, t: Triple) -> bool {
        let (s, p, o) = t.into_parts();
        let key = [self.dict.intern(s), self.dict.intern(p), self.dict.intern(o)];
        self.insert_ids(key)
    }

    /// Builds and inserts a triple, rejecting non-IRI subjects and predicates.
    pub fn insert_terms(&mut self, s: Term, p: Term, o: Term) -> Result<bool, StoreError> {
        Ok(self.insert(Triple::new(s, p, o)?))
    }

    fn insert_ids(&mut self, [s, p, o]: Key) -> bool {
        if !self.spo.insert([s, p, o]) {
            return false;
        }
        self.pos.insert([p, o, s]);
        self.osp.insert([o, s, p]);
        true
    }

    /// Removes `t`; returns true if it was present.
    pub fn remove(&mut self, t: &Triple) -> bool {
        let ids = [t.subject(), t.predicate(), t.object()].map(|term| self.id_of(term));
        match ids {
            [Some(s), Some(p), Some(o)] => self.remove_ids([s, p, o]),
            _ => false,
        }
    }

    pub(crate) fn remove_ids(&mut self, [s, p, o]: Key) -> bool {
        if !self.spo.remove(&[s, p, o]) {
            return false;
        }
        self.pos.remove(&[p, o, s]);
        self.osp.remove(&[o, s, p]);
        true
    }

    pub fn contains(&self, t: &Triple) -> bool {
        let ids = [t.subject(), t.predicate(), t.object()].map(|term| self.id_of(term));
        match ids {
            [Some(s), Some(p), Some(o)] => self.spo.contains(&[s, p, o]),
            _ => false,
        }
    }

    pub fn id_of(&self, term: &Term) -> Option<TermId> {
        self.dict.ids.get(term).copied()
    }

    pub fn term(&self, id: TermId) -> &Term {
        &self.dict.terms[id as usize]
    }

    /// Triples unifying with `pattern`, sorted lexicographically by the
    /// lexical forms of subject, predicate, then object.
    pub fn matches(&self, pattern: &TriplePattern) -> Vec<Triple> {
        let mut ground = [None; 3];
        for (slot, pos) in ground.iter_mut().zip(pattern.positions()) {
            if let PatternTerm::Term(t) = pos {
                match self.id_of(t) {
                    Some(id) => *slot = Some(id),
                    None => return Vec::new(),
                }
            }
        }
        let mut out: Vec<Triple> = self
            .scan(ground[0], ground[1], ground[2])
            .map(|k| self.triple(k))
            .filter(|t| pattern.unifies(t))
            .collect();
        out.sort();
        out
    }

    /// Number of triples matching the ground positions, stopping at `cap`.
    pub(crate) fn count_capped(&self, s: Option<TermId>, p: Option<TermId>, o: Option<TermId>, cap: usize) -> usize {
        self.scan(s, p, o).take(cap).count()
    }

    /// Index scan over ground positions; yields keys in `[s, p, o]` order.
    pub(crate) fn scan(
        &self,
        s: Option<TermId>,
        p: Option<TermId>,
        o: Option<TermId>,
    ) -> Box<dyn Iterator<Item = Key> + '_> {
        match (s, p, o) {
            (Some(s), Some(p), Some(o)) => Box::new(self.spo.get(&[s, p, o]).copied().into_iter()),
            (Some(s), Some(p), None) => Box::new(self.spo.range(prefix2(s, p)).copied()),
            (Some(s), None, Some(o)) => Box::new(self.osp.range(prefix2(o, s)).map(|&[o, s, p]| [s, p, o])),
            (Some(s), None, None) => Box::new(self.spo.range(prefix1(s)).copied()),
            (None, Some(p), Some(o)) => Box::new(self.pos.range(prefix2(p, o)).map(|&[p, o, s]| [s, p, o])),
            (None, Some(p), None) => Box::new(self.pos.range(prefix1(p)).map(|&[p, o, s]| [s, p, o])),
            (None, None, Some(o)) => Box::new(self.osp.range(prefix1(o)).map(|&[o, s, p]| [s, p, o])),
            (None, None, None) => Box::new(self.spo.iter().copied()),
        }
    }

    fn triple(&self, [s, p, o]: Key) -> Triple {
        Triple::new(self.term(s).clone(), self.term(p).clone(), self.term(o).clone())
            .expect("stored triples are well-formed")
    }

    /// All triples in canonical (sorted) order.
    pub fn sorted_triples(&self) -> Vec<Triple> {
        let mut all: Vec<Triple> = self.spo.iter().map(|&k| self.triple(k)).collect();
        all.sort();
        all
    }

    pub fn iter(&self) -> impl Iterator<Item = Triple> + '_ {
        self.spo.iter().map(|&k| self.triple(k))
    }

    /// Copies every triple of `other` into this graph; returns how many were new.
    pub fn extend_from(&mut self, other: &Graph) -> usize {
        other.iter().filter(|t| self.insert(t.clone())).count()
    }

    /// Objects of `(subject, predicate, ?)`, unsorted.
    pub fn objects(&self, subject: &Term, predicate: &Term) -> Vec<Term> {
        match (self.id_of(subject), self.id_of(predicate)) {
            (Some(s), Some(p)) => self
                .scan(Some(s), Some(p), None)
                .map(|[_, _, o]| self.term(o).clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Subjects of `(?, predicate, object)`, unsorted.
    pub fn subjects(&self, predicate: &Term, object: &Term) -> Vec<Term> {
        match (self.id_of(predicate), self.id_of(object)) {
            (Some(p), Some(o)) => self
                .scan(None, Some(p), Some(o))
                .map(|[s, _, _]| self.term(s).clone())
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Removes every triple with the given subject; returns how many went.
    pub fn remove_subject(&mut self, subject: &Term) -> usize {
        let Some(s) = self.id_of(subject) else { return 0 };
        let keys: Vec<Key> = self.scan(Some(s), None, None).collect();
        keys.into_iter().filter(|&k| self.remove_ids(k)).count()
    }

    /// Removes every triple matching the given ground positions.
    pub fn remove_matching(
        &mut self,
        subject: Option<&Term>,
        predicate: Option<&Term>,
        object: Option<&Term>,
    ) -> usize {
        let mut ids = [None; 3];
        for (slot, term) in ids.iter_mut().zip([subject, predicate, object]) {
            if let Some(t) = term {
                match self.id_of(t) {
                    Some(id) => *slot = Some(id),
                    None => return 0,
                }
            }
        }
        let keys: Vec<Key> = self.scan(ids[0], ids[1], ids[2]).collect();
        keys.into_iter().filter(|&k| self.remove_ids(k)).count()
    }

    #[cfg(test)]
    fn indexes_consistent(&self) -> bool {
        let from_pos: BTreeSet<Key> = self.pos.iter().map(|&[p, o, s]| [s, p, o]).collect();
        let from_osp: BTreeSet<Key> = self.osp.iter().map(|&[o, s, p]| [s, p, o]).collect();
        from_pos == self.spo && from_osp == self.spo
    }
}

fn prefix1(a: TermId) -> RangeInclusive<Key> {
    [a, 0, 0]..=[a, TermId::MAX, TermId::MAX]
}

fn prefix2(a: TermId, b: TermId) -> RangeInclusive<Key> {
    [a, b, 0]..=[a, b, TermId::MAX]
}
