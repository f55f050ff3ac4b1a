//! RDF terms and statements.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use super::StoreError;
use crate::ontology::vocab::{RDF_PLAIN_LITERAL, XSD_DECIMAL, XSD_DOUBLE, XSD_FLOAT};

/// An IRI, a plain literal, or a literal tagged with a datatype IRI.
///
/// Literals compare by `(lexical, datatype)`, never by value: `"1.0"` and
/// `"1.00"` are different terms.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Iri(Arc<str>),
    Plain(Arc<str>),
    Typed { lexical: Arc<str>, datatype: Arc<str> },
}

impl Term {
    pub fn iri(iri: impl AsRef<str>) -> Result<Self, StoreError> {
        let iri = iri.as_ref();
        check_iri(iri)?;
        Ok(Term::Iri(Arc::from(iri)))
    }

    pub fn plain(lexical: impl AsRef<str>) -> Self {
        Term::Plain(Arc::from(lexical.as_ref()))
    }

    /// Builds a typed literal. `rdf:PlainLiteral` collapses to a plain
    /// literal; float and decimal datatypes must carry a finite number.
    pub fn typed(lexical: impl AsRef<str>, datatype: impl AsRef<str>) -> Result<Self, StoreError> {
        let (lexical, datatype) = (lexical.as_ref(), datatype.as_ref());
        check_iri(datatype)?;
        if datatype == RDF_PLAIN_LITERAL {
            return Ok(Term::plain(lexical));
        }
        if matches!(datatype, XSD_FLOAT | XSD_DOUBLE | XSD_DECIMAL) && !is_finite_decimal(lexical) {
            return Err(StoreError::MalformedTerm(format!(
                "\"{lexical}\" is not a finite number for datatype <{datatype}>"
            )));
        }
        Ok(Term::Typed {
            lexical: Arc::from(lexical),
            datatype: Arc::from(datatype),
        })
    }

    /// IRI string or literal lexical form.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Iri(s) | Term::Plain(s) => s,
            Term::Typed { lexical, .. } => lexical,
        }
    }

    pub fn datatype(&self) -> Option<&str> {
        match self {
            Term::Typed { datatype, .. } => Some(datatype),
            _ => None,
        }
    }

    pub fn is_iri(&self) -> bool {
        matches!(self, Term::Iri(_))
    }

    pub fn as_iri(&self) -> Option<&str> {
        match self {
            Term::Iri(s) => Some(s),
            _ => None,
        }
    }

    fn kind_rank(&self) -> u8 {
        match self {
            Term::Iri(_) => 0,
            Term::Plain(_) => 1,
            Term::Typed { .. } => 2,
        }
    }

    /// Writes the term in line-format syntax.
    pub fn write_line_form(&self, out: &mut String) {
        match self {
            Term::Iri(iri) => {
                out.push('<');
                out.push_str(iri);
                out.push('>');
            }
            Term::Plain(lex) => write_quoted(lex, out),
            Term::Typed { lexical, datatype } => {
                write_quoted(lexical, out);
                out.push_str("^^<");
                out.push_str(datatype);
                out.push('>');
            }
        }
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        self.lexical()
            .cmp(other.lexical())
            .then_with(|| self.kind_rank().cmp(&other.kind_rank()))
            .then_with(|| self.datatype().cmp(&other.datatype()))
    }
}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        self.write_line_form(&mut s);
        f.write_str(&s)
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

pub(crate) fn check_iri(iri: &str) -> Result<(), StoreError> {
    if iri.is_empty() {
        return Err(StoreError::MalformedTerm("empty IRI".into()));
    }
    // ASCII fast path; the char scan below only runs when something is off
    if iri
        .bytes()
        .all(|b| b > b' ' && b < 0x7f && !matches!(b, b'<' | b'>' | b'"'))
    {
        return Ok(());
    }
    if let Some(c) = iri.chars().find(|c| c.is_whitespace() || matches!(c, '<' | '>' | '"')) {
        return Err(StoreError::MalformedTerm(format!(
            "IRI <{iri}> contains forbidden character {c:?}"
        )));
    }
    Ok(())
}

fn is_finite_decimal(s: &str) -> bool {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    !(int.is_empty() && frac.is_empty())
        && int.bytes().all(|b| b.is_ascii_digit())
        && frac.bytes().all(|b| b.is_ascii_digit())
}

fn write_quoted(lex: &str, out: &mut String) {
    out.push('"');
    for c in lex.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// A statement whose subject and predicate are IRIs.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    subject: Term,
    predicate: Term,
    object: Term,
}

impl Triple {
    pub fn new(subject: Term, predicate: Term, object: Term) -> Result<Self, StoreError> {
        if !subject.is_iri() {
            return Err(StoreError::MalformedTerm(format!("subject {subject} is not an IRI")));
        }
        if !predicate.is_iri() {
            return Err(StoreError::MalformedTerm(format!(
                "predicate {predicate} is not an IRI"
            )));
        }
        Ok(Triple {
            subject,
            predicate,
            object,
        })
    }

    /// Shorthand for an all-IRI statement.
    pub fn iris(s: &str, p: &str, o: &str) -> Result<Self, StoreError> {
        Triple::new(Term::iri(s)?, Term::iri(p)?, Term::iri(o)?)
    }

    pub fn subject(&self) -> &Term {
        &self.subject
    }

    pub fn predicate(&self) -> &Term {
        &self.predicate
    }

    pub fn object(&self) -> &Term {
        &self.object
    }

    pub fn into_parts(self) -> (Term, Term, Term) {
        (self.subject, self.predicate, self.object)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}

/// One position of a [`TriplePattern`].
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PatternTerm {
    Var(String),
    Term(Term),
}

impl PatternTerm {
    pub fn var(name: impl Into<String>) -> Self {
        PatternTerm::Var(name.into())
    }

    pub fn as_var(&self) -> Option<&str> {
        match self {
            PatternTerm::Var(v) => Some(v),
            PatternTerm::Term(_) => None,
        }
    }

    pub fn as_term(&self) -> Option<&Term> {
        match self {
            PatternTerm::Term(t) => Some(t),
            PatternTerm::Var(_) => None,
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Term(t)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "?{v}"),
            PatternTerm::Term(t) => write!(f, "{t}"),
        }
    }
}

/// A triple whose positions may be variables. Zero variables makes it a
/// membership test.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TriplePattern {
    pub subject: PatternTerm,
    pub predicate: PatternTerm,
    pub object: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        subject: impl Into<PatternTerm>,
        predicate: impl Into<PatternTerm>,
        object: impl Into<PatternTerm>,
    ) -> Self {
        TriplePattern {
            subject: subject.into(),
            predicate: predicate.into(),
            object: object.into(),
        }
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.subject, &self.predicate, &self.object]
    }

    pub fn variables(&self) -> impl Iterator<Item = &str> {
        self.positions().into_iter().filter_map(PatternTerm::as_var)
    }

    /// Whether `t` unifies with this pattern, honouring repeated variables.
    pub fn unifies(&self, t: &Triple) -> bool {
        let terms = [t.subject(), t.predicate(), t.object()];
        let mut seen: Vec<(&str, &Term)> = Vec::with_capacity(3);
        for (pos, term) in self.positions().into_iter().zip(terms) {
            match pos {
                PatternTerm::Term(c) => {
                    if c != term {
                        return false;
                    }
                }
                PatternTerm::Var(v) => match seen.iter().find(|(name, _)| name == v) {
                    Some((_, bound)) if *bound != term => return false,
                    Some(_) => {}
                    None => seen.push((v, term)),
                },
            }
        }
        true
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.subject, self.predicate, self.object)
    }
}
