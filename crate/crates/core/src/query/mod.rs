//! The SPARQL subset the compliance policies are written in.
//!
//! Supported: `PREFIX` declarations; `ASK`, `SELECT` (explicit variables or
//! `*`) and `DELETE {..} INSERT {..} WHERE {..}` forms; basic graph patterns
//! of `.`-terminated triples; `FILTER(STR(?v) IN (...))` and
//! `FILTER(... = ...)`. Anything else is rejected as an unsupported feature
//! rather than silently misread.

mod eval;
mod lexer;
mod parser;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use eval::{eval_ask, eval_select, eval_update, UpdateSummary};

use crate::store::{Namespaces, Term, TriplePattern};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("undeclared prefix `{prefix}:` at line {line}, column {column}")]
    UndeclaredPrefix { prefix: String, line: usize, column: usize },
    #[error("unsupported feature `{feature}` at line {line}, column {column}")]
    Unsupported {
        feature: String,
        line: usize,
        column: usize,
    },
    #[error("variable ?{0} is not bound by the graph pattern")]
    UnboundVariable(String),
    #[error("expected a {expected} query, got {actual}")]
    WrongForm { expected: QueryForm, actual: QueryForm },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryForm {
    Ask,
    Select,
    Update,
}

impl std::fmt::Display for QueryForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            QueryForm::Ask => "ASK",
            QueryForm::Select => "SELECT",
            QueryForm::Update => "update",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterOp {
    In,
    Equals,
}

/// Left side of a filter: a variable, optionally wrapped in `STR()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterOperand {
    Var(String),
    Str(String),
}

impl FilterOperand {
    pub fn variable(&self) -> &str {
        match self {
            FilterOperand::Var(v) | FilterOperand::Str(v) => v,
        }
    }
}

/// A ground right-hand value, optionally wrapped in `STR()`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FilterValue {
    Term(Term),
    Str(Term),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilterExpr {
    pub op: FilterOp,
    pub lhs: FilterOperand,
    pub rhs: Vec<FilterValue>,
}

/// A parsed query or update.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub form: QueryForm,
    /// Prefixes declared in the prologue (not the pre-registered ones).
    pub prologue: Namespaces,
    pub bgp: Vec<TriplePattern>,
    pub filters: Vec<FilterExpr>,
    pub projection: Vec<String>,
    pub delete_template: Vec<TriplePattern>,
    pub insert_template: Vec<TriplePattern>,
}

impl Query {
    /// Parses with the default pre-registered prefixes.
    pub fn parse(text: &str) -> Result<Self, QueryError> {
        Query::parse_with(text, &Namespaces::default())
    }

    /// Parses with `registered` prefixes available in addition to any the
    /// query declares itself.
    pub fn parse_with(text: &str, registered: &Namespaces) -> Result<Self, QueryError> {
        parser::parse(text, registered)
    }

    /// Variables of the graph pattern in order of first appearance.
    pub fn bgp_variables(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        self.bgp
            .iter()
            .flat_map(TriplePattern::variables)
            .filter(|v| seen.insert(v.to_string()))
            .map(str::to_string)
            .collect()
    }

    /// The same pattern and filters as a `SELECT *`.
    pub fn to_select_all(&self) -> Query {
        Query {
            form: QueryForm::Select,
            prologue: self.prologue.clone(),
            bgp: self.bgp.clone(),
            filters: self.filters.clone(),
            projection: self.bgp_variables(),
            delete_template: Vec::new(),
            insert_template: Vec::new(),
        }
    }

    /// Every IRI mentioned in the pattern, filters or templates.
    pub fn iris(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let patterns = self
            .bgp
            .iter()
            .chain(&self.delete_template)
            .chain(&self.insert_template);
        for p in patterns {
            for pos in p.positions() {
                if let Some(iri) = pos.as_term().and_then(Term::as_iri) {
                    out.insert(iri.to_string());
                }
            }
        }
        for f in &self.filters {
            for v in &f.rhs {
                let (FilterValue::Term(t) | FilterValue::Str(t)) = v;
                if let Some(iri) = t.as_iri() {
                    out.insert(iri.to_string());
                }
            }
        }
        out
    }
}

/// Solutions of a `SELECT`, one row per solution, columns in projection
/// order, rows sorted by their terms. Cells live in one row-major buffer so
/// that dropping a large result is a single free.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BindingSet {
    variables: Vec<String>,
    cells: Vec<Term>,
    len: usize,
}

impl BindingSet {
    pub fn new(variables: Vec<String>) -> BindingSet {
        BindingSet {
            variables,
            cells: Vec::new(),
            len: 0,
        }
    }

    /// Panics if the row width differs from the variable count.
    pub fn push_row(&mut self, row: impl IntoIterator<Item = Term>) {
        let before = self.cells.len();
        self.cells.extend(row);
        assert_eq!(self.cells.len() - before, self.variables.len(), "row width");
        self.len += 1;
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, i: usize) -> Option<&[Term]> {
        let w = self.variables.len();
        (i < self.len).then(|| &self.cells[i * w..(i + 1) * w])
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[Term]> + '_ {
        (0..self.len).map(|i| self.row(i).expect("in range"))
    }

    pub fn column(&self, var: &str) -> Option<usize> {
        self.variables.iter().position(|v| v == var)
    }

    pub fn get(&self, row: usize, var: &str) -> Option<&Term> {
        self.row(row)?.get(self.column(var)?)
    }

    pub(crate) fn sort_rows(&mut self) {
        let w = self.variables.len();
        if w == 0 || self.len < 2 {
            return;
        }
        let mut order: Vec<usize> = (0..self.len).collect();
        order.sort_unstable_by(|&a, &b| self.cells[a * w..(a + 1) * w].cmp(&self.cells[b * w..(b + 1) * w]));
        let mut cells = Vec::with_capacity(self.cells.len());
        for i in order {
            cells.extend_from_slice(&self.cells[i * w..(i + 1) * w]);
        }
        self.cells = cells;
    }

    /// Tab-separated rows, terms in line-format syntax, header first.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = self.variables.iter().map(|v| format!("?{v}")).collect();
        out.push_str(&header.join("\t"));
        out.push('\n');
        for row in self.rows() {
            let cells: Vec<String> = row.iter().map(Term::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct BindingSetWire {
    variables: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Serialize for BindingSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BindingSetWire {
            variables: self.variables.clone(),
            rows: self.rows().map(|r| r.iter().map(Term::to_string).collect()).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for BindingSet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let wire = BindingSetWire::deserialize(d)?;
        let mut out = BindingSet::new(wire.variables);
        for r in &wire.rows {
            if r.len() != out.variables.len() {
                return Err(serde::de::Error::custom(format!(
                    "row has {} cells for {} variables",
                    r.len(),
                    out.variables.len()
                )));
            }
            let row = r
                .iter()
                .map(|cell| Term::parse_line_form(cell).map_err(serde::de::Error::custom))
                .collect::<Result<Vec<_>, _>>()?;
            out.push_row(row);
        }
        Ok(out)
    }
}
