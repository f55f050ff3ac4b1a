use std::collections::BTreeSet;

use super::lexer::{tokenize, Tok, Token};
use super::{FilterExpr, FilterOp, FilterOperand, FilterValue, Query, QueryError, QueryForm};
use crate::ontology::vocab::{RDF_PLAIN_LITERAL, RDF_TYPE, XSD_DECIMAL, XSD_INTEGER};
use crate::store::{Namespaces, PatternTerm, Term, TriplePattern};

/// Keywords that name SPARQL features this subset does not implement.
const UNSUPPORTED_KEYWORDS: &[&str] = &[
    "OPTIONAL",
    "UNION",
    "MINUS",
    "GRAPH",
    "SERVICE",
    "BIND",
    "VALUES",
    "ORDER",
    "GROUP",
    "HAVING",
    "LIMIT",
    "OFFSET",
    "DISTINCT",
    "REDUCED",
    "CONSTRUCT",
    "DESCRIBE",
    "FROM",
    "NAMED",
    "BASE",
    "LOAD",
    "CLEAR",
    "DROP",
    "CREATE",
    "ADD",
    "MOVE",
    "COPY",
    "WITH",
    "USING",
    "DATA",
    "EXISTS",
    "NOT",
];

pub(super) fn parse(text: &str, registered: &Namespaces) -> Result<Query, QueryError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        registered,
        prologue: Namespaces::empty(),
        end: end_position(text),
    };
    let query = p.query()?;
    check_scope(&query)?;
    Ok(query)
}

fn end_position(text: &str) -> (usize, usize) {
    let line = text.matches('\n').count() + 1;
    let column = text.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn check_scope(q: &Query) -> Result<(), QueryError> {
    let bound: BTreeSet<&str> = q.bgp.iter().flat_map(TriplePattern::variables).collect();
    let used = q
        .projection
        .iter()
        .map(String::as_str)
        .chain(q.filters.iter().map(|f| f.lhs.variable()))
        .chain(
            q.delete_template
                .iter()
                .chain(&q.insert_template)
                .flat_map(TriplePattern::variables),
        );
    for v in used {
        if !bound.contains(v) {
            return Err(QueryError::UnboundVariable(v.to_string()));
        }
    }
    Ok(())
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    registered: &'a Namespaces,
    prologue: Namespaces,
    end: (usize, usize),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, off: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + off).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens.get(self.pos).map_or(self.end, |t| (t.line, t.column))
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn syntax(&self, message: impl Into<String>) -> QueryError {
        let (line, column) = self.here();
        QueryError::Syntax {
            line,
            column,
            message: message.into(),
        }
    }

    fn unsupported(&self, feature: impl Into<String>) -> QueryError {
        let (line, column) = self.here();
        QueryError::Unsupported {
            feature: feature.into(),
            line,
            column,
        }
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        let hit = self.is_keyword(kw);
        if hit {
            self.pos += 1;
        }
        hit
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), QueryError> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    /// Error for an unexpected token: unsupported constructs are named,
    /// everything else is a syntax error.
    fn unexpected(&self, expected: &str) -> QueryError {
        match self.peek() {
            None => self.syntax(format!("expected {expected}, found end of input")),
            Some(Tok::Word(w)) => {
                let upper = w.to_ascii_uppercase();
                if UNSUPPORTED_KEYWORDS.contains(&upper.as_str()) {
                    self.unsupported(upper)
                } else {
                    self.syntax(format!("expected {expected}, found `{w}`"))
                }
            }
            Some(Tok::Semicolon) => self.unsupported("predicate-object list `;`"),
            Some(Tok::Comma) => self.unsupported("object list `,`"),
            Some(Tok::BlankNode | Tok::LBracket) => self.unsupported("blank node"),
            Some(Tok::LangTag(_)) => self.unsupported("language tag"),
            Some(Tok::Op(op)) => self.unsupported(format!("operator `{op}`")),
            Some(t) => self.syntax(format!("expected {expected}, found {}", describe(t))),
        }
    }

    fn query(&mut self) -> Result<Query, QueryError> {
        while self.eat_keyword("PREFIX") {
            self.prefix_decl()?;
        }
        let mut q = Query {
            form: QueryForm::Ask,
            prologue: Namespaces::empty(),
            bgp: Vec::new(),
            filters: Vec::new(),
            projection: Vec::new(),
            delete_template: Vec::new(),
            insert_template: Vec::new(),
        };
        if self.eat_keyword("ASK") {
            self.eat_keyword("WHERE");
        } else if self.eat_keyword("SELECT") {
            q.form = QueryForm::Select;
            q.projection = self.projection()?;
            self.eat_keyword("WHERE");
        } else if self.is_keyword("DELETE") || self.is_keyword("INSERT") {
            q.form = QueryForm::Update;
            if self.eat_keyword("DELETE") {
                if self.is_keyword("WHERE") {
                    return Err(self.unsupported("DELETE WHERE"));
                }
                q.delete_template = self.template()?;
            }
            if self.eat_keyword("INSERT") {
                q.insert_template = self.template()?;
            }
            if !self.eat_keyword("WHERE") {
                return Err(self.unexpected("`WHERE`"));
            }
        } else {
            return Err(self.unexpected("`ASK`, `SELECT`, `DELETE` or `INSERT`"));
        }
        let (bgp, filters) = self.group()?;
        q.bgp = bgp;
        q.filters = filters;
        if self.peek().is_some() {
            return Err(self.unexpected("end of query"));
        }
        if q.form == QueryForm::Select && q.projection.is_empty() {
            q.projection = q.bgp_variables();
        }
        q.prologue = std::mem::replace(&mut self.prologue, Namespaces::empty());
        Ok(q)
    }

    fn prefix_decl(&mut self) -> Result<(), QueryError> {
        let prefix = match self.peek() {
            Some(Tok::PName { prefix, local }) if local.is_empty() => prefix.clone(),
            _ => return Err(self.unexpected("a prefix name ending in `:`")),
        };
        self.pos += 1;
        match self.next() {
            Some(Tok::IriRef(iri)) => {
                self.prologue.insert(prefix, iri);
                Ok(())
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected("`<iri>`"))
            }
        }
    }

    /// Explicit variables, or empty for `*`.
    fn projection(&mut self) -> Result<Vec<String>, QueryError> {
        if self.peek() == Some(&Tok::Star) {
            self.pos += 1;
            return Ok(Vec::new());
        }
        let mut vars = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Var(v)) => {
                    vars.push(v.clone());
                    self.pos += 1;
                }
                Some(Tok::LParen) => return Err(self.unsupported("projection expression")),
                _ => break,
            }
        }
        if vars.is_empty() {
            return Err(self.unexpected("`*` or a variable"));
        }
        Ok(vars)
    }

    fn template(&mut self) -> Result<Vec<TriplePattern>, QueryError> {
        if self.is_keyword("DATA") {
            return Err(self.unsupported("DATA"));
        }
        let (patterns, filters) = self.group()?;
        if !filters.is_empty() {
            return Err(self.syntax("FILTER is not allowed in an update template"));
        }
        Ok(patterns)
    }

    fn group(&mut self) -> Result<(Vec<TriplePattern>, Vec<FilterExpr>), QueryError> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut patterns = Vec::new();
        let mut filters = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::RBrace) => {
                    self.pos += 1;
                    return Ok((patterns, filters));
                }
                Some(Tok::LBrace) => return Err(self.unsupported("nested group pattern")),
                Some(Tok::Word(w)) if w.eq_ignore_ascii_case("FILTER") => {
                    self.pos += 1;
                    filters.push(self.filter()?);
                    if self.peek() == Some(&Tok::Dot) {
                        self.pos += 1;
                    }
                }
                _ => {
                    patterns.push(self.triple()?);
                    match self.peek() {
                        Some(Tok::Dot) => self.pos += 1,
                        Some(Tok::RBrace) => {}
                        Some(Tok::Word(w)) if w.eq_ignore_ascii_case("FILTER") => {}
                        _ => return Err(self.unexpected("`.` or `}`")),
                    }
                }
            }
        }
    }

    fn triple(&mut self) -> Result<TriplePattern, QueryError> {
        let s = self.pattern_term(false)?;
        if matches!(self.peek(), Some(Tok::Op(op)) if op == "^" || op == "!") || self.peek() == Some(&Tok::LParen) {
            return Err(self.unsupported("property path"));
        }
        let p = self.pattern_term(true)?;
        match self.peek() {
            Some(Tok::Op(op)) if matches!(op.as_str(), "/" | "|" | "+") => {
                return Err(self.unsupported("property path"))
            }
            Some(Tok::Star) => return Err(self.unsupported("property path")),
            Some(Tok::Var(_)) if is_path_modifier(&self.tokens, self.pos) => {
                return Err(self.unsupported("property path"))
            }
            _ => {}
        }
        let o = self.pattern_term(false)?;
        Ok(TriplePattern {
            subject: s,
            predicate: p,
            object: o,
        })
    }

    fn pattern_term(&mut self, predicate: bool) -> Result<PatternTerm, QueryError> {
        if let Some(Tok::Var(v)) = self.peek() {
            let v = v.clone();
            self.pos += 1;
            return Ok(PatternTerm::Var(v));
        }
        if predicate && matches!(self.peek(), Some(Tok::Word(w)) if w == "a") {
            self.pos += 1;
            return Ok(PatternTerm::Term(Term::iri(RDF_TYPE).expect("valid IRI")));
        }
        self.ground_term().map(PatternTerm::Term)
    }

    fn ground_term(&mut self) -> Result<Term, QueryError> {
        let (line, column) = self.here();
        let bad = |message: String| QueryError::Syntax { line, column, message };
        match self.peek().cloned() {
            Some(Tok::IriRef(_) | Tok::PName { .. }) => {
                let iri = self.iri()?;
                if self.peek() == Some(&Tok::DoubleCaret) {
                    self.pos += 1;
                    let dt = self.iri()?;
                    if dt != RDF_PLAIN_LITERAL {
                        return Err(bad(format!("datatype <{dt}> applied to an IRI")));
                    }
                    return Ok(Term::plain(iri));
                }
                Term::iri(&iri).map_err(|e| bad(e.to_string()))
            }
            Some(Tok::Str(lex)) => {
                self.pos += 1;
                match self.peek() {
                    Some(Tok::LangTag(_)) => Err(self.unsupported("language tag")),
                    Some(Tok::DoubleCaret) => {
                        self.pos += 1;
                        let dt = self.iri()?;
                        Term::typed(&lex, &dt).map_err(|e| bad(e.to_string()))
                    }
                    _ => Ok(Term::plain(lex)),
                }
            }
            Some(Tok::Number(n)) => {
                self.pos += 1;
                let dt = if n.contains('.') { XSD_DECIMAL } else { XSD_INTEGER };
                Term::typed(&n, dt).map_err(|e| bad(e.to_string()))
            }
            Some(Tok::Word(w)) if w == "true" || w == "false" => Err(self.unsupported("boolean literal")),
            _ => Err(self.unexpected("a term")),
        }
    }

    fn iri(&mut self) -> Result<String, QueryError> {
        let (line, column) = self.here();
        match self.peek().cloned() {
            Some(Tok::IriRef(iri)) => {
                self.pos += 1;
                Ok(iri)
            }
            Some(Tok::PName { prefix, local }) => {
                self.pos += 1;
                self.prologue
                    .expand(&prefix, &local)
                    .or_else(|| self.registered.expand(&prefix, &local))
                    .ok_or(QueryError::UndeclaredPrefix { prefix, line, column })
            }
            _ => Err(self.unexpected("an IRI")),
        }
    }

    fn filter(&mut self) -> Result<FilterExpr, QueryError> {
        self.expect(Tok::LParen, "`(` after FILTER")?;
        let lhs = if self.eat_str_call() {
            let v = self.filter_var()?;
            self.expect(Tok::RParen, "`)`")?;
            FilterOperand::Str(v)
        } else {
            FilterOperand::Var(self.filter_var()?)
        };
        let (op, rhs) = if self.eat_keyword("IN") {
            self.expect(Tok::LParen, "`(` after IN")?;
            let mut items = Vec::new();
            if self.peek() != Some(&Tok::RParen) {
                items.push(self.filter_value()?);
                while self.peek() == Some(&Tok::Comma) {
                    self.pos += 1;
                    items.push(self.filter_value()?);
                }
            }
            if items.is_empty() {
                return Err(self.syntax("IN requires at least one value"));
            }
            self.expect(Tok::RParen, "`)`")?;
            (FilterOp::In, items)
        } else if self.peek() == Some(&Tok::Eq) {
            self.pos += 1;
            (FilterOp::Equals, vec![self.filter_value()?])
        } else {
            return Err(match self.peek() {
                Some(Tok::Op(op)) if op == "&&" || op == "||" => self.unsupported(format!("logical operator `{op}`")),
                Some(Tok::Op(op)) => self.unsupported(format!("comparison operator `{op}`")),
                _ => self.unexpected("`IN` or `=`"),
            });
        };
        if let Some(Tok::Op(op)) = self.peek() {
            return Err(self.unsupported(format!("logical operator `{op}`")));
        }
        self.expect(Tok::RParen, "`)` closing FILTER")?;
        Ok(FilterExpr { op, lhs, rhs })
    }

    fn eat_str_call(&mut self) -> bool {
        let hit = self.is_keyword("STR") && self.peek_at(1) == Some(&Tok::LParen);
        if hit {
            self.pos += 2;
        }
        hit
    }

    fn filter_var(&mut self) -> Result<String, QueryError> {
        match self.peek().cloned() {
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Word(w)) if self.peek_at(1) == Some(&Tok::LParen) => {
                Err(self.unsupported(format!("function {}", w.to_ascii_uppercase())))
            }
            _ => Err(self.unexpected("a variable")),
        }
    }

    fn filter_value(&mut self) -> Result<FilterValue, QueryError> {
        if self.eat_str_call() {
            let t = self.filter_ground()?;
            self.expect(Tok::RParen, "`)`")?;
            Ok(FilterValue::Str(t))
        } else {
            self.filter_ground().map(FilterValue::Term)
        }
    }

    fn filter_ground(&mut self) -> Result<Term, QueryError> {
        match self.peek() {
            Some(Tok::Var(_)) => Err(self.unsupported("variable on the right of a filter")),
            Some(Tok::Word(w)) if self.peek_at(1) == Some(&Tok::LParen) => {
                Err(self.unsupported(format!("function {}", w.to_ascii_uppercase())))
            }
            _ => self.ground_term(),
        }
    }
}

/// `?` directly after a predicate with no whitespace is a path modifier,
/// which the lexer reads as the start of a variable.
fn is_path_modifier(tokens: &[Token], pos: usize) -> bool {
    let (Some(prev), Some(cur)) = (tokens.get(pos.wrapping_sub(1)), tokens.get(pos)) else {
        return false;
    };
    let Tok::PName { prefix, local } = &prev.tok else {
        return false;
    };
    let prev_len = prefix.chars().count() + local.chars().count() + 1;
    prev.line == cur.line && prev.column + prev_len == cur.column
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::IriRef(i) => format!("<{i}>"),
        Tok::PName { prefix, local } => format!("`{prefix}:{local}`"),
        Tok::Var(v) => format!("?{v}"),
        Tok::Str(s) => format!("{s:?}"),
        Tok::Number(n) => n.clone(),
        Tok::Word(w) => format!("`{w}`"),
        Tok::LangTag(l) => format!("@{l}"),
        Tok::BlankNode => "blank node".into(),
        Tok::DoubleCaret => "`^^`".into(),
        Tok::LBrace => "`{`".into(),
        Tok::RBrace => "`}`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::LBracket => "`[`".into(),
        Tok::Dot => "`.`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Semicolon => "`;`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Star => "`*`".into(),
        Tok::Op(o) => format!("`{o}`"),
    }
}
