//! Line-oriented triple format.
//!
//! One statement per line: `<s> <p> <o> .` where the object is `<iri>`,
//! `"lexical"` or `"lexical"^^<datatype>`. `prefix:local` names are accepted
//! on input when the prefix is registered on the target graph; output always
//! uses absolute IRIs. Lines starting with `#` are comments.

use std::io::BufRead;

use super::{Graph, Namespaces, StoreError, Term, Triple};

/// Parses `input` and adds its triples to `graph`. Nothing is inserted unless
/// the whole input parses. Returns the number of triples that were new.
pub fn load_lines(graph: &mut Graph, input: impl BufRead) -> Result<usize, StoreError> {
    let mut parsed = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line.map_err(|e| StoreError::Io(e.to_string()))?;
        if let Some(t) = parse_line(&line, idx + 1, graph.namespaces())? {
            parsed.push(t);
        }
    }
    Ok(parsed.into_iter().filter(|t| graph.insert(t.clone())).count())
}

/// Canonical text: sorted, one triple per line, absolute IRIs.
pub fn serialize_lines(graph: &Graph) -> String {
    let mut out = String::with_capacity(graph.len() * 96);
    for t in graph.sorted_triples() {
        t.subject().write_line_form(&mut out);
        out.push(' ');
        t.predicate().write_line_form(&mut out);
        out.push(' ');
        t.object().write_line_form(&mut out);
        out.push_str(" .\n");
    }
    out
}

struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    ns: &'a Namespaces,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn column(&self) -> usize {
        self.pos + 1
    }

    fn error(&self, message: impl Into<String>) -> StoreError {
        StoreError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(|c| c == ' ' || c == '\t') {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: char) -> Result<(), StoreError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn iri_ref(&mut self) -> Result<String, StoreError> {
        self.expect('<')?;
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c == '>' {
                let iri: String = self.chars[start..self.pos].iter().collect();
                self.pos += 1;
                return Ok(iri);
            }
            if c.is_whitespace() || c == '<' || c == '"' {
                return Err(self.error(format!("invalid character {c:?} in IRI")));
            }
            self.pos += 1;
        }
        Err(self.error("unterminated IRI"))
    }

    fn prefixed_name(&mut self) -> Result<String, StoreError> {
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_' || c == '-') {
            self.pos += 1;
        }
        let prefix: String = self.chars[start..self.pos].iter().collect();
        if self.peek() != Some(':') {
            return Err(self.error("expected `<iri>`, `prefix:name` or a literal"));
        }
        self.pos += 1;
        let local_start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.' | '/' | '#'))
        {
            self.pos += 1;
        }
        // a trailing dot belongs to the statement terminator
        while self.pos > local_start && self.chars[self.pos - 1] == '.' {
            self.pos -= 1;
        }
        let local: String = self.chars[local_start..self.pos].iter().collect();
        self.ns.expand(&prefix, &local).ok_or(StoreError::UnknownPrefix {
            line: self.line,
            column: start + 1,
            prefix,
        })
    }

    fn iri(&mut self) -> Result<Term, StoreError> {
        let col = self.column();
        let raw = if self.peek() == Some('<') {
            self.iri_ref()?
        } else {
            self.prefixed_name()?
        };
        Term::iri(&raw).map_err(|e| StoreError::Syntax {
            line: self.line,
            column: col,
            message: e.to_string(),
        })
    }

    fn quoted(&mut self) -> Result<String, StoreError> {
        self.expect('"')?;
        let mut out = String::new();
        while let Some(c) = self.peek() {
            self.pos += 1;
            match c {
                '"' => return Ok(out),
                '\\' => {
                    let esc = self.peek().ok_or_else(|| self.error("dangling escape"))?;
                    self.pos += 1;
                    out.push(match esc {
                        '"' => '"',
                        '\\' => '\\',
                        'n' => '\n',
                        'r' => '\r',
                        't' => '\t',
                        other => return Err(self.error(format!("unknown escape `\\{other}`"))),
                    });
                }
                c => out.push(c),
            }
        }
        Err(self.error("unterminated literal"))
    }

    fn object(&mut self) -> Result<Term, StoreError> {
        if self.peek() != Some('"') {
            return self.iri();
        }
        let col = self.column();
        let lexical = self.quoted()?;
        if self.chars.get(self.pos..self.pos + 2) == Some(&['^', '^']) {
            self.pos += 2;
            let dt = self.iri()?;
            Term::typed(&lexical, dt.lexical()).map_err(|e| StoreError::Syntax {
                line: self.line,
                column: col,
                message: e.to_string(),
            })
        } else {
            Ok(Term::plain(lexical))
        }
    }
}

impl Term {
    /// Parses a single term written in line-format syntax (absolute IRIs only).
    pub fn parse_line_form(text: &str) -> Result<Term, StoreError> {
        let ns = Namespaces::empty();
        let mut c = Cursor {
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            ns: &ns,
        };
        let t = c.object()?;
        if c.peek().is_some() {
            return Err(c.error("unexpected content after term"));
        }
        Ok(t)
    }
}

fn parse_line(line: &str, line_no: usize, ns: &Namespaces) -> Result<Option<Triple>, StoreError> {
    let trimmed = line.trim_start();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut c = Cursor {
        chars: line.chars().collect(),
        pos: 0,
        line: line_no,
        ns,
    };
    c.skip_ws();
    let s = c.iri()?;
    c.skip_ws();
    let p = c.iri()?;
    c.skip_ws();
    let o = c.object()?;
    c.skip_ws();
    c.expect('.')?;
    c.skip_ws();
    if c.peek().is_some() {
        return Err(c.error("unexpected content after `.`"));
    }
    Triple::new(s, p, o).map(Some).map_err(|e| StoreError::Syntax {
        line: line_no,
        column: 1,
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::vocab::{RDF_TYPE, SYN_PATIENT, XSD_FLOAT};

    fn load(g: &mut Graph, text: &str) -> Result<usize, StoreError> {
        load_lines(g, text.as_bytes())
    }

    #[test]
    fn empty_input_adds_nothing() {
        let mut g = Graph::new();
        assert_eq!(load(&mut g, "").unwrap(), 0);
        assert_eq!(serialize_lines(&g), "");
    }

    #[test]
    fn loading_twice_is_idempotent() {
        let mut g = Graph::new();
        let line = "<http://ex/a> <http://ex/p> \"v\" .\n";
        assert_eq!(load(&mut g, line).unwrap(), 1);
        assert_eq!(load(&mut g, line).unwrap(), 0);
    }

    #[test]
    fn single_triple_serializes_to_one_line() {
        let mut g = Graph::new();
        load(&mut g, "syn:p1 rdf:type syn:Patient .").unwrap();
        assert_eq!(
            serialize_lines(&g),
            format!("<{}p1> <{RDF_TYPE}> <{SYN_PATIENT}> .\n", crate::ontology::vocab::SYN)
        );
    }

    #[test]
    fn typed_literal_and_comments() {
        let mut g = Graph::new();
        let text = format!("# header\n\n<http://ex/u> <http://ex/score> \"0.9\"^^<{XSD_FLOAT}> .\n");
        assert_eq!(load(&mut g, &text).unwrap(), 1);
        let t = g.iter().next().unwrap();
        assert_eq!(t.object(), &Term::typed("0.9", XSD_FLOAT).unwrap());
    }

    #[test]
    fn syntax_error_reports_line_and_column() {
        let mut g = Graph::new();
        let err = load(
            &mut g,
            "<http://ex/a> <http://ex/p> <http://ex/o> .\n<http://ex/a> <http://ex/p> <http://ex/o>\n",
        )
        .unwrap_err();
        assert_eq!(
            err,
            StoreError::Syntax {
                line: 2,
                column: 42,
                message: "expected `.`".into()
            }
        );
        assert!(g.is_empty(), "failed load must not partially apply");
    }

    #[test]
    fn unknown_prefix_is_named() {
        let mut g = Graph::new();
        let err = load(&mut g, "foo:a <http://ex/p> <http://ex/o> .").unwrap_err();
        assert_eq!(
            err,
            StoreError::UnknownPrefix {
                line: 1,
                column: 1,
                prefix: "foo".into()
            }
        );
    }

    #[test]
    fn literal_subject_rejected() {
        let mut g = Graph::new();
        assert!(load(&mut g, "\"lit\" <http://ex/p> <http://ex/o> .").is_err());
    }

    #[test]
    fn invalid_float_literal_rejected() {
        let mut g = Graph::new();
        let text = format!("<http://ex/u> <http://ex/score> \"high\"^^<{XSD_FLOAT}> .");
        assert!(matches!(load(&mut g, &text), Err(StoreError::Syntax { .. })));
    }

    #[test]
    fn escaped_literal_round_trips() {
        let mut g = Graph::new();
        g.insert(
            Triple::new(
                Term::iri("http://ex/a").unwrap(),
                Term::iri("http://ex/p").unwrap(),
                Term::plain("a \"q\"\\\tz"),
            )
            .unwrap(),
        );
        let text = serialize_lines(&g);
        let mut back = Graph::new();
        load(&mut back, &text).unwrap();
        assert_eq!(g, back);
    }
}
