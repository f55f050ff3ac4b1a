use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
pub(super) enum Tok {
    IriRef(String),
    PName {
        prefix: String,
        local: String,
    },
    Var(String),
    Str(String),
    Number(String),
    Word(String),
    LangTag(String),
    BlankNode,
    DoubleCaret,
    LBrace,
    RBrace,
    LParen,
    RParen,
    LBracket,
    Dot,
    Comma,
    Semicolon,
    Eq,
    Star,
    /// Operators outside the supported grammar (`<`, `!=`, `&&`, `/`, ...).
    Op(String),
}

#[derive(Debug, Clone)]
pub(super) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    line_start: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '-'
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn column(&self) -> usize {
        self.pos - self.line_start + 1
    }

    fn error(&self, message: impl Into<String>) -> QueryError {
        QueryError::Syntax {
            line: self.line,
            column: self.column(),
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.line_start = self.pos;
        }
        Some(c)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> String {
        let start = self.pos;
        while self.peek().is_some_and(&f) {
            self.bump();
        }
        self.chars[start..self.pos].iter().collect()
    }

    /// `<` starts an IRI only if a `>` closes it before any whitespace.
    fn looks_like_iri(&self) -> bool {
        let mut i = self.pos + 1;
        while let Some(&c) = self.chars.get(i) {
            match c {
                '>' => return true,
                c if c.is_whitespace() || matches!(c, '<' | '"' | '{' | '}' | '|' | '^' | '`') => return false,
                _ => i += 1,
            }
        }
        false
    }

    fn string(&mut self, quote: char) -> Result<String, QueryError> {
        self.bump();
        let mut out = String::new();
        loop {
            let Some(c) = self.bump() else {
                return Err(self.error("unterminated string"));
            };
            match c {
                c if c == quote => return Ok(out),
                '\n' => return Err(self.error("newline in string")),
                '\\' => {
                    let esc = self.bump().ok_or_else(|| self.error("dangling escape"))?;
                    out.push(match esc {
                        '"' => '"',
                        '\'' => '\'',
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
    }

    fn local_name(&mut self) -> String {
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| is_name_char(c) || (c == '.' && self.peek_at(1).is_some_and(is_name_char)))
        {
            self.bump();
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn next(&mut self) -> Result<Option<Token>, QueryError> {
        self.skip_trivia();
        let (line, column) = (self.line, self.column());
        let Some(c) = self.peek() else { return Ok(None) };
        let tok = match c {
            '<' if self.looks_like_iri() => {
                self.bump();
                let iri = self.take_while(|c| c != '>');
                self.bump();
                Tok::IriRef(iri)
            }
            '?' | '$' => {
                self.bump();
                let name = self.take_while(|c| c.is_alphanumeric() || c == '_');
                if name.is_empty() {
                    return Err(self.error("empty variable name"));
                }
                Tok::Var(name)
            }
            '"' | '\'' => Tok::Str(self.string(c)?),
            '^' if self.peek_at(1) == Some('^') => {
                self.bump();
                self.bump();
                Tok::DoubleCaret
            }
            '@' => {
                self.bump();
                Tok::LangTag(self.take_while(|c| c.is_alphanumeric() || c == '-'))
            }
            '_' if self.peek_at(1) == Some(':') => {
                self.bump();
                self.bump();
                self.local_name();
                Tok::BlankNode
            }
            '{' | '}' | '(' | ')' | '[' | '.' | ',' | ';' | '=' | '*' => {
                self.bump();
                match c {
                    '{' => Tok::LBrace,
                    '}' => Tok::RBrace,
                    '(' => Tok::LParen,
                    ')' => Tok::RParen,
                    '[' => Tok::LBracket,
                    '.' => Tok::Dot,
                    ',' => Tok::Comma,
                    ';' => Tok::Semicolon,
                    '=' => Tok::Eq,
                    _ => Tok::Star,
                }
            }
            c if c.is_ascii_digit() => {
                let int = self.take_while(|c| c.is_ascii_digit());
                if self.peek() == Some('.') && self.peek_at(1).is_some_and(|c| c.is_ascii_digit()) {
                    self.bump();
                    let frac = self.take_while(|c| c.is_ascii_digit());
                    Tok::Number(format!("{int}.{frac}"))
                } else {
                    Tok::Number(int)
                }
            }
            c if c.is_alphabetic() || c == ':' => {
                let word = self.take_while(is_name_char);
                if self.peek() == Some(':') {
                    self.bump();
                    Tok::PName {
                        prefix: word,
                        local: self.local_name(),
                    }
                } else {
                    Tok::Word(word)
                }
            }
            _ => {
                self.bump();
                let mut op = c.to_string();
                if let Some(n) = self.peek() {
                    if matches!((c, n), ('!', '=') | ('<', '=') | ('>', '=') | ('&', '&') | ('|', '|')) {
                        self.bump();
                        op.push(n);
                    }
                }
                Tok::Op(op)
            }
        };
        Ok(Some(Token { tok, line, column }))
    }
}

pub(super) fn tokenize(text: &str) -> Result<Vec<Token>, QueryError> {
    let mut lx = Lexer {
        chars: text.chars().collect(),
        pos: 0,
        line: 1,
        line_start: 0,
    };
    let mut out = Vec::new();
    while let Some(t) = lx.next()? {
        out.push(t);
    }
    Ok(out)
}
