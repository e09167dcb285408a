//! Arithmetic expressions over numbers, `pi` and named symbols.
//!
//! Shared by the sequence grammar and the experiment config format.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use super::DslError;

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
    Eq,
    Semi,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

/// Splits one source line into tokens. Columns are 1-based.
pub(crate) fn lex_line(src: &str, line: usize) -> Result<Vec<Token>, DslError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        let single = |tok| Token { tok, line, col };
        match c {
            '#' => break,
            ' ' | '\t' | '\r' => {
                i += 1;
            }
            '+' => {
                out.push(single(Tok::Plus));
                i += 1;
            }
            '-' | '−' => {
                out.push(single(Tok::Minus));
                i += 1;
            }
            '*' => {
                out.push(single(Tok::Star));
                i += 1;
            }
            '/' => {
                out.push(single(Tok::Slash));
                i += 1;
            }
            '(' => {
                out.push(single(Tok::LParen));
                i += 1;
            }
            ')' => {
                out.push(single(Tok::RParen));
                i += 1;
            }
            '=' => {
                out.push(single(Tok::Eq));
                i += 1;
            }
            ';' => {
                out.push(single(Tok::Semi));
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text.parse().map_err(|_| DslError::Syntax {
                    line,
                    col,
                    msg: format!("malformed number `{text}`"),
                })?;
                out.push(single(Tok::Num(v)));
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(single(Tok::Ident(chars[start..i].iter().collect())));
            }
            other => {
                return Err(DslError::Syntax { line, col, msg: format!("unexpected character `{other}`") })
            }
        }
    }
    Ok(out)
}

/// Recursive-descent evaluator over a token slice. Stops at the first token
/// that cannot continue the expression and reports how many it consumed.
pub(crate) struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
    symbols: &'a BTreeMap<String, f64>,
    eol: (usize, usize),
}

impl<'a> ExprParser<'a> {
    pub fn new(toks: &'a [Token], symbols: &'a BTreeMap<String, f64>, eol: (usize, usize)) -> Self {
        Self { toks, pos: 0, symbols, eol }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.toks.get(self.pos).map(|t| (t.line, t.col)).unwrap_or(self.eol)
    }

    fn err(&self, msg: impl Into<String>) -> DslError {
        let (line, col) = self.here();
        DslError::Syntax { line, col, msg: msg.into() }
    }

    pub fn expr(&mut self) -> Result<f64, DslError> {
        let mut v = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    v += self.term()?;
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    v -= self.term()?;
                }
                _ => return Ok(v),
            }
        }
    }

    fn term(&mut self) -> Result<f64, DslError> {
        let mut v = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    v *= self.unary()?;
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    let (line, col) = self.here();
                    let d = self.unary()?;
                    if d == 0.0 {
                        return Err(DslError::Syntax { line, col, msg: "division by zero".into() });
                    }
                    v /= d;
                }
                _ => return Ok(v),
            }
        }
    }

    fn unary(&mut self) -> Result<f64, DslError> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(-self.unary()?)
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<f64, DslError> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(v)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if name == "pi" {
                    return Ok(PI);
                }
                self.symbols
                    .get(&name)
                    .copied()
                    .ok_or(DslError::UndefinedParameter { name, line, col })
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let v = self.expr()?;
                match self.peek() {
                    Some(Tok::RParen) => {
                        self.pos += 1;
                        Ok(v)
                    }
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(t) => Err(self.err(format!("expected a value, found {}", describe(&t)))),
            None => Err(self.err("expected a value, found end of line")),
        }
    }
}

pub(crate) fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Eq => "`=`".into(),
        Tok::Semi => "`;`".into(),
    }
}

/// Evaluates a standalone expression such as `pi/2` or `p0/4`.
pub fn eval_expr(src: &str, symbols: &BTreeMap<String, f64>) -> Result<f64, DslError> {
    let toks = lex_line(src, 1)?;
    let mut p = ExprParser::new(&toks, symbols, (1, src.chars().count() + 1));
    let v = p.expr()?;
    if let Some(t) = toks.get(p.consumed()) {
        return Err(DslError::Syntax {
            line: t.line,
            col: t.col,
            msg: format!("unexpected {} after expression", describe(&t.tok)),
        });
    }
    Ok(v)
}
