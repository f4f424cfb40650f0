//! Minimal s-expression reader with source positions.
//!
//! Symbols are lower-cased on read; `;` starts a comment running to the end
//! of the line.

use std::fmt;

use super::error::PddlError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug)]
pub enum SExpr {
    Symbol(String, Pos),
    List(Vec<SExpr>, Pos),
}

impl SExpr {
    pub fn pos(&self) -> Pos {
        match self {
            SExpr::Symbol(_, p) | SExpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            SExpr::Symbol(s, _) => Some(s),
            SExpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match self {
            SExpr::List(items, _) => Some(items),
            SExpr::Symbol(..) => None,
        }
    }

    /// Head symbol of a list, if any.
    pub fn head(&self) -> Option<&str> {
        self.as_list()?.first()?.as_symbol()
    }

    pub fn expect_symbol(&self, what: &str) -> Result<&str, PddlError> {
        self.as_symbol().ok_or_else(|| PddlError::syntax(self.pos(), format!("expected {what}, found list")))
    }

    pub fn expect_list(&self, what: &str) -> Result<&[SExpr], PddlError> {
        self.as_list().ok_or_else(|| {
            PddlError::syntax(self.pos(), format!("expected {what}, found symbol `{}`", self.as_symbol().unwrap_or("")))
        })
    }
}

struct Reader<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        Reader { chars: text.char_indices().peekable(), line: 1, col: 1 }
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn skip_trivia(&mut self) {
        while let Some(&(_, c)) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(&(_, c)) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn read(&mut self) -> Result<Option<SExpr>, PddlError> {
        self.skip_trivia();
        let pos = self.pos();
        match self.chars.peek().map(|&(_, c)| c) {
            None => Ok(None),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.chars.peek().map(|&(_, c)| c) {
                        None => return Err(PddlError::syntax(pos, "unclosed `(`")),
                        Some(')') => {
                            self.bump();
                            return Ok(Some(SExpr::List(items, pos)));
                        }
                        Some(_) => {
                            if let Some(item) = self.read()? {
                                items.push(item);
                            }
                        }
                    }
                }
            }
            Some(')') => Err(PddlError::syntax(pos, "unexpected `)`")),
            Some(_) => {
                let mut sym = String::new();
                while let Some(&(_, c)) = self.chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == ';' {
                        break;
                    }
                    sym.extend(c.to_lowercase());
                    self.bump();
                }
                Ok(Some(SExpr::Symbol(sym, pos)))
            }
        }
    }
}

/// Parse exactly one top-level s-expression.
pub fn parse_one(text: &str) -> Result<SExpr, PddlError> {
    let mut reader = Reader::new(text);
    let expr = reader.read()?.ok_or_else(|| PddlError::syntax(Pos { line: 1, col: 1 }, "empty input"))?;
    reader.skip_trivia();
    if reader.chars.peek().is_some() {
        return Err(PddlError::syntax(reader.pos(), "trailing input after top-level form"));
    }
    Ok(expr)
}
