//! Recursive-descent parser for the request language.
//!
//! ```text
//! query := or
//! or    := and (OR and)*
//! and   := not (AND not)*
//! not   := NOT not | atom
//! atom  := '(' query ')' | term
//! term  := NAME ':' VALUE | NAME ':' '"' quoted '"'
//! ```
//!
//! Keywords are case-insensitive. A word directly followed by `:` is always a
//! field name, so `not:x` is a term.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::ast::{is_bare_value_char, QueryExpr, TermValue};
use crate::warehouse::{is_legal_attribute_name, normalize_attribute_name};

const MAX_NESTING: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct SyntaxError {
    /// Character offset of the offending token; `None` at end of input.
    pub position: Option<usize>,
    pub token: String,
    pub message: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.position {
            None => write!(f, "syntax error at end-of-input: {}", self.message),
            Some(p) => write!(f, "syntax error at position {p} near {:?}: {}", self.token, self.message),
        }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    depth: usize,
}

fn is_name_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | '.' | '-')
}

pub fn parse_query(text: &str) -> Result<QueryExpr, SyntaxError> {
    let mut parser = Parser {
        chars: text.chars().collect(),
        pos: 0,
        depth: 0,
    };
    parser.skip_ws();
    if parser.at_end() {
        return Err(parser.error_here("empty query"));
    }
    let expr = parser.parse_or()?;
    parser.skip_ws();
    if !parser.at_end() {
        return Err(match parser.peek() {
            Some(')') => parser.error_here("unbalanced parenthesis"),
            _ => parser.error_here("expected AND, OR or end of input"),
        });
    }
    Ok(expr)
}

impl Parser {
    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    /// The token starting at the cursor, for error messages.
    fn token_here(&self) -> String {
        match self.peek() {
            None => "end-of-input".into(),
            Some(c) if c == '(' || c == ')' || c == '"' || c == ':' => c.to_string(),
            Some(_) => self.chars[self.pos..]
                .iter()
                .take_while(|&&c| is_bare_value_char(c) && c != ':')
                .collect(),
        }
    }

    fn error_here(&self, message: &str) -> SyntaxError {
        SyntaxError {
            position: (!self.at_end()).then_some(self.pos),
            token: self.token_here(),
            message: message.into(),
        }
    }

    fn error_at(&self, position: usize, token: String, message: &str) -> SyntaxError {
        SyntaxError {
            position: Some(position),
            token,
            message: message.into(),
        }
    }

    fn enter(&mut self) -> Result<(), SyntaxError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            return Err(self.error_here("nesting too deep"));
        }
        Ok(())
    }

    /// Consumes a keyword if the next word is exactly it (and not a field name).
    fn eat_keyword(&mut self, keyword: &str) -> bool {
        self.skip_ws();
        let word: String = self.chars[self.pos..]
            .iter()
            .take_while(|&&c| is_name_char(c))
            .collect();
        let end = self.pos + word.chars().count();
        let followed_by_colon = self.chars.get(end) == Some(&':');
        if !followed_by_colon && word.eq_ignore_ascii_case(keyword) {
            self.pos = end;
            true
        } else {
            false
        }
    }

    /// After an operand: anything other than AND/OR/')'/end is an error.
    fn check_operator_position(&mut self) -> Result<(), SyntaxError> {
        self.skip_ws();
        match self.peek() {
            None | Some(')') => Ok(()),
            _ => {
                let start = self.pos;
                let token = self.token_here();
                let is_word = self.peek().is_some_and(is_name_char);
                let followed_by_colon =
                    self.chars.get(start + token.chars().count()) == Some(&':');
                if is_word && (token.eq_ignore_ascii_case("and") || token.eq_ignore_ascii_case("or")) && !followed_by_colon {
                    Ok(())
                } else if is_word && !followed_by_colon {
                    Err(self.error_at(start, token, "unknown operator"))
                } else {
                    Err(self.error_at(start, token, "expected AND or OR between terms"))
                }
            }
        }
    }

    fn parse_or(&mut self) -> Result<QueryExpr, SyntaxError> {
        let mut left = self.parse_and()?;
        loop {
            self.check_operator_position()?;
            if !self.eat_keyword("or") {
                return Ok(left);
            }
            let right = self.parse_and()?;
            left = QueryExpr::Or(Box::new(left), Box::new(right));
        }
    }

    fn parse_and(&mut self) -> Result<QueryExpr, SyntaxError> {
        let mut left = self.parse_not()?;
        loop {
            self.check_operator_position()?;
            if !self.eat_keyword("and") {
                return Ok(left);
            }
            let right = self.parse_not()?;
            left = QueryExpr::And(Box::new(left), Box::new(right));
        }
    }

    fn parse_not(&mut self) -> Result<QueryExpr, SyntaxError> {
        if self.eat_keyword("not") {
            self.enter()?;
            let inner = self.parse_not()?;
            self.depth -= 1;
            return Ok(QueryExpr::Not(Box::new(inner)));
        }
        self.parse_atom()
    }

    fn parse_atom(&mut self) -> Result<QueryExpr, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            None => Err(self.error_here("expected a term or '('")),
            Some('(') => {
                let open = self.pos;
                self.pos += 1;
                self.enter()?;
                let inner = self.parse_or()?;
                self.depth -= 1;
                self.skip_ws();
                match self.peek() {
                    Some(')') => {
                        self.pos += 1;
                        Ok(inner)
                    }
                    None => Err(SyntaxError {
                        position: None,
                        token: "end-of-input".into(),
                        message: format!("unbalanced parenthesis (opened at position {open})"),
                    }),
                    Some(_) => Err(self.error_here("expected ')'")),
                }
            }
            Some(c) if is_name_char(c) => self.parse_term(),
            Some(_) => Err(self.error_here("expected a term or '('")),
        }
    }

    fn parse_term(&mut self) -> Result<QueryExpr, SyntaxError> {
        let start = self.pos;
        while self.peek().is_some_and(is_name_char) {
            self.pos += 1;
        }
        let raw: String = self.chars[start..self.pos].iter().collect();
        if self.peek() != Some(':') {
            let message = if ["and", "or"].iter().any(|k| raw.eq_ignore_ascii_case(k)) {
                "operator without a left operand"
            } else {
                "expected ':' after field name"
            };
            return Err(self.error_at(start, raw, message));
        }
        let attribute = normalize_attribute_name(&raw);
        if !is_legal_attribute_name(&attribute) {
            return Err(self.error_at(start, raw, "illegal attribute name"));
        }
        self.pos += 1;

        let value = if self.peek() == Some('"') {
            let open = self.pos;
            self.pos += 1;
            let mut text = String::new();
            loop {
                match self.peek() {
                    None => {
                        return Err(SyntaxError {
                            position: None,
                            token: "end-of-input".into(),
                            message: format!("unterminated quoted value (opened at position {open})"),
                        })
                    }
                    Some('"') => {
                        self.pos += 1;
                        break;
                    }
                    Some('\\') if self.chars.get(self.pos + 1).is_some() => {
                        text.push(self.chars[self.pos + 1]);
                        self.pos += 2;
                    }
                    Some(c) => {
                        text.push(c);
                        self.pos += 1;
                    }
                }
            }
            if text.is_empty() {
                return Err(self.error_at(open, "\"\"".into(), "empty value"));
            }
            TermValue::Phrase(text)
        } else {
            let value_start = self.pos;
            while self.peek().is_some_and(is_bare_value_char) {
                self.pos += 1;
            }
            if value_start == self.pos {
                return Err(self.error_here("empty value"));
            }
            TermValue::Exact(self.chars[value_start..self.pos].iter().collect())
        };
        Ok(QueryExpr::Term { attribute, value })
    }
}
