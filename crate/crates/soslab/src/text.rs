//! Textual form of SOS values used by configs, the CLI, and traces:
//! `{{1},{3},{1,2},{1,3},{2,3}}`. Whitespace-insensitive; `{}` is the empty
//! output set.

use std::fmt;

use thiserror::Error;

use crate::sos::{OutputSet, Sos, ValueId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("parse error at line {line}, column {col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

struct Cursor<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Self {
            src,
            bytes: src.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, message: impl Into<String>) -> ParseError {
        let mut line = 1;
        let mut col = 1;
        for b in self.src.bytes().take(self.pos) {
            if b == b'\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
        }
        ParseError {
            line,
            col,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        match self.peek() {
            Some(got) if got == c => {
                self.pos += 1;
                Ok(())
            }
            Some(got) => Err(self.error(format!(
                "expected '{}', found '{}'",
                c as char, got as char
            ))),
            None => Err(self.error(format!("expected '{}', found end of input", c as char))),
        }
    }

    fn number(&mut self) -> Result<u32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a value (non-negative integer)"));
        }
        self.src[start..self.pos]
            .parse::<u32>()
            .map_err(|_| self.error("value out of range"))
    }

    fn output_set(&mut self) -> Result<OutputSet, ParseError> {
        self.expect(b'{')?;
        let mut values = Vec::new();
        if self.peek() == Some(b'}') {
            self.pos += 1;
            return Ok(OutputSet::empty());
        }
        loop {
            values.push(ValueId(self.number()?));
            match self.peek() {
                Some(b',') => {
                    self.pos += 1;
                }
                Some(b'}') => {
                    self.pos += 1;
                    break;
                }
                Some(c) => {
                    return Err(self.error(format!("expected ',' or '}}', found '{}'", c as char)))
                }
                None => return Err(self.error("expected ',' or '}', found end of input")),
            }
        }
        Ok(values.into_iter().collect())
    }

    fn end(&mut self) -> Result<(), ParseError> {
        if let Some(c) = self.peek() {
            return Err(self.error(format!("unexpected trailing '{}'", c as char)));
        }
        Ok(())
    }
}

/// Parses a single output set, e.g. `{1,3}` or `{}`.
pub fn parse_output_set(input: &str) -> Result<OutputSet, ParseError> {
    let mut cur = Cursor::new(input);
    let set = cur.output_set()?;
    cur.end()?;
    Ok(set)
}

/// Parses an SOS, e.g. `{{1},{1,2}}`. The outer set must be non-empty.
pub fn parse_sos(input: &str) -> Result<Sos, ParseError> {
    let mut cur = Cursor::new(input);
    cur.expect(b'{')?;
    let mut sets = Vec::new();
    loop {
        sets.push(cur.output_set()?);
        match cur.peek() {
            Some(b',') => {
                cur.pos += 1;
            }
            Some(b'}') => {
                cur.pos += 1;
                break;
            }
            Some(c) => return Err(cur.error(format!("expected ',' or '}}', found '{}'", c as char))),
            None => return Err(cur.error("expected ',' or '}', found end of input")),
        }
    }
    cur.end()?;
    Ok(Sos::new(sets).expect("grammar guarantees at least one set"))
}

/// Canonical rendering, inverse of [`parse_sos`] up to whitespace and set
/// ordering.
pub fn format_sos(o: &Sos) -> String {
    o.to_string()
}

/// Comma-separated value list, e.g. `1,2,3`.
pub fn parse_value_list(input: &str) -> Result<Vec<ValueId>, ParseError> {
    let mut cur = Cursor::new(input);
    let mut values = Vec::new();
    loop {
        values.push(ValueId(cur.number()?));
        match cur.peek() {
            Some(b',') => {
                cur.pos += 1;
            }
            Some(c) => return Err(cur.error(format!("expected ',' , found '{}'", c as char))),
            None => break,
        }
    }
    Ok(values)
}

impl fmt::Display for ParseErrorContext<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Helper carrying the offending source line for CLI diagnostics.
pub struct ParseErrorContext<'a>(pub &'a ParseError);

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_canonical_example() {
        let o = parse_sos("{{1},{3},{1,2},{1,3},{2,3}}").unwrap();
        assert_eq!(o.len(), 5);
        assert_eq!(format_sos(&o), "{{1},{3},{1,2},{1,3},{2,3}}");
    }

    #[test]
    fn whitespace_insensitive() {
        let a = parse_sos("{{1},{1,2}}").unwrap();
        let b = parse_sos(" {  { 1 } ,\n { 1 , 2 } } ").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_output_set() {
        let o = parse_sos("{{}}").unwrap();
        assert!(o.is_trivial());
        assert_eq!(format_sos(&o), "{{}}");
    }

    #[test]
    fn duplicate_values_collapse() {
        let o = parse_sos("{{1,1,2}}").unwrap();
        assert_eq!(format_sos(&o), "{{1,2}}");
    }

    #[test]
    fn error_carries_position() {
        let err = parse_sos("{{1},\n{2,}}").unwrap_err();
        assert_eq!(err.line, 2);
        assert_eq!(err.col, 4);
    }

    #[test]
    fn rejects_empty_outer() {
        assert!(parse_sos("{}").is_err());
        assert!(parse_sos("").is_err());
        assert!(parse_sos("{{1}} trailing").is_err());
    }

    #[test]
    fn value_lists() {
        assert_eq!(
            parse_value_list("1, 2,3").unwrap(),
            vec![ValueId(1), ValueId(2), ValueId(3)]
        );
        assert!(parse_value_list("1,,2").is_err());
    }

    fn arb_sos() -> impl Strategy<Value = Sos> {
        proptest::collection::btree_set(
            proptest::collection::btree_set(0u32..9, 0..4)
                .prop_map(|s| s.into_iter().map(ValueId).collect::<crate::sos::OutputSet>()),
            1..6,
        )
        .prop_map(|sets| Sos::new(sets).unwrap())
    }

    proptest! {
        #[test]
        fn format_parse_round_trip(o in arb_sos()) {
            prop_assert_eq!(parse_sos(&format_sos(&o)).unwrap(), o);
        }
    }
}
