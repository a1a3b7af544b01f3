//! Canonical text container shared by every `maestro-*/1` file format.
//!
//! A document is a version line followed by key/value entries. Values are
//! integers, reals, quoted strings, bare symbols, lists, or maps. The writer
//! is byte-deterministic: keys sorted, 2-space indentation, LF line endings,
//! reals in shortest round-trip decimal form. The parser is lenient about
//! whitespace and key order but rejects duplicate keys, so parsing canonical
//! bytes and re-writing them reproduces the input exactly.

use std::collections::BTreeSet;
use std::fmt;
use thiserror::Error;

/// Parse or schema failure for any canonical-text format.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum FormatError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("schema error in field `{field}`: {message}")]
    Schema { field: String, message: String },
    #[error("version mismatch: expected `{expected}`, found `{found}`")]
    Version { expected: String, found: String },
}

impl FormatError {
    pub fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        FormatError::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// One node of a canonical document.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Str(String),
    /// Bare lowercase word, used for enum-like values (`strings`, `joy`, `true`).
    Sym(String),
    List(Vec<Value>),
    /// Entries keep file order after parsing; the writer sorts by key.
    Map(Vec<(String, Value)>),
}

impl Value {
    pub fn map(entries: Vec<(&str, Value)>) -> Value {
        Value::Map(
            entries
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
        )
    }

    pub fn sym(s: &str) -> Value {
        Value::Sym(s.to_string())
    }

    pub fn bool(b: bool) -> Value {
        Value::Sym(if b { "true" } else { "false" }.to_string())
    }

    fn is_scalar(&self) -> bool {
        !matches!(self, Value::List(_) | Value::Map(_))
    }

    fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "integer",
            Value::Real(_) => "real",
            Value::Str(_) => "string",
            Value::Sym(_) => "symbol",
            Value::List(_) => "list",
            Value::Map(_) => "map",
        }
    }
}

/// Shortest decimal that round-trips to the same f64, always carrying a
/// fractional marker so the reader can tell reals from integers.
pub fn format_real(x: f64) -> String {
    debug_assert!(
        x.is_finite(),
        "canonical text cannot carry non-finite reals"
    );
    let x = if x == 0.0 { 0.0 } else { x }; // fold -0.0 into 0.0
    let s = format!("{x}");
    if s.contains('.') || s.contains('e') || s.contains('E') {
        s
    } else {
        format!("{s}.0")
    }
}

// ---------------------------------------------------------------------------
// Writer
// ---------------------------------------------------------------------------

/// Renders a document in canonical form: `version` line plus the body map's
/// entries at top level. The body must be a `Value::Map`.
pub fn write_document(version: &str, body: &Value) -> String {
    let entries = match body {
        Value::Map(entries) => entries,
        _ => panic!("document body must be a map"),
    };
    let mut out = String::new();
    out.push_str(version);
    out.push('\n');
    let mut sorted: Vec<&(String, Value)> = entries.iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(&b.0));
    for (key, value) in sorted {
        write_entry(&mut out, key, value, 0);
    }
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

fn write_entry(out: &mut String, key: &str, value: &Value, depth: usize) {
    indent(out, depth);
    out.push_str(key);
    out.push(' ');
    write_value(out, value, depth);
    out.push('\n');
}

fn write_value(out: &mut String, value: &Value, depth: usize) {
    match value {
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Real(r) => out.push_str(&format_real(*r)),
        Value::Sym(s) => out.push_str(s),
        Value::Str(s) => write_string(out, s),
        Value::List(items) => {
            if items.iter().all(Value::is_scalar) {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    write_value(out, item, depth);
                }
                out.push(']');
            } else {
                out.push_str("[\n");
                for item in items {
                    indent(out, depth + 1);
                    write_value(out, item, depth + 1);
                    out.push('\n');
                }
                indent(out, depth);
                out.push(']');
            }
        }
        Value::Map(entries) => {
            let mut sorted: Vec<&(String, Value)> = entries.iter().collect();
            sorted.sort_by(|a, b| a.0.cmp(&b.0));
            if entries.iter().all(|(_, v)| v.is_scalar()) {
                out.push('{');
                for (i, (k, v)) in sorted.iter().enumerate() {
                    if i > 0 {
                        out.push(' ');
                    }
                    out.push_str(k);
                    out.push(' ');
                    write_value(out, v, depth);
                }
                out.push('}');
            } else {
                out.push_str("{\n");
                for (k, v) in sorted {
                    write_entry(out, k, v, depth + 1);
                }
                indent(out, depth);
                out.push('}');
            }
        }
    }
}

fn write_string(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{{{:x}}}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

/// Parses a document, checking the version line first. Returns the body map.
pub fn parse_document(text: &str, expected_version: &str) -> Result<Value, FormatError> {
    let (version, rest, body_line) = match text.split_once('\n') {
        Some((first, rest)) => (first.trim_end_matches('\r'), rest, 2),
        None => (text.trim_end_matches('\r'), "", 2),
    };
    if version != expected_version {
        return Err(FormatError::Version {
            expected: expected_version.to_string(),
            found: version.to_string(),
        });
    }
    let mut parser = Parser::new(rest, body_line);
    let mut entries = Vec::new();
    let mut seen = BTreeSet::new();
    while !parser.at_end()? {
        let (key, value) = parser.entry()?;
        if !seen.insert(key.clone()) {
            return Err(FormatError::schema(key, "duplicate key"));
        }
        entries.push((key, value));
    }
    Ok(Value::Map(entries))
}

struct Parser<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, start_line: usize) -> Self {
        Parser {
            chars: text.chars().peekable(),
            line: start_line,
            col: 1,
        }
    }

    fn syntax(&self, message: impl Into<String>) -> FormatError {
        FormatError::Syntax {
            line: self.line,
            col: self.col,
            message: message.into(),
        }
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(&c) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(&c) = self.chars.peek() {
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

    fn at_end(&mut self) -> Result<bool, FormatError> {
        self.skip_ws();
        Ok(self.chars.peek().is_none())
    }

    fn entry(&mut self) -> Result<(String, Value), FormatError> {
        self.skip_ws();
        let key = self.bare_word()?;
        let value = self.value()?;
        Ok((key, value))
    }

    fn bare_word(&mut self) -> Result<String, FormatError> {
        let mut word = String::new();
        match self.chars.peek() {
            Some(&c) if c.is_ascii_alphabetic() || c == '_' => {}
            Some(&c) => return Err(self.syntax(format!("expected a key, found `{c}`"))),
            None => return Err(self.syntax("expected a key, found end of input")),
        }
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_alphanumeric() || c == '_' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        Ok(word)
    }

    fn value(&mut self) -> Result<Value, FormatError> {
        self.skip_ws();
        match self.chars.peek() {
            None => Err(self.syntax("expected a value, found end of input")),
            Some('[') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        Some(']') => {
                            self.bump();
                            return Ok(Value::List(items));
                        }
                        None => return Err(self.syntax("unterminated list")),
                        _ => items.push(self.value()?),
                    }
                }
            }
            Some('{') => {
                self.bump();
                let mut entries = Vec::new();
                let mut seen = BTreeSet::new();
                loop {
                    self.skip_ws();
                    match self.chars.peek() {
                        Some('}') => {
                            self.bump();
                            return Ok(Value::Map(entries));
                        }
                        None => return Err(self.syntax("unterminated map")),
                        _ => {
                            let key = self.bare_word()?;
                            if !seen.insert(key.clone()) {
                                return Err(FormatError::schema(key, "duplicate key"));
                            }
                            let value = self.value()?;
                            entries.push((key, value));
                        }
                    }
                }
            }
            Some('"') => self.string(),
            Some(&c) if c == '-' || c.is_ascii_digit() => self.number(),
            Some(&c) if c.is_ascii_alphabetic() || c == '_' => Ok(Value::Sym(self.bare_word()?)),
            Some(&c) => Err(self.syntax(format!("unexpected character `{c}`"))),
        }
    }

    fn string(&mut self) -> Result<Value, FormatError> {
        self.bump(); // opening quote
        let mut s = String::new();
        loop {
            match self.bump() {
                None => return Err(self.syntax("unterminated string")),
                Some('"') => return Ok(Value::Str(s)),
                Some('\\') => match self.bump() {
                    Some('"') => s.push('"'),
                    Some('\\') => s.push('\\'),
                    Some('n') => s.push('\n'),
                    Some('t') => s.push('\t'),
                    Some('r') => s.push('\r'),
                    Some('u') => {
                        if self.bump() != Some('{') {
                            return Err(self.syntax("expected `{` after \\u"));
                        }
                        let mut hex = String::new();
                        loop {
                            match self.bump() {
                                Some('}') => break,
                                Some(c) if c.is_ascii_hexdigit() => hex.push(c),
                                _ => return Err(self.syntax("bad \\u escape")),
                            }
                        }
                        let code = u32::from_str_radix(&hex, 16)
                            .ok()
                            .and_then(char::from_u32)
                            .ok_or_else(|| self.syntax("bad \\u escape"))?;
                        s.push(code);
                    }
                    _ => return Err(self.syntax("unknown escape sequence")),
                },
                Some(c) if (c as u32) < 0x20 && c != '\n' && c != '\t' => {
                    return Err(self.syntax("control character in string"))
                }
                Some(c) => s.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Value, FormatError> {
        let mut s = String::new();
        if self.chars.peek() == Some(&'-') {
            s.push('-');
            self.bump();
        }
        let mut is_real = false;
        while let Some(&c) = self.chars.peek() {
            if c.is_ascii_digit() {
                s.push(c);
                self.bump();
            } else if c == '.' || c == 'e' || c == 'E' {
                is_real = true;
                s.push(c);
                self.bump();
                // allow a sign right after an exponent marker
                if (c == 'e' || c == 'E') && matches!(self.chars.peek(), Some('+') | Some('-')) {
                    s.push(*self.chars.peek().unwrap());
                    self.bump();
                }
            } else {
                break;
            }
        }
        if is_real {
            s.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .map(Value::Real)
                .ok_or_else(|| self.syntax(format!("malformed real `{s}`")))
        } else {
            s.parse::<i64>()
                .map(Value::Int)
                .map_err(|_| self.syntax(format!("malformed integer `{s}`")))
        }
    }
}

// ---------------------------------------------------------------------------
// Schema helpers
// ---------------------------------------------------------------------------

/// Cursor over a parsed map that tracks which keys a schema consumed, so
/// `finish` can reject anything left over.
pub struct MapView<'a> {
    context: String,
    entries: Vec<(&'a str, &'a Value)>,
    taken: Vec<bool>,
}

impl<'a> MapView<'a> {
    pub fn new(value: &'a Value, context: impl Into<String>) -> Result<Self, FormatError> {
        let context = context.into();
        match value {
            Value::Map(entries) => Ok(MapView {
                context,
                entries: entries.iter().map(|(k, v)| (k.as_str(), v)).collect(),
                taken: vec![false; entries.len()],
            }),
            other => Err(FormatError::schema(
                context,
                format!("expected a map, found {}", other.type_name()),
            )),
        }
    }

    fn field(&self, key: &str) -> String {
        if self.context.is_empty() {
            key.to_string()
        } else {
            format!("{}.{}", self.context, key)
        }
    }

    pub fn take(&mut self, key: &str) -> Option<&'a Value> {
        for (i, (k, v)) in self.entries.iter().enumerate() {
            if *k == key && !self.taken[i] {
                self.taken[i] = true;
                return Some(v);
            }
        }
        None
    }

    pub fn required(&mut self, key: &str) -> Result<&'a Value, FormatError> {
        self.take(key)
            .ok_or_else(|| FormatError::schema(self.field(key), "missing required field"))
    }

    /// Errors on the first key no schema rule consumed.
    pub fn finish(self) -> Result<(), FormatError> {
        for (i, (k, _)) in self.entries.iter().enumerate() {
            if !self.taken[i] {
                return Err(FormatError::schema(self.field(k), "unknown field"));
            }
        }
        Ok(())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_value(&mut s, self, 0);
        f.write_str(&s)
    }
}

pub fn as_int(value: &Value, field: &str) -> Result<i64, FormatError> {
    match value {
        Value::Int(i) => Ok(*i),
        other => Err(FormatError::schema(
            field,
            format!("expected an integer, found {}", other.type_name()),
        )),
    }
}

pub fn as_usize(value: &Value, field: &str) -> Result<usize, FormatError> {
    let i = as_int(value, field)?;
    usize::try_from(i).map_err(|_| {
        FormatError::schema(field, format!("expected a non-negative integer, found {i}"))
    })
}

/// Accepts an integer token where a real is expected, for hand-written files.
pub fn as_real(value: &Value, field: &str) -> Result<f64, FormatError> {
    match value {
        Value::Real(r) => Ok(*r),
        Value::Int(i) => Ok(*i as f64),
        other => Err(FormatError::schema(
            field,
            format!("expected a real, found {}", other.type_name()),
        )),
    }
}

pub fn as_str<'a>(value: &'a Value, field: &str) -> Result<&'a str, FormatError> {
    match value {
        Value::Str(s) => Ok(s),
        other => Err(FormatError::schema(
            field,
            format!("expected a string, found {}", other.type_name()),
        )),
    }
}

pub fn as_sym<'a>(value: &'a Value, field: &str) -> Result<&'a str, FormatError> {
    match value {
        Value::Sym(s) => Ok(s),
        other => Err(FormatError::schema(
            field,
            format!("expected a symbol, found {}", other.type_name()),
        )),
    }
}

pub fn as_list<'a>(value: &'a Value, field: &str) -> Result<&'a [Value], FormatError> {
    match value {
        Value::List(items) => Ok(items),
        other => Err(FormatError::schema(
            field,
            format!("expected a list, found {}", other.type_name()),
        )),
    }
}

pub fn as_bool(value: &Value, field: &str) -> Result<bool, FormatError> {
    match as_sym(value, field)? {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(FormatError::schema(
            field,
            format!("expected `true` or `false`, found `{other}`"),
        )),
    }
}
