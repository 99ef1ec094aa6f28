//! The plain-text record format shared by the registry, the store log and
//! run outcome files.
//!
//! ```text
//! # comment
//! [project:HTTPCLIENT]
//! repo_url = https://github.com/apache/httpcomponents-client.git
//! tracker_kind = jira
//!
//! [project:OTHER]
//! ...
//! ```
//!
//! A section header is `[kind:name]` (or `[kind]`), each field is
//! `name = value` with single spaces around `=`, and sections are separated
//! by one blank line. Field names may repeat. Values are written verbatim
//! except that `\`, newline and carriage return are escaped as `\\`, `\n`
//! and `\r`, so every value fits on one line.

use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Section {
    pub kind: String,
    pub name: String,
    pub fields: Vec<(String, String)>,
}

impl Section {
    pub fn new(kind: impl Into<String>, name: impl Into<String>) -> Self {
        Section {
            kind: kind.into(),
            name: name.into(),
            fields: Vec::new(),
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>) -> &mut Self {
        self.fields.push((key.into(), value.into()));
        self
    }

    pub fn push_opt(&mut self, key: &str, value: Option<impl Into<String>>) -> &mut Self {
        if let Some(v) = value {
            self.push(key, v);
        }
        self
    }

    /// Last value for `key`; later lines override earlier ones.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn get_all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.fields
            .iter()
            .filter(move |(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if self.name.is_empty() {
            let _ = writeln!(out, "[{}]", self.kind);
        } else {
            let _ = writeln!(out, "[{}:{}]", self.kind, self.name);
        }
        for (k, v) in &self.fields {
            let _ = writeln!(out, "{} = {}", k, escape(v));
        }
        out
    }
}

/// Renders sections separated by blank lines, with an optional preamble of
/// comment lines.
pub fn render(preamble: &[String], sections: &[Section]) -> String {
    let mut out = String::new();
    for line in preamble {
        out.push_str(line);
        out.push('\n');
    }
    if !preamble.is_empty() && !sections.is_empty() {
        out.push('\n');
    }
    for (i, section) in sections.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        out.push_str(&section.render());
    }
    out
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Document {
    /// Comment lines before the first section, kept verbatim.
    pub preamble: Vec<String>,
    pub sections: Vec<Section>,
}

pub fn parse(text: &str) -> Result<Document, ParseError> {
    let mut doc = Document::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('#') {
            if doc.sections.is_empty() {
                doc.preamble.push(raw.to_string());
            }
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let inner = inner.strip_suffix(']').ok_or_else(|| ParseError {
                line: line_no,
                message: format!("unterminated section header {line:?}"),
            })?;
            let (kind, name) = match inner.split_once(':') {
                Some((k, n)) => (k.trim(), n.trim()),
                None => (inner.trim(), ""),
            };
            if kind.is_empty() {
                return Err(ParseError {
                    line: line_no,
                    message: "empty section kind".into(),
                });
            }
            doc.sections.push(Section::new(kind, name));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ParseError {
                line: line_no,
                message: format!("expected `name = value`, got {line:?}"),
            });
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(ParseError {
                line: line_no,
                message: "empty field name".into(),
            });
        }
        let section = doc.sections.last_mut().ok_or_else(|| ParseError {
            line: line_no,
            message: "field outside of any section".into(),
        })?;
        section.fields.push((key.to_string(), unescape(value.trim())));
    }
    Ok(doc)
}

pub fn escape(value: &str) -> String {
    if !value.contains(['\\', '\n', '\r']) {
        return value.to_string();
    }
    let mut out = String::with_capacity(value.len() + 4);
    for c in value.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

pub fn unescape(value: &str) -> String {
    if !value.contains('\\') {
        return value.to_string();
    }
    let mut out = String::with_capacity(value.len());
    let mut chars = value.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
