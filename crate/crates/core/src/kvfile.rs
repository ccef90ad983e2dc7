//! Versioned key-value text files.
//!
//! Shared by the manifest, proxy and attack configuration formats:
//!
//! ```text
//! WMCTL-MANIFEST 1
//! # comment
//! key = value
//!
//! key = value      <- a blank line starts a new group
//! ```
//!
//! The first non-comment line is the header `<MAGIC> <VERSION>`. Keys are
//! unique within a group.

use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("ParseError: line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub field: Option<String>,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        ParseError {
            line,
            field: None,
            message: message.into(),
        }
    }

    pub fn field(line: usize, field: &str, message: impl Into<String>) -> Self {
        ParseError {
            line,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvGroup {
    /// 1-based line of the first entry.
    pub line: usize,
    pub entries: Vec<KvEntry>,
}

impl KvGroup {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entry(key).map(|e| e.value.as_str())
    }

    pub fn entry(&self, key: &str) -> Option<&KvEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Looks up a field that must be present.
    pub fn require(&self, key: &str) -> Result<&str, ParseError> {
        self.get(key).ok_or_else(|| {
            ParseError::field(
                self.last_line(),
                key,
                format!("missing field `{key}` in group starting at line {}", self.line),
            )
        })
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        match self.entry(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<T>().map(Some).map_err(|err| {
                ParseError::field(e.line, key, format!("invalid value for `{key}`: {err}"))
            }),
        }
    }

    pub fn parse_required<T: FromStr>(&self, key: &str) -> Result<T, ParseError>
    where
        T::Err: std::fmt::Display,
    {
        self.require(key)?;
        Ok(self.parse(key)?.expect("presence checked"))
    }

    fn last_line(&self) -> usize {
        self.entries.last().map_or(self.line, |e| e.line)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KvDocument {
    pub groups: Vec<KvGroup>,
    /// Line count of the source, for end-of-file diagnostics.
    pub lines: usize,
}

/// Parses `text`, checking the header against `magic` and `version`.
pub fn parse(text: &str, magic: &str, version: u32) -> Result<KvDocument, ParseError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let expected = format!("{magic} {version}");

    let header = loop {
        match lines.next() {
            None => return Err(ParseError::new(1, format!("missing header `{expected}`"))),
            Some((_, l)) if l.trim().is_empty() || l.trim_start().starts_with('#') => continue,
            Some(h) => break h,
        }
    };
    if header.1.trim() != expected {
        let found = header.1.trim();
        let msg = match found.split_whitespace().next() {
            Some(m) if m == magic => format!("unsupported version `{found}`, expected `{expected}`"),
            _ => format!("bad header `{found}`, expected `{expected}`"),
        };
        return Err(ParseError::new(header.0, msg));
    }

    let mut groups = Vec::new();
    let mut current = KvGroup::default();
    let mut total = header.0;
    for (no, raw) in lines {
        total = no;
        let line = raw.trim();
        if line.starts_with('#') {
            continue;
        }
        if line.is_empty() {
            if !current.entries.is_empty() {
                groups.push(std::mem::take(&mut current));
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| ParseError::new(no, format!("expected `key = value`, found `{line}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ParseError::new(no, "empty key"));
        }
        if current.get(key).is_some() {
            return Err(ParseError::field(no, key, format!("duplicate field `{key}`")));
        }
        if current.entries.is_empty() {
            current.line = no;
        }
        current.entries.push(KvEntry {
            key: key.to_string(),
            value: value.trim().to_string(),
            line: no,
        });
    }
    if !current.entries.is_empty() {
        groups.push(current);
    }
    Ok(KvDocument {
        groups,
        lines: total,
    })
}

/// Builder for files in the same format.
#[derive(Debug)]
pub struct KvWriter {
    out: String,
    in_group: bool,
}

impl KvWriter {
    pub fn new(magic: &str, version: u32) -> Self {
        KvWriter {
            out: format!("{magic} {version}\n"),
            in_group: false,
        }
    }

    pub fn field(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        if !self.in_group {
            self.out.push('\n');
            self.in_group = true;
        }
        let _ = writeln!(self.out, "{key} = {value}");
        self
    }

    pub fn end_group(&mut self) -> &mut Self {
        self.in_group = false;
        self
    }

    pub fn finish(self) -> String {
        self.out
    }
}

/// Splits a comma list, dropping empty items.
pub fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// Parses `name:value` pairs from a comma list.
pub fn parse_pairs<T: FromStr>(value: &str, line: usize, key: &str) -> Result<Vec<(String, T)>, ParseError>
where
    T::Err: std::fmt::Display,
{
    split_list(value)
        .map(|item| {
            let (name, v) = item.rsplit_once(':').ok_or_else(|| {
                ParseError::field(line, key, format!("expected `name:value`, found `{item}`"))
            })?;
            let v = v.trim().parse::<T>().map_err(|e| {
                ParseError::field(line, key, format!("invalid value in `{item}`: {e}"))
            })?;
            Ok((name.trim().to_string(), v))
        })
        .collect()
}
