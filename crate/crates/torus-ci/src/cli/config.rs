//! Sectioned `key = value` configuration files.
//!
//! Grammar, one item per line:
//!
//! ```text
//! # comment            (also after a value)
//! [section]            section names: letters, digits, '.', '_', '-'
//! key = value          keys: letters, digits, '_'
//! ```
//!
//! Keys before the first section header belong to the section `run`. Values are
//! raw text up to a `#` or the end of the line; lists are comma separated.
//! Every key must be consumed by the command that reads the file; leftovers are
//! reported with their position.

use crate::error::{Error, Result};
use std::collections::BTreeMap;
use std::str::FromStr;

#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
    /// Column of the first character of the value (1-based).
    pub col: usize,
    /// Column of the key.
    pub key_col: usize,
}

#[derive(Debug, Default)]
pub struct Config {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
    header_line: BTreeMap<String, usize>,
    used: std::sync::Mutex<std::collections::BTreeSet<(String, String)>>,
}

fn parse_err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col, msg: msg.into() }
}

fn is_name(s: &str, extra: &[char]) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || extra.contains(&c))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        let mut section = "run".to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let body = raw.split('#').next().unwrap_or("");
            let lead = body.len() - body.trim_start().len();
            let t = body.trim();
            if t.is_empty() {
                continue;
            }
            if let Some(rest) = t.strip_prefix('[') {
                let Some(name) = rest.strip_suffix(']') else {
                    return Err(parse_err(line, lead + t.len() + 1, "expected ']' to close the section header"));
                };
                let name = name.trim();
                if !is_name(name, &['.', '-']) {
                    return Err(parse_err(line, lead + 2, format!("invalid section name '{name}'")));
                }
                if cfg.header_line.contains_key(name) {
                    return Err(parse_err(line, lead + 1, format!("section [{name}] repeated")));
                }
                cfg.header_line.insert(name.to_string(), line);
                section = name.to_string();
                continue;
            }
            let Some(eq) = t.find('=') else {
                return Err(parse_err(line, lead + 1, "expected 'key = value' or '[section]'"));
            };
            let key = t[..eq].trim();
            if !is_name(key, &[]) {
                return Err(parse_err(line, lead + 1, format!("invalid key '{key}'")));
            }
            let after = &t[eq + 1..];
            let value = after.trim();
            if value.is_empty() {
                return Err(parse_err(line, lead + eq + 2, format!("missing value for '{key}'")));
            }
            let col = lead + eq + 2 + (after.len() - after.trim_start().len());
            let entries = cfg.sections.entry(section.clone()).or_default();
            if entries.contains_key(key) {
                return Err(parse_err(line, lead + 1, format!("key '{key}' repeated in [{section}]")));
            }
            entries.insert(key.to_string(), Entry { value: value.to_string(), line, col, key_col: lead + 1 });
        }
        Ok(cfg)
    }

    pub fn has_section(&self, s: &str) -> bool {
        self.sections.contains_key(s) || self.header_line.contains_key(s)
    }

    pub fn section_names(&self) -> Vec<String> {
        let mut v: Vec<String> = self.sections.keys().chain(self.header_line.keys()).cloned().collect();
        v.sort();
        v.dedup();
        v
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        let e = self.sections.get(section)?.get(key)?;
        self.used.lock().expect("lock").insert((section.to_string(), key.to_string()));
        Some(e)
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse::<T>()
                .map(Some)
                .map_err(|_| parse_err(e.line, e.col, format!("cannot parse '{}' as {} for {section}.{key}", e.value, type_name::<T>()))),
        }
    }

    pub fn get_or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?
            .ok_or_else(|| parse_err(self.header_line.get(section).copied().unwrap_or(0), 1, format!("missing required key {section}.{key}")))
    }

    pub fn get_list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entry(section, key) else { return Ok(None) };
        let mut out = Vec::new();
        let mut offset = 0;
        for item in e.value.split(',') {
            let s = item.trim();
            let col = e.col + offset + (item.len() - item.trim_start().len());
            offset += item.len() + 1;
            if s.is_empty() {
                continue;
            }
            out.push(s.parse::<T>().map_err(|_| parse_err(e.line, col, format!("cannot parse list item '{s}' for {section}.{key}")))?);
        }
        Ok(Some(out))
    }

    /// Position of a value, for errors raised after parsing.
    pub fn position(&self, section: &str, key: &str) -> (usize, usize) {
        self.sections.get(section).and_then(|s| s.get(key)).map(|e| (e.line, e.col)).unwrap_or((0, 0))
    }

    pub fn invalid(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        let (line, col) = self.position(section, key);
        parse_err(line, col, msg)
    }

    /// Errors on the first key (in file order) that nobody asked for.
    pub fn finish(&self) -> Result<()> {
        let used = self.used.lock().expect("lock");
        let mut left: Vec<(usize, usize, String)> = Vec::new();
        for (s, entries) in &self.sections {
            for (k, e) in entries {
                if !used.contains(&(s.clone(), k.clone())) {
                    left.push((e.line, e.key_col, format!("unknown key '{k}' in [{s}]")));
                }
            }
        }
        for (s, line) in &self.header_line {
            let any_used = used.iter().any(|(us, _)| us == s);
            if !any_used && self.sections.get(s).is_none_or(|e| e.is_empty()) {
                left.push((*line, 1, format!("unknown or empty section [{s}]")));
            }
        }
        left.sort();
        match left.into_iter().next() {
            Some((line, col, msg)) => Err(parse_err(line, col, msg)),
            None => Ok(()),
        }
    }

    pub fn keys(&self, section: &str) -> Vec<String> {
        self.sections.get(section).map(|s| s.keys().cloned().collect()).unwrap_or_default()
    }

    /// Canonical text of every entry, sorted by section and key.
    pub fn resolved(&self) -> BTreeMap<String, BTreeMap<String, String>> {
        self.sections.iter().map(|(s, e)| (s.clone(), e.iter().map(|(k, v)| (k.clone(), v.value.clone())).collect())).collect()
    }
}

fn type_name<T>() -> &'static str {
    let n = std::any::type_name::<T>();
    match n {
        "f64" => "a real number",
        "bool" => "true/false",
        "alloc::string::String" => "text",
        _ if n.starts_with('u') || n.starts_with('i') => "an integer",
        _ => n,
    }
}
