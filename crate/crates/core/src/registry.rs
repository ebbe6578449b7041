//! Name-keyed registries for interchangeable strategies.
//!
//! Motility families and time-integration schemes are both looked up by name
//! at runtime (from a scenario file or the command line). A [`Registry`] maps
//! each name to a builder that consumes an [`Args`] bag of `key = value`
//! settings and returns the strategy behind a shared trait object.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Builder signature shared by every registry entry.
pub type Builder<T> = fn(&mut Args) -> Result<Arc<T>>;

struct Entry<T: ?Sized> {
    description: &'static str,
    build: Builder<T>,
}

pub struct Registry<T: ?Sized> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Entry<T>>,
}

impl<T: ?Sized> Registry<T> {
    pub fn empty(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `build` under `name`, replacing any previous entry.
    pub fn register(&mut self, name: &'static str, description: &'static str, build: Builder<T>) {
        self.entries.insert(name, Entry { description, build });
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.entries.keys().copied()
    }

    pub fn describe(&self) -> Vec<(&'static str, &'static str)> {
        self.entries
            .iter()
            .map(|(name, e)| (*name, e.description))
            .collect()
    }

    /// Builds the strategy registered as `name`. Every key in `args` must be
    /// consumed by the builder; leftovers are reported as unknown keys.
    pub fn build(&self, name: &str, args: &mut Args) -> Result<Arc<T>> {
        let entry = self.entries.get(name).ok_or_else(|| Error::UnknownStrategy {
            kind: self.kind,
            name: name.to_string(),
            known: self.names().collect::<Vec<_>>().join(", "),
        })?;
        let built = (entry.build)(args)?;
        args.finish()?;
        Ok(built)
    }
}

#[derive(Debug, Clone)]
struct Setting {
    key: String,
    value: String,
    line: usize,
    used: bool,
}

/// A bag of `key = value` settings with line numbers for error reporting.
#[derive(Debug, Clone, Default)]
pub struct Args {
    section: String,
    settings: Vec<Setting>,
}

impl Args {
    pub fn new(section: impl Into<String>) -> Self {
        Self {
            section: section.into(),
            settings: Vec::new(),
        }
    }

    pub fn from_pairs(section: &str, pairs: &[(&str, &str)]) -> Self {
        let mut args = Self::new(section);
        for (k, v) in pairs {
            args.push(*k, *v, 0);
        }
        args
    }

    pub fn section(&self) -> &str {
        &self.section
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Into<String>, line: usize) {
        self.settings.push(Setting {
            key: key.into(),
            value: value.into(),
            line,
            used: false,
        });
    }

    pub fn contains(&self, key: &str) -> bool {
        self.settings.iter().any(|s| s.key == key)
    }

    /// Line of `key`, or 0 when absent or set programmatically.
    pub fn line_of(&self, key: &str) -> usize {
        self.settings
            .iter()
            .find(|s| s.key == key)
            .map_or(0, |s| s.line)
    }

    fn take_raw(&mut self, key: &str) -> Option<(String, usize)> {
        let s = self.settings.iter_mut().rev().find(|s| s.key == key)?;
        s.used = true;
        Some((s.value.clone(), s.line))
    }

    fn parse_value<V: FromStr>(&self, key: &str, raw: &str, line: usize, what: &str) -> Result<V> {
        raw.trim().parse::<V>().map_err(|_| Error::Parse {
            line,
            message: format!(
                "[{}] {key}: expected {what}, found `{raw}`",
                self.section
            ),
        })
    }

    pub fn take_str(&mut self, key: &str) -> Result<String> {
        self.take_raw(key)
            .map(|(v, _)| v)
            .ok_or_else(|| Error::MissingKey {
                section: self.section.clone(),
                key: key.to_string(),
            })
    }

    pub fn take_opt_str(&mut self, key: &str) -> Option<String> {
        self.take_raw(key).map(|(v, _)| v)
    }

    pub fn take_f64(&mut self, key: &str) -> Result<f64> {
        match self.take_raw(key) {
            Some((raw, line)) => self.parse_value(key, &raw, line, "a real number"),
            None => Err(Error::MissingKey {
                section: self.section.clone(),
                key: key.to_string(),
            }),
        }
    }

    pub fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.take_raw(key) {
            Some((raw, line)) => self.parse_value(key, &raw, line, "a real number"),
            None => Ok(default),
        }
    }

    pub fn take_u64_or(&mut self, key: &str, default: u64) -> Result<u64> {
        match self.take_raw(key) {
            Some((raw, line)) => self.parse_value(key, &raw, line, "a non-negative integer"),
            None => Ok(default),
        }
    }

    /// Comma-separated list of reals.
    pub fn take_f64_list(&mut self, key: &str) -> Result<Vec<f64>> {
        let (raw, line) = self.take_raw(key).ok_or_else(|| Error::MissingKey {
            section: self.section.clone(),
            key: key.to_string(),
        })?;
        raw.split(',')
            .map(|tok| self.parse_value(key, tok, line, "a list of real numbers"))
            .collect()
    }

    pub fn take_usize_list(&mut self, key: &str) -> Result<Vec<usize>> {
        let (raw, line) = self.take_raw(key).ok_or_else(|| Error::MissingKey {
            section: self.section.clone(),
            key: key.to_string(),
        })?;
        raw.split(',')
            .map(|tok| self.parse_value(key, tok, line, "a list of integers"))
            .collect()
    }

    /// Fails on the first key nobody consumed.
    pub fn finish(&self) -> Result<()> {
        match self.settings.iter().find(|s| !s.used) {
            Some(s) => Err(Error::Parse {
                line: s.line,
                message: format!("unknown key `{}` in [{}]", s.key, self.section),
            }),
            None => Ok(()),
        }
    }
}
