//! Name-keyed registries of interchangeable strategies.
//!
//! Every family of swappable algorithms in the crate (photon sources, FWHM
//! estimators, assignment solvers, readout-chain presets) implements a common
//! trait and is registered here under a stable name, so the CLI and config
//! files can select it at runtime.

use std::collections::BTreeMap;
use std::fmt;

/// Implemented by everything that can live in a [`Registry`].
pub trait Named {
    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} '{requested}' (available: {available})")]
pub struct UnknownStrategy {
    pub kind: &'static str,
    pub requested: String,
    pub available: String,
}

pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: BTreeMap<&'static str, Box<T>>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
        }
    }

    /// Registers `entry` under its own name, replacing any previous entry.
    pub fn register(&mut self, entry: Box<T>) -> &mut Self {
        self.entries.insert(entry.name(), entry);
        self
    }

    pub fn with(mut self, entry: Box<T>) -> Self {
        self.register(entry);
        self
    }

    pub fn get(&self, name: &str) -> Result<&T, UnknownStrategy> {
        self.entries
            .get(name)
            .map(|b| b.as_ref())
            .ok_or_else(|| UnknownStrategy {
                kind: self.kind,
                requested: name.to_string(),
                available: self.names().join(", "),
            })
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.keys().copied().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl<T: ?Sized + Named> fmt::Debug for Registry<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("kind", &self.kind)
            .field("entries", &self.names())
            .finish()
    }
}
