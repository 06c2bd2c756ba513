//! Ordered attribute sets.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// A set of attribute names with a stable (lexicographic) iteration order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttrSet(BTreeSet<String>);

impl AttrSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn single(name: &str) -> Self {
        let mut s = Self::new();
        s.insert(name);
        s
    }

    pub fn insert(&mut self, name: &str) -> bool {
        self.0.insert(name.to_string())
    }

    pub fn remove(&mut self, name: &str) -> bool {
        self.0.remove(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains(name)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> + '_ {
        self.0.iter().map(String::as_str)
    }

    pub fn union(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.union(&other.0).cloned().collect())
    }

    pub fn intersection(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.intersection(&other.0).cloned().collect())
    }

    pub fn difference(&self, other: &AttrSet) -> AttrSet {
        AttrSet(self.0.difference(&other.0).cloned().collect())
    }

    pub fn is_subset(&self, other: &AttrSet) -> bool {
        self.0.is_subset(&other.0)
    }

    pub fn with(&self, name: &str) -> AttrSet {
        let mut s = self.clone();
        s.insert(name);
        s
    }

    pub fn without(&self, name: &str) -> AttrSet {
        let mut s = self.clone();
        s.remove(name);
        s
    }
}

impl<S: AsRef<str>> FromIterator<S> for AttrSet {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        AttrSet(iter.into_iter().map(|s| s.as_ref().to_string()).collect())
    }
}

impl<'a> IntoIterator for &'a AttrSet {
    type Item = &'a String;
    type IntoIter = std::collections::btree_set::Iter<'a, String>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

impl fmt::Display for AttrSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<&str> = self.iter().collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses a comma separated list such as `A,B,C`. Blank items are ignored.
impl FromStr for AttrSet {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Ok(s.split(',').map(str::trim).filter(|p| !p.is_empty()).collect())
    }
}
