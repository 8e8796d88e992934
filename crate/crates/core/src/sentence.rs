use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// A sequence of terminal (or class) ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sentence(pub Vec<usize>);

impl Sentence {
    pub fn new(tokens: Vec<usize>) -> Self {
        Sentence(tokens)
    }

    pub fn tokens(&self) -> &[usize] {
        &self.0
    }

    pub fn into_tokens(self) -> Vec<usize> {
        self.0
    }

    /// Token names looked up in `names`.
    pub fn names<'a>(&self, names: &'a [String]) -> Vec<&'a str> {
        self.0.iter().map(|&t| names[t].as_str()).collect()
    }

    /// Renders the sentence through a name table, space separated.
    pub fn display_with<'a>(&'a self, names: &'a [String]) -> impl fmt::Display + 'a {
        DisplayWith {
            tokens: &self.0,
            names,
        }
    }
}

struct DisplayWith<'a> {
    tokens: &'a [usize],
    names: &'a [String],
}

impl fmt::Display for DisplayWith<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &t) in self.tokens.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match self.names.get(t) {
                Some(name) => f.write_str(name)?,
                None => write!(f, "#{t}")?,
            }
        }
        Ok(())
    }
}

impl Deref for Sentence {
    type Target = [usize];

    fn deref(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for Sentence {
    fn from(tokens: Vec<usize>) -> Self {
        Sentence(tokens)
    }
}

impl FromIterator<usize> for Sentence {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        Sentence(iter.into_iter().collect())
    }
}
