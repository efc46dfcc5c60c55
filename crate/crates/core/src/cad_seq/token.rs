use std::fmt;
use std::ops::Deref;

use serde::{Deserialize, Serialize};

/// Reserved placeholder marking a span to be rewritten. Never part of a valid model.
pub const MASK_TOKEN: &str = "<mask>";

/// Mandatory terminator of a serialized model.
pub const EOM_TOKEN: &str = "<eom>";

/// Whitespace-token view of a serialized sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn new(tokens: Vec<String>) -> Self {
        TokenSequence(tokens)
    }

    pub fn from_strs(tokens: &[&str]) -> Self {
        TokenSequence(tokens.iter().map(|s| s.to_string()).collect())
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }

    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

impl Deref for TokenSequence {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(v: Vec<String>) -> Self {
        TokenSequence(v)
    }
}

impl FromIterator<String> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        TokenSequence(iter.into_iter().collect())
    }
}

impl fmt::Display for TokenSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.join())
    }
}

/// Splits on runs of whitespace.
pub fn tokenize(text: &str) -> TokenSequence {
    text.split_whitespace().map(str::to_owned).collect()
}
