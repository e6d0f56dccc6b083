//! Label normalization and the open tag vocabulary.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LabelError {
    #[error("EMPTY_LABEL: label is empty after normalization")]
    Empty,
}

/// Lowercases, trims and collapses internal whitespace runs to one space.
pub fn normalize_label(raw: &str) -> Result<String, LabelError> {
    let out = normalize_text(raw);
    if out.is_empty() {
        Err(LabelError::Empty)
    } else {
        Ok(out)
    }
}

/// Same normalization as [`normalize_label`] but empty input is allowed.
pub fn normalize_text(raw: &str) -> String {
    raw.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagCategory {
    Object,
    Color,
    Scene,
    Activity,
}

impl TagCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            TagCategory::Object => "object",
            TagCategory::Color => "color",
            TagCategory::Scene => "scene",
            TagCategory::Activity => "activity",
        }
    }
}

impl fmt::Display for TagCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown tag category `{0}` (expected object, color, scene or activity)")]
pub struct UnknownCategory(pub String);

impl FromStr for TagCategory {
    type Err = UnknownCategory;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_lowercase().as_str() {
            "object" => Ok(TagCategory::Object),
            "color" => Ok(TagCategory::Color),
            "scene" => Ok(TagCategory::Scene),
            "activity" => Ok(TagCategory::Activity),
            other => Err(UnknownCategory(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VocabError {
    #[error("line {line}: {source}")]
    Label { line: usize, source: LabelError },
    #[error("line {line}: {source}")]
    Category { line: usize, source: UnknownCategory },
}

/// Normalized label set with one category per label.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TagVocabulary {
    entries: BTreeMap<String, TagCategory>,
}

impl TagVocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` when the normalized label was already present; the
    /// first category wins.
    pub fn insert(&mut self, label: &str, category: TagCategory) -> Result<bool, LabelError> {
        let key = normalize_label(label)?;
        if self.entries.contains_key(&key) {
            return Ok(false);
        }
        self.entries.insert(key, category);
        Ok(true)
    }

    pub fn contains(&self, label: &str) -> bool {
        self.category(label).is_some()
    }

    pub fn category(&self, label: &str) -> Option<TagCategory> {
        let key = normalize_text(label);
        self.entries.get(&key).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `label<TAB>category` lines. A missing category means `object`;
    /// blank lines and `#` comments are skipped.
    pub fn from_lines<'a, I>(lines: I) -> Result<Self, VocabError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Self::new();
        for (idx, raw) in lines.into_iter().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (label, category) = match raw.split_once('\t') {
                Some((l, c)) => (l, c.parse().map_err(|source| VocabError::Category { line, source })?),
                None => (raw, TagCategory::Object),
            };
            vocab.insert(label, category).map_err(|source| VocabError::Label { line, source })?;
        }
        Ok(vocab)
    }
}
