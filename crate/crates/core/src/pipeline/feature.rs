//! Feature-extraction responses: three dimensions of nine `key: phrase`
//! entries each, three phrases per fixed key.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::lenient;
use crate::gateway::ImageRef;

pub const ENTRIES_PER_DIMENSION: usize = 9;
pub const ENTRIES_PER_KEY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dimension {
    Aesthetics,
    Behavioral,
    Contextual,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Aesthetics, Dimension::Behavioral, Dimension::Contextual];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Aesthetics => "aesthetics",
            Dimension::Behavioral => "behavioral",
            Dimension::Contextual => "contextual",
        }
    }

    pub fn keys(self) -> [&'static str; 3] {
        match self {
            Dimension::Aesthetics => ["color", "material", "shape"],
            Dimension::Behavioral => ["physical_action_possibilities", "function", "physical_interaction"],
            Dimension::Contextual => ["symbolic", "environment", "situation"],
        }
    }

    pub fn admits_key(self, key: &str) -> bool {
        self.keys().contains(&key)
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown dimension `{0}`")]
pub struct UnknownDimension(pub String);

impl FromStr for Dimension {
    type Err = UnknownDimension;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "aesthetics" | "aesthetic" => Ok(Dimension::Aesthetics),
            "behavioral" | "behavioural" | "behavior" | "behaviour" => Ok(Dimension::Behavioral),
            "contextual" | "context" => Ok(Dimension::Contextual),
            _ => Err(UnknownDimension(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub key: String,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub persona_id: String,
    pub product_name: String,
    pub image: ImageRef,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub aesthetics: Vec<FeatureEntry>,
    pub behavioral: Vec<FeatureEntry>,
    pub contextual: Vec<FeatureEntry>,
    pub provenance: Provenance,
    pub raw_response: String,
    #[serde(default)]
    pub repair_count: u32,
}

impl FeatureMatrix {
    pub fn entries(&self, dimension: Dimension) -> &[FeatureEntry] {
        match dimension {
            Dimension::Aesthetics => &self.aesthetics,
            Dimension::Behavioral => &self.behavioral,
            Dimension::Contextual => &self.contextual,
        }
    }

    pub fn len(&self) -> usize {
        Dimension::ALL.iter().map(|d| self.entries(*d).len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, dimension: Dimension, key: &str, phrase: &str) -> bool {
        self.entries(dimension)
            .iter()
            .any(|e| e.key == key && e.phrase == phrase)
    }

    /// Canonical response text: re-parsing it yields the same entries.
    pub fn to_response_text(&self) -> String {
        Dimension::ALL
            .iter()
            .map(|d| {
                let items: Vec<String> = self
                    .entries(*d)
                    .iter()
                    .map(|e| format!("{}: {}", e.key, quote(&e.phrase)))
                    .collect();
                format!("{}: [{}]", d.as_str(), items.join(", "))
            })
            .collect::<Vec<_>>()
            .join("\n")
            + "\n"
    }
}

fn quote(phrase: &str) -> String {
    if phrase.contains([',', '[', ']', '"', '{', '}']) || phrase != phrase.trim() {
        serde_json::to_string(phrase).expect("strings serialize")
    } else {
        phrase.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureParseError {
    #[error("response structure not found: {message}")]
    Parse { message: String },
    #[error("unknown key `{key}` under {dimension}")]
    UnknownKey { dimension: Dimension, key: String },
    #[error("{dimension} has {found} entries, expected {ENTRIES_PER_DIMENSION}")]
    Cardinality {
        dimension: Dimension,
        key: Option<String>,
        expected: usize,
        found: usize,
    },
    #[error("phrase `{phrase}` under {dimension}/{key} is a single word")]
    SingleWordPhrase {
        dimension: Dimension,
        key: String,
        phrase: String,
    },
    #[error("phrase `{phrase}` repeats within {dimension}")]
    DuplicatePhrase { dimension: Dimension, phrase: String },
    #[error("empty phrase under {dimension}/{key}")]
    EmptyPhrase { dimension: Dimension, key: String },
}

impl FeatureParseError {
    pub fn code(&self) -> &'static str {
        match self {
            FeatureParseError::Parse { .. } => "parse_error",
            FeatureParseError::UnknownKey { .. } => "unknown_key_error",
            FeatureParseError::Cardinality { .. } => "cardinality_error",
            FeatureParseError::SingleWordPhrase { .. } => "single_word_phrase_error",
            FeatureParseError::DuplicatePhrase { .. } => "duplicate_phrase_error",
            FeatureParseError::EmptyPhrase { .. } => "empty_phrase_error",
        }
    }
}

fn parse_error(message: impl Into<String>) -> FeatureParseError {
    FeatureParseError::Parse {
        message: message.into(),
    }
}

fn normalize_feature_key(raw: &str) -> String {
    lenient::unquote(raw)
        .trim()
        .to_lowercase()
        .split(|c: char| c.is_whitespace() || c == '-' || c == '_')
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join("_")
}

fn dimension_entries(raw: &str, dimension: Dimension, open: usize) -> Result<Vec<FeatureEntry>, FeatureParseError> {
    let (start, end) = lenient::bracket_span(raw, open).map_err(|e| parse_error(format!("{dimension}: {e}")))?;
    let mut entries = Vec::new();
    for item in lenient::split_top_level(&raw[start..end]) {
        let item = item.trim();
        let item = match item.strip_prefix('"').and_then(|t| t.strip_suffix('"')) {
            Some(inner) if !inner.contains('"') => inner,
            _ => item,
        };
        if item.is_empty() {
            continue;
        }
        let (key, value) = item
            .split_once(':')
            .ok_or_else(|| parse_error(format!("{dimension} entry `{item}` has no `key:` prefix")))?;
        let key = normalize_feature_key(key);
        let value = value.trim();
        // `color: [a, b, c]` lists several phrases under one key
        let phrases: Vec<String> = if value.starts_with('[') && value.ends_with(']') {
            lenient::split_top_level(&value[1..value.len() - 1])
                .into_iter()
                .map(value_text)
                .collect()
        } else {
            vec![value_text(value)]
        };
        entries.extend(phrases.into_iter().map(|phrase| FeatureEntry {
            key: key.clone(),
            phrase,
        }));
    }
    Ok(entries)
}

fn value_text(raw: &str) -> String {
    let t = raw.trim();
    if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        if let Ok(s) = serde_json::from_str::<String>(t) {
            return s.trim().to_string();
        }
    }
    lenient::unquote(t).to_string()
}

fn validate(dimension: Dimension, entries: Vec<FeatureEntry>) -> Result<Vec<FeatureEntry>, FeatureParseError> {
    for e in &entries {
        if !dimension.admits_key(&e.key) {
            return Err(FeatureParseError::UnknownKey {
                dimension,
                key: e.key.clone(),
            });
        }
        if e.phrase.trim().is_empty() {
            return Err(FeatureParseError::EmptyPhrase {
                dimension,
                key: e.key.clone(),
            });
        }
        if e.phrase.split_whitespace().count() < 2 {
            return Err(FeatureParseError::SingleWordPhrase {
                dimension,
                key: e.key.clone(),
                phrase: e.phrase.clone(),
            });
        }
    }
    if entries.len() != ENTRIES_PER_DIMENSION {
        return Err(FeatureParseError::Cardinality {
            dimension,
            key: None,
            expected: ENTRIES_PER_DIMENSION,
            found: entries.len(),
        });
    }
    for key in dimension.keys() {
        let found = entries.iter().filter(|e| e.key == key).count();
        if found != ENTRIES_PER_KEY {
            return Err(FeatureParseError::Cardinality {
                dimension,
                key: Some(key.to_string()),
                expected: ENTRIES_PER_KEY,
                found,
            });
        }
    }
    let mut seen = BTreeSet::new();
    for e in &entries {
        if !seen.insert(e.phrase.trim().to_lowercase()) {
            return Err(FeatureParseError::DuplicatePhrase {
                dimension,
                phrase: e.phrase.clone(),
            });
        }
    }
    // canonical order: vocabulary key order, response order within a key
    let mut ordered = Vec::with_capacity(entries.len());
    for key in dimension.keys() {
        ordered.extend(entries.iter().filter(|e| e.key == key).map(|e| FeatureEntry {
            key: e.key.clone(),
            phrase: e.phrase.trim().to_string(),
        }));
    }
    Ok(ordered)
}

/// Parse and validate a raw feature-extraction response.
pub fn parse_feature_response(raw: &str, provenance: Provenance) -> Result<FeatureMatrix, FeatureParseError> {
    if raw.trim().is_empty() {
        return Err(parse_error("empty response"));
    }
    let hits = lenient::find_keys(raw, "aesthetics?|behaviou?ral|contextual");
    let mut parsed: [Option<Vec<FeatureEntry>>; 3] = [None, None, None];
    for hit in hits {
        let dimension: Dimension = hit
            .key
            .parse()
            .map_err(|e: UnknownDimension| parse_error(e.to_string()))?;
        let slot = &mut parsed[dimension as usize];
        if slot.is_none() {
            *slot = Some(dimension_entries(raw, dimension, hit.open)?);
        }
    }
    let mut out = Vec::with_capacity(3);
    for (dimension, entries) in Dimension::ALL.into_iter().zip(parsed) {
        let entries = entries.ok_or_else(|| parse_error(format!("no `{dimension}: [...]` array")))?;
        out.push(validate(dimension, entries)?);
    }
    let contextual = out.pop().expect("three dimensions");
    let behavioral = out.pop().expect("three dimensions");
    let aesthetics = out.pop().expect("three dimensions");
    Ok(FeatureMatrix {
        aesthetics,
        behavioral,
        contextual,
        provenance,
        raw_response: raw.to_string(),
        repair_count: 0,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::gateway::ImageSource;

    pub(crate) fn provenance() -> Provenance {
        Provenance {
            persona_id: "p0001".into(),
            product_name: "YETI Tundra 45 Cooler".into(),
            image: ImageRef {
                url: "https://img.example/yeti.jpg".into(),
                source: ImageSource::Search,
                query: "YETI Tundra 45 Cooler".into(),
                rank: 0,
            },
        }
    }

    pub(crate) fn well_formed() -> String {
        let phrase = |d: Dimension, k: &str, i: usize| format!("{} {k} feature {i}", d.as_str());
        Dimension::ALL
            .iter()
            .map(|d| {
                let items: Vec<String> = d
                    .keys()
                    .iter()
                    .flat_map(|k| (1..=3).map(move |i| format!("{k}: {}", phrase(*d, k, i))))
                    .collect();
                format!("{}: [{}]", d.as_str(), items.join(", "))
            })
            .collect::<Vec<_>>()
            .join("\n")
    }

    #[test]
    fn parses_reference_structure() {
        let m = parse_feature_response(&well_formed(), provenance()).unwrap();
        assert_eq!(m.len(), 27);
        assert_eq!(
            m.aesthetics[0],
            FeatureEntry {
                key: "color".into(),
                phrase: "aesthetics color feature 1".into()
            }
        );
        assert_eq!(m.contextual[8].key, "situation");
        assert!(m.contains(Dimension::Behavioral, "function", "behavioral function feature 2"));
    }

    #[test]
    fn tolerates_quotes_fences_and_grouped_keys() {
        let text = "```\n**Aesthetics**: [\"color\": \"matte desert tan\", \"color: bright white lid\", color: 'soft sage green', material: [rotomolded polyethylene shell, \"thick rubber gasket\", stainless steel hardware], shape: boxy rectangular body, shape: rounded corner edges, shape: \"recessed grab handles, molded in\"]\n"
            .to_string()
            + &well_formed().lines().skip(1).collect::<Vec<_>>().join("\n")
            + "\n```";
        let m = parse_feature_response(&text, provenance()).unwrap();
        let phrases: Vec<&str> = m.aesthetics.iter().map(|e| e.phrase.as_str()).collect();
        assert_eq!(phrases[0], "matte desert tan");
        assert_eq!(phrases[2], "soft sage green");
        assert_eq!(phrases[4], "thick rubber gasket");
        assert_eq!(phrases[8], "recessed grab handles, molded in");
    }

    #[test]
    fn typed_failures() {
        let good = well_formed();
        let cases = [
            (
                good.replace("color: aesthetics color feature 1", "texture: aesthetics texture one"),
                "unknown_key_error",
            ),
            (
                good.replace("aesthetics color feature 1", "sleek"),
                "single_word_phrase_error",
            ),
            (
                good.replace("color: aesthetics color feature 1, ", ""),
                "cardinality_error",
            ),
            (
                good.replace("aesthetics color feature 2", "aesthetics color feature 1"),
                "duplicate_phrase_error",
            ),
            (
                good.replace(
                    "material: aesthetics material feature 1",
                    "color: aesthetics color feature 9",
                ),
                "cardinality_error",
            ),
            (good.lines().take(2).collect::<Vec<_>>().join("\n"), "parse_error"),
        ];
        for (text, code) in cases {
            assert_eq!(
                parse_feature_response(&text, provenance()).unwrap_err().code(),
                code,
                "{text}"
            );
        }
    }

    #[test]
    fn canonical_text_round_trips() {
        let m = parse_feature_response(&well_formed(), provenance()).unwrap();
        let text = m.to_response_text();
        let again = parse_feature_response(&text, provenance()).unwrap();
        assert_eq!(
            (&again.aesthetics, &again.behavioral, &again.contextual),
            (&m.aesthetics, &m.behavioral, &m.contextual)
        );
        assert_eq!(again.to_response_text(), text);
    }
}
