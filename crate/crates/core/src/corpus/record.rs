//! Persona records as they come off the corpus stream.

use indexmap::IndexMap;
use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::sync::LazyLock;

use super::LoadError;

/// Big-five trait names, in the order used everywhere in this crate.
pub const BIG_FIVE_TRAITS: [&str; 5] = [
    "openness",
    "conscientiousness",
    "extraversion",
    "agreeableness",
    "neuroticism",
];

/// Attribute keys the product-inference prompt treats as objective.
pub const OBJECTIVE_ATTRIBUTES: [&str; 10] = [
    "age",
    "sex",
    "race",
    "ancestry",
    "education",
    "employment_status",
    "industry_category",
    "occupation_category",
    "income",
    "disability",
];

/// Attribute keys the product-inference prompt treats as subjective.
pub const SUBJECTIVE_ATTRIBUTES: [&str; 5] = [
    "big_five_scores",
    "defining_quirks",
    "mannerisms",
    "personal_time",
    "lifestyle",
];

/// Free-text fields surfaced in previews.
pub const DETAIL_TEXT_FIELDS: [&str; 7] = [
    "defining_quirks",
    "mannerisms",
    "personal_time",
    "lifestyle",
    "communication_style",
    "activity_style",
    "social_style",
];

/// One big-five score, either numeric or an already-banded label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TraitScore {
    Numeric(f64),
    Level(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigFive {
    pub openness: TraitScore,
    pub conscientiousness: TraitScore,
    pub extraversion: TraitScore,
    pub agreeableness: TraitScore,
    pub neuroticism: TraitScore,
}

impl BigFive {
    pub fn scores(&self) -> [&TraitScore; 5] {
        [
            &self.openness,
            &self.conscientiousness,
            &self.extraversion,
            &self.agreeableness,
            &self.neuroticism,
        ]
    }
}

/// A census-derived persona. `raw` keeps every attribute of the source record
/// under snake_case keys, in source order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Persona {
    pub id: String,
    pub age: u32,
    pub income: Option<u64>,
    pub big_five: BigFive,
    pub raw: IndexMap<String, Value>,
}

impl Persona {
    /// Attribute as display text; `None` for missing, null or empty values.
    pub fn text(&self, key: &str) -> Option<String> {
        match self.raw.get(key)? {
            Value::Null => None,
            Value::String(s) if s.trim().is_empty() => None,
            Value::String(s) => Some(s.trim().to_string()),
            Value::Bool(b) => Some(if *b { "Yes" } else { "No" }.to_string()),
            other => Some(other.to_string()),
        }
    }

    pub(crate) fn from_value(index: usize, value: Value) -> Result<Self, LoadError> {
        let Value::Object(object) = value else {
            return Err(LoadError::field(index, "<record>", "expected a JSON object"));
        };
        let raw: IndexMap<String, Value> = object.into_iter().map(|(k, v)| (normalize_key(&k), v)).collect();

        let id = match raw.get("id") {
            None | Some(Value::Null) => format!("p{:04}", index + 1),
            Some(Value::String(s)) if !s.trim().is_empty() => s.trim().to_string(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err(LoadError::field(index, "id", "must be a non-empty string or number")),
        };

        let age = match raw.get("age") {
            None | Some(Value::Null) => return Err(LoadError::field(index, "age", "missing")),
            Some(v) => match number_of(v) {
                Some(a) if a.is_finite() && a >= 0.0 => a.floor() as u32,
                Some(_) => return Err(LoadError::field(index, "age", "must be a non-negative number")),
                None => return Err(LoadError::field(index, "age", format!("not a number: {v}"))),
            },
        };

        let income = match raw.get("income") {
            None | Some(Value::Null) => None,
            Some(Value::String(s)) if is_no_income_text(s) => Some(0),
            Some(v) => match number_of(v) {
                Some(x) if x.is_finite() && x >= 0.0 => Some(x.round() as u64),
                Some(_) => return Err(LoadError::field(index, "income", "must be non-negative")),
                None => return Err(LoadError::field(index, "income", format!("not a number: {v}"))),
            },
        };

        let big_five = parse_big_five(index, &raw)?;

        Ok(Persona {
            id,
            age,
            income,
            big_five,
            raw,
        })
    }
}

/// `Big Five Scores` / `big-five-scores` → `big_five_scores`.
pub fn normalize_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for c in key.trim().chars() {
        if c.is_alphanumeric() {
            out.extend(c.to_lowercase());
        } else if !out.ends_with('_') && !out.is_empty() {
            out.push('_');
        }
    }
    out.trim_end_matches('_').to_string()
}

fn is_no_income_text(s: &str) -> bool {
    let t = s.trim().to_ascii_lowercase();
    t.is_empty() || t == "none" || t == "no income" || t == "n/a"
}

fn number_of(value: &Value) -> Option<f64> {
    match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let cleaned: String = s.chars().filter(|c| !matches!(c, '$' | ',' | ' ')).collect();
            cleaned.parse().ok()
        }
        _ => None,
    }
}

static TRAIT_PAIR: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?i)(openness|conscientiousness|extraversion|extroversion|agreeableness|neuroticism)\W*?[:=]\s*([^,;}\n]+)",
    )
    .expect("static regex")
});

fn parse_big_five(index: usize, raw: &IndexMap<String, Value>) -> Result<BigFive, LoadError> {
    let mut found: [Option<TraitScore>; 5] = Default::default();
    let slot = |name: &str| {
        let name = name.to_ascii_lowercase();
        let name = if name == "extroversion" {
            "extraversion".to_string()
        } else {
            name
        };
        BIG_FIVE_TRAITS.iter().position(|t| *t == name)
    };

    match raw.get("big_five_scores") {
        Some(Value::Object(map)) => {
            for (k, v) in map {
                if let Some(i) = slot(&normalize_key(k)) {
                    found[i] = Some(trait_score(index, BIG_FIVE_TRAITS[i], v)?);
                }
            }
        }
        Some(Value::String(s)) => {
            for caps in TRAIT_PAIR.captures_iter(s) {
                if let Some(i) = slot(&caps[1]) {
                    let text = caps[2].trim().trim_matches(|c| c == '"' || c == '\'');
                    found[i] = Some(trait_score(
                        index,
                        BIG_FIVE_TRAITS[i],
                        &Value::String(text.to_string()),
                    )?);
                }
            }
        }
        Some(Value::Null) | None => {
            // flat layout: openness / conscientiousness / ... as top-level keys
            for (i, name) in BIG_FIVE_TRAITS.iter().enumerate() {
                if let Some(v) = raw.get(*name) {
                    found[i] = Some(trait_score(index, name, v)?);
                }
            }
        }
        Some(_) => {
            return Err(LoadError::field(
                index,
                "big_five_scores",
                "expected an object or a text listing",
            ));
        }
    }

    let [o, c, e, a, n] = found;
    let take = |score: Option<TraitScore>, name: &str| {
        score.ok_or_else(|| LoadError::field(index, format!("big_five_scores.{name}"), "missing"))
    };
    Ok(BigFive {
        openness: take(o, "openness")?,
        conscientiousness: take(c, "conscientiousness")?,
        extraversion: take(e, "extraversion")?,
        agreeableness: take(a, "agreeableness")?,
        neuroticism: take(n, "neuroticism")?,
    })
}

fn trait_score(index: usize, name: &str, value: &Value) -> Result<TraitScore, LoadError> {
    let field = format!("big_five_scores.{name}");
    if let Some(x) = number_of(value) {
        if !x.is_finite() {
            return Err(LoadError::field(index, field, "score is not finite"));
        }
        return Ok(TraitScore::Numeric(x));
    }
    match value {
        Value::String(s) if level_of(s).is_some() => Ok(TraitScore::Level(s.trim().to_string())),
        other => Err(LoadError::field(index, field, format!("unrecognized score {other}"))),
    }
}

/// Banding for label-valued scores.
pub(crate) fn level_of(label: &str) -> Option<&'static str> {
    let l = label.to_ascii_lowercase();
    if l.contains("low") {
        Some("Low")
    } else if l.contains("high") {
        Some("High")
    } else if ["medium", "average", "moderate", "mid", "neutral"]
        .iter()
        .any(|m| l.contains(m))
    {
        Some("Medium")
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(extra: Value) -> Value {
        let mut base = json!({
            "id": "x1",
            "age": 30,
            "income": 42000,
            "big_five_scores": {"Openness": 0.5, "Conscientiousness": 0.4, "Extraversion": 0.3, "Agreeableness": 0.2, "Neuroticism": 0.1}
        });
        for (k, v) in extra.as_object().unwrap() {
            base[k] = v.clone();
        }
        base
    }

    #[test]
    fn keys_are_snake_cased() {
        assert_eq!(normalize_key("Big Five Scores"), "big_five_scores");
        assert_eq!(normalize_key("employment-status"), "employment_status");
        assert_eq!(normalize_key(" Family Presence and Age "), "family_presence_and_age");
    }

    #[test]
    fn big_five_text_listing() {
        let p = Persona::from_value(
            0,
            record(json!({"big_five_scores": "Openness: High, Conscientiousness: Average, Extraversion: Low, Agreeableness: High, Neuroticism: Low"})),
        )
        .unwrap();
        assert_eq!(p.big_five.openness, TraitScore::Level("High".into()));
        assert_eq!(p.big_five.conscientiousness, TraitScore::Level("Average".into()));
    }

    #[test]
    fn missing_trait_names_the_field() {
        let err = Persona::from_value(3, record(json!({"big_five_scores": {"openness": 1, "conscientiousness": 1, "extraversion": 1, "agreeableness": 1}})))
            .unwrap_err();
        match err {
            LoadError::Field { index, field, .. } => {
                assert_eq!(index, 3);
                assert_eq!(field, "big_five_scores.neuroticism");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn income_text_forms() {
        let p = Persona::from_value(0, record(json!({"income": "$52,300"}))).unwrap();
        assert_eq!(p.income, Some(52300));
        let p = Persona::from_value(0, record(json!({"income": "None"}))).unwrap();
        assert_eq!(p.income, Some(0));
        assert!(Persona::from_value(0, record(json!({"income": -5}))).is_err());
        assert!(Persona::from_value(0, record(json!({"income": "lots"}))).is_err());
    }

    #[test]
    fn age_is_required_and_non_negative() {
        let mut r = record(json!({}));
        r.as_object_mut().unwrap().remove("age");
        assert!(matches!(Persona::from_value(0, r), Err(LoadError::Field { field, .. }) if field == "age"));
        assert!(Persona::from_value(0, record(json!({"age": -1}))).is_err());
    }

    #[test]
    fn missing_id_is_synthesized_from_position() {
        let mut r = record(json!({}));
        r.as_object_mut().unwrap().remove("id");
        assert_eq!(Persona::from_value(41, r).unwrap().id, "p0042");
    }
}
