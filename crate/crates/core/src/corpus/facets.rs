//! Bucketing raw persona attributes into filter facet values.

use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::hierarchy::{Facet, AGE_UNDER_18, UNSPECIFIED};
use super::record::{level_of, Persona, TraitScore};

const KEYWORD_TABLES_JSON: &str = include_str!("../../data/facet_keywords.json");

/// Version of the shipped keyword tables.
pub fn keyword_tables_version() -> u32 {
    TABLES.version
}

#[derive(Debug, Deserialize)]
struct RuleSpec {
    value: String,
    #[serde(default)]
    any: Vec<String>,
    #[serde(default)]
    require: Vec<Vec<String>>,
    #[serde(default)]
    exclude: Vec<String>,
}

#[derive(Debug, Deserialize)]
struct TablesSpec {
    version: u32,
    ancestry: Vec<RuleSpec>,
    household_type: Vec<RuleSpec>,
    employment_status: Vec<RuleSpec>,
    industry_category: Vec<RuleSpec>,
    communication_style: Vec<RuleSpec>,
    activity_style: Vec<RuleSpec>,
    social_style: Vec<RuleSpec>,
}

struct Rule {
    value: String,
    groups: Vec<Regex>,
    exclude: Option<Regex>,
}

/// First-match-wins ordered keyword rules.
struct RuleTable(Vec<Rule>);

struct Tables {
    version: u32,
    ancestry: RuleTable,
    household_type: RuleTable,
    employment_status: RuleTable,
    industry_category: RuleTable,
    communication_style: RuleTable,
    activity_style: RuleTable,
    social_style: RuleTable,
}

fn alternation(words: &[String]) -> Regex {
    let body = words
        .iter()
        .map(|w| regex::escape(&w.to_lowercase()))
        .collect::<Vec<_>>()
        .join("|");
    Regex::new(&format!(r"\b(?:{body})")).expect("keyword regex")
}

impl RuleTable {
    fn compile(facet: Facet, specs: Vec<RuleSpec>) -> Self {
        let rules = specs
            .into_iter()
            .map(|spec| {
                assert!(
                    facet.admits(&spec.value),
                    "keyword table value `{}` not in {facet}",
                    spec.value
                );
                let mut groups = Vec::new();
                if !spec.any.is_empty() {
                    groups.push(alternation(&spec.any));
                }
                groups.extend(spec.require.iter().map(|g| alternation(g)));
                let exclude = (!spec.exclude.is_empty()).then(|| alternation(&spec.exclude));
                Rule {
                    value: spec.value,
                    groups,
                    exclude,
                }
            })
            .collect();
        RuleTable(rules)
    }

    fn classify(&self, text: &str) -> Option<&str> {
        let text = text.to_lowercase();
        self.0
            .iter()
            .find(|rule| {
                rule.groups.iter().all(|g| g.is_match(&text))
                    && !rule.exclude.as_ref().is_some_and(|x| x.is_match(&text))
            })
            .map(|rule| rule.value.as_str())
    }

    /// Every rule that matches, consuming matched spans so later rules cannot
    /// re-match them (`american indian` must not also count as `indian`).
    fn classify_all(&self, text: &str) -> Vec<&str> {
        let mut text = text.to_lowercase();
        let mut hits = Vec::new();
        for rule in &self.0 {
            let mut matched = false;
            for g in &rule.groups {
                let spans: Vec<_> = g.find_iter(&text).map(|m| m.range()).collect();
                for span in spans.into_iter().rev() {
                    matched = true;
                    text.replace_range(span.clone(), &" ".repeat(span.len()));
                }
            }
            if matched && !hits.contains(&rule.value.as_str()) {
                hits.push(rule.value.as_str());
            }
        }
        hits
    }
}

static TABLES: LazyLock<Tables> = LazyLock::new(|| {
    let spec: TablesSpec = serde_json::from_str(KEYWORD_TABLES_JSON).expect("shipped keyword tables are valid JSON");
    Tables {
        version: spec.version,
        ancestry: RuleTable::compile(Facet::Ancestry, spec.ancestry),
        household_type: RuleTable::compile(Facet::HouseholdType, spec.household_type),
        employment_status: RuleTable::compile(Facet::EmploymentStatus, spec.employment_status),
        industry_category: RuleTable::compile(Facet::IndustryCategory, spec.industry_category),
        communication_style: RuleTable::compile(Facet::CommunicationStyle, spec.communication_style),
        activity_style: RuleTable::compile(Facet::ActivityStyle, spec.activity_style),
        social_style: RuleTable::compile(Facet::SocialStyle, spec.social_style),
    }
});

/// Corpus-wide statistics needed for relative facets: big-five tertile cut
/// points, one `(lower, upper)` pair per trait over the numeric scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub tertiles: [Option<(f64, f64)>; 5],
}

impl CorpusStats {
    pub fn from_personas<'a>(personas: impl IntoIterator<Item = &'a Persona>) -> Self {
        let mut columns: [Vec<f64>; 5] = Default::default();
        for p in personas {
            for (i, score) in p.big_five.scores().into_iter().enumerate() {
                if let TraitScore::Numeric(x) = score {
                    columns[i].push(*x);
                }
            }
        }
        let mut stats = CorpusStats::default();
        for (slot, mut column) in stats.tertiles.iter_mut().zip(columns) {
            *slot = tertile_cut_points(&mut column);
        }
        stats
    }

    /// Low / Medium / High for a numeric score of trait `index`. Scores equal
    /// to a cut point fall into the lower band.
    pub fn band(&self, index: usize, score: f64) -> &'static str {
        match self.tertiles[index] {
            Some((lower, _)) if score <= lower => "Low",
            Some((_, upper)) if score <= upper => "Medium",
            Some(_) => "High",
            None => "Medium",
        }
    }
}

/// Nearest-rank 1/3 and 2/3 percentiles.
fn tertile_cut_points(scores: &mut [f64]) -> Option<(f64, f64)> {
    if scores.is_empty() {
        return None;
    }
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let rank = |num: usize| (num * n).div_ceil(3).max(1) - 1;
    Some((scores[rank(1)], scores[rank(2)]))
}

/// Derived facet values, one per [`Facet`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetSet(BTreeMap<Facet, String>);

impl FacetSet {
    pub fn get(&self, facet: Facet) -> &str {
        self.0.get(&facet).map(String::as_str).unwrap_or(UNSPECIFIED)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Facet, &str)> {
        self.0.iter().map(|(f, v)| (*f, v.as_str()))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn age_bucket(age: u32) -> &'static str {
    match age {
        0..=17 => AGE_UNDER_18,
        18..=25 => "18–25",
        26..=35 => "26–35",
        36..=45 => "36–45",
        46..=55 => "46–55",
        56..=65 => "56–65",
        _ => "65+",
    }
}

/// Income band; `employment` decides what an absent income means.
pub fn income_band(income: Option<u64>, employment: &str) -> &'static str {
    match income {
        Some(0) => "No income",
        Some(1..=25_000) => "$0–$25,000",
        Some(25_001..=50_000) => "$25,001–$50,000",
        Some(50_001..=75_000) => "$50,001–$75,000",
        Some(75_001..=100_000) => "$75,001–$100,000",
        Some(100_001..=150_000) => "$100,001–$150,000",
        Some(_) => "$150,001+",
        None if matches!(employment, "Employed" | "Military/Armed Forces") => UNSPECIFIED,
        None => "No income",
    }
}

fn sex_value(raw: Option<String>) -> &'static str {
    let Some(raw) = raw else { return UNSPECIFIED };
    match raw.trim().to_ascii_lowercase().as_str() {
        "male" | "m" | "man" => "Male",
        "female" | "f" | "woman" => "Female",
        _ => UNSPECIFIED,
    }
}

fn disability_value(raw: Option<String>) -> &'static str {
    let Some(raw) = raw else { return "No disability" };
    let t = raw.trim().to_ascii_lowercase();
    let negative = [
        "none",
        "no",
        "false",
        "n/a",
        "no disability",
        "without a disability",
        "without disability",
    ];
    if negative.contains(&t.as_str()) || t.starts_with("no ") {
        "No disability"
    } else {
        "With a disability"
    }
}

fn ancestry_value(persona: &Persona) -> String {
    let classify = |text: Option<String>| -> Option<String> {
        let hits = TABLES.ancestry.classify_all(&text?);
        match hits.as_slice() {
            [] => None,
            [one] => Some(one.to_string()),
            _ => Some("Mixed/Multiracial".to_string()),
        }
    };
    classify(persona.text("ancestry"))
        .or_else(|| classify(persona.text("race")))
        .unwrap_or_else(|| "Other/Unspecified".to_string())
}

/// Explicit field first (if it names a listed value), then keyword rules over
/// the explicit field and the free-text detail fields.
fn style_value(persona: &Persona, facet: Facet, field: &str, table: &RuleTable) -> String {
    let explicit = persona.text(field);
    if let Some(value) = explicit.as_deref().and_then(|e| facet.canonical_value(e)) {
        return value.to_string();
    }
    let sources = [
        explicit,
        persona.text("mannerisms"),
        persona.text("defining_quirks"),
        persona.text("lifestyle"),
        persona.text("personal_time"),
    ];
    sources
        .into_iter()
        .flatten()
        .find_map(|text| table.classify(&text).map(str::to_string))
        .unwrap_or_else(|| UNSPECIFIED.to_string())
}

fn open_value(persona: &Persona, key: &str) -> String {
    persona.text(key).unwrap_or_else(|| UNSPECIFIED.to_string())
}

/// Derive every facet for `persona`. Total: each [`Facet`] gets exactly one
/// value from its domain.
pub fn derive_facets(persona: &Persona, stats: &CorpusStats) -> FacetSet {
    let tables = &*TABLES;
    let mut out = BTreeMap::new();
    let mut put = |facet: Facet, value: String| {
        debug_assert!(facet.admits(&value), "{facet} got {value}");
        out.insert(facet, value);
    };

    put(Facet::Age, age_bucket(persona.age).to_string());
    put(Facet::Sex, sex_value(persona.text("sex")).to_string());
    put(Facet::Ancestry, ancestry_value(persona));
    put(Facet::MaritalStatus, open_value(persona, "marital_status"));
    put(
        Facet::HouseholdType,
        persona
            .text("household_type")
            .and_then(|t| {
                Facet::HouseholdType
                    .canonical_value(&t)
                    .or_else(|| tables.household_type.classify(&t))
                    .map(str::to_string)
            })
            .unwrap_or_else(|| UNSPECIFIED.to_string()),
    );
    put(
        Facet::FamilyPresenceAndAge,
        open_value(persona, "family_presence_and_age"),
    );
    put(
        Facet::Disability,
        disability_value(persona.text("disability")).to_string(),
    );
    put(Facet::Education, open_value(persona, "education"));

    let employment = persona
        .text("employment_status")
        .and_then(|t| {
            Facet::EmploymentStatus
                .canonical_value(&t)
                .or_else(|| tables.employment_status.classify(&t))
                .map(str::to_string)
        })
        .unwrap_or_else(|| if persona.age < 16 { "Too Young to Work" } else { "Other" }.to_string());
    put(Facet::OccupationCategory, open_value(persona, "occupation_category"));
    put(
        Facet::IndustryCategory,
        persona
            .text("industry_category")
            .and_then(|t| {
                Facet::IndustryCategory
                    .canonical_value(&t)
                    .or_else(|| tables.industry_category.classify(&t))
                    .map(str::to_string)
            })
            .unwrap_or_else(|| "Not Applicable".to_string()),
    );
    put(Facet::Income, income_band(persona.income, &employment).to_string());
    put(Facet::EmploymentStatus, employment);

    for (i, (facet, score)) in Facet::BIG_FIVE.into_iter().zip(persona.big_five.scores()).enumerate() {
        let level = match score {
            TraitScore::Numeric(x) => stats.band(i, *x),
            TraitScore::Level(label) => level_of(label).unwrap_or("Medium"),
        };
        put(facet, level.to_string());
    }

    put(
        Facet::CommunicationStyle,
        style_value(
            persona,
            Facet::CommunicationStyle,
            "communication_style",
            &tables.communication_style,
        ),
    );
    put(
        Facet::ActivityStyle,
        style_value(persona, Facet::ActivityStyle, "activity_style", &tables.activity_style),
    );
    put(
        Facet::SocialStyle,
        style_value(persona, Facet::SocialStyle, "social_style", &tables.social_style),
    );
    put(Facet::HouseholdLanguage, open_value(persona, "household_language"));
    put(Facet::Citizenship, open_value(persona, "citizenship"));

    FacetSet(out)
}
