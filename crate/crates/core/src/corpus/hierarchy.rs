//! The persona filter hierarchy.
//!
//! Four top-level groups (Basic Info, Occupation, Personality, Behavioral
//! Traits) plus a collapsed Additional Info group. Every [`Facet`] is a
//! single-valued leaf: a persona has exactly one value for each of them.
//! Free-text attributes (quirks, mannerisms, personal time, lifestyle) sit in
//! the hierarchy as detail-only entries and are not filterable.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub const AGE_BUCKETS: &[&str] = &["18–25", "26–35", "36–45", "46–55", "56–65", "65+"];
pub const AGE_UNDER_18: &str = "Under 18";

pub const SEX_VALUES: &[&str] = &["Male", "Female"];

pub const ANCESTRY_GROUPS: &[&str] = &[
    "European/White",
    "African/African American",
    "Asian/Pacific Islander",
    "Hispanic/Latino",
    "Native American/Indigenous",
    "Middle Eastern/North African",
    "Mixed/Multiracial",
    "Other/Unspecified",
];

pub const HOUSEHOLD_TYPES: &[&str] = &[
    "Living alone",
    "Married couple without children",
    "Married couple with children",
    "Cohabiting couple without children",
    "Cohabiting couple with children",
    "Single parent with children",
    "Living with parents/family",
    "Living with roommates/non-relatives",
    "Multi-generational household",
];

pub const EMPLOYMENT_STATUSES: &[&str] = &[
    "Employed",
    "Military/Armed Forces",
    "Unemployed",
    "Not in Labor Force",
    "Student",
    "Too Young to Work",
    "Other",
];

pub const INDUSTRY_CATEGORIES: &[&str] = &[
    "Administration & Government",
    "Agriculture & Forestry",
    "Arts & Entertainment",
    "Construction",
    "Education",
    "Finance & Insurance",
    "Healthcare & Medical",
    "Technology & Data",
    "Legal Services",
    "Manufacturing",
    "Military",
    "Professional Services",
    "Retail & Sales",
    "Transportation & Logistics",
    "Utilities",
    "Retired",
    "Not Applicable",
];

pub const INCOME_BANDS: &[&str] = &[
    "No income",
    "$0–$25,000",
    "$25,001–$50,000",
    "$50,001–$75,000",
    "$75,001–$100,000",
    "$100,001–$150,000",
    "$150,001+",
];

pub const TRAIT_LEVELS: &[&str] = &["Low", "Medium", "High"];

pub const COMMUNICATION_STYLES: &[&str] = &["Direct", "Diplomatic", "Casual", "Formal", "Expressive", "Reserved"];
pub const ACTIVITY_STYLES: &[&str] = &["Active", "Relaxed", "Social", "Solitary", "Creative", "Routine"];
pub const SOCIAL_STYLES: &[&str] = &[
    "Community-oriented",
    "Family-focused",
    "Independent",
    "Social",
    "Private",
    "Professional",
];

/// Fallback used by facets whose listed values do not cover every raw input.
pub const UNSPECIFIED: &str = "Unspecified";

/// Top-level filter group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Category {
    BasicInfo,
    Occupation,
    Personality,
    BehavioralTraits,
    AdditionalInfo,
}

impl Category {
    pub const ALL: [Category; 5] = [
        Category::BasicInfo,
        Category::Occupation,
        Category::Personality,
        Category::BehavioralTraits,
        Category::AdditionalInfo,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Category::BasicInfo => "BasicInfo",
            Category::Occupation => "Occupation",
            Category::Personality => "Personality",
            Category::BehavioralTraits => "BehavioralTraits",
            Category::AdditionalInfo => "AdditionalInfo",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::BasicInfo => "Basic Info",
            Category::Occupation => "Occupation",
            Category::Personality => "Personality (Big-Five)",
            Category::BehavioralTraits => "Behavioral Traits",
            Category::AdditionalInfo => "Additional Info",
        }
    }

    /// Collapsed groups are present in the hierarchy but folded by default.
    pub fn collapsed(self) -> bool {
        matches!(self, Category::AdditionalInfo)
    }

    /// Attributes listed under the group that are shown in previews but not
    /// bucketed into filter values.
    pub fn detail_only(self) -> &'static [&'static str] {
        match self {
            Category::BehavioralTraits => &["Defining Quirks", "Mannerisms", "Personal Time", "Lifestyle"],
            _ => &[],
        }
    }
}

/// Value domain of a facet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// Fixed list; `fallback` is the declared value for inputs the list does not cover.
    Closed {
        values: &'static [&'static str],
        fallback: Option<&'static str>,
    },
    /// Values come from the corpus itself (trimmed raw text).
    Open,
}

/// A single-valued filter path such as `BasicInfo/Age`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Facet {
    Age,
    Sex,
    Ancestry,
    MaritalStatus,
    HouseholdType,
    FamilyPresenceAndAge,
    Disability,
    Education,
    EmploymentStatus,
    OccupationCategory,
    IndustryCategory,
    Income,
    Openness,
    Conscientiousness,
    Extraversion,
    Agreeableness,
    Neuroticism,
    CommunicationStyle,
    ActivityStyle,
    SocialStyle,
    HouseholdLanguage,
    Citizenship,
}

impl Facet {
    pub const ALL: [Facet; 22] = [
        Facet::Age,
        Facet::Sex,
        Facet::Ancestry,
        Facet::MaritalStatus,
        Facet::HouseholdType,
        Facet::FamilyPresenceAndAge,
        Facet::Disability,
        Facet::Education,
        Facet::EmploymentStatus,
        Facet::OccupationCategory,
        Facet::IndustryCategory,
        Facet::Income,
        Facet::Openness,
        Facet::Conscientiousness,
        Facet::Extraversion,
        Facet::Agreeableness,
        Facet::Neuroticism,
        Facet::CommunicationStyle,
        Facet::ActivityStyle,
        Facet::SocialStyle,
        Facet::HouseholdLanguage,
        Facet::Citizenship,
    ];

    pub const BIG_FIVE: [Facet; 5] = [
        Facet::Openness,
        Facet::Conscientiousness,
        Facet::Extraversion,
        Facet::Agreeableness,
        Facet::Neuroticism,
    ];

    pub fn category(self) -> Category {
        use Facet::*;
        match self {
            Age | Sex | Ancestry | MaritalStatus | HouseholdType | FamilyPresenceAndAge | Disability => {
                Category::BasicInfo
            }
            Education | EmploymentStatus | OccupationCategory | IndustryCategory | Income => Category::Occupation,
            Openness | Conscientiousness | Extraversion | Agreeableness | Neuroticism => Category::Personality,
            CommunicationStyle | ActivityStyle | SocialStyle => Category::BehavioralTraits,
            HouseholdLanguage | Citizenship => Category::AdditionalInfo,
        }
    }

    pub fn label(self) -> &'static str {
        use Facet::*;
        match self {
            Age => "Age",
            Sex => "Sex",
            Ancestry => "Ancestry",
            MaritalStatus => "Marital Status",
            HouseholdType => "Household Type",
            FamilyPresenceAndAge => "Family Presence and Age",
            Disability => "Disability",
            Education => "Education",
            EmploymentStatus => "Employment Status",
            OccupationCategory => "Occupation Category",
            IndustryCategory => "Industry Category",
            Income => "Income",
            Openness => "Openness",
            Conscientiousness => "Conscientiousness",
            Extraversion => "Extraversion",
            Agreeableness => "Agreeableness",
            Neuroticism => "Neuroticism",
            CommunicationStyle => "Communication Style",
            ActivityStyle => "Activity Style",
            SocialStyle => "Social Style",
            HouseholdLanguage => "Household Language",
            Citizenship => "Citizenship",
        }
    }

    /// Label with spaces removed, e.g. `HouseholdType`.
    pub fn leaf_key(self) -> String {
        self.label().replace(' ', "")
    }

    /// Full path, e.g. `BasicInfo/Age`.
    pub fn path(self) -> String {
        format!("{}/{}", self.category().key(), self.leaf_key())
    }

    pub fn domain(self) -> Domain {
        use Facet::*;
        let closed = |values, fallback| Domain::Closed { values, fallback };
        match self {
            Age => closed(AGE_BUCKETS, Some(AGE_UNDER_18)),
            Sex => closed(SEX_VALUES, Some(UNSPECIFIED)),
            Ancestry => closed(ANCESTRY_GROUPS, None),
            HouseholdType => closed(HOUSEHOLD_TYPES, Some(UNSPECIFIED)),
            Disability => closed(&["With a disability", "No disability"], None),
            EmploymentStatus => closed(EMPLOYMENT_STATUSES, None),
            IndustryCategory => closed(INDUSTRY_CATEGORIES, None),
            Income => closed(INCOME_BANDS, Some(UNSPECIFIED)),
            Openness | Conscientiousness | Extraversion | Agreeableness | Neuroticism => closed(TRAIT_LEVELS, None),
            CommunicationStyle => closed(COMMUNICATION_STYLES, Some(UNSPECIFIED)),
            ActivityStyle => closed(ACTIVITY_STYLES, Some(UNSPECIFIED)),
            SocialStyle => closed(SOCIAL_STYLES, Some(UNSPECIFIED)),
            MaritalStatus | FamilyPresenceAndAge | Education | OccupationCategory | HouseholdLanguage | Citizenship => {
                Domain::Open
            }
        }
    }

    /// Whether `value` belongs to this facet's domain (listed values plus the
    /// declared fallback). Open facets accept any non-empty value.
    pub fn admits(self, value: &str) -> bool {
        match self.domain() {
            Domain::Closed { values, fallback } => values.contains(&value) || fallback == Some(value),
            Domain::Open => !value.trim().is_empty(),
        }
    }

    /// Canonical spelling of `value` within this facet's closed domain, matched
    /// loosely (case, whitespace and dash variants ignored).
    pub fn canonical_value(self, value: &str) -> Option<&'static str> {
        let Domain::Closed { values, fallback } = self.domain() else {
            return None;
        };
        let wanted = loose(value);
        values
            .iter()
            .chain(fallback.iter())
            .copied()
            .find(|candidate| loose(candidate) == wanted)
    }
}

/// Normalization used for tolerant matching of paths and values.
pub(crate) fn loose(text: &str) -> String {
    text.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '–' | '—' | '‐' | '−' => '-',
            c => c.to_ascii_lowercase(),
        })
        .collect()
}

impl fmt::Display for Facet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown facet path `{0}`")]
pub struct UnknownFacet(pub String);

impl FromStr for Facet {
    type Err = UnknownFacet;

    /// Accepts the full path (`BasicInfo/Age`), the leaf key (`Age`) or the
    /// label (`Household Type`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = loose(s);
        Facet::ALL
            .into_iter()
            .find(|f| loose(&f.path()) == wanted || loose(f.label()) == wanted)
            .ok_or_else(|| UnknownFacet(s.to_string()))
    }
}

impl Serialize for Facet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.path())
    }
}

impl<'de> Deserialize<'de> for Facet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// JSON description of the hierarchy for clients that render filter panels.
pub fn describe() -> serde_json::Value {
    let groups: Vec<_> = Category::ALL
        .into_iter()
        .map(|category| {
            let facets: Vec<_> = Facet::ALL
                .into_iter()
                .filter(|f| f.category() == category)
                .map(|f| {
                    let (values, fallback) = match f.domain() {
                        Domain::Closed { values, fallback } => (Some(values.to_vec()), fallback),
                        Domain::Open => (None, None),
                    };
                    serde_json::json!({
                        "path": f.path(),
                        "label": f.label(),
                        "values": values,
                        "fallback": fallback,
                    })
                })
                .collect();
            serde_json::json!({
                "key": category.key(),
                "label": category.label(),
                "collapsed": category.collapsed(),
                "facets": facets,
                "detail_only": category.detail_only(),
            })
        })
        .collect();
    serde_json::json!({ "groups": groups })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_round_trip_and_are_unique() {
        let mut seen = std::collections::HashSet::new();
        for facet in Facet::ALL {
            assert!(seen.insert(facet.path()));
            assert_eq!(facet.path().parse::<Facet>().unwrap(), facet);
            assert_eq!(facet.leaf_key().parse::<Facet>().unwrap(), facet);
            assert_eq!(facet.label().parse::<Facet>().unwrap(), facet);
        }
        assert_eq!("occupation/income".parse::<Facet>().unwrap(), Facet::Income);
        assert!("BasicInfo/ShoeSize".parse::<Facet>().is_err());
    }

    #[test]
    fn listed_value_counts() {
        assert_eq!(AGE_BUCKETS.len(), 6);
        assert_eq!(ANCESTRY_GROUPS.len(), 8);
        assert_eq!(HOUSEHOLD_TYPES.len(), 9);
        assert_eq!(EMPLOYMENT_STATUSES.len(), 7);
        assert_eq!(INDUSTRY_CATEGORIES.len(), 17);
        assert_eq!(INCOME_BANDS.len(), 7);
    }

    #[test]
    fn canonical_value_is_dash_and_case_tolerant() {
        assert_eq!(Facet::Age.canonical_value("18-25"), Some("18–25"));
        assert_eq!(
            Facet::Income.canonical_value("$25,001 - $50,000"),
            Some("$25,001–$50,000")
        );
        assert_eq!(Facet::Income.canonical_value("no income"), Some("No income"));
        assert_eq!(Facet::Age.canonical_value("under 18"), Some(AGE_UNDER_18));
        assert_eq!(Facet::Age.canonical_value("99-100"), None);
        assert_eq!(Facet::Education.canonical_value("anything"), None);
    }
}
