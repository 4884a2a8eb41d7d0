//! Product-inference responses: the `products` / `attributes` / `reasons`
//! arrays, validated into a batch of exactly nine suggestions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::lenient::{self, Node};
use crate::corpus::record::{normalize_key, BIG_FIVE_TRAITS, OBJECTIVE_ATTRIBUTES, SUBJECTIVE_ATTRIBUTES};
use crate::gateway::ImageRef;

pub const PRODUCT_COUNT: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductSuggestion {
    pub name: String,
    pub considered_attributes: Vec<String>,
    pub reason: String,
    pub category_hint: String,
    #[serde(default)]
    pub image: Option<ImageRef>,
    #[serde(default)]
    pub image_rotation_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductBatch {
    pub persona_id: String,
    pub suggestions: Vec<ProductSuggestion>,
    pub raw_response: String,
    #[serde(default)]
    pub repair_count: u32,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProductParseError {
    #[error("response structure not found: {message}")]
    Parse { message: String },
    #[error("expected exactly {PRODUCT_COUNT} products, found {found}")]
    Cardinality { found: usize },
    #[error("{array} has {found} entries but products has {expected}")]
    Alignment {
        array: String,
        expected: usize,
        found: usize,
    },
    #[error("duplicate product name `{name}`")]
    DuplicateName { name: String },
    #[error("empty {field} at position {index}")]
    EmptyField { field: String, index: usize },
    #[error("unknown persona attribute `{attribute}` for product {index}")]
    UnknownAttribute { attribute: String, index: usize },
}

impl ProductParseError {
    pub fn code(&self) -> &'static str {
        match self {
            ProductParseError::Parse { .. } => "parse_error",
            ProductParseError::Cardinality { .. } => "cardinality_error",
            ProductParseError::Alignment { .. } => "alignment_error",
            ProductParseError::DuplicateName { .. } => "duplicate_name_error",
            ProductParseError::EmptyField { .. } => "empty_field_error",
            ProductParseError::UnknownAttribute { .. } => "unknown_attribute_error",
        }
    }
}

fn parse_error(message: impl Into<String>) -> ProductParseError {
    ProductParseError::Parse {
        message: message.into(),
    }
}

const ALIASES: [(&str, &str); 14] = [
    ("big_five", "big_five_scores"),
    ("big5", "big_five_scores"),
    ("big_5", "big_five_scores"),
    ("personality", "big_five_scores"),
    ("big_five_traits", "big_five_scores"),
    ("quirks", "defining_quirks"),
    ("hobbies", "personal_time"),
    ("occupation", "occupation_category"),
    ("industry", "industry_category"),
    ("employment", "employment_status"),
    ("gender", "sex"),
    ("ethnicity", "race"),
    ("education_level", "education"),
    ("annual_income", "income"),
];

/// The vocabulary name for an attribute the model cited, if it is one.
pub fn canonical_attribute(raw: &str) -> Option<String> {
    let key = normalize_key(lenient::unquote(raw));
    let key = key.trim_matches('_');
    OBJECTIVE_ATTRIBUTES
        .iter()
        .chain(SUBJECTIVE_ATTRIBUTES.iter())
        .chain(BIG_FIVE_TRAITS.iter())
        .find(|name| **name == key)
        .map(|name| name.to_string())
        .or_else(|| {
            ALIASES
                .iter()
                .find(|(alias, _)| *alias == key)
                .map(|(_, name)| name.to_string())
        })
}

const CATEGORY_KEYWORDS: [(&str, &[&str]); 12] = [
    (
        "Kitchen & Appliances",
        &[
            "kettle",
            "blender",
            "mixer",
            "coffee",
            "espresso",
            "cooker",
            "instant pot",
            "air fryer",
            "toaster",
            "knife",
            "cookware",
            "skillet",
            "oven",
            "vacuum",
            "roomba",
            "dyson v",
        ],
    ),
    (
        "Electronics",
        &[
            "phone",
            "iphone",
            "ipad",
            "tablet",
            "laptop",
            "macbook",
            "headphone",
            "earbud",
            "airpods",
            "speaker",
            "kindle",
            "camera",
            "watch",
            "monitor",
            "console",
            "switch",
            "echo",
            "tv",
        ],
    ),
    (
        "Furniture & Home",
        &[
            "chair", "desk", "sofa", "couch", "lamp", "mattress", "pillow", "bed", "shelf", "table", "rug", "blanket",
            "recliner",
        ],
    ),
    (
        "Tools & Hardware",
        &[
            "drill",
            "saw",
            "wrench",
            "tool",
            "dewalt",
            "makita",
            "milwaukee",
            "screwdriver",
            "multitool",
            "leatherman",
        ],
    ),
    (
        "Apparel & Footwear",
        &[
            "jacket", "shoe", "sneaker", "boot", "jeans", "coat", "shirt", "hoodie", "sweater", "dress", "sock",
        ],
    ),
    (
        "Bags & Travel",
        &["backpack", "luggage", "suitcase", "tote", "bag", "duffel"],
    ),
    (
        "Sports & Outdoors",
        &[
            "bike",
            "bicycle",
            "tent",
            "cooler",
            "yeti",
            "kayak",
            "golf",
            "racket",
            "treadmill",
            "dumbbell",
            "yoga",
            "hiking",
            "helmet",
            "stove",
            "fishing",
        ],
    ),
    (
        "Health & Personal Care",
        &[
            "massage",
            "massager",
            "toothbrush",
            "blood pressure",
            "thermometer",
            "scale",
            "hair dryer",
            "shaver",
            "humidifier",
            "theragun",
        ],
    ),
    (
        "Mobility & Vehicles",
        &[
            "scooter",
            "wheelchair",
            "walker",
            "car seat",
            "stroller",
            "e-bike",
            "cane",
        ],
    ),
    (
        "Hobbies & Creative",
        &[
            "guitar",
            "piano",
            "keyboard",
            "paint",
            "easel",
            "sewing",
            "knitting",
            "lego",
            "puzzle",
            "telescope",
            "pottery",
            "wheel",
            "drawing",
            "sketch",
            "3d printer",
        ],
    ),
    (
        "Garden & Outdoor Living",
        &["grill", "garden", "mower", "planter", "hose", "patio", "weber"],
    ),
    (
        "Caregiving & Family",
        &["baby", "monitor for", "crib", "pet", "dog", "cat"],
    ),
];

pub const OTHER_CATEGORY: &str = "Other";

/// Top-level category guessed from the product name, then its reason.
pub fn category_hint(name: &str, reason: &str) -> String {
    let find = |text: &str| {
        let lower = format!(" {} ", text.to_lowercase());
        CATEGORY_KEYWORDS
            .iter()
            .find(|(_, words)| {
                words.iter().any(|w| {
                    lower.match_indices(w).any(|(at, _)| {
                        let before = lower[..at].chars().next_back().is_none_or(|c| !c.is_alphanumeric());
                        let after = lower[at + w.len()..]
                            .chars()
                            .next()
                            .is_none_or(|c| !c.is_alphanumeric() || c == 's');
                        before && after
                    })
                })
            })
            .map(|(category, _)| category.to_string())
    };
    find(name)
        .or_else(|| find(reason))
        .unwrap_or_else(|| OTHER_CATEGORY.to_string())
}

fn texts(nodes: Vec<Node>, field: &str) -> Result<Vec<String>, ProductParseError> {
    nodes
        .into_iter()
        .map(|n| match n {
            Node::Text(t) => Ok(t.trim().to_string()),
            Node::List(_) => Err(parse_error(format!("nested list inside {field}"))),
        })
        .collect()
}

fn flatten(node: &Node, out: &mut Vec<String>) {
    match node {
        Node::Text(t) => out.extend(lenient::split_items(t.trim_matches(|c| c == '[' || c == ']'))),
        Node::List(items) => items.iter().for_each(|n| flatten(n, out)),
    }
}

/// Attribute groups in any of the shapes models produce: one string of
/// `[..], [..]` groups, one string per product, or nested lists.
fn attribute_groups(nodes: Vec<Node>) -> Vec<Vec<String>> {
    if let [Node::Text(only)] = nodes.as_slice() {
        if only.contains('[') {
            return lenient::bracket_groups(only);
        }
    }
    nodes
        .iter()
        .map(|node| {
            let mut out = Vec::new();
            match node {
                Node::Text(t) if t.contains('[') => {
                    out.extend(lenient::bracket_groups(t).into_iter().flatten());
                }
                other => flatten(other, &mut out),
            }
            out
        })
        .collect()
}

fn first_list(raw: &str, key: &str) -> Result<Vec<Node>, ProductParseError> {
    let hit = lenient::find_keys(raw, key)
        .into_iter()
        .next()
        .ok_or_else(|| parse_error(format!("no `{key}: [...]` array")))?;
    lenient::parse_list_at(raw, hit.open)
        .map(|(nodes, _)| nodes)
        .map_err(|e| parse_error(format!("{key}: {e}")))
}

/// Parse and validate a raw product-inference response.
pub fn parse_product_response(raw: &str, persona_id: &str) -> Result<ProductBatch, ProductParseError> {
    if raw.trim().is_empty() {
        return Err(parse_error("empty response"));
    }
    let products = texts(first_list(raw, "products")?, "products")?;
    let attributes = attribute_groups(first_list(raw, "attributes")?);
    let reasons = texts(first_list(raw, "reasons")?, "reasons")?;

    if products.len() != PRODUCT_COUNT {
        return Err(ProductParseError::Cardinality { found: products.len() });
    }
    for (array, found) in [("attributes", attributes.len()), ("reasons", reasons.len())] {
        if found != products.len() {
            return Err(ProductParseError::Alignment {
                array: array.to_string(),
                expected: products.len(),
                found,
            });
        }
    }
    for (field, values) in [("product name", &products), ("reason", &reasons)] {
        if let Some(index) = values.iter().position(|v| v.is_empty()) {
            return Err(ProductParseError::EmptyField {
                field: field.to_string(),
                index,
            });
        }
    }
    if let Some(index) = attributes.iter().position(|g| g.iter().all(|a| a.trim().is_empty())) {
        return Err(ProductParseError::EmptyField {
            field: "attributes".to_string(),
            index,
        });
    }
    let mut seen = BTreeMap::new();
    for name in &products {
        if seen.insert(name.to_lowercase(), ()).is_some() {
            return Err(ProductParseError::DuplicateName { name: name.clone() });
        }
    }

    let mut suggestions = Vec::with_capacity(PRODUCT_COUNT);
    for (index, ((name, group), reason)) in products.into_iter().zip(attributes).zip(reasons).enumerate() {
        let mut considered = Vec::new();
        for attr in group {
            let canonical = canonical_attribute(&attr).ok_or(ProductParseError::UnknownAttribute {
                attribute: attr.clone(),
                index,
            })?;
            if !considered.contains(&canonical) {
                considered.push(canonical);
            }
        }
        suggestions.push(ProductSuggestion {
            category_hint: category_hint(&name, &reason),
            name,
            considered_attributes: considered,
            reason,
            image: None,
            image_rotation_index: 0,
        });
    }

    Ok(ProductBatch {
        persona_id: persona_id.to_string(),
        warnings: category_warnings(&suggestions),
        suggestions,
        raw_response: raw.to_string(),
        repair_count: 0,
    })
}

/// One warning per category shared by more than one suggestion.
pub fn category_warnings(suggestions: &[ProductSuggestion]) -> Vec<String> {
    let mut by_category: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for s in suggestions {
        if s.category_hint != OTHER_CATEGORY {
            by_category.entry(&s.category_hint).or_default().push(&s.name);
        }
    }
    by_category
        .into_iter()
        .filter(|(_, names)| names.len() > 1)
        .map(|(category, names)| format!("products share top-level category {category}: {}", names.join("; ")))
        .collect()
}

impl ProductBatch {
    /// Canonical response text: re-parsing it yields the same suggestions.
    pub fn to_response_text(&self) -> String {
        let products = serde_json::to_string(&self.suggestions.iter().map(|s| &s.name).collect::<Vec<_>>())
            .expect("strings serialize");
        let groups: Vec<String> = self
            .suggestions
            .iter()
            .map(|s| format!("[{}]", s.considered_attributes.join(", ")))
            .collect();
        let attributes = serde_json::to_string(&groups.join(", ")).expect("strings serialize");
        let reasons = serde_json::to_string(&self.suggestions.iter().map(|s| &s.reason).collect::<Vec<_>>())
            .expect("strings serialize");
        format!("products: {products}\n\nattributes: [\n{attributes}\n]\n\nreasons: {reasons}\n")
    }
}
