//! The two prompt programs: product inference from a persona and feature
//! extraction from a product image. Template text ships verbatim under
//! `prompts/` and is only ever substituted, never rewritten.

use serde_json::Value;

use crate::corpus::record::{BIG_FIVE_TRAITS, OBJECTIVE_ATTRIBUTES, SUBJECTIVE_ATTRIBUTES};
use crate::corpus::{Persona, TraitScore};
use crate::gateway::{ChatRequest, ImageRef};

pub const PRODUCT_TEMPLATE: &str = include_str!("../../prompts/product_inference.txt");
pub const FEATURE_TEMPLATE: &str = include_str!("../../prompts/feature_extraction.txt");

pub const PERSONA_PLACEHOLDER: &str = "${persona}";
const SYSTEM_SECTION_START: &str = "### general_guideline ###";

pub const PRODUCT_MAX_OUTPUT_CHARS: u32 = 8_000;
pub const FEATURE_MAX_OUTPUT_CHARS: u32 = 4_000;
pub const TEMPERATURE: f32 = 0.7;

pub const PRODUCT_REPAIR: &str = "Your previous response did not follow <response_structure>: reply again with exactly 9 distinct products and exactly 9 matching entries in both attributes and reasons, in the same order.";
pub const FEATURE_REPAIR: &str = "Your previous response did not follow <structure>: reply again with exactly 9 unique multi-word attributes per dimension, exactly 3 for each listed key and no other keys.";

/// `attribute: value` lines for the persona, in the order the product prompt
/// lists objective then subjective attributes. Missing attributes are skipped.
pub fn serialize_persona(persona: &Persona) -> String {
    let mut lines = Vec::new();
    for key in OBJECTIVE_ATTRIBUTES.iter().chain(SUBJECTIVE_ATTRIBUTES.iter()) {
        let value = match *key {
            "age" => Some(persona.age.to_string()),
            "income" => persona.income.map(|i| i.to_string()).or_else(|| persona.text("income")),
            "big_five_scores" => Some(big_five_line(persona)),
            other => persona.text(other),
        };
        if let Some(value) = value {
            lines.push(format!("{key}: {}", single_line(&value)));
        }
    }
    lines.join("\n")
}

fn big_five_line(persona: &Persona) -> String {
    let parts: Vec<String> = BIG_FIVE_TRAITS
        .iter()
        .zip(persona.big_five.scores())
        .map(|(name, score)| match score {
            TraitScore::Numeric(x) => format!("{name}: {}", Value::from(*x)),
            TraitScore::Level(label) => format!("{name}: {label}"),
        })
        .collect();
    format!("{{{}}}", parts.join(", "))
}

fn single_line(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// The product-inference template with the persona substituted. The opening
/// question and persona block form the user text; the guideline, task and
/// structure sections form the system text.
pub fn build_product_prompt(persona: &Persona) -> ChatRequest {
    let rendered = PRODUCT_TEMPLATE.replace(PERSONA_PLACEHOLDER, &serialize_persona(persona));
    let split = rendered
        .find(SYSTEM_SECTION_START)
        .expect("product template carries a general_guideline section");
    ChatRequest {
        user_text: rendered[..split].trim_end().to_string(),
        system_text: rendered[split..].trim_end().to_string(),
        max_output_chars: PRODUCT_MAX_OUTPUT_CHARS,
        temperature: TEMPERATURE,
        history: Vec::new(),
    }
}

/// Feature-extraction template as system text; the image reference is the user text.
pub fn build_feature_prompt(image: &ImageRef) -> ChatRequest {
    ChatRequest {
        system_text: FEATURE_TEMPLATE.trim_end().to_string(),
        user_text: format!("img_url: {}", image.url),
        max_output_chars: FEATURE_MAX_OUTPUT_CHARS,
        temperature: TEMPERATURE,
        history: Vec::new(),
    }
}

/// Same request with the corrective sentence appended to the user text.
pub fn with_repair(request: &ChatRequest, sentence: &str) -> ChatRequest {
    ChatRequest {
        user_text: format!("{}\n\n{sentence}", request.user_text),
        ..request.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ImageSource;
    use sha2::{Digest, Sha256};

    fn persona() -> Persona {
        let corpus = crate::corpus::PersonaCorpus::load(
            r#"{"id":"p1","age":34,"sex":"Female","race":"White alone","ancestry":"Irish","education":"Master's degree","employment_status":"Employed","industry_category":"EDU-Colleges","occupation_category":"EDU-Postsecondary teachers","income":68000,"disability":"None","big_five_scores":{"openness":0.82,"conscientiousness":0.61,"extraversion":0.4,"agreeableness":0.75,"neuroticism":0.3},"defining_quirks":"Collects vintage maps","mannerisms":"Taps her pen while thinking","personal_time":"Trail running and pottery","lifestyle":"Busy but health-conscious","religion":"not used"}"#
                .as_bytes(),
        )
        .unwrap();
        corpus.get("p1").unwrap().clone()
    }

    fn sha(text: &str) -> String {
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    #[test]
    fn template_checksums_are_pinned() {
        assert_eq!(
            sha(PRODUCT_TEMPLATE),
            "17a76a7c9060c663015846a8e6f9bab809ad46fb83efe55b4dcefb6b423a98ce"
        );
        assert_eq!(
            sha(FEATURE_TEMPLATE),
            "80dd0c15fa67d2e70d3f6317b471ec74096bb794e489c22c8c5f9fa37f1bb2c3"
        );
    }

    #[test]
    fn persona_serialization_follows_attribute_order() {
        let text = serialize_persona(&persona());
        let keys: Vec<&str> = text.lines().map(|l| l.split_once(':').unwrap().0).collect();
        assert_eq!(
            keys,
            [
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
                "big_five_scores",
                "defining_quirks",
                "mannerisms",
                "personal_time",
                "lifestyle"
            ]
        );
        assert!(text.contains("big_five_scores: {openness: 0.82, conscientiousness: 0.61, extraversion: 0.4, agreeableness: 0.75, neuroticism: 0.3}"));
        assert!(!text.contains("religion"));
    }

    #[test]
    fn product_prompt_reassembles_to_template() {
        let p = persona();
        let req = build_product_prompt(&p);
        let expected = PRODUCT_TEMPLATE.replace(PERSONA_PLACEHOLDER, &serialize_persona(&p));
        assert_eq!(format!("{}\n\n{}\n", req.user_text, req.system_text), expected);
        assert!(req.user_text.starts_with("Given <persona> below"));
        assert!(req.system_text.contains("NEVER use meta-phrases"));
        assert!(req.system_text.contains(
            "home, work/study, mobility, leisure, health/wellness, hobbies/creative, caregiving, social, and outdoor"
        ));
        assert_eq!(req, build_product_prompt(&p));
    }

    #[test]
    fn feature_prompt_carries_definitions_and_examples() {
        let image = ImageRef {
            url: "https://img.example/kettle.jpg".into(),
            source: ImageSource::Search,
            query: "kettle".into(),
            rank: 0,
        };
        let req = build_feature_prompt(&image);
        assert!(req.system_text.contains("aesthetics: the sensation that results from the perception of attractiveness (or unattractiveness) in products. (e.g., color, material, shape)"));
        assert!(req.system_text.contains("behavioral: what a product is seen to say about its function, mode-of-use and qualities. (e.g., physical_action_possibilities, function, physical_interaction)"));
        assert!(req.system_text.contains("contextual: the perception of what a product says about its owner or user: the personal and social significance attached to the design. (e.g., symbolic, environment, situation)"));
        for word in ["\"hammering\"", "\"breaking\"", "\"throwing\""] {
            assert!(req.system_text.contains(word));
        }
        assert_eq!(req.user_text, "img_url: https://img.example/kettle.jpg");
        assert_eq!(req, build_feature_prompt(&image));
    }

    #[test]
    fn repair_appends_one_sentence() {
        let req = build_feature_prompt(&ImageRef {
            url: "u".into(),
            source: ImageSource::Search,
            query: "q".into(),
            rank: 0,
        });
        let repaired = with_repair(&req, FEATURE_REPAIR);
        assert_eq!(repaired.system_text, req.system_text);
        assert!(repaired.user_text.ends_with(FEATURE_REPAIR));
    }
}
