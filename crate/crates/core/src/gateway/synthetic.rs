//! Offline provider that answers every operation from built-in tables, keyed
//! by hashes of the request. It is used to author demo fixtures (wrapped in a
//! [`super::RecordingProvider`]) and to exercise flows without a network.

use async_trait::async_trait;
use sha2::{Digest, Sha256};

use super::{ChatRequest, ImageRef, ImageSource, Provider, ProviderError};
use crate::pipeline::prompts::FEATURE_TEMPLATE;

const IMAGE_HOST: &str = "https://images.example";

const CATALOG: [(&str, [&str; 3], [&str; 3]); 12] = [
    (
        "kitchen",
        [
            "Breville Barista Express Espresso Machine",
            "Instant Pot Duo 7-in-1 Pressure Cooker",
            "Vitamix E310 Blender",
        ],
        ["lifestyle", "personal_time", "income"],
    ),
    (
        "electronics",
        [
            "Sony WH-1000XM5 Headphones",
            "Kindle Paperwhite Signature Edition",
            "Apple Watch SE",
        ],
        ["occupation_category", "openness", "personal_time"],
    ),
    (
        "furniture",
        [
            "Herman Miller Aeron Chair",
            "IKEA POÄNG Lounge Chair",
            "BenQ e-Reading Desk Lamp",
        ],
        ["occupation_category", "conscientiousness", "income"],
    ),
    (
        "tools",
        [
            "DeWalt DCD791 Cordless Drill",
            "Makita XDT13 Impact Driver",
            "Leatherman Wave Plus Multitool",
        ],
        ["defining_quirks", "industry_category", "conscientiousness"],
    ),
    (
        "apparel",
        [
            "Patagonia Nano Puff Jacket",
            "Brooks Ghost 15 Running Shoes",
            "Carhartt Duck Chore Coat",
        ],
        ["lifestyle", "age", "extraversion"],
    ),
    (
        "bags",
        [
            "Osprey Farpoint 40 Backpack",
            "Away Carry-On Suitcase",
            "Peak Design Everyday Tote",
        ],
        ["employment_status", "lifestyle", "openness"],
    ),
    (
        "outdoors",
        [
            "YETI Tundra 45 Cooler",
            "Coleman Sundome Tent",
            "Black Diamond Trail Hiking Poles",
        ],
        ["personal_time", "extraversion", "age"],
    ),
    (
        "health",
        [
            "Theragun Prime Massager",
            "Philips Sonicare 4100 Toothbrush",
            "Withings Body+ Smart Scale",
        ],
        ["neuroticism", "age", "disability"],
    ),
    (
        "mobility",
        [
            "Drive Medical Rollator Walker",
            "Segway Ninebot Max Scooter",
            "UPPAbaby Vista Stroller",
        ],
        ["age", "disability", "lifestyle"],
    ),
    (
        "creative",
        [
            "Yamaha P-45 Digital Piano",
            "Fender Player Stratocaster Guitar",
            "Brother CS7000X Sewing Machine",
        ],
        ["openness", "defining_quirks", "personal_time"],
    ),
    (
        "garden",
        [
            "Weber Spirit II E-310 Grill",
            "Greenworks 40V Lawn Mower",
            "Gardener's Supply Raised Planter",
        ],
        ["extraversion", "lifestyle", "income"],
    ),
    (
        "family",
        [
            "Graco Pack 'n Play Crib",
            "PetSafe Automatic Pet Feeder",
            "Summer Infant Baby Bather",
        ],
        ["agreeableness", "mannerisms", "lifestyle"],
    ),
];

const FEATURE_BANK: [(&str, [&str; 12]); 9] = [
    (
        "color",
        [
            "matte charcoal finish",
            "soft sage green",
            "warm walnut tone",
            "glossy signal red",
            "muted sand beige",
            "deep navy blue",
            "brushed silver accents",
            "two-tone gray body",
            "pastel mint trim",
            "high-contrast black and white",
            "earthy terracotta hue",
            "translucent smoke tint",
        ],
    ),
    (
        "material",
        [
            "powder-coated steel frame",
            "recycled ripstop nylon",
            "molded polypropylene shell",
            "solid beech wood",
            "anodized aluminum body",
            "soft-touch silicone grip",
            "tempered glass panel",
            "rubberized base pads",
            "woven mesh panel",
            "stainless steel hardware",
            "bamboo veneer surface",
            "brushed leather trim",
        ],
    ),
    (
        "shape",
        [
            "rounded rectangular body",
            "slim tapered profile",
            "compact cube form",
            "gently curved contours",
            "wide stable base",
            "folding hinged frame",
            "cylindrical main body",
            "low-slung silhouette",
            "chamfered edges throughout",
            "domed top cover",
            "asymmetric ergonomic form",
            "modular stacked sections",
        ],
    ),
    (
        "physical_action_possibilities",
        [
            "lifting by side handles",
            "sitting on the lid",
            "stacking on shelves",
            "hanging from a hook",
            "rolling across floors",
            "folding flat for storage",
            "clipping onto a bag",
            "propping open a door",
            "wiping clean quickly",
            "tilting for easy access",
            "nesting inside one another",
            "dragging with one hand",
        ],
    ),
    (
        "function",
        [
            "keeping contents cold",
            "supporting long work sessions",
            "measuring daily progress",
            "storing small essentials",
            "reducing muscle tension",
            "preparing quick meals",
            "protecting fragile items",
            "tracking personal routines",
            "organizing shared spaces",
            "carrying gear outdoors",
            "soothing a restless child",
            "amplifying creative practice",
        ],
    ),
    (
        "physical_interaction",
        [
            "one-handed push button",
            "twist-lock lid mechanism",
            "padded contoured grip",
            "magnetic snap closure",
            "adjustable height lever",
            "touch-sensitive control strip",
            "pull-out telescoping handle",
            "textured thumb rest",
            "quick-release side latch",
            "soft-close hinge action",
            "dial-based speed control",
            "slide-in accessory rail",
        ],
    ),
    (
        "symbolic",
        [
            "rugged outdoor credibility",
            "quiet professional taste",
            "playful family warmth",
            "modern minimalism style",
            "eco-conscious values",
            "heritage craftsmanship pride",
            "tech-savvy early adopter",
            "calm self-care ritual",
            "practical no-nonsense attitude",
            "creative maker identity",
            "premium lifestyle signal",
            "community-minded generosity",
        ],
    ),
    (
        "environment",
        [
            "backyard patio gatherings",
            "small city apartment",
            "shared family kitchen",
            "home office corner",
            "campsite by a lake",
            "crowded commuter train",
            "garage workshop bench",
            "quiet bedroom nightstand",
            "school classroom setting",
            "community garden plot",
            "hospital waiting room",
            "busy coffee shop",
        ],
    ),
    (
        "situation",
        [
            "weekend family road trip",
            "late-night study session",
            "early morning workout",
            "holiday dinner hosting",
            "rainy day indoor play",
            "recovering after an injury",
            "first day at a new job",
            "moving into a new home",
            "hosting visiting grandchildren",
            "long-haul business travel",
            "quiet Sunday afternoon",
            "last-minute gift shopping",
        ],
    ),
];

fn hash(text: &str) -> [u8; 32] {
    Sha256::digest(text.as_bytes()).into()
}

fn short_hash(text: &str) -> String {
    hex::encode(&hash(text)[..6])
}

/// URL-safe slug of a product name.
pub fn slug(name: &str) -> String {
    let mut out = String::new();
    for c in name.to_lowercase().chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    out.trim_end_matches('-').to_string()
}

fn field<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .map(|l| l.trim_start_matches("<persona>").trim_end_matches("</persona>").trim())
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix(": ")))
        .map(str::trim)
}

fn product_response(user_text: &str) -> String {
    let h = hash(user_text);
    // nine of the twelve categories, rotated by the persona hash
    let skip = h[0] as usize % CATALOG.len();
    let mut names = Vec::new();
    let mut groups = Vec::new();
    let mut reasons = Vec::new();
    let age = field(user_text, "age")
        .map(|a| format!("{a}-year-old"))
        .unwrap_or_else(|| "grown-up".into());
    let job = field(user_text, "occupation_category")
        .unwrap_or("person")
        .to_lowercase();
    let pastime = field(user_text, "personal_time")
        .unwrap_or("their free time")
        .to_lowercase();
    for step in 0..9 {
        let (_, items, attrs) = CATALOG[(skip + step) % CATALOG.len()];
        let name = items[h[step + 1] as usize % 3];
        names.push(format!("\"{name}\""));
        let second = attrs[1 + h[step + 10] as usize % 2];
        groups.push(format!("[{}, {second}]", attrs[0]));
        reasons.push(format!(
            "\"A {age} {job} who spends free time on {pastime} would use the {name}; it suits their {} and {}.\"",
            attrs[0].replace('_', " "),
            second.replace('_', " ")
        ));
    }
    format!(
        "products: [{}]\n\nattributes: [\n\"{}\"\n]\n\nreasons: [\n{}\n]\n",
        names.join(", "),
        groups.join(", "),
        reasons.join(", ")
    )
}

fn feature_response(user_text: &str) -> String {
    let h = hash(user_text);
    let dims = ["aesthetics", "behavioral", "contextual"];
    let mut lines = Vec::new();
    for (d, dim) in dims.iter().enumerate() {
        let mut items = Vec::new();
        for k in 0..3 {
            let (key, bank) = FEATURE_BANK[d * 3 + k];
            let start = h[d * 3 + k] as usize % bank.len();
            for i in 0..3 {
                items.push(format!("{key}: {}", bank[(start + i * 4) % bank.len()]));
            }
        }
        lines.push(format!("{dim}: [{}]", items.join(", ")));
    }
    lines.join("\n") + "\n"
}

fn chat_response(request: &ChatRequest) -> String {
    let ids: Vec<&str> = request
        .system_text
        .lines()
        .filter_map(|l| l.strip_prefix("<persona id=\"").and_then(|r| r.strip_suffix("\">")))
        .collect();
    let pastime = field(&request.system_text, "personal_time").unwrap_or("my routines");
    format!(
        "Speaking as {}: thinking about \"{}\", I would want something that fits around {pastime} and is easy to live with every day.",
        if ids.is_empty() { "the persona".to_string() } else { ids.join(", ") },
        request.user_text.trim()
    )
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SyntheticProvider;

#[async_trait]
impl Provider for SyntheticProvider {
    fn name(&self) -> &str {
        "synthetic"
    }

    async fn complete(&self, request: &ChatRequest) -> Result<String, ProviderError> {
        if request.system_text == FEATURE_TEMPLATE.trim_end() {
            Ok(feature_response(&request.user_text))
        } else if request.user_text.starts_with("Given <persona> below") {
            Ok(product_response(&request.user_text))
        } else {
            Ok(chat_response(request))
        }
    }

    async fn generate_images(&self, prompt: &str, n: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let tag = short_hash(prompt);
        Ok((0..n)
            .map(|i| ImageRef {
                url: format!("{IMAGE_HOST}/generated/{tag}/{i}.png"),
                source: ImageSource::Generated,
                query: prompt.to_string(),
                rank: i as u32,
            })
            .collect())
    }

    async fn search_images(&self, query: &str, k: usize) -> Result<Vec<ImageRef>, ProviderError> {
        let s = slug(query);
        Ok((0..k)
            .map(|i| ImageRef {
                url: format!("{IMAGE_HOST}/search/{s}/{i}.jpg"),
                source: ImageSource::Search,
                query: query.to_string(),
                rank: i as u32,
            })
            .collect())
    }
}
