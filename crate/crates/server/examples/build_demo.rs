//! Regenerates everything under `demo/`: a 200-persona corpus, the fixture
//! store recorded from the synthetic provider while running the request
//! script and the CLI walk-through, and interaction logs for the per-participant
//! usage targets.
//!
//! cargo run -p personagram-server --example build_demo -- [demo-dir]

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use personagram_core::corpus::PersonaCorpus;
use personagram_core::engine::{Engine, SessionStore, SteppingClock};
use personagram_core::gateway::mock::{FixtureStore, RecordingProvider};
use personagram_core::gateway::synthetic::SyntheticProvider;
use personagram_core::gateway::{Gateway, RetryPolicy};
use personagram_core::pipeline::{Dimension, Provenance};
use personagram_core::scaffold::{FeatureSelection, PromptDraft};
use personagram_core::session::{replay_events, EventKind, EventLogFile, EventRecord, Mode};
use personagram_server::script::{self, Script};

const PERSONAS: usize = 200;
const SEED: u64 = 20_240_917;
pub const DEMO_PERSONA: &str = "p0001";
pub const DEMO_SUBJECT: &str = "a balcony planter";

/// Usage targets per participant: generations, bulb, plus, puzzle, switches,
/// minutes for the canvas condition, then generations, queries, switches,
/// minutes for the chat-only condition.
const TARGETS: [(&str, [f64; 10]); 12] = [
    ("P1", [5.0, 2.0, 1.0, 5.0, 7.0, 18.2, 16.0, 5.0, 21.0, 29.6]),
    ("P2", [12.0, 4.0, 3.0, 3.0, 3.0, 20.0, 7.0, 4.0, 1.0, 13.1]),
    ("P3", [10.0, 11.0, 2.0, 5.0, 9.0, 30.1, 24.0, 3.0, 4.0, 22.4]),
    ("P4", [14.0, 9.0, 2.0, 9.0, 9.0, 17.3, 17.0, 14.0, 5.0, 23.7]),
    ("P5", [27.0, 4.0, 2.0, 7.0, 11.0, 26.3, 17.0, 13.0, 21.0, 27.1]),
    ("P6", [6.0, 9.0, 5.0, 6.0, 13.0, 14.2, 9.0, 2.0, 3.0, 13.1]),
    ("P7", [9.0, 13.0, 4.0, 8.0, 7.0, 12.4, 19.0, 7.0, 12.0, 25.6]),
    ("P8", [3.0, 3.0, 0.0, 9.0, 15.0, 14.8, 8.0, 12.0, 11.0, 19.8]),
    ("P9", [6.0, 4.0, 0.0, 7.0, 15.0, 11.8, 8.0, 7.0, 19.0, 17.8]),
    ("P10", [8.0, 4.0, 2.0, 4.0, 11.0, 17.4, 5.0, 4.0, 5.0, 12.6]),
    ("P11", [28.0, 8.0, 5.0, 16.0, 21.0, 29.4, 14.0, 13.0, 15.0, 32.6]),
    ("P12", [13.0, 5.0, 2.0, 4.0, 9.0, 22.5, 9.0, 8.0, 9.0, 23.9]),
];

fn pick<'a>(rng: &mut ChaCha8Rng, items: &[&'a str]) -> &'a str {
    items.choose(rng).expect("non-empty list")
}

fn persona(rng: &mut ChaCha8Rng, n: usize) -> Value {
    let age: u32 = if rng.random_bool(0.06) {
        rng.random_range(8..18)
    } else {
        rng.random_range(18..92)
    };
    let employment = if age < 16 {
        "Under 16 years"
    } else if age >= 67 && rng.random_bool(0.8) {
        "Not in labor force (retired)"
    } else {
        pick(
            rng,
            &[
                "Civilian employed, at work",
                "Civilian employed, at work",
                "Unemployed",
                "Student",
                "Not in labor force",
                "Armed forces, active duty",
                "Self-employed",
            ],
        )
    };
    let employed =
        employment.contains("employed, at work") || employment == "Self-employed" || employment.contains("Armed");
    let income: Value = if employed {
        if rng.random_bool(0.1) {
            Value::Null
        } else {
            json!(rng.random_range(8_000..240_000))
        }
    } else if rng.random_bool(0.5) {
        json!("None")
    } else {
        json!(rng.random_range(0..18_000))
    };
    let industry = if employed {
        pick(
            rng,
            &[
                "EDU-Elementary and secondary schools",
                "MED-General medical and surgical hospitals",
                "FIN-Banking",
                "INF-Software publishers",
                "CON-Construction",
                "RET-Grocery stores",
                "MFG-Machinery",
                "TRN-Truck transportation",
                "ENT-Restaurants and other food services",
                "PRF-Management consulting",
                "ADM-Public administration",
                "AGR-Crop production",
                "UTL-Electric power",
                "MIL-Armed forces",
                "Legal services",
            ],
        )
    } else {
        pick(
            rng,
            &[
                "N/A (not in labor force)",
                "Unemployed, last worked 5 years ago or earlier",
            ],
        )
    };
    let occupation = if employed {
        pick(
            rng,
            &[
                "Teacher",
                "Registered nurse",
                "Software developer",
                "Electrician",
                "Retail salesperson",
                "Truck driver",
                "Accountant",
                "Chef",
                "Farmer",
                "Graphic designer",
                "Police officer",
                "Civil engineer",
                "Pharmacist",
                "Carpenter",
                "Lawyer",
            ],
        )
    } else if employment == "Student" {
        "Student"
    } else {
        "N/A"
    };
    let race = pick(
        rng,
        &[
            "White",
            "Black or African American",
            "Asian",
            "American Indian or Alaska Native",
            "Two or more races",
            "Some other race",
            "Native Hawaiian or Other Pacific Islander",
        ],
    );
    let ancestry = pick(
        rng,
        &[
            "Irish",
            "German",
            "Mexican",
            "Chinese",
            "Nigerian",
            "Lebanese",
            "Italian",
            "Filipino",
            "Puerto Rican",
            "Cherokee",
            "Jamaican",
            "Vietnamese",
            "Polish",
            "",
            "Unclassified or not reported",
        ],
    );
    let household = pick(
        rng,
        &[
            "Married couple household with own children under 18",
            "Married couple household, no children",
            "Living alone",
            "Householder living with unmarried partner and own children",
            "Female householder, no spouse present, with own children",
            "Living with parents",
            "Roommates (nonfamily household)",
            "Multigenerational household with grandparents",
        ],
    );
    let level = |rng: &mut ChaCha8Rng| -> Value {
        if n.is_multiple_of(5) {
            json!(pick(rng, &["Low", "Medium", "High"]))
        } else {
            json!((rng.random_range(0..=100) as f64) / 100.0)
        }
    };
    let big_five = json!({
        "Openness": level(rng),
        "Conscientiousness": level(rng),
        "Extraversion": level(rng),
        "Agreeableness": level(rng),
        "Neuroticism": level(rng),
    });
    json!({
        "id": format!("p{n:04}"),
        "age": age,
        "sex": pick(rng, &["Male", "Female", "Female", "Male", ""]),
        "race": race,
        "ancestry": ancestry,
        "marital_status": pick(rng, &["Never married", "Married", "Divorced", "Widowed", "Separated"]),
        "household_type": household,
        "family_presence_and_age": pick(rng, &["With own children under 6 years only", "With own children 6 to 17 years only", "No own children under 18 years", "With related children"]),
        "disability": pick(rng, &["None", "None", "None", "Ambulatory difficulty", "Hearing difficulty", "Vision difficulty", "Cognitive difficulty"]),
        "education": pick(rng, &["High school diploma", "Bachelor's degree", "Some college, no degree", "Master's degree", "Associate's degree", "Doctorate degree", "Less than high school"]),
        "employment_status": employment,
        "occupation_category": occupation,
        "industry_category": industry,
        "income": income,
        "household_language": pick(rng, &["English only", "Spanish", "Chinese", "Vietnamese", "Tagalog", "Arabic", "French"]),
        "citizenship": pick(rng, &["Born in the United States", "Naturalized citizen", "Not a U.S. citizen", "Born abroad of American parent(s)"]),
        "big_five_scores": big_five,
        "defining_quirks": pick(rng, &["Labels every jar in the pantry", "Keeps a running list of bird sightings", "Always carries a pocket knife", "Hums while cooking", "Collects vintage postcards", "Names every houseplant"]),
        "mannerisms": pick(rng, &["Talks with their hands and tells long stories", "Speaks in a quiet, measured voice", "Blunt and straight to the point", "Cracks jokes to ease tension", "Polite and tactful even when annoyed", "Formal and precise in conversation"]),
        "personal_time": pick(rng, &["Gardening and baking on weekends", "Hiking local trails and running", "Playing guitar with a weekend band", "Reading mysteries at home alone", "Hosting neighborhood barbecues with friends", "Volunteering at the community center", "Fishing at the lake", "Watching documentaries with family"]),
        "lifestyle": pick(rng, &["Busy schedule balancing work and family", "Quiet routine at home", "Active and outdoorsy", "Social and community-focused", "Frugal and practical", "Creative and spontaneous"]),
    })
}

fn write(path: &Path, text: &str) {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).expect("create directory");
    }
    std::fs::write(path, text).unwrap_or_else(|e| panic!("writing {}: {e}", path.display()));
}

fn pretty(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("serializable") + "\n"
}

/// Evenly spaced events over `minutes`, with the first and last events at the ends.
fn target_log(participant: &str, mode: Mode, counts: &[(EventKind, usize)], minutes: f64) -> EventLogFile {
    let mut kinds = Vec::new();
    let longest = counts.iter().map(|(_, c)| *c).max().unwrap_or(0);
    for round in 0..longest {
        for (kind, count) in counts {
            if round < *count {
                kinds.push(*kind);
            }
        }
    }
    let span = (minutes * 60_000.0).round() as u64;
    let start = 1_700_000_000_000u64;
    let last = kinds.len().saturating_sub(1).max(1) as u64;
    let events = kinds
        .iter()
        .enumerate()
        .map(|(i, kind)| EventRecord::new(*kind, start + span * i as u64 / last))
        .collect();
    EventLogFile {
        session_id: Some(format!("{participant}-{}", mode.label().to_lowercase())),
        participant: Some(participant.to_string()),
        mode,
        events,
    }
}

#[tokio::main]
async fn main() {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".to_string()));

    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let lines: Vec<String> = (1..=PERSONAS).map(|n| persona(&mut rng, n).to_string()).collect();
    write(&dir.join("personas.jsonl"), &(lines.join("\n") + "\n"));
    let corpus = Arc::new(PersonaCorpus::load_path(dir.join("personas.jsonl")).expect("demo corpus loads"));

    let fixtures = dir.join("fixtures");
    let _ = std::fs::remove_dir_all(&fixtures);
    std::fs::create_dir_all(&fixtures).expect("fixture dir");
    let recorder = Arc::new(RecordingProvider::new(
        Arc::new(SyntheticProvider),
        FixtureStore::dir(&fixtures),
    ));
    let gateway = Gateway::single(recorder, RetryPolicy::default());
    let engine = Engine::new(
        corpus,
        gateway.clone(),
        SessionStore::in_memory(),
        Arc::new(SteppingClock::new(1_700_000_000_000, 1_000)),
    );

    // request script
    let text = std::fs::read_to_string(dir.join("api_script.json")).expect("api_script.json");
    let script = Script::parse(&text).expect("valid script");
    let router = personagram_server::router(engine.clone(), None);
    script::run(&router, &script)
        .await
        .expect("script runs against the synthetic provider");

    // CLI walk-through: infer, features for the first card, compose, generate
    let batch = engine.infer_for_persona(DEMO_PERSONA, 5).await.expect("infer");
    let first = &batch.suggestions[0];
    let provenance = Provenance {
        persona_id: DEMO_PERSONA.to_string(),
        product_name: first.name.clone(),
        image: first.image.clone().expect("first suggestion has an image"),
    };
    let matrix = engine.features_for_image(provenance.clone()).await.expect("features");
    let mut selections = Vec::new();
    for (i, dim) in Dimension::ALL.into_iter().enumerate() {
        for entry in matrix.entries(dim).iter().skip(i).step_by(4) {
            selections.push(FeatureSelection {
                dimension: dim,
                key: entry.key.clone(),
                phrase: entry.phrase.clone(),
                provenance: provenance.clone(),
                selected_at: 0,
            });
        }
    }
    write(&dir.join("selections.json"), &pretty(&selections));
    let mut draft = PromptDraft::new(DEMO_SUBJECT).expect("subject");
    for s in &selections {
        draft.add_selection(s.clone()).expect("valid selection");
    }
    gateway
        .generate_images(draft.effective_prompt(), 4)
        .await
        .expect("generate");

    write(
        &dir.join("personagram.json"),
        &pretty(
            &json!({"host": "127.0.0.1", "port": 8080, "corpus": "personas.jsonl", "fixtures": "fixtures", "sessions": "sessions"}),
        ),
    );
    write(
        &dir.join("providers.live.json"),
        &pretty(&json!({
            "concurrency": 4,
            "chat": {"kind": "live-chat", "endpoint": "https://api.openai.com/v1/chat/completions", "credentials": "${OPENAI_API_KEY}", "model": "gpt-4o", "timeout_ms": 60000, "retries": 2, "record_to": "fixtures"},
            "image_generation": {"kind": "live-image-gen", "endpoint": "https://image-gen.example/v1/generate", "credentials": "${IMAGE_GEN_KEY}", "timeout_ms": 120000, "retries": 1, "record_to": "fixtures"},
            "image_search": {"kind": "live-image-search", "endpoint": "https://www.googleapis.com/customsearch/v1", "credentials": "${IMAGE_SEARCH_KEY}", "timeout_ms": 20000, "retries": 2, "record_to": "fixtures"}
        })),
    );

    for (pid, t) in TARGETS {
        let c = |x: f64| x as usize;
        let canvas = target_log(
            pid,
            Mode::Personagram,
            &[
                (EventKind::Generate, c(t[0])),
                (EventKind::Bulb, c(t[1])),
                (EventKind::Plus, c(t[2])),
                (EventKind::Puzzle, c(t[3])),
                (EventKind::TabSwitch, c(t[4])),
            ],
            t[5],
        );
        let chat = target_log(
            pid,
            Mode::Baseline,
            &[
                (EventKind::Generate, c(t[6])),
                (EventKind::ChatQuery, c(t[7])),
                (EventKind::TabSwitch, c(t[8])),
            ],
            t[9],
        );
        for log in [canvas, chat] {
            let name = log.session_id.clone().expect("named log");
            write(&dir.join("logs").join(format!("{name}.json")), &pretty(&log));
            let (state, _) = replay_events(&log).expect("replayable");
            write(
                &dir.join("sessions-replayed").join(format!("{name}.json")),
                &state.save(),
            );
        }
    }

    let count = std::fs::read_dir(&fixtures).map(|d| d.count()).unwrap_or(0);
    println!("wrote {PERSONAS} personas and {count} fixtures to {}", dir.display());
}
