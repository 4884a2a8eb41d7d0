use personagram_core::gateway::{ImageRef, ImageSource};
use personagram_core::pipeline::{Dimension, Provenance};
use personagram_core::scaffold::{compose, FeatureSelection, PromptDraft};
use proptest::prelude::*;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const WORDS: [&str; 12] = [
    "matte", "woven", "sturdy", "folding", "quiet", "bright", "rounded", "padded", "portable", "layered", "textured",
    "modular",
];

fn provenance(i: usize) -> Provenance {
    Provenance {
        persona_id: format!("p{:04}", i % 7 + 1),
        product_name: format!("Product {}", i % 3),
        image: ImageRef {
            url: format!("https://images.example/search/product-{}/0.jpg", i % 3),
            source: ImageSource::Search,
            query: format!("Product {}", i % 3),
            rank: 0,
        },
    }
}

/// Selections whose phrases carry a unique marker token, so counting
/// occurrences in the prompt cannot confuse one phrase with another.
fn random_selections(rng: &mut ChaCha8Rng) -> Vec<FeatureSelection> {
    let n = rng.random_range(0..=27);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let dimension = *Dimension::ALL.choose(rng).unwrap();
        let key = dimension.keys().choose(rng).unwrap().to_string();
        let phrase = format!("{} {} q{i}x", WORDS.choose(rng).unwrap(), WORDS.choose(rng).unwrap());
        out.push(FeatureSelection {
            dimension,
            key,
            phrase,
            provenance: provenance(i),
            selected_at: 1_000 * i as u64,
        });
    }
    out
}

fn expected(subject: &str, selections: &[FeatureSelection]) -> String {
    let mut text = format!("Design {subject}.");
    for (dimension, label) in [
        (Dimension::Aesthetics, "Aesthetics"),
        (Dimension::Behavioral, "Behavior and use"),
        (Dimension::Contextual, "Context and meaning"),
    ] {
        let phrases: Vec<&str> = selections
            .iter()
            .filter(|s| s.dimension == dimension)
            .map(|s| s.phrase.as_str())
            .collect();
        if !phrases.is_empty() {
            text += &format!(" {label}: {}.", phrases.join(", "));
        }
    }
    text
}

fn rank(d: Dimension) -> usize {
    Dimension::ALL.iter().position(|x| *x == d).unwrap()
}

fn check(subject: &str, selections: &[FeatureSelection]) {
    let composed = compose(subject, selections).unwrap();
    assert!(!composed.truncated);
    let text = &composed.text;
    assert_eq!(text, &expected(subject, selections));
    assert_eq!(text, &compose(subject, selections).unwrap().text);

    let mut positions = Vec::new();
    for s in selections {
        assert_eq!(text.matches(&s.phrase).count(), 1, "{} in {text}", s.phrase);
        positions.push((rank(s.dimension), text.find(&s.phrase).unwrap()));
    }
    // dimension order first, selection order within a dimension
    let mut sorted = positions.clone();
    sorted.sort_by_key(|(r, _)| *r);
    assert!(sorted.windows(2).all(|w| w[0].1 < w[1].1), "{text}");
}

#[test]
fn five_hundred_random_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let sets: Vec<Vec<FeatureSelection>> = (0..500).map(|_| random_selections(&mut rng)).collect();
    let first: Vec<String> = sets
        .iter()
        .map(|s| compose("a balcony planter", s).unwrap().text)
        .collect();
    for set in &sets {
        check("a balcony planter", set);
    }
    let second: Vec<String> = sets
        .iter()
        .map(|s| compose("a balcony planter", s).unwrap().text)
        .collect();
    assert_eq!(first, second);
}

#[test]
fn empty_selection_is_the_subject_sentence() {
    assert_eq!(compose("a helmet", &[]).unwrap().text, "Design a helmet.");
    assert!(compose("  ", &[]).is_err());
}

#[test]
fn draft_follows_selection_changes() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut selections = random_selections(&mut rng);
    while selections.len() < 6 {
        selections = random_selections(&mut rng);
    }
    let mut draft = PromptDraft::new("a chair").unwrap();
    for s in &selections {
        assert!(draft.add_selection(s.clone()).unwrap());
    }
    assert_eq!(draft.effective_prompt(), expected("a chair", &selections));
    let gone = selections.remove(2);
    draft.remove_selection(gone.dimension, &gone.key, &gone.phrase);
    assert_eq!(draft.effective_prompt(), expected("a chair", &selections));
    draft.manual_edit("my own words").unwrap();
    assert_eq!(draft.effective_prompt(), "my own words");
    draft.resync();
    assert_eq!(draft.effective_prompt(), expected("a chair", &selections));
}

proptest! {
    #[test]
    fn order_within_dimension_is_selection_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut selections = random_selections(&mut rng);
        check("a toy", &selections);
        // reordering selections of different dimensions only never changes the prompt
        let before = compose("a toy", &selections).unwrap().text;
        let mut by_dim: Vec<Vec<FeatureSelection>> = Dimension::ALL
            .iter()
            .map(|d| selections.iter().filter(|s| s.dimension == *d).cloned().collect())
            .collect();
        by_dim.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        selections = by_dim.concat();
        prop_assert_eq!(compose("a toy", &selections).unwrap().text, before);
    }

    #[test]
    fn long_selections_respect_the_cap(extra in 0usize..200) {
        let selections: Vec<FeatureSelection> = (0..27 + extra)
            .map(|i| FeatureSelection {
                dimension: Dimension::ALL[i % 3],
                key: Dimension::ALL[i % 3].keys()[0].to_string(),
                phrase: format!("considerably long descriptive phrase number q{i}x"),
                provenance: provenance(i),
                selected_at: i as u64,
            })
            .collect();
        let composed = compose("a vehicle", &selections).unwrap();
        prop_assert!(composed.text.chars().count() <= personagram_core::scaffold::PROMPT_CHAR_CAP);
        prop_assert!(composed.text.starts_with("Design a vehicle."));
        for s in &selections {
            prop_assert!(composed.text.matches(&s.phrase).count() <= 1);
        }
    }
}
