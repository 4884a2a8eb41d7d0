//! Dimensional scaffolding: the selected-feature set and the text-to-image
//! prompt composed from it.

use serde::{Deserialize, Serialize};

use crate::gateway::{Gateway, GatewayError, ImageRef};
use crate::pipeline::{Dimension, Provenance};

pub const PROMPT_CHAR_CAP: usize = 1_500;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSelection {
    pub dimension: Dimension,
    pub key: String,
    pub phrase: String,
    pub provenance: Provenance,
    pub selected_at: u64,
}

impl FeatureSelection {
    pub fn same_feature(&self, dimension: Dimension, key: &str, phrase: &str) -> bool {
        self.dimension == dimension && self.key == key && self.phrase == phrase
    }

    pub fn validate(&self) -> Result<(), ScaffoldError> {
        if !self.dimension.admits_key(&self.key) {
            return Err(ScaffoldError::InvalidSelection(format!(
                "key `{}` is not a {} key",
                self.key, self.dimension
            )));
        }
        if self.phrase.trim().is_empty() {
            return Err(ScaffoldError::InvalidSelection("phrase must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ScaffoldError {
    #[error("subject must be non-empty")]
    EmptySubject,
    #[error("manual prompt text must be non-empty")]
    EmptyManualText,
    #[error("effective prompt is empty")]
    EmptyPrompt,
    #[error("invalid selection: {0}")]
    InvalidSelection(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Composed {
    pub text: String,
    /// Some phrases were dropped to respect [`PROMPT_CHAR_CAP`].
    pub truncated: bool,
}

fn clause_label(dimension: Dimension) -> &'static str {
    match dimension {
        Dimension::Aesthetics => "Aesthetics",
        Dimension::Behavioral => "Behavior and use",
        Dimension::Contextual => "Context and meaning",
    }
}

fn render(subject: &str, clauses: &[(Dimension, Vec<&str>)]) -> String {
    let mut text = format!("Design {subject}.");
    for (dimension, phrases) in clauses {
        if !phrases.is_empty() {
            text.push_str(&format!(" {}: {}.", clause_label(*dimension), phrases.join(", ")));
        }
    }
    text
}

/// Deterministic prompt: the subject sentence, then one clause per dimension
/// present (aesthetics, behavioral, contextual) listing phrases in selection
/// order. Over the cap, whole phrases are dropped from the end.
pub fn compose(subject: &str, selections: &[FeatureSelection]) -> Result<Composed, ScaffoldError> {
    let subject = subject.trim().trim_end_matches('.').trim();
    if subject.is_empty() {
        return Err(ScaffoldError::EmptySubject);
    }
    let mut clauses: Vec<(Dimension, Vec<&str>)> = Dimension::ALL
        .iter()
        .map(|d| {
            let phrases = selections
                .iter()
                .filter(|s| s.dimension == *d)
                .map(|s| s.phrase.trim())
                .collect();
            (*d, phrases)
        })
        .collect();
    let mut text = render(subject, &clauses);
    let mut truncated = false;
    while text.chars().count() > PROMPT_CHAR_CAP {
        let Some(last) = clauses.iter_mut().rev().find(|(_, p)| !p.is_empty()) else {
            break;
        };
        last.1.pop();
        truncated = true;
        text = render(subject, &clauses);
    }
    Ok(Composed { text, truncated })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptDraft {
    pub subject: String,
    pub selections: Vec<FeatureSelection>,
    pub auto_text: String,
    pub manual_text: Option<String>,
    pub synced: bool,
    #[serde(default)]
    pub truncated: bool,
}

impl PromptDraft {
    pub fn new(subject: &str) -> Result<Self, ScaffoldError> {
        let composed = compose(subject, &[])?;
        Ok(PromptDraft {
            subject: subject.trim().to_string(),
            selections: Vec::new(),
            auto_text: composed.text,
            manual_text: None,
            synced: true,
            truncated: composed.truncated,
        })
    }

    fn recompose(&mut self) {
        let composed = compose(&self.subject, &self.selections).expect("draft subject is non-empty");
        self.auto_text = composed.text;
        self.truncated = composed.truncated;
    }

    pub fn set_subject(&mut self, subject: &str) -> Result<(), ScaffoldError> {
        compose(subject, &[])?;
        self.subject = subject.trim().to_string();
        self.recompose();
        Ok(())
    }

    /// Adds the selection unless the same (dimension, key, phrase) is already
    /// selected. Returns whether it was added.
    pub fn add_selection(&mut self, selection: FeatureSelection) -> Result<bool, ScaffoldError> {
        selection.validate()?;
        if self.contains(selection.dimension, &selection.key, &selection.phrase) {
            return Ok(false);
        }
        self.selections.push(selection);
        self.recompose();
        Ok(true)
    }

    /// Removes a selection; removing one that is not there is a no-op that
    /// returns a warning.
    pub fn remove_selection(&mut self, dimension: Dimension, key: &str, phrase: &str) -> Option<String> {
        let before = self.selections.len();
        self.selections.retain(|s| !s.same_feature(dimension, key, phrase));
        if self.selections.len() == before {
            return Some(format!("selection {dimension}/{key}: `{phrase}` is not in the draft"));
        }
        self.recompose();
        None
    }

    pub fn contains(&self, dimension: Dimension, key: &str, phrase: &str) -> bool {
        self.selections.iter().any(|s| s.same_feature(dimension, key, phrase))
    }

    pub fn manual_edit(&mut self, text: &str) -> Result<(), ScaffoldError> {
        if text.trim().is_empty() {
            return Err(ScaffoldError::EmptyManualText);
        }
        self.manual_text = Some(text.to_string());
        self.synced = false;
        Ok(())
    }

    pub fn resync(&mut self) {
        self.manual_text = None;
        self.synced = true;
        self.recompose();
    }

    pub fn effective_prompt(&self) -> &str {
        self.manual_text.as_deref().unwrap_or(&self.auto_text)
    }

    /// Distinct persona ids behind the selections, in first-selected order.
    pub fn persona_ids(&self) -> Vec<String> {
        distinct(self.selections.iter().map(|s| &s.provenance.persona_id))
    }

    /// Distinct product names behind the selections, in first-selected order.
    pub fn product_names(&self) -> Vec<String> {
        distinct(self.selections.iter().map(|s| &s.provenance.product_name))
    }
}

fn distinct<'a>(items: impl Iterator<Item = &'a String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for item in items {
        if !out.contains(item) {
            out.push(item.clone());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GalleryEntry {
    pub id: String,
    pub created_at: u64,
    pub prompt: String,
    pub images: Vec<ImageRef>,
    pub persona_ids: Vec<String>,
    pub product_names: Vec<String>,
}

/// Generate `n` images from the draft's effective prompt.
pub async fn generate(
    gateway: &Gateway,
    draft: &PromptDraft,
    n: usize,
    id: String,
    created_at: u64,
) -> Result<GalleryEntry, ScaffoldError> {
    let prompt = draft.effective_prompt();
    if prompt.trim().is_empty() {
        return Err(ScaffoldError::EmptyPrompt);
    }
    let images = gateway.generate_images(prompt, n).await?;
    Ok(GalleryEntry {
        id,
        created_at,
        prompt: prompt.to_string(),
        images,
        persona_ids: draft.persona_ids(),
        product_names: draft.product_names(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::mock::{generate_key, FixtureStore};
    use crate::gateway::{ImageSource, Operation};

    fn sel(dimension: Dimension, key: &str, phrase: &str, persona: &str) -> FeatureSelection {
        FeatureSelection {
            dimension,
            key: key.into(),
            phrase: phrase.into(),
            provenance: Provenance {
                persona_id: persona.into(),
                product_name: format!("product of {persona}"),
                image: ImageRef {
                    url: "https://img.example/x.jpg".into(),
                    source: ImageSource::Search,
                    query: "x".into(),
                    rank: 0,
                },
            },
            selected_at: 0,
        }
    }

    #[test]
    fn clause_order_and_template() {
        let selections = [
            sel(Dimension::Contextual, "symbolic", "modern minimalism style", "p1"),
            sel(Dimension::Aesthetics, "material", "lightweight aluminum frame", "p1"),
        ];
        let text = compose("a helmet for older adults", &selections).unwrap().text;
        assert_eq!(
            text,
            "Design a helmet for older adults. Aesthetics: lightweight aluminum frame. Context and meaning: modern minimalism style."
        );
        assert_eq!(compose("a chair", &[]).unwrap().text, "Design a chair.");
        assert!(compose("  ", &[]).is_err());
    }

    #[test]
    fn add_remove_is_inverse_and_idempotent() {
        let mut d = PromptDraft::new("a chair for school-aged children").unwrap();
        let before = d.auto_text.clone();
        let s = sel(Dimension::Behavioral, "function", "adjustable seat height", "p1");
        assert!(d.add_selection(s.clone()).unwrap());
        assert!(!d.add_selection(s.clone()).unwrap());
        assert_eq!(d.auto_text.matches("adjustable seat height").count(), 1);
        assert!(d.remove_selection(s.dimension, &s.key, &s.phrase).is_none());
        assert_eq!(d.auto_text, before);
        assert!(d.remove_selection(s.dimension, &s.key, &s.phrase).is_some());
        assert!(d
            .add_selection(sel(Dimension::Behavioral, "color", "bright red", "p1"))
            .is_err());
    }

    #[test]
    fn manual_edit_is_preserved_until_resync() {
        let mut d = PromptDraft::new("a lamp").unwrap();
        d.manual_edit("my own words").unwrap();
        d.add_selection(sel(Dimension::Aesthetics, "color", "warm amber glow", "p2"))
            .unwrap();
        assert_eq!(d.manual_text.as_deref(), Some("my own words"));
        assert!(!d.synced);
        assert_eq!(d.effective_prompt(), "my own words");
        assert!(d.auto_text.contains("warm amber glow"));
        d.resync();
        assert!(d.synced && d.manual_text.is_none());
        assert_eq!(d.effective_prompt(), compose("a lamp", &d.selections).unwrap().text);
        assert!(d.manual_edit("").is_err());
    }

    #[test]
    fn truncation_drops_whole_phrases() {
        let selections: Vec<FeatureSelection> = (0..60)
            .map(|i| {
                sel(
                    Dimension::ALL[i % 3],
                    Dimension::ALL[i % 3].keys()[0],
                    &format!("long descriptive phrase number {i:02} here"),
                    "p",
                )
            })
            .collect();
        let composed = compose("a bench", &selections).unwrap();
        assert!(composed.truncated);
        assert!(composed.text.chars().count() <= PROMPT_CHAR_CAP);
        let kept = selections.iter().filter(|s| composed.text.contains(&s.phrase)).count();
        assert!(kept > 0 && kept < 60);
        assert!(composed.text.ends_with('.'));
    }

    #[tokio::test]
    async fn generate_records_provenance() {
        let mut d = PromptDraft::new("a stool").unwrap();
        d.add_selection(sel(Dimension::Aesthetics, "color", "deep forest green", "p1"))
            .unwrap();
        d.add_selection(sel(Dimension::Aesthetics, "shape", "three splayed legs", "p2"))
            .unwrap();
        d.add_selection(sel(
            Dimension::Contextual,
            "situation",
            "crowded studio apartment",
            "p1",
        ))
        .unwrap();
        let store = FixtureStore::in_memory();
        store.insert_images(
            Operation::GenerateImages,
            generate_key(d.effective_prompt(), 4),
            &["g0", "g1", "g2", "g3"],
        );
        let gateway = Gateway::mock(store);
        let entry = generate(&gateway, &d, 4, "g1".into(), 7).await.unwrap();
        assert_eq!(entry.images.len(), 4);
        assert_eq!(entry.persona_ids, ["p1", "p2"]);
        assert_eq!(entry.prompt, d.auto_text);
        assert!(entry.images.iter().all(|i| i.source == ImageSource::Generated));
    }
}
