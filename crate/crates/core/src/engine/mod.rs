//! Everything the HTTP service and the CLI drive: persona queries, canvas
//! actions, the prompt programs, scaffolding, generation, baseline chat and
//! metrics, over a shared corpus, gateway and session store.

mod chat;
mod clock;
mod store;

use std::sync::Arc;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::corpus::{FilterQuery, PersonaCard, PersonaCorpus, QueryError, UnknownPersona};
use crate::gateway::{Gateway, GatewayError, ImageRef};
use crate::pipeline::{
    self, Dimension, PipelineError, ProductBatch, Provenance, FIRST_DISPLAY_COUNT, NEXT_DISPLAY_COUNT,
};
use crate::scaffold::{self, GalleryEntry, PromptDraft, ScaffoldError};
use crate::session::{
    BulbPlan, Card, ChatMessage, ChatThread, EventKind, EventPolicy, EventRecord, Mode, Position, SessionError,
    SessionState, StoredMatrix, Tile, UsageMetrics, DEFAULT_SUBJECT,
};
pub use chat::{baseline_request, persona_block, CHAT_CONTEXT_MESSAGES, ROLE_PLAY_FRAMING};
pub use clock::{clock_from_env, Clock, SteppingClock, SystemClock, CLOCK_ENV};
pub use store::SessionStore;

pub const DEFAULT_GENERATION_COUNT: usize = 4;

/// How an error should surface to a caller.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    NotAllowed,
    Upstream,
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error("{0}")]
    NotFound(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    NotAllowed(String),
    #[error(transparent)]
    Gateway(GatewayError),
    #[error(transparent)]
    Pipeline(Box<PipelineError>),
    #[error("{0}")]
    Storage(String),
}

impl EngineError {
    pub fn class(&self) -> ErrorClass {
        match self {
            EngineError::NotFound(_) => ErrorClass::NotFound,
            EngineError::Invalid(_) => ErrorClass::Validation,
            EngineError::NotAllowed(_) => ErrorClass::NotAllowed,
            EngineError::Gateway(GatewayError::Precondition(_)) => ErrorClass::Validation,
            EngineError::Gateway(_) => ErrorClass::Upstream,
            EngineError::Pipeline(e) if e.code() == "precondition_error" => ErrorClass::Validation,
            EngineError::Pipeline(_) => ErrorClass::Upstream,
            EngineError::Storage(_) => ErrorClass::Internal,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            EngineError::NotFound(_) => "not_found",
            EngineError::Invalid(_) => "validation_error",
            EngineError::NotAllowed(_) => "mode_not_allowed",
            EngineError::Gateway(GatewayError::Precondition(_)) => "precondition_error",
            EngineError::Gateway(_) => "provider_error",
            EngineError::Pipeline(e) => e.code(),
            EngineError::Storage(_) => "storage_error",
        }
    }

    /// Structured context: attempt counts for provider failures, both raw
    /// responses for rejected model output.
    pub fn detail(&self) -> Value {
        match self {
            EngineError::Gateway(e) => gateway_detail(e),
            EngineError::Pipeline(p) => match p.as_ref() {
                PipelineError::Gateway(e) => gateway_detail(e),
                PipelineError::Unparseable {
                    first_raw,
                    first_error,
                    second_raw,
                    second_error,
                } => json!({
                "first_raw": first_raw,
                "first_error": first_error,
                "second_raw": second_raw,
                "second_error": second_error,
                }),
                _ => Value::Null,
            },
            _ => Value::Null,
        }
    }
}

fn gateway_detail(e: &GatewayError) -> Value {
    match e {
        GatewayError::Provider {
            operation,
            attempts,
            source,
        } => json!({"operation": operation, "attempts": attempts, "provider_error": source.kind}),
        GatewayError::Precondition(_) => Value::Null,
    }
}

impl From<SessionError> for EngineError {
    fn from(e: SessionError) -> Self {
        match e {
            SessionError::NotFound { .. } => EngineError::NotFound(e.to_string()),
            SessionError::Invalid(_) | SessionError::Event(_) => EngineError::Invalid(e.to_string()),
            SessionError::Corrupt(_) | SessionError::VersionMismatch { .. } => EngineError::Storage(e.to_string()),
        }
    }
}

impl From<ScaffoldError> for EngineError {
    fn from(e: ScaffoldError) -> Self {
        match e {
            ScaffoldError::Gateway(g) => EngineError::Gateway(g),
            other => EngineError::Invalid(other.to_string()),
        }
    }
}

impl From<UnknownPersona> for EngineError {
    fn from(e: UnknownPersona) -> Self {
        EngineError::NotFound(e.to_string())
    }
}

impl From<QueryError> for EngineError {
    fn from(e: QueryError) -> Self {
        EngineError::Invalid(e.to_string())
    }
}

impl From<PipelineError> for EngineError {
    fn from(e: PipelineError) -> Self {
        EngineError::Pipeline(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NewSession {
    #[serde(default)]
    pub mode: Mode,
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub participant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Layout and subject changes; these are not interaction events.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SessionPatch {
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub tiles: Vec<Placement>,
    #[serde(default)]
    pub cards: Vec<Placement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewTile {
    pub persona_id: String,
    #[serde(default)]
    pub x: Option<f64>,
    #[serde(default)]
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulbResult {
    pub tile_id: String,
    pub batch_id: String,
    /// Whether this press ran a new inference.
    pub inferred: bool,
    pub cards: Vec<Card>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionAction {
    #[default]
    Add,
    Remove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionChange {
    #[serde(default)]
    pub action: SelectionAction,
    pub matrix_id: String,
    pub dimension: Dimension,
    pub key: String,
    pub phrase: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub draft: PromptDraft,
    pub changed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DraftChange {
    #[serde(default)]
    pub subject: Option<String>,
    #[serde(default)]
    pub manual_text: Option<String>,
    #[serde(default)]
    pub resync: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UiEvent {
    pub kind: EventKind,
    #[serde(default)]
    pub detail: Option<Value>,
}

#[derive(Clone)]
pub struct Engine {
    corpus: Arc<PersonaCorpus>,
    gateway: Gateway,
    sessions: SessionStore,
    clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(corpus: Arc<PersonaCorpus>, gateway: Gateway, sessions: SessionStore, clock: Arc<dyn Clock>) -> Self {
        Engine {
            corpus,
            gateway,
            sessions,
            clock,
        }
    }

    pub fn corpus(&self) -> &PersonaCorpus {
        &self.corpus
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }

    fn now(&self, session: &SessionState) -> u64 {
        self.clock.now_ms().max(session.last_timestamp().unwrap_or(0))
    }

    fn log(&self, session: &mut SessionState, record: EventRecord) -> Result<(), EngineError> {
        session
            .record_event(record, EventPolicy::Strict)
            .map_err(|e| EngineError::Invalid(e.to_string()))
    }

    fn require_mode(session: &SessionState, mode: Mode, what: &str) -> Result<(), EngineError> {
        if session.mode != mode {
            return Err(EngineError::NotAllowed(format!(
                "{what} is not available in {} sessions",
                session.mode.label().to_lowercase()
            )));
        }
        Ok(())
    }

    // persona corpus

    pub fn filter_personas(&self, query: &FilterQuery) -> Vec<String> {
        self.corpus.filter(query)
    }

    pub fn preview(&self, persona_id: &str) -> Result<PersonaCard, EngineError> {
        Ok(self.corpus.preview(persona_id)?)
    }

    /// The filter hierarchy with per-value persona counts.
    pub fn facets(&self) -> Value {
        let mut tree = crate::corpus::hierarchy::describe();
        if let Some(groups) = tree.get_mut("groups").and_then(Value::as_array_mut) {
            for facet in groups
                .iter_mut()
                .flat_map(|g| g["facets"].as_array_mut().into_iter().flatten())
            {
                let path = facet["path"].as_str().unwrap_or_default().to_string();
                if let Ok(f) = path.parse() {
                    facet["counts"] = json!(self.corpus.facet_counts(f));
                }
            }
        }
        tree
    }

    // standalone prompt programs

    /// Infer products for a persona and attach images to the first `display` suggestions.
    pub async fn infer_for_persona(&self, persona_id: &str, display: usize) -> Result<ProductBatch, EngineError> {
        let persona = self.corpus.get(persona_id)?;
        let batch = pipeline::infer_products(&self.gateway, persona).await?;
        Ok(pipeline::attach_reference_images(&self.gateway, batch, display).await?)
    }

    pub async fn features_for_image(
        &self,
        provenance: Provenance,
    ) -> Result<crate::pipeline::FeatureMatrix, EngineError> {
        Ok(pipeline::extract_features(&self.gateway, provenance).await?)
    }

    // sessions

    pub async fn create_session(&self, request: NewSession) -> Result<SessionState, EngineError> {
        let subject = request.subject.as_deref().unwrap_or(DEFAULT_SUBJECT);
        let now = self.clock.now_ms();
        self.sessions
            .create(request.mode, subject, request.participant, now)
            .await
    }

    pub async fn session(&self, id: &str) -> Result<SessionState, EngineError> {
        let handle = self.sessions.get(id)?;
        let session = handle.lock().await;
        Ok(session.clone())
    }

    pub async fn update_session(&self, id: &str, patch: SessionPatch) -> Result<SessionState, EngineError> {
        let handle = self.sessions.get(id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        if let Some(subject) = &patch.subject {
            session.production.draft.set_subject(subject)?;
        }
        for p in &patch.tiles {
            let tile = session
                .canvas
                .tiles
                .iter_mut()
                .find(|t| t.id == p.id)
                .ok_or_else(|| EngineError::NotFound(format!("unknown tile `{}`", p.id)))?;
            tile.position = Position { x: p.x, y: p.y };
        }
        for p in &patch.cards {
            session.card_mut(&p.id)?.position = Position { x: p.x, y: p.y };
        }
        self.commit(&mut guard, session).await
    }

    async fn commit(&self, guard: &mut SessionState, session: SessionState) -> Result<SessionState, EngineError> {
        self.sessions.persist(&session).await?;
        *guard = session;
        Ok(guard.clone())
    }

    pub async fn add_tile(&self, session_id: &str, request: NewTile) -> Result<Tile, EngineError> {
        self.corpus.get(&request.persona_id)?;
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        let id = session.next_tile_id();
        let slot = session.canvas.tiles.len() as f64;
        let tile = Tile {
            id: id.clone(),
            persona_id: request.persona_id.clone(),
            position: Position {
                x: request.x.unwrap_or(0.0),
                y: request.y.unwrap_or(slot * 320.0),
            },
            batch_ids: Vec::new(),
        };
        session.canvas.tiles.push(tile.clone());
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::SelectPersona, now)
                .with_target(&id)
                .with_detail(json!({"persona_id": request.persona_id})),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(tile)
    }

    /// Bulb press: five cards on the first press, then the next four of the
    /// current batch, re-inferring once it is exhausted.
    pub async fn infer(&self, tile_id: &str) -> Result<BulbResult, EngineError> {
        let handle = self.sessions.get(self.sessions.owner_of(tile_id)?)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        Self::require_mode(&session, Mode::Personagram, "product inference")?;
        let plan = session.bulb_plan(tile_id, FIRST_DISPLAY_COUNT, NEXT_DISPLAY_COUNT)?;
        let (batch_id, indices, inferred) = match plan {
            BulbPlan::Infer { display } => {
                let persona = self.corpus.get(&session.tile(tile_id)?.persona_id)?;
                let batch = pipeline::infer_products(&self.gateway, persona).await?;
                let id = session.push_batch(tile_id, batch)?;
                (id, (0..display).collect::<Vec<_>>(), true)
            }
            BulbPlan::Reveal { batch_id, indices } => (batch_id, indices, false),
        };
        let stored = session.batch(&batch_id)?.batch.clone();
        let picks = join_all(
            indices
                .iter()
                .map(|&i| pipeline::pick_image(&self.gateway, &stored.suggestions[i])),
        )
        .await;
        let mut warnings = Vec::new();
        let mut per_index = Vec::new();
        for (&i, pick) in indices.iter().zip(picks) {
            let mut suggestion = stored.suggestions[i].clone();
            let warning = match pick {
                Ok(image) => {
                    suggestion.image = Some(image);
                    None
                }
                Err(w) => {
                    warnings.push(w.clone());
                    Some(w)
                }
            };
            per_index.push((i, suggestion, warning));
        }
        if let Some(stored) = session.canvas.batches.iter_mut().find(|b| b.id == batch_id) {
            stored.batch.warnings.extend(warnings.iter().cloned());
        }
        let cards = session.place_cards(tile_id, &batch_id, per_index)?;
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::Bulb, now)
                .with_target(tile_id)
                .with_detail(json!({"batch_id": batch_id, "cards": cards.iter().map(|c| &c.id).collect::<Vec<_>>()})),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(BulbResult {
            tile_id: tile_id.to_string(),
            batch_id,
            inferred,
            cards,
            warnings,
        })
    }

    pub async fn swap(&self, card_id: &str) -> Result<Card, EngineError> {
        let handle = self.sessions.get(self.sessions.owner_of(card_id)?)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        let card = session.card_mut(card_id)?;
        if card.discarded {
            return Err(EngineError::Invalid(format!("card `{card_id}` is discarded")));
        }
        let warning = pipeline::swap(&self.gateway, &mut card.suggestion).await;
        card.warnings = warning.into_iter().collect();
        let card = card.clone();
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::Swap, now).with_target(card_id),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(card)
    }

    pub async fn discard(&self, card_id: &str) -> Result<Card, EngineError> {
        let handle = self.sessions.get(self.sessions.owner_of(card_id)?)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        let card = session.card_mut(card_id)?;
        card.discarded = true;
        let card = card.clone();
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::Discard, now).with_target(card_id),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(card)
    }

    /// Puzzle press: extract the feature matrix from the card's image.
    pub async fn features(&self, card_id: &str) -> Result<StoredMatrix, EngineError> {
        let handle = self.sessions.get(self.sessions.owner_of(card_id)?)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        Self::require_mode(&session, Mode::Personagram, "feature extraction")?;
        let card = session.card(card_id)?.clone();
        if card.discarded {
            return Err(EngineError::Invalid(format!("card `{card_id}` is discarded")));
        }
        let image: ImageRef = card
            .suggestion
            .image
            .clone()
            .ok_or_else(|| EngineError::Invalid(format!("card `{card_id}` has no reference image")))?;
        let provenance = Provenance {
            persona_id: session.tile(&card.tile_id)?.persona_id.clone(),
            product_name: card.suggestion.name.clone(),
            image,
        };
        let matrix = pipeline::extract_features(&self.gateway, provenance).await?;
        let stored = StoredMatrix {
            id: session.next_matrix_id(),
            card_id: card_id.to_string(),
            matrix,
        };
        session.canvas.matrices.push(stored.clone());
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::Puzzle, now)
                .with_target(card_id)
                .with_detail(json!({"matrix_id": stored.id})),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(stored)
    }

    /// Plus press (or chip removal) on the scaffold.
    pub async fn change_selection(
        &self,
        session_id: &str,
        change: SelectionChange,
    ) -> Result<SelectionResult, EngineError> {
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        Self::require_mode(&session, Mode::Personagram, "feature selection")?;
        let now = self.now(&session);
        let (changed, warning, kind) = match change.action {
            SelectionAction::Add => {
                let selection =
                    session.feature_selection(&change.matrix_id, change.dimension, &change.key, &change.phrase, now)?;
                (
                    session.production.draft.add_selection(selection)?,
                    None,
                    EventKind::Plus,
                )
            }
            SelectionAction::Remove => {
                session.matrix(&change.matrix_id)?;
                let warning = session
                    .production
                    .draft
                    .remove_selection(change.dimension, &change.key, &change.phrase);
                (warning.is_none(), warning, EventKind::Unselect)
            }
        };
        self.log(
            &mut session,
            EventRecord::new(kind, now)
                .with_target(&change.matrix_id)
                .with_detail(json!({
                    "dimension": change.dimension,
                    "key": change.key,
                    "phrase": change.phrase,
                })),
        )?;
        let saved = self.commit(&mut guard, session).await?;
        Ok(SelectionResult {
            draft: saved.production.draft,
            changed,
            warning,
        })
    }

    pub async fn draft(&self, session_id: &str) -> Result<PromptDraft, EngineError> {
        Ok(self.session(session_id).await?.production.draft)
    }

    /// Subject change, manual edit or resync. Edits and resyncs are logged.
    pub async fn update_draft(&self, session_id: &str, change: DraftChange) -> Result<PromptDraft, EngineError> {
        if change.manual_text.is_some() && change.resync {
            return Err(EngineError::Invalid(
                "manual_text and resync are mutually exclusive".into(),
            ));
        }
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        if let Some(subject) = &change.subject {
            session.production.draft.set_subject(subject)?;
        }
        let now = self.now(&session);
        if let Some(text) = &change.manual_text {
            session.production.draft.manual_edit(text)?;
            self.log(&mut session, EventRecord::new(EventKind::ManualEdit, now))?;
        } else if change.resync {
            session.production.draft.resync();
            self.log(&mut session, EventRecord::new(EventKind::Resync, now))?;
        }
        Ok(self.commit(&mut guard, session).await?.production.draft)
    }

    /// Generate images from the effective prompt; the entry goes to the top of the gallery.
    pub async fn generate(&self, session_id: &str, n: usize) -> Result<GalleryEntry, EngineError> {
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        let now = self.now(&session);
        let id = session.next_gallery_id();
        let entry = scaffold::generate(&self.gateway, &session.production.draft, n, id, now).await?;
        session.production.gallery.insert(0, entry.clone());
        self.log(
            &mut session,
            EventRecord::new(EventKind::Generate, now).with_target(&entry.id),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(entry)
    }

    pub async fn metrics(&self, session_id: &str) -> Result<UsageMetrics, EngineError> {
        self.session(session_id)
            .await?
            .compute_metrics()
            .map_err(|e| EngineError::Invalid(e.to_string()))
    }

    /// View changes and filter edits reported by the UI.
    pub async fn record_ui_event(&self, session_id: &str, event: UiEvent) -> Result<EventRecord, EngineError> {
        if !matches!(event.kind, EventKind::TabSwitch | EventKind::FilterChange) {
            return Err(EngineError::Invalid(format!(
                "only tab_switch and filter_change can be reported directly, not {}",
                event.kind
            )));
        }
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        let mut record = EventRecord::new(event.kind, self.now(&session));
        record.detail = event.detail;
        self.log(&mut session, record.clone())?;
        self.commit(&mut guard, session).await?;
        Ok(record)
    }

    // baseline chat

    pub async fn create_thread(&self, session_id: &str, persona_ids: Vec<String>) -> Result<ChatThread, EngineError> {
        if persona_ids.is_empty() {
            return Err(EngineError::Invalid("a thread needs at least one persona".into()));
        }
        let mut distinct: Vec<String> = Vec::new();
        for id in persona_ids {
            self.corpus.get(&id)?;
            if !distinct.contains(&id) {
                distinct.push(id);
            }
        }
        let handle = self.sessions.get(session_id)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        Self::require_mode(&session, Mode::Baseline, "chat")?;
        let thread = ChatThread {
            id: session.next_thread_id(),
            persona_ids: distinct,
            messages: Vec::new(),
        };
        session.chat.push(thread.clone());
        let now = self.now(&session);
        self.log(
            &mut session,
            EventRecord::new(EventKind::SelectPersona, now)
                .with_target(&thread.id)
                .with_detail(json!({"persona_ids": thread.persona_ids})),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(thread)
    }

    /// Send a message; on success both messages are appended, on failure the thread is unchanged.
    pub async fn post_message(&self, thread_id: &str, text: &str) -> Result<ChatMessage, EngineError> {
        if text.trim().is_empty() {
            return Err(EngineError::Invalid("message text must be non-empty".into()));
        }
        let handle = self.sessions.get(self.sessions.owner_of(thread_id)?)?;
        let mut guard = handle.lock().await;
        let mut session = guard.clone();
        Self::require_mode(&session, Mode::Baseline, "chat")?;
        let thread = session.thread(thread_id)?.clone();
        let personas = thread
            .persona_ids
            .iter()
            .map(|id| self.corpus.get(id))
            .collect::<Result<Vec<_>, _>>()?;
        let request = baseline_request(&personas, &thread.messages, text);
        let answer = self.gateway.complete(&request).await.map_err(EngineError::Gateway)?;
        let now = self.now(&session);
        let reply = ChatMessage {
            role: crate::gateway::Role::Assistant,
            text: answer,
            timestamp: now,
        };
        let thread = session.thread_mut(thread_id)?;
        thread.messages.push(ChatMessage {
            role: crate::gateway::Role::User,
            text: text.to_string(),
            timestamp: now,
        });
        thread.messages.push(reply.clone());
        self.log(
            &mut session,
            EventRecord::new(EventKind::ChatQuery, now).with_target(thread_id),
        )?;
        self.commit(&mut guard, session).await?;
        Ok(reply)
    }
}

#[cfg(test)]
mod tests;
