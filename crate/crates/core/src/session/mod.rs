//! The ideation session document: canvas, production, chat threads and the
//! event log, persisted as one versioned JSON document.

pub mod events;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::gateway::Role;
use crate::pipeline::{Dimension, FeatureMatrix, ProductBatch, ProductSuggestion};
use crate::scaffold::{FeatureSelection, GalleryEntry, PromptDraft};
pub use events::{
    metrics_csv, metrics_from_log, EmptyLog, EventError, EventKind, EventPolicy, EventRecord, UsageMetrics,
    CSV_HEADINGS,
};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_SUBJECT: &str = "a new product";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Personagram,
    Baseline,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Personagram => "Personagram",
            Mode::Baseline => "Baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "personagram" => Ok(Mode::Personagram),
            "baseline" => Ok(Mode::Baseline),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub id: String,
    pub persona_id: String,
    pub position: Position,
    /// Product batches inferred for this tile, oldest first.
    #[serde(default)]
    pub batch_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Card {
    pub id: String,
    pub tile_id: String,
    pub batch_id: String,
    pub suggestion_index: usize,
    pub suggestion: ProductSuggestion,
    pub position: Position,
    #[serde(default)]
    pub discarded: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredBatch {
    pub id: String,
    pub tile_id: String,
    pub batch: ProductBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredMatrix {
    pub id: String,
    pub card_id: String,
    pub matrix: FeatureMatrix,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Canvas {
    pub tiles: Vec<Tile>,
    pub cards: Vec<Card>,
    pub batches: Vec<StoredBatch>,
    pub matrices: Vec<StoredMatrix>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Production {
    pub draft: PromptDraft,
    /// Newest first.
    pub gallery: Vec<GalleryEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub text: String,
    pub timestamp: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatThread {
    pub id: String,
    pub persona_ids: Vec<String>,
    pub messages: Vec<ChatMessage>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub tiles: u64,
    pub cards: u64,
    pub batches: u64,
    pub matrices: u64,
    pub gallery: u64,
    pub threads: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub schema_version: u32,
    pub id: String,
    pub mode: Mode,
    /// Label used as the PID column of metric exports.
    pub participant: String,
    pub created_at: u64,
    pub canvas: Canvas,
    pub production: Production,
    pub chat: Vec<ChatThread>,
    pub event_log: Vec<EventRecord>,
    pub counters: Counters,
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("unknown {what} `{id}`")]
    NotFound { what: &'static str, id: String },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Event(#[from] EventError),
    #[error("corrupt session document: {0}")]
    Corrupt(String),
    #[error("session document schema version {found} is not supported (expected {SCHEMA_VERSION})")]
    VersionMismatch { found: u64 },
}

fn not_found(what: &'static str, id: &str) -> SessionError {
    SessionError::NotFound {
        what,
        id: id.to_string(),
    }
}

/// The rule for how many suggestions a bulb press shows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BulbPlan {
    /// No batch yet, or the latest one is fully shown: infer a new batch and show this many.
    Infer { display: usize },
    /// Show more of an existing batch.
    Reveal { batch_id: String, indices: Vec<usize> },
}

impl SessionState {
    pub fn new(
        id: impl Into<String>,
        mode: Mode,
        subject: &str,
        participant: Option<String>,
        created_at: u64,
    ) -> Result<Self, SessionError> {
        let id = id.into();
        let draft = PromptDraft::new(subject).map_err(|e| SessionError::Invalid(e.to_string()))?;
        Ok(SessionState {
            schema_version: SCHEMA_VERSION,
            participant: participant.unwrap_or_else(|| id.clone()),
            id,
            mode,
            created_at,
            canvas: Canvas::default(),
            production: Production {
                draft,
                gallery: Vec::new(),
            },
            chat: Vec::new(),
            event_log: Vec::new(),
            counters: Counters::default(),
        })
    }

    fn next_id(counter: &mut u64, session: &str, prefix: &str) -> String {
        *counter += 1;
        format!("{session}-{prefix}{counter}")
    }

    pub fn next_tile_id(&mut self) -> String {
        Self::next_id(&mut self.counters.tiles, &self.id, "t")
    }

    pub fn next_card_id(&mut self) -> String {
        Self::next_id(&mut self.counters.cards, &self.id, "c")
    }

    pub fn next_batch_id(&mut self) -> String {
        Self::next_id(&mut self.counters.batches, &self.id, "b")
    }

    pub fn next_matrix_id(&mut self) -> String {
        Self::next_id(&mut self.counters.matrices, &self.id, "m")
    }

    pub fn next_gallery_id(&mut self) -> String {
        Self::next_id(&mut self.counters.gallery, &self.id, "g")
    }

    pub fn next_thread_id(&mut self) -> String {
        Self::next_id(&mut self.counters.threads, &self.id, "h")
    }

    pub fn tile(&self, id: &str) -> Result<&Tile, SessionError> {
        self.canvas
            .tiles
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| not_found("tile", id))
    }

    pub fn card(&self, id: &str) -> Result<&Card, SessionError> {
        self.canvas
            .cards
            .iter()
            .find(|c| c.id == id)
            .ok_or_else(|| not_found("card", id))
    }

    pub fn card_mut(&mut self, id: &str) -> Result<&mut Card, SessionError> {
        self.canvas
            .cards
            .iter_mut()
            .find(|c| c.id == id)
            .ok_or_else(|| not_found("card", id))
    }

    pub fn batch(&self, id: &str) -> Result<&StoredBatch, SessionError> {
        self.canvas
            .batches
            .iter()
            .find(|b| b.id == id)
            .ok_or_else(|| not_found("batch", id))
    }

    pub fn matrix(&self, id: &str) -> Result<&StoredMatrix, SessionError> {
        self.canvas
            .matrices
            .iter()
            .find(|m| m.id == id)
            .ok_or_else(|| not_found("matrix", id))
    }

    pub fn thread(&self, id: &str) -> Result<&ChatThread, SessionError> {
        self.chat
            .iter()
            .find(|t| t.id == id)
            .ok_or_else(|| not_found("thread", id))
    }

    pub fn thread_mut(&mut self, id: &str) -> Result<&mut ChatThread, SessionError> {
        self.chat
            .iter_mut()
            .find(|t| t.id == id)
            .ok_or_else(|| not_found("thread", id))
    }

    pub fn last_timestamp(&self) -> Option<u64> {
        self.event_log.last().map(|e| e.timestamp_ms)
    }

    fn check_target(&self, record: &EventRecord) -> Result<(), EventError> {
        let expected: &'static str = match record.kind {
            EventKind::Bulb => "tile",
            EventKind::Swap | EventKind::Discard | EventKind::Puzzle => "card",
            EventKind::Plus | EventKind::Unselect => "matrix",
            EventKind::Generate => "gallery entry",
            EventKind::ChatQuery => "thread",
            EventKind::SelectPersona => "tile or thread",
            EventKind::TabSwitch | EventKind::FilterChange | EventKind::ManualEdit | EventKind::Resync => return Ok(()),
        };
        let target = record
            .target
            .as_deref()
            .ok_or(EventError::MissingTarget { kind: record.kind })?;
        let found = match expected {
            "tile" => self.tile(target).is_ok(),
            "card" => self.card(target).is_ok(),
            "matrix" => self.matrix(target).is_ok(),
            "gallery entry" => self.production.gallery.iter().any(|g| g.id == target),
            "thread" => self.thread(target).is_ok(),
            _ => self.tile(target).is_ok() || self.thread(target).is_ok(),
        };
        if found {
            Ok(())
        } else {
            Err(EventError::UnknownTarget {
                kind: record.kind,
                expected,
                target: target.to_string(),
            })
        }
    }

    /// Append to the log. Timestamps must not go backwards; under
    /// [`EventPolicy::Strict`] the target must also resolve in this session.
    pub fn record_event(&mut self, record: EventRecord, policy: EventPolicy) -> Result<(), EventError> {
        if let Some(last) = self.last_timestamp() {
            if record.timestamp_ms < last {
                return Err(EventError::TimestampRegression {
                    last,
                    got: record.timestamp_ms,
                });
            }
        }
        if policy == EventPolicy::Strict {
            self.check_target(&record)?;
        }
        self.event_log.push(record);
        Ok(())
    }

    pub fn compute_metrics(&self) -> Result<UsageMetrics, EmptyLog> {
        metrics_from_log(&self.id, &self.participant, self.mode, &self.event_log)
    }

    /// What the next bulb press on `tile_id` should do.
    pub fn bulb_plan(&self, tile_id: &str, first: usize, next: usize) -> Result<BulbPlan, SessionError> {
        let tile = self.tile(tile_id)?;
        let Some(batch_id) = tile.batch_ids.last() else {
            return Ok(BulbPlan::Infer { display: first });
        };
        let batch = self.batch(batch_id)?;
        let shown: Vec<usize> = self
            .canvas
            .cards
            .iter()
            .filter(|c| &c.batch_id == batch_id)
            .map(|c| c.suggestion_index)
            .collect();
        let remaining: Vec<usize> = (0..batch.batch.suggestions.len())
            .filter(|i| !shown.contains(i))
            .collect();
        if remaining.is_empty() {
            return Ok(BulbPlan::Infer { display: next });
        }
        Ok(BulbPlan::Reveal {
            batch_id: batch_id.clone(),
            indices: remaining.into_iter().take(next).collect(),
        })
    }

    /// Store a newly inferred batch against its tile and return its id.
    pub fn push_batch(&mut self, tile_id: &str, batch: ProductBatch) -> Result<String, SessionError> {
        self.tile(tile_id)?;
        let id = self.next_batch_id();
        self.canvas.batches.push(StoredBatch {
            id: id.clone(),
            tile_id: tile_id.to_string(),
            batch,
        });
        let tile = self
            .canvas
            .tiles
            .iter_mut()
            .find(|t| t.id == tile_id)
            .expect("checked above");
        tile.batch_ids.push(id.clone());
        Ok(id)
    }

    /// Place cards for the given suggestions (already carrying their images)
    /// next to the tile.
    pub fn place_cards(
        &mut self,
        tile_id: &str,
        batch_id: &str,
        suggestions: Vec<(usize, ProductSuggestion, Option<String>)>,
    ) -> Result<Vec<Card>, SessionError> {
        let origin = self.tile(tile_id)?.position;
        let mut placed = Vec::new();
        for (index, suggestion, warning) in suggestions {
            let slot = self.canvas.cards.iter().filter(|c| c.tile_id == tile_id).count();
            let card = Card {
                id: self.next_card_id(),
                tile_id: tile_id.to_string(),
                batch_id: batch_id.to_string(),
                suggestion_index: index,
                suggestion,
                position: Position {
                    x: origin.x + 260.0 * (1 + slot % 5) as f64,
                    y: origin.y + 300.0 * (slot / 5) as f64,
                },
                discarded: false,
                warnings: warning.into_iter().collect(),
            };
            self.canvas.cards.push(card.clone());
            placed.push(card);
        }
        Ok(placed)
    }

    /// Select (or unselect) a feature of a stored matrix.
    pub fn feature_selection(
        &self,
        matrix_id: &str,
        dimension: Dimension,
        key: &str,
        phrase: &str,
        selected_at: u64,
    ) -> Result<FeatureSelection, SessionError> {
        let stored = self.matrix(matrix_id)?;
        if !stored.matrix.contains(dimension, key, phrase) {
            return Err(SessionError::Invalid(format!(
                "matrix `{matrix_id}` has no {dimension}/{key} feature `{phrase}`"
            )));
        }
        Ok(FeatureSelection {
            dimension,
            key: key.to_string(),
            phrase: phrase.to_string(),
            provenance: stored.matrix.provenance.clone(),
            selected_at,
        })
    }

    /// Every dangling reference in the document; empty when consistent.
    pub fn integrity_problems(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for card in &self.canvas.cards {
            if self.tile(&card.tile_id).is_err() {
                problems.push(format!("card {} references missing tile {}", card.id, card.tile_id));
            }
            match self.batch(&card.batch_id) {
                Ok(b) if card.suggestion_index < b.batch.suggestions.len() => {}
                _ => problems.push(format!("card {} references missing suggestion", card.id)),
            }
        }
        for m in &self.canvas.matrices {
            if self.card(&m.card_id).is_err() {
                problems.push(format!("matrix {} references missing card {}", m.id, m.card_id));
            }
        }
        for s in &self.production.draft.selections {
            let resolves = self
                .canvas
                .matrices
                .iter()
                .any(|m| m.matrix.provenance == s.provenance && m.matrix.contains(s.dimension, &s.key, &s.phrase));
            if !resolves {
                problems.push(format!("selection `{}` does not resolve to a stored matrix", s.phrase));
            }
        }
        if self.event_log.windows(2).any(|w| w[1].timestamp_ms < w[0].timestamp_ms) {
            problems.push("event log timestamps decrease".to_string());
        }
        problems
    }

    /// The document form (pretty JSON).
    pub fn save(&self) -> String {
        serde_json::to_string_pretty(self).expect("session state serializes") + "\n"
    }

    pub fn load(document: &str) -> Result<Self, SessionError> {
        let value: Value = serde_json::from_str(document).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let version = value
            .get("schema_version")
            .and_then(Value::as_u64)
            .ok_or_else(|| SessionError::Corrupt("missing schema_version".into()))?;
        if version != u64::from(SCHEMA_VERSION) {
            return Err(SessionError::VersionMismatch { found: version });
        }
        let state: SessionState = serde_json::from_value(value).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        if state
            .event_log
            .windows(2)
            .any(|w| w[1].timestamp_ms < w[0].timestamp_ms)
        {
            return Err(SessionError::Corrupt("event log timestamps decrease".into()));
        }
        Ok(state)
    }

    /// The document with every wall-clock field zeroed, for comparing runs.
    pub fn without_timestamps(&self) -> Value {
        let mut value = serde_json::to_value(self).expect("session state serializes");
        strip_times(&mut value);
        value
    }
}

fn strip_times(value: &mut Value) {
    match value {
        Value::Object(map) => {
            for (k, v) in map.iter_mut() {
                if matches!(k.as_str(), "timestamp_ms" | "timestamp" | "created_at" | "selected_at") {
                    *v = Value::from(0);
                } else {
                    strip_times(v);
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(strip_times),
        _ => {}
    }
}

/// A standalone event log, as written by `session replay` inputs: either a
/// bare array of records or an object naming the mode and participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogFile {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub participant: Option<String>,
    #[serde(default)]
    pub mode: Mode,
    pub events: Vec<EventRecord>,
}

impl EventLogFile {
    pub fn parse(text: &str) -> Result<Self, SessionError> {
        let value: Value = serde_json::from_str(text).map_err(|e| SessionError::Corrupt(e.to_string()))?;
        let file = if value.is_array() {
            EventLogFile {
                session_id: None,
                participant: None,
                mode: Mode::Personagram,
                events: serde_json::from_value(value).map_err(|e| SessionError::Corrupt(e.to_string()))?,
            }
        } else {
            serde_json::from_value(value).map_err(|e| SessionError::Corrupt(e.to_string()))?
        };
        Ok(file)
    }
}

/// Rebuild a session's log from records alone (timestamps checked, references
/// not) and compute its metrics.
pub fn replay_events(file: &EventLogFile) -> Result<(SessionState, UsageMetrics), SessionError> {
    let id = file.session_id.clone().unwrap_or_else(|| "replay".to_string());
    let mut session = SessionState::new(id, file.mode, DEFAULT_SUBJECT, file.participant.clone(), 0)?;
    for record in &file.events {
        session.record_event(record.clone(), EventPolicy::TimestampsOnly)?;
    }
    let metrics = session
        .compute_metrics()
        .map_err(|e| SessionError::Invalid(e.to_string()))?;
    Ok((session, metrics))
}
