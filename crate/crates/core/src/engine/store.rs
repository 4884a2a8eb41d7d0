//! Session documents in memory, optionally mirrored to `<dir>/<id>.json`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use tokio::sync::Mutex;

use super::EngineError;
use crate::session::{Mode, SessionState};

type Handle = Arc<Mutex<SessionState>>;

/// Sessions keyed by id, one lock per session so that slow provider calls in
/// one session never hold up another.
#[derive(Clone, Default)]
pub struct SessionStore {
    dir: Option<PathBuf>,
    sessions: Arc<RwLock<BTreeMap<String, Handle>>>,
    counter: Arc<AtomicU64>,
}

fn storage(e: impl std::fmt::Display) -> EngineError {
    EngineError::Storage(e.to_string())
}

impl SessionStore {
    pub fn in_memory() -> Self {
        Self::default()
    }

    /// Load every session document in `dir` and persist future changes there.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, EngineError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(storage)?;
        let mut sessions = BTreeMap::new();
        let mut highest = 0;
        let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
            .map_err(storage)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path).map_err(storage)?;
            let state = SessionState::load(&text).map_err(|e| storage(format!("{}: {e}", path.display())))?;
            if let Some(n) = state.id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                highest = highest.max(n);
            }
            sessions.insert(state.id.clone(), Arc::new(Mutex::new(state)));
        }
        Ok(SessionStore {
            dir: Some(dir),
            sessions: Arc::new(RwLock::new(sessions)),
            counter: Arc::new(AtomicU64::new(highest)),
        })
    }

    pub fn directory(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn ids(&self) -> Vec<String> {
        self.sessions
            .read()
            .expect("session map lock")
            .keys()
            .cloned()
            .collect()
    }

    pub async fn create(
        &self,
        mode: Mode,
        subject: &str,
        participant: Option<String>,
        now: u64,
    ) -> Result<SessionState, EngineError> {
        let id = format!("s{}", self.counter.fetch_add(1, Ordering::SeqCst) + 1);
        let state = SessionState::new(id.clone(), mode, subject, participant, now)?;
        self.persist(&state).await?;
        self.sessions
            .write()
            .expect("session map lock")
            .insert(id, Arc::new(Mutex::new(state.clone())));
        Ok(state)
    }

    /// Register an existing document, replacing any session with the same id.
    pub async fn insert(&self, state: SessionState) -> Result<(), EngineError> {
        self.persist(&state).await?;
        self.sessions
            .write()
            .expect("session map lock")
            .insert(state.id.clone(), Arc::new(Mutex::new(state)));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<Handle, EngineError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(format!("unknown session `{id}`")))
    }

    /// The session an entity id (`<session>-<kind><n>`) belongs to.
    pub fn owner_of<'a>(&self, entity_id: &'a str) -> Result<&'a str, EngineError> {
        entity_id
            .rsplit_once('-')
            .map(|(session, _)| session)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| EngineError::NotFound(format!("unknown id `{entity_id}`")))
    }

    pub async fn persist(&self, state: &SessionState) -> Result<(), EngineError> {
        let Some(dir) = &self.dir else {
            return Ok(());
        };
        let path = dir.join(format!("{}.json", state.id));
        let tmp = dir.join(format!(".{}.json.tmp", state.id));
        tokio::fs::write(&tmp, state.save()).await.map_err(storage)?;
        tokio::fs::rename(&tmp, &path).await.map_err(storage)
    }
}
