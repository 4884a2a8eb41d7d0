use std::path::PathBuf;
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use personagram_core::corpus::PersonaCorpus;
use personagram_core::engine::{
    DraftChange, Engine, NewSession, NewTile, SelectionAction, SelectionChange, SessionStore, SteppingClock, UiEvent,
};
use personagram_core::gateway::synthetic::SyntheticProvider;
use personagram_core::gateway::{Gateway, RetryPolicy};
use personagram_core::pipeline::Dimension;
use personagram_core::session::events::EventKind;
use personagram_core::session::SessionState;
use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> Arc<PersonaCorpus> {
    static CORPUS: OnceLock<Arc<PersonaCorpus>> = OnceLock::new();
    CORPUS
        .get_or_init(|| {
            let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../demo/personas.jsonl");
            Arc::new(PersonaCorpus::load_path(path).unwrap())
        })
        .clone()
}

fn engine(store: SessionStore) -> Engine {
    let policy = RetryPolicy {
        retries: 0,
        timeout: Duration::from_secs(5),
        backoff: Duration::ZERO,
    };
    Engine::new(
        corpus(),
        Gateway::single(Arc::new(SyntheticProvider), policy),
        store,
        Arc::new(SteppingClock::new(1_700_000_000_000, 1_000)),
    )
}

/// Apply `steps` random canvas actions; returns the final state and how many
/// actions were expected to log an event.
async fn walk(engine: &Engine, seed: u64, steps: usize) -> (SessionState, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sid = engine.create_session(NewSession::default()).await.unwrap().id;
    let mut logged = 0;
    for _ in 0..steps {
        let s = engine.session(&sid).await.unwrap();
        let live: Vec<_> = s.canvas.cards.iter().filter(|c| !c.discarded).collect();
        let before = s.event_log.len();
        let op = rng.random_range(0..10);
        let did = match op {
            0 => {
                let pid = format!("p{:04}", rng.random_range(1..=200));
                engine
                    .add_tile(
                        &sid,
                        NewTile {
                            persona_id: pid,
                            x: None,
                            y: None,
                        },
                    )
                    .await
                    .is_ok()
            }
            1 if !s.canvas.tiles.is_empty() => engine.infer(&s.canvas.tiles.choose(&mut rng).unwrap().id).await.is_ok(),
            2 if !live.is_empty() => engine.swap(&live.choose(&mut rng).unwrap().id).await.is_ok(),
            3 if !live.is_empty() => engine.discard(&live.choose(&mut rng).unwrap().id).await.is_ok(),
            4 if !live.is_empty() => engine.features(&live.choose(&mut rng).unwrap().id).await.is_ok(),
            5 if !s.canvas.matrices.is_empty() => {
                let m = s.canvas.matrices.choose(&mut rng).unwrap();
                let all: Vec<_> = Dimension::ALL
                    .iter()
                    .flat_map(|d| m.matrix.entries(*d).iter().map(move |e| (*d, e)))
                    .collect();
                let (dimension, e) = *all.choose(&mut rng).unwrap();
                let change = SelectionChange {
                    action: SelectionAction::Add,
                    matrix_id: m.id.clone(),
                    dimension,
                    key: e.key.clone(),
                    phrase: e.phrase.clone(),
                };
                let ok = engine.change_selection(&sid, change).await.is_ok();
                let draft = engine.session(&sid).await.unwrap().production.draft;
                let copies = draft
                    .selections
                    .iter()
                    .filter(|x| x.dimension == dimension && x.key == e.key && x.phrase == e.phrase)
                    .count();
                assert_eq!(copies, 1, "duplicate add must keep a single occurrence");
                ok
            }
            6 if !s.production.draft.selections.is_empty() => {
                let sel = s.production.draft.selections.choose(&mut rng).unwrap();
                let matrix_id = s
                    .canvas
                    .matrices
                    .iter()
                    .find(|m| m.matrix.contains(sel.dimension, &sel.key, &sel.phrase))
                    .map(|m| m.id.clone())
                    .unwrap();
                let change = SelectionChange {
                    action: SelectionAction::Remove,
                    matrix_id,
                    dimension: sel.dimension,
                    key: sel.key.clone(),
                    phrase: sel.phrase.clone(),
                };
                engine.change_selection(&sid, change).await.is_ok()
            }
            7 => {
                let change = DraftChange {
                    manual_text: Some(format!("hand-written prompt {}", rng.random::<u16>())),
                    ..DraftChange::default()
                };
                engine.update_draft(&sid, change).await.is_ok()
            }
            8 => engine
                .record_ui_event(
                    &sid,
                    UiEvent {
                        kind: EventKind::TabSwitch,
                        detail: None,
                    },
                )
                .await
                .is_ok(),
            9 => engine.generate(&sid, 2).await.is_ok(),
            _ => false,
        };
        let after = engine.session(&sid).await.unwrap();
        if did {
            logged += 1;
            assert_eq!(after.event_log.len(), before + 1, "op {op}");
        } else {
            assert_eq!(after.event_log.len(), before, "op {op}");
        }
    }
    (engine.session(&sid).await.unwrap(), logged)
}

fn runtime() -> tokio::runtime::Runtime {
    tokio::runtime::Builder::new_current_thread()
        .enable_all()
        .build()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn documents_round_trip_after_any_walk(seed in any::<u64>(), steps in 1usize..40) {
        let (state, logged) = runtime().block_on(walk(&engine(SessionStore::in_memory()), seed, steps));
        prop_assert_eq!(state.event_log.len(), logged);
        prop_assert!(state.integrity_problems().is_empty(), "{:?}", state.integrity_problems());
        let reloaded = SessionState::load(&state.save()).unwrap();
        prop_assert_eq!(&reloaded, &state);
        prop_assert_eq!(reloaded.save(), state.save());
    }

    #[test]
    fn walks_are_reproducible(seed in any::<u64>()) {
        let a = runtime().block_on(walk(&engine(SessionStore::in_memory()), seed, 25)).0;
        let b = runtime().block_on(walk(&engine(SessionStore::in_memory()), seed, 25)).0;
        prop_assert_eq!(a.save(), b.save());
    }
}

#[test]
fn persisted_sessions_reload_from_disk() {
    let dir = tempfile::tempdir().unwrap();
    let state = runtime()
        .block_on(walk(&engine(SessionStore::open(dir.path()).unwrap()), 99, 30))
        .0;
    let reopened = engine(SessionStore::open(dir.path()).unwrap());
    let loaded = runtime().block_on(reopened.session(&state.id)).unwrap();
    assert_eq!(loaded, state);
}

#[test]
fn duplicate_add_walk_logs_each_call() {
    let (state, logged) = runtime().block_on(walk(&engine(SessionStore::in_memory()), 2460703768202823488, 35));
    assert_eq!(state.event_log.len(), logged);
}
