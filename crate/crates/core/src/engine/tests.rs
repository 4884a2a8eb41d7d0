use std::sync::Arc;
use std::time::Duration;

use async_trait::async_trait;

use super::*;
use crate::gateway::mock::{FixtureStore, RecordingProvider};
use crate::gateway::synthetic::SyntheticProvider;
use crate::gateway::{ChatRequest, Provider, ProviderError, RetryPolicy};

const CORPUS: &str = r#"{"id":"p1","age":34,"sex":"Female","race":"Asian","occupation_category":"Teacher","employment_status":"Employed","income":52000,"big_five_scores":{"openness":0.8,"conscientiousness":0.6,"extraversion":0.4,"agreeableness":0.7,"neuroticism":0.3},"personal_time":"Gardening and reading","lifestyle":"Busy weekday mornings"}
{"id":"p2","age":61,"sex":"Male","race":"White","occupation_category":"Retired","employment_status":"Retired","big_five_scores":{"openness":0.3,"conscientiousness":0.9,"extraversion":0.2,"agreeableness":0.5,"neuroticism":0.5},"personal_time":"Fishing"}
{"id":"p3","age":22,"sex":"Female","race":"Black","occupation_category":"Student","employment_status":"Student","big_five_scores":{"openness":0.9,"conscientiousness":0.4,"extraversion":0.9,"agreeableness":0.6,"neuroticism":0.6},"personal_time":"Dancing with friends"}"#;

fn corpus() -> Arc<PersonaCorpus> {
    Arc::new(PersonaCorpus::load(CORPUS.as_bytes()).unwrap())
}

fn quick() -> RetryPolicy {
    RetryPolicy {
        retries: 0,
        timeout: Duration::from_secs(5),
        backoff: Duration::ZERO,
    }
}

fn engine_with(gateway: Gateway) -> Engine {
    Engine::new(
        corpus(),
        gateway,
        SessionStore::in_memory(),
        Arc::new(SteppingClock::new(1_000, 1_000)),
    )
}

fn synthetic() -> Engine {
    engine_with(Gateway::single(Arc::new(SyntheticProvider), quick()))
}

struct Failing;

#[async_trait]
impl Provider for Failing {
    fn name(&self) -> &str {
        "failing"
    }
    async fn complete(&self, _: &ChatRequest) -> Result<String, ProviderError> {
        Err(ProviderError::status(503, "unavailable"))
    }
    async fn generate_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(ProviderError::status(503, "unavailable"))
    }
    async fn search_images(&self, _: &str, _: usize) -> Result<Vec<ImageRef>, ProviderError> {
        Err(ProviderError::status(503, "unavailable"))
    }
}

async fn scripted(engine: &Engine) -> String {
    let s = engine.create_session(NewSession::default()).await.unwrap();
    let tile = engine
        .add_tile(
            &s.id,
            NewTile {
                persona_id: "p1".into(),
                x: None,
                y: None,
            },
        )
        .await
        .unwrap();
    let first = engine.infer(&tile.id).await.unwrap();
    assert!(first.inferred);
    assert_eq!(first.cards.len(), 5);
    let second = engine.infer(&tile.id).await.unwrap();
    assert!(!second.inferred);
    assert_eq!(second.cards.len(), 4);
    assert_eq!(second.batch_id, first.batch_id);
    let third = engine.infer(&tile.id).await.unwrap();
    assert!(third.inferred);
    assert_eq!(third.cards.len(), 4);

    let card = &first.cards[0];
    let before = card.suggestion.image.clone().unwrap();
    let swapped = engine.swap(&card.id).await.unwrap();
    let after = swapped.suggestion.image.clone().unwrap();
    assert_ne!(before.url, after.url);
    assert_eq!(after.rank, 1);

    let matrix = engine.features(&card.id).await.unwrap();
    assert_eq!(matrix.matrix.len(), 27);
    assert_eq!(matrix.matrix.provenance.image.url, after.url);
    for dim in Dimension::ALL {
        let entry = matrix.matrix.entries(dim)[0].clone();
        let result = engine
            .change_selection(
                &s.id,
                SelectionChange {
                    action: SelectionAction::Add,
                    matrix_id: matrix.id.clone(),
                    dimension: dim,
                    key: entry.key.clone(),
                    phrase: entry.phrase.clone(),
                },
            )
            .await
            .unwrap();
        assert!(result.changed);
        assert!(result.draft.auto_text.contains(&entry.phrase));
    }
    engine
        .update_draft(
            &s.id,
            DraftChange {
                subject: Some("a garden stool".into()),
                ..Default::default()
            },
        )
        .await
        .unwrap();
    let entry = engine.generate(&s.id, 4).await.unwrap();
    assert_eq!(entry.images.len(), 4);
    assert!(entry.prompt.starts_with("Design a garden stool."));
    assert_eq!(entry.persona_ids, vec!["p1".to_string()]);
    s.id
}

#[tokio::test]
async fn full_flow_logs_every_interaction() {
    let engine = synthetic();
    let id = scripted(&engine).await;
    let m = engine.metrics(&id).await.unwrap();
    assert_eq!(m.count(EventKind::Bulb), 3);
    assert_eq!(m.count(EventKind::Puzzle), 1);
    assert_eq!(m.count(EventKind::Plus), 3);
    assert_eq!(m.count(EventKind::Swap), 1);
    assert_eq!(m.count(EventKind::Generate), 1);
    assert_eq!(m.count(EventKind::SelectPersona), 1);
    assert_eq!(m.total_interactions, 7);
    let s = engine.session(&id).await.unwrap();
    assert!(s.integrity_problems().is_empty(), "{:?}", s.integrity_problems());
    assert_eq!(s.canvas.cards.len(), 13);
}

#[tokio::test]
async fn recorded_session_replays_identically() {
    let store = FixtureStore::in_memory();
    let recorder = Arc::new(RecordingProvider::new(Arc::new(SyntheticProvider), store.clone()));
    let live = engine_with(Gateway::single(recorder, quick()));
    let live_id = scripted(&live).await;
    let replay = engine_with(Gateway::mock(store));
    let replay_id = scripted(&replay).await;
    let a = live.session(&live_id).await.unwrap();
    let b = replay.session(&replay_id).await.unwrap();
    assert_eq!(a.without_timestamps(), b.without_timestamps());
    assert_eq!(a.save(), b.save());
}

#[tokio::test]
async fn baseline_sessions_refuse_canvas_actions() {
    let engine = synthetic();
    let s = engine
        .create_session(NewSession {
            mode: Mode::Baseline,
            ..Default::default()
        })
        .await
        .unwrap();
    let tile = engine
        .add_tile(
            &s.id,
            NewTile {
                persona_id: "p2".into(),
                x: None,
                y: None,
            },
        )
        .await
        .unwrap();
    let err = engine.infer(&tile.id).await.unwrap_err();
    assert_eq!(err.class(), ErrorClass::NotAllowed);
    assert_eq!(err.code(), "mode_not_allowed");

    let p = engine.create_session(NewSession::default()).await.unwrap();
    let err = engine.create_thread(&p.id, vec!["p1".into()]).await.unwrap_err();
    assert_eq!(err.class(), ErrorClass::NotAllowed);
}

#[tokio::test]
async fn chat_carries_all_personas_and_history() {
    let engine = synthetic();
    let s = engine
        .create_session(NewSession {
            mode: Mode::Baseline,
            ..Default::default()
        })
        .await
        .unwrap();
    let thread = engine
        .create_thread(&s.id, vec!["p1".into(), "p2".into(), "p3".into(), "p1".into()])
        .await
        .unwrap();
    assert_eq!(thread.persona_ids, ["p1", "p2", "p3"]);
    let reply = engine
        .post_message(&thread.id, "What would you cook with?")
        .await
        .unwrap();
    assert!(reply.text.contains("p1, p2, p3"));
    engine.post_message(&thread.id, "And on weekends?").await.unwrap();
    let state = engine.session(&s.id).await.unwrap();
    assert_eq!(state.thread(&thread.id).unwrap().messages.len(), 4);
    let m = engine.metrics(&s.id).await.unwrap();
    assert_eq!(m.count(EventKind::ChatQuery), 2);
    assert_eq!(m.total_interactions, 2);
}

#[tokio::test]
async fn failed_chat_leaves_thread_untouched() {
    let engine = engine_with(Gateway::single(Arc::new(Failing), quick()));
    let s = engine
        .create_session(NewSession {
            mode: Mode::Baseline,
            ..Default::default()
        })
        .await
        .unwrap();
    let thread = engine.create_thread(&s.id, vec!["p1".into()]).await.unwrap();
    let before = engine.session(&s.id).await.unwrap();
    let err = engine.post_message(&thread.id, "Hello?").await.unwrap_err();
    assert_eq!(err.class(), ErrorClass::Upstream);
    assert_eq!(err.code(), "provider_error");
    assert_eq!(engine.session(&s.id).await.unwrap(), before);
}

#[tokio::test]
async fn failed_inference_changes_nothing() {
    let engine = engine_with(Gateway::single(Arc::new(Failing), quick()));
    let s = engine.create_session(NewSession::default()).await.unwrap();
    let tile = engine
        .add_tile(
            &s.id,
            NewTile {
                persona_id: "p1".into(),
                x: None,
                y: None,
            },
        )
        .await
        .unwrap();
    let before = engine.session(&s.id).await.unwrap();
    assert!(engine.infer(&tile.id).await.is_err());
    assert_eq!(engine.session(&s.id).await.unwrap(), before);
}

#[tokio::test]
async fn ui_events_and_validation() {
    let engine = synthetic();
    let s = engine.create_session(NewSession::default()).await.unwrap();
    engine
        .record_ui_event(
            &s.id,
            UiEvent {
                kind: EventKind::TabSwitch,
                detail: None,
            },
        )
        .await
        .unwrap();
    let err = engine
        .record_ui_event(
            &s.id,
            UiEvent {
                kind: EventKind::Bulb,
                detail: None,
            },
        )
        .await
        .unwrap_err();
    assert_eq!(err.class(), ErrorClass::Validation);
    let err = engine
        .update_draft(
            &s.id,
            DraftChange {
                manual_text: Some("x".into()),
                resync: true,
                ..Default::default()
            },
        )
        .await
        .unwrap_err();
    assert_eq!(err.class(), ErrorClass::Validation);
    assert_eq!(engine.infer("s99-t1").await.unwrap_err().class(), ErrorClass::NotFound);
    assert_eq!(engine.metrics(&s.id).await.unwrap().count(EventKind::TabSwitch), 1);
}

#[tokio::test]
async fn store_persists_and_reloads() {
    let dir = tempfile::tempdir().unwrap();
    let store = SessionStore::open(dir.path()).unwrap();
    let engine = Engine::new(
        corpus(),
        Gateway::single(Arc::new(SyntheticProvider), quick()),
        store,
        Arc::new(SteppingClock::new(1_000, 1_000)),
    );
    let id = scripted(&engine).await;
    let saved = engine.session(&id).await.unwrap();

    let reopened = SessionStore::open(dir.path()).unwrap();
    assert_eq!(reopened.ids(), vec![id.clone()]);
    let loaded = reopened.get(&id).unwrap().lock().await.clone();
    assert_eq!(loaded, saved);
    let next = reopened
        .create(Mode::Personagram, DEFAULT_SUBJECT, None, 0)
        .await
        .unwrap();
    assert_eq!(next.id, "s2");
}
