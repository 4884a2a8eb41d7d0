//! Python module `personagram`: the persona corpus, response contracts,
//! prompt scaffolding, usage metrics and a fixture-backed engine.
//!
//! Structured values cross the boundary as plain Python dicts and lists.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::de::DeserializeOwned;
use serde::Serialize;

use personagram_core::corpus::{FilterQuery, PersonaCorpus};
use personagram_core::engine::{
    DraftChange, Engine as CoreEngine, EngineError, NewSession, NewTile, SelectionChange, SessionStore, SteppingClock,
    UiEvent,
};
use personagram_core::gateway::mock::FixtureStore;
use personagram_core::gateway::{Gateway, ImageRef, ImageSource};
use personagram_core::pipeline::{self, Provenance};
use personagram_core::scaffold::{self, FeatureSelection};
use personagram_core::session::{self as session_mod, EventLogFile, SessionState};

create_exception!(
    personagram,
    PersonagramError,
    PyException,
    "Raised with (code, message) for every engine failure."
);

fn error(code: &str, message: impl std::fmt::Display) -> PyErr {
    PersonagramError::new_err((code.to_string(), message.to_string()))
}

fn engine_error(e: EngineError) -> PyErr {
    error(e.code(), e)
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| error("internal_error", e))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(py: Python<'_>, value: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = py.import("json")?.call_method1("dumps", (value,))?.extract()?;
    serde_json::from_str(&text).map_err(|e| error("validation_error", e))
}

/// A loaded persona corpus with faceted filtering.
#[pyclass(frozen, module = "personagram")]
struct Corpus {
    inner: Arc<PersonaCorpus>,
}

#[pymethods]
impl Corpus {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = PersonaCorpus::load_path(&path).map_err(|e| error("corpus_error", e))?;
        Ok(Corpus { inner: Arc::new(inner) })
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn ids(&self) -> Vec<String> {
        self.inner.ids().map(str::to_string).collect()
    }

    /// Ids matching every facet; `facets` maps a path such as
    /// `BasicInfo/Age` to accepted values.
    #[pyo3(signature = (facets=None))]
    fn filter(&self, facets: Option<Vec<(String, Vec<String>)>>) -> PyResult<Vec<String>> {
        let query = FilterQuery::from_pairs(facets.unwrap_or_default()).map_err(|e| error("validation_error", e))?;
        Ok(self.inner.filter(&query))
    }

    fn preview<'py>(&self, py: Python<'py>, id: &str) -> PyResult<Bound<'py, PyAny>> {
        let card = self.inner.preview(id).map_err(|e| error("not_found", e))?;
        to_py(py, &card)
    }

    fn facet_counts<'py>(&self, py: Python<'py>, path: &str) -> PyResult<Bound<'py, PyAny>> {
        let facet = path.parse().map_err(|e| error("validation_error", e))?;
        to_py(py, &self.inner.facet_counts(facet))
    }
}

/// Validate a product-inference response; returns the batch as a dict.
#[pyfunction]
fn parse_product_response<'py>(py: Python<'py>, text: &str, persona_id: &str) -> PyResult<Bound<'py, PyAny>> {
    let batch = pipeline::parse_product_response(text, persona_id).map_err(|e| error(e.code(), e))?;
    to_py(py, &batch)
}

/// Validate a feature-extraction response for one product image.
#[pyfunction]
#[pyo3(signature = (text, persona_id, product, image_url, rank=0))]
fn parse_feature_response<'py>(
    py: Python<'py>,
    text: &str,
    persona_id: &str,
    product: &str,
    image_url: &str,
    rank: u32,
) -> PyResult<Bound<'py, PyAny>> {
    let provenance = Provenance {
        persona_id: persona_id.to_string(),
        product_name: product.to_string(),
        image: ImageRef {
            url: image_url.to_string(),
            source: ImageSource::Search,
            query: product.to_string(),
            rank,
        },
    };
    let matrix = pipeline::parse_feature_response(text, provenance).map_err(|e| error(e.code(), e))?;
    to_py(py, &matrix)
}

/// The prompt for `subject` scaffolded by feature selections (dicts with
/// dimension, key, phrase, provenance, selected_at).
#[pyfunction]
fn compose(py: Python<'_>, subject: &str, selections: &Bound<'_, PyAny>) -> PyResult<String> {
    let selections: Vec<FeatureSelection> = from_py(py, selections)?;
    scaffold::compose(subject, &selections)
        .map(|c| c.text)
        .map_err(|e| error("validation_error", e))
}

/// Replay an event log (JSON text) into a session; returns (session, metrics).
#[pyfunction]
fn replay_events<'py>(py: Python<'py>, log_json: &str) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let file = EventLogFile::parse(log_json).map_err(|e| error("invalid_input", e))?;
    let (state, metrics) = session_mod::replay_events(&file).map_err(|e| error("validation_error", e))?;
    Ok((to_py(py, &state)?, to_py(py, &metrics)?))
}

/// Usage-table CSV for a list of metric dicts.
#[pyfunction]
fn metrics_csv(py: Python<'_>, metrics: &Bound<'_, PyAny>) -> PyResult<String> {
    let rows: Vec<session_mod::UsageMetrics> = from_py(py, metrics)?;
    Ok(session_mod::metrics_csv(&rows))
}

/// Check that a session document loads and survives a save/load cycle.
#[pyfunction]
fn round_trip_session(document: &str) -> PyResult<bool> {
    let state = SessionState::load(document).map_err(|e| error("invalid_input", e))?;
    let again = SessionState::load(&state.save()).map_err(|e| error("invalid_input", e))?;
    Ok(again == state)
}

/// Session engine over recorded provider fixtures with a stepping clock.
#[pyclass(frozen, module = "personagram")]
struct Engine {
    inner: CoreEngine,
    runtime: tokio::runtime::Runtime,
}

impl Engine {
    fn block<T>(
        &self,
        py: Python<'_>,
        work: impl std::future::Future<Output = Result<T, EngineError>> + Send,
    ) -> PyResult<T>
    where
        T: Send,
    {
        py.detach(|| self.runtime.block_on(work)).map_err(engine_error)
    }
}

#[pymethods]
impl Engine {
    #[new]
    #[pyo3(signature = (corpus, fixtures, clock_start_ms=1_700_000_000_000, sessions=None))]
    fn new(corpus: &Corpus, fixtures: PathBuf, clock_start_ms: u64, sessions: Option<PathBuf>) -> PyResult<Self> {
        let store = match sessions {
            Some(dir) => SessionStore::open(dir).map_err(engine_error)?,
            None => SessionStore::in_memory(),
        };
        let inner = CoreEngine::new(
            corpus.inner.clone(),
            Gateway::mock(FixtureStore::dir(fixtures)),
            store,
            Arc::new(SteppingClock::new(clock_start_ms, 1_000)),
        );
        let runtime = tokio::runtime::Builder::new_current_thread()
            .enable_time()
            .build()
            .map_err(|e| error("internal_error", e))?;
        Ok(Engine { inner, runtime })
    }

    #[pyo3(signature = (mode="personagram", subject=None, participant=None))]
    fn create_session<'py>(
        &self,
        py: Python<'py>,
        mode: &str,
        subject: Option<String>,
        participant: Option<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let mode =
            serde_json::from_value(serde_json::Value::String(mode.into())).map_err(|e| error("validation_error", e))?;
        let request = NewSession {
            mode,
            subject,
            participant,
        };
        let s = self.block(py, self.inner.create_session(request))?;
        to_py(py, &s)
    }

    fn session<'py>(&self, py: Python<'py>, session_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let s = self.block(py, self.inner.session(session_id))?;
        to_py(py, &s)
    }

    /// The session document as saved to disk.
    fn session_document(&self, py: Python<'_>, session_id: &str) -> PyResult<String> {
        Ok(self.block(py, self.inner.session(session_id))?.save())
    }

    #[pyo3(signature = (session_id, persona_id, x=None, y=None))]
    fn add_tile<'py>(
        &self,
        py: Python<'py>,
        session_id: &str,
        persona_id: &str,
        x: Option<f64>,
        y: Option<f64>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let request = NewTile {
            persona_id: persona_id.into(),
            x,
            y,
        };
        let tile = self.block(py, self.inner.add_tile(session_id, request))?;
        to_py(py, &tile)
    }

    fn infer<'py>(&self, py: Python<'py>, tile_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let result = self.block(py, self.inner.infer(tile_id))?;
        to_py(py, &result)
    }

    fn swap<'py>(&self, py: Python<'py>, card_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let card = self.block(py, self.inner.swap(card_id))?;
        to_py(py, &card)
    }

    fn discard<'py>(&self, py: Python<'py>, card_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let card = self.block(py, self.inner.discard(card_id))?;
        to_py(py, &card)
    }

    fn features<'py>(&self, py: Python<'py>, card_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let matrix = self.block(py, self.inner.features(card_id))?;
        to_py(py, &matrix)
    }

    /// Add or remove a selection; `change` has matrix_id, dimension, key,
    /// phrase and optionally action ("add" or "remove").
    fn change_selection<'py>(
        &self,
        py: Python<'py>,
        session_id: &str,
        change: &Bound<'py, PyDict>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let change: SelectionChange = from_py(py, change.as_any())?;
        let result = self.block(py, self.inner.change_selection(session_id, change))?;
        to_py(py, &result)
    }

    fn draft<'py>(&self, py: Python<'py>, session_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let draft = self.block(py, self.inner.draft(session_id))?;
        to_py(py, &draft)
    }

    #[pyo3(signature = (session_id, subject=None, manual_text=None, resync=false))]
    fn update_draft<'py>(
        &self,
        py: Python<'py>,
        session_id: &str,
        subject: Option<String>,
        manual_text: Option<String>,
        resync: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let change = DraftChange {
            subject,
            manual_text,
            resync,
        };
        let draft = self.block(py, self.inner.update_draft(session_id, change))?;
        to_py(py, &draft)
    }

    #[pyo3(signature = (session_id, n=4))]
    fn generate<'py>(&self, py: Python<'py>, session_id: &str, n: usize) -> PyResult<Bound<'py, PyAny>> {
        let entry = self.block(py, self.inner.generate(session_id, n))?;
        to_py(py, &entry)
    }

    #[pyo3(signature = (session_id, kind, detail=None))]
    fn record_event<'py>(
        &self,
        py: Python<'py>,
        session_id: &str,
        kind: &str,
        detail: Option<&Bound<'py, PyAny>>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let kind = kind.parse().map_err(|e| error("validation_error", e))?;
        let detail = detail.map(|d| from_py(py, d)).transpose()?;
        let record = self.block(py, self.inner.record_ui_event(session_id, UiEvent { kind, detail }))?;
        to_py(py, &record)
    }

    fn create_thread<'py>(
        &self,
        py: Python<'py>,
        session_id: &str,
        persona_ids: Vec<String>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let thread = self.block(py, self.inner.create_thread(session_id, persona_ids))?;
        to_py(py, &thread)
    }

    fn post_message<'py>(&self, py: Python<'py>, thread_id: &str, text: &str) -> PyResult<Bound<'py, PyAny>> {
        let message = self.block(py, self.inner.post_message(thread_id, text))?;
        to_py(py, &message)
    }

    fn metrics<'py>(&self, py: Python<'py>, session_id: &str) -> PyResult<Bound<'py, PyAny>> {
        let metrics = self.block(py, self.inner.metrics(session_id))?;
        to_py(py, &metrics)
    }
}

#[pymodule]
fn personagram(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PersonagramError", m.py().get_type::<PersonagramError>())?;
    m.add_class::<Corpus>()?;
    m.add_class::<Engine>()?;
    m.add_function(wrap_pyfunction!(parse_product_response, m)?)?;
    m.add_function(wrap_pyfunction!(parse_feature_response, m)?)?;
    m.add_function(wrap_pyfunction!(compose, m)?)?;
    m.add_function(wrap_pyfunction!(replay_events, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_csv, m)?)?;
    m.add_function(wrap_pyfunction!(round_trip_session, m)?)?;
    Ok(())
}
