//! The append-only interaction log and the usage metrics computed from it.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::Mode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Bulb,
    Plus,
    Puzzle,
    Swap,
    Discard,
    TabSwitch,
    Generate,
    ChatQuery,
    ManualEdit,
    Resync,
    FilterChange,
    SelectPersona,
    /// A feature removed from the scaffold.
    Unselect,
}

impl EventKind {
    pub const ALL: [EventKind; 13] = [
        EventKind::Bulb,
        EventKind::Plus,
        EventKind::Puzzle,
        EventKind::Swap,
        EventKind::Discard,
        EventKind::TabSwitch,
        EventKind::Generate,
        EventKind::ChatQuery,
        EventKind::ManualEdit,
        EventKind::Resync,
        EventKind::FilterChange,
        EventKind::SelectPersona,
        EventKind::Unselect,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Bulb => "bulb",
            EventKind::Plus => "plus",
            EventKind::Puzzle => "puzzle",
            EventKind::Swap => "swap",
            EventKind::Discard => "discard",
            EventKind::TabSwitch => "tab_switch",
            EventKind::Generate => "generate",
            EventKind::ChatQuery => "chat_query",
            EventKind::ManualEdit => "manual_edit",
            EventKind::Resync => "resync",
            EventKind::FilterChange => "filter_change",
            EventKind::SelectPersona => "select_persona",
            EventKind::Unselect => "unselect",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EventKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown event kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub kind: EventKind,
    pub timestamp_ms: u64,
    /// Id of the tile, card, matrix, gallery entry or thread the event acted on.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

impl EventRecord {
    pub fn new(kind: EventKind, timestamp_ms: u64) -> Self {
        EventRecord {
            kind,
            timestamp_ms,
            target: None,
            detail: None,
        }
    }

    pub fn with_target(mut self, target: impl Into<String>) -> Self {
        self.target = Some(target.into());
        self
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }
}

/// How strictly [`super::SessionState::record_event`] checks an incoming record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventPolicy {
    /// Timestamps and payload references.
    Strict,
    /// Timestamps only, for replaying logs detached from session state.
    TimestampsOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EventError {
    #[error("timestamp {got} precedes the last logged timestamp {last}")]
    TimestampRegression { last: u64, got: u64 },
    #[error("{kind} event needs a target reference")]
    MissingTarget { kind: EventKind },
    #[error("{kind} event references unknown {expected} `{target}`")]
    UnknownTarget {
        kind: EventKind,
        expected: &'static str,
        target: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("event log is empty")]
pub struct EmptyLog;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UsageMetrics {
    pub session_id: String,
    pub participant: String,
    pub mode: Mode,
    pub counts: BTreeMap<EventKind, u64>,
    /// bulb + plus + puzzle in personagram mode, chat queries in baseline mode.
    pub total_interactions: u64,
    pub duration_min: f64,
    /// Tab switches per ten minutes of logged time; zero for a zero-length log.
    pub tab_switch_rate: f64,
    pub events: usize,
}

impl UsageMetrics {
    pub fn count(&self, kind: EventKind) -> u64 {
        self.counts.get(&kind).copied().unwrap_or(0)
    }
}

/// Metrics from a log alone. Duration runs from the first to the last event.
pub fn metrics_from_log(
    session_id: &str,
    participant: &str,
    mode: Mode,
    log: &[EventRecord],
) -> Result<UsageMetrics, EmptyLog> {
    let (first, last) = match (log.first(), log.last()) {
        (Some(f), Some(l)) => (f.timestamp_ms, l.timestamp_ms),
        _ => return Err(EmptyLog),
    };
    let mut counts: BTreeMap<EventKind, u64> = EventKind::ALL.iter().map(|k| (*k, 0)).collect();
    for record in log {
        *counts.entry(record.kind).or_default() += 1;
    }
    let get = |k: EventKind| counts[&k];
    let total_interactions = match mode {
        Mode::Personagram => get(EventKind::Bulb) + get(EventKind::Plus) + get(EventKind::Puzzle),
        Mode::Baseline => get(EventKind::ChatQuery),
    };
    let duration_min = last.saturating_sub(first) as f64 / 60_000.0;
    let tab_switch_rate = if duration_min > 0.0 {
        get(EventKind::TabSwitch) as f64 / duration_min * 10.0
    } else {
        0.0
    };
    Ok(UsageMetrics {
        session_id: session_id.to_string(),
        participant: participant.to_string(),
        mode,
        total_interactions,
        duration_min,
        tab_switch_rate,
        events: log.len(),
        counts,
    })
}

pub const CSV_HEADINGS: [&str; 11] = [
    "PID",
    "Condition",
    "Generation",
    "Bulb",
    "Plus",
    "Puzzle",
    "Total",
    "Queries",
    "Switch",
    "Duration",
    "SwitchRate",
];

fn csv_row(m: &UsageMetrics) -> [String; 11] {
    [
        m.participant.clone(),
        m.mode.label().to_string(),
        m.count(EventKind::Generate).to_string(),
        m.count(EventKind::Bulb).to_string(),
        m.count(EventKind::Plus).to_string(),
        m.count(EventKind::Puzzle).to_string(),
        m.total_interactions.to_string(),
        m.count(EventKind::ChatQuery).to_string(),
        m.count(EventKind::TabSwitch).to_string(),
        format!("{:.1}", m.duration_min),
        format!("{:.2}", m.tab_switch_rate),
    ]
}

/// One row per session under the usage-table headings.
pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = &'a UsageMetrics>) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_HEADINGS).expect("in-memory write");
    for m in rows {
        writer.write_record(csv_row(m)).expect("in-memory write");
    }
    String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in EventKind::ALL {
            assert_eq!(k.as_str().parse::<EventKind>().unwrap(), k);
            assert_eq!(serde_json::to_value(k).unwrap(), Value::String(k.as_str().into()));
        }
        assert!("wiggle".parse::<EventKind>().is_err());
    }

    #[test]
    fn counts_and_rate() {
        let log: Vec<EventRecord> = [
            EventKind::Bulb,
            EventKind::TabSwitch,
            EventKind::Plus,
            EventKind::TabSwitch,
        ]
        .iter()
        .enumerate()
        .map(|(i, k)| EventRecord::new(*k, i as u64 * 100_000))
        .collect();
        let m = metrics_from_log("s1", "P0", Mode::Personagram, &log).unwrap();
        assert_eq!(m.count(EventKind::TabSwitch), 2);
        assert_eq!(m.total_interactions, 2);
        assert_eq!(m.duration_min, 5.0);
        assert_eq!(m.tab_switch_rate, 4.0);
        assert_eq!(m.counts.values().sum::<u64>() as usize, log.len());
        assert_eq!(metrics_from_log("s", "P", Mode::Baseline, &[]), Err(EmptyLog));
        let one = metrics_from_log("s", "P", Mode::Baseline, &log[..1]).unwrap();
        assert_eq!(one.tab_switch_rate, 0.0);
    }

    #[test]
    fn csv_layout() {
        let log = vec![
            EventRecord::new(EventKind::ChatQuery, 0),
            EventRecord::new(EventKind::ChatQuery, 60_000),
        ];
        let csv = metrics_csv([&metrics_from_log("s2", "P2", Mode::Baseline, &log).unwrap()]);
        assert_eq!(
            csv,
            "PID,Condition,Generation,Bulb,Plus,Puzzle,Total,Queries,Switch,Duration,SwitchRate\nP2,Baseline,0,0,0,0,2,2,0,1.0,0.00\n"
        );
    }
}
