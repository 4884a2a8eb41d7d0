use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

/// Setting this to a millisecond value starts a deterministic clock there.
pub const CLOCK_ENV: &str = "PERSONAGRAM_CLOCK_MS";

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Returns `start`, then `start + step`, and so on, one step per reading.
#[derive(Debug)]
pub struct SteppingClock {
    next: AtomicU64,
    step: u64,
}

impl SteppingClock {
    pub fn new(start: u64, step: u64) -> Self {
        SteppingClock {
            next: AtomicU64::new(start),
            step,
        }
    }
}

impl Clock for SteppingClock {
    fn now_ms(&self) -> u64 {
        self.next.fetch_add(self.step, Ordering::SeqCst)
    }
}

/// A one-second stepping clock when [`CLOCK_ENV`] is set, else the system clock.
pub fn clock_from_env() -> Arc<dyn Clock> {
    match std::env::var(CLOCK_ENV).ok().and_then(|v| v.trim().parse().ok()) {
        Some(start) => Arc::new(SteppingClock::new(start, 1_000)),
        None => Arc::new(SystemClock),
    }
}
