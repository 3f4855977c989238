// SPDX-License-Identifier: Apache-2.0

use std::time::Instant;

/// Source of timestamps and latencies for logged records.
///
/// `Logical` stamps every record with the Unix epoch and zero latency so
/// that runs against scripted endpoints produce byte-identical logs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Clock {
    #[default]
    System,
    Logical,
}

impl Clock {
    pub fn timestamp(&self) -> String {
        match self {
            Clock::System => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true),
            Clock::Logical => "1970-01-01T00:00:00.000Z".to_string(),
        }
    }

    pub fn start(&self) -> Stopwatch {
        Stopwatch {
            clock: *self,
            at: Instant::now(),
        }
    }
}

pub struct Stopwatch {
    clock: Clock,
    at: Instant,
}

impl Stopwatch {
    pub fn elapsed_ms(&self) -> u64 {
        match self.clock {
            Clock::System => self.at.elapsed().as_millis() as u64,
            Clock::Logical => 0,
        }
    }
}
