//! JSON report envelopes. Every report embeds the configuration echo, the
//! seed, and the library version so a run can be reproduced bit-exactly;
//! volatile fields (timestamp, wall time) live under `meta`.

use serde::Serialize;
use std::time::{SystemTime, UNIX_EPOCH};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Serialize)]
pub struct Meta {
    pub timestamp_unix_ms: u128,
    pub wall_time_ms: u128,
    /// Requested worker threads; results never depend on it.
    pub threads: Option<usize>,
}

impl Meta {
    pub fn new(wall_time_ms: u128, threads: Option<usize>) -> Self {
        let ts = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self { timestamp_unix_ms: ts, wall_time_ms, threads }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub schema_version: &'static str,
    pub command: &'static str,
    pub library_version: &'static str,
    pub seed: u64,
    pub config: C,
    pub result: R,
    pub meta: Meta,
}

pub fn render<C: Serialize, R: Serialize>(
    command: &'static str,
    seed: u64,
    config: C,
    result: R,
    wall_time_ms: u128,
    threads: Option<usize>,
) -> String {
    let report = Report {
        schema_version: SCHEMA_VERSION,
        command,
        library_version: env!("CARGO_PKG_VERSION"),
        seed,
        config,
        result,
        meta: Meta::new(wall_time_ms, threads),
    };
    let mut out = serde_json::to_string_pretty(&report).expect("report serialization");
    out.push('\n');
    out
}
