//! Support code for the `qtree` binary: provenance headers, comma-separated
//! tables and the SVG plot.

pub mod plot;
pub mod table;

use serde_json::{json, Value};
use std::time::{SystemTime, UNIX_EPOCH};

/// What produced an output file: command, full configuration, toolkit
/// version and optionally a timestamp.
#[derive(Debug, Clone)]
pub struct Provenance {
    pub command: String,
    pub config: Value,
    pub timestamp: Option<u64>,
}

impl Provenance {
    pub fn new(command: &str, config: Value, with_timestamp: bool) -> Self {
        let timestamp = with_timestamp.then(|| SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()));
        Provenance { command: command.to_string(), config, timestamp }
    }

    pub fn to_json(&self) -> Value {
        let mut v = json!({ "tool": "qtree", "version": qtree::VERSION, "command": self.command, "config": self.config });
        if let Some(ts) = self.timestamp {
            v["timestamp"] = json!(ts);
        }
        v
    }

    /// `#` comment lines for delimited text.
    pub fn comment_header(&self) -> String {
        let mut s = format!("# qtree {} {}\n# config {}\n", qtree::VERSION, self.command, self.config);
        if let Some(ts) = self.timestamp {
            s.push_str(&format!("# timestamp {ts}\n"));
        }
        s
    }
}
