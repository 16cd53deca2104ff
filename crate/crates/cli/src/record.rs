//! The JSON artifact written for every command.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::time::{SystemTime, UNIX_EPOCH};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub command: String,
    /// SHA-256 of the canonical JSON of the command and its inputs.
    pub input_digest: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: serde_json::Value,
}

impl ResultRecord {
    pub fn new(command: &str, input: &serde_json::Value, outputs: serde_json::Value) -> Self {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self {
            command: command.to_string(),
            input_digest: input_digest(command, input),
            version: TOOL_VERSION.to_string(),
            timestamp,
            outputs,
        }
    }
}

/// Objects are keyed by `BTreeMap`, so serializing a `Value` is already canonical.
pub fn input_digest(command: &str, input: &serde_json::Value) -> String {
    let canonical = serde_json::json!({ "command": command, "input": input, "version": TOOL_VERSION });
    let bytes = serde_json::to_vec(&canonical).expect("JSON values always serialize");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
