//! Run reports.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::certificate::{CertificateFile, Margin};

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the config file bytes.
    pub config_digest: String,
    pub status: String,
    /// One human-readable line.
    pub summary: String,
    pub exit_code: u8,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateFile>,
    pub margins: Vec<Margin>,
    /// Command-specific values.
    pub details: Map<String, Value>,
    pub elapsed_seconds: f64,
    /// Files written to the output directory, in write order.
    pub files: Vec<String>,
}

impl RunReport {
    pub fn new(command: &str, config_digest: &str) -> RunReport {
        RunReport {
            command: command.to_string(),
            config_digest: config_digest.to_string(),
            status: String::new(),
            summary: String::new(),
            exit_code: 1,
            certificate: None,
            margins: Vec::new(),
            details: Map::new(),
            elapsed_seconds: 0.0,
            files: Vec::new(),
        }
    }

    pub fn detail(&mut self, key: &str, value: impl Serialize) {
        self.details.insert(key.to_string(), serde_json::to_value(value).expect("serializable detail"));
    }

    pub fn min_margin(&self) -> Option<f64> {
        self.margins.iter().map(|m| m.value).reduce(f64::min)
    }
}
