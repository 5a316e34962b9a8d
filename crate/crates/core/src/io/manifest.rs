//! Run manifest: a TOML document holding the code version, the command, the
//! wall time, a short outcome summary, and the effective configuration under
//! `[config]`.

use std::path::Path;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use toml::{Table, Value};

use super::config::{from_table, ConfigError, RunConfig};

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone)]
pub struct Manifest {
    pub command: String,
    pub wall_time: Duration,
    pub outcome: Vec<(String, String)>,
    pub config: RunConfig,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        let mut run = Table::new();
        run.insert("code_version".into(), Value::String(CODE_VERSION.into()));
        run.insert("command".into(), Value::String(self.command.clone()));
        run.insert(
            "wall_time_seconds".into(),
            Value::Float(self.wall_time.as_secs_f64()),
        );
        let finished = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        run.insert(
            "finished_unix_seconds".into(),
            Value::Integer(finished as i64),
        );
        let mut outcome = Table::new();
        for (k, v) in &self.outcome {
            outcome.insert(k.clone(), Value::String(v.clone()));
        }
        let mut root = Table::new();
        root.insert("run".into(), Value::Table(run));
        root.insert("outcome".into(), Value::Table(outcome));
        root.insert("config".into(), Value::Table(self.config.to_table()));
        root.to_string()
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_toml())
    }
}

/// The configuration stored in a manifest.
pub fn manifest_config(text: &str) -> Result<RunConfig, ConfigError> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    match root.get("config") {
        Some(Value::Table(t)) => from_table(t),
        _ => Err(ConfigError::Invalid(vec![
            "manifest has no [config] table".into()
        ])),
    }
}
