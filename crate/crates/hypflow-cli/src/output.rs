//! CSV/JSON writers. Every file carries the tool version and canonical config.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::RunConfig;
use crate::CliError;

pub struct Sink {
    dir: Option<PathBuf>,
    config: String,
}

impl Sink {
    pub fn new(cfg: &RunConfig) -> Result<Self, CliError> {
        if let Some(d) = &cfg.out {
            std::fs::create_dir_all(d).map_err(|e| CliError::Config(format!("cannot create {}: {e}", d.display())))?;
        }
        Ok(Sink { dir: cfg.out.clone(), config: cfg.canonical() })
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn header(&self) -> String {
        format!("# hypflow {}\n# config: {}\n", hypflow_core::VERSION, self.config)
    }

    pub fn csv_text(&self, header: &str, rows: &[String]) -> String {
        let mut s = self.header();
        s.push_str(header);
        s.push('\n');
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    pub fn json_text<T: Serialize>(&self, report: &T) -> Result<String, CliError> {
        let config: serde_json::Value = serde_json::from_str(&self.config).expect("canonical config is JSON");
        let doc = serde_json::json!({
            "tool": "hypflow",
            "version": hypflow_core::VERSION,
            "config": config,
            "report": report,
        });
        let mut s = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numerical(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Write to `<out>/<name>` when an output directory is set, else to stdout
    /// if `stdout_fallback`.
    pub fn emit(&self, name: &str, text: &str, stdout_fallback: bool) -> Result<(), CliError> {
        match &self.dir {
            Some(d) => {
                let p = d.join(name);
                std::fs::write(&p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
            }
            None if stdout_fallback => crate::commands::write_stdout(text),
            None => Ok(()),
        }
    }

    pub fn emit_bytes(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let p = d.join(name);
            std::fs::write(&p, bytes).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }
}

/// Shortest round-tripping representation, stable across runs.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
