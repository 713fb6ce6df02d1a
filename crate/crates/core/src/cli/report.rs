use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Failure, Format, RunConfig, DEFAULT_OUTPUT_DIR};
use crate::integrator::IntegrationConfig;

/// One file written by a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub format: Format,
    /// CSV columns, or the top-level keys of a JSON object.
    pub schema: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    pub integration: IntegrationConfig,
    pub determinism: String,
    pub exit_code: i32,
    pub files: Vec<Artifact>,
}

pub const DETERMINISM_NOTE: &str = "no random numbers are drawn; identical config and tolerances give identical CSV bytes, \
parallel scans are merged in grid order";

/// Collects artifacts for one run and writes the manifest last.
pub(super) struct Writer<'a> {
    dir: PathBuf,
    cfg: &'a RunConfig,
    files: Vec<Artifact>,
}

impl<'a> Writer<'a> {
    pub fn new(cfg: &'a RunConfig) -> Result<Self, Failure> {
        let dir = cfg
            .output_dir
            .clone()
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR));
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            cfg,
            files: Vec::new(),
        })
    }

    fn put(&mut self, name: &str, format: Format, schema: Vec<String>, body: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure {
            code: super::EXIT_NUMERIC,
            message: format!("cannot write {}: {e}", path.display()),
        })?;
        self.files.retain(|a| a.name != name);
        self.files.push(Artifact {
            name: name.to_string(),
            format,
            schema,
        });
        Ok(())
    }

    /// Writes `body` (header line first) when CSV output is enabled.
    pub fn csv(&mut self, name: &str, body: String) -> Result<(), Failure> {
        if !self.cfg.wants(Format::Csv) {
            return Ok(());
        }
        let schema = body.lines().next().unwrap_or("").split(',').map(str::to_string).collect();
        self.put(name, Format::Csv, schema, &body)
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let schema = value
            .as_object()
            .map(|o| o.keys().cloned().collect())
            .unwrap_or_default();
        let mut body = serde_json::to_string_pretty(value).map_err(|e| Failure {
            code: super::EXIT_NUMERIC,
            message: e.to_string(),
        })?;
        body.push('\n');
        self.put(name, Format::Json, schema, &body)
    }

    pub fn finish(mut self, exit_code: i32) -> Result<(), Failure> {
        let manifest = Manifest {
            tool: "blowup".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: self.cfg.clone(),
            integration: self.cfg.integration(),
            determinism: DETERMINISM_NOTE.into(),
            exit_code,
            files: std::mem::take(&mut self.files),
        };
        let mut body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        body.push('\n');
        let path = self.dir.join("MANIFEST.json");
        std::fs::write(&path, body).map_err(|e| Failure {
            code: super::EXIT_NUMERIC,
            message: format!("cannot write {}: {e}", path.display()),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }
}

/// `param, class, detail` rows; `detail` is empty when absent.
pub(super) fn scan_csv<C: Serialize>(rows: impl IntoIterator<Item = (f64, C, Option<f64>)>) -> String {
    let mut out = String::from("param,class,detail\n");
    for (param, class, detail) in rows {
        let class = serde_json::to_value(&class)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        let detail = detail.map(|d| d.to_string()).unwrap_or_default();
        out.push_str(&format!("{param},{class},{detail}\n"));
    }
    out
}
