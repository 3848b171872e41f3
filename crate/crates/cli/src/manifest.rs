use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Record of one invocation. Two identical runs produce manifests that
/// differ only in `timings_ms`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_hash: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub timings_ms: BTreeMap<String, f64>,
    pub counts: BTreeMap<String, usize>,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            command: command.to_string(),
            args,
            config_hash: String::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            timings_ms: BTreeMap::new(),
            counts: BTreeMap::new(),
            exit_code: 0,
            error: None,
        }
    }

    pub fn input(&mut self, p: impl AsRef<Path>) {
        let p = p.as_ref().to_path_buf();
        if !self.inputs.contains(&p) {
            self.inputs.push(p);
        }
    }

    pub fn output(&mut self, p: impl AsRef<Path>) {
        let p = p.as_ref().to_path_buf();
        if !self.outputs.contains(&p) {
            self.outputs.push(p);
        }
    }

    pub fn count(&mut self, name: &str, n: usize) {
        *self.counts.entry(name.to_string()).or_default() += n;
    }

    /// Runs `f` and records its wall time under `name`.
    pub fn timed<R>(&mut self, name: &str, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let out = f();
        self.timings_ms.insert(name.to_string(), t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn file_name(&self) -> String {
        format!("manifest-{}.json", self.command)
    }
}
