use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Significant digits kept in serialized floats.
pub const DIGITS: usize = 12;

pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", DIGITS - 1, x).parse().unwrap_or(x)
}

/// Same value with every float rounded to [`DIGITS`] significant digits.
pub fn round_value(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_sig(n.as_f64().unwrap_or(0.0));
            serde_json::Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(a) => Value::Array(a.into_iter().map(round_value).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_value(v))).collect()),
        other => other,
    }
}

pub fn fmt(x: f64) -> String {
    format!("{:.*e}", DIGITS - 1, x)
}

#[derive(Serialize)]
struct Artifact {
    path: String,
    sha256: String,
    bytes: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    config_sha256: String,
    artifacts: Vec<Artifact>,
}

/// Run directory that records every file it writes.
pub struct RunDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl RunDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("output: cannot create {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        let path = self.root.join(name);
        std::fs::write(&path, contents).with_context(|| format!("output: cannot write {}", path.display()))?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(contents.as_bytes())),
            bytes: contents.len(),
        });
        log::info!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let v = round_value(serde_json::to_value(value)?);
        let mut s = serde_json::to_string_pretty(&v)?;
        s.push('\n');
        self.write(name, &s)
    }

    /// Writes `manifest.json`, sorted by path.
    pub fn finish(mut self, command: &str, seed: u64, config_text: &str) -> anyhow::Result<()> {
        self.artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest {
            command,
            seed,
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            artifacts: std::mem::take(&mut self.artifacts),
        };
        let mut s = serde_json::to_string_pretty(&manifest)?;
        s.push('\n');
        let path = self.root.join("manifest.json");
        std::fs::write(&path, s).with_context(|| format!("output: cannot write {}", path.display()))?;
        Ok(())
    }
}
