//! Output helpers: provenance headers and CSV writers.

use std::path::Path;

use anyhow::Result;
use serde::Serialize;
use serde_json::{json, Value};

use crate::manifest::RunManifest;

pub struct Provenance {
    pub manifest_sha256: String,
    pub seed: u64,
}

impl Provenance {
    pub fn new(manifest: &RunManifest) -> Result<Self> {
        Ok(Self {
            manifest_sha256: manifest.sha256()?,
            seed: manifest.seed(),
        })
    }

    pub fn header(&self, format: &str) -> Value {
        json!({
            "format": format,
            "version": env!("CARGO_PKG_VERSION"),
            "manifest_sha256": self.manifest_sha256,
            "seed": self.seed,
        })
    }

    /// A JSON document whose top level merges the provenance header with the
    /// payload's own fields.
    pub fn wrap<T: Serialize>(&self, format: &str, payload: &T) -> Result<Value> {
        let mut doc = self.header(format);
        let body = serde_json::to_value(payload)?;
        if let (Value::Object(doc), Value::Object(body)) = (&mut doc, body) {
            for (k, v) in body {
                doc.insert(k, v);
            }
        }
        Ok(doc)
    }
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

pub fn join_ids(ids: &[usize]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join("|")
}
