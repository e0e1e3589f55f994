use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Analyze,
    Index,
    Plan,
    Translate,
    Validate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Analyze,
        Stage::Index,
        Stage::Plan,
        Stage::Translate,
        Stage::Validate,
        Stage::Report,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Analyze => "analyze",
            Stage::Index => "index",
            Stage::Plan => "plan",
            Stage::Translate => "translate",
            Stage::Validate => "validate",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Argument(format!("unknown stage `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnitStatus {
    Pending,
    Translated,
    Validated,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineState {
    pub input_hash: String,
    pub seed: u64,
    pub completed: BTreeSet<Stage>,
    /// Keyed by plan unit key (`level:id`).
    pub units: BTreeMap<String, UnitStatus>,
}

pub const STATE_FILE: &str = "state.json";

impl PipelineState {
    pub fn new(input_hash: String, seed: u64) -> Self {
        Self {
            input_hash,
            seed,
            completed: BTreeSet::new(),
            units: BTreeMap::new(),
        }
    }

    /// Loads the state under `out`, or starts a fresh one. An existing state
    /// for different inputs is refused.
    pub fn open(out: &Path, input_hash: &str, seed: u64) -> Result<Self> {
        let path = out.join(STATE_FILE);
        if !path.exists() {
            return Ok(Self::new(input_hash.to_string(), seed));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let state: PipelineState = serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        if state.input_hash != input_hash {
            return Err(Error::Integrity(format!(
                "inputs changed since the run recorded in {}; remove it (or pass --fresh) to start over",
                path.display()
            )));
        }
        Ok(state)
    }

    pub fn save(&self, out: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("pipeline state", e))? + "\n";
        write_atomic(&out.join(STATE_FILE), text.as_bytes())
    }

    pub fn status(&self, key: &str) -> UnitStatus {
        self.units.get(key).copied().unwrap_or(UnitStatus::Pending)
    }
}

/// Writes through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let tmp = path.with_extension("tmp~");
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Incremental sha256 over labelled byte strings.
#[derive(Default)]
pub struct InputHasher(Sha256);

impl InputHasher {
    pub fn add(&mut self, label: &str, bytes: &[u8]) {
        for part in [label.as_bytes(), bytes] {
            self.0.update((part.len() as u64).to_le_bytes());
            self.0.update(part);
        }
    }

    pub fn finish(self) -> String {
        hex::encode(self.0.finalize())
    }
}
