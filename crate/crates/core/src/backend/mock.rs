use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{BackendConfig, BackendError, TranslationBackend};
use crate::error::{Error, Result};
use crate::prompt::{PromptEnvelope, PromptLevel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteRule {
    pub pattern: String,
    pub replacement: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairMode {
    /// Return the code untouched.
    None,
    /// Apply the first matching repair rule once per call.
    #[default]
    One,
    /// Apply every repair rule everywhere.
    All,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleTable {
    pub translate: Vec<RewriteRule>,
    pub repair: Vec<RewriteRule>,
    pub repair_mode: RepairMode,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RuleFile {
    Flat(Vec<RewriteRule>),
    Sections(RuleTable),
}

impl RuleTable {
    /// Either a bare array of translate rules or an object with
    /// `translate`, `repair` and `repair_mode`.
    pub fn parse(text: &str) -> Result<Self> {
        let table = match serde_json::from_str(text).map_err(|e| Error::json("mock rule table", e))? {
            RuleFile::Flat(translate) => RuleTable {
                translate,
                ..RuleTable::default()
            },
            RuleFile::Sections(t) => t,
        };
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

struct Compiled {
    re: Regex,
    replacement: String,
}

fn compile(rules: &[RewriteRule]) -> Result<Vec<Compiled>> {
    rules
        .iter()
        .map(|r| {
            Ok(Compiled {
                re: Regex::new(&r.pattern).map_err(|e| Error::Config(format!("bad mock rule `{}`: {e}", r.pattern)))?,
                replacement: r.replacement.clone(),
            })
        })
        .collect()
}

/// Deterministic backend that rewrites the code slot of a prompt with a
/// rule table and answers in a fenced block.
pub struct MockBackend {
    translate: Vec<Compiled>,
    repair: Vec<Compiled>,
    mode: RepairMode,
    calls: Mutex<BTreeMap<PromptLevel, usize>>,
    total: AtomicUsize,
}

impl MockBackend {
    pub fn new(rules: RuleTable) -> Self {
        Self::try_new(rules).expect("valid rule table")
    }

    pub fn try_new(rules: RuleTable) -> Result<Self> {
        Ok(Self {
            translate: compile(&rules.translate)?,
            repair: compile(&rules.repair)?,
            mode: rules.repair_mode,
            calls: Mutex::new(BTreeMap::new()),
            total: AtomicUsize::new(0),
        })
    }

    pub fn calls(&self, level: PromptLevel) -> usize {
        self.calls.lock().unwrap().get(&level).copied().unwrap_or(0)
    }

    pub fn total_calls(&self) -> usize {
        self.total.load(Ordering::SeqCst)
    }

    fn translate_code(&self, code: &str) -> String {
        self.translate
            .iter()
            .fold(code.to_string(), |acc, r| r.re.replace_all(&acc, r.replacement.as_str()).into_owned())
    }

    fn repair_code(&self, code: &str) -> String {
        match self.mode {
            RepairMode::None => code.to_string(),
            RepairMode::All => self
                .repair
                .iter()
                .fold(code.to_string(), |acc, r| r.re.replace_all(&acc, r.replacement.as_str()).into_owned()),
            RepairMode::One => self
                .repair
                .iter()
                .find(|r| r.re.is_match(code))
                .map(|r| r.re.replace(code, r.replacement.as_str()).into_owned())
                .unwrap_or_else(|| code.to_string()),
        }
    }
}

impl TranslationBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn complete(&self, envelope: &PromptEnvelope, _: &BackendConfig) -> Result<String, BackendError> {
        *self.calls.lock().unwrap().entry(envelope.level).or_default() += 1;
        self.total.fetch_add(1, Ordering::SeqCst);
        let slot = |name: &str| {
            envelope
                .slot_text(name)
                .map(str::to_string)
                .ok_or_else(|| BackendError::fatal(format!("mock backend: prompt has no `{name}` slot")))
        };
        let code = match envelope.level {
            PromptLevel::Method => self.translate_code(&slot("method_code")?),
            PromptLevel::Class => self.translate_code(&slot("class_content")?),
            PromptLevel::Component => slot("translated_classes")?,
            PromptLevel::Project => slot("translated_components")?,
            PromptLevel::Repair => self.repair_code(&slot("code")?),
        };
        Ok(format!("```swift\n{code}\n```\n"))
    }
}
