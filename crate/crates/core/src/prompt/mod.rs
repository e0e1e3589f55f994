//! Prompt templates for each translation level and their rendering.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::{Arc, LazyLock};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::knowledge::RetrievalResult;
use crate::source::Span;

pub const DEFAULT_BUDGET: usize = 8000;
pub const NONE_RETRIEVED: &str = "none retrieved";
pub const DROPPED: &str = "omitted to fit the context budget";

/// Context slots in the order they are given up when a prompt is over budget.
pub const DROP_ORDER: [&str; 3] = ["specification", "ast", "dependency"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptLevel {
    Method,
    Class,
    Component,
    Project,
    Repair,
}

impl PromptLevel {
    pub const ALL: [PromptLevel; 5] = [
        PromptLevel::Method,
        PromptLevel::Class,
        PromptLevel::Component,
        PromptLevel::Project,
        PromptLevel::Repair,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PromptLevel::Method => "method",
            PromptLevel::Class => "class",
            PromptLevel::Component => "component",
            PromptLevel::Project => "project",
            PromptLevel::Repair => "repair",
        }
    }

    /// `(slot, mandatory)` pairs accepted by this level.
    pub fn slots(self) -> &'static [(&'static str, bool)] {
        match self {
            PromptLevel::Method => &[
                ("method_name", true),
                ("file_name", true),
                ("method_code", true),
                ("ast", true),
                ("specification", false),
            ],
            PromptLevel::Class => &[
                ("class_name", true),
                ("class_content", true),
                ("translated_methods", true),
                ("ast", true),
                ("dependency", true),
                ("specification", false),
            ],
            PromptLevel::Component => &[
                ("component_name", true),
                ("translated_classes", true),
                ("ast", true),
                ("dependency", true),
                ("specification", false),
            ],
            PromptLevel::Project => &[
                ("translated_components", true),
                ("dependency", true),
                ("resources", true),
                ("configuration", true),
                ("specification", false),
            ],
            PromptLevel::Repair => &[("file_name", true), ("code", true), ("issues", true)],
        }
    }

    pub fn headings(self) -> &'static [&'static str] {
        match self {
            PromptLevel::Method => &[
                "Method Name:",
                "Method Code:",
                "Abstract Syntax Tree:",
                "Retrieved Specification:",
                "Output Requirement:",
            ],
            PromptLevel::Class => &[
                "Class Content:",
                "Translated Methods:",
                "Abstract Syntax Tree:",
                "Dependency:",
                "Specification:",
                "Output Requirement:",
            ],
            PromptLevel::Component => &[
                "Translated Classes:",
                "Abstract Syntax Tree:",
                "Dependency:",
                "Specification:",
                "Output Requirement:",
            ],
            PromptLevel::Project => &[
                "Translated Components:",
                "Dependency:",
                "Resource:",
                "Configuration:",
                "Specification:",
                "Output Requirement:",
            ],
            PromptLevel::Repair => &["Reported Issues:", "Swift Code:", "Output Requirement:"],
        }
    }

    fn default_body(self) -> &'static str {
        match self {
            PromptLevel::Method => include_str!("../../templates/method.txt"),
            PromptLevel::Class => include_str!("../../templates/class.txt"),
            PromptLevel::Component => include_str!("../../templates/component.txt"),
            PromptLevel::Project => include_str!("../../templates/project.txt"),
            PromptLevel::Repair => include_str!("../../templates/repair.txt"),
        }
    }
}

impl fmt::Display for PromptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Literal(String),
    Slot(String),
}

static SLOT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{([a-z_]+)\}").unwrap());

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    pub level: PromptLevel,
    pub body: String,
    segments: Vec<Segment>,
}

impl PromptTemplate {
    /// Parses `body`, checking that every slot is known for `level` and
    /// that the level's headings are all present.
    pub fn parse(level: PromptLevel, body: &str) -> Result<Self> {
        let mut segments = Vec::new();
        let mut last = 0;
        for cap in SLOT.captures_iter(body) {
            let whole = cap.get(0).unwrap();
            let name = &cap[1];
            if !level.slots().iter().any(|(s, _)| *s == name) {
                return Err(Error::Config(format!("{level} template uses unknown slot `{name}`")));
            }
            if whole.start() > last {
                segments.push(Segment::Literal(body[last..whole.start()].to_string()));
            }
            segments.push(Segment::Slot(name.to_string()));
            last = whole.end();
        }
        if last < body.len() {
            segments.push(Segment::Literal(body[last..].to_string()));
        }
        if let Some(h) = level.headings().iter().find(|h| !body.contains(*h)) {
            return Err(Error::Config(format!("{level} template lacks heading `{h}`")));
        }
        Ok(Self {
            level,
            body: body.to_string(),
            segments,
        })
    }

    pub fn builtin(level: PromptLevel) -> Self {
        Self::parse(level, level.default_body()).expect("built-in templates are valid")
    }

    fn slot_names(&self) -> impl Iterator<Item = &str> {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(n) => Some(n.as_str()),
            Segment::Literal(_) => None,
        })
    }

    /// Literal text of the template, in order.
    pub fn literals(&self) -> Vec<&str> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Literal(l) => Some(l.as_str()),
                Segment::Slot(_) => None,
            })
            .collect()
    }
}

/// One template per level.
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<PromptLevel, Arc<PromptTemplate>>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self {
            templates: PromptLevel::ALL
                .into_iter()
                .map(|l| (l, Arc::new(PromptTemplate::builtin(l))))
                .collect(),
        }
    }
}

impl TemplateSet {
    /// Built-in templates, overridden by any `<level>.txt` found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let mut set = Self::default();
        for level in PromptLevel::ALL {
            let path = dir.join(format!("{level}.txt"));
            if path.is_file() {
                let body = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                set.templates.insert(level, Arc::new(PromptTemplate::parse(level, &body)?));
            }
        }
        Ok(set)
    }

    pub fn get(&self, level: PromptLevel) -> &Arc<PromptTemplate> {
        &self.templates[&level]
    }

    pub fn render(&self, level: PromptLevel, inputs: &PromptInputs) -> Result<PromptEnvelope> {
        render_prompt(self.get(level), inputs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotValue {
    pub text: String,
    /// Descriptor id, `graph`, `retrieval`, `default` and so on.
    pub origin: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chunk_ids: Vec<usize>,
}

/// Fillers for a prompt, keyed by slot name.
#[derive(Debug, Clone, Default)]
pub struct PromptInputs {
    pub unit_id: String,
    pub slots: BTreeMap<String, SlotValue>,
    pub retrieved: Vec<RetrievalResult>,
}

impl PromptInputs {
    pub fn new(unit_id: impl Into<String>) -> Self {
        Self {
            unit_id: unit_id.into(),
            ..Self::default()
        }
    }

    pub fn slot(mut self, name: &str, text: impl Into<String>, origin: impl Into<String>) -> Self {
        self.slots.insert(
            name.to_string(),
            SlotValue {
                text: text.into(),
                origin: origin.into(),
                chunk_ids: Vec::new(),
            },
        );
        self
    }

    pub fn retrieved(mut self, results: Vec<RetrievalResult>) -> Self {
        self.retrieved = results;
        self
    }
}

/// Retrieved chunks in score order, each under a header naming its source.
pub fn format_retrieved(results: &[RetrievalResult]) -> String {
    results
        .iter()
        .map(|r| format!("Source: {}\n{}", r.chunk.source_uri, r.chunk.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SlotProvenance {
    pub origin: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub chunk_ids: Vec<usize>,
    /// Byte ranges of `rendered_text` filled from this slot.
    pub spans: Vec<Span>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: String,
    pub content: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct PromptEnvelope {
    pub level: PromptLevel,
    pub unit_id: String,
    pub rendered_text: String,
    pub slot_provenance: BTreeMap<String, SlotProvenance>,
    pub size_estimate: usize,
    pub dropped: Vec<String>,
    #[serde(skip)]
    template: Arc<PromptTemplate>,
    #[serde(skip)]
    values: BTreeMap<String, SlotValue>,
}

/// Size in budget units: one unit per four characters, rounded up.
pub fn size_estimate(text: &str) -> usize {
    text.chars().count().div_ceil(4)
}

impl PromptEnvelope {
    pub fn slot_text(&self, slot: &str) -> Option<&str> {
        self.values.get(slot).map(|v| v.text.as_str())
    }

    /// First paragraph as the system message, the rest as the user message.
    pub fn messages(&self) -> Vec<ChatMessage> {
        let text = &self.rendered_text;
        let (system, user) = match text.find("\n\n") {
            Some(i) => (&text[..i], text[i..].trim_start_matches('\n')),
            None => (text.as_str(), ""),
        };
        let mut out = vec![ChatMessage {
            role: "system".into(),
            content: system.to_string(),
        }];
        if !user.is_empty() {
            out.push(ChatMessage {
                role: "user".into(),
                content: user.to_string(),
            });
        }
        out
    }

    /// Writes the rendered text and its provenance next to each other.
    pub fn dump(&self, dir: &Path, stem: &str) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let txt = dir.join(format!("{stem}.txt"));
        std::fs::write(&txt, &self.rendered_text).map_err(|e| Error::io(&txt, e))?;
        let json = dir.join(format!("{stem}.json"));
        let meta = serde_json::to_string_pretty(self).expect("serializable");
        std::fs::write(&json, meta).map_err(|e| Error::io(&json, e))
    }

    fn rerender(&mut self) {
        let (text, prov) = fill(&self.template, &self.values);
        self.size_estimate = size_estimate(&text);
        self.rendered_text = text;
        self.slot_provenance = prov;
    }
}

fn fill(template: &PromptTemplate, values: &BTreeMap<String, SlotValue>) -> (String, BTreeMap<String, SlotProvenance>) {
    let mut text = String::new();
    let mut prov: BTreeMap<String, SlotProvenance> = BTreeMap::new();
    for seg in &template.segments {
        match seg {
            Segment::Literal(l) => text.push_str(l),
            Segment::Slot(name) => {
                let v = &values[name];
                let start = text.len();
                text.push_str(&v.text);
                prov.entry(name.clone())
                    .or_insert_with(|| SlotProvenance {
                        origin: v.origin.clone(),
                        chunk_ids: v.chunk_ids.clone(),
                        spans: Vec::new(),
                    })
                    .spans
                    .push(Span::new(start, text.len()));
            }
        }
    }
    (text, prov)
}

pub fn render_prompt(template: &Arc<PromptTemplate>, inputs: &PromptInputs) -> Result<PromptEnvelope> {
    let level = template.level;
    let mut values = BTreeMap::new();
    for name in template.slot_names() {
        if values.contains_key(name) {
            continue;
        }
        let mandatory = level.slots().iter().any(|(s, m)| *s == name && *m);
        let given = inputs.slots.get(name).cloned().or_else(|| {
            (name == "specification" && !inputs.retrieved.is_empty()).then(|| SlotValue {
                text: format_retrieved(&inputs.retrieved),
                origin: "retrieval".into(),
                chunk_ids: inputs.retrieved.iter().map(|r| r.chunk.id).collect(),
            })
        });
        let value = match given {
            Some(v) if !v.text.trim().is_empty() => v,
            Some(v) => SlotValue {
                text: NONE_RETRIEVED.into(),
                ..v
            },
            None if mandatory => {
                return Err(Error::Assembly {
                    level: level.to_string(),
                    slot: name.to_string(),
                })
            }
            None => SlotValue {
                text: NONE_RETRIEVED.into(),
                origin: "default".into(),
                chunk_ids: Vec::new(),
            },
        };
        values.insert(name.to_string(), value);
    }
    let mut env = PromptEnvelope {
        level,
        unit_id: inputs.unit_id.clone(),
        rendered_text: String::new(),
        slot_provenance: BTreeMap::new(),
        size_estimate: 0,
        dropped: Vec::new(),
        template: Arc::clone(template),
        values,
    };
    env.rerender();
    Ok(env)
}

/// Drops droppable context, in [`DROP_ORDER`], until the prompt fits.
pub fn truncate_context(envelope: &PromptEnvelope, budget: usize) -> Result<PromptEnvelope> {
    if budget == 0 {
        return Err(Error::Argument("prompt budget must be positive".into()));
    }
    let mut env = envelope.clone();
    for slot in DROP_ORDER {
        if env.size_estimate <= budget {
            return Ok(env);
        }
        let Some(v) = env.values.get_mut(slot) else { continue };
        if v.text == DROPPED {
            continue;
        }
        v.text = DROPPED.into();
        v.origin = "dropped".into();
        v.chunk_ids.clear();
        env.dropped.push(slot.to_string());
        env.rerender();
    }
    if env.size_estimate > budget {
        return Err(Error::Budget {
            needed: env.size_estimate,
            budget,
        });
    }
    Ok(env)
}
