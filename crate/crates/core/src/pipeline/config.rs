use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;
use crate::error::{Error, Result};
use crate::knowledge::{ChunkingConfig, EmbedderSettings, DEFAULT_TOP_K};
use crate::prompt::DEFAULT_BUDGET;
use crate::report::{DEFAULT_CONFIDENCE, DEFAULT_MARGIN, DEFAULT_SEED};
use crate::validation::{CheckSettings, DEFAULT_MAX_ROUNDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSection {
    /// Registry name: `mock` or `live`.
    pub name: String,
    #[serde(flatten)]
    pub config: BackendConfig,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrawlSettings {
    pub start_url: String,
    #[serde(default = "default_depth")]
    pub max_depth: usize,
    #[serde(default = "default_pages")]
    pub max_pages: usize,
    #[serde(default = "default_crawl_timeout")]
    pub timeout_secs: u64,
}

fn default_depth() -> usize {
    2
}

fn default_pages() -> usize {
    50
}

fn default_crawl_timeout() -> u64 {
    20
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnowledgeSettings {
    pub enabled: bool,
    /// Documentation root; defaults to the source root.
    pub docs_root: Option<PathBuf>,
    pub embedder: String,
    #[serde(flatten)]
    pub embedder_settings: EmbedderSettings,
    pub chunk_size: usize,
    pub chunk_overlap: usize,
    pub top_k: usize,
    /// Off unless configured.
    pub crawl: Option<CrawlSettings>,
}

impl Default for KnowledgeSettings {
    fn default() -> Self {
        let chunking = ChunkingConfig::default();
        Self {
            enabled: true,
            docs_root: None,
            embedder: "hashed".into(),
            embedder_settings: EmbedderSettings::default(),
            chunk_size: chunking.size,
            chunk_overlap: chunking.overlap,
            top_k: DEFAULT_TOP_K,
            crawl: None,
        }
    }
}

impl KnowledgeSettings {
    pub fn chunking(&self) -> ChunkingConfig {
        ChunkingConfig {
            size: self.chunk_size,
            overlap: self.chunk_overlap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidationSettings {
    /// Check registry names, run in order.
    pub checks: Vec<String>,
    #[serde(flatten)]
    pub tools: CheckSettings,
    pub residue_rules: Option<PathBuf>,
    pub allowlist: Option<PathBuf>,
    pub graph_diff: bool,
}

impl Default for ValidationSettings {
    fn default() -> Self {
        Self {
            checks: ["stub-syntax", "stub-lint", "references", "platform"].map(String::from).to_vec(),
            tools: CheckSettings::default(),
            residue_rules: None,
            allowlist: None,
            graph_diff: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSettings {
    pub confidence: f64,
    pub margin: f64,
}

impl Default for SampleSettings {
    fn default() -> Self {
        Self {
            confidence: DEFAULT_CONFIDENCE,
            margin: DEFAULT_MARGIN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub project: String,
    pub source_root: PathBuf,
    pub output_root: PathBuf,
    pub backend: Option<BackendSection>,
    #[serde(default)]
    pub knowledge: KnowledgeSettings,
    #[serde(default)]
    pub validation: ValidationSettings,
    #[serde(default)]
    pub templates_dir: Option<PathBuf>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_rounds")]
    pub max_rounds: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Worker threads for per-file work; 0 uses all cores.
    #[serde(default)]
    pub parallelism: usize,
    #[serde(default)]
    pub sample: SampleSettings,
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_rounds() -> usize {
    DEFAULT_MAX_ROUNDS
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl RunConfig {
    /// Parses a config; relative paths resolve against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad run config: {e}")))?;
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut cfg.source_root);
        abs(&mut cfg.output_root);
        for p in [
            cfg.knowledge.docs_root.as_mut(),
            cfg.templates_dir.as_mut(),
            cfg.validation.residue_rules.as_mut(),
            cfg.validation.allowlist.as_mut(),
            cfg.backend.as_mut().and_then(|b| b.config.mock_rules.as_mut()),
        ]
        .into_iter()
        .flatten()
        {
            abs(p);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn backend(&self) -> Result<&BackendSection> {
        self.backend
            .as_ref()
            .ok_or_else(|| Error::Config("run config has no `backend` section".into()))
    }

    /// Checks everything that can be checked before any work starts.
    pub fn validate(&self) -> Result<()> {
        if self.project.trim().is_empty() {
            return Err(Error::Config("project name is empty".into()));
        }
        let backend = self.backend()?;
        backend.config.validate()?;
        if !self.source_root.is_dir() {
            return Err(Error::Config(format!("source root {} is not a directory", self.source_root.display())));
        }
        if self.budget == 0 {
            return Err(Error::Config("prompt budget must be positive".into()));
        }
        if self.knowledge.enabled {
            self.knowledge.chunking().validate()?;
            if self.knowledge.top_k == 0 {
                return Err(Error::Config("knowledge.top_k must be positive".into()));
            }
        }
        for p in [
            self.knowledge.docs_root.as_ref(),
            self.templates_dir.as_ref(),
            self.validation.residue_rules.as_ref(),
            self.validation.allowlist.as_ref(),
            backend.config.mock_rules.as_ref(),
        ]
        .into_iter()
        .flatten()
        {
            if !p.exists() {
                return Err(Error::Config(format!("configured path {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn docs_root(&self) -> &Path {
        self.knowledge.docs_root.as_deref().unwrap_or(&self.source_root)
    }
}
