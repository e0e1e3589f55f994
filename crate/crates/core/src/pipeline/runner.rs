use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use tracing::{info, warn};
use walkdir::WalkDir;

use super::config::RunConfig;
use super::state::{write_atomic, InputHasher, PipelineState, Stage, UnitStatus};
use crate::backend::{backend_registry, extract_code, prompt_hash, translate, TranslationBackend};
use crate::error::{Error, Result};
use crate::knowledge::{
    build_index, crawl_site, embedder_registry, ingest_repository, DocumentChunk, Embedder, EmbeddingVector, HttpFetcher,
    KnowledgeBase, RetrievalResult,
};
use crate::prompt::{truncate_context, PromptEnvelope, PromptInputs, PromptLevel, TemplateSet};
use crate::report::{
    aggregate_metrics, classify_issue, compute_project_metrics, count_labels, emit_report, review_sample, taxonomy_rows,
    Report, ReportFormat,
};
use crate::scheduler::{build_plan, PlanUnit, TranslationPlan, UnitLevel, PROJECT_UNIT};
use crate::source::{
    build_dependency_graph, extract_classes, load_tree, method_body, parse_source, relative_path, Ast, ClassDescriptor,
    DependencyGraph, Granularity, Language, MethodDescriptor, SourceFile, DEFAULT_COMPONENT,
};
use crate::validation::{
    check_registry, compare_graphs, default_mapping, project_definitions, run_checks, source_symbols, translated_graph,
    Allowlist, Check, ReferenceContext, Refiner, ResidueRules, SwiftUnit, ValidationReport,
};

const ANALYSIS_FILE: &str = "analysis.json";
const KB_DIR: &str = "kb";
const KB_MANIFEST: &str = "manifest.json";
const PLAN_FILE: &str = "plan.jsonl";
const UNITS_DIR: &str = "units";
const SWIFT_DIR: &str = "swift";
const TRANSLATION_MANIFEST: &str = "translation.json";
const BEFORE_FILE: &str = "validation/before.json";
const AFTER_FILE: &str = "validation/after.json";
const REPORT_JSON: &str = "report.json";
const REPORT_MD: &str = "report.md";
const PROMPTS_DIR: &str = "prompts";

const METHOD_AST_DEPTH: usize = 8;
const CLASS_AST_DEPTH: usize = 3;
const COMPONENT_AST_DEPTH: usize = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Render prompts without calling the backend.
    pub dry_run: bool,
    pub dump_prompts: bool,
    /// Stop with [`Error::Halted`] after this many units reach the backend.
    pub halt_after_units: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageReport {
    pub stage: Stage,
    pub summary: String,
    pub backend_calls: usize,
    pub embed_calls: usize,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Analysis {
    pub classes: Vec<ClassDescriptor>,
    pub method_graph: DependencyGraph,
    pub class_graph: DependencyGraph,
    pub component_graph: DependencyGraph,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct KbManifest {
    key: String,
    enabled: bool,
    chunks: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitArtifact {
    pub key: String,
    pub level: UnitLevel,
    pub id: String,
    pub code: String,
    pub prompt_hash: String,
    pub todo_markers: Vec<(usize, String)>,
    pub dropped: Vec<String>,
    /// Set for refined class units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub file: String,
    pub initial_code: String,
    pub rounds: usize,
    pub repair_calls: usize,
    pub degraded: bool,
    pub error_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct TranslatedFile {
    class: String,
    file: String,
    unit: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct TranslationManifest {
    files: Vec<TranslatedFile>,
}

struct CountingEmbedder<'a> {
    inner: &'a dyn Embedder,
    calls: &'a AtomicUsize,
}

impl Embedder for CountingEmbedder<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.embed(text)
    }
}

/// The staged runner over one output directory.
pub struct Pipeline {
    config: RunConfig,
    options: RunOptions,
    backend: Arc<dyn TranslationBackend>,
    embedder: Option<Box<dyn Embedder>>,
    templates: TemplateSet,
    residue: ResidueRules,
    allowlist: Allowlist,
    checks: Vec<Box<dyn Check>>,
    state: PipelineState,
    pool: rayon::ThreadPool,
    backend_calls: AtomicUsize,
    embed_calls: AtomicUsize,
    units_sent: usize,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))? + "\n";
    write_atomic(path, text.as_bytes())
}

fn unit_key(level: UnitLevel, id: &str) -> String {
    format!("{}:{id}", level.as_str())
}

fn file_stem(seq: usize, key: &str) -> String {
    let clean: String = key
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect();
    format!("{seq:05}-{clean}")
}

/// `com.example.app` + `Foo` -> `com/example/app/Foo.swift`.
fn swift_path(class: &ClassDescriptor) -> String {
    if class.component == DEFAULT_COMPONENT {
        format!("{}.swift", class.simple_name)
    } else {
        format!("{}/{}.swift", class.component.replace('.', "/"), class.simple_name)
    }
}

fn dependency_text(graph: &DependencyGraph, nodes: &BTreeSet<&str>) -> String {
    let mut lines: Vec<String> = graph
        .edges
        .iter()
        .filter(|e| nodes.contains(e.from.as_str()))
        .map(|e| format!("{} -> {} ({})", e.from, e.to, e.kind))
        .collect();
    lines.extend(
        graph
            .external
            .iter()
            .filter(|r| nodes.contains(r.from.as_str()))
            .map(|r| format!("{} -> {} (external {})", r.from, r.name, r.kind)),
    );
    if lines.is_empty() {
        "no dependencies".into()
    } else {
        lines.join("\n")
    }
}

fn walk_files(root: &Path, skip: &Path) -> Vec<PathBuf> {
    WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|e| e.depth() == 0 || !(e.file_name().to_string_lossy().starts_with('.') || e.path().starts_with(skip)))
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().is_file())
        .map(|e| e.into_path())
        .collect()
}

impl Pipeline {
    /// Validates the config and builds the configured backend before any
    /// work happens.
    pub fn new(config: RunConfig, options: RunOptions) -> Result<Self> {
        config.validate()?;
        let section = config.backend()?;
        let backend: Arc<dyn TranslationBackend> = backend_registry().create(&section.name, &section.config)?.into();
        Self::with_backend(config, options, backend)
    }

    pub fn with_backend(config: RunConfig, options: RunOptions, backend: Arc<dyn TranslationBackend>) -> Result<Self> {
        config.validate()?;
        let embedder = if config.knowledge.enabled {
            Some(embedder_registry().create(&config.knowledge.embedder, &config.knowledge.embedder_settings)?)
        } else {
            None
        };
        let templates = match &config.templates_dir {
            Some(dir) => TemplateSet::load_dir(dir)?,
            None => TemplateSet::default(),
        };
        let residue = match &config.validation.residue_rules {
            Some(p) => ResidueRules::load(p)?,
            None => ResidueRules::builtin(),
        };
        let allowlist = match &config.validation.allowlist {
            Some(p) => Allowlist::load(p)?,
            None => Allowlist::builtin(),
        };
        let registry = check_registry();
        let checks = config
            .validation
            .checks
            .iter()
            .map(|n| registry.create(n, &config.validation.tools))
            .collect::<Result<Vec<_>>>()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallelism)
            .build()
            .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
        let hash = input_hash(&config)?;
        std::fs::create_dir_all(&config.output_root).map_err(|e| Error::io(&config.output_root, e))?;
        let state = PipelineState::open(&config.output_root, &hash, config.seed)?;
        Ok(Self {
            config,
            options,
            backend,
            embedder,
            templates,
            residue,
            allowlist,
            checks,
            state,
            pool,
            backend_calls: AtomicUsize::new(0),
            embed_calls: AtomicUsize::new(0),
            units_sent: 0,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn state(&self) -> &PipelineState {
        &self.state
    }

    pub fn backend_calls(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn embed_calls(&self) -> usize {
        self.embed_calls.load(Ordering::SeqCst)
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.config.output_root.join(rel)
    }

    /// Every stage in order; a dry run stops after rendering method prompts.
    pub fn run(&mut self) -> Result<Vec<StageReport>> {
        let mut reports = Vec::new();
        for stage in Stage::ALL {
            if self.options.dry_run && stage == Stage::Translate {
                reports.push(self.dry_translate()?);
                break;
            }
            reports.push(self.run_stage(stage)?);
        }
        Ok(reports)
    }

    pub fn run_stage(&mut self, stage: Stage) -> Result<StageReport> {
        let (calls, embeds) = (self.backend_calls(), self.embed_calls());
        let (summary, cache_hit) = match stage {
            Stage::Analyze => (self.analyze()?, false),
            Stage::Index => self.index()?,
            Stage::Plan => (self.plan()?, false),
            Stage::Translate if self.options.dry_run => return self.dry_translate(),
            Stage::Translate => (self.translate()?, false),
            Stage::Validate => (self.validate()?, false),
            Stage::Report => (self.report()?, false),
        };
        self.state.completed.insert(stage);
        self.state.save(&self.config.output_root)?;
        info!(%stage, %summary, "stage complete");
        Ok(StageReport {
            stage,
            summary,
            backend_calls: self.backend_calls() - calls,
            embed_calls: self.embed_calls() - embeds,
            cache_hit,
        })
    }

    fn artifact(stage: Stage) -> &'static str {
        match stage {
            Stage::Analyze => ANALYSIS_FILE,
            Stage::Index => "kb/manifest.json",
            Stage::Plan => PLAN_FILE,
            Stage::Translate => TRANSLATION_MANIFEST,
            Stage::Validate => AFTER_FILE,
            Stage::Report => REPORT_JSON,
        }
    }

    fn require(&self, stage: Stage, prerequisite: Stage) -> Result<()> {
        if self.state.completed.contains(&prerequisite) && self.out(Self::artifact(prerequisite)).exists() {
            Ok(())
        } else {
            Err(Error::Ordering {
                stage: stage.to_string(),
                missing: prerequisite.to_string(),
            })
        }
    }

    fn analyze(&mut self) -> Result<String> {
        let files = load_tree(&self.config.source_root, Language::Java)?;
        let mut per_file = self.pool.install(|| {
            files
                .par_iter()
                .map(|f| parse_source(f).and_then(|ast| extract_classes(&ast)))
                .collect::<Result<Vec<_>>>()
        })?;
        let classes: Vec<ClassDescriptor> = per_file.drain(..).flatten().collect();
        let degraded = classes.iter().filter(|c| c.degraded).count();
        if degraded > 0 {
            warn!(degraded, "classes with parse recovery nodes");
        }
        let analysis = Analysis {
            method_graph: build_dependency_graph(&classes, Granularity::Method)?,
            class_graph: build_dependency_graph(&classes, Granularity::Class)?,
            component_graph: build_dependency_graph(&classes, Granularity::Component)?,
            classes,
        };
        write_json(&self.out(ANALYSIS_FILE), &analysis)?;
        Ok(format!(
            "{} files, {} classes, {} methods, {} components",
            files.len(),
            analysis.class_graph.nodes.len(),
            analysis.method_graph.nodes.len(),
            analysis.component_graph.nodes.len()
        ))
    }

    fn load_analysis(&self, stage: Stage) -> Result<Analysis> {
        self.require(stage, Stage::Analyze)?;
        read_json(&self.out(ANALYSIS_FILE))
    }

    /// Builds the knowledge base once; later runs with the same documents and
    /// settings are cache hits that embed nothing.
    fn index(&mut self) -> Result<(String, bool)> {
        let dir = self.out(KB_DIR);
        let manifest_path = dir.join(KB_MANIFEST);
        let Some(embedder) = self.embedder.as_deref() else {
            write_json(&manifest_path, &KbManifest { key: String::new(), enabled: false, chunks: 0 })?;
            return Ok(("knowledge base disabled".into(), false));
        };
        let k = &self.config.knowledge;
        let local = ingest_repository(self.config.docs_root(), k.chunking(), &[&self.config.output_root])?;
        let mut hasher = InputHasher::default();
        hasher.add("settings", serde_json::to_string(k).expect("settings serialize").as_bytes());
        for c in &local {
            hasher.add(&c.source_uri, c.text.as_bytes());
        }
        let key = hasher.finish();
        if manifest_path.exists() {
            let old: KbManifest = read_json(&manifest_path)?;
            if old.enabled && old.key == key && KnowledgeBase::load(&dir).is_ok() {
                return Ok((format!("cache hit, {} chunks", old.chunks), true));
            }
        }
        let mut chunks: Vec<DocumentChunk> = local;
        if let Some(crawl) = &k.crawl {
            let fetcher = HttpFetcher::new(Duration::from_secs(crawl.timeout_secs));
            let outcome = crawl_site(&crawl.start_url, crawl.max_depth, crawl.max_pages, &fetcher, k.chunking(), chunks.len())?;
            info!(visited = outcome.visited.len(), skipped = outcome.skipped.len(), "crawl finished");
            chunks.extend(outcome.chunks);
        }
        let counting = CountingEmbedder {
            inner: embedder,
            calls: &self.embed_calls,
        };
        let index = build_index(&chunks, &counting)?;
        let n = chunks.len();
        KnowledgeBase::new(chunks, index)?.save(&dir)?;
        write_json(&manifest_path, &KbManifest { key, enabled: true, chunks: n })?;
        Ok((format!("indexed {n} chunks"), false))
    }

    fn plan(&mut self) -> Result<String> {
        let a = self.load_analysis(Stage::Plan)?;
        let plan = build_plan(&a.method_graph, &a.class_graph, &a.component_graph)?;
        write_atomic(&self.out(PLAN_FILE), plan.to_jsonl().as_bytes())?;
        Ok(format!("{} units", plan.units().len()))
    }

    fn load_plan(&self, stage: Stage) -> Result<TranslationPlan> {
        self.require(stage, Stage::Plan)?;
        let path = self.out(PLAN_FILE);
        TranslationPlan::from_jsonl(&std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?)
    }

    fn load_kb(&self, stage: Stage) -> Result<Option<KnowledgeBase>> {
        if !self.config.knowledge.enabled {
            return Ok(None);
        }
        self.require(stage, Stage::Index)?;
        KnowledgeBase::load(&self.out(KB_DIR)).map(Some)
    }

    fn call(&self, env: &PromptEnvelope) -> Result<String> {
        self.backend_calls.fetch_add(1, Ordering::SeqCst);
        translate(self.backend.as_ref(), env, &self.config.backend()?.config)
    }

    fn note_sent(&mut self) -> Result<()> {
        self.units_sent += 1;
        if self.options.halt_after_units.is_some_and(|n| self.units_sent >= n) {
            self.state.save(&self.config.output_root)?;
            return Err(Error::Halted { units: self.units_sent });
        }
        Ok(())
    }

    fn dry_translate(&mut self) -> Result<StageReport> {
        let ctx = TranslateContext::load(self, Stage::Translate)?;
        let units = ctx.plan.units();
        let envs = self.pool.install(|| {
            units
                .par_iter()
                .filter(|u| u.level == UnitLevel::Method)
                .map(|u| ctx.method_prompt(self, &u.id).map(|e| (u, e)))
                .collect::<Result<Vec<_>>>()
        })?;
        let dir = self.out(PROMPTS_DIR);
        for (u, env) in &envs {
            env.dump(&dir, &file_stem(u.seq, &unit_key(u.level, &u.id)))?;
        }
        let largest = envs.iter().map(|(_, e)| e.size_estimate).max().unwrap_or(0);
        Ok(StageReport {
            stage: Stage::Translate,
            summary: format!("dry run: rendered {} method prompts (largest {largest} units) into {}", envs.len(), dir.display()),
            backend_calls: 0,
            embed_calls: 0,
            cache_hit: false,
        })
    }

    fn unit_path(&self, u: &PlanUnit) -> PathBuf {
        self.out(UNITS_DIR).join(file_stem(u.seq, &unit_key(u.level, &u.id)) + ".json")
    }

    fn finished(&self, u: &PlanUnit) -> Option<UnitArtifact> {
        let key = unit_key(u.level, &u.id);
        if matches!(self.state.status(&key), UnitStatus::Translated | UnitStatus::Validated) {
            read_json(&self.unit_path(u)).ok()
        } else {
            None
        }
    }

    /// Sends one prompt and writes the unit artifact (before the state
    /// records it).
    fn produce(&self, u: &PlanUnit, env: PromptEnvelope) -> Result<UnitArtifact> {
        if self.options.dump_prompts {
            env.dump(&self.out(PROMPTS_DIR), &file_stem(u.seq, &unit_key(u.level, &u.id)))?;
        }
        let raw = self.call(&env)?;
        let extraction = extract_code(&raw)?;
        Ok(UnitArtifact {
            key: unit_key(u.level, &u.id),
            level: u.level,
            id: u.id.clone(),
            code: extraction.code,
            prompt_hash: prompt_hash(&env.rendered_text),
            todo_markers: extraction.todo_markers,
            dropped: env.dropped.clone(),
            refinement: None,
        })
    }

    fn record(&mut self, u: &PlanUnit, artifact: &UnitArtifact, status: UnitStatus) -> Result<()> {
        write_json(&self.unit_path(u), artifact)?;
        self.state.units.insert(artifact.key.clone(), status);
        self.state.save(&self.config.output_root)
    }

    fn fail(&mut self, u: &PlanUnit, e: Error) -> Error {
        self.state.units.insert(unit_key(u.level, &u.id), UnitStatus::Failed);
        if let Err(save) = self.state.save(&self.config.output_root) {
            warn!(error = %save, "could not persist failure state");
        }
        e
    }

    fn translate(&mut self) -> Result<String> {
        let ctx = TranslateContext::load(self, Stage::Translate)?;
        let units = ctx.plan.units();
        let mut done: BTreeMap<String, String> = BTreeMap::new();
        let mut defined: BTreeSet<String> = BTreeSet::new();
        let mut pending_names: BTreeSet<String> = ctx.classes.values().map(|c| c.simple_name.clone()).collect();
        let mut manifest = TranslationManifest::default();
        let (mut fresh, mut reused) = (0usize, 0usize);

        let mut i = 0;
        while i < units.len() {
            // A run of method units of one class is independent work.
            let mut j = i;
            while j < units.len() && units[j].level == UnitLevel::Method && units[j].class == units[i].class {
                j += 1;
            }
            if j > i {
                let batch = &units[i..j];
                let todo: Vec<&PlanUnit> = batch
                    .iter()
                    .filter(|u| match self.finished(u) {
                        Some(a) => {
                            done.insert(a.key.clone(), a.code);
                            reused += 1;
                            false
                        }
                        None => true,
                    })
                    .collect();
                let step = if self.options.halt_after_units.is_some() { 1 } else { todo.len().max(1) };
                for chunk in todo.chunks(step) {
                    let results: Vec<Result<UnitArtifact>> = self.pool.install(|| {
                        chunk
                            .par_iter()
                            .map(|u| ctx.method_prompt(self, &u.id).and_then(|env| self.produce(u, env)))
                            .collect()
                    });
                    for (u, r) in chunk.iter().zip(results) {
                        let artifact = r.map_err(|e| self.fail(u, e))?;
                        self.record(u, &artifact, UnitStatus::Translated)?;
                        done.insert(artifact.key.clone(), artifact.code);
                        fresh += 1;
                        self.note_sent()?;
                    }
                }
                i = j;
                continue;
            }
            let u = &units[i];
            i += 1;
            let key = unit_key(u.level, &u.id);
            if u.level == UnitLevel::Class {
                let class = ctx.classes[u.id.as_str()];
                pending_names.remove(&class.simple_name);
                if class.outer.is_none() {
                    manifest.files.push(TranslatedFile {
                        class: class.qualified_name.clone(),
                        file: swift_path(class),
                        unit: key.clone(),
                    });
                }
            }
            if let Some(a) = self.finished(u) {
                if let Some(r) = &a.refinement {
                    write_atomic(&self.out(SWIFT_DIR).join(&r.file), format!("{}\n", a.code).as_bytes())?;
                }
                if a.level == UnitLevel::Class {
                    defined.extend(project_definitions(&[SwiftUnit::new("", a.code.clone())]));
                }
                done.insert(key, a.code);
                reused += 1;
                continue;
            }
            let env = match u.level {
                UnitLevel::Class => ctx.class_prompt(self, &u.id, &done),
                UnitLevel::Component => ctx.component_prompt(self, &u.id, &done),
                UnitLevel::Project => ctx.project_prompt(self, &done),
                UnitLevel::Method => unreachable!("methods are batched"),
            };
            let mut artifact = match env.and_then(|env| self.produce(u, env)) {
                Ok(a) => a,
                Err(e) => return Err(self.fail(u, e)),
            };
            let mut status = UnitStatus::Translated;
            if u.level == UnitLevel::Class && ctx.classes[u.id.as_str()].outer.is_none() {
                let class = ctx.classes[u.id.as_str()];
                let file = swift_path(class);
                let known: BTreeSet<String> = defined.union(&pending_names).cloned().collect();
                let outcome = {
                    let rctx = ReferenceContext {
                        defined: &known,
                        source_symbols: &ctx.symbols,
                        allowlist: &self.allowlist,
                        residue: &self.residue,
                    };
                    let counting = CountingBackend {
                        inner: self.backend.as_ref(),
                        calls: &self.backend_calls,
                    };
                    Refiner {
                        backend: &counting,
                        backend_config: &self.config.backend()?.config,
                        templates: &self.templates,
                        checks: &self.checks,
                        context: &rctx,
                        max_rounds: self.config.max_rounds,
                    }
                    .refine(SwiftUnit::new(file.clone(), artifact.code.clone()))
                };
                let outcome = outcome.map_err(|e| self.fail(u, e))?;
                if outcome.degraded {
                    warn!(class = %class.qualified_name, "refinement degraded; kept best candidate");
                }
                artifact.refinement = Some(RefinementSummary {
                    file: file.clone(),
                    initial_code: artifact.code.clone(),
                    rounds: outcome.state.round,
                    repair_calls: outcome.repair_calls,
                    degraded: outcome.degraded,
                    error_counts: outcome.state.history.iter().map(|(_, r)| r.error_count()).collect(),
                });
                artifact.code = outcome.unit.code;
                write_atomic(&self.out(SWIFT_DIR).join(&file), format!("{}\n", artifact.code).as_bytes())?;
                status = UnitStatus::Validated;
            }
            if u.level == UnitLevel::Class {
                defined.extend(project_definitions(&[SwiftUnit::new("", artifact.code.clone())]));
            }
            self.record(u, &artifact, status)?;
            done.insert(key, artifact.code);
            fresh += 1;
            self.note_sent()?;
        }
        write_json(&self.out(TRANSLATION_MANIFEST), &manifest)?;
        Ok(format!("{} units ({fresh} translated, {reused} resumed), {} files", units.len(), manifest.files.len()))
    }

    fn load_translation(&self, stage: Stage) -> Result<(TranslationManifest, Vec<(SwiftUnit, SwiftUnit)>)> {
        self.require(stage, Stage::Translate)?;
        let manifest: TranslationManifest = read_json(&self.out(TRANSLATION_MANIFEST))?;
        let plan = self.load_plan(stage)?;
        let by_key: BTreeMap<String, PlanUnit> = plan.units().into_iter().map(|u| (unit_key(u.level, &u.id), u)).collect();
        let mut pairs = Vec::new();
        for f in &manifest.files {
            let u = by_key
                .get(&f.unit)
                .ok_or_else(|| Error::Integrity(format!("translated unit {} is not in the plan", f.unit)))?;
            let a: UnitArtifact = read_json(&self.unit_path(u))?;
            let initial = a.refinement.as_ref().map_or(a.code.clone(), |r| r.initial_code.clone());
            pairs.push((SwiftUnit::new(f.file.clone(), initial), SwiftUnit::new(f.file.clone(), a.code)));
        }
        Ok((manifest, pairs))
    }

    fn check_all(&self, units: &[SwiftUnit], analysis: &Analysis, owners: &BTreeMap<String, String>, round: usize) -> Result<ValidationReport> {
        let defined = project_definitions(units);
        let symbols = source_symbols(&analysis.classes);
        let ctx = ReferenceContext {
            defined: &defined,
            source_symbols: &symbols,
            allowlist: &self.allowlist,
            residue: &self.residue,
        };
        let reports = self.pool.install(|| {
            units
                .par_iter()
                .map(|u| run_checks(u, &self.checks, &ctx, round))
                .collect::<Result<Vec<_>>>()
        })?;
        let mut merged = ValidationReport::new(round, self.checks.iter().map(|c| c.name().to_string()).collect());
        for r in reports {
            for (file, issues) in r.files {
                merged.touch(&file);
                merged.extend(issues);
            }
        }
        if self.config.validation.graph_diff {
            let mapping = default_mapping(&analysis.class_graph);
            match compare_graphs(&analysis.class_graph, &translated_graph(units), &mapping) {
                Ok(issues) => {
                    let issues = issues.into_iter().filter_map(|mut i| {
                        if !merged.files.contains_key(&i.file) {
                            let stem = i.file.trim_end_matches(".swift");
                            i.file = owners.get(stem)?.clone();
                        }
                        Some(i)
                    });
                    merged.extend(issues.collect::<Vec<_>>());
                }
                Err(Error::Mapping(m)) => warn!(reason = %m, "skipping dependency graph comparison"),
                Err(e) => return Err(e),
            }
        }
        Ok(merged)
    }

    fn validate(&mut self) -> Result<String> {
        let analysis = self.load_analysis(Stage::Validate)?;
        let (manifest, pairs) = self.load_translation(Stage::Validate)?;
        // simple name of every class -> file holding its top-level ancestor
        let by_name: BTreeMap<&str, &ClassDescriptor> = analysis.classes.iter().map(|c| (c.qualified_name.as_str(), c)).collect();
        let file_of: BTreeMap<&str, &str> = manifest.files.iter().map(|f| (f.class.as_str(), f.file.as_str())).collect();
        let mut owners = BTreeMap::new();
        for c in &analysis.classes {
            let mut top = c;
            while let Some(outer) = top.outer.as_deref().and_then(|o| by_name.get(o)) {
                top = outer;
            }
            if let Some(f) = file_of.get(top.qualified_name.as_str()) {
                owners.entry(c.simple_name.clone()).or_insert_with(|| f.to_string());
            }
        }
        let (before, after): (Vec<SwiftUnit>, Vec<SwiftUnit>) = pairs.into_iter().unzip();
        let before = self.check_all(&before, &analysis, &owners, 0)?;
        let after = self.check_all(&after, &analysis, &owners, 1)?;
        write_json(&self.out(BEFORE_FILE), &before)?;
        write_json(&self.out(AFTER_FILE), &after)?;
        for f in &manifest.files {
            self.state.units.insert(f.unit.clone(), UnitStatus::Validated);
        }
        Ok(format!(
            "{} files: {} errors before, {} after; {} valid after",
            after.files.len(),
            before.error_count(),
            after.error_count(),
            after.valid_files()
        ))
    }

    fn report(&mut self) -> Result<String> {
        self.require(Stage::Report, Stage::Validate)?;
        let before: ValidationReport = read_json(&self.out(BEFORE_FILE))?;
        let after: ValidationReport = read_json(&self.out(AFTER_FILE))?;
        let metrics = compute_project_metrics(&self.config.project, &before, &after)?;
        let total = aggregate_metrics(std::slice::from_ref(&metrics))?;
        let issues: Vec<_> = after.issues().cloned().collect();
        let ids: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
        let s = &self.config.sample;
        let sample = review_sample(&ids, s.confidence, s.margin, self.state.seed)?;
        let chosen: BTreeSet<&str> = sample.selected.iter().map(String::as_str).collect();
        let labels: Vec<_> = issues
            .iter()
            .zip(&ids)
            .filter(|(_, id)| chosen.contains(id.as_str()))
            .map(|(i, _)| classify_issue(i))
            .collect();
        let taxonomy = taxonomy_rows(&count_labels(&labels), labels.len())?;
        let report = Report {
            projects: vec![metrics],
            total,
            taxonomy,
            sample: Some(sample),
        };
        write_atomic(&self.out(REPORT_JSON), emit_report(&report, ReportFormat::Json)?.as_bytes())?;
        write_atomic(&self.out(REPORT_MD), emit_report(&report, ReportFormat::Markdown)?.as_bytes())?;
        Ok(format!("{} issues, {} sampled", issues.len(), labels.len()))
    }
}

struct CountingBackend<'a> {
    inner: &'a dyn TranslationBackend,
    calls: &'a AtomicUsize,
}

impl TranslationBackend for CountingBackend<'_> {
    fn name(&self) -> &str {
        self.inner.name()
    }

    fn complete(
        &self,
        env: &PromptEnvelope,
        cfg: &crate::backend::BackendConfig,
    ) -> std::result::Result<String, crate::backend::BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(env, cfg)
    }
}

/// Everything prompt rendering needs for one translate pass.
struct TranslateContext<'a> {
    analysis: &'a Analysis,
    plan: TranslationPlan,
    kb: Option<KnowledgeBase>,
    classes: BTreeMap<&'a str, &'a ClassDescriptor>,
    methods: BTreeMap<&'a str, (&'a ClassDescriptor, &'a MethodDescriptor)>,
    sources: BTreeMap<String, Ast>,
    symbols: BTreeMap<String, String>,
    resources: String,
    configuration: String,
}

impl TranslateContext<'static> {
    fn load(p: &Pipeline, stage: Stage) -> Result<Self> {
        let plan = p.load_plan(stage)?;
        let kb = p.load_kb(stage)?;
        // The analysis is read-only for the whole pass; leaking it keeps the
        // borrowing maps simple.
        let analysis: &'static Analysis = Box::leak(Box::new(p.load_analysis(stage)?));
        let classes = analysis.classes.iter().map(|c| (c.qualified_name.as_str(), c)).collect();
        let methods = analysis
            .classes
            .iter()
            .flat_map(|c| c.methods.iter().map(move |m| (m.id.as_str(), (c, m))))
            .collect();
        let files: BTreeSet<&str> = analysis.classes.iter().map(|c| c.file.as_str()).collect();
        let root = &p.config.source_root;
        let sources = p.pool.install(|| {
            files
                .par_iter()
                .map(|f| {
                    let path = root.join(f);
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                    Ok((f.to_string(), parse_source(&SourceFile::java(*f, text))?))
                })
                .collect::<Result<BTreeMap<_, _>>>()
        })?;
        let (resources, configuration) = project_files(root, &p.config.output_root);
        Ok(Self {
            symbols: source_symbols(&analysis.classes),
            analysis,
            plan,
            kb,
            classes,
            methods,
            sources,
            resources,
            configuration,
        })
    }
}

impl TranslateContext<'_> {
    fn retrieve(&self, p: &Pipeline, query: &str) -> Result<Vec<RetrievalResult>> {
        match (&self.kb, p.embedder.as_deref()) {
            (Some(kb), Some(embedder)) if !kb.index.is_empty() => {
                let counting = CountingEmbedder {
                    inner: embedder,
                    calls: &p.embed_calls,
                };
                kb.query(&counting, query, p.config.knowledge.top_k)
            }
            _ => Ok(Vec::new()),
        }
    }

    fn finish(&self, p: &Pipeline, level: PromptLevel, inputs: PromptInputs, query: &str) -> Result<PromptEnvelope> {
        let inputs = inputs.retrieved(self.retrieve(p, query)?);
        truncate_context(&p.templates.render(level, &inputs)?, p.config.budget)
    }

    fn class_ast(&self, class: &ClassDescriptor, depth: usize) -> String {
        self.sources
            .get(&class.file)
            .and_then(|ast| ast.root.walk().into_iter().find(|n| n.span == class.span).map(|n| n.to_sexp(depth)))
            .unwrap_or_default()
    }

    fn method_prompt(&self, p: &Pipeline, id: &str) -> Result<PromptEnvelope> {
        let (class, m) = self
            .methods
            .get(id)
            .ok_or_else(|| Error::Integrity(format!("planned method {id} is not in the analysis")))?;
        let source = &self.sources[&class.file].source;
        let code = method_body(source, m)?;
        let inputs = PromptInputs::new(id)
            .slot("method_name", &m.name, id)
            .slot("file_name", &class.file, &class.file)
            .slot("method_code", code, format!("{}@{}..{}", class.file, m.span.start, m.span.end))
            .slot("ast", m.ast_slice.to_sexp(METHOD_AST_DEPTH), id);
        self.finish(p, PromptLevel::Method, inputs, code)
    }

    fn class_prompt(&self, p: &Pipeline, id: &str, done: &BTreeMap<String, String>) -> Result<PromptEnvelope> {
        let class = self.classes[id];
        let content = &self.sources[&class.file].source.text[class.span.start..class.span.end];
        let methods = self
            .plan
            .classes()
            .find(|c| c.name == id)
            .map(|c| c.methods.as_slice())
            .unwrap_or_default();
        let translated: Vec<&str> = methods
            .iter()
            .filter_map(|m| done.get(&unit_key(UnitLevel::Method, m)).map(String::as_str))
            .collect();
        let inputs = PromptInputs::new(id)
            .slot("class_name", &class.simple_name, id)
            .slot("class_content", content, format!("{}@{}..{}", class.file, class.span.start, class.span.end))
            .slot("translated_methods", translated.join("\n\n"), "method units")
            .slot("ast", self.class_ast(class, CLASS_AST_DEPTH), id)
            .slot("dependency", dependency_text(&self.analysis.class_graph, &BTreeSet::from([id])), "class graph");
        self.finish(p, PromptLevel::Class, inputs, content)
    }

    fn component_prompt(&self, p: &Pipeline, id: &str, done: &BTreeMap<String, String>) -> Result<PromptEnvelope> {
        let classes: Vec<&ClassDescriptor> = self
            .plan
            .components
            .iter()
            .find(|c| c.name == id)
            .map(|c| c.classes.iter().map(|cp| self.classes[cp.name.as_str()]).collect())
            .unwrap_or_default();
        let translated: Vec<String> = classes
            .iter()
            .filter(|c| c.outer.is_none())
            .filter_map(|c| {
                done.get(&unit_key(UnitLevel::Class, &c.qualified_name))
                    .map(|code| format!("// File: {}\n{code}", swift_path(c)))
            })
            .collect();
        let ast: Vec<String> = classes.iter().map(|c| self.class_ast(c, COMPONENT_AST_DEPTH)).collect();
        let names: Vec<&str> = classes.iter().map(|c| c.simple_name.as_str()).collect();
        let inputs = PromptInputs::new(id)
            .slot("component_name", id, id)
            .slot("translated_classes", translated.join("\n\n"), "class units")
            .slot("ast", ast.join("\n"), id)
            .slot("dependency", dependency_text(&self.analysis.component_graph, &BTreeSet::from([id])), "component graph");
        self.finish(p, PromptLevel::Component, inputs, &format!("{id} {}", names.join(" ")))
    }

    fn project_prompt(&self, p: &Pipeline, done: &BTreeMap<String, String>) -> Result<PromptEnvelope> {
        let translated: Vec<String> = self
            .plan
            .components
            .iter()
            .filter_map(|c| {
                done.get(&unit_key(UnitLevel::Component, &c.name))
                    .map(|code| format!("// Component: {}\n{code}", c.name))
            })
            .collect();
        let all: BTreeSet<&str> = self.analysis.component_graph.nodes.iter().map(String::as_str).collect();
        let names: Vec<&str> = all.iter().copied().collect();
        let inputs = PromptInputs::new(PROJECT_UNIT)
            .slot("translated_components", translated.join("\n\n"), "component units")
            .slot("dependency", dependency_text(&self.analysis.component_graph, &all), "component graph")
            .slot("resources", &self.resources, "source tree")
            .slot("configuration", &self.configuration, "source tree");
        self.finish(p, PromptLevel::Project, inputs, &format!("{} {}", p.config.project, names.join(" ")))
    }
}

const CONFIG_FILES: [&str; 5] = ["AndroidManifest.xml", "build.gradle", "build.gradle.kts", "settings.gradle", "gradle.properties"];

/// Resource listing and build configuration text for the project prompt.
fn project_files(root: &Path, skip: &Path) -> (String, String) {
    let mut resources = Vec::new();
    let mut configuration = Vec::new();
    for path in walk_files(root, skip) {
        let rel = relative_path(root, &path);
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        if CONFIG_FILES.contains(&name.as_str()) {
            if let Ok(text) = std::fs::read_to_string(&path) {
                configuration.push(format!("=== {rel} ===\n{}", text.trim_end()));
            }
        } else if rel.split('/').any(|part| part == "res" || part == "assets") {
            resources.push(rel);
        }
    }
    let or = |v: Vec<String>, sep: &str, none: &str| if v.is_empty() { none.to_string() } else { v.join(sep) };
    (
        or(resources, "\n", "no resource files found"),
        or(configuration, "\n\n", "no build configuration found"),
    )
}

/// Hash of everything that determines the run's artifacts. The output
/// location is excluded so that runs can be compared across directories.
fn input_hash(config: &RunConfig) -> Result<String> {
    let mut h = InputHasher::default();
    let mut cfg = serde_json::to_value(config).map_err(|e| Error::json("run config", e))?;
    if let Some(obj) = cfg.as_object_mut() {
        obj.remove("output_root");
        obj.remove("parallelism");
    }
    h.add("config", cfg.to_string().as_bytes());
    let mut roots = vec![config.source_root.clone()];
    if let Some(d) = &config.knowledge.docs_root {
        roots.push(d.clone());
    }
    if let Some(d) = &config.templates_dir {
        roots.push(d.clone());
    }
    let extra = [
        config.validation.residue_rules.as_ref(),
        config.validation.allowlist.as_ref(),
        config.backend.as_ref().and_then(|b| b.config.mock_rules.as_ref()),
    ];
    for root in &roots {
        for path in walk_files(root, &config.output_root) {
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            h.add(&relative_path(root, &path), &bytes);
        }
    }
    for path in extra.into_iter().flatten() {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        h.add(&path.to_string_lossy(), &bytes);
    }
    Ok(h.finish())
}
