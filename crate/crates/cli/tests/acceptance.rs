//! Acceptance suite: one PASS/FAIL line per criterion. Exits nonzero if any
//! criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transmigrate_core::backend::{BackendConfig, MockBackend, RepairMode, RewriteRule, RuleTable};
use transmigrate_core::knowledge::{
    build_index, ChunkKind, DocumentChunk, Embedder, HashedEmbedder, KnowledgeBase, RetrievalResult,
};
use transmigrate_core::pipeline::{Pipeline, RunConfig, RunOptions};
use transmigrate_core::prompt::{PromptInputs, PromptLevel, TemplateSet};
use transmigrate_core::report::{aggregate_metrics, percent, sample_size, taxonomy_rows, ProjectMetrics, TaxonomyCategory};
use transmigrate_core::scheduler::order_items;
use transmigrate_core::source::{DependencyGraph, EdgeKind, Granularity};
use transmigrate_core::validation::{
    check_registry, parse_diagnostic_line, Allowlist, CheckSettings, IssueSource, ReferenceContext, Refiner,
    ResidueRules, Severity, SwiftUnit,
};
use transmigrate_core::Error;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

fn ensure(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

fn workspace() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn aggregation() -> Outcome {
    let rows = [
        ("LeafPic", 132, (46.2, 78.7), (13, 0), (68, 28)),
        ("WeatherApp", 39, (69.2, 94.9), (0, 0), (12, 2)),
        ("AndroidTvMovie", 34, (70.6, 85.3), (0, 0), (10, 5)),
        ("MinimalToDo", 27, (0.0, 44.4), (2, 0), (25, 15)),
        ("NextCloud", 955, (43.0, 68.7), (115, 0), (429, 298)),
    ];
    let metrics: Vec<ProjectMetrics> = rows
        .iter()
        .map(|&(p, f, v, s, l)| ProjectMetrics::from_row(p, f, v, s, l))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let total = aggregate_metrics(&metrics).map_err(|e| e.to_string())?;
    let oracle = rows.iter().fold((0, 0, 0, 0, 0), |acc, r| {
        (acc.0 + r.1, acc.1 + r.3 .0, acc.2 + r.3 .1, acc.3 + r.4 .0, acc.4 + r.4 .1)
    });
    let got = (total.total_files, total.syntax_before, total.syntax_after, total.lint_before, total.lint_after);
    ensure(got == oracle && oracle == (1187, 130, 0, 544, 348), || format!("totals {got:?}, oracle {oracle:?}"))?;
    Ok(format!("1187 files, syntax 130->0, lint 544->348 (valid {:.1}% -> {:.1}%)", total.valid_pct_before, total.valid_pct_after))
}

fn taxonomy() -> Outcome {
    let counts = [
        (TaxonomyCategory::InternalReference, 91),
        (TaxonomyCategory::Incomplete, 63),
        (TaxonomyCategory::Linting, 51),
        (TaxonomyCategory::Syntax, 22),
        (TaxonomyCategory::ErrorHandling, 13),
    ];
    let published = [23.95, 16.58, 13.42, 5.79, 3.42];
    let rows = taxonomy_rows(&counts.iter().copied().collect(), 380).map_err(|e| e.to_string())?;
    for ((cat, n), want) in counts.iter().zip(published) {
        let row = rows.iter().find(|r| r.category == *cat).ok_or(format!("no row for {cat:?}"))?;
        // independent oracle: integer hundredths, round half up
        let oracle = ((n * 10_000 * 2 + 380) / (380 * 2)) as f64 / 100.0;
        ensure((row.pct - want).abs() <= 0.005 && (row.pct - oracle).abs() < 1e-9, || {
            format!("{cat:?}: got {}, published {want}, oracle {oracle}", row.pct)
        })?;
    }
    let fp = percent(63, 348, 1).map_err(|e| e.to_string())?;
    ensure((fp - 18.1).abs() <= 0.05, || format!("63/348 gave {fp}"))?;
    Ok(format!("{:?} and {fp}%", rows.iter().take(5).map(|r| r.pct).collect::<Vec<_>>()))
}

fn diagnostics() -> Outcome {
    let listings = [
        (
            "WeatherApp/HTTPWeatherClient.swift:68:1: warning: Trailing Whitespace Violation: Lines should not have trailing whitespace (trailing_whitespace)",
            ("WeatherApp/HTTPWeatherClient.swift", 68, 1, Severity::Warning, "trailing_whitespace"),
        ),
        (
            "AndroidTvMovie/GlideBackgroundManager.swift:66:1: warning: Line Length Violation: Line should be 120 characters or less; currently it has 194 characters (line_length)",
            ("AndroidTvMovie/GlideBackgroundManager.swift", 66, 1, Severity::Warning, "line_length"),
        ),
    ];
    for (line, (file, l, c, sev, rule)) in listings {
        let issue = parse_diagnostic_line(line, IssueSource::Lint).ok_or(format!("did not parse: {line}"))?;
        let got = (issue.file.as_str(), issue.line, issue.column, issue.severity, issue.rule.as_deref());
        ensure(got == (file, Some(l), Some(c), sev, Some(rule)), || format!("{got:?}"))?;
        ensure(issue.to_string() == line, || format!("re-formatted as {issue}"))?;
    }
    Ok("2 listings parsed and re-formatted byte-identically".into())
}

fn graph(n: usize, edges: &[(usize, usize)], names: &[String]) -> DependencyGraph {
    DependencyGraph::from_edges(
        Granularity::Class,
        names[..n].iter().map(String::as_str),
        edges.iter().map(|&(a, b)| (names[a].as_str(), names[b].as_str(), EdgeKind::Call)),
    )
}

/// Checks `order` against reachability computed by transitive closure:
/// a permutation, SCC members contiguous, and every dependency's SCC
/// placed before its dependent's.
fn verify_order(n: usize, edges: &[(usize, usize)], names: &[String], order: &[String]) -> Result<bool, String> {
    let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    ensure(order.len() == n && pos.len() == n && names[..n].iter().all(|s| pos.contains_key(s.as_str())), || {
        format!("not a permutation: {order:?}")
    })?;
    let mut reach = vec![vec![false; n]; n];
    for (i, row) in reach.iter_mut().enumerate() {
        row[i] = true;
    }
    for &(a, b) in edges {
        reach[a][b] = true;
    }
    for k in 0..n {
        let via = reach[k].clone();
        for row in reach.iter_mut().filter(|row| row[k]) {
            for (cell, &r) in row.iter_mut().zip(&via) {
                *cell |= r;
            }
        }
    }
    let p = |i: usize| pos[names[i].as_str()];
    let mut cyclic = false;
    for i in 0..n {
        let members: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        cyclic |= members.len() > 1 || edges.contains(&(i, i));
        let (lo, hi) = members.iter().fold((usize::MAX, 0), |(lo, hi), &j| (lo.min(p(j)), hi.max(p(j))));
        ensure(hi - lo + 1 == members.len(), || format!("SCC of {} split in {order:?}", names[i]))?;
    }
    for &(a, b) in edges {
        let same = reach[a][b] && reach[b][a];
        ensure(same || p(b) < p(a), || format!("{} -> {} violated in {order:?}", names[a], names[b]))?;
    }
    Ok(cyclic)
}

fn scheduler() -> Outcome {
    let names: Vec<String> = (0..12).map(|i| format!("n{i:02}")).collect();
    let check = |n: usize, edges: &[(usize, usize)]| -> Result<bool, String> {
        let g = graph(n, edges, &names);
        let first = order_items(&g);
        for _ in 0..2 {
            ensure(order_items(&g) == first, || format!("nondeterministic on {edges:?}"))?;
        }
        verify_order(n, edges, &names, &first).map_err(|e| format!("{e} (edges {edges:?})"))
    };
    let mut exhaustive = 0usize;
    let mut cyclic = 0usize;
    for n in 0..=5usize {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect();
        let total = 1u64 << pairs.len();
        let results: Vec<Result<(usize, usize), String>> = std::thread::scope(|s| {
            let workers = std::thread::available_parallelism().map_or(4, |p| p.get()) as u64;
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let pairs = &pairs;
                    let check = &check;
                    s.spawn(move || {
                        let (mut seen, mut cyc) = (0, 0);
                        let mut mask = w;
                        while mask < total {
                            let edges: Vec<(usize, usize)> =
                                pairs.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, e)| *e).collect();
                            cyc += check(n, &edges)? as usize;
                            seen += 1;
                            mask += workers;
                        }
                        Ok((seen, cyc))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for r in results {
            let (s, c) = r?;
            exhaustive += s;
            cyclic += c;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut random_cyclic = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=12);
        let density: f64 = rng.random_range(0.0..0.4);
        let mut edges = Vec::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.random_bool(density) {
                    edges.push((a, b));
                }
            }
        }
        random_cyclic += check(n, &edges)? as usize;
    }
    Ok(format!(
        "{exhaustive} exhaustive graphs ({cyclic} cyclic), 1000 random ({random_cyclic} cyclic), 3 identical runs each"
    ))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn retrieval() -> Outcome {
    const WORDS: &[&str] = &[
        "swift", "array", "optional", "view", "controller", "lifecycle", "activity", "intent", "bundle", "logger",
        "network", "session", "request", "json", "decoder", "storage", "defaults", "core", "data", "thread",
        "queue", "dispatch", "closure", "protocol", "delegate", "table", "cell", "image", "cache", "layout",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sentence = |rng: &mut ChaCha8Rng| -> String {
        let len = rng.random_range(3..25);
        (0..len).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
    };
    let chunks: Vec<DocumentChunk> = (0..1000)
        .map(|id| DocumentChunk {
            id,
            source_uri: format!("file://doc{id}.md"),
            kind: ChunkKind::ApiDoc,
            text: sentence(&mut rng),
            metadata: BTreeMap::new(),
        })
        .collect();
    let embedder = HashedEmbedder::new(256).map_err(|e| e.to_string())?;
    let index = build_index(&chunks, &embedder).map_err(|e| e.to_string())?;
    let kb = KnowledgeBase::new(chunks.clone(), index).map_err(|e| e.to_string())?;
    let vectors: Vec<Vec<f64>> = chunks.iter().map(|c| embedder.embed(&c.text).unwrap().0).collect();
    for _ in 0..100 {
        let q = sentence(&mut rng);
        let qv = embedder.embed(&q).map_err(|e| e.to_string())?.0;
        let mut brute: Vec<(usize, f64)> = vectors.iter().enumerate().map(|(i, v)| (i, cosine(v, &qv))).collect();
        brute.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        for k in [1, 3, 10] {
            let got = kb.query(&embedder, &q, k).map_err(|e| e.to_string())?;
            let got_ids: Vec<usize> = got.iter().map(|r| r.chunk.id).collect();
            let want: Vec<usize> = brute[..k].iter().map(|(i, _)| *i).collect();
            // ids must match unless the boundary is a floating-point tie
            let tie_ok = got.iter().zip(&brute[..k]).all(|(r, (_, s))| (r.score - s).abs() < 1e-12);
            ensure(got_ids == want || tie_ok, || format!("k={k} query `{q}`: {got_ids:?} vs {want:?}"))?;
        }
    }
    Ok("100 queries x k in {1, 3, 10} over 1000 chunks match brute force".into())
}

const PLANTED: &str = "class Unit{n} {\n    let init = {n}\n    var init = 2\n}\n";

fn refinement() -> Outcome {
    let checks = vec![check_registry().create("stub-syntax", &CheckSettings::default()).map_err(|e| e.to_string())?];
    let (defined, symbols) = (BTreeSet::new(), BTreeMap::new());
    let (allowlist, residue) = (Allowlist::builtin(), ResidueRules::builtin());
    let ctx = ReferenceContext {
        defined: &defined,
        source_symbols: &symbols,
        allowlist: &allowlist,
        residue: &residue,
    };
    let templates = TemplateSet::default();
    let cfg = BackendConfig::default();
    let mock = |mode| {
        MockBackend::new(RuleTable {
            repair: vec![RewriteRule {
                pattern: r"(let|var) init\b".into(),
                replacement: "${1} initial".into(),
            }],
            repair_mode: mode,
            ..RuleTable::default()
        })
    };
    let units: Vec<SwiftUnit> = (0..20)
        .map(|n| SwiftUnit::new(format!("Unit{n}.swift"), PLANTED.replace("{n}", &n.to_string())))
        .collect();
    for (mode, label) in [(RepairMode::None, "never-fixing"), (RepairMode::One, "one-fix")] {
        let backend = mock(mode);
        let refiner = Refiner {
            backend: &backend,
            backend_config: &cfg,
            templates: &templates,
            checks: &checks,
            context: &ctx,
            max_rounds: 3,
        };
        for unit in &units {
            let before = backend.calls(PromptLevel::Repair);
            let out = refiner.refine(unit.clone()).map_err(|e| e.to_string())?;
            let calls = backend.calls(PromptLevel::Repair) - before;
            let initial = out.state.history[0].1.error_count();
            ensure(initial == 2, || format!("{}: {initial} planted issues detected", unit.file))?;
            let errors = out.final_report().error_count();
            match mode {
                RepairMode::None => ensure(calls == 3 && out.repair_calls == 3, || format!("{label} {}: {calls} calls", unit.file))?,
                _ => ensure(out.state.round == 2 && errors == 0 && calls == 2, || {
                    format!("{label} {}: round {}, {errors} issues", unit.file, out.state.round)
                })?,
            }
        }
    }
    Ok("never-fixing: 3 repair calls on each of 20 units; one-fix: round 2, zero issues on each".into())
}

fn golden(name: &str) -> Result<String, String> {
    let path = workspace().join("fixtures/golden").join(name);
    std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))
}

fn prompts() -> Outcome {
    let t = TemplateSet::default();
    let doc = RetrievalResult {
        chunk: DocumentChunk {
            id: 0,
            source_uri: "file:///docs/swift-collections.md".into(),
            kind: ChunkKind::ApiDoc,
            text: "Swift arrays are value types.".into(),
            metadata: BTreeMap::new(),
        },
        score: 0.5,
    };
    let cases = [
        (
            PromptLevel::Method,
            "method.txt",
            PromptInputs::new("com.example.notes.data.Note#getTitle")
                .slot("method_name", "getTitle", "m")
                .slot("file_name", "app/src/main/java/com/example/notes/data/Note.java", "m")
                .slot("method_code", "public String getTitle() {\n    return title;\n}", "m")
                .slot("ast", "(method_declaration (modifiers) (type_identifier) (identifier) (formal_parameters) (block))", "m"),
        ),
        (
            PromptLevel::Class,
            "class.txt",
            PromptInputs::new("com.example.notes.data.Note")
                .slot("class_name", "Note", "c")
                .slot("class_content", "public class Note {\n    private final String title;\n}", "c")
                .slot("translated_methods", "func getTitle() -> String {\n    return title\n}", "c")
                .slot("ast", "(class_declaration (modifiers) (identifier) (class_body))", "c")
                .slot("dependency", "com.example.notes.data.NoteStore -> com.example.notes.data.Note (field-type)", "c")
                .retrieved(vec![doc]),
        ),
        (
            PromptLevel::Component,
            "component.txt",
            PromptInputs::new("com.example.notes.data")
                .slot("component_name", "com.example.notes.data", "k")
                .slot("translated_classes", "// File: com/example/notes/data/Note.swift\nclass Note {}", "k")
                .slot("ast", "(class_declaration)", "k")
                .slot("dependency", "no dependencies", "k"),
        ),
        (
            PromptLevel::Project,
            "project.txt",
            PromptInputs::new("project")
                .slot("translated_components", "// Component: com.example.notes.data\nclass Note {}", "p")
                .slot("dependency", "com.example.notes -> com.example.notes.data (import)", "p")
                .slot("resources", "app/src/main/res/values/strings.xml", "p")
                .slot(
                    "configuration",
                    "=== app/src/main/AndroidManifest.xml ===\n<manifest package=\"com.example.notes\" />",
                    "p",
                ),
        ),
    ];
    for (level, file, inputs) in cases {
        let env = t.render(level, &inputs).map_err(|e| e.to_string())?;
        let want = golden(file)?;
        if env.rendered_text != want {
            let line = env.rendered_text.lines().zip(want.lines()).position(|(a, b)| a != b);
            return Err(format!("{file} differs (first differing line {line:?})"));
        }
    }
    Ok("method, class, component and project prompts match golden files".into())
}

struct RunResult {
    json: Vec<u8>,
    md: Vec<u8>,
    calls: usize,
}

fn fixture_run(out: &Path, halt: Option<usize>) -> Result<RunResult, String> {
    let root = workspace().join("fixtures/sample-app");
    let mut config = RunConfig::load(&root.join("config.json")).map_err(|e| e.to_string())?;
    config.output_root = out.to_path_buf();
    let rules = config.backend.as_ref().and_then(|b| b.config.mock_rules.clone()).ok_or("fixture has no mock rules")?;
    let backend = Arc::new(MockBackend::try_new(RuleTable::load(&rules).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?);
    let options = RunOptions {
        halt_after_units: halt,
        ..RunOptions::default()
    };
    let mut p = Pipeline::with_backend(config, options, backend.clone()).map_err(|e| e.to_string())?;
    match (p.run(), halt) {
        (Ok(_), None) => {}
        (Err(Error::Halted { .. }), Some(_)) => {
            return Ok(RunResult {
                json: Vec::new(),
                md: Vec::new(),
                calls: backend.total_calls(),
            })
        }
        (r, _) => return Err(format!("unexpected run result: {:?}", r.map(|_| ()))),
    }
    let read = |f: &str| std::fs::read(out.join(f)).map_err(|e| format!("{f}: {e}"));
    Ok(RunResult {
        json: read("report.json")?,
        md: read("report.md")?,
        calls: backend.total_calls(),
    })
}

fn end_to_end() -> Outcome {
    let dirs: Vec<tempfile::TempDir> = (0..3).map(|_| tempfile::tempdir().map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    let a = fixture_run(dirs[0].path(), None)?;
    let b = fixture_run(dirs[1].path(), None)?;
    let halted = fixture_run(dirs[2].path(), Some(7))?;
    let resumed = fixture_run(dirs[2].path(), None)?;
    ensure(a.json == b.json && a.md == b.md, || "two clean runs differ".into())?;
    ensure(a.json == resumed.json && a.md == resumed.md, || "resumed run differs".into())?;
    ensure(halted.calls + resumed.calls == a.calls, || {
        format!("resume re-sent work: {} + {} calls vs {}", halted.calls, resumed.calls, a.calls)
    })?;
    let expected = workspace().join("fixtures/sample-app/expected");
    let snap_json = std::fs::read(expected.join("report.json")).map_err(|e| format!("snapshot: {e}"))?;
    let snap_md = std::fs::read(expected.join("report.md")).map_err(|e| format!("snapshot: {e}"))?;
    ensure(a.json == snap_json && a.md == snap_md, || "report differs from the stored snapshot".into())?;
    Ok(format!(
        "identical reports across 2 runs and a resume ({} + {} = {} backend calls), matching the snapshot",
        halted.calls, resumed.calls, a.calls
    ))
}

fn sample_sizes() -> Outcome {
    // z for 95% two-sided, from standard normal tables
    let z: f64 = 1.959_963_984_540_054;
    let n0 = z * z * 0.25 / (0.05 * 0.05);
    let oracle_inf = n0.ceil() as u64;
    let oracle_380 = (n0 / (1.0 + (n0 - 1.0) / 380.0)).ceil() as u64;
    let inf = sample_size(None, 0.95, 0.05).map_err(|e| e.to_string())?;
    let fin = sample_size(Some(380), 0.95, 0.05).map_err(|e| e.to_string())?;
    ensure((inf, fin) == (oracle_inf, oracle_380) && (inf, fin) == (385, 192), || {
        format!("got ({inf}, {fin}), oracle ({oracle_inf}, {oracle_380})")
    })?;
    Ok(format!("{inf} (infinite), {fin} (N = 380)"))
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("1 metrics aggregation", aggregation, Some(Duration::from_secs(1))),
        ("2 taxonomy percentages", taxonomy, None),
        ("3 diagnostic parsing", diagnostics, None),
        ("4 scheduler soundness", scheduler, Some(Duration::from_secs(60))),
        ("5 retrieval exactness", retrieval, Some(Duration::from_secs(30))),
        ("6 refinement bound", refinement, None),
        ("7 prompt fidelity", prompts, None),
        ("8 end-to-end determinism", end_to_end, Some(Duration::from_secs(120))),
        ("9 sample size", sample_sizes, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let mut result = run();
        let took = start.elapsed();
        if let (Ok(_), Some(limit)) = (&result, limit) {
            if took > limit {
                result = Err(format!("took {took:.2?}, limit {limit:?}"));
            }
        }
        match result {
            Ok(detail) => println!("PASS {name}: {detail} [{took:.2?}]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{took:.2?}]");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
