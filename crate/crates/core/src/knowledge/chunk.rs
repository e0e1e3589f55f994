use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use tracing::info;
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::source::relative_path;

pub const DEFAULT_CHUNK_SIZE: usize = 1000;
pub const DEFAULT_CHUNK_OVERLAP: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChunkKind {
    Readme,
    ApiDoc,
    CodeComment,
    PullRequest,
    Issue,
    WebPage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentChunk {
    pub id: usize,
    pub source_uri: String,
    pub kind: ChunkKind,
    pub text: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkingConfig {
    pub size: usize,
    pub overlap: usize,
}

impl Default for ChunkingConfig {
    fn default() -> Self {
        Self {
            size: DEFAULT_CHUNK_SIZE,
            overlap: DEFAULT_CHUNK_OVERLAP,
        }
    }
}

impl ChunkingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.size == 0 || self.overlap >= self.size {
            return Err(Error::Config(format!(
                "chunk overlap ({}) must be smaller than a non-zero chunk size ({})",
                self.overlap, self.size
            )));
        }
        Ok(())
    }
}

/// Line-ending normalisation and trimming applied before chunking.
pub fn normalize(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n").trim().to_string()
}

/// Splits text into windows of at most `size` characters, consecutive
/// windows sharing `overlap` characters.
pub fn split_text(text: &str, config: ChunkingConfig) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + config.size).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start = end - config.overlap;
    }
    out
}

/// Accumulates chunks with sequential ids.
#[derive(Debug, Default)]
pub struct ChunkSink {
    pub chunks: Vec<DocumentChunk>,
}

impl ChunkSink {
    pub fn push_document(
        &mut self,
        source_uri: &str,
        kind: ChunkKind,
        text: &str,
        metadata: &BTreeMap<String, String>,
        config: ChunkingConfig,
    ) {
        for piece in split_text(&normalize(text), config) {
            if piece.trim().is_empty() {
                continue;
            }
            self.chunks.push(DocumentChunk {
                id: self.chunks.len(),
                source_uri: source_uri.to_string(),
                kind,
                text: piece,
                metadata: metadata.clone(),
            });
        }
    }
}

/// Kind of a repository document, from its relative path. `None` means the
/// file is not documentation.
pub fn classify_path(rel: &str) -> Option<ChunkKind> {
    let lower = rel.to_ascii_lowercase();
    let name = lower.rsplit('/').next().unwrap_or(&lower);
    let ext = name.rsplit_once('.').map(|(_, e)| e).unwrap_or("");
    let dirs: Vec<&str> = lower.split('/').collect();
    let in_dir = |pat: &[&str]| dirs[..dirs.len() - 1].iter().any(|d| pat.contains(d));

    if ext == "java" {
        return Some(ChunkKind::CodeComment);
    }
    if !matches!(ext, "md" | "markdown" | "txt" | "rst" | "adoc" | "html" | "htm" | "") {
        return None;
    }
    if name.starts_with("readme") {
        Some(ChunkKind::Readme)
    } else if in_dir(&["pulls", "pull_requests", "pull-requests", "prs"]) || name.starts_with("pr-") || name.contains("pull_request") {
        Some(ChunkKind::PullRequest)
    } else if in_dir(&["issues"]) || name.starts_with("issue") {
        Some(ChunkKind::Issue)
    } else if matches!(ext, "html" | "htm") {
        Some(ChunkKind::WebPage)
    } else if ext.is_empty() {
        None
    } else {
        Some(ChunkKind::ApiDoc)
    }
}

/// Collects `//`, `/* */` and `/** */` comment bodies from Java text.
pub fn java_comments(text: &str) -> String {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    let mut in_string: Option<u8> = None;
    while i < bytes.len() {
        let b = bytes[i];
        if let Some(q) = in_string {
            if b == b'\\' {
                i += 2;
                continue;
            }
            if b == q || b == b'\n' {
                in_string = None;
            }
            i += 1;
            continue;
        }
        if b == b'"' || b == b'\'' {
            in_string = Some(b);
            i += 1;
        } else if text[i..].starts_with("//") {
            let end = text[i..].find('\n').map_or(text.len(), |e| i + e);
            out.push(text[i + 2..end].trim().to_string());
            i = end;
        } else if text[i..].starts_with("/*") {
            let end = text[i + 2..].find("*/").map_or(text.len(), |e| i + 2 + e);
            let body = &text[i + 2..end];
            let cleaned: Vec<&str> = body
                .lines()
                .map(|l| l.trim().trim_start_matches('*').trim())
                .filter(|l| !l.is_empty())
                .collect();
            out.push(cleaned.join("\n"));
            i = (end + 2).min(text.len());
        } else {
            i += 1;
        }
    }
    out.retain(|c| !c.is_empty());
    out.join("\n")
}

fn looks_binary(bytes: &[u8]) -> bool {
    bytes.contains(&0) || std::str::from_utf8(bytes).is_err()
}

/// Reads every documentation-like file under `root` (plus comments of Java
/// sources) and chunks it. Directories named in `skip_dirs` and hidden
/// directories are ignored; binary files are skipped with a notice.
pub fn ingest_repository(root: &Path, config: ChunkingConfig, skip_dirs: &[&Path]) -> Result<Vec<DocumentChunk>> {
    config.validate()?;
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a readable directory"),
        ));
    }
    let mut sink = ChunkSink::default();
    let walker = WalkDir::new(root).sort_by_file_name().into_iter().filter_entry(|e| {
        if e.depth() == 0 {
            return true;
        }
        let hidden = e.file_name().to_string_lossy().starts_with('.');
        let skipped = skip_dirs.iter().any(|d| e.path().starts_with(d));
        !hidden && !skipped
    });
    for entry in walker {
        let entry = entry.map_err(|e| {
            let path = e.path().map(Path::to_path_buf).unwrap_or_else(|| root.to_path_buf());
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = relative_path(root, entry.path());
        let Some(kind) = classify_path(&rel) else { continue };
        let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path(), e))?;
        if looks_binary(&bytes) {
            info!(path = %rel, "skipping binary file");
            continue;
        }
        let raw = String::from_utf8(bytes).expect("checked utf-8");
        let text = match kind {
            ChunkKind::CodeComment => java_comments(&raw),
            ChunkKind::WebPage => super::crawl::html_to_text(&raw),
            _ => raw,
        };
        let metadata = BTreeMap::from([("path".to_string(), rel.clone())]);
        sink.push_document(&format!("file://{rel}"), kind, &text, &metadata, config);
    }
    Ok(sink.chunks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_text_is_one_chunk() {
        let text = "x".repeat(250);
        assert_eq!(split_text(&text, ChunkingConfig::default()), vec![text]);
    }

    #[test]
    fn long_text_chunk_count_matches_arithmetic() {
        // ceil((2500 - 100) / (1000 - 100)) = 3
        let text: String = (0..2500).map(|i| char::from(b'a' + (i % 26) as u8)).collect();
        let chunks = split_text(&text, ChunkingConfig::default());
        assert_eq!(chunks.len(), 3);
        assert_eq!(chunks.iter().map(|c| c.chars().count()).collect::<Vec<_>>(), [1000, 1000, 700]);
        for pair in chunks.windows(2) {
            assert_eq!(pair[0][900..], pair[1][..100]);
        }
    }

    #[test]
    fn chunk_sizes_count_characters() {
        let text = "é".repeat(1500);
        let chunks = split_text(&text, ChunkingConfig::default());
        assert_eq!(chunks.len(), 2);
        assert_eq!(chunks[1].chars().count(), 600);
    }

    #[test]
    fn path_classification() {
        assert_eq!(classify_path("README.md"), Some(ChunkKind::Readme));
        assert_eq!(classify_path("docs/api.md"), Some(ChunkKind::ApiDoc));
        assert_eq!(classify_path("pulls/42.md"), Some(ChunkKind::PullRequest));
        assert_eq!(classify_path("issues/7.txt"), Some(ChunkKind::Issue));
        assert_eq!(classify_path("site/index.html"), Some(ChunkKind::WebPage));
        assert_eq!(classify_path("src/A.java"), Some(ChunkKind::CodeComment));
        assert_eq!(classify_path("app/build.gradle"), None);
        assert_eq!(classify_path("img/logo.png"), None);
    }

    #[test]
    fn comments_are_extracted_without_strings() {
        let text = "/** Loads the\n * forecast. */\nclass A { String s = \"// not a comment\"; // trailing\n}";
        assert_eq!(java_comments(text), "Loads the\nforecast.\ntrailing");
    }

    #[test]
    fn ingest_small_repo() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("README.md"), "r".repeat(250)).unwrap();
        std::fs::write(dir.path().join("blob.md"), [0u8, 159, 146, 150]).unwrap();
        let chunks = ingest_repository(dir.path(), ChunkingConfig::default(), &[]).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!(chunks[0].kind, ChunkKind::Readme);
        assert_eq!(chunks[0].metadata["path"], "README.md");
        assert_eq!(chunks[0].source_uri, "file://README.md");
    }

    #[test]
    fn ingest_empty_repo() {
        let dir = tempfile::tempdir().unwrap();
        assert!(ingest_repository(dir.path(), ChunkingConfig::default(), &[]).unwrap().is_empty());
    }

    #[test]
    fn ingest_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("docs")).unwrap();
        std::fs::write(dir.path().join("docs/guide.md"), "g ".repeat(900)).unwrap();
        std::fs::write(dir.path().join("A.java"), "// hello\nclass A {}").unwrap();
        let a = ingest_repository(dir.path(), ChunkingConfig::default(), &[]).unwrap();
        let b = ingest_repository(dir.path(), ChunkingConfig::default(), &[]).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
        assert!(a.iter().enumerate().all(|(i, c)| c.id == i));
    }

    #[test]
    fn bad_overlap_rejected() {
        let cfg = ChunkingConfig { size: 10, overlap: 10 };
        assert!(cfg.validate().is_err());
    }
}
