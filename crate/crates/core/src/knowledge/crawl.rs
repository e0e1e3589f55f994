use std::collections::{BTreeMap, HashSet, VecDeque};
use std::sync::LazyLock;
use std::time::Duration;

use regex::Regex;
use tracing::{info, warn};
use url::Url;

use super::chunk::{ChunkKind, ChunkSink, ChunkingConfig, DocumentChunk};
use crate::error::{Error, Result};

pub trait Fetcher: Send + Sync {
    /// Body of the page at `url`, or a message describing the failure.
    fn fetch(&self, url: &Url) -> std::result::Result<String, String>;
}

pub struct HttpFetcher {
    agent: ureq::Agent,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { agent }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &Url) -> std::result::Result<String, String> {
        let mut resp = self.agent.get(url.as_str()).call().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(format!("status {status}"));
        }
        resp.body_mut().read_to_string().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CrawlOutcome {
    pub chunks: Vec<DocumentChunk>,
    pub visited: Vec<String>,
    pub skipped: Vec<(String, String)>,
}

static HREF: LazyLock<Regex> = LazyLock::new(|| Regex::new(r#"(?i)href\s*=\s*["']([^"'#]*)(#[^"']*)?["']"#).unwrap());
static SCRIPT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?is)<(script|style)\b.*?</(script|style)\s*>").unwrap());
static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<[^>]*>").unwrap());
static BLANKS: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"[ \t]+").unwrap());
static LINES: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\n\s*\n+").unwrap());

/// Visible text of an HTML document.
pub fn html_to_text(html: &str) -> String {
    let no_script = SCRIPT.replace_all(html, " ");
    let no_tags = TAG.replace_all(&no_script, "\n");
    let decoded = no_tags
        .replace("&nbsp;", " ")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&amp;", "&");
    let spaced = BLANKS.replace_all(&decoded, " ");
    let lines: Vec<&str> = spaced.lines().map(str::trim).collect();
    LINES.replace_all(lines.join("\n").trim(), "\n").into_owned()
}

fn links(base: &Url, html: &str) -> Vec<Url> {
    HREF.captures_iter(html)
        .filter_map(|c| base.join(&c[1]).ok())
        .map(|mut u| {
            u.set_fragment(None);
            u
        })
        .filter(|u| matches!(u.scheme(), "http" | "https"))
        .collect()
}

/// Breadth-first crawl restricted to the start host. Pages that fail to load
/// are recorded as skipped; only an unreachable start page is an error.
pub fn crawl_site(
    start: &str,
    max_depth: usize,
    max_pages: usize,
    fetcher: &dyn Fetcher,
    chunking: ChunkingConfig,
    first_id: usize,
) -> Result<CrawlOutcome> {
    chunking.validate()?;
    let mut start = Url::parse(start).map_err(|e| Error::Config(format!("invalid crawl url {start}: {e}")))?;
    start.set_fragment(None);
    let mut out = CrawlOutcome::default();
    if max_pages == 0 {
        return Ok(out);
    }
    let host = start.host_str().map(str::to_string);
    let mut sink = ChunkSink::default();
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start.clone(), 0usize)]);
    while let Some((url, depth)) = queue.pop_front() {
        if out.visited.len() >= max_pages {
            break;
        }
        let body = match fetcher.fetch(&url) {
            Ok(b) => b,
            Err(msg) if url == start => {
                return Err(Error::Retrieval(format!("cannot reach {url}: {msg}")));
            }
            Err(msg) => {
                warn!(%url, %msg, "skipping page");
                out.skipped.push((url.to_string(), msg));
                continue;
            }
        };
        out.visited.push(url.to_string());
        let metadata = BTreeMap::from([("depth".to_string(), depth.to_string())]);
        sink.push_document(url.as_str(), ChunkKind::WebPage, &html_to_text(&body), &metadata, chunking);
        if depth < max_depth {
            for next in links(&url, &body) {
                if next.host_str().map(str::to_string) == host && seen.insert(next.clone()) {
                    queue.push_back((next, depth + 1));
                }
            }
        }
    }
    info!(pages = out.visited.len(), skipped = out.skipped.len(), "crawl finished");
    out.chunks = sink
        .chunks
        .into_iter()
        .map(|mut c| {
            c.id += first_id;
            c
        })
        .collect();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    struct MapFetcher(BTreeMap<String, String>);

    impl Fetcher for MapFetcher {
        fn fetch(&self, url: &Url) -> std::result::Result<String, String> {
            self.0.get(url.as_str()).cloned().ok_or_else(|| "404".to_string())
        }
    }

    fn site() -> MapFetcher {
        MapFetcher(BTreeMap::from([
            (
                "http://docs.test/".to_string(),
                r#"<a href="/a">A</a><a href="b#x">B</a><a href="http://other.test/">O</a><a href="/missing">M</a>"#.to_string(),
            ),
            ("http://docs.test/a".to_string(), r#"<p>page a</p><a href="/deep">D</a>"#.to_string()),
            ("http://docs.test/b".to_string(), "<p>page b</p>".to_string()),
            ("http://docs.test/deep".to_string(), "<p>deep</p>".to_string()),
        ]))
    }

    #[test]
    fn html_text_strips_markup() {
        let html = "<html><head><style>p{}</style><script>var x=1;</script></head><body><h1>Title</h1><p>A &amp; B</p></body></html>";
        assert_eq!(html_to_text(html), "Title\nA & B");
    }

    #[test]
    fn depth_and_host_are_respected() {
        let out = crawl_site("http://docs.test/", 1, 10, &site(), ChunkingConfig::default(), 0).unwrap();
        assert_eq!(out.visited, ["http://docs.test/", "http://docs.test/a", "http://docs.test/b"]);
        assert_eq!(out.skipped.len(), 1);
        assert!(out.chunks.iter().all(|c| c.kind == ChunkKind::WebPage));
    }

    #[test]
    fn page_limit_and_zero_pages() {
        let out = crawl_site("http://docs.test/", 5, 2, &site(), ChunkingConfig::default(), 0).unwrap();
        assert_eq!(out.visited.len(), 2);
        let none = crawl_site("http://docs.test/", 5, 0, &site(), ChunkingConfig::default(), 0).unwrap();
        assert!(none.visited.is_empty() && none.chunks.is_empty());
    }

    #[test]
    fn unreachable_start_is_error() {
        let err = crawl_site("http://nowhere.test/", 1, 5, &site(), ChunkingConfig::default(), 0).unwrap_err();
        assert!(matches!(err, Error::Retrieval(_)));
    }

    #[test]
    fn http_fetcher_against_local_server() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        let server = std::thread::spawn(move || {
            for _ in 0..2 {
                let (mut stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut request_line = String::new();
                reader.read_line(&mut request_line).unwrap();
                loop {
                    let mut l = String::new();
                    if reader.read_line(&mut l).unwrap() == 0 || l == "\r\n" {
                        break;
                    }
                }
                let body = if request_line.contains(" / ") {
                    "<a href=\"/next\">n</a> root".to_string()
                } else {
                    "<p>next page</p>".to_string()
                };
                write!(
                    stream,
                    "HTTP/1.1 200 OK\r\nContent-Type: text/html\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
                    body.len(),
                    body
                )
                .unwrap();
            }
        });
        let fetcher = HttpFetcher::new(Duration::from_secs(5));
        let out = crawl_site(&format!("http://127.0.0.1:{port}/"), 1, 5, &fetcher, ChunkingConfig::default(), 7).unwrap();
        server.join().unwrap();
        assert_eq!(out.visited.len(), 2);
        assert_eq!(out.chunks[0].id, 7);
        assert_eq!(out.chunks[1].text, "next page");
    }
}
