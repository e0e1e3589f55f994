use std::hash::Hasher;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::registry::Registry;

pub const DEFAULT_DIMENSION: usize = 256;

/// Dense embedding; unit Euclidean norm for any text with at least one token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &EmbeddingVector) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    /// Cosine similarity; zero when either vector is zero.
    pub fn cosine(&self, other: &EmbeddingVector) -> f64 {
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            (self.dot(other) / denom).clamp(-1.0, 1.0)
        }
    }

    fn normalized(mut self) -> Self {
        let n = self.norm();
        if n > 0.0 {
            for x in &mut self.0 {
                *x /= n;
            }
        }
        self
    }
}

pub trait Embedder: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Lowercased alphanumeric tokens.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = fnv::FnvHasher::default();
    h.write(bytes);
    h.finish()
}

/// Offline bag-of-tokens embedder: every token is hashed (FNV-1a) into one
/// of `dimension` buckets and the counts are L2-normalised.
#[derive(Debug, Clone)]
pub struct HashedEmbedder {
    dimension: usize,
}

impl HashedEmbedder {
    pub fn new(dimension: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        Ok(Self { dimension })
    }

    pub fn bucket(&self, token: &str) -> usize {
        (fnv1a(token.as_bytes()) % self.dimension as u64) as usize
    }
}

impl Embedder for HashedEmbedder {
    fn name(&self) -> &str {
        "hashed"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut v = vec![0.0; self.dimension];
        for token in tokenize(text) {
            v[self.bucket(&token)] += 1.0;
        }
        Ok(EmbeddingVector(v).normalized())
    }
}

/// Remote embedding service: `POST {"input": text}` answered by
/// `{"embedding": [..]}`.
pub struct RemoteEmbedder {
    endpoint: String,
    dimension: usize,
    retries: u32,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    input: &'a str,
}

#[derive(Deserialize)]
struct EmbedResponse {
    embedding: Vec<f64>,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dimension: usize, timeout: Duration, retries: u32) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            endpoint: endpoint.into(),
            dimension,
            retries,
            agent,
        }
    }

    fn attempt(&self, text: &str) -> Result<EmbeddingVector, (bool, String)> {
        let mut resp = self
            .agent
            .post(&self.endpoint)
            .send_json(EmbedRequest { input: text })
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            let body = resp.body_mut().read_to_string().unwrap_or_default();
            let retryable = status == 429 || status >= 500;
            return Err((retryable, format!("status {status}: {}", excerpt(&body))));
        }
        let parsed: EmbedResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("malformed embedding response: {e}")))?;
        Ok(EmbeddingVector(parsed.embedding).normalized())
    }
}

pub(crate) fn excerpt(body: &str) -> String {
    const MAX: usize = 200;
    let trimmed = body.trim();
    match trimmed.char_indices().nth(MAX) {
        Some((i, _)) => format!("{}...", &trimmed[..i]),
        None => trimmed.to_string(),
    }
}

impl Embedder for RemoteEmbedder {
    fn name(&self) -> &str {
        "remote"
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        let mut last = String::new();
        for _ in 0..=self.retries {
            match self.attempt(text) {
                Ok(v) if v.dimension() == self.dimension => return Ok(v),
                Ok(v) => {
                    return Err(Error::Integrity(format!(
                        "embedding service returned dimension {}, expected {}",
                        v.dimension(),
                        self.dimension
                    )))
                }
                Err((true, msg)) => last = msg,
                Err((false, msg)) => return Err(Error::Retrieval(msg)),
            }
        }
        Err(Error::Retrieval(format!(
            "embedding service failed after {} attempt(s), retryable: {last}",
            self.retries + 1
        )))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbedderSettings {
    pub dimension: usize,
    pub endpoint: Option<String>,
    pub timeout_secs: u64,
    pub retries: u32,
}

impl Default for EmbedderSettings {
    fn default() -> Self {
        Self {
            dimension: DEFAULT_DIMENSION,
            endpoint: None,
            timeout_secs: 30,
            retries: 2,
        }
    }
}

pub type EmbedderRegistry = Registry<EmbedderSettings, dyn Embedder>;

/// Registry with the built-in `hashed` and `remote` providers.
pub fn embedder_registry() -> EmbedderRegistry {
    let mut reg = EmbedderRegistry::new("embedder");
    reg.register("hashed", |s: &EmbedderSettings| {
        Ok(Box::new(HashedEmbedder::new(s.dimension)?) as Box<dyn Embedder>)
    });
    reg.register("remote", |s: &EmbedderSettings| {
        let endpoint = s
            .endpoint
            .clone()
            .ok_or_else(|| Error::Config("remote embedder needs an endpoint".into()))?;
        Ok(Box::new(RemoteEmbedder::new(
            endpoint,
            s.dimension,
            Duration::from_secs(s.timeout_secs),
            s.retries,
        )) as Box<dyn Embedder>)
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_bitwise() {
        let e = HashedEmbedder::new(256).unwrap();
        let a = e.embed("Fetch the weather forecast").unwrap();
        let b = e.embed("Fetch the weather forecast").unwrap();
        assert_eq!(
            a.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            b.0.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn unit_norm() {
        let e = HashedEmbedder::new(256).unwrap();
        for text in ["a", "alpha beta beta", "Ünïcode wörds 42", &"x y z ".repeat(300)] {
            assert!((e.embed(text).unwrap().norm() - 1.0).abs() < 1e-9, "{text}");
        }
    }

    #[test]
    fn token_order_is_irrelevant() {
        // Reference tokenizer: both texts reduce to the multiset {alpha, beta}.
        let e = HashedEmbedder::new(256).unwrap();
        let mut t1: Vec<_> = tokenize("alpha beta").collect();
        let mut t2: Vec<_> = tokenize("beta alpha").collect();
        t1.sort();
        t2.sort();
        assert_eq!(t1, t2);
        assert_eq!(e.embed("alpha beta").unwrap(), e.embed("beta alpha").unwrap());
    }

    #[test]
    fn tokenizer_lowercases_and_splits() {
        let toks: Vec<_> = tokenize("getWeather(city_id) -> JSON!").collect();
        assert_eq!(toks, ["getweather", "city", "id", "json"]);
    }

    #[test]
    fn no_tokens_gives_zero_vector() {
        let e = HashedEmbedder::new(8).unwrap();
        let v = e.embed("!!! ...").unwrap();
        assert_eq!(v.norm(), 0.0);
        assert_eq!(v.cosine(&e.embed("a").unwrap()), 0.0);
    }

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a 64 test vectors.
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn registry_knows_both_providers() {
        let reg = embedder_registry();
        assert_eq!(reg.names().collect::<Vec<_>>(), ["hashed", "remote"]);
        let err = reg.create("remote", &EmbedderSettings::default()).err().unwrap();
        assert!(matches!(err, Error::Config(_)));
    }
}
