//! Comment similarity metrics: BLEU, ROUGE-1 and BERTScore.
//!
//! All scores are on a 0–1 scale. BLEU follows the sentence-level
//! convention of the common reference tooling: effective n-gram order,
//! exponential smoothing of zero counts, closest-reference brevity penalty.
//! BERTScore is greedy cosine matching without idf weighting or baseline
//! rescaling.

use std::collections::HashMap;
use std::ops::Deref;
use std::sync::Mutex;
use std::time::Duration;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const MAX_NGRAM: usize = 4;

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    pub fn new<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(tokens.into_iter().map(Into::into).collect())
    }

    /// Splits on whitespace with no normalization; for tests and fixtures.
    pub fn from_words(text: &str) -> Self {
        Self::new(text.split_whitespace())
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

/// Comment text to scoring tokens. Drops comment markers and, when
/// `strip_tags` is set, `@tag` names (their payload stays). Lowercases and
/// splits on whitespace; each punctuation character is its own token.
pub fn normalize(text: &str, strip_tags: bool) -> TokenSeq {
    let mut body = String::with_capacity(text.len());
    for line in text.lines() {
        let mut line = line.trim();
        line = line.strip_prefix("/**").unwrap_or(line);
        line = line.strip_suffix("*/").unwrap_or(line);
        let line = line.trim_start().trim_start_matches('*');
        body.push_str(line);
        body.push('\n');
    }

    let mut tokens = Vec::new();
    let mut word = String::new();
    let mut chars = body.chars().peekable();
    let flush = |word: &mut String, tokens: &mut Vec<String>| {
        if !word.is_empty() {
            tokens.push(std::mem::take(word));
        }
    };
    while let Some(c) = chars.next() {
        if c.is_alphanumeric() || c == '_' {
            word.extend(c.to_lowercase());
        } else if c.is_whitespace() {
            flush(&mut word, &mut tokens);
        } else if c == '@' && strip_tags && word.is_empty() && chars.peek().is_some_and(|n| n.is_alphabetic()) {
            while chars.peek().is_some_and(|n| n.is_alphanumeric() || *n == '_') {
                chars.next();
            }
        } else {
            flush(&mut word, &mut tokens);
            tokens.push(c.to_lowercase().collect());
        }
    }
    flush(&mut word, &mut tokens);
    TokenSeq(tokens)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTriple {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ScoreTriple {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 };
        Self { precision, recall, f1 }
    }

    pub const ZERO: ScoreTriple = ScoreTriple { precision: 0.0, recall: 0.0, f1: 0.0 };
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU of `hyp` against one or more references.
pub fn bleu(hyp: &TokenSeq, refs: &[TokenSeq]) -> f64 {
    let sys_len = hyp.len();
    if sys_len == 0 || refs.is_empty() {
        return 0.0;
    }
    let ref_len = refs
        .iter()
        .map(|r| r.len())
        .min_by_key(|&len| (len.abs_diff(sys_len), len))
        .expect("refs non-empty");

    let mut correct = [0usize; MAX_NGRAM];
    let mut total = [0usize; MAX_NGRAM];
    for n in 1..=MAX_NGRAM {
        // Clip by the largest count of each n-gram in any single reference.
        let mut max_ref: HashMap<&[String], usize> = HashMap::new();
        for r in refs {
            for (gram, c) in ngram_counts(r, n) {
                let slot = max_ref.entry(gram).or_insert(0);
                *slot = (*slot).max(c);
            }
        }
        for (gram, c) in ngram_counts(hyp, n) {
            total[n - 1] += c;
            correct[n - 1] += c.min(max_ref.get(gram).copied().unwrap_or(0));
        }
    }

    if correct.iter().all(|&c| c == 0) {
        return 0.0;
    }

    let brevity = if sys_len < ref_len { (1.0 - ref_len as f64 / sys_len as f64).exp() } else { 1.0 };

    let mut log_sum = 0.0;
    let mut order = 0;
    let mut smooth = 1.0;
    for n in 0..MAX_NGRAM {
        if total[n] == 0 {
            break;
        }
        order = n + 1;
        let p = if correct[n] == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total[n] as f64)
        } else {
            correct[n] as f64 / total[n] as f64
        };
        log_sum += p.ln();
    }
    brevity * (log_sum / order as f64).exp()
}

/// Unigram overlap with clipped counts.
pub fn rouge1(hyp: &TokenSeq, reference: &TokenSeq) -> ScoreTriple {
    if hyp.is_empty() || reference.is_empty() {
        return ScoreTriple::ZERO;
    }
    let h = ngram_counts(hyp, 1);
    let r = ngram_counts(reference, 1);
    let overlap: usize = h.iter().map(|(g, c)| (*c).min(r.get(g).copied().unwrap_or(0))).sum();
    ScoreTriple::new(overlap as f64 / hyp.len() as f64, overlap as f64 / reference.len() as f64)
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

/// Greedy-matching BERTScore from per-token vectors. Cosine similarities
/// are clamped to [0, 1] so every component stays a valid score.
pub fn bertscore_vectors(hyp: &[Vec<f64>], reference: &[Vec<f64>]) -> ScoreTriple {
    if hyp.is_empty() || reference.is_empty() {
        return ScoreTriple::ZERO;
    }
    let sim: Vec<Vec<f64>> =
        hyp.iter().map(|h| reference.iter().map(|r| cosine(h, r).clamp(0.0, 1.0)).collect()).collect();
    let precision = sim.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum::<f64>() / hyp.len() as f64;
    let recall = (0..reference.len())
        .map(|j| sim.iter().map(|row| row[j]).fold(0.0, f64::max))
        .sum::<f64>()
        / reference.len() as f64;
    ScoreTriple::new(precision, recall)
}

pub async fn bertscore(
    hyp: &TokenSeq,
    reference: &TokenSeq,
    embedder: &dyn Embedder,
) -> Result<ScoreTriple, EmbedError> {
    if hyp.is_empty() || reference.is_empty() {
        return Ok(ScoreTriple::ZERO);
    }
    let h = embedder.embed(hyp).await?;
    let r = embedder.embed(reference).await?;
    Ok(bertscore_vectors(&h, &r))
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding request failed: {0}")]
    Transport(String),
    #[error("embedding response malformed: {0}")]
    Protocol(String),
}

/// One vector per token, fixed dimension.
#[async_trait]
pub trait Embedder: Send + Sync {
    async fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, EmbedError>;
}

/// Token vectors from a seeded hash of the token string. Identical tokens
/// get identical vectors. Components lie in [0, 1], so cosine similarities
/// are never negative.
#[derive(Debug, Clone)]
pub struct MockEmbedder {
    pub dim: usize,
    pub seed: u64,
}

impl Default for MockEmbedder {
    fn default() -> Self {
        Self { dim: 64, seed: 0x5eed }
    }
}

impl MockEmbedder {
    pub fn vector(&self, token: &str) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        let mut counter = 0u32;
        while out.len() < self.dim {
            let mut h = Sha256::new();
            h.update(self.seed.to_le_bytes());
            h.update(counter.to_le_bytes());
            h.update(token.as_bytes());
            for chunk in h.finalize().chunks_exact(4) {
                if out.len() == self.dim {
                    break;
                }
                let v = u32::from_le_bytes(chunk.try_into().expect("4 bytes"));
                out.push(v as f64 / u32::MAX as f64);
            }
            counter += 1;
        }
        out
    }

    pub fn embed_tokens(&self, tokens: &TokenSeq) -> Vec<Vec<f64>> {
        tokens.iter().map(|t| self.vector(t)).collect()
    }
}

#[async_trait]
impl Embedder for MockEmbedder {
    async fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, EmbedError> {
        Ok(self.embed_tokens(tokens))
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    model: &'a str,
    input: Vec<&'a str>,
}

#[derive(Deserialize)]
struct EmbedResponse {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

/// Client for an OpenAI-compatible embeddings endpoint. Uncached tokens are
/// sent in one batch; vectors are memoized for the life of the client.
pub struct HttpEmbedder {
    client: reqwest::Client,
    endpoint: String,
    model: String,
    api_key: Option<String>,
    memo: Mutex<HashMap<String, Vec<f64>>>,
}

impl HttpEmbedder {
    pub fn new(
        endpoint: impl Into<String>,
        model: impl Into<String>,
        timeout: Duration,
        api_key: Option<String>,
    ) -> Result<Self, EmbedError> {
        let client = reqwest::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| EmbedError::Transport(e.to_string()))?;
        Ok(Self { client, endpoint: endpoint.into(), model: model.into(), api_key, memo: Mutex::new(HashMap::new()) })
    }
}

#[async_trait]
impl Embedder for HttpEmbedder {
    async fn embed(&self, tokens: &TokenSeq) -> Result<Vec<Vec<f64>>, EmbedError> {
        let missing: Vec<&str> = {
            let memo = self.memo.lock().unwrap();
            let mut seen = std::collections::BTreeSet::new();
            tokens.iter().map(String::as_str).filter(|t| !memo.contains_key(*t) && seen.insert(*t)).collect()
        };
        if !missing.is_empty() {
            let mut req = self.client.post(&self.endpoint).json(&EmbedRequest { model: &self.model, input: missing.clone() });
            if let Some(key) = &self.api_key {
                req = req.bearer_auth(key);
            }
            let resp = req.send().await.map_err(|e| EmbedError::Transport(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(EmbedError::Transport(format!("status {}", resp.status())));
            }
            let body: EmbedResponse = resp.json().await.map_err(|e| EmbedError::Protocol(e.to_string()))?;
            if body.data.len() != missing.len() {
                return Err(EmbedError::Protocol(format!(
                    "expected {} vectors, got {}",
                    missing.len(),
                    body.data.len()
                )));
            }
            let mut memo = self.memo.lock().unwrap();
            for (tok, datum) in missing.iter().zip(body.data) {
                if datum.embedding.iter().any(|x| !x.is_finite()) {
                    return Err(EmbedError::Protocol(format!("non-finite vector for `{tok}`")));
                }
                memo.insert(tok.to_string(), datum.embedding);
            }
        }
        let memo = self.memo.lock().unwrap();
        Ok(tokens.iter().map(|t| memo[t.as_str()].clone()).collect())
    }
}
