//! Text similarity metrics: ROUGE-1, METEOR, term-frequency cosine, and
//! embedding cosine through a pluggable [`EmbeddingProvider`].

use std::collections::HashMap;

use once_cell::sync::Lazy;
use rust_stemmers::{Algorithm, Stemmer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{tokenize, TokenSequence};

/// Dimension of [`HashedBagEmbedder`] vectors.
pub const FALLBACK_DIM: usize = 256;

/// METEOR parameters: F-mean recall weight, penalty weight, penalty exponent.
pub const METEOR_ALPHA: f64 = 0.9;
pub const METEOR_GAMMA: f64 = 0.5;
pub const METEOR_BETA: f64 = 3.0;

static STEMMER: Lazy<Stemmer> = Lazy::new(|| Stemmer::create(Algorithm::English));

/// Porter-family English stem of a lowercase token.
pub fn stem(token: &str) -> String {
    STEMMER.stem(token).into_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rouge1 {
    #[serde(rename = "p")]
    pub precision: f64,
    #[serde(rename = "r")]
    pub recall: f64,
    #[serde(rename = "f")]
    pub f1: f64,
}

fn counts(tokens: &TokenSequence) -> HashMap<&str, usize> {
    let mut map = HashMap::new();
    for t in tokens {
        *map.entry(t.as_str()).or_insert(0) += 1;
    }
    map
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Clipped unigram overlap `sum_t min(count_cand(t), count_ref(t))`.
pub fn unigram_overlap(candidate: &TokenSequence, reference: &TokenSequence) -> usize {
    let ref_counts = counts(reference);
    counts(candidate)
        .into_iter()
        .map(|(tok, c)| c.min(ref_counts.get(tok).copied().unwrap_or(0)))
        .sum()
}

pub fn rouge1(candidate: &TokenSequence, reference: &TokenSequence) -> Rouge1 {
    let overlap = unigram_overlap(candidate, reference);
    let precision = ratio(overlap, candidate.len());
    let recall = ratio(overlap, reference.len());
    Rouge1 { precision, recall, f1: harmonic_mean(precision, recall) }
}

/// Cosine of raw term-frequency vectors; 0 when either side is empty.
pub fn cosine_tf(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    if candidate.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let a = counts(candidate);
    let b = counts(reference);
    let dot: usize = a
        .iter()
        .map(|(tok, ca)| ca * b.get(tok).copied().unwrap_or(0))
        .sum();
    let na: usize = a.values().map(|c| c * c).sum();
    let nb: usize = b.values().map(|c| c * c).sum();
    // sqrt(na * nb) keeps identical inputs at exactly 1.0.
    (dot as f64 / ((na as f64) * (nb as f64)).sqrt()).min(1.0)
}

/// Alignment statistics behind a METEOR score.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeteorAlignment {
    pub matches: usize,
    pub chunks: usize,
    pub candidate_len: usize,
    pub reference_len: usize,
}

impl MeteorAlignment {
    pub fn score(&self) -> f64 {
        if self.matches == 0 {
            return 0.0;
        }
        let p = ratio(self.matches, self.candidate_len);
        let r = ratio(self.matches, self.reference_len);
        let fmean = p * r / (METEOR_ALPHA * p + (1.0 - METEOR_ALPHA) * r);
        let frag = self.chunks as f64 / self.matches as f64;
        let penalty = METEOR_GAMMA * frag.powf(METEOR_BETA);
        fmean * (1.0 - penalty)
    }
}

/// Two-stage unigram alignment: exact surface match, then stem match over the
/// leftovers. Each stage repeatedly takes the longest run of consecutive
/// matchable pairs (earliest on ties), which keeps the match count maximal and
/// the chunk count low.
pub fn meteor_alignment(candidate: &TokenSequence, reference: &TokenSequence) -> MeteorAlignment {
    let cand = candidate.as_slice();
    let refs = reference.as_slice();
    let mut cand_to_ref: Vec<Option<usize>> = vec![None; cand.len()];
    let mut ref_used = vec![false; refs.len()];

    align_stage(cand, refs, &mut cand_to_ref, &mut ref_used);
    let cand_stems: Vec<String> = cand.iter().map(|t| stem(t)).collect();
    let ref_stems: Vec<String> = refs.iter().map(|t| stem(t)).collect();
    align_stage(&cand_stems, &ref_stems, &mut cand_to_ref, &mut ref_used);

    let mut matches = 0;
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for slot in &cand_to_ref {
        match slot {
            Some(j) => {
                matches += 1;
                if prev.is_none_or(|p| p + 1 != *j) {
                    chunks += 1;
                }
                prev = Some(*j);
            }
            None => prev = None,
        }
    }
    MeteorAlignment { matches, chunks, candidate_len: cand.len(), reference_len: refs.len() }
}

fn align_stage(
    cand: &[String],
    refs: &[String],
    cand_to_ref: &mut [Option<usize>],
    ref_used: &mut [bool],
) {
    loop {
        let mut best: Option<(usize, usize, usize)> = None;
        for i in 0..cand.len() {
            if cand_to_ref[i].is_some() {
                continue;
            }
            for j in 0..refs.len() {
                if ref_used[j] || cand[i] != refs[j] {
                    continue;
                }
                let mut len = 1;
                while i + len < cand.len()
                    && j + len < refs.len()
                    && cand_to_ref[i + len].is_none()
                    && !ref_used[j + len]
                    && cand[i + len] == refs[j + len]
                {
                    len += 1;
                }
                if best.is_none_or(|(_, _, l)| len > l) {
                    best = Some((i, j, len));
                }
            }
        }
        let Some((i, j, len)) = best else { break };
        for k in 0..len {
            cand_to_ref[i + k] = Some(j + k);
            ref_used[j + k] = true;
        }
    }
}

pub fn meteor(candidate: &TokenSequence, reference: &TokenSequence) -> f64 {
    meteor_alignment(candidate, reference).score()
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProviderError {
    #[error("provider unavailable: {0}")]
    Unavailable(String),
    #[error("authentication failed")]
    AuthFailed,
    #[error("request timed out")]
    TimedOut,
}

/// Source of fixed-dimension text embeddings.
pub trait EmbeddingProvider: Send + Sync {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError>;
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for &T {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed(text)
    }
}

impl<T: EmbeddingProvider + ?Sized> EmbeddingProvider for std::sync::Arc<T> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        (**self).embed(text)
    }
}

/// Deterministic offline embedder: 256-bucket feature-hashed term
/// frequencies, L2-normalized. Empty text maps to the zero vector.
#[derive(Debug, Clone, Copy, Default)]
pub struct HashedBagEmbedder;

/// FNV-1a, 64 bit.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

impl HashedBagEmbedder {
    pub fn bucket(token: &str) -> usize {
        (fnv1a(token.as_bytes()) % FALLBACK_DIM as u64) as usize
    }

    pub fn vector(text: &str) -> Vec<f64> {
        let mut v = vec![0.0; FALLBACK_DIM];
        for tok in &tokenize(text) {
            v[Self::bucket(tok)] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        v
    }
}

impl EmbeddingProvider for HashedBagEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        Ok(Self::vector(text))
    }
}

/// Uses `primary`, falling back to `fallback` when the primary is down.
pub struct WithFallback<P, F> {
    pub primary: P,
    pub fallback: Option<F>,
}

impl<P: EmbeddingProvider, F: EmbeddingProvider> EmbeddingProvider for WithFallback<P, F> {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        match self.primary.embed(text) {
            Ok(v) => Ok(v),
            Err(ProviderError::Unavailable(_) | ProviderError::TimedOut) if self.fallback.is_some() => {
                self.fallback.as_ref().expect("checked").embed(text)
            }
            Err(e) => Err(e),
        }
    }
}

/// Cosine of two vectors, clamped to [-1, 1]; 0 if either has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb).sqrt()).clamp(-1.0, 1.0)
}

pub fn embedding_similarity(
    provider: &dyn EmbeddingProvider,
    a: &str,
    b: &str,
) -> Result<f64, ProviderError> {
    let va = provider.embed(a)?;
    let vb = provider.embed(b)?;
    Ok(cosine(&va, &vb))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub rouge1: Rouge1,
    pub meteor: f64,
    pub cosine_tf: f64,
    pub embedding_similarity: Option<f64>,
}

impl MetricReport {
    /// All lexical metrics between two texts; embedding similarity when a
    /// provider is given.
    pub fn compute(
        candidate: &str,
        reference: &str,
        provider: Option<&dyn EmbeddingProvider>,
    ) -> Result<Self, ProviderError> {
        let c = tokenize(candidate);
        let r = tokenize(reference);
        let embedding_similarity = match provider {
            Some(p) => Some(embedding_similarity(p, candidate, reference)?),
            None => None,
        };
        Ok(Self {
            rouge1: rouge1(&c, &r),
            meteor: meteor(&c, &r),
            cosine_tf: cosine_tf(&c, &r),
            embedding_similarity,
        })
    }

    pub fn zero() -> Self {
        Self::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> TokenSequence {
        tokenize(s)
    }

    #[test]
    fn rouge1_examples() {
        let same = rouge1(&toks("a b c"), &toks("a b c"));
        assert_eq!((same.precision, same.recall, same.f1), (1.0, 1.0, 1.0));
        assert_eq!(rouge1(&toks("a b"), &toks("c d")), Rouge1::default());
        let r = rouge1(
            &toks("print preview shows unscaled page"),
            &toks("the print preview shows the standard unscaled page"),
        );
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 0.625);
        assert!((r.f1 - 2.0 * 0.625 / 1.625).abs() < 1e-15);
        assert!((r.f1 - 0.7692).abs() < 1e-4);
    }

    #[test]
    fn rouge1_clips_repeats() {
        let r = rouge1(&toks("the the the"), &toks("the cat"));
        assert_eq!(unigram_overlap(&toks("the the the"), &toks("the cat")), 1);
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.recall, 0.5);
    }

    #[test]
    fn meteor_identity_four_tokens() {
        let a = meteor_alignment(&toks("a b c d"), &toks("a b c d"));
        assert_eq!((a.matches, a.chunks), (4, 1));
        assert_eq!(a.score(), 1.0 - 0.5 * (0.25f64).powi(3));
        assert!((a.score() - 0.9922).abs() < 5e-5);
    }

    #[test]
    fn meteor_gap_example() {
        let a = meteor_alignment(&toks("a b c d"), &toks("a b x c d"));
        assert_eq!((a.matches, a.chunks), (4, 2));
        let fmean = 0.8 / (0.9 + 0.1 * 0.8);
        let expected = fmean * (1.0 - 0.5 * 0.125);
        assert!((a.score() - expected).abs() < 1e-12);
        assert!((a.score() - 0.7653).abs() < 5e-5);
    }

    #[test]
    fn meteor_disjoint_and_empty() {
        assert_eq!(meteor(&toks("a b"), &toks("c d")), 0.0);
        assert_eq!(meteor(&toks(""), &toks("c d")), 0.0);
        assert_eq!(meteor(&toks(""), &toks("")), 0.0);
    }

    #[test]
    fn meteor_stem_stage() {
        let a = meteor_alignment(&toks("the app crashes"), &toks("the app crashed"));
        assert_eq!((a.matches, a.chunks), (3, 1));
    }

    #[test]
    fn meteor_prefers_contiguous_duplicates() {
        // Greedy left-to-right would pair the first "a" with ref[0] and split.
        let a = meteor_alignment(&toks("a b"), &toks("a x a b"));
        assert_eq!((a.matches, a.chunks), (2, 1));
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_tf(&toks("a b a"), &toks("a b a")), 1.0);
        assert_eq!(cosine_tf(&toks("a b"), &toks("a c")), 0.5);
        assert_eq!(cosine_tf(&toks("a b"), &toks("c d")), 0.0);
        assert_eq!(cosine_tf(&toks(""), &toks("c d")), 0.0);
    }

    #[test]
    fn fallback_embedder_properties() {
        let e = HashedBagEmbedder;
        let v = e.embed("alpha beta").unwrap();
        assert_eq!(v.len(), FALLBACK_DIM);
        assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(v, e.embed("beta alpha").unwrap());
        assert!(e.embed("").unwrap().iter().all(|x| *x == 0.0));
        let sim = embedding_similarity(&e, "print preview", "print preview").unwrap();
        assert!((sim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fallback_disjoint_bags_are_orthogonal() {
        let (a, b) = ("window crash", "printer scale");
        let buckets_a: Vec<_> = tokenize(a).iter().map(|t| HashedBagEmbedder::bucket(t)).collect();
        let buckets_b: Vec<_> = tokenize(b).iter().map(|t| HashedBagEmbedder::bucket(t)).collect();
        assert!(buckets_a.iter().all(|x| !buckets_b.contains(x)), "fixture words collide");
        assert_eq!(embedding_similarity(&HashedBagEmbedder, a, b).unwrap(), 0.0);
    }

    struct Down;
    impl EmbeddingProvider for Down {
        fn embed(&self, _: &str) -> Result<Vec<f64>, ProviderError> {
            Err(ProviderError::Unavailable("down".into()))
        }
    }

    #[test]
    fn provider_down_without_fallback() {
        let none: WithFallback<Down, HashedBagEmbedder> = WithFallback { primary: Down, fallback: None };
        assert_eq!(
            embedding_similarity(&none, "a", "a"),
            Err(ProviderError::Unavailable("down".into()))
        );
        let with = WithFallback { primary: Down, fallback: Some(HashedBagEmbedder) };
        assert!((embedding_similarity(&with, "a b", "a b").unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn metric_report_json_shape() {
        let m = MetricReport::compute("a b", "a c", None).unwrap();
        let v = serde_json::to_value(m).unwrap();
        assert_eq!(v["rouge1"]["p"], 0.5);
        assert_eq!(v["cosine_tf"], 0.5);
        assert!(v["embedding_similarity"].is_null());
    }
}
