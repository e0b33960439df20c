//! Split-and-match weak labeling.
//!
//! Every chunk of a record goes through up to three matchers in a fixed
//! order: exact synonym lookup (S1), character n-gram Jaccard against an
//! inverted index (S2) and embedding cosine (S3). The first enabled stage
//! that accepts the chunk wins; chunks nobody accepts are recorded as
//! unmatched.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::embedding::{cosine, embed_phrase, EmbeddingTable};
use crate::ontology::Ontology;
use crate::textprep::{chunks_from_tokens, tokenize, CharSpan, Chunk, Record, SeparatorConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MatchError {
    #[error("invalid match configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("stage S3 needs an embedding table")]
    MissingEmbeddings,
    #[error("no matching stage enabled")]
    NoStages,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    S1,
    S2,
    S3,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::S1, Stage::S2, Stage::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::S1 => "s1",
            Stage::S2 => "s2",
            Stage::S3 => "s3",
        }
    }

    pub fn parse(s: &str) -> Option<Stage> {
        match s.trim().to_ascii_lowercase().as_str() {
            "s1" => Some(Stage::S1),
            "s2" => Some(Stage::S2),
            "s3" => Some(Stage::S3),
            _ => None,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Enabled stages. Execution order is always S1, S2, S3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StageSet([bool; 3]);

impl StageSet {
    pub fn new(stages: &[Stage]) -> Self {
        let mut set = [false; 3];
        for &s in stages {
            set[s as usize] = true;
        }
        Self(set)
    }

    pub fn all() -> Self {
        Self([true; 3])
    }

    pub fn contains(&self, s: Stage) -> bool {
        self.0[s as usize]
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = Stage> + '_ {
        Stage::ALL.into_iter().filter(|s| self.contains(*s))
    }

    /// Parses a comma-separated list such as `s1,s2`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut stages = Vec::new();
        for part in s.split(',').filter(|p| !p.trim().is_empty()) {
            stages.push(Stage::parse(part)?);
        }
        let set = Self::new(&stages);
        (!set.is_empty()).then_some(set)
    }
}

impl fmt::Display for StageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for s in self.iter() {
            if !first {
                f.write_str(",")?;
            }
            f.write_str(s.as_str())?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchConfig {
    /// Minimum n-gram Jaccard accepted by S2.
    pub approx_threshold: f64,
    /// Minimum cosine accepted by S3.
    pub embedding_threshold: f64,
    pub ngram_size: usize,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { approx_threshold: 0.7, embedding_threshold: 0.85, ngram_size: 3 }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<(), MatchError> {
        let in_unit = |x: f64| x > 0.0 && x <= 1.0;
        if !in_unit(self.approx_threshold) {
            return Err(MatchError::InvalidConfig("approx_threshold must be in (0, 1]"));
        }
        if !in_unit(self.embedding_threshold) {
            return Err(MatchError::InvalidConfig("embedding_threshold must be in (0, 1]"));
        }
        if self.ngram_size < 2 {
            return Err(MatchError::InvalidConfig("ngram_size must be at least 2"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakAnnotation {
    pub record_id: String,
    pub span: CharSpan,
    pub concept_id: String,
    /// 1.0 for S1, the similarity for S2 and S3.
    pub confidence: f64,
    pub stage: Stage,
}

/// Weak labels of one record.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakRecord {
    pub record_id: String,
    pub text: String,
    pub annotations: Vec<WeakAnnotation>,
    pub unmatched_spans: Vec<CharSpan>,
}

impl WeakRecord {
    pub fn record(&self) -> Record {
        Record { id: self.record_id.clone(), text: self.text.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MatchDiagnostics {
    pub chunks: usize,
    pub s1: usize,
    pub s2: usize,
    pub s3: usize,
    pub unmatched: usize,
    /// Chunks S3 could not embed at all.
    pub zero_vector: usize,
}

impl MatchDiagnostics {
    fn add(&mut self, other: &MatchDiagnostics) {
        self.chunks += other.chunks;
        self.s1 += other.s1;
        self.s2 += other.s2;
        self.s3 += other.s3;
        self.unmatched += other.unmatched;
        self.zero_vector += other.zero_vector;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeakDataset {
    pub records: Vec<WeakRecord>,
    pub diagnostics: MatchDiagnostics,
}

impl WeakDataset {
    pub fn annotation_count(&self) -> usize {
        self.records.iter().map(|r| r.annotations.len()).sum()
    }

    pub fn annotations(&self) -> impl Iterator<Item = &WeakAnnotation> {
        self.records.iter().flat_map(|r| r.annotations.iter())
    }
}

/// Distinct character n-grams of `s`.
pub fn ngram_set(s: &str, n: usize) -> BTreeSet<String> {
    let chars: Vec<char> = s.chars().collect();
    if chars.len() < n {
        return BTreeSet::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Jaccard similarity of the character n-gram sets. Strings shorter than
/// `n` only match by equality.
pub fn ngram_jaccard(a: &str, b: &str, n: usize) -> f64 {
    if a.chars().count() < n || b.chars().count() < n {
        return if a == b { 1.0 } else { 0.0 };
    }
    let ga = ngram_set(a, n);
    let gb = ngram_set(b, n);
    let inter = ga.intersection(&gb).count();
    let union = ga.len() + gb.len() - inter;
    inter as f64 / union as f64
}

#[derive(Debug, Clone)]
struct IndexEntry {
    synonym: String,
    concept: String,
    grams: usize,
    chars: usize,
}

/// A candidate synonym match.
#[derive(Debug, Clone, PartialEq)]
pub struct SynonymHit {
    pub synonym: String,
    pub concept_id: String,
    pub score: f64,
}

/// Orders candidates: higher score, then longer synonym, then smaller
/// concept id, then smaller synonym.
fn better(a: (f64, usize, &str, &str), b: (f64, usize, &str, &str)) -> bool {
    match a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal) {
        Ordering::Greater => return true,
        Ordering::Less => return false,
        Ordering::Equal => {}
    }
    match a.1.cmp(&b.1) {
        Ordering::Greater => return true,
        Ordering::Less => return false,
        Ordering::Equal => {}
    }
    (a.2, a.3) < (b.2, b.3)
}

/// Inverted index from character n-grams to ontology synonyms.
#[derive(Debug, Clone)]
pub struct NgramIndex {
    n: usize,
    entries: Vec<IndexEntry>,
    postings: BTreeMap<String, Vec<u32>>,
    short: BTreeMap<String, u32>,
}

impl NgramIndex {
    pub fn build(ont: &Ontology, n: usize) -> Self {
        let mut entries = Vec::with_capacity(ont.synonym_count());
        let mut postings: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut short = BTreeMap::new();
        for (syn, concept) in ont.synonym_index() {
            let idx = entries.len() as u32;
            let grams = ngram_set(syn, n);
            let chars = syn.chars().count();
            if chars < n {
                short.insert(syn.clone(), idx);
            }
            for g in &grams {
                postings.entry(g.clone()).or_default().push(idx);
            }
            entries.push(IndexEntry { synonym: syn.clone(), concept: concept.clone(), grams: grams.len(), chars });
        }
        Self { n, entries, postings, short }
    }

    pub fn ngram_size(&self) -> usize {
        self.n
    }

    /// Best synonym with Jaccard at least `threshold`.
    pub fn best_match(&self, query: &str, threshold: f64) -> Option<SynonymHit> {
        if query.chars().count() < self.n {
            let &idx = self.short.get(query)?;
            let e = &self.entries[idx as usize];
            return (1.0 >= threshold).then(|| SynonymHit {
                synonym: e.synonym.clone(),
                concept_id: e.concept.clone(),
                score: 1.0,
            });
        }
        let q = ngram_set(query, self.n);
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for g in &q {
            if let Some(list) = self.postings.get(g) {
                for &i in list {
                    *counts.entry(i).or_default() += 1;
                }
            }
        }
        let mut best: Option<(f64, usize)> = None;
        for (&i, &inter) in &counts {
            let e = &self.entries[i as usize];
            let score = inter as f64 / (q.len() + e.grams - inter) as f64;
            if score < threshold {
                continue;
            }
            let replace = match best {
                None => true,
                Some((bs, bi)) => {
                    let b = &self.entries[bi];
                    better((score, e.chars, &e.concept, &e.synonym), (bs, b.chars, &b.concept, &b.synonym))
                }
            };
            if replace {
                best = Some((score, i as usize));
            }
        }
        best.map(|(score, i)| {
            let e = &self.entries[i];
            SynonymHit { synonym: e.synonym.clone(), concept_id: e.concept.clone(), score }
        })
    }
}

/// Outcome of embedding matching on one chunk.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingMatch {
    Hit(SynonymHit),
    BelowThreshold,
    /// No token of the chunk has any embedding coverage.
    ZeroVector,
}

#[derive(Debug, Clone)]
struct SynonymVector {
    synonym: String,
    concept: String,
    chars: usize,
    vector: Vec<f32>,
}

/// Word tokens of a phrase, for embedding.
pub(crate) fn phrase_words(text: &str) -> Vec<String> {
    tokenize(text, &SeparatorConfig::default())
        .into_iter()
        .filter(|t| t.is_word())
        .map(|t| t.text)
        .collect()
}

/// Split-and-match labeler over one ontology. The n-gram index and the
/// synonym vectors are built once at construction.
#[derive(Debug, Clone)]
pub struct Matcher<'a> {
    ont: &'a Ontology,
    cfg: MatchConfig,
    separators: SeparatorConfig,
    index: NgramIndex,
    embeddings: Option<(&'a EmbeddingTable, Vec<SynonymVector>)>,
}

/// Exact synonym match of one chunk (S1).
pub fn match_exact(chunk: &Chunk, record_id: &str, ont: &Ontology) -> Option<WeakAnnotation> {
    ont.lookup_exact(&chunk.text).map(|id| WeakAnnotation {
        record_id: String::from(record_id),
        span: chunk.span,
        concept_id: String::from(id),
        confidence: 1.0,
        stage: Stage::S1,
    })
}

impl<'a> Matcher<'a> {
    pub fn new(
        ont: &'a Ontology,
        cfg: MatchConfig,
        separators: SeparatorConfig,
        embeddings: Option<&'a EmbeddingTable>,
    ) -> Result<Self, MatchError> {
        cfg.validate()?;
        let index = NgramIndex::build(ont, cfg.ngram_size);
        let embeddings = embeddings.map(|emb| {
            let vectors = ont
                .synonym_index()
                .iter()
                .filter_map(|(syn, concept)| {
                    let words = phrase_words(syn);
                    if words.is_empty() {
                        return None;
                    }
                    let vector = embed_phrase(emb, &words);
                    vector.iter().any(|&x| x != 0.0).then(|| SynonymVector {
                        synonym: syn.clone(),
                        concept: concept.clone(),
                        chars: syn.chars().count(),
                        vector,
                    })
                })
                .collect();
            (emb, vectors)
        });
        Ok(Self { ont, cfg, separators, index, embeddings })
    }

    pub fn ontology(&self) -> &'a Ontology {
        self.ont
    }

    pub fn config(&self) -> &MatchConfig {
        &self.cfg
    }

    pub fn separators(&self) -> &SeparatorConfig {
        &self.separators
    }

    pub fn has_embeddings(&self) -> bool {
        self.embeddings.is_some()
    }

    pub fn match_exact(&self, chunk: &Chunk, record_id: &str) -> Option<WeakAnnotation> {
        match_exact(chunk, record_id, self.ont)
    }

    /// Best approximate hit for arbitrary normalized text.
    pub fn approx_lookup(&self, text: &str) -> Option<SynonymHit> {
        self.index.best_match(text, self.cfg.approx_threshold)
    }

    pub fn match_approx(&self, chunk: &Chunk, record_id: &str) -> Option<WeakAnnotation> {
        self.approx_lookup(&chunk.text).map(|hit| WeakAnnotation {
            record_id: String::from(record_id),
            span: chunk.span,
            concept_id: hit.concept_id,
            confidence: hit.score,
            stage: Stage::S2,
        })
    }

    /// Best synonym by cosine for a list of word tokens, regardless of the
    /// threshold. `None` without embeddings or when nothing is embeddable.
    pub fn embedding_lookup<S: AsRef<str>>(&self, words: &[S]) -> EmbeddingMatch {
        let Some((emb, vectors)) = &self.embeddings else {
            return EmbeddingMatch::ZeroVector;
        };
        if words.is_empty() {
            return EmbeddingMatch::ZeroVector;
        }
        let q = embed_phrase(emb, words);
        if q.iter().all(|&x| x == 0.0) {
            return EmbeddingMatch::ZeroVector;
        }
        let mut best: Option<(f64, &SynonymVector)> = None;
        for sv in vectors {
            let cos = cosine(&q, &sv.vector).expect("table dimension is fixed");
            let replace = match best {
                None => true,
                Some((bc, b)) => better((cos, sv.chars, &sv.concept, &sv.synonym), (bc, b.chars, &b.concept, &b.synonym)),
            };
            if replace {
                best = Some((cos, sv));
            }
        }
        match best {
            Some((cos, sv)) if cos >= self.cfg.embedding_threshold => EmbeddingMatch::Hit(SynonymHit {
                synonym: sv.synonym.clone(),
                concept_id: sv.concept.clone(),
                score: cos.clamp(f64::MIN_POSITIVE, 1.0),
            }),
            _ => EmbeddingMatch::BelowThreshold,
        }
    }

    pub fn match_embedding(&self, chunk: &Chunk) -> EmbeddingMatch {
        let words: Vec<&str> = chunk.tokens.iter().filter(|t| t.is_word()).map(|t| t.text.as_str()).collect();
        self.embedding_lookup(&words)
    }

    fn match_chunk(&self, chunk: &Chunk, record_id: &str, stages: StageSet, diag: &mut MatchDiagnostics) -> Option<WeakAnnotation> {
        diag.chunks += 1;
        if stages.contains(Stage::S1) {
            if let Some(a) = self.match_exact(chunk, record_id) {
                diag.s1 += 1;
                return Some(a);
            }
        }
        if stages.contains(Stage::S2) {
            if let Some(a) = self.match_approx(chunk, record_id) {
                diag.s2 += 1;
                return Some(a);
            }
        }
        if stages.contains(Stage::S3) {
            match self.match_embedding(chunk) {
                EmbeddingMatch::Hit(hit) => {
                    diag.s3 += 1;
                    return Some(WeakAnnotation {
                        record_id: String::from(record_id),
                        span: chunk.span,
                        concept_id: hit.concept_id,
                        confidence: hit.score,
                        stage: Stage::S3,
                    });
                }
                EmbeddingMatch::ZeroVector => diag.zero_vector += 1,
                EmbeddingMatch::BelowThreshold => {}
            }
        }
        diag.unmatched += 1;
        None
    }

    fn check_stages(&self, stages: StageSet) -> Result<(), MatchError> {
        if stages.is_empty() {
            return Err(MatchError::NoStages);
        }
        if stages.contains(Stage::S3) && self.embeddings.is_none() {
            return Err(MatchError::MissingEmbeddings);
        }
        Ok(())
    }

    /// Weak labels for one record plus its diagnostics.
    pub fn label_record(&self, rec: &Record, stages: StageSet) -> Result<(WeakRecord, MatchDiagnostics), MatchError> {
        self.check_stages(stages)?;
        let mut diag = MatchDiagnostics::default();
        let tokens = tokenize(&rec.text, &self.separators);
        let mut annotations = Vec::new();
        let mut unmatched_spans = Vec::new();
        for chunk in chunks_from_tokens(&rec.text, &tokens) {
            match self.match_chunk(&chunk, &rec.id, stages, &mut diag) {
                Some(a) => annotations.push(a),
                None => unmatched_spans.push(chunk.span),
            }
        }
        let weak = WeakRecord { record_id: rec.id.clone(), text: rec.text.clone(), annotations, unmatched_spans };
        Ok((weak, diag))
    }

    /// Weak labels for a corpus, in record order.
    pub fn generate_weak_labels(&self, corpus: &[Record], stages: StageSet) -> Result<WeakDataset, MatchError> {
        self.check_stages(stages)?;
        let mut out = WeakDataset { records: Vec::with_capacity(corpus.len()), ..WeakDataset::default() };
        for rec in corpus {
            let (weak, diag) = self.label_record(rec, stages)?;
            out.diagnostics.add(&diag);
            out.records.push(weak);
        }
        Ok(out)
    }

    /// Merges per-record results produced elsewhere (e.g. in parallel) in
    /// the given order.
    pub fn collect(results: Vec<(WeakRecord, MatchDiagnostics)>) -> WeakDataset {
        let mut out = WeakDataset { records: Vec::with_capacity(results.len()), ..WeakDataset::default() };
        for (weak, diag) in results {
            out.diagnostics.add(&diag);
            out.records.push(weak);
        }
        out
    }
}

/// Convenience wrapper around [`Matcher::generate_weak_labels`].
pub fn generate_weak_labels(
    corpus: &[Record],
    ont: &Ontology,
    emb: Option<&EmbeddingTable>,
    cfg: &MatchConfig,
    separators: &SeparatorConfig,
    stages: StageSet,
) -> Result<WeakDataset, MatchError> {
    Matcher::new(ont, cfg.clone(), separators.clone(), emb)?.generate_weak_labels(corpus, stages)
}
