//! Concept linking for extracted mentions.
//!
//! A multinomial log-linear classifier over every ontology concept. Features
//! come in four disjoint groups: mention words (plus the mention's phrase
//! embedding), mention character n-grams, left context and right context.
//! Context never crosses an active separator and never includes the mention
//! itself.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::embedding::{embed_phrase, EmbeddingTable};
use crate::hash::{derive_seed, fnv64};
use crate::math::softmax_into;
use crate::ontology::Ontology;
use crate::tagger::Mention;
use crate::textprep::{tokenize, CharSpan, Record, SeparatorConfig};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinkerError {
    #[error("span {span:?} is outside record {record_id:?}")]
    SpanOutOfRange { record_id: String, span: CharSpan },
    #[error("span {span:?} in record {record_id:?} covers no token")]
    EmptyMention { record_id: String, span: CharSpan },
    #[error("unknown concept id {0:?}")]
    UnknownConcept(String),
    #[error("empty training set")]
    EmptyDataset,
    #[error("example weight {0} outside [0, 1]")]
    BadWeight(f64),
    #[error("invalid linker configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("model was trained for ontology {expected:#018x}, got {found:#018x}")]
    FingerprintMismatch { expected: u64, found: u64 },
    #[error("model expects {expected}, featurizer provides {found}")]
    FeatureMismatch { expected: &'static str, found: String },
    #[error("malformed model: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkerConfig {
    /// Context tokens on each side of the mention.
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hash_bits: u32,
    pub seed: u64,
}

impl Default for LinkerConfig {
    fn default() -> Self {
        Self { window: 2, epochs: 5, learning_rate: 0.2, hash_bits: 14, seed: 42 }
    }
}

impl LinkerConfig {
    pub fn validate(&self) -> Result<(), LinkerError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LinkerError::InvalidConfig("learning_rate must be positive"));
        }
        if !(8..=22).contains(&self.hash_bits) {
            return Err(LinkerError::InvalidConfig("hash_bits must be in 8..=22"));
        }
        Ok(())
    }

    pub fn featurizer<'a>(&self, separators: SeparatorConfig, embeddings: Option<&'a EmbeddingTable>) -> MentionFeaturizer<'a> {
        MentionFeaturizer { window: self.window, hash_bits: self.hash_bits, separators, embeddings }
    }
}

/// The four feature groups of one mention, before hashing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureBundle {
    pub mention_words: Vec<String>,
    pub mention_embedding: Option<Vec<f32>>,
    pub mention_chars: Vec<String>,
    /// `(offset, token)` with offsets −1, −2, … moving away from the mention.
    pub left: Vec<(isize, String)>,
    /// `(offset, token)` with offsets +1, +2, ….
    pub right: Vec<(isize, String)>,
}

impl FeatureBundle {
    /// Prefixed feature names; the prefixes keep the groups disjoint.
    pub fn feature_names(&self) -> Vec<String> {
        let mut out = Vec::new();
        out.push(format!("m={}", self.mention_words.join(" ")));
        out.extend(self.mention_words.iter().map(|w| format!("w={w}")));
        out.extend(self.mention_chars.iter().map(|c| format!("c={c}")));
        out.extend(self.left.iter().map(|(k, t)| format!("l{k}={t}")));
        out.extend(self.right.iter().map(|(k, t)| format!("r+{k}={t}")));
        out
    }
}

fn char_ngrams(text: &str) -> Vec<String> {
    let chars: Vec<char> = core::iter::once('<').chain(text.chars()).chain(core::iter::once('>')).collect();
    let mut out = Vec::new();
    for n in 2..=4 {
        for w in chars.windows(n) {
            out.push(w.iter().collect());
        }
    }
    out
}

/// Builds feature bundles and their hashed form.
#[derive(Debug, Clone)]
pub struct MentionFeaturizer<'a> {
    window: usize,
    hash_bits: u32,
    separators: SeparatorConfig,
    embeddings: Option<&'a EmbeddingTable>,
}

impl<'a> MentionFeaturizer<'a> {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn dense_dim(&self) -> usize {
        self.embeddings.map_or(0, EmbeddingTable::dim)
    }

    pub fn bundle(&self, rec: &Record, span: CharSpan) -> Result<FeatureBundle, LinkerError> {
        featurize_mention(rec, span, self.window, &self.separators, self.embeddings)
    }

    fn hashed(&self, rec: &Record, span: CharSpan) -> Result<HashedFeatures, LinkerError> {
        let b = self.bundle(rec, span)?;
        let mask = (1u64 << self.hash_bits) - 1;
        let mut sparse: Vec<u32> = b.feature_names().iter().map(|n| (fnv64(n.as_bytes()) & mask) as u32).collect();
        sparse.sort_unstable();
        Ok(HashedFeatures { sparse, dense: b.mention_embedding })
    }
}

/// Feature bundle of `span` in `rec`.
pub fn featurize_mention(
    rec: &Record,
    span: CharSpan,
    window: usize,
    separators: &SeparatorConfig,
    embeddings: Option<&EmbeddingTable>,
) -> Result<FeatureBundle, LinkerError> {
    if span.is_empty() || span.end > rec.char_len() {
        return Err(LinkerError::SpanOutOfRange { record_id: rec.id.clone(), span });
    }
    let tokens = tokenize(&rec.text, separators);
    let inside: Vec<usize> = (0..tokens.len()).filter(|&i| span.contains(&tokens[i].span)).collect();
    let (Some(&first), Some(&last)) = (inside.first(), inside.last()) else {
        return Err(LinkerError::EmptyMention { record_id: rec.id.clone(), span });
    };
    let mention_words: Vec<String> = inside.iter().map(|&i| tokens[i].text.clone()).collect();
    let text = rec.slice(span).expect("span checked above");
    let mention_embedding = embeddings.map(|e| embed_phrase(e, &mention_words));

    let mut left = Vec::new();
    for (k, i) in (0..first).rev().enumerate().take(window) {
        if tokens[i].is_separator {
            break;
        }
        left.push((-(k as isize) - 1, tokens[i].text.clone()));
    }
    let mut right = Vec::new();
    for (k, i) in (last + 1..tokens.len()).enumerate().take(window) {
        if tokens[i].is_separator {
            break;
        }
        right.push((k as isize + 1, tokens[i].text.clone()));
    }
    Ok(FeatureBundle { mention_words, mention_embedding, mention_chars: char_ngrams(&text), left, right })
}

#[derive(Debug, Clone)]
struct HashedFeatures {
    sparse: Vec<u32>,
    dense: Option<Vec<f32>>,
}

/// One weighted training example.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkExample {
    pub record: Record,
    pub span: CharSpan,
    pub concept_id: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkerMeta {
    pub seed: u64,
    pub epochs: usize,
    pub window: usize,
    pub examples: usize,
}

/// Softmax classifier over the ontology's concept ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkerModel {
    classes: Vec<String>,
    hash_bits: u32,
    dense_dim: usize,
    /// `[bucket * classes + class]`.
    sparse: Vec<f32>,
    /// `[dim * classes + class]`.
    dense: Vec<f32>,
    bias: Vec<f32>,
    fingerprint: u64,
    meta: LinkerMeta,
}

impl LinkerModel {
    pub fn init(ont: &Ontology, hash_bits: u32, dense_dim: usize, meta: LinkerMeta) -> Self {
        let classes: Vec<String> = ont.concept_ids().map(String::from).collect();
        let c = classes.len();
        Self {
            hash_bits,
            dense_dim,
            sparse: alloc::vec![0.0; (1usize << hash_bits) * c],
            dense: alloc::vec![0.0; dense_dim * c],
            bias: alloc::vec![0.0; c],
            fingerprint: ont.fingerprint(),
            classes,
            meta,
        }
    }

    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        classes: Vec<String>,
        hash_bits: u32,
        dense_dim: usize,
        sparse: Vec<f32>,
        dense: Vec<f32>,
        bias: Vec<f32>,
        fingerprint: u64,
        meta: LinkerMeta,
    ) -> Result<Self, LinkerError> {
        let c = classes.len();
        if c == 0 || !classes.windows(2).all(|w| w[0] < w[1]) {
            return Err(LinkerError::Malformed("class list must be sorted and non-empty"));
        }
        if !(8..=22).contains(&hash_bits) {
            return Err(LinkerError::Malformed("hash_bits out of range"));
        }
        if sparse.len() != (1usize << hash_bits) * c || dense.len() != dense_dim * c || bias.len() != c {
            return Err(LinkerError::Malformed("weight vector length"));
        }
        Ok(Self { classes, hash_bits, dense_dim, sparse, dense, bias, fingerprint, meta })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn dense_dim(&self) -> usize {
        self.dense_dim
    }

    pub fn sparse(&self) -> &[f32] {
        &self.sparse
    }

    pub fn dense(&self) -> &[f32] {
        &self.dense
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    pub fn meta(&self) -> &LinkerMeta {
        &self.meta
    }

    pub fn check_ontology(&self, ont: &Ontology) -> Result<(), LinkerError> {
        let found = ont.fingerprint();
        if found != self.fingerprint {
            return Err(LinkerError::FingerprintMismatch { expected: self.fingerprint, found });
        }
        Ok(())
    }

    pub fn check_featurizer(&self, f: &MentionFeaturizer<'_>) -> Result<(), LinkerError> {
        if f.hash_bits != self.hash_bits {
            return Err(LinkerError::FeatureMismatch { expected: "matching hash_bits", found: f.hash_bits.to_string() });
        }
        if f.dense_dim() != self.dense_dim {
            return Err(LinkerError::FeatureMismatch {
                expected: "matching embedding dimension",
                found: f.dense_dim().to_string(),
            });
        }
        Ok(())
    }

    fn logits(&self, f: &HashedFeatures) -> Vec<f64> {
        let c = self.classes.len();
        let mut s: Vec<f32> = self.bias.clone();
        for &b in &f.sparse {
            let row = &self.sparse[b as usize * c..(b as usize + 1) * c];
            s.iter_mut().zip(row).for_each(|(x, w)| *x += w);
        }
        if let Some(d) = &f.dense {
            for (j, &x) in d.iter().enumerate() {
                let row = &self.dense[j * c..(j + 1) * c];
                s.iter_mut().zip(row).for_each(|(v, w)| *v += x * w);
            }
        }
        s.into_iter().map(f64::from).collect()
    }

    fn probs(&self, f: &HashedFeatures) -> Vec<f64> {
        let logits = self.logits(f);
        let mut p = alloc::vec![0.0; logits.len()];
        softmax_into(&logits, &mut p);
        p
    }

    /// Full class distribution for a mention, in class order.
    pub fn distribution(&self, featurizer: &MentionFeaturizer<'_>, rec: &Record, span: CharSpan) -> Result<Vec<f64>, LinkerError> {
        Ok(self.probs(&featurizer.hashed(rec, span)?))
    }

    fn step(&mut self, f: &HashedFeatures, target: usize, weight: f64, lr: f64) -> f64 {
        let c = self.classes.len();
        let p = self.probs(f);
        let loss = -crate::math::ln(p[target].max(1e-300));
        let g: Vec<f32> = p
            .iter()
            .enumerate()
            .map(|(k, &pk)| (lr * weight * (pk - if k == target { 1.0 } else { 0.0 })) as f32)
            .collect();
        for &b in &f.sparse {
            let row = &mut self.sparse[b as usize * c..(b as usize + 1) * c];
            row.iter_mut().zip(&g).for_each(|(w, gk)| *w -= gk);
        }
        if let Some(d) = &f.dense {
            for (j, &x) in d.iter().enumerate() {
                let row = &mut self.dense[j * c..(j + 1) * c];
                row.iter_mut().zip(&g).for_each(|(w, gk)| *w -= gk * x);
            }
        }
        self.bias.iter_mut().zip(&g).for_each(|(w, gk)| *w -= gk);
        weight * loss
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkSource {
    ExactMatch,
    Model,
}

impl LinkSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkSource::ExactMatch => "exact",
            LinkSource::Model => "model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(LinkSource::ExactMatch),
            "model" => Some(LinkSource::Model),
            _ => None,
        }
    }
}

impl fmt::Display for LinkSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkedEntity {
    pub mention: Mention,
    pub concept_id: String,
    pub score: f64,
    pub source: LinkSource,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkerLog {
    /// Mean weighted loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains the classifier. Examples with weight 0 are skipped entirely.
pub fn train_linker(
    examples: &[LinkExample],
    ont: &Ontology,
    featurizer: &MentionFeaturizer<'_>,
    cfg: &LinkerConfig,
) -> Result<(LinkerModel, LinkerLog), LinkerError> {
    cfg.validate()?;
    if examples.is_empty() {
        return Err(LinkerError::EmptyDataset);
    }
    if featurizer.hash_bits != cfg.hash_bits || featurizer.window != cfg.window {
        return Err(LinkerError::FeatureMismatch {
            expected: "featurizer built from this configuration",
            found: format!("hash_bits {} window {}", featurizer.hash_bits, featurizer.window),
        });
    }
    let classes: Vec<&str> = ont.concept_ids().collect();
    let mut prepared = Vec::with_capacity(examples.len());
    for ex in examples {
        if !(0.0..=1.0).contains(&ex.weight) {
            return Err(LinkerError::BadWeight(ex.weight));
        }
        let target = classes
            .binary_search(&ex.concept_id.as_str())
            .map_err(|_| LinkerError::UnknownConcept(ex.concept_id.clone()))?;
        if ex.weight > 0.0 {
            prepared.push((featurizer.hashed(&ex.record, ex.span)?, target, ex.weight));
        }
    }
    let meta = LinkerMeta { seed: cfg.seed, epochs: cfg.epochs, window: cfg.window, examples: examples.len() };
    let mut model = LinkerModel::init(ont, cfg.hash_bits, featurizer.dense_dim(), meta);
    let mut log = LinkerLog::default();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 0));
    let mut order: Vec<usize> = (0..prepared.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate / (1.0 + epoch as f64);
        order.shuffle(&mut rng);
        let (mut loss, mut mass) = (0.0, 0.0);
        for &i in &order {
            let (f, target, w) = &prepared[i];
            loss += model.step(f, *target, *w, lr);
            mass += w;
        }
        log.epoch_losses.push(if mass > 0.0 { loss / mass } else { 0.0 });
    }
    Ok((model, log))
}

/// Most probable concept; ties go to the smaller concept id.
pub fn link(
    model: &LinkerModel,
    featurizer: &MentionFeaturizer<'_>,
    rec: &Record,
    mention: &Mention,
) -> Result<LinkedEntity, LinkerError> {
    model.check_featurizer(featurizer)?;
    let p = model.distribution(featurizer, rec, mention.span)?;
    let best = (0..p.len()).fold(0, |b, k| if p[k] > p[b] { k } else { b });
    Ok(LinkedEntity {
        mention: mention.clone(),
        concept_id: model.classes[best].clone(),
        score: p[best],
        source: LinkSource::Model,
    })
}

/// Exact synonym lookup of the mention text, or `None`.
pub fn link_exact(ont: &Ontology, rec: &Record, mention: &Mention) -> Option<LinkedEntity> {
    let text = rec.slice(mention.span)?;
    ont.lookup_exact(&text).map(|id| LinkedEntity {
        mention: mention.clone(),
        concept_id: String::from(id),
        score: 1.0,
        source: LinkSource::ExactMatch,
    })
}

/// Exact match first, the classifier for everything else.
pub fn link_ensemble(
    ont: &Ontology,
    model: &LinkerModel,
    featurizer: &MentionFeaturizer<'_>,
    rec: &Record,
    mention: &Mention,
) -> Result<LinkedEntity, LinkerError> {
    match link_exact(ont, rec, mention) {
        Some(e) => Ok(e),
        None => link(model, featurizer, rec, mention),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::Concept;
    use alloc::vec;

    fn ont() -> Ontology {
        Ontology::from_concepts(vec![
            Concept::new("C1", "fever", ["pyrexia"], None),
            Concept::new("C2", "chest pain", ["cp"], None),
            Concept::new("C3", "cough", core::iter::empty::<&str>(), None),
        ])
        .unwrap()
    }

    fn mention(rec: &Record, start: usize, end: usize) -> Mention {
        Mention { record_id: rec.id.clone(), span: CharSpan::new(start, end), token_range: (0, 0) }
    }

    #[test]
    fn windowing_example() {
        let rec = Record::new("r", "severe chest pain since am");
        let b = featurize_mention(&rec, CharSpan::new(7, 17), 2, &SeparatorConfig::default(), None).unwrap();
        assert_eq!(b.mention_words, vec!["chest", "pain"]);
        assert_eq!(b.left, vec![(-1, "severe".to_string())]);
        assert_eq!(b.right, vec![(1, "since".to_string()), (2, "am".to_string())]);
        let b0 = featurize_mention(&rec, CharSpan::new(7, 17), 0, &SeparatorConfig::default(), None).unwrap();
        assert!(b0.left.is_empty() && b0.right.is_empty());
        let start = featurize_mention(&rec, CharSpan::new(0, 6), 2, &SeparatorConfig::default(), None).unwrap();
        assert!(start.left.is_empty());
    }

    #[test]
    fn context_stops_at_separators() {
        let rec = Record::new("r", "fever, severe cough");
        let b = featurize_mention(&rec, CharSpan::new(14, 19), 3, &SeparatorConfig::default(), None).unwrap();
        assert_eq!(b.left, vec![(-1, "severe".to_string())]);
        let b = featurize_mention(&rec, CharSpan::new(0, 5), 3, &SeparatorConfig::default(), None).unwrap();
        assert!(b.right.is_empty());
    }

    #[test]
    fn feature_groups_are_disjoint() {
        let rec = Record::new("r", "cough cough cough");
        let b = featurize_mention(&rec, CharSpan::new(6, 11), 1, &SeparatorConfig::default(), None).unwrap();
        let names = b.feature_names();
        assert!(names.contains(&"w=cough".to_string()));
        assert!(names.contains(&"l-1=cough".to_string()));
        assert!(names.contains(&"r+1=cough".to_string()));
    }

    #[test]
    fn bad_spans() {
        let rec = Record::new("r", "fever");
        let cfg = SeparatorConfig::default();
        assert!(matches!(featurize_mention(&rec, CharSpan::new(0, 9), 2, &cfg, None), Err(LinkerError::SpanOutOfRange { .. })));
        let rec = Record::new("r", "a , b");
        assert!(matches!(featurize_mention(&rec, CharSpan::new(1, 2), 2, &cfg, None), Err(LinkerError::EmptyMention { .. })));
    }

    #[test]
    fn uniform_model_ties_to_smallest_id() {
        let ont = ont();
        let cfg = LinkerConfig { hash_bits: 10, ..Default::default() };
        let f = cfg.featurizer(SeparatorConfig::default(), None);
        let meta = LinkerMeta { seed: 0, epochs: 0, window: 2, examples: 0 };
        let model = LinkerModel::init(&ont, 10, 0, meta);
        let rec = Record::new("r", "something odd");
        let e = link(&model, &f, &rec, &mention(&rec, 0, 9)).unwrap();
        assert_eq!(e.concept_id, "C1");
        assert_eq!(e.score, 1.0 / 3.0);
        assert_eq!(e.source, LinkSource::Model);
    }

    fn examples(weight: f64) -> Vec<LinkExample> {
        let mk = |text: &str, s, e, c: &str| LinkExample {
            record: Record::new("r", text),
            span: CharSpan::new(s, e),
            concept_id: c.to_string(),
            weight,
        };
        vec![
            mk("fever", 0, 5, "C1"),
            mk("pyrexia, cough", 0, 7, "C1"),
            mk("chest pain", 0, 10, "C2"),
            mk("cp since am", 0, 2, "C2"),
            mk("cough", 0, 5, "C3"),
            mk("fever, cough x3 days", 7, 12, "C3"),
        ]
    }

    #[test]
    fn learns_and_normalizes() {
        let ont = ont();
        let cfg = LinkerConfig { hash_bits: 12, epochs: 20, ..Default::default() };
        let f = cfg.featurizer(SeparatorConfig::default(), None);
        let (model, log) = train_linker(&examples(1.0), &ont, &f, &cfg).unwrap();
        assert!(log.epoch_losses.last().unwrap() < &log.epoch_losses[0]);
        let rec = Record::new("r", "chest pains");
        let m = mention(&rec, 0, 11);
        let dist = model.distribution(&f, &rec, m.span).unwrap();
        assert!((dist.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let e = link(&model, &f, &rec, &m).unwrap();
        assert_eq!(e.concept_id, "C2");
        assert!(e.score > 1.0 / 3.0);
        assert_eq!(link(&model, &f, &rec, &m).unwrap(), e);
    }

    #[test]
    fn zero_weights_change_nothing() {
        let ont = ont();
        let cfg = LinkerConfig { hash_bits: 10, ..Default::default() };
        let f = cfg.featurizer(SeparatorConfig::default(), None);
        let (model, _) = train_linker(&examples(0.0), &ont, &f, &cfg).unwrap();
        assert_eq!(model, LinkerModel::init(&ont, 10, 0, model.meta().clone()));
    }

    #[test]
    fn ensemble_prefers_exact() {
        let ont = ont();
        let cfg = LinkerConfig { hash_bits: 10, ..Default::default() };
        let f = cfg.featurizer(SeparatorConfig::default(), None);
        let model = LinkerModel::init(&ont, 10, 0, LinkerMeta { seed: 0, epochs: 0, window: 2, examples: 0 });
        let rec = Record::new("r", "cough, chest pian");
        let exact = link_ensemble(&ont, &model, &f, &rec, &mention(&rec, 0, 5)).unwrap();
        assert_eq!((exact.concept_id.as_str(), exact.score, exact.source), ("C3", 1.0, LinkSource::ExactMatch));
        let fallback = link_ensemble(&ont, &model, &f, &rec, &mention(&rec, 7, 17)).unwrap();
        assert_eq!(fallback.source, LinkSource::Model);
    }

    #[test]
    fn errors() {
        let ont = ont();
        let cfg = LinkerConfig { hash_bits: 10, ..Default::default() };
        let f = cfg.featurizer(SeparatorConfig::default(), None);
        assert_eq!(train_linker(&[], &ont, &f, &cfg).unwrap_err(), LinkerError::EmptyDataset);
        let mut ex = examples(1.0);
        ex[0].concept_id = "C9".into();
        assert_eq!(train_linker(&ex, &ont, &f, &cfg).unwrap_err(), LinkerError::UnknownConcept("C9".into()));
        let model = LinkerModel::init(&ont, 10, 0, LinkerMeta { seed: 0, epochs: 0, window: 2, examples: 0 });
        let other = ont.merge_children(core::iter::empty()).unwrap();
        assert!(model.check_ontology(&other).is_ok());
        let smaller = Ontology::from_concepts(vec![Concept::new("C1", "fever", core::iter::empty::<&str>(), None)]).unwrap();
        assert!(matches!(model.check_ontology(&smaller), Err(LinkerError::FingerprintMismatch { .. })));
    }
}
