//! BIO sequence labeling for mention extraction.
//!
//! Training targets are smoothed according to each token's weak-label
//! confidence and every token's loss is scaled by its weight, so low
//! confidence matches and unmatched chunks supervise the model less.

mod features;
mod model;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

pub use features::{template_hash, Featurizer, TokenFeatures, TEMPLATE_VERSION};
pub use model::{
    augment_sequence, decode, decode_tags, refine_with_matcher, train_tagger, LabelMode, RefineMode, Strategy, TaggerConfig,
    TaggerModel, TrainLog, TrainingMeta, TrainingSet,
};

use crate::matcher::WeakRecord;
use crate::textprep::{tokenize, CharSpan, Record, SeparatorConfig, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TaggerError {
    #[error("annotations {a:?} and {b:?} overlap")]
    Overlap { a: CharSpan, b: CharSpan },
    #[error("span {0:?} is not on token boundaries")]
    Misaligned(CharSpan),
    #[error("span {0:?} contains an active separator")]
    SeparatorInside(CharSpan),
    #[error("confidence {0} outside [0, 1]")]
    BadConfidence(f64),
    #[error("empty training set")]
    EmptyDataset,
    #[error("fine-tuning needs a non-empty gold set")]
    MissingGold,
    #[error("invalid tagger configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("model expects {expected}, featurizer provides {found}")]
    FeatureMismatch { expected: &'static str, found: String },
    #[error("malformed model: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BioTag {
    B,
    I,
    O,
}

impl BioTag {
    pub const ALL: [BioTag; 3] = [BioTag::B, BioTag::I, BioTag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BioTag::B => "B",
            BioTag::I => "I",
            BioTag::O => "O",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "B" => Some(BioTag::B),
            "I" => Some(BioTag::I),
            "O" => Some(BioTag::O),
            _ => None,
        }
    }
}

impl fmt::Display for BioTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A tokenized record with per-token tags and training weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggedSequence {
    pub record_id: String,
    pub text: String,
    pub tokens: Vec<Token>,
    pub tags: Vec<BioTag>,
    pub weights: Vec<f64>,
}

impl TaggedSequence {
    pub fn record(&self) -> Record {
        Record { id: self.record_id.clone(), text: self.text.clone() }
    }

    /// Spans recovered from the tags, without repair.
    pub fn mentions(&self) -> Vec<Mention> {
        mentions_from_tags(&self.record_id, &self.tokens, &self.tags)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub record_id: String,
    pub span: CharSpan,
    /// First and last token index, inclusive.
    pub token_range: (usize, usize),
}

/// A span to encode plus its confidence; gold spans use 1.0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledSpan {
    pub span: CharSpan,
    pub confidence: f64,
}

impl LabeledSpan {
    pub fn gold(span: CharSpan) -> Self {
        Self { span, confidence: 1.0 }
    }
}

/// Tags and weights for one record.
///
/// Annotated tokens take their span's confidence. Tokens inside
/// `unmatched` spans take `unmatched_weight`. Every other token is a
/// confident O (weight 1.0), except when the record has no annotations and
/// some unmatched spans: then nothing in it is trusted and all of its
/// tokens take `unmatched_weight`.
pub fn encode_bio(
    rec: &Record,
    spans: &[LabeledSpan],
    unmatched: &[CharSpan],
    separators: &SeparatorConfig,
    unmatched_weight: f64,
) -> Result<TaggedSequence, TaggerError> {
    let tokens = tokenize(&rec.text, separators);
    let n = tokens.len();
    let mut sorted: Vec<&LabeledSpan> = spans.iter().collect();
    sorted.sort_by_key(|s| s.span);
    for w in sorted.windows(2) {
        if w[0].span.overlap(&w[1].span) > 0 || w[0].span == w[1].span {
            return Err(TaggerError::Overlap { a: w[0].span, b: w[1].span });
        }
    }
    let default_weight = if spans.is_empty() && !unmatched.is_empty() { unmatched_weight } else { 1.0 };
    let mut tags = alloc::vec![BioTag::O; n];
    let mut weights = alloc::vec![default_weight; n];
    for (t, w) in tokens.iter().zip(weights.iter_mut()) {
        if unmatched.iter().any(|u| u.contains(&t.span)) {
            *w = unmatched_weight;
        }
    }
    for s in sorted {
        if !(0.0..=1.0).contains(&s.confidence) {
            return Err(TaggerError::BadConfidence(s.confidence));
        }
        let first = tokens.iter().position(|t| t.span.start == s.span.start);
        let last = tokens.iter().position(|t| t.span.end == s.span.end);
        let (Some(first), Some(last)) = (first, last) else {
            return Err(TaggerError::Misaligned(s.span));
        };
        if last < first {
            return Err(TaggerError::Misaligned(s.span));
        }
        if tokens[first..=last].iter().any(|t| t.is_separator) {
            return Err(TaggerError::SeparatorInside(s.span));
        }
        for i in first..=last {
            tags[i] = if i == first { BioTag::B } else { BioTag::I };
            weights[i] = s.confidence;
        }
    }
    Ok(TaggedSequence { record_id: rec.id.clone(), text: rec.text.clone(), tokens, tags, weights })
}

/// [`encode_bio`] for a weak-labeled record.
pub fn encode_weak(
    weak: &WeakRecord,
    separators: &SeparatorConfig,
    unmatched_weight: f64,
) -> Result<TaggedSequence, TaggerError> {
    let spans: Vec<LabeledSpan> =
        weak.annotations.iter().map(|a| LabeledSpan { span: a.span, confidence: a.confidence }).collect();
    encode_bio(&weak.record(), &spans, &weak.unmatched_spans, separators, unmatched_weight)
}

/// Smoothed target distribution over (B, I, O).
pub fn smooth_targets(tag: BioTag, confidence: f64, max_smoothing: f64) -> [f64; 3] {
    let eps = max_smoothing.min(1.0 - confidence).max(0.0);
    let mut q = [eps / 3.0; 3];
    q[tag.index()] += 1.0 - eps;
    q
}

/// Maximal `B I*` runs. An `I` that does not continue a mention starts a
/// new one, and separator tokens never belong to a mention.
pub fn mentions_from_tags(record_id: &str, tokens: &[Token], tags: &[BioTag]) -> Vec<Mention> {
    let mut out = Vec::new();
    let mut open: Option<usize> = None;
    let close = |start: usize, end: usize, out: &mut Vec<Mention>| {
        out.push(Mention {
            record_id: String::from(record_id),
            span: CharSpan::new(tokens[start].span.start, tokens[end].span.end),
            token_range: (start, end),
        });
    };
    for (i, (tok, &tag)) in tokens.iter().zip(tags).enumerate() {
        let tag = if tok.is_separator { BioTag::O } else { tag };
        match (tag, open) {
            (BioTag::B, Some(s)) => {
                close(s, i - 1, &mut out);
                open = Some(i);
            }
            (BioTag::B, None) | (BioTag::I, None) => open = Some(i),
            (BioTag::O, Some(s)) => {
                close(s, i - 1, &mut out);
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        close(s, tokens.len() - 1, &mut out);
    }
    out
}

/// Rewrites tags so that every `I` continues a mention.
pub fn repair(tags: &mut [BioTag]) {
    let mut prev = BioTag::O;
    for t in tags.iter_mut() {
        if *t == BioTag::I && prev == BioTag::O {
            *t = BioTag::B;
        }
        prev = *t;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn enc(text: &str, spans: &[(usize, usize, f64)], unmatched: &[(usize, usize)]) -> TaggedSequence {
        let rec = Record::new("r", text);
        let spans: Vec<LabeledSpan> =
            spans.iter().map(|&(s, e, c)| LabeledSpan { span: CharSpan::new(s, e), confidence: c }).collect();
        let unmatched: Vec<CharSpan> = unmatched.iter().map(|&(s, e)| CharSpan::new(s, e)).collect();
        encode_bio(&rec, &spans, &unmatched, &SeparatorConfig::default(), 0.3).unwrap()
    }

    use BioTag::{B, I, O};

    #[test]
    fn encode_two_exact_matches() {
        let s = enc("chest pain/fever", &[(0, 10, 1.0), (11, 16, 1.0)], &[]);
        assert_eq!(s.tags, vec![B, I, O, B]);
        assert_eq!(s.weights, vec![1.0; 4]);
    }

    #[test]
    fn encode_unmatched_record() {
        let s = enc("xq zz, yy", &[], &[(0, 5), (7, 9)]);
        assert_eq!(s.tags, vec![O; 4]);
        assert_eq!(s.weights, vec![0.3; 4]);
    }

    #[test]
    fn encode_mixed_record() {
        let s = enc("fever, zz", &[(0, 5, 0.8)], &[(7, 9)]);
        assert_eq!(s.tags, vec![B, O, O]);
        assert_eq!(s.weights, vec![0.8, 1.0, 0.3]);
    }

    #[test]
    fn encode_errors() {
        let rec = Record::new("r", "chest pain, fever");
        let cfg = SeparatorConfig::default();
        let g = |s, e| LabeledSpan::gold(CharSpan::new(s, e));
        assert!(matches!(encode_bio(&rec, &[g(0, 10), g(6, 10)], &[], &cfg, 0.3), Err(TaggerError::Overlap { .. })));
        assert!(matches!(encode_bio(&rec, &[g(0, 4)], &[], &cfg, 0.3), Err(TaggerError::Misaligned(_))));
        assert!(matches!(encode_bio(&rec, &[g(0, 17)], &[], &cfg, 0.3), Err(TaggerError::SeparatorInside(_))));
        let bad = LabeledSpan { span: CharSpan::new(0, 5), confidence: 1.5 };
        assert!(matches!(encode_bio(&rec, &[bad], &[], &cfg, 0.3), Err(TaggerError::BadConfidence(_))));
    }

    #[test]
    fn smoothing_examples() {
        assert_eq!(smooth_targets(B, 1.0, 0.3), [1.0, 0.0, 0.0]);
        let q = smooth_targets(B, 0.8, 0.3);
        let want = [1.0 - 0.2 + 0.2 / 3.0, 0.2 / 3.0, 0.2 / 3.0];
        for k in 0..3 {
            assert!((q[k] - want[k]).abs() < 1e-12);
        }
        assert!((q[0] - 0.8667).abs() < 1e-4 && (q[1] - 0.0667).abs() < 1e-4);
        let q = smooth_targets(O, 0.0, 0.3);
        assert!((q[2] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn mentions_and_repair() {
        let rec = Record::new("r", "a bb cc dd");
        let toks = tokenize(&rec.text, &SeparatorConfig::default());
        let m = mentions_from_tags("r", &toks, &[O, B, I, O]);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].token_range, (1, 2));
        assert_eq!(m[0].span, CharSpan::new(2, 7));

        let mut tags = vec![O, I, I, O];
        repair(&mut tags);
        assert_eq!(tags, vec![O, B, I, O]);
        assert_eq!(mentions_from_tags("r", &toks, &tags), m);
        assert!(mentions_from_tags("r", &toks, &[O; 4]).is_empty());
    }

    #[test]
    fn separators_split_mentions() {
        let rec = Record::new("r", "aa, bb");
        let toks = tokenize(&rec.text, &SeparatorConfig::default());
        let m = mentions_from_tags("r", &toks, &[B, I, I]);
        assert_eq!(m.iter().map(|m| m.token_range).collect::<Vec<_>>(), vec![(0, 0), (2, 2)]);
    }
}
