//! Subword-aware skip-gram embeddings with negative sampling.
//!
//! A word's vector is the mean of its own row and the rows of its hashed
//! character n-grams, so misspellings and unseen words still get a vector
//! from the n-grams they share with the training vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::fnv32;
use crate::math;
use crate::textprep::{Record, SeparatorConfig, tokenize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbeddingError {
    #[error("corpus has {0} distinct tokens; at least 2 are needed")]
    TooFewTokens(usize),
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("invalid embedding configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("malformed embedding table: {0}")]
    Malformed(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingConfig {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    pub learning_rate: f64,
    /// Subtract the mean composed vocabulary vector from every row after
    /// training. Raw skip-gram rows share a large common component that
    /// pushes unrelated phrases to cosines near 1.
    pub center: bool,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 5,
            window: 3,
            negatives: 5,
            min_n: 3,
            max_n: 5,
            buckets: 1 << 20,
            learning_rate: 0.05,
            center: true,
            seed: 42,
        }
    }
}

impl EmbeddingConfig {
    pub fn validate(&self) -> Result<(), EmbeddingError> {
        if self.dim < 8 {
            return Err(EmbeddingError::InvalidConfig("dim must be at least 8"));
        }
        if self.epochs == 0 || self.window == 0 {
            return Err(EmbeddingError::InvalidConfig("epochs and window must be at least 1"));
        }
        if self.min_n == 0 || self.min_n > self.max_n {
            return Err(EmbeddingError::InvalidConfig("need 1 <= min_n <= max_n"));
        }
        if self.buckets == 0 {
            return Err(EmbeddingError::InvalidConfig("buckets must be positive"));
        }
        Ok(())
    }
}

/// Trained word and subword rows.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    min_n: usize,
    max_n: usize,
    buckets: u32,
    words: BTreeMap<String, usize>,
    word_rows: Vec<f32>,
    subwords: BTreeMap<u32, usize>,
    subword_rows: Vec<f32>,
}

/// Bucket ids of the character n-grams of `<word>`, excluding the whole
/// bracketed word itself.
pub fn subword_buckets(word: &str, min_n: usize, max_n: usize, buckets: u32) -> Vec<u32> {
    let mut bracketed: Vec<char> = Vec::with_capacity(word.len() + 2);
    bracketed.push('<');
    bracketed.extend(word.chars());
    bracketed.push('>');
    let len = bracketed.len();
    let mut out = Vec::new();
    let mut buf = String::new();
    for n in min_n..=max_n {
        if n >= len {
            break;
        }
        for start in 0..=len - n {
            buf.clear();
            buf.extend(&bracketed[start..start + n]);
            out.push(fnv32(buf.as_bytes()) % buckets);
        }
    }
    out
}

fn word_tokens(text: &str) -> Vec<String> {
    tokenize(text, &SeparatorConfig::default())
        .into_iter()
        .filter(|t| t.is_word())
        .map(|t| t.text)
        .collect()
}

impl EmbeddingTable {
    /// Assembles a table from raw rows, e.g. after deserialization.
    pub fn from_parts(
        dim: usize,
        ngram_range: (usize, usize),
        buckets: u32,
        words: Vec<(String, Vec<f32>)>,
        subwords: Vec<(u32, Vec<f32>)>,
    ) -> Result<Self, EmbeddingError> {
        if dim < 8 {
            return Err(EmbeddingError::Malformed("dim below 8"));
        }
        let mut table = Self {
            dim,
            min_n: ngram_range.0,
            max_n: ngram_range.1,
            buckets,
            words: BTreeMap::new(),
            word_rows: Vec::with_capacity(words.len() * dim),
            subwords: BTreeMap::new(),
            subword_rows: Vec::with_capacity(subwords.len() * dim),
        };
        for (w, row) in words {
            if row.len() != dim {
                return Err(EmbeddingError::DimensionMismatch(dim, row.len()));
            }
            let idx = table.words.len();
            if table.words.insert(w, idx).is_some() {
                return Err(EmbeddingError::Malformed("duplicate word"));
            }
            table.word_rows.extend_from_slice(&row);
        }
        for (b, row) in subwords {
            if row.len() != dim {
                return Err(EmbeddingError::DimensionMismatch(dim, row.len()));
            }
            if b >= buckets {
                return Err(EmbeddingError::Malformed("subword bucket out of range"));
            }
            let idx = table.subwords.len();
            if table.subwords.insert(b, idx).is_some() {
                return Err(EmbeddingError::Malformed("duplicate subword bucket"));
            }
            table.subword_rows.extend_from_slice(&row);
        }
        Ok(table)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ngram_range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn buckets(&self) -> u32 {
        self.buckets
    }

    pub fn vocab_len(&self) -> usize {
        self.words.len()
    }

    pub fn subword_len(&self) -> usize {
        self.subwords.len()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains_key(word)
    }

    /// Raw word row (not composed with subwords).
    pub fn word_row(&self, word: &str) -> Option<&[f32]> {
        self.words.get(word).map(|&i| &self.word_rows[i * self.dim..(i + 1) * self.dim])
    }

    pub fn subword_row(&self, bucket: u32) -> Option<&[f32]> {
        self.subwords.get(&bucket).map(|&i| &self.subword_rows[i * self.dim..(i + 1) * self.dim])
    }

    /// Words in lexicographic order with their raw rows.
    pub fn words(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.words.iter().map(|(w, &i)| (w.as_str(), &self.word_rows[i * self.dim..(i + 1) * self.dim]))
    }

    /// Subword buckets in ascending order with their rows.
    pub fn subwords(&self) -> impl Iterator<Item = (u32, &[f32])> {
        self.subwords.iter().map(|(&b, &i)| (b, &self.subword_rows[i * self.dim..(i + 1) * self.dim]))
    }

    /// Composed vector for `word`, or `None` when neither the word nor any
    /// of its n-grams is known.
    pub fn word_vector(&self, word: &str) -> Option<Vec<f32>> {
        let mut acc = vec![0f32; self.dim];
        let mut n = 0usize;
        if let Some(row) = self.word_row(word) {
            add(&mut acc, row);
            n += 1;
        }
        for b in subword_buckets(word, self.min_n, self.max_n, self.buckets) {
            if let Some(row) = self.subword_row(b) {
                add(&mut acc, row);
                n += 1;
            }
        }
        if n == 0 {
            return None;
        }
        let n = n as f32;
        acc.iter_mut().for_each(|x| *x /= n);
        Some(acc)
    }
}

fn add(acc: &mut [f32], row: &[f32]) {
    for (a, r) in acc.iter_mut().zip(row) {
        *a += r;
    }
}

/// Mean of the token vectors. Tokens without any coverage are skipped; the
/// result is all-zero only when no token is covered.
pub fn embed_phrase<S: AsRef<str>>(emb: &EmbeddingTable, tokens: &[S]) -> Vec<f32> {
    let mut acc = vec![0f32; emb.dim];
    let mut n = 0usize;
    for t in tokens {
        if let Some(v) = emb.word_vector(t.as_ref()) {
            add(&mut acc, &v);
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f32;
        acc.iter_mut().for_each(|x| *x /= n);
    }
    acc
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(u: &[f32], v: &[f32]) -> Result<f64, EmbeddingError> {
    if u.len() != v.len() {
        return Err(EmbeddingError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0f64, 0f64, 0f64);
    for (&a, &b) in u.iter().zip(v) {
        let (a, b) = (f64::from(a), f64::from(b));
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (math::sqrt(nu) * math::sqrt(nv))).clamp(-1.0, 1.0))
}

fn sigmoid(x: f32) -> f32 {
    if x > 20.0 {
        1.0
    } else if x < -20.0 {
        0.0
    } else {
        1.0 / (1.0 + math::expf(-x))
    }
}

/// Trains a table on the word tokens of `corpus`. Returns the table and the
/// mean loss of each epoch.
///
/// Training is single-threaded and fully determined by `cfg.seed`.
pub fn train_embeddings(
    corpus: &[Record],
    cfg: &EmbeddingConfig,
) -> Result<(EmbeddingTable, Vec<f64>), EmbeddingError> {
    cfg.validate()?;
    let sentences: Vec<Vec<String>> = corpus.iter().map(|r| word_tokens(&r.text)).collect();

    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for s in &sentences {
        for w in s {
            *counts.entry(w.as_str()).or_default() += 1;
        }
    }
    if counts.len() < 2 {
        return Err(EmbeddingError::TooFewTokens(counts.len()));
    }
    let vocab: Vec<&str> = counts.keys().copied().collect();
    let word_index: BTreeMap<&str, usize> = vocab.iter().enumerate().map(|(i, w)| (*w, i)).collect();
    let v = vocab.len();
    let dim = cfg.dim;

    // Input rows: one per word, then one per distinct subword bucket.
    let mut bucket_rows: BTreeMap<u32, usize> = BTreeMap::new();
    let per_word_buckets: Vec<Vec<u32>> = vocab
        .iter()
        .map(|w| subword_buckets(w, cfg.min_n, cfg.max_n, cfg.buckets))
        .collect();
    for bs in &per_word_buckets {
        for &b in bs {
            bucket_rows.entry(b).or_insert(0);
        }
    }
    for (i, row) in bucket_rows.values_mut().enumerate() {
        *row = v + i;
    }
    let input_rows_of: Vec<Vec<usize>> = per_word_buckets
        .iter()
        .enumerate()
        .map(|(wi, bs)| {
            let mut rows = Vec::with_capacity(bs.len() + 1);
            rows.push(wi);
            rows.extend(bs.iter().map(|b| bucket_rows[b]));
            rows
        })
        .collect();

    let n_input = v + bucket_rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let bound = 1.0 / dim as f32;
    let mut input: Vec<f32> = (0..n_input * dim).map(|_| rng.gen_range(-bound..bound)).collect();
    let mut output = vec![0f32; v * dim];

    let weights: Vec<f64> = vocab.iter().map(|w| libm::pow(counts[w] as f64, 0.75)).collect();
    let negative_dist = WeightedIndex::new(&weights).expect("positive counts");

    let ids: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().map(|w| word_index[w.as_str()]).collect())
        .collect();
    let total_tokens: usize = ids.iter().map(Vec::len).sum();
    let total_steps = (total_tokens * cfg.epochs).max(1) as f64;

    let mut hidden = vec![0f32; dim];
    let mut grad = vec![0f32; dim];
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut processed = 0usize;
    for _ in 0..cfg.epochs {
        let mut loss_sum = 0f64;
        let mut loss_n = 0usize;
        for sent in &ids {
            for (i, &center) in sent.iter().enumerate() {
                let lr = (cfg.learning_rate * (1.0 - processed as f64 / total_steps)) as f32;
                processed += 1;
                let b = rng.gen_range(1..=cfg.window);
                let rows = &input_rows_of[center];
                let lo = i.saturating_sub(b);
                let hi = (i + b).min(sent.len() - 1);
                for (j, &target) in sent.iter().enumerate().take(hi + 1).skip(lo) {
                    if j == i {
                        continue;
                    }
                    hidden.iter_mut().for_each(|h| *h = 0.0);
                    for &r in rows {
                        add(&mut hidden, &input[r * dim..(r + 1) * dim]);
                    }
                    let inv = 1.0 / rows.len() as f32;
                    hidden.iter_mut().for_each(|h| *h *= inv);
                    grad.iter_mut().for_each(|g| *g = 0.0);

                    let mut loss = 0f32;
                    for k in 0..=cfg.negatives {
                        let (out_id, label) = if k == 0 {
                            (target, 1.0f32)
                        } else {
                            let mut neg = negative_dist.sample(&mut rng);
                            while neg == target && v > 1 {
                                neg = negative_dist.sample(&mut rng);
                            }
                            (neg, 0.0f32)
                        };
                        let wo = &mut output[out_id * dim..(out_id + 1) * dim];
                        let dot: f32 = wo.iter().zip(&hidden).map(|(a, b)| a * b).sum();
                        let score = sigmoid(dot);
                        let p = if label > 0.5 { score } else { 1.0 - score };
                        loss -= math::lnf(p.max(1e-7));
                        let alpha = lr * (label - score);
                        for d in 0..dim {
                            grad[d] += alpha * wo[d];
                            wo[d] += alpha * hidden[d];
                        }
                    }
                    for &r in rows {
                        add(&mut input[r * dim..(r + 1) * dim], &grad);
                    }
                    loss_sum += f64::from(loss);
                    loss_n += 1;
                }
            }
        }
        epoch_losses.push(if loss_n == 0 { 0.0 } else { loss_sum / loss_n as f64 });
    }

    if cfg.center {
        let mut mean = vec![0f64; dim];
        for rows in &input_rows_of {
            let inv = 1.0 / rows.len() as f64;
            for &r in rows {
                for (m, &x) in mean.iter_mut().zip(&input[r * dim..(r + 1) * dim]) {
                    *m += f64::from(x) * inv;
                }
            }
        }
        let mean: Vec<f32> = mean.iter().map(|m| (m / v as f64) as f32).collect();
        for row in input.chunks_exact_mut(dim) {
            for (x, m) in row.iter_mut().zip(&mean) {
                *x -= m;
            }
        }
    }

    let table = EmbeddingTable {
        dim,
        min_n: cfg.min_n,
        max_n: cfg.max_n,
        buckets: cfg.buckets,
        words: vocab.iter().enumerate().map(|(i, w)| (String::from(*w), i)).collect(),
        word_rows: input[..v * dim].to_vec(),
        subwords: bucket_rows.iter().map(|(&b, &r)| (b, r - v)).collect(),
        subword_rows: input[v * dim..].to_vec(),
    };
    Ok((table, epoch_losses))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn small_cfg() -> EmbeddingConfig {
        EmbeddingConfig { dim: 16, epochs: 3, buckets: 1 << 12, ..EmbeddingConfig::default() }
    }

    #[test]
    fn cosine_examples() {
        let v = [0.3f32, -1.0, 2.0];
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let expected = 1.0 / libm::sqrt(2.0);
        assert!((cosine(&[1.0, 1.0], &[1.0, 0.0]).unwrap() - expected).abs() < 1e-12);
        assert_eq!(cosine(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(cosine(&[1.0], &[1.0, 0.0]), Err(EmbeddingError::DimensionMismatch(1, 2)));
    }

    #[test]
    fn subword_buckets_skip_whole_word() {
        // "<ab>" has 4 chars: trigrams "<ab", "ab>"; 4-grams would be the whole word.
        let b = subword_buckets("ab", 3, 5, 1 << 20);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0], fnv32(b"<ab") % (1 << 20));
    }

    #[test]
    fn too_few_tokens() {
        let corpus = [Record::new("1", "fever fever"), Record::new("2", "fever")];
        assert_eq!(train_embeddings(&corpus, &small_cfg()).unwrap_err(), EmbeddingError::TooFewTokens(1));
    }

    #[test]
    fn two_token_corpus_is_finite() {
        let corpus: Vec<Record> = (0..50).map(|i| Record::new(format!("{i}"), "fever cough")).collect();
        let (table, _) = train_embeddings(&corpus, &small_cfg()).unwrap();
        assert_eq!(table.vocab_len(), 2);
        for w in ["fever", "cough"] {
            assert!(table.word_vector(w).unwrap().iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let corpus: Vec<Record> =
            (0..30).map(|i| Record::new(format!("{i}"), "chest pain, fever / cough headache")).collect();
        let a = train_embeddings(&corpus, &small_cfg()).unwrap();
        let b = train_embeddings(&corpus, &small_cfg()).unwrap();
        assert_eq!(a, b);
        let c = train_embeddings(&corpus, &EmbeddingConfig { seed: 7, ..small_cfg() }).unwrap();
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn phrase_mean_semantics() {
        let corpus: Vec<Record> = (0..20).map(|i| Record::new(format!("{i}"), "alpha beta gamma")).collect();
        let (table, _) = train_embeddings(&corpus, &small_cfg()).unwrap();
        let one = embed_phrase(&table, &["alpha"]);
        assert_eq!(one, table.word_vector("alpha").unwrap());
        assert_eq!(embed_phrase(&table, &["alpha", "alpha"]), one);
        assert!(embed_phrase(&table, &["zz"]).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn oov_word_uses_known_subwords() {
        let corpus: Vec<Record> = (0..20).map(|i| Record::new(format!("{i}"), "headache nausea")).collect();
        let (table, _) = train_embeddings(&corpus, &small_cfg()).unwrap();
        assert!(!table.contains("headach"));
        // Hand-compose: mean of the rows of whichever n-grams of "headach" are known.
        let mut expected = vec![0f32; table.dim()];
        let mut n = 0;
        for b in subword_buckets("headach", 3, 5, table.buckets()) {
            if let Some(row) = table.subword_row(b) {
                add(&mut expected, row);
                n += 1;
            }
        }
        assert!(n > 0);
        expected.iter_mut().for_each(|x| *x /= n as f32);
        let got = embed_phrase(&table, &["headach"]);
        assert_eq!(got, expected);
        assert!(got.iter().any(|&x| x != 0.0));
    }

    #[test]
    fn from_parts_validates() {
        let row = vec![0.0f32; 8];
        assert!(EmbeddingTable::from_parts(8, (3, 5), 16, vec![("a".into(), row.clone())], vec![(3, row.clone())]).is_ok());
        assert!(EmbeddingTable::from_parts(8, (3, 5), 16, vec![], vec![(16, row.clone())]).is_err());
        assert!(EmbeddingTable::from_parts(8, (3, 5), 16, vec![("a".into(), vec![0.0; 4])], vec![]).is_err());
        assert!(EmbeddingTable::from_parts(4, (3, 5), 16, vec![], vec![]).is_err());
    }
}
