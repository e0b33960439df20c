//! Feature templates for the BIO tagger.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::embedding::EmbeddingTable;
use crate::hash::{fnv64, Fnv64};
use crate::textprep::{SeparatorConfig, Token};

/// Bumped whenever the templates below change meaning.
pub const TEMPLATE_VERSION: u32 = 1;

const TEMPLATE_DESCRIPTOR: &str =
    "bias|w|shape|len|pre1-4|suf1-4|chr3|sep|punct|w-2|w-1|w+1|w+2|w-1w|ww+1|emb-unit";

/// Identifies the feature templates; stored in model files.
pub fn template_hash() -> u64 {
    Fnv64::new()
        .write_str(TEMPLATE_DESCRIPTOR)
        .sep()
        .write(&TEMPLATE_VERSION.to_le_bytes())
        .finish()
}

/// Hashed sparse features plus an optional dense vector for one token.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenFeatures {
    pub sparse: Vec<u32>,
    pub dense: Option<Vec<f32>>,
}

fn shape(text: &str) -> String {
    let mut out = String::new();
    for c in text.chars() {
        let s = if c.is_alphabetic() {
            'x'
        } else if c.is_numeric() {
            'd'
        } else {
            c
        };
        if !out.ends_with(s) {
            out.push(s);
        }
    }
    out
}

fn context_name(tokens: &[Token], i: isize) -> &str {
    if i < 0 {
        "<s>"
    } else if i as usize >= tokens.len() {
        "</s>"
    } else {
        let t = &tokens[i as usize];
        if t.is_separator {
            "<sep>"
        } else {
            t.text.as_str()
        }
    }
}

/// Turns token sequences into hashed features.
#[derive(Debug, Clone)]
pub struct Featurizer<'a> {
    separators: SeparatorConfig,
    embeddings: Option<&'a EmbeddingTable>,
    hash_bits: u32,
}

impl<'a> Featurizer<'a> {
    pub fn new(separators: SeparatorConfig, embeddings: Option<&'a EmbeddingTable>, hash_bits: u32) -> Self {
        assert!((8..=26).contains(&hash_bits), "hash_bits out of range");
        Self { separators, embeddings, hash_bits }
    }

    pub fn separators(&self) -> &SeparatorConfig {
        &self.separators
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn dense_dim(&self) -> usize {
        self.embeddings.map_or(0, EmbeddingTable::dim)
    }

    fn bucket(&self, feature: &str) -> u32 {
        (fnv64(feature.as_bytes()) & ((1u64 << self.hash_bits) - 1)) as u32
    }

    pub fn featurize(&self, tokens: &[Token]) -> Vec<TokenFeatures> {
        (0..tokens.len()).map(|i| self.token_features(tokens, i)).collect()
    }

    fn token_features(&self, tokens: &[Token], i: usize) -> TokenFeatures {
        let tok = &tokens[i];
        let mut names: Vec<String> = Vec::with_capacity(32);
        names.push(String::from("bias"));
        let word = context_name(tokens, i as isize);
        names.push(format!("w={word}"));
        if tok.is_separator {
            names.push(String::from("sep"));
        } else if !tok.is_word() {
            names.push(format!("punct={}", tok.text));
        } else {
            names.push(format!("shape={}", shape(&tok.text)));
            let chars: Vec<char> = tok.text.chars().collect();
            names.push(format!("len={}", chars.len().min(6)));
            for k in 1..=4.min(chars.len()) {
                let pre: String = chars[..k].iter().collect();
                let suf: String = chars[chars.len() - k..].iter().collect();
                names.push(format!("pre={pre}"));
                names.push(format!("suf={suf}"));
            }
            let mut bracketed = Vec::with_capacity(chars.len() + 2);
            bracketed.push('<');
            bracketed.extend_from_slice(&chars);
            bracketed.push('>');
            for w in bracketed.windows(3) {
                let g: String = w.iter().collect();
                names.push(format!("c3={g}"));
            }
        }
        let i = i as isize;
        let prev = context_name(tokens, i - 1);
        let next = context_name(tokens, i + 1);
        names.push(format!("w-2={}", context_name(tokens, i - 2)));
        names.push(format!("w-1={prev}"));
        names.push(format!("w+1={next}"));
        names.push(format!("w+2={}", context_name(tokens, i + 2)));
        names.push(format!("w-1w={prev}|{word}"));
        names.push(format!("ww+1={word}|{next}"));

        let sparse = names.iter().map(|n| self.bucket(n)).collect();
        let dense = self.embeddings.map(|emb| {
            let mut v = if tok.is_word() { emb.word_vector(&tok.text) } else { None }
                .unwrap_or_else(|| alloc::vec![0.0; emb.dim()]);
            let norm = libm::sqrtf(v.iter().map(|x| x * x).sum::<f32>());
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            }
            v
        });
        TokenFeatures { sparse, dense }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::tokenize;

    #[test]
    fn shapes() {
        assert_eq!(shape("fever"), "x");
        assert_eq!(shape("x3"), "xd");
        assert_eq!(shape("99"), "d");
    }

    #[test]
    fn separator_and_word_features_differ() {
        let f = Featurizer::new(SeparatorConfig::default(), None, 16);
        let toks = tokenize("fever, cough", f.separators());
        let feats = f.featurize(&toks);
        assert_eq!(feats.len(), 3);
        assert!(feats.iter().all(|t| t.dense.is_none()));
        assert!(feats[1].sparse.len() < feats[0].sparse.len());
        assert!(feats.iter().flat_map(|t| &t.sparse).all(|&b| b < (1 << 16)));
    }

    #[test]
    fn template_hash_is_stable() {
        assert_eq!(template_hash(), template_hash());
    }
}
