//! Pipeline configuration file (TOML).
//!
//! Every key is optional and falls back to the library default. Unknown keys
//! are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use ccweak_core::embedding::EmbeddingConfig;
use ccweak_core::linker::LinkerConfig;
use ccweak_core::matcher::{MatchConfig, StageSet};
use ccweak_core::synthcorpus::{NoiseConfig, OntologyGenConfig};
use ccweak_core::tagger::{LabelMode, RefineMode, Strategy, TaggerConfig};
use ccweak_core::textprep::{SeparatorConfig, DEFAULT_SEPARATORS};
use serde::{Deserialize, Serialize};

use crate::experiment::{LinkMode, SynthSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {}", path.display())]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config {}", path.display())]
    Parse { path: PathBuf, source: Box<toml::de::Error> },
    #[error("invalid setting {key}: {msg}")]
    Invalid { key: &'static str, msg: String },
    #[error("missing {0}; set it in the config or pass the flag")]
    Missing(&'static str),
}

fn invalid(key: &'static str, msg: impl ToString) -> ConfigError {
    ConfigError::Invalid { key, msg: msg.to_string() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    /// Threads for per-record stages; 0 uses every available core.
    pub workers: usize,
    pub separators: SeparatorSection,
    pub matcher: MatcherSection,
    pub embedding: EmbeddingSection,
    pub tagger: TaggerSection,
    pub linker: LinkerSection,
    pub synth: SynthSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeparatorSection {
    /// Exactly ten distinct punctuation characters.
    pub chars: String,
    pub slash_min_run: usize,
    pub period_digit_guard: bool,
}

impl Default for SeparatorSection {
    fn default() -> Self {
        let d = SeparatorConfig::default();
        Self { chars: DEFAULT_SEPARATORS.iter().collect(), slash_min_run: d.slash_min_run, period_digit_guard: d.period_digit_guard }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatcherSection {
    pub approx_threshold: f64,
    pub embedding_threshold: f64,
    pub ngram_size: usize,
    /// Comma-separated, e.g. `"s1,s2"`.
    pub stages: String,
}

impl Default for MatcherSection {
    fn default() -> Self {
        let d = MatchConfig::default();
        Self {
            approx_threshold: d.approx_threshold,
            embedding_threshold: d.embedding_threshold,
            ngram_size: d.ngram_size,
            stages: "s1,s2,s3".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    pub dim: usize,
    pub epochs: usize,
    pub window: usize,
    pub negatives: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub buckets: u32,
    pub learning_rate: f64,
    pub center: bool,
    pub seed: u64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let d = EmbeddingConfig::default();
        Self {
            dim: d.dim,
            epochs: d.epochs,
            window: d.window,
            negatives: d.negatives,
            min_n: d.min_n,
            max_n: d.max_n,
            buckets: d.buckets,
            learning_rate: d.learning_rate,
            center: d.center,
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaggerSection {
    /// `weak`, `supervised` or `finetune`.
    pub strategy: String,
    /// `soft` or `hard`.
    pub label_mode: String,
    pub max_smoothing: f64,
    pub unmatched_weight: f64,
    pub epochs: usize,
    pub gold_epochs: usize,
    pub learning_rate: f64,
    pub transition_smoothing: f64,
    pub augment_drop_p: f64,
    pub hash_bits: u32,
    /// Post-decoding correction: `none`, `s1` or `s1s2`.
    pub refine: String,
    pub seed: u64,
}

impl Default for TaggerSection {
    fn default() -> Self {
        let d = TaggerConfig::default();
        Self {
            strategy: "weak".into(),
            label_mode: "soft".into(),
            max_smoothing: d.max_smoothing,
            unmatched_weight: d.unmatched_weight,
            epochs: d.epochs,
            gold_epochs: d.gold_epochs,
            learning_rate: d.learning_rate,
            transition_smoothing: d.transition_smoothing,
            augment_drop_p: d.augment_drop_p,
            hash_bits: d.hash_bits,
            refine: "none".into(),
            seed: d.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkerSection {
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub hash_bits: u32,
    /// `exact`, `model` or `ensemble`.
    pub mode: String,
    pub seed: u64,
}

impl Default for LinkerSection {
    fn default() -> Self {
        let d = LinkerConfig::default();
        Self { window: d.window, epochs: d.epochs, learning_rate: d.learning_rate, hash_bits: d.hash_bits, mode: "ensemble".into(), seed: d.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub n_concepts: usize,
    pub n_children: usize,
    pub synonyms_per: Vec<f64>,
    pub train_records: usize,
    pub test_records: usize,
    pub seed: u64,
    pub noise: NoiseSection,
}

impl Default for SynthSection {
    fn default() -> Self {
        let o = OntologyGenConfig::default();
        let s = SynthSettings::default();
        Self {
            n_concepts: o.n_concepts,
            n_children: o.n_children,
            synonyms_per: o.synonyms_per,
            train_records: s.train_records,
            test_records: s.test_records,
            seed: o.seed,
            noise: NoiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub typo_rate: f64,
    pub synonym_sample: Vec<f64>,
    pub abbreviation_map: BTreeMap<String, String>,
    pub abbreviation_rate: f64,
    pub inflection_rate: f64,
    pub no_punct_prob: f64,
    pub filler_vocab: Vec<String>,
    pub filler_phrases: Vec<String>,
    pub filler_rate: f64,
    pub shared_token_rate: f64,
    pub slash_pair_rate: f64,
    pub entities_per_record: Vec<f64>,
    pub joiners: Vec<String>,
    pub zipf_exponent: f64,
    pub topics: usize,
    pub topic_affinity: f64,
}

impl From<NoiseConfig> for NoiseSection {
    fn from(d: NoiseConfig) -> Self {
        Self {
            typo_rate: d.typo_rate,
            synonym_sample: d.synonym_sample,
            abbreviation_map: d.abbreviation_map.into_iter().collect(),
            abbreviation_rate: d.abbreviation_rate,
            inflection_rate: d.inflection_rate,
            no_punct_prob: d.no_punct_prob,
            filler_vocab: d.filler_vocab,
            filler_phrases: d.filler_phrases,
            filler_rate: d.filler_rate,
            shared_token_rate: d.shared_token_rate,
            slash_pair_rate: d.slash_pair_rate,
            entities_per_record: d.entities_per_record,
            joiners: d.joiners,
            zipf_exponent: d.zipf_exponent,
            topics: d.topics,
            topic_affinity: d.topic_affinity,
        }
    }
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseConfig::default().into()
    }
}

impl NoiseSection {
    pub fn to_noise(&self) -> NoiseConfig {
        NoiseConfig {
            typo_rate: self.typo_rate,
            synonym_sample: self.synonym_sample.clone(),
            abbreviation_map: self.abbreviation_map.iter().map(|(a, b)| (a.clone(), b.clone())).collect(),
            abbreviation_rate: self.abbreviation_rate,
            inflection_rate: self.inflection_rate,
            no_punct_prob: self.no_punct_prob,
            filler_vocab: self.filler_vocab.clone(),
            filler_phrases: self.filler_phrases.clone(),
            filler_rate: self.filler_rate,
            shared_token_rate: self.shared_token_rate,
            slash_pair_rate: self.slash_pair_rate,
            entities_per_record: self.entities_per_record.clone(),
            joiners: self.joiners.clone(),
            zipf_exponent: self.zipf_exponent,
            topics: self.topics,
            topic_affinity: self.topic_affinity,
        }
    }
}

/// Input files for `pipeline`. When `ontology` is unset the pipeline
/// generates a synthetic experiment instead.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsSection {
    pub ontology: Option<PathBuf>,
    /// Child ids to merge into their parents before use.
    pub merge: Option<PathBuf>,
    /// Unlabeled training corpus.
    pub corpus: Option<PathBuf>,
    /// Gold test annotations.
    pub gold: Option<PathBuf>,
    /// Gold training annotations for the supervised and finetune strategies.
    pub gold_train: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.to_path_buf(), source: Box::new(e) })
    }

    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Sets every seed in the file.
    pub fn set_seed(&mut self, seed: u64) {
        self.embedding.seed = seed;
        self.tagger.seed = seed;
        self.linker.seed = seed;
        self.synth.seed = seed;
    }

    pub fn workers(&self) -> usize {
        if self.workers == 0 {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        } else {
            self.workers
        }
    }

    pub fn separator_config(&self) -> Result<SeparatorConfig, ConfigError> {
        let s = &self.separators;
        let chars: Vec<char> = s.chars.chars().collect();
        SeparatorConfig::new(&chars, s.slash_min_run, s.period_digit_guard).map_err(|e| invalid("separators", e))
    }

    pub fn match_config(&self) -> Result<MatchConfig, ConfigError> {
        let m = &self.matcher;
        let cfg = MatchConfig { approx_threshold: m.approx_threshold, embedding_threshold: m.embedding_threshold, ngram_size: m.ngram_size };
        cfg.validate().map_err(|e| invalid("matcher", e))?;
        Ok(cfg)
    }

    pub fn stages(&self) -> Result<StageSet, ConfigError> {
        parse_stages(&self.matcher.stages)
    }

    pub fn embedding_config(&self) -> Result<EmbeddingConfig, ConfigError> {
        let e = &self.embedding;
        let cfg = EmbeddingConfig {
            dim: e.dim,
            epochs: e.epochs,
            window: e.window,
            negatives: e.negatives,
            min_n: e.min_n,
            max_n: e.max_n,
            buckets: e.buckets,
            learning_rate: e.learning_rate,
            center: e.center,
            seed: e.seed,
        };
        cfg.validate().map_err(|e| invalid("embedding", e))?;
        Ok(cfg)
    }

    pub fn strategy(&self) -> Result<Strategy, ConfigError> {
        Strategy::parse(&self.tagger.strategy).ok_or_else(|| invalid("tagger.strategy", format!("{:?}", self.tagger.strategy)))
    }

    pub fn refine_mode(&self) -> Result<Option<RefineMode>, ConfigError> {
        match self.tagger.refine.as_str() {
            "none" => Ok(None),
            s => RefineMode::parse(s).map(Some).ok_or_else(|| invalid("tagger.refine", format!("{s:?}"))),
        }
    }

    pub fn tagger_config(&self) -> Result<TaggerConfig, ConfigError> {
        let t = &self.tagger;
        let label_mode = LabelMode::parse(&t.label_mode).ok_or_else(|| invalid("tagger.label_mode", format!("{:?}", t.label_mode)))?;
        let cfg = TaggerConfig {
            max_smoothing: t.max_smoothing,
            unmatched_weight: t.unmatched_weight,
            label_mode,
            epochs: t.epochs,
            gold_epochs: t.gold_epochs,
            learning_rate: t.learning_rate,
            transition_smoothing: t.transition_smoothing,
            augment_drop_p: t.augment_drop_p,
            hash_bits: t.hash_bits,
            seed: t.seed,
        };
        cfg.validate().map_err(|e| invalid("tagger", e))?;
        Ok(cfg)
    }

    pub fn link_mode(&self) -> Result<LinkMode, ConfigError> {
        LinkMode::parse(&self.linker.mode).ok_or_else(|| invalid("linker.mode", format!("{:?}", self.linker.mode)))
    }

    pub fn linker_config(&self) -> Result<LinkerConfig, ConfigError> {
        let l = &self.linker;
        let cfg = LinkerConfig { window: l.window, epochs: l.epochs, learning_rate: l.learning_rate, hash_bits: l.hash_bits, seed: l.seed };
        cfg.validate().map_err(|e| invalid("linker", e))?;
        Ok(cfg)
    }

    pub fn synth_settings(&self) -> Result<SynthSettings, ConfigError> {
        let s = &self.synth;
        let noise = s.noise.to_noise();
        noise.validate().map_err(|e| invalid("synth.noise", e))?;
        Ok(SynthSettings {
            ontology: OntologyGenConfig {
                n_concepts: s.n_concepts,
                n_children: s.n_children,
                synonyms_per: s.synonyms_per.clone(),
                seed: s.seed,
            },
            noise,
            train_records: s.train_records,
            test_records: s.test_records,
        })
    }
}

pub fn parse_stages(s: &str) -> Result<StageSet, ConfigError> {
    StageSet::parse(s).ok_or_else(|| invalid("stages", format!("{s:?}; expected a list like s1,s2,s3")))
}
