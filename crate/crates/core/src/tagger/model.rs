use alloc::string::ToString;
use alloc::vec::Vec;
use core::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::features::{template_hash, Featurizer, TokenFeatures};
use super::{mentions_from_tags, repair, smooth_targets, BioTag, Mention, TaggedSequence, TaggerError};
use crate::hash::derive_seed;
use crate::matcher::Matcher;
use crate::math::{ln, softmax_into};
use crate::textprep::{drop_separators, tokenize, Record, SeparatorConfig};

const START: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    WeakOnly,
    Supervised,
    FineTune,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::WeakOnly => "weak",
            Strategy::Supervised => "supervised",
            Strategy::FineTune => "finetune",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "weak" => Some(Strategy::WeakOnly),
            "supervised" => Some(Strategy::Supervised),
            "finetune" => Some(Strategy::FineTune),
            _ => None,
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How weak labels become training targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LabelMode {
    /// Targets smoothed by confidence; losses scaled by the token weight.
    Soft,
    /// One-hot targets; annotated tokens count fully whatever their
    /// confidence.
    Hard,
}

impl LabelMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelMode::Soft => "soft",
            LabelMode::Hard => "hard",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "soft" => Some(LabelMode::Soft),
            "hard" => Some(LabelMode::Hard),
            _ => None,
        }
    }
}

pub enum TrainingSet<'d> {
    WeakOnly(&'d [TaggedSequence]),
    Supervised(&'d [TaggedSequence]),
    FineTune { weak: &'d [TaggedSequence], gold: &'d [TaggedSequence] },
}

impl TrainingSet<'_> {
    pub fn strategy(&self) -> Strategy {
        match self {
            TrainingSet::WeakOnly(_) => Strategy::WeakOnly,
            TrainingSet::Supervised(_) => Strategy::Supervised,
            TrainingSet::FineTune { .. } => Strategy::FineTune,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaggerConfig {
    /// Upper bound on the smoothing mass ε.
    pub max_smoothing: f64,
    /// Weight of tokens in chunks no matcher accepted.
    pub unmatched_weight: f64,
    pub label_mode: LabelMode,
    /// Epochs over weak data.
    pub epochs: usize,
    /// Epochs over gold data (supervised training and the fine-tuning phase).
    pub gold_epochs: usize,
    pub learning_rate: f64,
    /// Additive smoothing of transition counts.
    pub transition_smoothing: f64,
    /// Separator drop probability for augmented copies; 0 disables them.
    pub augment_drop_p: f64,
    pub hash_bits: u32,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        Self {
            max_smoothing: 0.3,
            unmatched_weight: 0.3,
            label_mode: LabelMode::Soft,
            epochs: 5,
            gold_epochs: 15,
            learning_rate: 0.1,
            transition_smoothing: 0.1,
            augment_drop_p: 0.0,
            hash_bits: 19,
            seed: 42,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<(), TaggerError> {
        let bad = |m| Err(TaggerError::InvalidConfig(m));
        if !(0.0..=1.0).contains(&self.max_smoothing) {
            return bad("max_smoothing must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.unmatched_weight) {
            return bad("unmatched_weight must be in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.augment_drop_p) {
            return bad("augment_drop_p must be in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.transition_smoothing > 0.0 && self.transition_smoothing.is_finite()) {
            return bad("transition_smoothing must be positive");
        }
        if !(8..=26).contains(&self.hash_bits) {
            return bad("hash_bits must be in 8..=26");
        }
        Ok(())
    }

    /// A featurizer matching this configuration.
    pub fn featurizer<'a>(
        &self,
        separators: SeparatorConfig,
        embeddings: Option<&'a crate::embedding::EmbeddingTable>,
    ) -> Featurizer<'a> {
        Featurizer::new(separators, embeddings, self.hash_bits)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingMeta {
    pub strategy: Strategy,
    pub label_mode: LabelMode,
    pub seed: u64,
    pub epochs: usize,
    pub gold_epochs: usize,
    pub augment_drop_p: f64,
}

/// Per-token log-linear emission scores plus first-order transitions.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel {
    hash_bits: u32,
    dense_dim: usize,
    /// `[bucket * 3 + tag]`.
    emission: Vec<f64>,
    /// `[dim * 3 + tag]`.
    dense: Vec<f64>,
    /// Rows are the previous tag (B, I, O, start), columns the next tag.
    transitions: [[f64; 3]; 4],
    template_hash: u64,
    meta: TrainingMeta,
}

impl TaggerModel {
    pub fn init(hash_bits: u32, dense_dim: usize, meta: TrainingMeta) -> Self {
        Self {
            hash_bits,
            dense_dim,
            emission: alloc::vec![0.0; (1usize << hash_bits) * 3],
            dense: alloc::vec![0.0; dense_dim * 3],
            transitions: [[0.0; 3]; 4],
            template_hash: template_hash(),
            meta,
        }
    }

    pub fn from_parts(
        hash_bits: u32,
        dense_dim: usize,
        emission: Vec<f64>,
        dense: Vec<f64>,
        transitions: [[f64; 3]; 4],
        template: u64,
        meta: TrainingMeta,
    ) -> Result<Self, TaggerError> {
        if !(8..=26).contains(&hash_bits) {
            return Err(TaggerError::Malformed("hash_bits out of range"));
        }
        if emission.len() != (1usize << hash_bits) * 3 || dense.len() != dense_dim * 3 {
            return Err(TaggerError::Malformed("weight vector length"));
        }
        if template != template_hash() {
            return Err(TaggerError::FeatureMismatch {
                expected: "current feature templates",
                found: alloc::format!("template hash {template:#018x}"),
            });
        }
        Ok(Self { hash_bits, dense_dim, emission, dense, transitions, template_hash: template, meta })
    }

    pub fn hash_bits(&self) -> u32 {
        self.hash_bits
    }

    pub fn dense_dim(&self) -> usize {
        self.dense_dim
    }

    pub fn emission(&self) -> &[f64] {
        &self.emission
    }

    pub fn dense(&self) -> &[f64] {
        &self.dense
    }

    pub fn transitions(&self) -> &[[f64; 3]; 4] {
        &self.transitions
    }

    pub fn template_hash(&self) -> u64 {
        self.template_hash
    }

    pub fn meta(&self) -> &TrainingMeta {
        &self.meta
    }

    pub fn check_featurizer(&self, f: &Featurizer<'_>) -> Result<(), TaggerError> {
        if f.hash_bits() != self.hash_bits {
            return Err(TaggerError::FeatureMismatch {
                expected: "matching hash_bits",
                found: f.hash_bits().to_string(),
            });
        }
        if f.dense_dim() != self.dense_dim {
            return Err(TaggerError::FeatureMismatch {
                expected: "matching embedding dimension",
                found: f.dense_dim().to_string(),
            });
        }
        Ok(())
    }

    fn scores(&self, f: &TokenFeatures) -> [f64; 3] {
        let mut s = [0.0; 3];
        for &b in &f.sparse {
            let row = &self.emission[b as usize * 3..b as usize * 3 + 3];
            s[0] += row[0];
            s[1] += row[1];
            s[2] += row[2];
        }
        if let Some(d) = &f.dense {
            for (j, &x) in d.iter().enumerate() {
                let x = f64::from(x);
                s[0] += x * self.dense[j * 3];
                s[1] += x * self.dense[j * 3 + 1];
                s[2] += x * self.dense[j * 3 + 2];
            }
        }
        s
    }

    fn probs(&self, f: &TokenFeatures) -> [f64; 3] {
        let mut p = [0.0; 3];
        softmax_into(&self.scores(f), &mut p);
        p
    }

    /// Weighted cross-entropy step on one token; returns the weighted loss.
    fn step(&mut self, f: &TokenFeatures, q: &[f64; 3], weight: f64, lr: f64) -> f64 {
        let p = self.probs(f);
        let loss: f64 = (0..3).filter(|&k| q[k] > 0.0).map(|k| -q[k] * ln(p[k].max(1e-300))).sum();
        let g = [lr * weight * (p[0] - q[0]), lr * weight * (p[1] - q[1]), lr * weight * (p[2] - q[2])];
        for &b in &f.sparse {
            let row = &mut self.emission[b as usize * 3..b as usize * 3 + 3];
            row[0] -= g[0];
            row[1] -= g[1];
            row[2] -= g[2];
        }
        if let Some(d) = &f.dense {
            for (j, &x) in d.iter().enumerate() {
                let x = f64::from(x);
                self.dense[j * 3] -= g[0] * x;
                self.dense[j * 3 + 1] -= g[1] * x;
                self.dense[j * 3 + 2] -= g[2] * x;
            }
        }
        weight * loss
    }

    /// Per-token tag log-probabilities.
    pub fn emission_log_probs(&self, feats: &[TokenFeatures]) -> Vec<[f64; 3]> {
        feats
            .iter()
            .map(|f| {
                let p = self.probs(f);
                [ln(p[0]), ln(p[1]), ln(p[2])]
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainLog {
    /// Mean weighted loss over the original sequences, one entry per epoch
    /// (weak epochs first when fine-tuning).
    pub epoch_losses: Vec<f64>,
    pub augmented_copies: usize,
}

#[derive(Default)]
struct TransitionCounts([[f64; 3]; 4]);

impl TransitionCounts {
    fn add(&mut self, tags: &[BioTag], weights: &[f64], scale: f64) {
        let mut prev = START;
        for (t, &w) in tags.iter().zip(weights) {
            self.0[prev][t.index()] += w * scale;
            prev = t.index();
        }
    }

    /// Log relative frequencies; rows without mass keep `current`.
    fn estimate(&self, alpha: f64, current: &[[f64; 3]; 4]) -> [[f64; 3]; 4] {
        let mut out = *current;
        for (row, counts) in out.iter_mut().zip(&self.0) {
            let total: f64 = counts.iter().sum();
            if total > 0.0 {
                for k in 0..3 {
                    row[k] = ln((counts[k] + alpha) / (total + 3.0 * alpha));
                }
            }
        }
        out
    }
}

/// Separator-dropped copy of `seq` with tags and weights carried over by
/// character offset. `None` when the record has no active separator.
pub fn augment_sequence<R: rand::Rng + ?Sized>(
    seq: &TaggedSequence,
    p: f64,
    separators: &SeparatorConfig,
    rng: &mut R,
) -> Option<TaggedSequence> {
    if !seq.tokens.iter().any(|t| t.is_separator) {
        return None;
    }
    let (rec, map) = drop_separators(&seq.record(), p, separators, rng);
    let tokens = tokenize(&rec.text, separators);
    let mut by_start = alloc::collections::BTreeMap::new();
    for (i, t) in seq.tokens.iter().enumerate() {
        if let Some(s) = map.get(t.span.start) {
            by_start.insert(s, i);
        }
    }
    let mut tags = Vec::with_capacity(tokens.len());
    let mut weights = Vec::with_capacity(tokens.len());
    for t in &tokens {
        let &i = by_start.get(&t.span.start).expect("every new token starts at a kept character");
        tags.push(seq.tags[i]);
        weights.push(seq.weights[i]);
    }
    Some(TaggedSequence { record_id: rec.id, text: rec.text, tokens, tags, weights })
}

struct Prepared {
    feats: Vec<TokenFeatures>,
    targets: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

fn prepare(seq: &TaggedSequence, featurizer: &Featurizer<'_>, cfg: &TaggerConfig) -> Prepared {
    let (targets, weights) = seq
        .tags
        .iter()
        .zip(&seq.weights)
        .map(|(&tag, &w)| match cfg.label_mode {
            LabelMode::Soft => (smooth_targets(tag, w, cfg.max_smoothing), w),
            LabelMode::Hard => {
                let w = if tag == BioTag::O { w } else if w > 0.0 { 1.0 } else { 0.0 };
                (smooth_targets(tag, 1.0, 0.0), w)
            }
        })
        .unzip();
    Prepared { feats: featurizer.featurize(&seq.tokens), targets, weights }
}

fn check_sequences(data: &[TaggedSequence]) -> Result<(), TaggerError> {
    for s in data {
        if s.tokens.len() != s.tags.len() || s.tags.len() != s.weights.len() {
            return Err(TaggerError::Malformed("tokens, tags and weights differ in length"));
        }
        if let Some(&w) = s.weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(TaggerError::BadConfidence(w));
        }
    }
    Ok(())
}

fn train_phase(
    model: &mut TaggerModel,
    data: &[TaggedSequence],
    featurizer: &Featurizer<'_>,
    cfg: &TaggerConfig,
    epochs: usize,
    phase: u64,
    log: &mut TrainLog,
) -> TransitionCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, phase));
    let originals: Vec<Prepared> = data.iter().map(|s| prepare(s, featurizer, cfg)).collect();
    let mut counts = TransitionCounts::default();
    for (s, p) in data.iter().zip(&originals) {
        counts.add(&s.tags, &p.weights, 1.0);
    }
    let augment = cfg.augment_drop_p > 0.0;
    for epoch in 0..epochs {
        let lr = cfg.learning_rate / (1.0 + epoch as f64);
        let mut copies: Vec<Prepared> = Vec::new();
        if augment {
            for s in data {
                if let Some(c) = augment_sequence(s, cfg.augment_drop_p, featurizer.separators(), &mut rng) {
                    let p = prepare(&c, featurizer, cfg);
                    counts.add(&c.tags, &p.weights, 1.0 / epochs as f64);
                    copies.push(p);
                }
            }
            log.augmented_copies += copies.len();
        }
        let mut order: Vec<(bool, usize)> =
            (0..originals.len()).map(|i| (false, i)).chain((0..copies.len()).map(|i| (true, i))).collect();
        order.shuffle(&mut rng);
        let (mut loss, mut mass) = (0.0, 0.0);
        for (is_copy, i) in order {
            let item = if is_copy { &copies[i] } else { &originals[i] };
            for ((f, q), &w) in item.feats.iter().zip(&item.targets).zip(&item.weights) {
                if w == 0.0 {
                    continue;
                }
                let l = model.step(f, q, w, lr);
                if !is_copy {
                    loss += l;
                    mass += w;
                }
            }
        }
        log.epoch_losses.push(if mass > 0.0 { loss / mass } else { 0.0 });
    }
    counts
}

/// Trains a tagger. Tokens with weight 0 contribute nothing, so a dataset of
/// zero weights returns the initial model unchanged.
pub fn train_tagger(
    set: TrainingSet<'_>,
    featurizer: &Featurizer<'_>,
    cfg: &TaggerConfig,
) -> Result<(TaggerModel, TrainLog), TaggerError> {
    cfg.validate()?;
    if featurizer.hash_bits() != cfg.hash_bits {
        return Err(TaggerError::FeatureMismatch {
            expected: "featurizer built from this configuration",
            found: featurizer.hash_bits().to_string(),
        });
    }
    let meta = TrainingMeta {
        strategy: set.strategy(),
        label_mode: cfg.label_mode,
        seed: cfg.seed,
        epochs: cfg.epochs,
        gold_epochs: cfg.gold_epochs,
        augment_drop_p: cfg.augment_drop_p,
    };
    let mut model = TaggerModel::init(cfg.hash_bits, featurizer.dense_dim(), meta);
    let mut log = TrainLog::default();
    let alpha = cfg.transition_smoothing;
    match set {
        TrainingSet::WeakOnly(data) | TrainingSet::Supervised(data) => {
            if data.is_empty() {
                return Err(TaggerError::EmptyDataset);
            }
            check_sequences(data)?;
            let epochs = if matches!(set, TrainingSet::WeakOnly(_)) { cfg.epochs } else { cfg.gold_epochs };
            let counts = train_phase(&mut model, data, featurizer, cfg, epochs, 0, &mut log);
            model.transitions = counts.estimate(alpha, &model.transitions);
        }
        TrainingSet::FineTune { weak, gold } => {
            if weak.is_empty() {
                return Err(TaggerError::EmptyDataset);
            }
            if gold.is_empty() {
                return Err(TaggerError::MissingGold);
            }
            check_sequences(weak)?;
            check_sequences(gold)?;
            let counts = train_phase(&mut model, weak, featurizer, cfg, cfg.epochs, 0, &mut log);
            model.transitions = counts.estimate(alpha, &model.transitions);
            let counts = train_phase(&mut model, gold, featurizer, cfg, cfg.gold_epochs, 1, &mut log);
            model.transitions = counts.estimate(alpha, &model.transitions);
        }
    }
    Ok((model, log))
}

/// Best tag path under emission log-probabilities plus transitions, with
/// separators forced to O and O→I, start→I forbidden, then repaired.
pub fn decode_tags(model: &TaggerModel, featurizer: &Featurizer<'_>, tokens: &[crate::textprep::Token]) -> Vec<BioTag> {
    let n = tokens.len();
    if n == 0 {
        return Vec::new();
    }
    let emit = model.emission_log_probs(&featurizer.featurize(tokens));
    let mut trans = model.transitions;
    trans[BioTag::O.index()][BioTag::I.index()] = f64::NEG_INFINITY;
    trans[START][BioTag::I.index()] = f64::NEG_INFINITY;
    let allowed = |i: usize, k: usize| !tokens[i].is_separator || k == BioTag::O.index();

    let mut score = alloc::vec![[f64::NEG_INFINITY; 3]; n];
    let mut back = alloc::vec![[0usize; 3]; n];
    for k in 0..3 {
        if allowed(0, k) {
            score[0][k] = trans[START][k] + emit[0][k];
        }
    }
    for i in 1..n {
        for k in 0..3 {
            if !allowed(i, k) {
                continue;
            }
            let mut best = (f64::NEG_INFINITY, 0);
            for j in 0..3 {
                let s = score[i - 1][j] + trans[j][k];
                if s > best.0 {
                    best = (s, j);
                }
            }
            score[i][k] = best.0 + emit[i][k];
            back[i][k] = best.1;
        }
    }
    let mut k = (0..3).fold(0, |b, k| if score[n - 1][k] > score[n - 1][b] { k } else { b });
    let mut tags = alloc::vec![BioTag::O; n];
    for i in (0..n).rev() {
        tags[i] = BioTag::from_index(k).expect("tag index");
        k = back[i][k];
    }
    repair(&mut tags);
    tags
}

/// Mentions found in `rec`. `featurizer` must be the one used in training.
pub fn decode(model: &TaggerModel, featurizer: &Featurizer<'_>, rec: &Record) -> Result<Vec<Mention>, TaggerError> {
    model.check_featurizer(featurizer)?;
    let tokens = tokenize(&rec.text, featurizer.separators());
    let tags = decode_tags(model, featurizer, &tokens);
    Ok(mentions_from_tags(&rec.id, &tokens, &tags))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RefineMode {
    S1,
    S1S2,
}

impl RefineMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RefineMode::S1 => "s1",
            RefineMode::S1S2 => "s1s2",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "s1" => Some(RefineMode::S1),
            "s1s2" | "s1,s2" => Some(RefineMode::S1S2),
            _ => None,
        }
    }
}

/// Keeps the mentions whose text the matcher accepts.
pub fn refine_with_matcher(mentions: &[Mention], rec: &Record, matcher: &Matcher<'_>, mode: RefineMode) -> Vec<Mention> {
    mentions
        .iter()
        .filter(|m| {
            let Some(text) = rec.slice(m.span) else { return false };
            matcher.ontology().lookup_exact(&text).is_some()
                || (mode == RefineMode::S1S2 && matcher.approx_lookup(&text).is_some())
        })
        .cloned()
        .collect()
}
