//! Seeded synthetic ontologies and annotated chief-complaint-style corpora.
//!
//! Concept names are pronounceable pseudo-words, optionally followed by a
//! real symptom head word ("pain", "swelling", ...). Records join one to four
//! rendered concepts with separators and then apply configurable noise:
//! typos, abbreviations, filler modifiers, shared-token pairs ("A/B pain"),
//! single-letter slash pairs ("n/d") and dropped punctuation.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::hash::derive_seed;
use crate::ontology::{Concept, Ontology, OntologyError};
use crate::textprep::{CharSpan, Record};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("cannot generate a corpus from an empty ontology")]
    EmptyOntology,
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

const HEADS: &[&str] = &[
    "pain", "swelling", "rash", "bleeding", "weakness", "numbness", "injury", "burn", "itching", "cramps",
    "discharge", "lesion",
];

const CHILD_MODIFIERS: &[&str] =
    &["left", "right", "upper", "lower", "acute", "chronic", "bilateral", "recurrent", "generalized", "localized"];

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "cr", "dr", "gr", "pl", "st", "tr",
    "ch", "sh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
const CODAS: &[&str] = &["", "", "", "n", "r", "l", "s", "m", "x"];

#[derive(Debug, Clone, PartialEq)]
pub struct OntologyGenConfig {
    pub n_concepts: usize,
    /// How many of the concepts are children of another concept.
    pub n_children: usize,
    /// Weights for 0, 1, 2, ... extra synonyms per root concept.
    pub synonyms_per: Vec<f64>,
    pub seed: u64,
}

impl Default for OntologyGenConfig {
    fn default() -> Self {
        Self { n_concepts: 692, n_children: 191, synonyms_per: alloc::vec![0.3, 0.4, 0.2, 0.1], seed: 42 }
    }
}

/// A generated ontology plus the ids flagged for merging into their parents.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOntology {
    pub ontology: Ontology,
    pub children: Vec<String>,
}

impl SynthOntology {
    pub fn merged(&self) -> Result<Ontology, OntologyError> {
        self.ontology.merge_children(self.children.iter().map(String::as_str))
    }
}

fn pseudo_word<R: Rng + ?Sized>(rng: &mut R) -> String {
    let syllables = if rng.gen_bool(0.6) { 2 } else { 3 };
    let mut w = String::new();
    for i in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
        if i + 1 == syllables || rng.gen_bool(0.3) {
            w.push_str(CODAS.choose(rng).unwrap());
        }
    }
    w
}

fn fresh_word<R: Rng + ?Sized>(rng: &mut R, used: &mut BTreeSet<String>) -> String {
    loop {
        let w = pseudo_word(rng);
        if w.len() >= 4 && !HEADS.contains(&w.as_str()) && used.insert(w.clone()) {
            return w;
        }
    }
}

fn synonym_candidates<R: Rng + ?Sized>(canonical: &str, rng: &mut R, used: &mut BTreeSet<String>) -> Vec<String> {
    let words: Vec<&str> = canonical.split(' ').collect();
    let mut out = Vec::new();
    if words.len() > 1 {
        out.push(words.iter().filter_map(|w| w.chars().next()).collect());
        out.push(format!("{} {}", words[1], words[0]));
    }
    let first: Vec<char> = words[0].chars().collect();
    if first.len() > 5 {
        let mut t: String = first[..4].iter().collect();
        for w in &words[1..] {
            t.push(' ');
            t.push_str(w);
        }
        out.push(t);
    }
    out.push(fresh_word(rng, used));
    out.shuffle(rng);
    out
}

/// A seeded ontology whose child concepts read "<modifier> <parent name>".
pub fn generate_ontology(cfg: &OntologyGenConfig) -> Result<SynthOntology, SynthError> {
    if cfg.n_concepts == 0 {
        return Err(SynthError::InvalidConfig("n_concepts must be at least 1"));
    }
    if cfg.n_children >= cfg.n_concepts {
        return Err(SynthError::InvalidConfig("n_children must leave at least one root"));
    }
    if cfg.synonyms_per.is_empty() || cfg.synonyms_per.iter().any(|w| w.is_nan() || *w < 0.0) || cfg.synonyms_per.iter().sum::<f64>() <= 0.0 {
        return Err(SynthError::InvalidConfig("synonyms_per must be non-negative weights with positive sum"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let extra = WeightedIndex::new(&cfg.synonyms_per).expect("validated above");
    let n_roots = cfg.n_concepts - cfg.n_children;
    let width = format!("{}", cfg.n_concepts).len().max(4);
    let id = |i: usize| format!("C{:0width$}", i + 1);

    let mut used_words = BTreeSet::new();
    let mut taken: BTreeSet<String> = BTreeSet::new();
    let mut concepts: Vec<Concept> = Vec::with_capacity(cfg.n_concepts);
    for i in 0..n_roots {
        let canonical = loop {
            let roll: f64 = rng.gen();
            let name = if roll < 0.4 {
                fresh_word(&mut rng, &mut used_words)
            } else if roll < 0.85 {
                format!("{} {}", fresh_word(&mut rng, &mut used_words), HEADS.choose(&mut rng).unwrap())
            } else {
                format!("{} {}", fresh_word(&mut rng, &mut used_words), fresh_word(&mut rng, &mut used_words))
            };
            if !taken.contains(&name) {
                break name;
            }
        };
        taken.insert(canonical.clone());
        let want = extra.sample(&mut rng);
        let mut synonyms = Vec::new();
        for cand in synonym_candidates(&canonical, &mut rng, &mut used_words) {
            if synonyms.len() == want {
                break;
            }
            if taken.insert(cand.clone()) {
                synonyms.push(cand);
            }
        }
        concepts.push(Concept::new(id(i), &canonical, synonyms, None));
    }

    let mut children = Vec::with_capacity(cfg.n_children);
    let mut modifiers_used: BTreeMap<usize, BTreeSet<&str>> = BTreeMap::new();
    let mut i = n_roots;
    while i < cfg.n_concepts {
        let parent = rng.gen_range(0..n_roots);
        let modifier = *CHILD_MODIFIERS.choose(&mut rng).unwrap();
        let used = modifiers_used.entry(parent).or_default();
        if used.contains(modifier) {
            continue;
        }
        let canonical = format!("{modifier} {}", concepts[parent].canonical);
        if !taken.insert(canonical.clone()) {
            continue;
        }
        used.insert(modifier);
        let parent_id = concepts[parent].id.clone();
        concepts.push(Concept::new(id(i), &canonical, core::iter::empty::<&str>(), Some(parent_id)));
        children.push(id(i));
        i += 1;
    }
    let ontology = Ontology::from_concepts(concepts)?;
    Ok(SynthOntology { ontology, children })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoiseConfig {
    /// Per-character edit probability inside rendered concepts.
    pub typo_rate: f64,
    /// Sampling weights over a concept's synonyms: index 0 is the canonical
    /// name, index j the j-th other synonym in sorted order. Synonyms past the
    /// end reuse the last weight.
    pub synonym_sample: Vec<f64>,
    /// Word-level shortenings applied inside rendered concepts.
    pub abbreviation_map: Vec<(String, String)>,
    /// Probability of applying each applicable abbreviation.
    pub abbreviation_rate: f64,
    /// Probability of pluralizing a rendered concept with a trailing "s".
    pub inflection_rate: f64,
    /// Probability that a record loses all its separators.
    pub no_punct_prob: f64,
    /// Modifier tokens put in front of a concept.
    pub filler_vocab: Vec<String>,
    /// Phrases put after a concept or used as a standalone chunk.
    pub filler_phrases: Vec<String>,
    /// Per-concept probability of a filler, and per-record probability of a
    /// standalone filler chunk.
    pub filler_rate: f64,
    /// Per-slot probability of a shared-token pair such as "neck/back pain".
    pub shared_token_rate: f64,
    /// Per-slot probability of a single-letter slash pair such as "n/d".
    pub slash_pair_rate: f64,
    /// Weights for 1, 2, 3, ... concepts per record.
    pub entities_per_record: Vec<f64>,
    /// Separators joining chunks, sampled uniformly.
    pub joiners: Vec<String>,
    /// Exponent of the Zipf-like concept frequency distribution.
    pub zipf_exponent: f64,
    /// Concepts are split into this many topics; a record draws its
    /// concepts from one topic with probability `topic_affinity`, which
    /// gives the corpus co-occurrence structure.
    pub topics: usize,
    pub topic_affinity: f64,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            typo_rate: 0.05,
            synonym_sample: alloc::vec![2.0, 1.0],
            abbreviation_map: [
                ("bleeding", "bleed"),
                ("discharge", "dc"),
                ("injury", "inj"),
                ("itching", "itch"),
                ("lesion", "les"),
                ("numbness", "numb"),
                ("swelling", "swel"),
                ("weakness", "weak"),
            ]
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect(),
            abbreviation_rate: 0.15,
            inflection_rate: 0.03,
            no_punct_prob: 0.4,
            filler_vocab: strings(&["severe", "mild", "r", "l", "intermittent", "worsening", "new"]),
            filler_phrases: strings(&["x3 days", "since am", "x2 weeks", "for 1 day", "since yesterday"]),
            filler_rate: 0.15,
            shared_token_rate: 0.04,
            slash_pair_rate: 0.02,
            entities_per_record: alloc::vec![0.45, 0.33, 0.15, 0.07],
            joiners: strings(&[", ", "/", "; ", " & ", " + ", ". "]),
            zipf_exponent: 0.7,
            topics: 20,
            topic_affinity: 0.8,
        }
    }
}

impl NoiseConfig {
    /// Default structure with every noise rate set to zero.
    pub fn zero() -> Self {
        Self {
            typo_rate: 0.0,
            abbreviation_rate: 0.0,
            inflection_rate: 0.0,
            no_punct_prob: 0.0,
            filler_rate: 0.0,
            shared_token_rate: 0.0,
            slash_pair_rate: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let rates = [
            self.typo_rate,
            self.abbreviation_rate,
            self.inflection_rate,
            self.no_punct_prob,
            self.filler_rate,
            self.shared_token_rate,
            self.slash_pair_rate,
            self.topic_affinity,
        ];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(SynthError::InvalidConfig("noise rates must be in [0, 1]"));
        }
        let weights_ok = |w: &[f64]| !w.is_empty() && w.iter().all(|x| *x >= 0.0 && x.is_finite()) && w.iter().sum::<f64>() > 0.0;
        if !weights_ok(&self.synonym_sample) || !weights_ok(&self.entities_per_record) {
            return Err(SynthError::InvalidConfig("sampling weights must be non-negative with positive sum"));
        }
        if self.joiners.is_empty() {
            return Err(SynthError::InvalidConfig("at least one joiner is required"));
        }
        if self.filler_rate > 0.0 && (self.filler_vocab.is_empty() || self.filler_phrases.is_empty()) {
            return Err(SynthError::InvalidConfig("fillers enabled without filler vocabulary"));
        }
        if self.topics == 0 {
            return Err(SynthError::InvalidConfig("topics must be at least 1"));
        }
        if !(self.zipf_exponent >= 0.0 && self.zipf_exponent.is_finite()) {
            return Err(SynthError::InvalidConfig("zipf_exponent must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct GoldAnnotation {
    pub span: CharSpan,
    pub concept_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthRecord {
    pub record: Record,
    /// Sorted by span.
    pub gold: Vec<GoldAnnotation>,
}

fn keyboard_neighbors(c: char) -> &'static str {
    match c {
        'q' => "wa",
        'w' => "qes",
        'e' => "wrd",
        'r' => "etf",
        't' => "ryg",
        'y' => "tuh",
        'u' => "yij",
        'i' => "uok",
        'o' => "ipl",
        'p' => "ol",
        'a' => "qsz",
        's' => "adwx",
        'd' => "sfe",
        'f' => "dgr",
        'g' => "fht",
        'h' => "gjy",
        'j' => "hku",
        'k' => "jli",
        'l' => "ko",
        'z' => "xa",
        'x' => "zcs",
        'c' => "xvd",
        'v' => "cbf",
        'b' => "vng",
        'n' => "bmh",
        'm' => "nj",
        '0' => "9",
        '1' => "2",
        '2' => "13",
        '3' => "24",
        '4' => "35",
        '5' => "46",
        '6' => "57",
        '7' => "68",
        '8' => "79",
        '9' => "80",
        _ => "",
    }
}

/// Applies one random edit (substitute a neighboring key, transpose with the
/// next character, delete, duplicate) to each alphanumeric character with
/// probability `typo_rate`. Edits never cross word boundaries and never
/// delete the last character of a word.
pub fn corrupt_string<R: Rng + ?Sized>(s: &str, typo_rate: f64, rng: &mut R) -> String {
    let chars: Vec<char> = s.chars().collect();
    let mut out = String::with_capacity(s.len() + 4);
    let mut word_len = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if !c.is_alphanumeric() {
            out.push(c);
            word_len = 0;
            i += 1;
            continue;
        }
        let remaining = chars[i..].iter().take_while(|c| c.is_alphanumeric()).count();
        if typo_rate > 0.0 && rng.gen::<f64>() < typo_rate {
            let next_alnum = remaining > 1;
            let neighbors = keyboard_neighbors(c);
            let mut ops: Vec<u8> = alloc::vec![3];
            if !neighbors.is_empty() {
                ops.push(0);
            }
            if next_alnum && chars[i + 1] != c {
                ops.push(1);
            }
            if word_len + remaining > 1 {
                ops.push(2);
            }
            match *ops.choose(rng).unwrap() {
                0 => {
                    let n: Vec<char> = neighbors.chars().collect();
                    out.push(*n.choose(rng).unwrap());
                    word_len += 1;
                }
                1 => {
                    out.push(chars[i + 1]);
                    out.push(c);
                    word_len += 2;
                    i += 2;
                    continue;
                }
                2 => {}
                _ => {
                    out.push(c);
                    out.push(c);
                    word_len += 2;
                }
            }
        } else {
            out.push(c);
            word_len += 1;
        }
        i += 1;
    }
    out
}

#[derive(Debug, Clone)]
struct ConceptForm {
    id: String,
    canonical: String,
    /// Canonical first, then the other synonyms in sorted order.
    synonyms: Vec<String>,
}

/// A chunk under construction: text pieces, some of them gold mentions.
type Piece = (String, Option<String>);

struct Generator<'a> {
    concepts: Vec<ConceptForm>,
    zipf: WeightedIndex<f64>,
    /// Per topic: member concept indices and their frequency distribution.
    topics: Vec<(Vec<usize>, WeightedIndex<f64>)>,
    /// Concept indices grouped by head word, for shared-token pairs.
    shared_groups: Vec<Vec<usize>>,
    entities: WeightedIndex<f64>,
    noise: &'a NoiseConfig,
}

impl Generator<'_> {
    fn render<R: Rng + ?Sized>(&self, c: &ConceptForm, rng: &mut R) -> String {
        let weights: Vec<f64> = (0..c.synonyms.len())
            .map(|j| *self.noise.synonym_sample.get(j).or(self.noise.synonym_sample.last()).unwrap())
            .collect();
        let text = match WeightedIndex::new(&weights) {
            Ok(d) => c.synonyms[d.sample(rng)].clone(),
            Err(_) => c.canonical.clone(),
        };
        let mut words: Vec<String> = text.split(' ').map(String::from).collect();
        for w in words.iter_mut() {
            if let Some((_, short)) = self.noise.abbreviation_map.iter().find(|(long, _)| long == w) {
                if rng.gen::<f64>() < self.noise.abbreviation_rate {
                    *w = short.clone();
                }
            }
        }
        if rng.gen::<f64>() < self.noise.inflection_rate {
            let last = words.last_mut().unwrap();
            if !last.ends_with('s') {
                last.push('s');
            }
        }
        corrupt_string(&words.join(" "), self.noise.typo_rate, rng)
    }

    fn entity_chunk<R: Rng + ?Sized>(&self, idx: usize, rng: &mut R) -> Vec<Piece> {
        let c = &self.concepts[idx];
        let mut chunk = alloc::vec![(self.render(c, rng), Some(c.id.clone()))];
        if rng.gen::<f64>() < self.noise.filler_rate {
            if rng.gen_bool(0.5) {
                let f = self.noise.filler_vocab.choose(rng).unwrap();
                chunk.insert(0, (format!("{f} "), None));
            } else {
                let f = self.noise.filler_phrases.choose(rng).unwrap();
                chunk.push((format!(" {f}"), None));
            }
        }
        chunk
    }

    fn record<R: Rng + ?Sized>(&self, id: String, rng: &mut R) -> SynthRecord {
        let k = self.entities.sample(rng) + 1;
        let mut used = BTreeSet::new();
        let topic = &self.topics[rng.gen_range(0..self.topics.len())];
        let draw = |rng: &mut R, used: &mut BTreeSet<usize>| loop {
            let i = if rng.gen::<f64>() < self.noise.topic_affinity {
                topic.0[topic.1.sample(rng)]
            } else {
                self.zipf.sample(rng)
            };
            if used.insert(i) {
                return i;
            }
        };
        let mut chunks: Vec<Vec<Piece>> = Vec::new();
        for _ in 0..k {
            let roll: f64 = rng.gen();
            if roll < self.noise.shared_token_rate && !self.shared_groups.is_empty() {
                let group = self.shared_groups.choose(rng).unwrap();
                let pair: Vec<&usize> = group.choose_multiple(rng, 2).collect();
                let (a, b) = (&self.concepts[*pair[0]], &self.concepts[*pair[1]]);
                let a_body = a.canonical.split(' ').next().unwrap().to_string();
                chunks.push(alloc::vec![
                    (a_body, Some(a.id.clone())),
                    (String::from("/"), None),
                    (b.canonical.clone(), Some(b.id.clone())),
                ]);
            } else if roll < self.noise.shared_token_rate + self.noise.slash_pair_rate && self.concepts.len() > 1 {
                let (a, b) = (draw(rng, &mut used), draw(rng, &mut used));
                let letter = |i: usize| self.concepts[i].canonical.chars().next().unwrap().to_string();
                chunks.push(alloc::vec![
                    (letter(a), Some(self.concepts[a].id.clone())),
                    (String::from("/"), None),
                    (letter(b), Some(self.concepts[b].id.clone())),
                ]);
            } else if used.len() < self.concepts.len() {
                let i = draw(rng, &mut used);
                chunks.push(self.entity_chunk(i, rng));
            }
        }
        if rng.gen::<f64>() < self.noise.filler_rate {
            let f = self.noise.filler_phrases.choose(rng).unwrap().clone();
            let at = rng.gen_range(0..=chunks.len());
            chunks.insert(at, alloc::vec![(f, None)]);
        }
        let no_punct = rng.gen::<f64>() < self.noise.no_punct_prob;
        let mut text = String::new();
        let mut len = 0usize;
        let mut gold = Vec::new();
        for (ci, chunk) in chunks.iter().enumerate() {
            if ci > 0 {
                let j = if no_punct { " " } else { self.noise.joiners.choose(rng).unwrap().as_str() };
                text.push_str(j);
                len += j.chars().count();
            }
            for (piece, concept) in chunk {
                let n = piece.chars().count();
                if let Some(c) = concept {
                    gold.push(GoldAnnotation { span: CharSpan::new(len, len + n), concept_id: c.clone() });
                }
                text.push_str(piece);
                len += n;
            }
        }
        // Joiners and fillers are already normalized; this only guards
        // against configured joiners with stray whitespace.
        let record = Record::new(id, &text);
        debug_assert_eq!(record.text, text);
        gold.sort();
        SynthRecord { record, gold }
    }
}

/// `n_records` records with gold annotations. Record `i` is drawn from its
/// own generator seeded by `derive_seed(seed, i)`, so any prefix of a corpus
/// is itself a valid corpus for the same seed.
pub fn generate_corpus(
    ont: &Ontology,
    n_records: usize,
    noise: &NoiseConfig,
    seed: u64,
) -> Result<Vec<SynthRecord>, SynthError> {
    noise.validate()?;
    if ont.is_empty() {
        return Err(SynthError::EmptyOntology);
    }
    let concepts: Vec<ConceptForm> = ont
        .concepts()
        .map(|c| {
            let mut synonyms = alloc::vec![c.canonical.clone()];
            synonyms.extend(c.synonyms.iter().filter(|s| **s != c.canonical).cloned());
            ConceptForm { id: c.id.clone(), canonical: c.canonical.clone(), synonyms }
        })
        .collect();
    let mut rank: Vec<usize> = (0..concepts.len()).collect();
    rank.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(seed, u64::MAX)));
    let mut weights = alloc::vec![0.0; concepts.len()];
    for (r, &i) in rank.iter().enumerate() {
        weights[i] = libm::pow(r as f64 + 1.0, -noise.zipf_exponent);
    }
    let zipf = WeightedIndex::new(&weights).expect("positive weights");
    let n_topics = noise.topics.min(concepts.len());
    let topics = (0..n_topics)
        .map(|t| {
            let members: Vec<usize> = rank.iter().copied().skip(t).step_by(n_topics).collect();
            let w: Vec<f64> = members.iter().map(|&i| weights[i]).collect();
            (members, WeightedIndex::new(&w).expect("positive weights"))
        })
        .collect();

    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, c) in concepts.iter().enumerate() {
        let words: Vec<&str> = c.canonical.split(' ').collect();
        if words.len() == 2 && HEADS.contains(&words[1]) {
            groups.entry(HEADS.iter().find(|h| **h == words[1]).unwrap()).or_default().push(i);
        }
    }
    let shared_groups: Vec<Vec<usize>> = groups.into_values().filter(|g| g.len() >= 2).collect();
    let entities = WeightedIndex::new(&noise.entities_per_record).expect("validated above");
    let generator = Generator { concepts, zipf, topics, shared_groups, entities, noise };

    Ok((0..n_records)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
            generator.record(format!("r{i:06}"), &mut rng)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textprep::{tokenize, SeparatorConfig};

    #[test]
    fn default_ontology_shape() {
        let s = generate_ontology(&OntologyGenConfig::default()).unwrap();
        assert_eq!(s.ontology.len(), 692);
        assert_eq!(s.children.len(), 191);
        let merged = s.merged().unwrap();
        assert_eq!(merged.len(), 501);
        assert_eq!(merged.synonym_count(), s.ontology.synonym_count());
    }

    #[test]
    fn singleton_ontology() {
        let cfg = OntologyGenConfig { n_concepts: 1, n_children: 0, synonyms_per: alloc::vec![1.0], seed: 1 };
        let s = generate_ontology(&cfg).unwrap();
        assert_eq!(s.ontology.len(), 1);
        assert_eq!(s.ontology.synonym_count(), 1);
    }

    #[test]
    fn ontology_is_deterministic() {
        let cfg = OntologyGenConfig { n_concepts: 50, n_children: 10, ..Default::default() };
        assert_eq!(generate_ontology(&cfg).unwrap(), generate_ontology(&cfg).unwrap());
        let other = OntologyGenConfig { seed: 7, ..cfg.clone() };
        assert_ne!(generate_ontology(&cfg).unwrap(), generate_ontology(&other).unwrap());
    }

    #[test]
    fn bad_configs() {
        let zero = OntologyGenConfig { n_concepts: 0, n_children: 0, ..Default::default() };
        assert!(generate_ontology(&zero).is_err());
        let all_children = OntologyGenConfig { n_concepts: 5, n_children: 5, ..Default::default() };
        assert!(generate_ontology(&all_children).is_err());
        let ont = generate_ontology(&OntologyGenConfig { n_concepts: 5, n_children: 0, ..Default::default() }).unwrap();
        let noise = NoiseConfig { typo_rate: 1.5, ..Default::default() };
        assert!(generate_corpus(&ont.ontology, 1, &noise, 0).is_err());
        assert_eq!(generate_corpus(&Ontology::default(), 1, &NoiseConfig::default(), 0), Err(SynthError::EmptyOntology));
    }

    #[test]
    fn corrupt_identity_and_determinism() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(corrupt_string("chest pain", 0.0, &mut rng), "chest pain");
        let a = corrupt_string("chest pain", 0.3, &mut ChaCha8Rng::seed_from_u64(9));
        let b = corrupt_string("chest pain", 0.3, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn corrupt_never_empties_words() {
        for seed in 0..500 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = corrupt_string("a b, cd", 1.0, &mut rng);
            assert_eq!(out.split(' ').count(), 3, "{out}");
            assert!(out.split(' ').all(|w| w.chars().any(char::is_alphanumeric)), "{out}");
        }
    }

    #[test]
    fn corpus_gold_is_token_aligned() {
        let ont = generate_ontology(&OntologyGenConfig::default()).unwrap().merged().unwrap();
        let corpus = generate_corpus(&ont, 300, &NoiseConfig::default(), 5).unwrap();
        let cfg = SeparatorConfig::default();
        for r in &corpus {
            assert!(!r.gold.is_empty());
            let toks = tokenize(&r.record.text, &cfg);
            for g in &r.gold {
                assert!(toks.iter().any(|t| t.span.start == g.span.start), "{:?} {:?}", r.record, g);
                assert!(toks.iter().any(|t| t.span.end == g.span.end), "{:?} {:?}", r.record, g);
                assert!(ont.contains(&g.concept_id));
            }
            for w in r.gold.windows(2) {
                assert!(w[0].span.end <= w[1].span.start);
            }
        }
    }

    #[test]
    fn zero_noise_records_are_clean_synonyms() {
        let ont = generate_ontology(&OntologyGenConfig::default()).unwrap().merged().unwrap();
        let noise = NoiseConfig { entities_per_record: alloc::vec![1.0], ..NoiseConfig::zero() };
        for r in generate_corpus(&ont, 200, &noise, 11).unwrap() {
            assert_eq!(r.gold.len(), 1);
            assert_eq!(r.gold[0].span, CharSpan::new(0, r.record.char_len()));
            assert_eq!(ont.lookup_exact(&r.record.text), Some(r.gold[0].concept_id.as_str()));
        }
    }

    #[test]
    fn corpus_prefix_property() {
        let ont = generate_ontology(&OntologyGenConfig { n_concepts: 40, n_children: 5, ..Default::default() })
            .unwrap()
            .merged()
            .unwrap();
        let long = generate_corpus(&ont, 50, &NoiseConfig::default(), 1).unwrap();
        let short = generate_corpus(&ont, 20, &NoiseConfig::default(), 1).unwrap();
        assert_eq!(&long[..20], &short[..]);
    }
}
