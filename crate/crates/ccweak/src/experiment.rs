//! Building blocks shared by the `pipeline` subcommand and the test suites.

use ccweak_core::evaluation::{evaluate, EvalError, EvalReport, TypedSpan};
use ccweak_core::linker::{link, link_ensemble, link_exact, LinkedEntity, LinkerError, LinkerModel, MentionFeaturizer};
use ccweak_core::matcher::{MatchError, Matcher, StageSet, WeakDataset};
use ccweak_core::ontology::Ontology;
use ccweak_core::synthcorpus::{generate_corpus, generate_ontology, NoiseConfig, OntologyGenConfig, SynthError, SynthOntology, SynthRecord};
use ccweak_core::tagger::{
    decode, encode_bio, encode_weak, refine_with_matcher, Featurizer, LabeledSpan, Mention, RefineMode, TaggedSequence,
    TaggerError, TaggerModel,
};
use ccweak_core::textprep::{Record, SeparatorConfig};
use rayon::prelude::*;

/// Maps `f` over `items`, on `workers` threads when more than one. Output
/// order always matches input order.
pub fn par_map<T, U, F>(items: &[T], workers: usize, f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().expect("thread pool");
    pool.install(|| items.par_iter().map(f).collect())
}

/// Sizes of the generated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub ontology: OntologyGenConfig,
    pub noise: NoiseConfig,
    pub train_records: usize,
    pub test_records: usize,
}

impl Default for SynthSettings {
    fn default() -> Self {
        Self { ontology: OntologyGenConfig::default(), noise: NoiseConfig::default(), train_records: 10_000, test_records: 1_000 }
    }
}

/// A merged ontology with a raw training corpus and a gold test corpus.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub full: SynthOntology,
    pub ontology: Ontology,
    pub train: Vec<SynthRecord>,
    pub test: Vec<SynthRecord>,
}

impl Dataset {
    /// Records `0..train` train, the following `test` records are held out.
    pub fn synthetic(settings: &SynthSettings, seed: u64) -> Result<Self, SynthError> {
        let full = generate_ontology(&OntologyGenConfig { seed, ..settings.ontology.clone() })?;
        let ontology = full.merged()?;
        let mut all = generate_corpus(&ontology, settings.train_records + settings.test_records, &settings.noise, seed)?;
        let test = all.split_off(settings.train_records);
        Ok(Self { full, ontology, train: all, test })
    }

    pub fn train_records(&self) -> Vec<Record> {
        self.train.iter().map(|r| r.record.clone()).collect()
    }

    pub fn test_records(&self) -> Vec<Record> {
        self.test.iter().map(|r| r.record.clone()).collect()
    }
}

pub fn weak_label(matcher: &Matcher<'_>, records: &[Record], stages: StageSet, workers: usize) -> Result<WeakDataset, MatchError> {
    let results = par_map(records, workers, |r| matcher.label_record(r, stages));
    Ok(Matcher::collect(results.into_iter().collect::<Result<Vec<_>, _>>()?))
}

pub fn encode_weak_all(weak: &WeakDataset, separators: &SeparatorConfig, unmatched_weight: f64) -> Result<Vec<TaggedSequence>, TaggerError> {
    weak.records.iter().map(|w| encode_weak(w, separators, unmatched_weight)).collect()
}

pub fn encode_gold_all(records: &[SynthRecord], separators: &SeparatorConfig) -> Result<Vec<TaggedSequence>, TaggerError> {
    records
        .iter()
        .map(|r| {
            let spans: Vec<LabeledSpan> = r.gold.iter().map(|g| LabeledSpan::gold(g.span)).collect();
            encode_bio(&r.record, &spans, &[], separators, 1.0)
        })
        .collect()
}

pub fn extract(
    model: &TaggerModel,
    featurizer: &Featurizer<'_>,
    records: &[Record],
    refine: Option<(&Matcher<'_>, RefineMode)>,
    workers: usize,
) -> Result<Vec<Vec<Mention>>, TaggerError> {
    model.check_featurizer(featurizer)?;
    par_map(records, workers, |r| {
        let m = decode(model, featurizer, r)?;
        Ok(match refine {
            Some((matcher, mode)) => refine_with_matcher(&m, r, matcher, mode),
            None => m,
        })
    })
    .into_iter()
    .collect()
}

/// How mentions are linked.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkMode {
    /// Exact synonym lookup only; mentions without a hit are dropped.
    Exact,
    Model,
    /// Exact lookup first, the model for the rest.
    Ensemble,
}

impl LinkMode {
    pub fn as_str(self) -> &'static str {
        match self {
            LinkMode::Exact => "exact",
            LinkMode::Model => "model",
            LinkMode::Ensemble => "ensemble",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exact" => Some(LinkMode::Exact),
            "model" => Some(LinkMode::Model),
            "ensemble" => Some(LinkMode::Ensemble),
            _ => None,
        }
    }
}

pub fn link_all(
    ont: &Ontology,
    model: &LinkerModel,
    featurizer: &MentionFeaturizer<'_>,
    records: &[Record],
    mentions: &[Vec<Mention>],
    mode: LinkMode,
    workers: usize,
) -> Result<Vec<Vec<LinkedEntity>>, LinkerError> {
    model.check_ontology(ont)?;
    model.check_featurizer(featurizer)?;
    let pairs: Vec<(&Record, &Vec<Mention>)> = records.iter().zip(mentions).collect();
    par_map(&pairs, workers, |(r, ms)| {
        let mut out = Vec::with_capacity(ms.len());
        for m in ms.iter() {
            match mode {
                LinkMode::Exact => out.extend(link_exact(ont, r, m)),
                LinkMode::Model => out.push(link(model, featurizer, r, m)?),
                LinkMode::Ensemble => out.push(link_ensemble(ont, model, featurizer, r, m)?),
            }
        }
        Ok(out)
    })
    .into_iter()
    .collect()
}

pub fn gold_spans(r: &SynthRecord) -> Vec<TypedSpan> {
    r.gold.iter().map(|g| TypedSpan { span: g.span, concept: Some(g.concept_id.clone()) }).collect()
}

fn score_pairs(gold: &[SynthRecord], preds: Vec<Vec<TypedSpan>>) -> Result<EvalReport, EvalError> {
    let golds: Vec<Vec<TypedSpan>> = gold.iter().map(gold_spans).collect();
    evaluate(golds.iter().zip(&preds).map(|(g, p)| (g.as_slice(), p.as_slice())))
}

/// Extraction scores; entity-type mode is left empty.
pub fn evaluate_mentions(gold: &[SynthRecord], preds: &[Vec<Mention>]) -> Result<EvalReport, EvalError> {
    score_pairs(gold, preds.iter().map(|ms| ms.iter().map(|m| TypedSpan { span: m.span, concept: None }).collect()).collect())
}

pub fn evaluate_linked(gold: &[SynthRecord], preds: &[Vec<LinkedEntity>]) -> Result<EvalReport, EvalError> {
    score_pairs(
        gold,
        preds
            .iter()
            .map(|es| es.iter().map(|e| TypedSpan { span: e.mention.span, concept: Some(e.concept_id.clone()) }).collect())
            .collect(),
    )
}

/// Scores weak labels of the gold records themselves.
pub fn evaluate_weak(gold: &[SynthRecord], weak: &WeakDataset) -> Result<EvalReport, EvalError> {
    score_pairs(
        gold,
        weak.records
            .iter()
            .map(|w| w.annotations.iter().map(|a| TypedSpan { span: a.span, concept: Some(a.concept_id.clone()) }).collect())
            .collect(),
    )
}
