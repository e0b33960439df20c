//! The `ccweak` command line.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use ccweak_core::embedding::{train_embeddings, EmbeddingTable};
use ccweak_core::evaluation::{evaluate, TypedSpan};
use ccweak_core::linker::{train_linker, LinkExample, LinkerError};
use ccweak_core::matcher::{Matcher, WeakDataset};
use ccweak_core::ontology::Ontology;
use ccweak_core::synthcorpus::{generate_corpus, generate_ontology, SynthRecord};
use ccweak_core::tagger::{train_tagger, Strategy, TaggedSequence, TaggerError, TrainingSet};
use ccweak_core::textprep::{CharSpan, Record, SeparatorConfig};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crate::config::{parse_stages, ConfigError, PipelineConfig};
use crate::experiment::{encode_gold_all, encode_weak_all, extract, link_all, weak_label, Dataset};
use crate::formats::{self, AnnotatedRecord, FormatError, PredictionFile, ReportFile};

#[derive(Debug, Parser)]
#[command(name = "ccweak", version, about = "Weakly supervised chief-complaint entity extraction and linking")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Pipeline config file (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Threads for per-record stages (0 = all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Matcher stages, e.g. `s1,s2,s3`.
    #[arg(long, global = true)]
    pub stages: Option<String>,
    /// Refinement (`none`, `s1`, `s1s2`) or linking (`exact`, `model`, `ensemble`) mode.
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Tagger training strategy: `weak`, `supervised` or `finetune`.
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// Separator drop probability for augmented copies (0 disables).
    #[arg(long = "augment-drop", global = true)]
    pub augment_drop: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic ontology and the list of children to merge.
    SynthOntology {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        merge_out: Option<PathBuf>,
        /// Also write the merged ontology.
        #[arg(long)]
        merged_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Generate a raw training corpus and a gold test set.
    SynthCorpus {
        #[arg(long)]
        ontology: PathBuf,
        /// Merge these children before generating.
        #[arg(long)]
        merge: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        train: Option<usize>,
        #[arg(long)]
        test: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Merge child concepts into their parents.
    MergeOntology {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        merge: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    TrainEmbeddings {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Text export, one word per line.
        #[arg(long)]
        text_out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Split-and-match weak labeling.
    Weaklabel {
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// BIO export of the weak labels.
        #[arg(long)]
        conll: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    TrainTagger {
        #[arg(long)]
        weak: Option<PathBuf>,
        #[arg(long)]
        gold: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    TrainLinker {
        #[arg(long)]
        weak: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Tag mentions in a corpus or annotation file.
    Extract {
        #[arg(long)]
        tagger: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        corpus: PathBuf,
        /// Needed for matcher refinement.
        #[arg(long)]
        ontology: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Link extracted mentions to concepts.
    Link {
        #[arg(long)]
        linker: PathBuf,
        #[arg(long)]
        ontology: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        mentions: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Everything from data to report in one run.
    Pipeline {
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Score predictions (annotation or linked JSON-lines) against gold.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::SynthOntology { common, .. }
            | Command::SynthCorpus { common, .. }
            | Command::MergeOntology { common, .. }
            | Command::TrainEmbeddings { common, .. }
            | Command::Weaklabel { common, .. }
            | Command::TrainTagger { common, .. }
            | Command::TrainLinker { common, .. }
            | Command::Extract { common, .. }
            | Command::Link { common, .. }
            | Command::Pipeline { common, .. }
            | Command::Evaluate { common, .. } => common,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Command::SynthOntology { .. } => "synth-ontology",
            Command::SynthCorpus { .. } => "synth-corpus",
            Command::MergeOntology { .. } => "merge-ontology",
            Command::TrainEmbeddings { .. } => "train-embeddings",
            Command::Weaklabel { .. } => "weaklabel",
            Command::TrainTagger { .. } => "train-tagger",
            Command::TrainLinker { .. } => "train-linker",
            Command::Extract { .. } => "extract",
            Command::Link { .. } => "link",
            Command::Pipeline { .. } => "pipeline",
            Command::Evaluate { .. } => "evaluate",
        }
    }
}

/// Loads the config file and applies flag overrides.
pub fn resolve_config(common: &Common) -> Result<PipelineConfig, ConfigError> {
    let mut cfg = PipelineConfig::load_or_default(common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.set_seed(seed);
    }
    if let Some(w) = common.workers {
        cfg.workers = w;
    }
    if let Some(s) = &common.stages {
        parse_stages(s)?;
        cfg.matcher.stages = s.clone();
    }
    if let Some(m) = &common.mode {
        match m.as_str() {
            "none" | "s1" | "s1s2" => cfg.tagger.refine = m.clone(),
            "exact" | "model" | "ensemble" => cfg.linker.mode = m.clone(),
            _ => {
                return Err(ConfigError::Invalid {
                    key: "--mode",
                    msg: format!("{m:?}; expected none, s1, s1s2, exact, model or ensemble"),
                })
            }
        }
    }
    if let Some(s) = &common.strategy {
        cfg.tagger.strategy = s.clone();
        cfg.strategy()?;
    }
    if let Some(p) = common.augment_drop {
        cfg.tagger.augment_drop_p = p;
    }
    Ok(cfg)
}

/// Process exit status for an error: 1 configuration, 3 model/ontology
/// mismatch, 2 anything else (bad data).
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() || cause.downcast_ref::<clap::Error>().is_some() {
            return 1;
        }
        if matches!(cause.downcast_ref::<FormatError>(), Some(FormatError::Mismatch { .. }))
            || matches!(cause.downcast_ref::<LinkerError>(), Some(LinkerError::FingerprintMismatch { .. } | LinkerError::FeatureMismatch { .. }))
            || matches!(cause.downcast_ref::<TaggerError>(), Some(TaggerError::FeatureMismatch { .. }))
        {
            return 3;
        }
    }
    2
}

/// Parses `args` (program name first) and runs the command. Returns the JSON
/// summary printed on success.
pub fn run_args<I, T>(args: I) -> Result<Value>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    run(cli.command)
}

pub fn run(command: Command) -> Result<Value> {
    let start = Instant::now();
    let cfg = resolve_config(command.common())?;
    let name = command.name();
    let mut summary = dispatch(command, &cfg)?;
    if let Value::Object(map) = &mut summary {
        map.insert("command".into(), json!(name));
        map.insert("seconds".into(), json!(start.elapsed().as_secs_f64()));
    }
    Ok(summary)
}

fn load_embeddings(path: Option<&Path>) -> Result<Option<EmbeddingTable>> {
    path.map(|p| formats::read_embeddings(p).map_err(anyhow::Error::from)).transpose()
}

fn load_ontology(path: &Path, merge: Option<&Path>) -> Result<Ontology> {
    let ont = formats::read_ontology(path)?;
    match merge {
        Some(m) => {
            let ids = formats::read_merge_list(m)?;
            ont.merge_children(ids.iter().map(String::as_str))
                .map_err(|e| FormatError::Invalid { path: m.to_path_buf(), msg: e.to_string() }.into())
        }
        None => Ok(ont),
    }
}

/// Records from a corpus file or from the text of an annotation file.
fn load_records(path: &Path) -> Result<Vec<Record>> {
    match formats::read_predictions(path) {
        Ok(PredictionFile::Annotations(recs)) if recs.first().is_some_and(|r| !r.record_id.is_empty()) => {
            Ok(recs.iter().map(AnnotatedRecord::record).collect())
        }
        _ => Ok(formats::read_corpus(path)?),
    }
}

fn gold_sequences(path: &Path, sep: &SeparatorConfig) -> Result<Vec<TaggedSequence>> {
    let recs = formats::read_annotations(path)?;
    let synth: Vec<SynthRecord> = recs.iter().map(to_synth).collect();
    encode_gold_all(&synth, sep).with_context(|| format!("encoding gold spans of {}", path.display()))
}

fn to_synth(r: &AnnotatedRecord) -> SynthRecord {
    SynthRecord {
        record: r.record(),
        gold: r
            .annotations
            .iter()
            .map(|a| ccweak_core::synthcorpus::GoldAnnotation {
                span: CharSpan::new(a.start, a.end),
                concept_id: a.concept.clone().unwrap_or_default(),
            })
            .collect(),
    }
}

fn link_examples(weak: &WeakDataset) -> Vec<LinkExample> {
    weak.records
        .iter()
        .flat_map(|w| {
            w.annotations.iter().map(move |a| LinkExample {
                record: w.record(),
                span: a.span,
                concept_id: a.concept_id.clone(),
                weight: a.confidence,
            })
        })
        .collect()
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn dispatch(command: Command, cfg: &PipelineConfig) -> Result<Value> {
    let workers = cfg.workers();
    let sep = cfg.separator_config()?;
    match command {
        Command::SynthOntology { out, merge_out, merged_out, .. } => {
            let s = cfg.synth_settings()?;
            let full = generate_ontology(&s.ontology)?;
            formats::write_ontology(&out, &full.ontology)?;
            if let Some(p) = &merge_out {
                formats::write_merge_list(p, &full.children)?;
            }
            let merged = full.merged()?;
            if let Some(p) = &merged_out {
                formats::write_ontology(p, &merged)?;
            }
            Ok(json!({
                "outputs": {"ontology": path_str(&out), "merge": merge_out.as_deref().map(path_str), "merged": merged_out.as_deref().map(path_str)},
                "counts": {"concepts": full.ontology.len(), "children": full.children.len(), "merged_concepts": merged.len()},
            }))
        }
        Command::SynthCorpus { ontology, merge, corpus, gold, train, test, .. } => {
            let s = cfg.synth_settings()?;
            let ont = load_ontology(&ontology, merge.as_deref())?;
            let (n_train, n_test) = (train.unwrap_or(s.train_records), test.unwrap_or(s.test_records));
            let mut all = generate_corpus(&ont, n_train + n_test, &s.noise, cfg.synth.seed)?;
            let held = all.split_off(n_train);
            let records: Vec<Record> = all.iter().map(|r| r.record.clone()).collect();
            formats::write_corpus(&corpus, &records)?;
            write_gold(&gold, &held)?;
            Ok(json!({
                "outputs": {"corpus": path_str(&corpus), "gold": path_str(&gold)},
                "counts": {"train_records": records.len(), "test_records": held.len(), "gold_mentions": held.iter().map(|r| r.gold.len()).sum::<usize>()},
            }))
        }
        Command::MergeOntology { ontology, merge, out, .. } => {
            let full = formats::read_ontology(&ontology)?;
            let merged = load_ontology(&ontology, Some(&merge))?;
            formats::write_ontology(&out, &merged)?;
            Ok(json!({"outputs": {"ontology": path_str(&out)}, "counts": {"before": full.len(), "after": merged.len()}}))
        }
        Command::TrainEmbeddings { corpus, out, text_out, .. } => {
            let records = load_records(&corpus)?;
            let (emb, losses) = train_embeddings(&records, &cfg.embedding_config()?)?;
            formats::write_embeddings(&out, &emb)?;
            if let Some(p) = &text_out {
                formats::write_embeddings_text(p, &emb)?;
            }
            Ok(json!({
                "outputs": {"embeddings": path_str(&out), "text": text_out.as_deref().map(path_str)},
                "counts": {"vocab": emb.vocab_len(), "subwords": emb.subword_len(), "dim": emb.dim()},
                "epoch_losses": losses,
            }))
        }
        Command::Weaklabel { ontology, corpus, embeddings, out, conll, .. } => {
            let ont = formats::read_ontology(&ontology)?;
            let records = load_records(&corpus)?;
            let emb = load_embeddings(embeddings.as_deref())?;
            let matcher = Matcher::new(&ont, cfg.match_config()?, sep.clone(), emb.as_ref())?;
            let weak = weak_label(&matcher, &records, cfg.stages()?, workers)?;
            formats::write_weak(&out, &weak.records)?;
            if let Some(p) = &conll {
                formats::write_conll(p, &encode_weak_all(&weak, &sep, cfg.tagger.unmatched_weight)?)?;
            }
            let d = weak.diagnostics;
            Ok(json!({
                "outputs": {"weak": path_str(&out), "conll": conll.as_deref().map(path_str)},
                "counts": {
                    "records": weak.records.len(), "annotations": weak.annotation_count(), "chunks": d.chunks,
                    "s1": d.s1, "s2": d.s2, "s3": d.s3, "unmatched": d.unmatched, "zero_vector": d.zero_vector,
                },
                "stages": cfg.matcher.stages,
            }))
        }
        Command::TrainTagger { weak, gold, embeddings, out, .. } => {
            let emb = load_embeddings(embeddings.as_deref())?;
            let tcfg = cfg.tagger_config()?;
            let strategy = cfg.strategy()?;
            let weak_seqs = match (&weak, strategy) {
                (Some(p), Strategy::WeakOnly | Strategy::FineTune) => {
                    let recs = formats::read_weak(p)?;
                    recs.iter().map(|w| ccweak_core::tagger::encode_weak(w, &sep, tcfg.unmatched_weight)).collect::<Result<Vec<_>, _>>()?
                }
                (None, Strategy::WeakOnly | Strategy::FineTune) => return Err(ConfigError::Missing("--weak").into()),
                _ => Vec::new(),
            };
            let gold_seqs = match (&gold, strategy) {
                (Some(p), Strategy::Supervised | Strategy::FineTune) => gold_sequences(p, &sep)?,
                (None, Strategy::Supervised | Strategy::FineTune) => return Err(ConfigError::Missing("--gold").into()),
                _ => Vec::new(),
            };
            let set = match strategy {
                Strategy::WeakOnly => TrainingSet::WeakOnly(&weak_seqs),
                Strategy::Supervised => TrainingSet::Supervised(&gold_seqs),
                Strategy::FineTune => TrainingSet::FineTune { weak: &weak_seqs, gold: &gold_seqs },
            };
            let featurizer = tcfg.featurizer(sep.clone(), emb.as_ref());
            let (model, log) = train_tagger(set, &featurizer, &tcfg)?;
            formats::write_tagger(&out, &model)?;
            Ok(json!({
                "outputs": {"tagger": path_str(&out)},
                "counts": {"weak_sequences": weak_seqs.len(), "gold_sequences": gold_seqs.len(), "augmented_copies": log.augmented_copies},
                "strategy": strategy.as_str(),
                "epoch_losses": log.epoch_losses,
            }))
        }
        Command::TrainLinker { weak, ontology, embeddings, out, .. } => {
            let ont = formats::read_ontology(&ontology)?;
            let emb = load_embeddings(embeddings.as_deref())?;
            let records = formats::read_weak(&weak)?;
            let data = WeakDataset { records, ..Default::default() };
            let lcfg = cfg.linker_config()?;
            let featurizer = lcfg.featurizer(sep.clone(), emb.as_ref());
            let examples = link_examples(&data);
            let (model, log) = train_linker(&examples, &ont, &featurizer, &lcfg)?;
            formats::write_linker(&out, &model)?;
            Ok(json!({
                "outputs": {"linker": path_str(&out)},
                "counts": {"examples": examples.len(), "classes": model.classes().len()},
                "epoch_losses": log.epoch_losses,
            }))
        }
        Command::Extract { tagger, embeddings, corpus, ontology, out, .. } => {
            let emb = load_embeddings(embeddings.as_deref())?;
            let model = formats::read_tagger(&tagger)?;
            let featurizer = cfg.tagger_config()?.featurizer(sep.clone(), emb.as_ref());
            let records = load_records(&corpus)?;
            let refine = cfg.refine_mode()?;
            let ont = match (refine, &ontology) {
                (Some(_), Some(p)) => Some(formats::read_ontology(p)?),
                (Some(_), None) => return Err(ConfigError::Missing("--ontology (required for refinement)").into()),
                _ => None,
            };
            let mcfg = cfg.match_config()?;
            let matcher = ont.as_ref().map(|o| Matcher::new(o, mcfg, sep.clone(), emb.as_ref())).transpose()?;
            let mentions = extract(&model, &featurizer, &records, matcher.as_ref().zip(refine), workers)?;
            let out_recs: Vec<AnnotatedRecord> =
                records.iter().zip(&mentions).map(|(r, m)| AnnotatedRecord::from_mentions(r, m)).collect();
            formats::write_annotations(&out, &out_recs)?;
            Ok(json!({
                "outputs": {"mentions": path_str(&out)},
                "counts": {"records": records.len(), "mentions": mentions.iter().map(Vec::len).sum::<usize>()},
                "refine": cfg.tagger.refine,
            }))
        }
        Command::Link { linker, ontology, embeddings, mentions, out, .. } => {
            let ont = formats::read_ontology(&ontology)?;
            let model = formats::read_linker(&linker, &ont)?;
            let emb = load_embeddings(embeddings.as_deref())?;
            let featurizer = cfg.linker_config()?.featurizer(sep.clone(), emb.as_ref());
            let recs = formats::read_annotations(&mentions)?;
            let records: Vec<Record> = recs.iter().map(AnnotatedRecord::record).collect();
            let ms: Vec<Vec<ccweak_core::tagger::Mention>> = recs.iter().map(|r| to_mentions(r, &sep)).collect();
            let mode = cfg.link_mode()?;
            let linked = link_all(&ont, &model, &featurizer, &records, &ms, mode, workers)?;
            formats::write_linked(&out, &linked)?;
            Ok(json!({
                "outputs": {"linked": path_str(&out)},
                "counts": {"mentions": ms.iter().map(Vec::len).sum::<usize>(), "linked": linked.iter().map(Vec::len).sum::<usize>()},
                "mode": mode.as_str(),
            }))
        }
        Command::Pipeline { out_dir, .. } => {
            let dir = out_dir.or_else(|| cfg.paths.out_dir.clone()).ok_or(ConfigError::Missing("--out-dir"))?;
            run_pipeline(cfg, &dir)
        }
        Command::Evaluate { gold, pred, out, .. } => {
            let gold_recs = formats::read_annotations(&gold)?;
            let preds = formats::read_predictions(&pred)?;
            let report = evaluate_files(&gold_recs, &preds, &gold, &pred)?;
            let file = ReportFile::from(&report);
            if let Some(p) = &out {
                formats::write_json(p, &file)?;
            }
            Ok(json!({"outputs": {"report": out.as_deref().map(path_str)}, "report": file}))
        }
    }
}

fn write_gold(path: &Path, recs: &[SynthRecord]) -> Result<()> {
    let lines: Vec<AnnotatedRecord> = recs
        .iter()
        .map(|r| {
            let spans: Vec<TypedSpan> =
                r.gold.iter().map(|g| TypedSpan { span: g.span, concept: Some(g.concept_id.clone()) }).collect();
            AnnotatedRecord::from_spans(&r.record, &spans)
        })
        .collect();
    Ok(formats::write_annotations(path, &lines)?)
}

/// Mentions of an annotation line, with token ranges recomputed.
fn to_mentions(r: &AnnotatedRecord, sep: &SeparatorConfig) -> Vec<ccweak_core::tagger::Mention> {
    let tokens = ccweak_core::textprep::tokenize(&r.text, sep);
    r.annotations
        .iter()
        .map(|a| {
            let span = CharSpan::new(a.start, a.end);
            let inside: Vec<usize> = (0..tokens.len()).filter(|&i| span.contains(&tokens[i].span)).collect();
            let first = inside.first().copied().unwrap_or(0);
            let last = inside.last().copied().unwrap_or(first);
            ccweak_core::tagger::Mention { record_id: r.record_id.clone(), span, token_range: (first, last) }
        })
        .collect()
}

/// Pairs predictions with gold records by record id. Records missing from
/// the prediction file count as empty predictions.
pub fn evaluate_files(
    gold: &[AnnotatedRecord],
    preds: &PredictionFile,
    gold_path: &Path,
    pred_path: &Path,
) -> Result<ccweak_core::evaluation::EvalReport> {
    use std::collections::HashMap;
    let mut by_id: HashMap<&str, Vec<TypedSpan>> = HashMap::new();
    match preds {
        PredictionFile::Annotations(recs) => {
            for r in recs {
                by_id.entry(r.record_id.as_str()).or_default().extend(r.typed_spans());
            }
        }
        PredictionFile::Linked(lines) => {
            for l in lines {
                by_id
                    .entry(l.record_id.as_str())
                    .or_default()
                    .push(TypedSpan { span: CharSpan::new(l.start, l.end), concept: Some(l.concept.clone()) });
            }
        }
    }
    let known: std::collections::HashSet<&str> = gold.iter().map(|g| g.record_id.as_str()).collect();
    if let Some(id) = by_id.keys().find(|id| !known.contains(**id)) {
        bail!(FormatError::Invalid { path: pred_path.to_path_buf(), msg: format!("record {id:?} is not in the gold file") });
    }
    let golds: Vec<Vec<TypedSpan>> = gold.iter().map(AnnotatedRecord::typed_spans).collect();
    let empty = Vec::new();
    let pairs: Vec<(&[TypedSpan], &[TypedSpan])> = gold
        .iter()
        .zip(&golds)
        .map(|(g, gs)| (gs.as_slice(), by_id.get(g.record_id.as_str()).unwrap_or(&empty).as_slice()))
        .collect();
    evaluate(pairs).map_err(|e| {
        FormatError::Invalid { path: gold_path.to_path_buf(), msg: format!("{e} (gold or {})", pred_path.display()) }.into()
    })
}

/// Generate (or load) data, embed, weak-label, train both models, extract,
/// link and evaluate. Every artifact lands in `dir`.
pub fn run_pipeline(cfg: &PipelineConfig, dir: &Path) -> Result<Value> {
    let workers = cfg.workers();
    let sep = cfg.separator_config()?;
    let mut timings = serde_json::Map::new();
    let mut tick = Instant::now();
    let mut lap = |name: &str, timings: &mut serde_json::Map<String, Value>| {
        timings.insert(name.into(), json!(tick.elapsed().as_secs_f64()));
        tick = Instant::now();
    };
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let p = |name: &str| dir.join(name);

    let (ont, train, test): (Ontology, Vec<Record>, Vec<AnnotatedRecord>) =
        match &cfg.paths.ontology {
            Some(o) => {
                let ont = load_ontology(o, cfg.paths.merge.as_deref())?;
                let corpus = cfg.paths.corpus.as_deref().ok_or(ConfigError::Missing("paths.corpus"))?;
                let gold = cfg.paths.gold.as_deref().ok_or(ConfigError::Missing("paths.gold"))?;
                (ont, load_records(corpus)?, formats::read_annotations(gold)?)
            }
            None => {
                let settings = cfg.synth_settings()?;
                let ds = Dataset::synthetic(&settings, cfg.synth.seed)?;
                formats::write_ontology(&p("ontology.jsonl"), &ds.full.ontology)?;
                formats::write_merge_list(&p("merge.txt"), &ds.full.children)?;
                formats::write_ontology(&p("ontology.merged.jsonl"), &ds.ontology)?;
                formats::write_corpus(&p("corpus.jsonl"), &ds.train_records())?;
                write_gold(&p("gold.jsonl"), &ds.test)?;
                let test = ds
                    .test
                    .iter()
                    .map(|r| {
                        let spans: Vec<TypedSpan> =
                            r.gold.iter().map(|g| TypedSpan { span: g.span, concept: Some(g.concept_id.clone()) }).collect();
                        AnnotatedRecord::from_spans(&r.record, &spans)
                    })
                    .collect();
                (ds.ontology.clone(), ds.train_records(), test)
            }
        };
    lap("data", &mut timings);

    let (emb, _) = train_embeddings(&train, &cfg.embedding_config()?)?;
    formats::write_embeddings(&p("embeddings.bin"), &emb)?;
    lap("embeddings", &mut timings);

    let matcher = Matcher::new(&ont, cfg.match_config()?, sep.clone(), Some(&emb))?;
    let weak = weak_label(&matcher, &train, cfg.stages()?, workers)?;
    formats::write_weak(&p("weak.jsonl"), &weak.records)?;
    let tcfg = cfg.tagger_config()?;
    let weak_seqs = encode_weak_all(&weak, &sep, tcfg.unmatched_weight)?;
    formats::write_conll(&p("weak.conll"), &weak_seqs)?;
    lap("weaklabel", &mut timings);

    let strategy = cfg.strategy()?;
    let gold_seqs = match (strategy, &cfg.paths.gold_train) {
        (Strategy::WeakOnly, _) => Vec::new(),
        (_, Some(g)) => gold_sequences(g, &sep)?,
        (_, None) => return Err(ConfigError::Missing("paths.gold_train (needed by supervised and finetune)").into()),
    };
    let set = match strategy {
        Strategy::WeakOnly => TrainingSet::WeakOnly(&weak_seqs),
        Strategy::Supervised => TrainingSet::Supervised(&gold_seqs),
        Strategy::FineTune => TrainingSet::FineTune { weak: &weak_seqs, gold: &gold_seqs },
    };
    let featurizer = tcfg.featurizer(sep.clone(), Some(&emb));
    let (tagger, _) = train_tagger(set, &featurizer, &tcfg)?;
    formats::write_tagger(&p("tagger.bin"), &tagger)?;
    lap("train_tagger", &mut timings);

    let lcfg = cfg.linker_config()?;
    let lfeat = lcfg.featurizer(sep.clone(), Some(&emb));
    let examples = link_examples(&weak);
    let (linker, _) = train_linker(&examples, &ont, &lfeat, &lcfg)?;
    formats::write_linker(&p("linker.bin"), &linker)?;
    lap("train_linker", &mut timings);

    let test_records: Vec<Record> = test.iter().map(AnnotatedRecord::record).collect();
    let refine = cfg.refine_mode()?;
    let mentions = extract(&tagger, &featurizer, &test_records, refine.map(|m| (&matcher, m)), workers)?;
    let pred: Vec<AnnotatedRecord> =
        test_records.iter().zip(&mentions).map(|(r, m)| AnnotatedRecord::from_mentions(r, m)).collect();
    formats::write_annotations(&p("pred.jsonl"), &pred)?;
    let mode = cfg.link_mode()?;
    let linked = link_all(&ont, &linker, &lfeat, &test_records, &mentions, mode, workers)?;
    formats::write_linked(&p("linked.jsonl"), &linked)?;
    lap("extract_link", &mut timings);

    let extraction = evaluate_files(&test, &PredictionFile::Annotations(pred), &p("gold.jsonl"), &p("pred.jsonl"))?;
    let linked_lines: Vec<_> = linked.iter().flatten().map(formats::LinkedLine::from_entity).collect();
    let linking = evaluate_files(&test, &PredictionFile::Linked(linked_lines), &p("gold.jsonl"), &p("linked.jsonl"))?;
    let report = ReportFile::from(&linking);
    formats::write_json(&p("report.json"), &report)?;
    formats::write_json(&p("extraction_report.json"), &ReportFile::from(&extraction))?;
    std::fs::write(p("config.toml"), cfg.to_toml()).with_context(|| format!("writing {}", p("config.toml").display()))?;
    lap("evaluate", &mut timings);

    Ok(json!({
        "outputs": {"dir": path_str(dir)},
        "counts": {
            "train_records": train.len(), "test_records": test.len(), "concepts": ont.len(),
            "weak_annotations": weak.annotation_count(), "mentions": mentions.iter().map(Vec::len).sum::<usize>(),
            "linked": linked.iter().map(Vec::len).sum::<usize>(),
        },
        "report": report,
        "extraction": ReportFile::from(&extraction),
        "timings": timings,
    }))
}
