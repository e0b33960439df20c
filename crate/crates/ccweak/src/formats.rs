//! On-disk formats: JSON-lines data files, binary model files and the
//! evaluation report.

use std::collections::HashSet;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ccweak_core::embedding::EmbeddingTable;
use ccweak_core::evaluation::{EvalReport, ModeScore, TypedSpan};
use ccweak_core::linker::{LinkSource, LinkedEntity, LinkerMeta, LinkerModel};
use ccweak_core::matcher::{Stage, WeakAnnotation, WeakRecord};
use ccweak_core::ontology::{Concept, Ontology};
use ccweak_core::tagger::{LabelMode, Mention, Strategy, TaggedSequence, TaggerModel, TrainingMeta};
use ccweak_core::textprep::{CharSpan, Record};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error("{}: {msg}", path.display())]
    Invalid { path: PathBuf, msg: String },
    /// The model was built for another ontology or feature layout.
    #[error("{}: {msg}", path.display())]
    Mismatch { path: PathBuf, msg: String },
}

impl FormatError {
    fn parse(path: &Path, line: usize, msg: impl ToString) -> Self {
        FormatError::Parse { path: path.to_path_buf(), line, msg: msg.to_string() }
    }

    fn invalid(path: &Path, msg: impl ToString) -> Self {
        FormatError::Invalid { path: path.to_path_buf(), msg: msg.to_string() }
    }

    fn io(path: &Path, source: io::Error) -> Self {
        FormatError::Io { path: path.to_path_buf(), source }
    }
}

type Result<T> = std::result::Result<T, FormatError>;

/// Parses every non-blank line of `path` as `T`, keeping 1-based line numbers.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let v = serde_json::from_str(&line).map_err(|e| FormatError::parse(path, i + 1, e))?;
        out.push((i + 1, v));
    }
    Ok(out)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    write_with(path, |w| {
        for item in items {
            serde_json::to_writer(&mut *w, &item).map_err(io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    })
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| FormatError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| FormatError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| FormatError::io(path, e))
}

// ---- ontology ------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConceptLine {
    id: String,
    canonical: String,
    #[serde(default)]
    synonyms: Vec<String>,
    #[serde(default)]
    parent: Option<String>,
}

pub fn read_ontology(path: &Path) -> Result<Ontology> {
    let lines: Vec<(usize, ConceptLine)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut concepts = Vec::with_capacity(lines.len());
    for (n, c) in lines {
        if c.id.trim().is_empty() {
            return Err(FormatError::parse(path, n, "empty concept id"));
        }
        if !seen.insert(c.id.clone()) {
            return Err(FormatError::parse(path, n, format!("duplicate concept id {:?}", c.id)));
        }
        concepts.push(Concept::new(c.id, &c.canonical, &c.synonyms, c.parent));
    }
    Ontology::from_concepts(concepts).map_err(|e| FormatError::invalid(path, e))
}

/// Concepts in id order; `synonyms` lists every surface form except the
/// canonical name.
pub fn write_ontology(path: &Path, ont: &Ontology) -> Result<()> {
    write_jsonl(
        path,
        ont.concepts().map(|c| ConceptLine {
            id: c.id.clone(),
            canonical: c.canonical.clone(),
            synonyms: c.synonyms.iter().filter(|s| **s != c.canonical).cloned().collect(),
            parent: c.parent.clone(),
        }),
    )
}

/// One concept id per line; blank lines and `#` comments are skipped.
pub fn read_merge_list(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| FormatError::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

pub fn write_merge_list(path: &Path, ids: &[String]) -> Result<()> {
    write_with(path, |w| {
        for id in ids {
            writeln!(w, "{id}")?;
        }
        Ok(())
    })
}

// ---- corpus --------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct CorpusLine {
    id: String,
    text: String,
}

pub fn read_corpus(path: &Path) -> Result<Vec<Record>> {
    let lines: Vec<(usize, CorpusLine)> = read_jsonl(path)?;
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(lines.len());
    for (n, l) in lines {
        if !seen.insert(l.id.clone()) {
            return Err(FormatError::parse(path, n, format!("duplicate record id {:?}", l.id)));
        }
        out.push(Record { id: l.id, text: l.text });
    }
    Ok(out)
}

pub fn write_corpus(path: &Path, records: &[Record]) -> Result<()> {
    write_jsonl(path, records.iter().map(|r| CorpusLine { id: r.id.clone(), text: r.text.clone() }))
}

// ---- annotations ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanLine {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLine {
    pub start: usize,
    pub end: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub concept: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
}

/// One line of a weak, gold or predicted annotation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRecord {
    pub record_id: String,
    pub text: String,
    #[serde(default)]
    pub annotations: Vec<AnnotationLine>,
    #[serde(default)]
    pub unmatched_spans: Vec<SpanLine>,
}

impl AnnotatedRecord {
    pub fn record(&self) -> Record {
        Record { id: self.record_id.clone(), text: self.text.clone() }
    }

    pub fn typed_spans(&self) -> Vec<TypedSpan> {
        self.annotations
            .iter()
            .map(|a| TypedSpan { span: CharSpan::new(a.start, a.end), concept: a.concept.clone() })
            .collect()
    }

    pub fn from_weak(w: &WeakRecord) -> Self {
        Self {
            record_id: w.record_id.clone(),
            text: w.text.clone(),
            annotations: w
                .annotations
                .iter()
                .map(|a| AnnotationLine {
                    start: a.span.start,
                    end: a.span.end,
                    concept: Some(a.concept_id.clone()),
                    confidence: Some(a.confidence),
                    stage: Some(a.stage.as_str().to_string()),
                })
                .collect(),
            unmatched_spans: w.unmatched_spans.iter().map(|s| SpanLine { start: s.start, end: s.end }).collect(),
        }
    }

    pub fn from_spans(rec: &Record, spans: &[TypedSpan]) -> Self {
        Self {
            record_id: rec.id.clone(),
            text: rec.text.clone(),
            annotations: spans
                .iter()
                .map(|s| AnnotationLine {
                    start: s.span.start,
                    end: s.span.end,
                    concept: s.concept.clone(),
                    confidence: None,
                    stage: None,
                })
                .collect(),
            unmatched_spans: Vec::new(),
        }
    }

    pub fn from_mentions(rec: &Record, mentions: &[Mention]) -> Self {
        let spans: Vec<TypedSpan> = mentions.iter().map(|m| TypedSpan { span: m.span, concept: None }).collect();
        Self::from_spans(rec, &spans)
    }
}

fn check_span(path: &Path, line: usize, text: &str, start: usize, end: usize) -> Result<CharSpan> {
    let len = text.chars().count();
    if start >= end || end > len {
        return Err(FormatError::parse(path, line, format!("span {start}..{end} outside text of {len} characters")));
    }
    Ok(CharSpan::new(start, end))
}

pub fn read_annotations(path: &Path) -> Result<Vec<AnnotatedRecord>> {
    let lines: Vec<(usize, AnnotatedRecord)> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (n, r) in lines {
        for a in &r.annotations {
            check_span(path, n, &r.text, a.start, a.end)?;
        }
        for s in &r.unmatched_spans {
            check_span(path, n, &r.text, s.start, s.end)?;
        }
        out.push(r);
    }
    Ok(out)
}

pub fn write_annotations(path: &Path, records: &[AnnotatedRecord]) -> Result<()> {
    write_jsonl(path, records)
}

/// Reads a weak label file; every annotation needs concept, confidence and
/// stage.
pub fn read_weak(path: &Path) -> Result<Vec<WeakRecord>> {
    let lines: Vec<(usize, AnnotatedRecord)> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (n, r) in lines {
        let mut annotations = Vec::with_capacity(r.annotations.len());
        for a in &r.annotations {
            let span = check_span(path, n, &r.text, a.start, a.end)?;
            let concept = a.concept.clone().ok_or_else(|| FormatError::parse(path, n, "annotation without concept"))?;
            let confidence = a.confidence.ok_or_else(|| FormatError::parse(path, n, "annotation without confidence"))?;
            if !(0.0..=1.0).contains(&confidence) {
                return Err(FormatError::parse(path, n, format!("confidence {confidence} outside [0, 1]")));
            }
            let stage = a
                .stage
                .as_deref()
                .and_then(Stage::parse)
                .ok_or_else(|| FormatError::parse(path, n, "annotation without a valid stage"))?;
            annotations.push(WeakAnnotation { record_id: r.record_id.clone(), span, concept_id: concept, confidence, stage });
        }
        let mut unmatched = Vec::with_capacity(r.unmatched_spans.len());
        for s in &r.unmatched_spans {
            unmatched.push(check_span(path, n, &r.text, s.start, s.end)?);
        }
        out.push(WeakRecord { record_id: r.record_id, text: r.text, annotations, unmatched_spans: unmatched });
    }
    Ok(out)
}

pub fn write_weak(path: &Path, records: &[WeakRecord]) -> Result<()> {
    write_jsonl(path, records.iter().map(AnnotatedRecord::from_weak))
}

// ---- linked entities -----------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkedLine {
    pub record_id: String,
    pub start: usize,
    pub end: usize,
    pub concept: String,
    pub score: f64,
    pub source: String,
}

impl LinkedLine {
    pub fn from_entity(e: &LinkedEntity) -> Self {
        Self {
            record_id: e.mention.record_id.clone(),
            start: e.mention.span.start,
            end: e.mention.span.end,
            concept: e.concept_id.clone(),
            score: e.score,
            source: e.source.as_str().to_string(),
        }
    }
}

pub fn write_linked(path: &Path, entities: &[Vec<LinkedEntity>]) -> Result<()> {
    write_jsonl(path, entities.iter().flatten().map(LinkedLine::from_entity))
}

pub fn read_linked(path: &Path) -> Result<Vec<LinkedLine>> {
    let lines: Vec<(usize, LinkedLine)> = read_jsonl(path)?;
    let mut out = Vec::with_capacity(lines.len());
    for (n, l) in lines {
        if l.start >= l.end {
            return Err(FormatError::parse(path, n, format!("empty span {}..{}", l.start, l.end)));
        }
        if LinkSource::parse(&l.source).is_none() {
            return Err(FormatError::parse(path, n, format!("unknown source {:?}", l.source)));
        }
        out.push(l);
    }
    Ok(out)
}

/// Either kind of prediction file accepted by `evaluate`.
#[derive(Debug, Clone, PartialEq)]
pub enum PredictionFile {
    Annotations(Vec<AnnotatedRecord>),
    Linked(Vec<LinkedLine>),
}

/// Tells the formats apart by the first non-blank line: linked lines carry
/// `start` at the top level, annotation lines carry `text`.
pub fn read_predictions(path: &Path) -> Result<PredictionFile> {
    let file = File::open(path).map_err(|e| FormatError::io(path, e))?;
    let mut first = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| FormatError::io(path, e))?;
        if !line.trim().is_empty() {
            let v: serde_json::Value = serde_json::from_str(&line).map_err(|e| FormatError::parse(path, i + 1, e))?;
            first = Some(v);
            break;
        }
    }
    match first {
        None => Ok(PredictionFile::Annotations(Vec::new())),
        Some(v) if v.get("start").is_some() => Ok(PredictionFile::Linked(read_linked(path)?)),
        Some(_) => Ok(PredictionFile::Annotations(read_annotations(path)?)),
    }
}

// ---- CoNLL ---------------------------------------------------------------

/// One `token<TAB>tag<TAB>weight` line per token, blank line after every
/// record.
pub fn write_conll(path: &Path, seqs: &[TaggedSequence]) -> Result<()> {
    write_with(path, |w| {
        for s in seqs {
            for ((t, tag), weight) in s.tokens.iter().zip(&s.tags).zip(&s.weights) {
                writeln!(w, "{}\t{}\t{}", t.text, tag.as_str(), weight)?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

// ---- report --------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    pub cor: u64,
    pub inc: u64,
    pub par: u64,
    pub mis: u64,
    pub spu: u64,
    pub possible: u64,
    pub actual: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl From<&ModeScore> for ModeBlock {
    fn from(m: &ModeScore) -> Self {
        let c = &m.counts;
        Self {
            cor: c.cor,
            inc: c.inc,
            par: c.par,
            mis: c.mis,
            spu: c.spu,
            possible: c.possible(),
            actual: c.actual(),
            precision: m.precision,
            recall: m.recall,
            f1: m.f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub partial: ModeBlock,
    pub exact: ModeBlock,
    #[serde(rename = "type")]
    pub entity_type: ModeBlock,
}

impl From<&EvalReport> for ReportFile {
    fn from(r: &EvalReport) -> Self {
        Self { partial: (&r.partial).into(), exact: (&r.exact).into(), entity_type: (&r.entity_type).into() }
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_with(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(io::Error::from)?;
        w.write_all(b"\n")
    })
}

// ---- binary helpers ------------------------------------------------------

const EMBEDDING_MAGIC: &[u8; 8] = b"CCWEMB01";
const TAGGER_MAGIC: &[u8; 8] = b"CCWTAG01";
const LINKER_MAGIC: &[u8; 8] = b"CCWLNK01";
const VERSION: u32 = 1;

struct Out(Vec<u8>);

impl Out {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f32s(&mut self, vs: &[f32]) {
        self.0.reserve(vs.len() * 4);
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn f64s(&mut self, vs: &[f64]) {
        self.0.reserve(vs.len() * 8);
        for v in vs {
            self.0.extend_from_slice(&v.to_le_bytes());
        }
    }
    fn str(&mut self, s: &str) {
        self.u32(s.len() as u32);
        self.0.extend_from_slice(s.as_bytes());
    }
}

struct In<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> In<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| FormatError::invalid(self.path, "truncated file"))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u64()? as usize;
        if n.saturating_mul(unit) > self.buf.len() - self.pos {
            return Err(FormatError::invalid(self.path, "length field exceeds file size"));
        }
        Ok(n)
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        Ok(self.take(n * 4)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        Ok(self.take(n * 8)?.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| FormatError::invalid(self.path, "string is not UTF-8"))
    }
    fn header(&mut self, magic: &[u8; 8]) -> Result<()> {
        if self.take(8)? != magic {
            return Err(FormatError::invalid(self.path, "bad magic; not the expected model kind"));
        }
        let v = self.u32()?;
        if v != VERSION {
            return Err(FormatError::invalid(self.path, format!("unsupported version {v}")));
        }
        Ok(())
    }
    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(FormatError::invalid(self.path, "trailing bytes"));
        }
        Ok(())
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| FormatError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_with(path, |w| w.write_all(bytes))
}

// ---- embedding table -----------------------------------------------------

/// Header `{magic, version, dim, vocab size, bucket count}`, then the n-gram
/// range and hash space, then word rows and subword rows.
pub fn write_embeddings(path: &Path, emb: &EmbeddingTable) -> Result<()> {
    let mut o = Out(Vec::new());
    o.0.extend_from_slice(EMBEDDING_MAGIC);
    o.u32(VERSION);
    o.u32(emb.dim() as u32);
    o.u64(emb.vocab_len() as u64);
    o.u64(emb.subword_len() as u64);
    let (lo, hi) = emb.ngram_range();
    o.u32(lo as u32);
    o.u32(hi as u32);
    o.u32(emb.buckets());
    for (w, row) in emb.words() {
        o.str(w);
        o.f32s(row);
    }
    for (b, row) in emb.subwords() {
        o.u32(b);
        o.f32s(row);
    }
    write_bytes(path, &o.0)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    let buf = read_bytes(path)?;
    let mut r = In { buf: &buf, pos: 0, path };
    r.header(EMBEDDING_MAGIC)?;
    let dim = r.u32()? as usize;
    let vocab = r.len(4)?;
    let subs = r.len(4)?;
    let range = (r.u32()? as usize, r.u32()? as usize);
    let buckets = r.u32()?;
    let mut words = Vec::with_capacity(vocab);
    for _ in 0..vocab {
        let w = r.str()?;
        words.push((w, r.f32s(dim)?));
    }
    let mut subwords = Vec::with_capacity(subs);
    for _ in 0..subs {
        let b = r.u32()?;
        subwords.push((b, r.f32s(dim)?));
    }
    r.finish()?;
    EmbeddingTable::from_parts(dim, range, buckets, words, subwords).map_err(|e| FormatError::invalid(path, e))
}

/// `vocab dim` header, then one line per word with its composed vector.
pub fn write_embeddings_text(path: &Path, emb: &EmbeddingTable) -> Result<()> {
    write_with(path, |w| {
        writeln!(w, "{} {}", emb.vocab_len(), emb.dim())?;
        for (word, _) in emb.words() {
            write!(w, "{word}")?;
            for x in emb.word_vector(word).unwrap_or_default() {
                write!(w, " {x}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    })
}

// ---- tagger --------------------------------------------------------------

fn strategy_code(s: Strategy) -> u8 {
    match s {
        Strategy::WeakOnly => 0,
        Strategy::Supervised => 1,
        Strategy::FineTune => 2,
    }
}

pub fn write_tagger(path: &Path, m: &TaggerModel) -> Result<()> {
    let mut o = Out(Vec::new());
    o.0.extend_from_slice(TAGGER_MAGIC);
    o.u32(VERSION);
    o.u64(m.template_hash());
    o.u32(m.hash_bits());
    o.u32(m.dense_dim() as u32);
    let meta = m.meta();
    o.u8(strategy_code(meta.strategy));
    o.u8(matches!(meta.label_mode, LabelMode::Hard) as u8);
    o.u64(meta.seed);
    o.u64(meta.epochs as u64);
    o.u64(meta.gold_epochs as u64);
    o.f64(meta.augment_drop_p);
    for row in m.transitions() {
        o.f64s(row);
    }
    o.f64s(m.emission());
    o.f64s(m.dense());
    write_bytes(path, &o.0)
}

pub fn read_tagger(path: &Path) -> Result<TaggerModel> {
    let buf = read_bytes(path)?;
    let mut r = In { buf: &buf, pos: 0, path };
    r.header(TAGGER_MAGIC)?;
    let template = r.u64()?;
    let hash_bits = r.u32()?;
    if !(8..=26).contains(&hash_bits) {
        return Err(FormatError::invalid(path, format!("hash_bits {hash_bits} out of range")));
    }
    let dense_dim = r.u32()? as usize;
    let strategy = match r.u8()? {
        0 => Strategy::WeakOnly,
        1 => Strategy::Supervised,
        2 => Strategy::FineTune,
        c => return Err(FormatError::invalid(path, format!("unknown strategy code {c}"))),
    };
    let label_mode = if r.u8()? == 1 { LabelMode::Hard } else { LabelMode::Soft };
    let meta = TrainingMeta {
        strategy,
        label_mode,
        seed: r.u64()?,
        epochs: r.u64()? as usize,
        gold_epochs: r.u64()? as usize,
        augment_drop_p: r.f64()?,
    };
    let mut transitions = [[0.0; 3]; 4];
    for row in transitions.iter_mut() {
        for x in row.iter_mut() {
            *x = r.f64()?;
        }
    }
    let emission = r.f64s((1usize << hash_bits) * 3)?;
    let dense = r.f64s(dense_dim * 3)?;
    r.finish()?;
    TaggerModel::from_parts(hash_bits, dense_dim, emission, dense, transitions, template, meta).map_err(|e| match e {
        ccweak_core::tagger::TaggerError::FeatureMismatch { .. } => FormatError::Mismatch {
            path: path.to_path_buf(),
            msg: format!("model was trained with other feature templates ({e})"),
        },
        e => FormatError::invalid(path, e),
    })
}

// ---- linker --------------------------------------------------------------

pub fn write_linker(path: &Path, m: &LinkerModel) -> Result<()> {
    let mut o = Out(Vec::new());
    o.0.extend_from_slice(LINKER_MAGIC);
    o.u32(VERSION);
    o.u64(m.fingerprint());
    o.u32(m.hash_bits());
    o.u32(m.dense_dim() as u32);
    let meta = m.meta();
    o.u64(meta.seed);
    o.u64(meta.epochs as u64);
    o.u64(meta.window as u64);
    o.u64(meta.examples as u64);
    o.u64(m.classes().len() as u64);
    for c in m.classes() {
        o.str(c);
    }
    o.f32s(m.sparse());
    o.f32s(m.dense());
    o.f32s(m.bias());
    write_bytes(path, &o.0)
}

/// Loads a linker and checks it against `ont`.
pub fn read_linker(path: &Path, ont: &Ontology) -> Result<LinkerModel> {
    let buf = read_bytes(path)?;
    let mut r = In { buf: &buf, pos: 0, path };
    r.header(LINKER_MAGIC)?;
    let fingerprint = r.u64()?;
    if fingerprint != ont.fingerprint() {
        return Err(FormatError::Mismatch {
            path: path.to_path_buf(),
            msg: format!(
                "ontology fingerprint {fingerprint:#018x} does not match the loaded ontology ({:#018x})",
                ont.fingerprint()
            ),
        });
    }
    let hash_bits = r.u32()?;
    if !(8..=22).contains(&hash_bits) {
        return Err(FormatError::invalid(path, format!("hash_bits {hash_bits} out of range")));
    }
    let dense_dim = r.u32()? as usize;
    let meta = LinkerMeta {
        seed: r.u64()?,
        epochs: r.u64()? as usize,
        window: r.u64()? as usize,
        examples: r.u64()? as usize,
    };
    let n = r.len(4)?;
    let mut classes = Vec::with_capacity(n);
    for _ in 0..n {
        classes.push(r.str()?);
    }
    let sparse = r.f32s((1usize << hash_bits) * n)?;
    let dense = r.f32s(dense_dim * n)?;
    let bias = r.f32s(n)?;
    r.finish()?;
    LinkerModel::from_parts(classes, hash_bits, dense_dim, sparse, dense, bias, fingerprint, meta)
        .map_err(|e| FormatError::invalid(path, e))
}
