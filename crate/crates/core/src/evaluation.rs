//! SemEval-2013 task 9.1 style scoring in Partial, Exact and Entity-Type
//! modes.
//!
//! Gold and predicted spans are aligned one-to-one by greedy maximal
//! character overlap (ties go to the earlier gold span, then the earlier
//! prediction). The alignment is shared by all modes; only the grading of an
//! aligned pair differs.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::textprep::CharSpan;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("{side} spans overlap: {a:?} and {b:?}")]
    OverlappingSpans { side: &'static str, a: CharSpan, b: CharSpan },
    #[error("entity-type mode needs a concept id on every span")]
    MissingConcept,
    #[error("predicted record {0:?} does not exist in the gold set")]
    UnknownRecord(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EvalMode {
    Partial,
    Exact,
    Type,
}

impl EvalMode {
    pub const ALL: [EvalMode; 3] = [EvalMode::Partial, EvalMode::Exact, EvalMode::Type];

    pub fn as_str(self) -> &'static str {
        match self {
            EvalMode::Partial => "partial",
            EvalMode::Exact => "exact",
            EvalMode::Type => "type",
        }
    }
}

impl fmt::Display for EvalMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A span with an optional concept id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedSpan {
    pub span: CharSpan,
    pub concept: Option<String>,
}

impl TypedSpan {
    pub fn new(start: usize, end: usize, concept: Option<&str>) -> Self {
        Self { span: CharSpan::new(start, end), concept: concept.map(String::from) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCounts {
    pub cor: u64,
    pub inc: u64,
    pub par: u64,
    pub mis: u64,
    pub spu: u64,
}

impl EvalCounts {
    pub fn possible(&self) -> u64 {
        self.cor + self.inc + self.par + self.mis
    }

    pub fn actual(&self) -> u64 {
        self.cor + self.inc + self.par + self.spu
    }
}

impl core::ops::AddAssign for EvalCounts {
    fn add_assign(&mut self, o: Self) {
        self.cor += o.cor;
        self.inc += o.inc;
        self.par += o.par;
        self.mis += o.mis;
        self.spu += o.spu;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeScore {
    pub counts: EvalCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ModeScore {
    pub fn from_counts(counts: EvalCounts, mode: EvalMode) -> Self {
        let (precision, recall, f1) = score(&counts, mode);
        Self { counts, precision, recall, f1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalReport {
    pub partial: ModeScore,
    pub exact: ModeScore,
    pub entity_type: ModeScore,
}

impl EvalReport {
    pub fn mode(&self, mode: EvalMode) -> &ModeScore {
        match mode {
            EvalMode::Partial => &self.partial,
            EvalMode::Exact => &self.exact,
            EvalMode::Type => &self.entity_type,
        }
    }
}

fn check_disjoint(spans: &[TypedSpan], side: &'static str) -> Result<(), EvalError> {
    let mut sorted: Vec<CharSpan> = spans.iter().map(|s| s.span).collect();
    sorted.sort();
    for w in sorted.windows(2) {
        if w[0].overlap(&w[1]) > 0 {
            return Err(EvalError::OverlappingSpans { side, a: w[0], b: w[1] });
        }
    }
    Ok(())
}

/// Greedy one-to-one alignment; returns `(gold index, pred index)` pairs.
fn alignment(gold: &[TypedSpan], pred: &[TypedSpan]) -> Vec<(usize, usize)> {
    let mut gi: Vec<usize> = (0..gold.len()).collect();
    gi.sort_by_key(|&i| gold[i].span);
    let mut pi: Vec<usize> = (0..pred.len()).collect();
    pi.sort_by_key(|&i| pred[i].span);

    let mut candidates = Vec::new();
    for (gr, &g) in gi.iter().enumerate() {
        for (pr, &p) in pi.iter().enumerate() {
            let ov = gold[g].span.overlap(&pred[p].span);
            if ov > 0 {
                candidates.push((ov, gr, pr, g, p));
            }
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut gold_used = alloc::vec![false; gold.len()];
    let mut pred_used = alloc::vec![false; pred.len()];
    let mut pairs = Vec::new();
    for (_, _, _, g, p) in candidates {
        if !gold_used[g] && !pred_used[p] {
            gold_used[g] = true;
            pred_used[p] = true;
            pairs.push((g, p));
        }
    }
    pairs
}

/// Counts for one record under `mode`.
pub fn align(gold: &[TypedSpan], pred: &[TypedSpan], mode: EvalMode) -> Result<EvalCounts, EvalError> {
    check_disjoint(gold, "gold")?;
    check_disjoint(pred, "predicted")?;
    if mode == EvalMode::Type && gold.iter().chain(pred).any(|s| s.concept.is_none()) {
        return Err(EvalError::MissingConcept);
    }
    let pairs = alignment(gold, pred);
    let mut c = EvalCounts::default();
    for &(g, p) in &pairs {
        let (gs, ps) = (&gold[g], &pred[p]);
        let identical = gs.span == ps.span;
        match mode {
            EvalMode::Exact if identical => c.cor += 1,
            EvalMode::Exact => c.inc += 1,
            EvalMode::Partial if identical => c.cor += 1,
            EvalMode::Partial => c.par += 1,
            EvalMode::Type if gs.concept == ps.concept => c.cor += 1,
            EvalMode::Type => c.inc += 1,
        }
    }
    c.mis = (gold.len() - pairs.len()) as u64;
    c.spu = (pred.len() - pairs.len()) as u64;
    Ok(c)
}

/// Precision, recall and F1. Partial mode credits half a point per partial
/// match; zero denominators give 0.
pub fn score(c: &EvalCounts, mode: EvalMode) -> (f64, f64, f64) {
    let credit = match mode {
        EvalMode::Partial => c.cor as f64 + 0.5 * c.par as f64,
        EvalMode::Exact | EvalMode::Type => c.cor as f64,
    };
    let ratio = |den: u64| if den == 0 { 0.0 } else { credit / den as f64 };
    let p = ratio(c.actual());
    let r = ratio(c.possible());
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Micro-averaged report over `(gold, pred)` record pairs.
pub fn evaluate<'a, I>(records: I) -> Result<EvalReport, EvalError>
where
    I: IntoIterator<Item = (&'a [TypedSpan], &'a [TypedSpan])>,
{
    let mut totals = [EvalCounts::default(); 3];
    let mut typed = true;
    for (gold, pred) in records {
        totals[0] += align(gold, pred, EvalMode::Partial)?;
        totals[1] += align(gold, pred, EvalMode::Exact)?;
        if typed {
            match align(gold, pred, EvalMode::Type) {
                Ok(c) => totals[2] += c,
                Err(EvalError::MissingConcept) => typed = false,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(EvalReport {
        partial: ModeScore::from_counts(totals[0], EvalMode::Partial),
        exact: ModeScore::from_counts(totals[1], EvalMode::Exact),
        entity_type: if typed { ModeScore::from_counts(totals[2], EvalMode::Type) } else { ModeScore::default() },
    })
}
