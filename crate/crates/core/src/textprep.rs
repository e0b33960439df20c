//! Normalization, tokenization and separator-based chunking of records.
//!
//! All offsets are character offsets into the normalized record text, end
//! exclusive.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

/// A character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start < end, "empty span {start}..{end}");
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Number of characters shared with `other`.
    pub fn overlap(&self, other: &CharSpan) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }

    pub fn contains(&self, other: &CharSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }
}

/// A free-text record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Record {
    pub id: String,
    pub text: String,
}

impl Record {
    /// Builds a record with its text normalized.
    pub fn new(id: impl Into<String>, text: &str) -> Self {
        Self { id: id.into(), text: normalize(text) }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Text covered by `span`, or `None` when the span leaves the record.
    pub fn slice(&self, span: CharSpan) -> Option<String> {
        slice_chars(&self.text, span)
    }
}

/// Returns the characters of `text` covered by `span`.
pub fn slice_chars(text: &str, span: CharSpan) -> Option<String> {
    if span.is_empty() {
        return None;
    }
    let mut out = String::new();
    let mut count = 0;
    for (i, c) in text.chars().enumerate() {
        if i >= span.end {
            break;
        }
        if i >= span.start {
            out.push(c);
        }
        count = i + 1;
    }
    (count >= span.end).then_some(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub text: String,
    pub span: CharSpan,
    /// True only for separator characters that are active at this position.
    pub is_separator: bool,
}

impl Token {
    /// Alphanumeric run, as opposed to a single punctuation character.
    pub fn is_word(&self) -> bool {
        self.text.chars().next().is_some_and(char::is_alphanumeric)
    }
}

/// A maximal run of tokens between active separators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub tokens: Vec<Token>,
    pub span: CharSpan,
    /// Record text covered by `span`.
    pub text: String,
    /// Index of the first token in the record's token list.
    pub first_token: usize,
}

impl Chunk {
    pub fn token_texts(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.text.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SeparatorConfigError {
    #[error("expected 10 distinct separator characters, got {0}")]
    WrongCount(usize),
    #[error("separator {0:?} is alphanumeric or whitespace")]
    InvalidSeparator(char),
    #[error("slash_min_run must be at least 1")]
    ZeroSlashRun,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeparatorConfig {
    separators: Vec<char>,
    /// `/` is active only when each adjacent alphanumeric run has at least
    /// this many characters.
    pub slash_min_run: usize,
    /// `.` between two digits is never a separator.
    pub period_digit_guard: bool,
}

pub const DEFAULT_SEPARATORS: [char; 10] = [',', ';', '/', '\\', '+', '&', '|', ':', '.', '?'];

impl Default for SeparatorConfig {
    fn default() -> Self {
        Self {
            separators: DEFAULT_SEPARATORS.to_vec(),
            slash_min_run: 2,
            period_digit_guard: true,
        }
    }
}

impl SeparatorConfig {
    pub fn new(
        separators: &[char],
        slash_min_run: usize,
        period_digit_guard: bool,
    ) -> Result<Self, SeparatorConfigError> {
        let mut uniq: Vec<char> = Vec::with_capacity(separators.len());
        for &c in separators {
            if c.is_alphanumeric() || c.is_whitespace() {
                return Err(SeparatorConfigError::InvalidSeparator(c));
            }
            if !uniq.contains(&c) {
                uniq.push(c);
            }
        }
        if uniq.len() != 10 || separators.len() != 10 {
            return Err(SeparatorConfigError::WrongCount(uniq.len()));
        }
        if slash_min_run == 0 {
            return Err(SeparatorConfigError::ZeroSlashRun);
        }
        Ok(Self { separators: uniq, slash_min_run, period_digit_guard })
    }

    pub fn separators(&self) -> &[char] {
        &self.separators
    }

    pub fn is_separator_char(&self, c: char) -> bool {
        self.separators.contains(&c)
    }
}

/// Lowercases, collapses whitespace runs to one space and trims.
pub fn normalize(text: &str) -> String {
    let lower = text.to_lowercase();
    let mut out = String::with_capacity(lower.len());
    for word in lower.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

fn alnum_run_before(chars: &[char], i: usize) -> usize {
    chars[..i].iter().rev().take_while(|c| c.is_alphanumeric()).count()
}

fn alnum_run_after(chars: &[char], i: usize) -> usize {
    chars[i + 1..].iter().take_while(|c| c.is_alphanumeric()).count()
}

fn separator_active(chars: &[char], i: usize, cfg: &SeparatorConfig) -> bool {
    let c = chars[i];
    if !cfg.is_separator_char(c) {
        return false;
    }
    match c {
        '/' => {
            let ok = |run: usize| run == 0 || run >= cfg.slash_min_run;
            ok(alnum_run_before(chars, i)) && ok(alnum_run_after(chars, i))
        }
        '.' if cfg.period_digit_guard => {
            let prev_digit = i > 0 && chars[i - 1].is_ascii_digit();
            let next_digit = chars.get(i + 1).is_some_and(char::is_ascii_digit);
            !(prev_digit && next_digit)
        }
        _ => true,
    }
}

/// Splits `text` into alphanumeric runs and single punctuation tokens.
/// Whitespace is never part of a token.
pub fn tokenize(text: &str, cfg: &SeparatorConfig) -> Vec<Token> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_alphanumeric() {
            let start = i;
            while i < chars.len() && chars[i].is_alphanumeric() {
                i += 1;
            }
            tokens.push(Token {
                text: chars[start..i].iter().collect(),
                span: CharSpan::new(start, i),
                is_separator: false,
            });
        } else {
            tokens.push(Token {
                text: String::from(c),
                span: CharSpan::new(i, i + 1),
                is_separator: separator_active(&chars, i, cfg),
            });
            i += 1;
        }
    }
    tokens
}

/// Groups already tokenized `text` into chunks.
pub fn chunks_from_tokens(text: &str, tokens: &[Token]) -> Vec<Chunk> {
    let chars: Vec<char> = text.chars().collect();
    let mut chunks = Vec::new();
    let mut start: Option<usize> = None;
    let flush = |from: usize, to: usize, chunks: &mut Vec<Chunk>| {
        let span = CharSpan::new(tokens[from].span.start, tokens[to - 1].span.end);
        chunks.push(Chunk {
            tokens: tokens[from..to].to_vec(),
            span,
            text: chars[span.start..span.end].iter().collect(),
            first_token: from,
        });
    };
    for (i, tok) in tokens.iter().enumerate() {
        match (tok.is_separator, start) {
            (true, Some(s)) => {
                flush(s, i, &mut chunks);
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(s) = start {
        flush(s, tokens.len(), &mut chunks);
    }
    chunks
}

pub fn split_chunks(rec: &Record, cfg: &SeparatorConfig) -> Vec<Chunk> {
    let tokens = tokenize(&rec.text, cfg);
    chunks_from_tokens(&rec.text, &tokens)
}

/// Maps character offsets of a record to offsets in an edited copy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OffsetMap {
    map: Vec<Option<usize>>,
    new_len: usize,
}

impl OffsetMap {
    pub fn identity(len: usize) -> Self {
        Self { map: (0..len).map(Some).collect(), new_len: len }
    }

    /// New offset of the character at `old`, if it survived the edit.
    pub fn get(&self, old: usize) -> Option<usize> {
        self.map.get(old).copied().flatten()
    }

    pub fn new_len(&self) -> usize {
        self.new_len
    }

    pub fn old_len(&self) -> usize {
        self.map.len()
    }

    /// Remaps a span whose first and last characters survived.
    pub fn map_span(&self, span: CharSpan) -> Option<CharSpan> {
        let start = self.get(span.start)?;
        let last = self.get(span.end.checked_sub(1)?)?;
        (last >= start).then(|| CharSpan::new(start, last + 1))
    }
}

/// Replaces each active separator with a space with probability `p`, then
/// collapses whitespace. The record text must already be normalized.
///
/// One uniform draw is taken per active separator regardless of `p`.
pub fn drop_separators<R: Rng + ?Sized>(
    rec: &Record,
    p: f64,
    cfg: &SeparatorConfig,
    rng: &mut R,
) -> (Record, OffsetMap) {
    let mut chars: Vec<char> = rec.text.chars().collect();
    let mut dropped = vec![false; chars.len()];
    for tok in tokenize(&rec.text, cfg) {
        if tok.is_separator {
            let draw: f64 = rng.gen();
            if draw < p {
                chars[tok.span.start] = ' ';
                dropped[tok.span.start] = true;
            }
        }
    }
    let (text, map) = collapse_whitespace(&chars, &dropped);
    (Record { id: rec.id.clone(), text }, map)
}

// A kept space maps from the first original (not dropped) whitespace
// character of its run.
fn collapse_whitespace(chars: &[char], dropped: &[bool]) -> (String, OffsetMap) {
    let mut out = String::with_capacity(chars.len());
    let mut map = Vec::with_capacity(chars.len());
    let mut new_len = 0usize;
    let mut pending_space = false;
    let mut space_source: Option<usize> = None;
    for (i, &c) in chars.iter().enumerate() {
        if c.is_whitespace() {
            pending_space = new_len > 0;
            if space_source.is_none() && !dropped[i] {
                space_source = Some(i);
            }
            map.push(None);
        } else {
            if pending_space {
                if let Some(src) = space_source {
                    map[src] = Some(new_len);
                }
                out.push(' ');
                new_len += 1;
                pending_space = false;
            }
            space_source = None;
            out.push(c);
            map.push(Some(new_len));
            new_len += 1;
        }
    }
    (out, OffsetMap { map, new_len })
}

/// True when the record has at least one active separator.
pub fn has_active_separator(text: &str, cfg: &SeparatorConfig) -> bool {
    let chars: Vec<char> = text.chars().collect();
    (0..chars.len()).any(|i| !chars[i].is_alphanumeric() && separator_active(&chars, i, cfg))
}
