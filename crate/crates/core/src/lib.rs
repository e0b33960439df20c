//! Weakly supervised entity extraction and linking for short,
//! separator-delimited clinical text (chief complaints).
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs plus an explicit seed; file formats, the CLI and
//! any IO live in the `ccweak` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`textprep`] normalizes records, tokenizes them and splits them into
//!    chunks on separator punctuation.
//! 2. [`matcher`] runs each chunk through exact, approximate (character
//!    n-gram) and embedding matching against an [`ontology`] to produce
//!    confidence-scored weak annotations.
//! 3. [`tagger`] trains a BIO sequence labeler from those annotations with
//!    confidence-adjusted label smoothing.
//! 4. [`linker`] trains a concept classifier over mention and directional
//!    context features, with an exact-match-first ensemble.
//! 5. [`evaluation`] scores extraction and linking in Partial, Exact and
//!    Entity-Type modes.
//!
//! [`synthcorpus`] generates seeded synthetic ontologies and annotated
//! corpora that stand in for private clinical data.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod embedding;
pub mod evaluation;
pub mod hash;
pub mod linker;
pub mod matcher;
pub mod ontology;
pub mod synthcorpus;
pub mod tagger;
pub mod textprep;

mod math;

pub use embedding::{cosine, embed_phrase, train_embeddings, EmbeddingConfig, EmbeddingTable};
pub use evaluation::{align, evaluate, score, EvalCounts, EvalMode, EvalReport, ModeScore, TypedSpan};
pub use matcher::{MatchConfig, Matcher, Stage, StageSet, WeakAnnotation, WeakDataset, WeakRecord};
pub use ontology::{Concept, Ontology};
pub use linker::{LinkSource, LinkedEntity, LinkerConfig, LinkerModel};
pub use tagger::{BioTag, Mention, TaggedSequence, TaggerConfig, TaggerModel, TrainingSet};
pub use textprep::{CharSpan, Chunk, Record, SeparatorConfig, Token};
