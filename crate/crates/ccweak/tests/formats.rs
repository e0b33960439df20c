use std::path::Path;

use ccweak::experiment::{encode_weak_all, weak_label, Dataset, SynthSettings};
use ccweak::formats::*;
use ccweak_core::embedding::{train_embeddings, EmbeddingConfig};
use ccweak_core::linker::{train_linker, LinkExample, LinkerConfig};
use ccweak_core::matcher::{MatchConfig, Matcher, Stage, StageSet};
use ccweak_core::ontology::{Concept, Ontology};
use ccweak_core::synthcorpus::NoiseConfig;
use ccweak_core::tagger::{train_tagger, TaggerConfig, TrainingSet};
use ccweak_core::textprep::{Record, SeparatorConfig};
use tempfile::tempdir;

fn small() -> Dataset {
    let settings = SynthSettings { train_records: 300, test_records: 20, ..Default::default() };
    Dataset::synthetic(&settings, 7).unwrap()
}

fn small_emb(ds: &Dataset) -> ccweak_core::embedding::EmbeddingTable {
    let cfg = EmbeddingConfig { dim: 16, epochs: 1, buckets: 1 << 12, ..Default::default() };
    train_embeddings(&ds.train_records(), &cfg).unwrap().0
}

#[test]
fn ontology_and_merge_list_round_trip() {
    let ds = small();
    let dir = tempdir().unwrap();
    let p = dir.path().join("o.jsonl");
    write_ontology(&p, &ds.full.ontology).unwrap();
    assert_eq!(read_ontology(&p).unwrap(), ds.full.ontology);
    let m = dir.path().join("sub/merge.txt");
    write_merge_list(&m, &ds.full.children).unwrap();
    assert_eq!(read_merge_list(&m).unwrap(), ds.full.children);
}

#[test]
fn ontology_errors_name_the_line() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("o.jsonl");
    std::fs::write(
        &p,
        "{\"id\":\"C1\",\"canonical\":\"fever\",\"synonyms\":[],\"parent\":null}\n{\"id\":\"C1\",\"canonical\":\"cough\",\"synonyms\":[],\"parent\":null}\n",
    )
    .unwrap();
    let err = format!("{:#}", read_ontology(&p).unwrap_err());
    assert!(err.contains("o.jsonl:2"), "{err}");
    std::fs::write(&p, "{\"id\":\"C1\",\"canonical\":\"fever\",\"bogus\":1}\n").unwrap();
    assert!(read_ontology(&p).is_err());
}

#[test]
fn corpus_weak_and_conll_round_trip() {
    let ds = small();
    let dir = tempdir().unwrap();
    let c = dir.path().join("c.jsonl");
    write_corpus(&c, &ds.train_records()).unwrap();
    assert_eq!(read_corpus(&c).unwrap(), ds.train_records());

    let matcher = Matcher::new(&ds.ontology, MatchConfig::default(), SeparatorConfig::default(), None).unwrap();
    let weak = weak_label(&matcher, &ds.train_records(), StageSet::new(&[Stage::S1, Stage::S2]), 1).unwrap();
    let w = dir.path().join("w.jsonl");
    write_weak(&w, &weak.records).unwrap();
    assert_eq!(read_weak(&w).unwrap(), weak.records);

    let seqs = encode_weak_all(&weak, &SeparatorConfig::default(), 0.3).unwrap();
    let k = dir.path().join("w.conll");
    write_conll(&k, &seqs).unwrap();
    let text = std::fs::read_to_string(&k).unwrap();
    let tokens: usize = seqs.iter().map(|s| s.tokens.len()).sum();
    assert_eq!(text.lines().filter(|l| !l.is_empty()).count(), tokens);
    assert!(text.lines().filter(|l| !l.is_empty()).all(|l| l.split('\t').count() == 3));
}

#[test]
fn annotations_reject_bad_spans() {
    let dir = tempdir().unwrap();
    let p = dir.path().join("a.jsonl");
    std::fs::write(&p, "{\"record_id\":\"r\",\"text\":\"fever\",\"annotations\":[{\"start\":0,\"end\":9}]}\n").unwrap();
    assert!(read_annotations(&p).is_err());
    std::fs::write(&p, "{\"record_id\":\"r\",\"text\":\"fever\",\"annotations\":[{\"start\":0,\"end\":5}]}\n").unwrap();
    let recs = read_annotations(&p).unwrap();
    assert_eq!(recs[0].typed_spans().len(), 1);
    assert!(matches!(read_predictions(&p).unwrap(), PredictionFile::Annotations(_)));
}

#[test]
fn binary_models_round_trip() {
    let ds = small();
    let emb = small_emb(&ds);
    let dir = tempdir().unwrap();
    let e = dir.path().join("e.bin");
    write_embeddings(&e, &emb).unwrap();
    assert_eq!(read_embeddings(&e).unwrap(), emb);
    let t = dir.path().join("e.txt");
    write_embeddings_text(&t, &emb).unwrap();
    let header = std::fs::read_to_string(&t).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, format!("{} {}", emb.vocab_len(), emb.dim()));

    let sep = SeparatorConfig::default();
    let matcher = Matcher::new(&ds.ontology, MatchConfig::default(), sep.clone(), Some(&emb)).unwrap();
    let weak = weak_label(&matcher, &ds.train_records(), StageSet::all(), 1).unwrap();
    let seqs = encode_weak_all(&weak, &sep, 0.3).unwrap();
    let tcfg = TaggerConfig { epochs: 1, ..Default::default() };
    let tf = tcfg.featurizer(sep.clone(), Some(&emb));
    let (tagger, _) = train_tagger(TrainingSet::WeakOnly(&seqs), &tf, &tcfg).unwrap();
    let tp = dir.path().join("t.bin");
    write_tagger(&tp, &tagger).unwrap();
    assert_eq!(read_tagger(&tp).unwrap(), tagger);

    let lcfg = LinkerConfig { epochs: 1, ..Default::default() };
    let lf = lcfg.featurizer(sep, Some(&emb));
    let examples: Vec<LinkExample> = weak
        .records
        .iter()
        .flat_map(|w| {
            w.annotations.iter().map(move |a| LinkExample {
                record: w.record(),
                span: a.span,
                concept_id: a.concept_id.clone(),
                weight: a.confidence,
            })
        })
        .collect();
    let (linker, _) = train_linker(&examples, &ds.ontology, &lf, &lcfg).unwrap();
    let lp = dir.path().join("l.bin");
    write_linker(&lp, &linker).unwrap();
    assert_eq!(read_linker(&lp, &ds.ontology).unwrap(), linker);

    // Same file against an ontology with other concepts.
    let other = Ontology::from_concepts([Concept::new("X1", "fever", Vec::<&str>::new(), None)]).unwrap();
    let err = read_linker(&lp, &other).unwrap_err();
    assert!(matches!(err, FormatError::Mismatch { .. }), "{err}");
}

#[test]
fn truncated_and_foreign_binaries_fail() {
    let ds = small();
    let emb = small_emb(&ds);
    let dir = tempdir().unwrap();
    let e = dir.path().join("e.bin");
    write_embeddings(&e, &emb).unwrap();
    let bytes = std::fs::read(&e).unwrap();
    std::fs::write(&e, &bytes[..bytes.len() / 2]).unwrap();
    assert!(read_embeddings(&e).is_err());
    assert!(read_tagger(Path::new(&e)).is_err());
    let missing = dir.path().join("nope.bin");
    let msg = format!("{:#}", read_embeddings(&missing).unwrap_err());
    assert!(msg.contains("nope.bin"), "{msg}");
}

#[test]
fn zero_noise_gold_round_trips_through_annotations() {
    let settings = SynthSettings { noise: NoiseConfig::zero(), train_records: 0, test_records: 30, ..Default::default() };
    let ds = Dataset::synthetic(&settings, 3).unwrap();
    let dir = tempdir().unwrap();
    let p = dir.path().join("g.jsonl");
    let recs: Vec<AnnotatedRecord> = ds
        .test
        .iter()
        .map(|r| AnnotatedRecord::from_spans(&r.record, &ccweak::experiment::gold_spans(r)))
        .collect();
    write_annotations(&p, &recs).unwrap();
    let back = read_annotations(&p).unwrap();
    assert_eq!(back, recs);
    let r: Record = back[0].record();
    assert_eq!(r, ds.test[0].record);
}
