//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria 3 to 9 share one seeded dataset, one embedding table and one
//! weak-label pass. Rates are fractions; point thresholds are divided by 100.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Context, Result};
use ccweak::cli::run_pipeline;
use ccweak::config::PipelineConfig;
use ccweak::experiment::{
    encode_gold_all, encode_weak_all, evaluate_linked, evaluate_mentions, evaluate_weak, extract, link_all, weak_label,
    Dataset, LinkMode, SynthSettings,
};
use ccweak::formats;
use ccweak_core::embedding::{train_embeddings, EmbeddingConfig, EmbeddingTable};
use ccweak_core::evaluation::{align, evaluate, EvalMode, EvalReport, TypedSpan};
use ccweak_core::linker::{train_linker, LinkExample, LinkerConfig, LinkerModel};
use ccweak_core::matcher::{MatchConfig, Matcher, Stage, StageSet, WeakDataset};
use ccweak_core::synthcorpus::NoiseConfig;
use ccweak_core::tagger::{train_tagger, LabelMode, TaggedSequence, TaggerConfig, TaggerModel, TrainingSet};
use ccweak_core::textprep::{has_active_separator, SeparatorConfig};
use serde::Deserialize;

const SEED: u64 = 42;

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

// ---------------------------------------------------------------- C1

#[derive(Deserialize)]
struct FixtureLine {
    record_id: String,
    gold: Vec<(usize, usize, String)>,
    pred: Vec<(usize, usize, String)>,
    partial: [u64; 5],
    exact: [u64; 5],
    #[serde(rename = "type")]
    entity_type: [u64; 5],
}

#[derive(Deserialize)]
struct FixtureMode {
    counts: [u64; 5],
    precision: (u64, u64),
    recall: (u64, u64),
    f1: (u64, u64),
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn spans(v: &[(usize, usize, String)]) -> Vec<TypedSpan> {
    v.iter().map(|(s, e, c)| TypedSpan::new(*s, *e, Some(c))).collect()
}

fn evaluator_oracle() -> Result<Outcome> {
    let dir = fixture_dir();
    let lines: Vec<FixtureLine> = std::fs::read_to_string(dir.join("eval_hand_tally.jsonl"))?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()?;
    let totals: BTreeMap<String, FixtureMode> =
        serde_json::from_str(&std::fs::read_to_string(dir.join("eval_hand_tally_totals.json"))?)?;
    ensure!(lines.len() >= 20, "fixture has only {} records", lines.len());

    let golds: Vec<_> = lines.iter().map(|l| spans(&l.gold)).collect();
    let preds: Vec<_> = lines.iter().map(|l| spans(&l.pred)).collect();
    let mut bad = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        for (mode, want) in [(EvalMode::Partial, l.partial), (EvalMode::Exact, l.exact), (EvalMode::Type, l.entity_type)] {
            let c = align(&golds[i], &preds[i], mode)?;
            if [c.cor, c.inc, c.par, c.mis, c.spu] != want {
                bad.push(format!("{} {}", l.record_id, mode.as_str()));
            }
        }
    }
    let report = evaluate(golds.iter().zip(&preds).map(|(g, p)| (g.as_slice(), p.as_slice())))?;
    for mode in EvalMode::ALL {
        let key = match mode {
            EvalMode::Partial => "partial",
            EvalMode::Exact => "exact",
            EvalMode::Type => "type",
        };
        let want = totals.get(key).ok_or_else(|| anyhow!("totals lack {key}"))?;
        let got = report.mode(mode);
        let c = got.counts;
        let frac = |(n, d): (u64, u64)| n as f64 / d as f64;
        let close = (got.precision - frac(want.precision)).abs() <= 1e-9
            && (got.recall - frac(want.recall)).abs() <= 1e-9
            && (got.f1 - frac(want.f1)).abs() <= 1e-9;
        if [c.cor, c.inc, c.par, c.mis, c.spu] != want.counts || !close {
            bad.push(format!("totals {key}"));
        }
    }
    outcome(bad.is_empty(), format!("{} records, mismatches: {:?}", lines.len(), bad))
}

// ---------------------------------------------------------------- C2

fn closed_loop() -> Result<Outcome> {
    let settings = SynthSettings { noise: NoiseConfig::zero(), train_records: 0, test_records: 1000, ..Default::default() };
    let ds = Dataset::synthetic(&settings, SEED)?;
    let matcher = Matcher::new(&ds.ontology, MatchConfig::default(), SeparatorConfig::default(), None)?;
    let weak = weak_label(&matcher, &ds.test_records(), StageSet::new(&[Stage::S1]), workers())?;
    let r = evaluate_weak(&ds.test, &weak)?;
    let all_one = EvalMode::ALL.iter().all(|&m| {
        let s = r.mode(m);
        s.precision == 1.0 && s.recall == 1.0 && s.f1 == 1.0
    });
    outcome(
        all_one,
        format!("partial/exact/type F1 {} {} {}", pct(r.partial.f1), pct(r.exact.f1), pct(r.entity_type.f1)),
    )
}

// ---------------------------------------------------------------- shared

struct Shared {
    ds: Dataset,
    emb: EmbeddingTable,
    weak: WeakDataset,
    seqs: Vec<TaggedSequence>,
    sep: SeparatorConfig,
    embed_time: Duration,
}

impl Shared {
    fn build() -> Result<Self> {
        let t = Instant::now();
        let ds = Dataset::synthetic(&SynthSettings::default(), SEED)?;
        let sep = SeparatorConfig::default();
        let (emb, _) = train_embeddings(&ds.train_records(), &EmbeddingConfig { seed: SEED, ..Default::default() })?;
        let embed_time = t.elapsed();
        let matcher = Matcher::new(&ds.ontology, MatchConfig::default(), sep.clone(), Some(&emb))?;
        let weak = weak_label(&matcher, &ds.train_records(), StageSet::all(), workers())?;
        let seqs = encode_weak_all(&weak, &sep, TaggerConfig::default().unmatched_weight)?;
        Ok(Self { ds, emb, weak, seqs, sep, embed_time })
    }

    fn tagger_cfg(&self) -> TaggerConfig {
        TaggerConfig { seed: SEED, ..Default::default() }
    }

    fn train(&self, set: TrainingSet<'_>, cfg: &TaggerConfig) -> Result<TaggerModel> {
        let f = cfg.featurizer(self.sep.clone(), Some(&self.emb));
        Ok(train_tagger(set, &f, cfg)?.0)
    }

    fn score(&self, model: &TaggerModel, cfg: &TaggerConfig, idx: Option<&[usize]>) -> Result<EvalReport> {
        let f = cfg.featurizer(self.sep.clone(), Some(&self.emb));
        let (gold, recs): (Vec<_>, Vec<_>) = match idx {
            Some(ix) => ix.iter().map(|&i| (self.ds.test[i].clone(), self.ds.test[i].record.clone())).unzip(),
            None => (self.ds.test.clone(), self.ds.test_records()),
        };
        let preds = extract(model, &f, &recs, None, workers())?;
        Ok(evaluate_mentions(&gold, &preds)?)
    }
}

// ---------------------------------------------------------------- C3

fn matcher_reports(sh: &Shared) -> Result<Vec<EvalReport>> {
    let matcher = Matcher::new(&sh.ds.ontology, MatchConfig::default(), sh.sep.clone(), Some(&sh.emb))?;
    let test = sh.ds.test_records();
    [vec![Stage::S1], vec![Stage::S1, Stage::S2], vec![Stage::S1, Stage::S2, Stage::S3]]
        .iter()
        .map(|stages| {
            let w = weak_label(&matcher, &test, StageSet::new(stages), workers())?;
            Ok(evaluate_weak(&sh.ds.test, &w)?)
        })
        .collect()
}

fn stage_trend(reps: &[EvalReport]) -> Result<Outcome> {
    let p: Vec<f64> = reps.iter().map(|r| r.partial.precision).collect();
    let r: Vec<f64> = reps.iter().map(|r| r.partial.recall).collect();
    let ok = p.windows(2).all(|w| w[1] <= w[0]) && r.windows(2).all(|w| w[1] >= w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| pct(*x)).collect::<Vec<_>>().join(" -> ");
    outcome(ok, format!("P {}; R {}", fmt(&p), fmt(&r)))
}

// ---------------------------------------------------------------- C4, C5

fn tagger_vs_matcher(soft: &EvalReport, matchers: &[EvalReport]) -> Result<Outcome> {
    let best = matchers.iter().map(|r| r.partial.f1).fold(0.0, f64::max);
    outcome(
        soft.partial.f1 >= best + 0.02,
        format!("soft tagger F1 {} vs best matcher {}", pct(soft.partial.f1), pct(best)),
    )
}

fn smoothing_ablation(sh: &Shared, soft: &EvalReport) -> Result<Outcome> {
    let cfg = TaggerConfig { label_mode: LabelMode::Hard, ..sh.tagger_cfg() };
    let hard = sh.score(&sh.train(TrainingSet::WeakOnly(&sh.seqs), &cfg)?, &cfg, None)?;
    outcome(
        soft.partial.f1 >= hard.partial.f1 - 0.005,
        format!("soft F1 {} vs hard {}", pct(soft.partial.f1), pct(hard.partial.f1)),
    )
}

// ---------------------------------------------------------------- C6

fn denoising(sh: &Shared, base: &TaggerModel) -> Result<Outcome> {
    let nopunct: Vec<usize> =
        (0..sh.ds.test.len()).filter(|&i| !has_active_separator(&sh.ds.test[i].record.text, &sh.sep)).collect();
    let cfg = sh.tagger_cfg();
    let without = sh.score(base, &cfg, Some(&nopunct))?;
    let aug_cfg = TaggerConfig { augment_drop_p: 1.0, ..cfg };
    let with = sh.score(&sh.train(TrainingSet::WeakOnly(&sh.seqs), &aug_cfg)?, &aug_cfg, Some(&nopunct))?;
    outcome(
        with.partial.f1 >= without.partial.f1 + 0.05,
        format!(
            "no-punct subset n={}: augmented F1 {} vs plain {}",
            nopunct.len(),
            pct(with.partial.f1),
            pct(without.partial.f1)
        ),
    )
}

// ---------------------------------------------------------------- C7

fn strategies(sh: &Shared, weak_model: &TaggerModel) -> Result<Outcome> {
    let cfg = sh.tagger_cfg();
    let gold = encode_gold_all(&sh.ds.test, &sh.sep)?;
    let n = gold.len();
    let fold = n / 5;
    ensure!(fold >= 200, "gold set too small for 200-record folds");
    // [weak, supervised, finetune] x [P, R]
    let mut mean = [[0.0f64; 2]; 3];
    for k in 0..5 {
        let lo = k * fold;
        let train = &gold[lo..lo + 200];
        let held: Vec<usize> = (0..n).filter(|i| *i < lo || *i >= lo + fold).collect();
        let sup = sh.train(TrainingSet::Supervised(train), &cfg)?;
        let ft = sh.train(TrainingSet::FineTune { weak: &sh.seqs, gold: train }, &cfg)?;
        for (j, m) in [weak_model, &sup, &ft].into_iter().enumerate() {
            let r = sh.score(m, &cfg, Some(&held))?;
            mean[j][0] += r.partial.precision / 5.0;
            mean[j][1] += r.partial.recall / 5.0;
        }
    }
    let [w, s, f] = mean;
    outcome(
        f[0] >= s[0] - 0.005 && s[1] > w[1],
        format!(
            "P/R weak {}/{} supervised {}/{} finetune {}/{}",
            pct(w[0]),
            pct(w[1]),
            pct(s[0]),
            pct(s[1]),
            pct(f[0]),
            pct(f[1])
        ),
    )
}

// ---------------------------------------------------------------- C8

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

fn ensemble_linking(sh: &Shared, tagger: &TaggerModel) -> Result<Outcome> {
    let lcfg = LinkerConfig { seed: SEED, ..Default::default() };
    let lf = lcfg.featurizer(sh.sep.clone(), Some(&sh.emb));
    let (linker, _) = train_linker(&link_examples(&sh.weak), &sh.ds.ontology, &lf, &lcfg)?;
    let tcfg = sh.tagger_cfg();
    let tf = tcfg.featurizer(sh.sep.clone(), Some(&sh.emb));
    let test = sh.ds.test_records();
    let mentions = extract(tagger, &tf, &test, None, workers())?;
    let mut typed = BTreeMap::new();
    for mode in [LinkMode::Exact, LinkMode::Model, LinkMode::Ensemble] {
        let linked = link_all(&sh.ds.ontology, &linker, &lf, &test, &mentions, mode, workers())?;
        let r = evaluate_linked(&sh.ds.test, &linked)?;
        typed.insert(mode.as_str(), (r.entity_type.precision, r.entity_type.recall));
    }
    let (ep, er) = typed["exact"];
    let (_, nr) = typed["ensemble"];
    let ok = nr >= er + 0.03 && typed.values().all(|&(p, _)| ep >= p);
    let detail =
        typed.iter().map(|(k, (p, r))| format!("{k} P {} R {}", pct(*p), pct(*r))).collect::<Vec<_>>().join("; ");
    outcome(ok, detail)
}

// ---------------------------------------------------------------- C9

fn model_bytes(write: impl FnOnce(&Path) -> Result<()>) -> Result<Vec<u8>> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("m.bin");
    write(&path)?;
    Ok(std::fs::read(path)?)
}

fn zero_weight(sh: &Shared) -> Result<Outcome> {
    let mut seqs: Vec<TaggedSequence> = sh.seqs.iter().take(500).cloned().collect();
    seqs.iter_mut().for_each(|s| s.weights.iter_mut().for_each(|w| *w = 0.0));
    let cfg = TaggerConfig { augment_drop_p: 0.5, ..sh.tagger_cfg() };
    let f = cfg.featurizer(sh.sep.clone(), Some(&sh.emb));
    let (tagger, _) = train_tagger(TrainingSet::WeakOnly(&seqs), &f, &cfg)?;
    let tagger_init = TaggerModel::init(cfg.hash_bits, f.dense_dim(), tagger.meta().clone());
    let tagger_same =
        model_bytes(|p| Ok(formats::write_tagger(p, &tagger)?))? == model_bytes(|p| Ok(formats::write_tagger(p, &tagger_init)?))?;

    let mut examples = link_examples(&sh.weak);
    examples.truncate(2000);
    examples.iter_mut().for_each(|e| e.weight = 0.0);
    let lcfg = LinkerConfig { seed: SEED, ..Default::default() };
    let lf = lcfg.featurizer(sh.sep.clone(), Some(&sh.emb));
    let (linker, _) = train_linker(&examples, &sh.ds.ontology, &lf, &lcfg)?;
    let linker_init = LinkerModel::init(&sh.ds.ontology, lcfg.hash_bits, lf.dense_dim(), linker.meta().clone());
    let linker_same =
        model_bytes(|p| Ok(formats::write_linker(p, &linker)?))? == model_bytes(|p| Ok(formats::write_linker(p, &linker_init)?))?;
    outcome(tagger_same && linker_same, format!("tagger identical: {tagger_same}, linker identical: {linker_same}"))
}

// ---------------------------------------------------------------- C10, C12

fn dir_contents(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir)? {
        let e = e?;
        out.insert(e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path())?);
    }
    Ok(out)
}

fn pipeline_runs(budget: &mut Duration) -> Result<Outcome> {
    let root = tempfile::tempdir()?;
    let cfg = PipelineConfig::default();
    let t = Instant::now();
    run_pipeline(&cfg, &root.path().join("a"))?;
    *budget = t.elapsed();
    run_pipeline(&cfg, &root.path().join("b"))?;
    let a = dir_contents(&root.path().join("a"))?;
    let b = dir_contents(&root.path().join("b"))?;
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    outcome(
        a.len() > 10 && a.keys().eq(b.keys()) && differing.is_empty(),
        format!("{} files compared, differing: {:?}", a.len(), differing),
    )
}

// ---------------------------------------------------------------- C11

fn property_suites() -> Result<Outcome> {
    let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
    let mut cmd = Command::new(cargo);
    cmd.current_dir(env!("CARGO_MANIFEST_DIR")).args(["test", "-p", "ccweak-core", "--test", "properties"]);
    if !cfg!(debug_assertions) {
        cmd.arg("--release");
    }
    let out = cmd.output().context("running the property suites")?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let summary = stdout.lines().find(|l| l.starts_with("test result:")).unwrap_or("no summary").to_string();
    outcome(out.status.success(), summary)
}

// ---------------------------------------------------------------- main

fn main() -> ExitCode {
    let mut failures = 0;
    // `took` counts any shared setup the criterion's budget covers.
    let mut report = |id: &str, name: &str, limit: Option<Duration>, took: Duration, res: Result<Outcome>| {
        let (pass, detail) = match res {
            Ok(o) => {
                let in_time = limit.is_none_or(|l| took < l);
                let note = if in_time { o.detail } else { format!("{} (over time limit {:?})", o.detail, limit.unwrap()) };
                (o.pass && in_time, note)
            }
            Err(e) => (false, format!("error: {e:#}")),
        };
        if !pass {
            failures += 1;
        }
        println!("{id:<4}{:<5} {name} [{:.1}s] {detail}", if pass { "PASS" } else { "FAIL" }, took.as_secs_f64());
    };
    let secs = Duration::from_secs;

    let t = Instant::now();
    report("C1", "evaluator oracle", Some(secs(1)), t.elapsed(), evaluator_oracle());
    let t = Instant::now();
    report("C2", "closed-loop smoke", Some(secs(30)), t.elapsed(), closed_loop());

    let t = Instant::now();
    let shared = Shared::build();
    let shared = match shared {
        Ok(s) => s,
        Err(e) => {
            for (id, name) in [
                ("C3", "matcher stage trend"),
                ("C4", "tagger beats matcher"),
                ("C5", "smoothing ablation"),
                ("C6", "denoising"),
                ("C7", "training strategies"),
                ("C8", "ensemble linking"),
                ("C9", "zero-weight training"),
            ] {
                println!("{id:<4}FAIL  {name} shared setup failed: {e:#}");
            }
            return ExitCode::FAILURE;
        }
    };
    let setup = t.elapsed();

    let t = Instant::now();
    let matchers = matcher_reports(&shared);
    let c3_time = setup + t.elapsed();
    let c3 = matchers.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|m| stage_trend(m));
    println!(
        "    shared setup {:.1}s, of which embedding training {:.1}s",
        setup.as_secs_f64(),
        shared.embed_time.as_secs_f64()
    );
    report("C3", "matcher stage trend", Some(secs(300)), c3_time, c3);

    let t = Instant::now();
    let cfg = shared.tagger_cfg();
    let soft = shared.train(TrainingSet::WeakOnly(&shared.seqs), &cfg);
    let soft_report = soft.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|m| shared.score(m, &cfg, None));
    let c4 = match (&soft_report, &matchers) {
        (Ok(s), Ok(m)) => tagger_vs_matcher(s, m),
        (Err(e), _) => Err(anyhow!("{e:#}")),
        (_, Err(e)) => Err(anyhow!("{e:#}")),
    };
    report("C4", "tagger beats matcher", Some(secs(600)), setup + t.elapsed(), c4);

    let t = Instant::now();
    let c5 = soft_report.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|s| smoothing_ablation(&shared, s));
    report("C5", "smoothing ablation", None, t.elapsed(), c5);

    let t = Instant::now();
    let c6 = soft.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|m| denoising(&shared, m));
    report("C6", "denoising", None, t.elapsed(), c6);

    let t = Instant::now();
    let c7 = soft.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|m| strategies(&shared, m));
    report("C7", "training strategies", None, t.elapsed(), c7);

    let t = Instant::now();
    let c8 = soft.as_ref().map_err(|e| anyhow!("{e:#}")).and_then(|m| ensemble_linking(&shared, m));
    report("C8", "ensemble linking", None, t.elapsed(), c8);

    let t = Instant::now();
    report("C9", "zero-weight training", None, t.elapsed(), zero_weight(&shared));
    drop(shared);

    let t = Instant::now();
    let mut e2e = Duration::ZERO;
    let c10 = pipeline_runs(&mut e2e);
    let c10_ok = c10.is_ok();
    report("C10", "pipeline determinism", None, t.elapsed(), c10);

    let t = Instant::now();
    report("C11", "property suites", Some(secs(60)), t.elapsed(), property_suites());

    let t = Instant::now();
    let c12 = if c10_ok {
        outcome(e2e < secs(15 * 60), format!("default pipeline took {:.1}s", e2e.as_secs_f64()))
    } else {
        Err(anyhow!("pipeline run failed, see C10"))
    };
    report("C12", "end-to-end budget", None, t.elapsed(), c12);

    println!("{} of 12 criteria failed", failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
