//! Acceptance suite: one PASS/FAIL line per criterion on stdout.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use lvcprobe::commands::{cmd_evaluate, EvaluateArgs};
use lvcprobe::config::{ExperimentConfig, Overrides};
use lvcprobe::formats::{read_json, ReportArtifact, REPORT_JSON, REPORT_TEXT};
use lvcprobe_core::calibrate::{pr_sweep, select_tau_max_f1};
use lvcprobe_core::conllu::{parse_conllu, serialize_conllu, ParseMode, Sentence, Token, Treebank};
use lvcprobe_core::eval::{evaluate_split, table_row, Condition, DiagnosticItem};
use lvcprobe_core::featurize::{fit_tfidf, tfidf_transform};
use lvcprobe_core::logreg::{class_weights, loss_and_grad, train, LogisticModel, SplitMix64, TrainConfig};
use lvcprobe_core::sparse::SparseVector;
use lvcprobe_core::supervision::{
    apply_review, assemble_dataset, extract_explicit_lvc, extract_nv_compound, extract_treebank, DatasetStats,
    LvcCandidate, ReviewDecision, Verdict,
};

const MINI: &str = include_str!("../../core/tests/fixtures/mini.conllu");

type Check = Result<(), String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !($cond) {
            return Err(format!($($msg)+));
        }
    };
}

fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn within(limit: Duration, start: Instant) -> Check {
    let took = start.elapsed();
    ensure!(took < limit, "took {took:?}, limit {limit:?}");
    Ok(())
}

fn table1_row(correct: [usize; 3], label: &str) -> Result<[String; 10], String> {
    let ws = Workspace::new("");
    let items = write(ws.dir.path(), "items.jsonl", &table1_items());
    let preds = write(ws.dir.path(), "preds.tsv", &table1_predictions(correct));
    let c = ExperimentConfig::load(Some(&ws.config), &Overrides { diagnostic_items: Some(items), ..Overrides::default() })
        .map_err(|e| e.to_string())?;
    let args = EvaluateArgs { predictions: Some(preds), model: None, label: Some(label.into()) };
    let report = cmd_evaluate(&c, &args).map_err(|e| e.to_string())?;
    Ok(table_row(&report.reports[0]))
}

fn table1_run1() -> Check {
    let start = Instant::now();
    let row = table1_row([48, 37, 24], "LR (lemma) / Run 1")?;
    let want = ["LR (lemma)", "Run 1", "98.0", "75.5", "49.0", "74.1", "13", "25", "64.9", "49.0"];
    ensure!(row == want, "got {row:?}");
    within(Duration::from_secs(1), start)
}

fn table1_grammar() -> Check {
    let start = Instant::now();
    let row = table1_row([49, 45, 5], "Grammar-only LR")?;
    let want = ["Grammar-only LR", "--", "100.0", "91.8", "10.2", "67.3", "4", "44", "55.6", "10.2"];
    ensure!(row == want, "got {row:?}");
    within(Duration::from_secs(1), start)
}

fn recall_lvc_identity() -> Check {
    let mut rng = SplitMix64::new(11);
    for set in 0..200 {
        let mut items = Vec::new();
        for cond in Condition::ALL {
            for i in 0..1 + rng.below(20) {
                items.push(DiagnosticItem::new(&format!("{}-{i}", cond.as_str()), cond));
            }
        }
        let preds: BTreeMap<String, bool> = items.iter().map(|i| (i.item_id.clone(), rng.below(2) == 1)).collect();
        let r = evaluate_split(&preds, &items, "mock").map_err(|e| e.to_string())?;
        ensure!(r.recall_pct == r.lvc_pct, "set {set}: recall {} vs LVC {}", r.recall_pct, r.lvc_pct);
        ensure!(r.fp_pooled + r.fn_pooled + r.correct() == r.total(), "set {set}: counts do not add up");
    }
    for set in 0..200 {
        let n = 1 + rng.below(40);
        let scores: Vec<f64> = (0..n).map(|_| uniform(&mut rng)).collect();
        let gold: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
        let pts = pr_sweep(&scores, &gold).map_err(|e| e.to_string())?;
        for w in pts.windows(2) {
            ensure!(w[1].fp <= w[0].fp && w[1].fn_ >= w[0].fn_, "set {set}: not monotone at tau {}", w[1].tau);
        }
    }
    Ok(())
}

fn mock_treebank(name: &str, n: usize, positive: impl Fn(usize) -> bool) -> Treebank {
    let sentences = (0..n)
        .map(|i| {
            let rel = if positive(i) { "compound:lvc" } else { "obj" };
            Sentence::new(
                &format!("{i}"),
                vec![Token::new(1, "karar", "karar", "NOUN", 2, rel), Token::new(2, "verdi", "ver", "VERB", 0, "root")],
            )
        })
        .collect();
    Treebank { name: name.into(), sentences }
}

fn dataset_accounting() -> Check {
    let mut rng = SplitMix64::new(5);
    for case in 0..200 {
        let tbs: Vec<Treebank> = (0..1 + rng.below(3))
            .map(|t| {
                let n = rng.below(40);
                let mask: Vec<bool> = (0..n).map(|_| rng.below(3) == 0).collect();
                mock_treebank(&format!("t{t}"), n, |i| mask[i])
            })
            .collect();
        let cands: Vec<LvcCandidate> = tbs.iter().flat_map(|t| extract_treebank(t).candidates).collect();
        let decisions: Vec<ReviewDecision> = cands
            .iter()
            .filter(|_| rng.below(4) == 0)
            .map(|c| ReviewDecision { key: c.key(), verdict: Verdict::Remove, annotator: "a".into() })
            .collect();
        let review = apply_review(&cands, &decisions).map_err(|e| e.to_string())?;
        let (rows, s) = assemble_dataset(&tbs, &review.kept, &review.removed_sentence_keys);
        ensure!(s.retained_sentences == s.total_sentences - s.removed_sentences, "case {case}: retained");
        ensure!(s.positive_sentences == s.candidate_sentences - s.removed_sentences, "case {case}: positives");
        ensure!(rows.len() == s.retained_sentences, "case {case}: row count");
    }
    let s = DatasetStats::from_counts(82_884, 10_056, 565).map_err(|e| e.to_string())?;
    ensure!(
        (s.retained_sentences, s.positive_sentences) == (82_319, 9_491),
        "full-scale: {} / {}",
        s.retained_sentences,
        s.positive_sentences
    );
    Ok(())
}

fn gradient_finite_differences() -> Check {
    let start = Instant::now();
    let mut rng = SplitMix64::new(99);
    for case in 0..100 {
        let dim = 1 + rng.below(20);
        let n = 2 + rng.below(25);
        let x: Vec<SparseVector> = (0..n)
            .map(|_| {
                let mut pairs = Vec::new();
                for j in 0..dim {
                    if rng.below(2) == 0 {
                        pairs.push((j, 4.0 * uniform(&mut rng) - 2.0));
                    }
                }
                SparseVector::from_pairs(dim, pairs)
            })
            .collect();
        let mut y: Vec<bool> = (0..n).map(|_| rng.below(2) == 0).collect();
        y[0] = !y[1];
        let cw = class_weights(&y).map_err(|e| e.to_string())?;
        let mut m = LogisticModel::zeros(dim, 0.1 + 2.0 * uniform(&mut rng), "fd");
        m.weights.iter_mut().for_each(|w| *w = 2.0 * uniform(&mut rng) - 1.0);
        m.bias = 2.0 * uniform(&mut rng) - 1.0;
        let (_, g) = loss_and_grad(&m, &x, &y, &cw).map_err(|e| e.to_string())?;
        let loss = |m: &LogisticModel| loss_and_grad(m, &x, &y, &cw).unwrap().0;
        let h = 1e-5;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for j in 0..=dim {
            let (mut up, mut down) = (m.clone(), m.clone());
            if j < dim {
                up.weights[j] += h;
                down.weights[j] -= h;
            } else {
                up.bias += h;
                down.bias -= h;
            }
            let fd = (loss(&up) - loss(&down)) / (2.0 * h);
            let an = if j < dim { g.weights[j] } else { g.bias };
            num += (an - fd).powi(2);
            den = den.max(an.abs()).max(fd.abs());
        }
        let rel = num.sqrt() / den.max(1e-12);
        ensure!(rel <= 1e-5, "case {case}: relative error {rel:e}");
    }
    within(Duration::from_secs(5), start)
}

fn optimizer() -> Check {
    let mut rng = SplitMix64::new(21);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..50 {
        let pos = i % 2 == 0;
        let margin = 0.3 + uniform(&mut rng);
        let a = if pos { margin } else { -margin };
        x.push(SparseVector::from_pairs(2, vec![(0, a), (1, 2.0 * uniform(&mut rng) - 1.0)]));
        y.push(pos);
    }
    let cw = class_weights(&y).map_err(|e| e.to_string())?;
    let cfg = TrainConfig { lambda: 0.01, ..TrainConfig::default() };
    let a = train(2, "sep", &x, &y, &cw, &cfg).map_err(|e| e.to_string())?;
    let b = train(2, "sep", &x, &y, &cw, &cfg).map_err(|e| e.to_string())?;
    let correct = x.iter().zip(&y).filter(|(xi, &yi)| a.model.predict("sep", xi) == Ok(yi)).count();
    ensure!(correct == x.len(), "training accuracy {correct}/{}", x.len());
    ensure!(a.loss_trace.windows(2).all(|w| w[1] <= w[0]), "loss increased");
    let bits = |m: &LogisticModel| m.weights.iter().chain([&m.bias]).map(|v| v.to_bits()).collect::<Vec<_>>();
    ensure!(bits(&a.model) == bits(&b.model), "models differ bitwise");
    Ok(())
}

fn tfidf_oracle() -> Check {
    let doc = |w: &[&str]| w.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let corpus = [doc(&["al", "ver"]), doc(&["al", "al", "git"])];
    for ngram_max in [1, 2] {
        let v = fit_tfidf(&corpus, 5000, ngram_max).map_err(|e| e.to_string())?;
        let al = v.idf("al").ok_or("al missing")?;
        let ver = v.idf("ver").ok_or("ver missing")?;
        ensure!((al - 1.0).abs() < 1e-9, "idf(al) = {al}");
        ensure!((ver - (1.5f64.ln() + 1.0)).abs() < 1e-9, "idf(ver) = {ver}");
    }
    let mut rng = SplitMix64::new(8);
    let words = ["al", "ver", "git", "et", "yap", "gel"];
    for _ in 0..300 {
        let corpus: Vec<Vec<String>> = (0..1 + rng.below(6))
            .map(|_| (0..rng.below(7)).map(|_| words[rng.below(words.len())].to_string()).collect())
            .collect();
        if corpus.iter().all(Vec::is_empty) {
            continue;
        }
        let v = fit_tfidf(&corpus, 1 + rng.below(20), 2).map_err(|e| e.to_string())?;
        for d in &corpus {
            let t = tfidf_transform(d, &v);
            ensure!(t.is_zero() || (t.l2_norm() - 1.0).abs() < 1e-9, "norm {}", t.l2_norm());
        }
    }
    Ok(())
}

fn brute_counts(scores: &[f64], gold: &[bool], tau: f64) -> (usize, usize, usize, usize) {
    let mut c = (0, 0, 0, 0);
    for (&s, &g) in scores.iter().zip(gold) {
        match (s >= tau, g) {
            (true, true) => c.0 += 1,
            (true, false) => c.1 += 1,
            (false, true) => c.2 += 1,
            (false, false) => c.3 += 1,
        }
    }
    c
}

fn sweep_oracle() -> Check {
    let mut rng = SplitMix64::new(500);
    for case in 0..500 {
        let n = 1 + rng.below(12);
        let scores: Vec<f64> = (0..n).map(|_| rng.below(21) as f64 / 20.0).collect();
        let gold: Vec<bool> = (0..n).map(|_| rng.below(2) == 1).collect();
        let pts = pr_sweep(&scores, &gold).map_err(|e| e.to_string())?;
        for p in &pts {
            ensure!(
                (p.tp, p.fp, p.fn_, p.tn) == brute_counts(&scores, &gold, p.tau),
                "case {case}: counts differ at tau {}",
                p.tau
            );
        }
        // every distinct-score threshold is visited
        let taus: BTreeSet<u64> = pts.iter().map(|p| p.tau.to_bits()).collect();
        ensure!(scores.iter().all(|s| taus.contains(&s.to_bits())), "case {case}: a score threshold is missing");
    }
    let pts = pr_sweep(&[0.9, 0.7, 0.6, 0.2], &[true, false, true, false]).map_err(|e| e.to_string())?;
    let tau = select_tau_max_f1(&pts).map_err(|e| e.to_string())?;
    ensure!(tau == 0.6, "worked example tau = {tau}");
    Ok(())
}

fn conllu_round_trip() -> Check {
    let out = parse_conllu("mini", MINI, ParseMode::Strict).map_err(|e| e.to_string())?;
    let tb = out.treebank;
    ensure!(out.report.empty_nodes_skipped > 0, "fixture lacks empty nodes");
    ensure!(tb.sentences.iter().any(|s| !s.ranges.is_empty()), "fixture lacks multiword ranges");
    ensure!(tb.sentences.iter().any(|s| s.tokens.iter().all(|t| t.feats.is_empty())), "fixture lacks empty FEATS");
    ensure!(tb.sentences.iter().any(|s| s.comments.len() > 2), "fixture lacks extra comments");
    let doc = serialize_conllu(&tb);
    let again = parse_conllu("mini", &doc, ParseMode::Strict).map_err(|e| e.to_string())?.treebank;
    ensure!(again == tb, "structure changed after round trip");
    ensure!(serialize_conllu(&again) == doc, "serialization is not a fixed point");
    Ok(())
}

fn extraction_rules() -> Check {
    let tb = parse_conllu("mini", MINI, ParseMode::Strict).map_err(|e| e.to_string())?.treebank;
    let arcs = |c: Vec<LvcCandidate>| c.into_iter().map(|c| (c.sent_id, c.dep_id, c.head_id)).collect::<Vec<_>>();
    let explicit: Vec<_> = tb.sentences.iter().flat_map(|s| arcs(extract_explicit_lvc("mini", s))).collect();
    let want = [("s1".to_string(), 2, 3), ("s1".to_string(), 5, 6)];
    ensure!(explicit == want, "explicit: {explicit:?}");
    let nv: Vec<_> = tb.sentences.iter().flat_map(|s| arcs(extract_nv_compound("mini", s))).collect();
    // s5 holds NOUN->NOUN and ADJ->VERB compounds, both excluded
    ensure!(nv == [("s4".to_string(), 2, 3)], "noun-verb: {nv:?}");
    ensure!(extract_treebank(&tb).candidates.len() == 2, "explicit rule must win when compound:lvc exists");
    let mut fallback = tb.clone();
    fallback.sentences.retain(|s| s.sent_id != "s1");
    let ex = extract_treebank(&fallback);
    ensure!(arcs(ex.candidates) == [("s4".to_string(), 2, 3)], "fallback rule");
    Ok(())
}

fn end_to_end_smoke() -> Check {
    let start = Instant::now();
    let ws = Workspace::new("[calibration]\nmode = \"max_f1\"\n");
    for step in ["extract", "build", "train", "calibrate", "evaluate"] {
        let out = Command::new(env!("CARGO_BIN_EXE_lvcprobe"))
            .arg(step)
            .arg("--config")
            .arg(&ws.config)
            .env_remove("LVCPROBE_CONFIG")
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            out.status.code() == Some(0),
            "{step} exited {:?}: {}",
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let report: ReportArtifact = read_json(&ws.out(REPORT_JSON)).map_err(|e| e.to_string())?;
    let r = report.reports.first().ok_or("no report")?;
    ensure!(r.total() == 9, "report covers {} items", r.total());
    ensure!(Condition::ALL.iter().all(|&c| r.counts(c).total == 3), "per-condition totals");
    ensure!(r.recall_pct == r.lvc_pct, "recall identity");
    ensure!(report.calibration_source.as_deref() == Some("heldout_test_split"), "calibration source not recorded");
    let text = std::fs::read_to_string(ws.out(REPORT_TEXT)).map_err(|e| e.to_string())?;
    ensure!(text.lines().filter(|l| !l.starts_with('#')).count() == 3, "text report shape:\n{text}");
    within(Duration::from_secs(10), start)
}

#[test]
fn acceptance() {
    let criteria: [Criterion; 11] = [
        ("table1-run1", table1_run1),
        ("table1-grammar-only", table1_grammar),
        ("recall-lvc-identity", recall_lvc_identity),
        ("dataset-accounting", dataset_accounting),
        ("gradient-finite-differences", gradient_finite_differences),
        ("optimizer", optimizer),
        ("tfidf-oracle", tfidf_oracle),
        ("threshold-sweep-oracle", sweep_oracle),
        ("conllu-round-trip", conllu_round_trip),
        ("extraction-rules", extraction_rules),
        ("end-to-end-smoke", end_to_end_smoke),
    ];
    let mut failed = Vec::new();
    let mut stdout = std::io::stdout().lock();
    for (name, check) in criteria {
        match check() {
            Ok(()) => writeln!(stdout, "PASS {name}").unwrap(),
            Err(why) => {
                writeln!(stdout, "FAIL {name}: {why}").unwrap();
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}

