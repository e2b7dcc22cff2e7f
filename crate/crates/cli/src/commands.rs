use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use log::{info, warn};
use lvcprobe_core::calibrate::{pr_sweep, select_tau_max_f1, select_tau_precision_floor};
use lvcprobe_core::conllu::{parse_conllu, ParseReport, Sentence, Treebank};
use lvcprobe_core::eval::{evaluate_split, render_text, DiagnosticItem, SplitReport};
use lvcprobe_core::featurize::{
    fit_grammar_inventory, fit_tfidf, grammar_vector_with_coverage, lemma_text, lowercase, tfidf_transform,
    Coverage, FeatureSpace,
};
use lvcprobe_core::logreg::{class_weights, stratified_split, train, StopReason};
use lvcprobe_core::sparse::SparseVector;
use lvcprobe_core::supervision::{
    apply_review, assemble_dataset, extract_treebank, review_order, DatasetStats, LabeledSentence, LvcCandidate,
    Relation, SentenceKey,
};
use serde::{Deserialize, Serialize};

use crate::config::{CalibrationMode, ExperimentConfig, Representation};
use crate::error::{CliError, Result};
use crate::formats::{self, *};

/// Reads one treebank. A directory contributes all its `*.conllu` files in
/// name order under the directory's name; a file is named by its stem.
pub fn load_treebank(path: &Path, config: &ExperimentConfig) -> Result<(Treebank, ParseReport)> {
    let meta = std::fs::metadata(path).map_err(|e| CliError::io(path, e))?;
    let (name, text) = if meta.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)
            .map_err(|e| CliError::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(CliError::data(path, "directory contains no .conllu files"));
        }
        let mut text = String::new();
        for f in &files {
            text.push_str(&read_text(f)?);
            text.push_str("\n\n");
        }
        (file_name(path), text)
    } else {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        (stem, read_text(path)?)
    };
    let out = parse_conllu(&name, &text, config.parse_mode).map_err(|e| CliError::data(path, e))?;
    Ok((out.treebank, out.report))
}

fn file_name(path: &Path) -> String {
    path.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| path.display().to_string())
}

pub fn load_treebanks(config: &ExperimentConfig) -> Result<Vec<(Treebank, ParseReport)>> {
    if config.treebanks.is_empty() {
        return Err(CliError::Config("no treebanks configured (data.treebanks or --treebank)".into()));
    }
    let mut out: Vec<(Treebank, ParseReport)> = Vec::new();
    for p in &config.treebanks {
        let (tb, report) = load_treebank(p, config)?;
        if out.iter().any(|(t, _)| t.name == tb.name) {
            return Err(CliError::Config(format!("two treebanks are named {:?}", tb.name)));
        }
        info!("{}: {} sentences", tb.name, tb.sentences.len());
        out.push((tb, report));
    }
    if out.iter().all(|(t, _)| t.sentences.is_empty()) {
        return Err(CliError::Data("treebanks contain zero sentences".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreebankSummary {
    pub treebank: String,
    pub rule: Relation,
    pub sentences: usize,
    pub candidate_sentences: usize,
    pub candidates: usize,
    pub parse: ParseReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractStats {
    pub config_hash: String,
    pub treebanks: Vec<TreebankSummary>,
    pub total_candidates: usize,
    pub duplicates_removed: usize,
}

fn extract_all(treebanks: &[(Treebank, ParseReport)], hash: &str) -> (Vec<LvcCandidate>, ExtractStats) {
    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for (tb, report) in treebanks {
        let ex = extract_treebank(tb);
        info!("{}: rule {}, {} candidates", tb.name, ex.rule.as_str(), ex.candidates.len());
        summaries.push(TreebankSummary {
            treebank: ex.treebank,
            rule: ex.rule,
            sentences: ex.sentences,
            candidate_sentences: ex.candidate_sentences,
            candidates: ex.candidates.len(),
            parse: report.clone(),
        });
        all.extend(ex.candidates);
    }
    let (ordered, dups) = review_order(&all);
    let stats = ExtractStats {
        config_hash: hash.to_string(),
        treebanks: summaries,
        total_candidates: ordered.len(),
        duplicates_removed: dups,
    };
    (ordered, stats)
}

pub fn cmd_extract(config: &ExperimentConfig) -> Result<ExtractStats> {
    let hash = config.hash();
    let treebanks = load_treebanks(config)?;
    let (candidates, stats) = extract_all(&treebanks, &hash);
    if candidates.is_empty() {
        return Err(CliError::Data("no LVC candidates found in any treebank".into()));
    }
    write_text(&config.out(REVIEW_SHEET), &render_review_sheet(&candidates, &hash))?;
    write_json(&config.out(EXTRACT_STATS), &stats)?;
    println!("extract: {} candidates -> {}", candidates.len(), config.out(REVIEW_SHEET).display());
    Ok(stats)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildStats {
    pub config_hash: String,
    pub review_sheet: String,
    pub decisions: usize,
    pub removed_candidates: usize,
    pub stats: DatasetStats,
}

pub fn cmd_build(config: &ExperimentConfig) -> Result<BuildStats> {
    let hash = config.hash();
    let treebanks = load_treebanks(config)?;
    let (candidates, _) = extract_all(&treebanks, &hash);
    let sheet_path = config.review_sheet_path();
    let decisions = parse_review_sheet(&read_text(&sheet_path)?).map_err(|e| CliError::data(&sheet_path, e))?;
    let review = apply_review(&candidates, &decisions)?;
    let tbs: Vec<Treebank> = treebanks.into_iter().map(|(t, _)| t).collect();
    let (rows, stats) = assemble_dataset(&tbs, &review.kept, &review.removed_sentence_keys);
    debug_assert!(stats.is_consistent());
    write_text(&config.out(DATASET), &render_dataset(&rows))?;
    let out = BuildStats {
        config_hash: hash,
        review_sheet: sheet_path.display().to_string(),
        decisions: decisions.len(),
        removed_candidates: review.removed.len(),
        stats,
    };
    write_json(&config.out(DATASET_STATS), &out)?;
    println!(
        "build: {} sentences retained, {} positive ({} removed)",
        stats.retained_sentences, stats.positive_sentences, stats.removed_sentences
    );
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeldoutMetrics {
    pub config_hash: String,
    pub train_size: usize,
    pub test_size: usize,
    pub threshold: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub iterations: usize,
    pub final_grad_norm: f64,
    pub stop: StopReason,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn sentence_index(treebanks: &[(Treebank, ParseReport)]) -> BTreeMap<SentenceKey, &Sentence> {
    let mut index = BTreeMap::new();
    for (tb, _) in treebanks {
        for s in &tb.sentences {
            index.insert(
                SentenceKey {
                    treebank: tb.name.clone(),
                    sent_id: s.sent_id.clone(),
                },
                s,
            );
        }
    }
    index
}

/// Fits the configured representation on the training rows and vectorizes
/// every row.
fn featurize_dataset(
    config: &ExperimentConfig,
    rows: &[LabeledSentence],
    train_idx: &[usize],
) -> Result<(FeatureSpace, Vec<SparseVector>)> {
    match config.representation {
        Representation::LemmaTfidf => {
            let docs: Vec<Vec<String>> = rows.iter().map(|r| lemma_text(r, config.casing)).collect();
            let train_docs: Vec<Vec<String>> = train_idx.iter().map(|&i| docs[i].clone()).collect();
            let vocab = fit_tfidf(&train_docs, config.max_features, config.ngram_max)?;
            let x = docs.iter().map(|d| tfidf_transform(d, &vocab)).collect();
            Ok((FeatureSpace::lemma_tfidf(vocab, config.casing), x))
        }
        Representation::Grammar => {
            let treebanks = load_treebanks(config)?;
            let index = sentence_index(&treebanks);
            let sentences: Vec<&Sentence> = rows
                .iter()
                .map(|r| {
                    index.get(&r.key()).copied().ok_or_else(|| {
                        CliError::Data(format!("dataset sentence {}/{} not found in treebanks", r.treebank, r.sent_id))
                    })
                })
                .collect::<Result<_>>()?;
            let inventory = fit_grammar_inventory(train_idx.iter().map(|&i| sentences[i]))?;
            let mut coverage = Coverage::default();
            let x = sentences
                .iter()
                .map(|s| grammar_vector_with_coverage(s, &inventory, &mut coverage))
                .collect();
            Ok((FeatureSpace::Grammar { inventory }, x))
        }
    }
}

pub fn cmd_train(config: &ExperimentConfig) -> Result<HeldoutMetrics> {
    let hash = config.hash();
    let rows = read_dataset(&config.out(DATASET))?;
    if rows.is_empty() {
        return Err(CliError::Data("dataset is empty".into()));
    }
    let labels: Vec<bool> = rows.iter().map(|r| r.label).collect();
    let split = stratified_split(&labels, &config.split_spec())?;
    let (space, x) = featurize_dataset(config, &rows, &split.train)?;
    let space_id = space.id();

    let x_train: Vec<SparseVector> = split.train.iter().map(|&i| x[i].clone()).collect();
    let y_train: Vec<bool> = split.train.iter().map(|&i| labels[i]).collect();
    let cw = class_weights(&y_train)?;
    let fit = train(space.dimension(), &space_id, &x_train, &y_train, &cw, &config.train_config())?;
    let model = fit.model;
    let summary = model.training.clone().expect("fresh fit has a summary");
    if summary.stop != StopReason::Converged {
        warn!(
            "training stopped ({:?}) after {} iterations with gradient norm {:.3e}",
            summary.stop, summary.iterations, summary.final_grad_norm
        );
    }

    let mut scores = Vec::with_capacity(split.test.len());
    let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
    for &i in &split.test {
        let p = model.predict_proba(&space_id, &x[i])?;
        match (p >= model.threshold, labels[i]) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => tn += 1,
        }
        scores.push(HeldoutScore {
            treebank: rows[i].treebank.clone(),
            sent_id: rows[i].sent_id.clone(),
            gold: labels[i],
            score: p,
        });
    }
    let metrics = HeldoutMetrics {
        config_hash: hash.clone(),
        train_size: split.train.len(),
        test_size: split.test.len(),
        threshold: model.threshold,
        tp,
        fp,
        fn_,
        tn,
        accuracy: ratio(tp + tn, split.test.len()),
        precision: ratio(tp, tp + fp),
        recall: ratio(tp, tp + fn_),
        f1: ratio(2 * tp, 2 * tp + fp + fn_),
        iterations: summary.iterations,
        final_grad_norm: summary.final_grad_norm,
        stop: summary.stop,
    };

    write_json(
        &config.out(FEATURE_SPACE),
        &FeatureSpaceArtifact {
            config_hash: hash.clone(),
            feature_space_id: space_id,
            feature_space: space,
        },
    )?;
    write_json(
        &config.out(MODEL),
        &ModelArtifact {
            config_hash: hash.clone(),
            representation: config.representation.as_str().to_string(),
            model,
            calibration: None,
        },
    )?;
    write_json(&config.out(HELDOUT_METRICS), &metrics)?;
    write_text(&config.out(HELDOUT_SCORES), &render_heldout_scores(&scores, &hash))?;
    println!(
        "train: {} iterations ({:?}); held-out accuracy {:.4}, F1 {:.4}",
        metrics.iterations, metrics.stop, metrics.accuracy, metrics.f1
    );
    Ok(metrics)
}

/// Source of the scores a threshold is tuned on.
pub const CALIBRATION_SOURCE: &str = "heldout_test_split";

pub fn cmd_calibrate(config: &ExperimentConfig) -> Result<Option<CalibrationRecord>> {
    if config.calibration == CalibrationMode::None {
        println!("calibrate: mode is none; model left unchanged");
        return Ok(None);
    }
    let hash = config.hash();
    let mut artifact: ModelArtifact = read_json(&config.out(MODEL))?;
    let scores_path = config.out(HELDOUT_SCORES);
    let text = read_text(&scores_path)?;
    if embedded_hash(&text) != Some(artifact.config_hash.as_str()) {
        warn!("{} was not produced alongside {}", scores_path.display(), MODEL);
    }
    let rows = parse_heldout_scores(&text).map_err(|e| CliError::data(&scores_path, e))?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let gold: Vec<bool> = rows.iter().map(|r| r.gold).collect();
    let points = pr_sweep(&scores, &gold)?;
    let (tau, floor, floor_met) = match config.calibration {
        CalibrationMode::MaxF1 => (select_tau_max_f1(&points)?, None, None),
        CalibrationMode::PrecisionFloor => {
            let sel = select_tau_precision_floor(&points, config.floor)?;
            (sel.tau, Some(config.floor), Some(sel.floor_met))
        }
        CalibrationMode::None => unreachable!(),
    };
    let record = CalibrationRecord {
        mode: config.calibration.as_str().to_string(),
        floor,
        floor_met,
        tau,
        source: CALIBRATION_SOURCE.to_string(),
        candidates: points.len(),
    };
    artifact.model.threshold = tau;
    artifact.config_hash = hash.clone();
    artifact.calibration = Some(record.clone());
    write_text(&config.out(SWEEP), &render_sweep(&points, &hash))?;
    write_json(&config.out(CALIBRATED_MODEL), &artifact)?;
    println!("calibrate: {} tau = {tau} over {} thresholds", record.mode, points.len());
    Ok(Some(record))
}

pub struct EvaluateArgs {
    pub predictions: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub label: Option<String>,
}

fn item_vectors(
    config: &ExperimentConfig,
    space: &FeatureSpace,
    items: &[DiagnosticItem],
) -> Result<Vec<SparseVector>> {
    let companion: Option<Treebank> = match &config.diagnostic_conllu {
        Some(p) => Some(load_treebank(p, config)?.0),
        None => None,
    };
    let lookup = |item: &DiagnosticItem| -> Result<Option<&Sentence>> {
        match (&item.conllu_ref, &companion) {
            (Some(r), Some(tb)) => tb
                .sentence(r)
                .map(Some)
                .ok_or_else(|| CliError::Data(format!("item {}: sent_id {r:?} not in companion CoNLL-U", item.item_id))),
            _ => Ok(None),
        }
    };
    match space {
        FeatureSpace::LemmaTfidf { casing, vocabulary, .. } => items
            .iter()
            .map(|item| {
                let tokens = match (&item.lemma_text, lookup(item)?) {
                    (Some(lemmas), _) => lemmas.iter().map(|l| lowercase(l, *casing)).collect(),
                    (None, Some(s)) => lemma_text(s, *casing),
                    (None, None) => {
                        return Err(CliError::Data(format!(
                            "item {} has no lemma_text and no companion CoNLL-U analysis",
                            item.item_id
                        )))
                    }
                };
                Ok(tfidf_transform(&tokens, vocabulary))
            })
            .collect(),
        FeatureSpace::Grammar { inventory } => {
            if companion.is_none() {
                return Err(CliError::Config(
                    "grammar representation needs a companion CoNLL-U file (diagnostic.conllu)".into(),
                ));
            }
            let mut coverage = Coverage::default();
            let vectors = items
                .iter()
                .map(|item| match lookup(item)? {
                    Some(s) => Ok(grammar_vector_with_coverage(s, inventory, &mut coverage)),
                    None => Err(CliError::Data(format!("item {} has no conllu_ref", item.item_id))),
                })
                .collect::<Result<Vec<_>>>()?;
            if coverage.unseen_total() > 0 {
                warn!(
                    "{} of {} grammar feature occurrences are outside the training inventory",
                    coverage.unseen_total(),
                    coverage.unseen_total() + coverage.seen
                );
            }
            Ok(vectors)
        }
    }
}

fn default_label(representation: &str, tau: f64) -> String {
    let model = match representation {
        "grammar" => "LR (grammar)",
        _ => "LR (lemma)",
    };
    format!("{model} / tau={tau:.3}")
}

pub fn cmd_evaluate(config: &ExperimentConfig, args: &EvaluateArgs) -> Result<ReportArtifact> {
    let hash = config.hash();
    let items_path = config
        .diagnostic_items
        .as_ref()
        .ok_or_else(|| CliError::Config("no diagnostic set configured (diagnostic.items or --diagnostic)".into()))?;
    let items = read_diagnostic(items_path)?;

    let (preds, scores, label, threshold, source) = match &args.predictions {
        Some(path) => {
            let p = import_predictions(&read_text(path)?).map_err(|e| CliError::data(path, e))?;
            let label = args.label.clone().unwrap_or_else(|| "external".to_string());
            (p.preds, p.scores, label, None, None)
        }
        None => {
            let model_path = match &args.model {
                Some(p) => p.clone(),
                None if config.out(CALIBRATED_MODEL).exists() => config.out(CALIBRATED_MODEL),
                None => config.out(MODEL),
            };
            let artifact: ModelArtifact = read_json(&model_path)?;
            let space: FeatureSpaceArtifact = read_json(&config.out(FEATURE_SPACE))?;
            let space_id = space.feature_space.id();
            if space_id != space.feature_space_id {
                return Err(CliError::data(&config.out(FEATURE_SPACE), "feature space id does not match its contents"));
            }
            let vectors = item_vectors(config, &space.feature_space, &items)?;
            let model = &artifact.model;
            let mut preds = BTreeMap::new();
            let mut scores = BTreeMap::new();
            let mut rows = Vec::new();
            for (item, x) in items.iter().zip(&vectors) {
                let p = model.predict_proba(&space_id, x)?;
                preds.insert(item.item_id.clone(), p >= model.threshold);
                scores.insert(item.item_id.clone(), p);
                rows.push((item.item_id.clone(), p >= model.threshold, p));
            }
            write_text(&config.out(PREDICTIONS), &render_predictions(&rows, &hash))?;
            let label = args
                .label
                .clone()
                .unwrap_or_else(|| default_label(&artifact.representation, model.threshold));
            let source = artifact.calibration.as_ref().map(|c| c.source.clone());
            (preds, Some(scores), label, Some(model.threshold), source)
        }
    };

    let report = evaluate_split(&preds, &items, &label)?;
    if let Some(scores) = scores {
        // items are validated and fully covered, so every id has a score
        let s: Vec<f64> = items.iter().map(|i| scores[&i.item_id]).collect();
        let g: Vec<bool> = items.iter().map(DiagnosticItem::gold).collect();
        let points = pr_sweep(&s, &g)?;
        write_text(&config.out("diagnostic_sweep.csv"), &render_sweep(&points, &hash))?;
    }
    let artifact = ReportArtifact {
        config_hash: hash.clone(),
        threshold,
        calibration_source: source,
        reports: vec![report],
    };
    let text = render_report_text(std::slice::from_ref(&artifact));
    write_text(&config.out(REPORT_TEXT), &text)?;
    write_json(&config.out(REPORT_JSON), &artifact)?;
    print!("{}", render_text(&artifact.reports));
    Ok(artifact)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

pub fn render_report_text(artifacts: &[ReportArtifact]) -> String {
    let mut out = String::new();
    let mut hashes: Vec<&str> = artifacts.iter().map(|a| a.config_hash.as_str()).collect();
    hashes.dedup();
    for h in hashes {
        out.push_str(&format!("# config_hash: {h}\n"));
    }
    let reports: Vec<SplitReport> = artifacts.iter().flat_map(|a| a.reports.iter().cloned()).collect();
    out.push_str(&render_text(&reports));
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CombinedReport {
    pub config_hashes: Vec<String>,
    pub reports: Vec<SplitReport>,
}

/// Concatenates report artifacts in input order.
pub fn cmd_report(inputs: &[PathBuf], format: ReportFormat) -> Result<String> {
    let artifacts: Vec<ReportArtifact> = inputs.iter().map(|p| formats::read_json(p)).collect::<Result<_>>()?;
    if artifacts.iter().all(|a| a.reports.is_empty()) {
        return Err(CliError::Data("no reports to render".into()));
    }
    Ok(match format {
        ReportFormat::Text => render_report_text(&artifacts),
        ReportFormat::Json => to_json(&CombinedReport {
            config_hashes: artifacts.iter().map(|a| a.config_hash.clone()).collect(),
            reports: artifacts.into_iter().flat_map(|a| a.reports).collect(),
        }),
    })
}
