//! On-disk artifact formats. Tabular files carry a leading
//! `# config_hash: <hex>` line; JSON artifacts carry a `config_hash` field.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lvcprobe_core::calibrate::ThresholdPoint;
use lvcprobe_core::eval::{validate_items, DiagnosticItem, SplitReport};
use lvcprobe_core::featurize::FeatureSpace;
use lvcprobe_core::logreg::LogisticModel;
use lvcprobe_core::supervision::{CandidateKey, LabeledSentence, LvcCandidate, ReviewDecision, Verdict};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const REVIEW_SHEET: &str = "review_sheet.tsv";
pub const EXTRACT_STATS: &str = "extract_stats.json";
pub const DATASET: &str = "dataset.jsonl";
pub const DATASET_STATS: &str = "dataset_stats.json";
pub const FEATURE_SPACE: &str = "feature_space.json";
pub const MODEL: &str = "model.json";
pub const HELDOUT_METRICS: &str = "heldout_metrics.json";
pub const HELDOUT_SCORES: &str = "heldout_scores.tsv";
pub const SWEEP: &str = "sweep.csv";
pub const CALIBRATED_MODEL: &str = "model_calibrated.json";
pub const PREDICTIONS: &str = "predictions.tsv";
pub const REPORT_TEXT: &str = "report.txt";
pub const REPORT_JSON: &str = "report.json";

const HASH_PREFIX: &str = "# config_hash: ";

pub const REVIEW_COLUMNS: [&str; 8] =
    ["treebank", "sent_id", "dep_id", "head_id", "dep_lemma", "head_lemma", "snippet", "verdict"];

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

fn hash_line(hash: &str) -> String {
    format!("{HASH_PREFIX}{hash}\n")
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.starts_with('#') && !l.trim().is_empty())
}

/// The embedded config hash of a tabular artifact, if present.
pub fn embedded_hash(text: &str) -> Option<&str> {
    text.lines().find_map(|l| l.strip_prefix(HASH_PREFIX)).map(str::trim)
}

fn cell(s: &str) -> String {
    s.replace(['\t', '\n', '\r'], " ")
}

// Review sheet

pub fn render_review_sheet(candidates: &[LvcCandidate], hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str(&REVIEW_COLUMNS.join("\t"));
    out.push('\n');
    for c in candidates {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t",
            cell(&c.treebank),
            cell(&c.sent_id),
            c.dep_id,
            c.head_id,
            cell(&c.dep_lemma),
            cell(&c.head_lemma),
            cell(&c.snippet)
        );
    }
    out
}

/// Reviewer decisions from a filled-in sheet. An empty verdict means keep;
/// an optional ninth `annotator` column is honoured.
pub fn parse_review_sheet(text: &str) -> std::result::Result<Vec<ReviewDecision>, String> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or("review sheet has no header")?;
    let cols: Vec<&str> = header.split('\t').collect();
    let with_annotator = cols.len() == 9 && cols[8] == "annotator";
    if cols[..cols.len().min(8)] != REVIEW_COLUMNS[..] || !(cols.len() == 8 || with_annotator) {
        return Err(format!("unexpected review sheet header {header:?}"));
    }
    let mut decisions = Vec::new();
    for (n, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != cols.len() && !(f.len() == cols.len() - 1 && !with_annotator) {
            return Err(format!("line {n}: expected {} columns, found {}", cols.len(), f.len()));
        }
        let id = |s: &str| s.parse::<u32>().map_err(|_| format!("line {n}: invalid token id {s:?}"));
        let verdict = match f.get(7).map(|v| v.trim().to_ascii_lowercase()).as_deref() {
            None | Some("") | Some("keep") => Verdict::Keep,
            Some("remove") => Verdict::Remove,
            Some(other) => return Err(format!("line {n}: verdict must be keep or remove, got {other:?}")),
        };
        decisions.push(ReviewDecision {
            key: CandidateKey {
                treebank: f[0].to_string(),
                sent_id: f[1].to_string(),
                dep_id: id(f[2])?,
                head_id: id(f[3])?,
            },
            verdict,
            annotator: if with_annotator { f[8].trim().to_string() } else { String::new() },
        });
    }
    Ok(decisions)
}

// Dataset

pub fn render_dataset(rows: &[LabeledSentence]) -> String {
    let mut out = String::new();
    for r in rows {
        out.push_str(&serde_json::to_string(r).expect("row serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_jsonl<T: DeserializeOwned>(text: &str) -> std::result::Result<Vec<T>, String> {
    data_lines(text)
        .map(|(n, l)| serde_json::from_str(l).map_err(|e| format!("line {n}: {e}")))
        .collect()
}

pub fn read_dataset(path: &Path) -> Result<Vec<LabeledSentence>> {
    parse_jsonl(&read_text(path)?).map_err(|e| CliError::data(path, e))
}

pub fn read_diagnostic(path: &Path) -> Result<Vec<DiagnosticItem>> {
    let items: Vec<DiagnosticItem> = parse_jsonl(&read_text(path)?).map_err(|e| CliError::data(path, e))?;
    validate_items(&items).map_err(|e| CliError::data(path, e))?;
    Ok(items)
}

// Predictions

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Predictions {
    pub preds: BTreeMap<String, bool>,
    /// Present when the file had a `score` column.
    pub scores: Option<BTreeMap<String, f64>>,
}

/// Parses a predictions TSV: header `item_id, pred` with an optional
/// `score` column.
pub fn import_predictions(text: &str) -> std::result::Result<Predictions, String> {
    let mut lines = data_lines(text);
    let (_, header) = lines.next().ok_or("predictions file has no header")?;
    let with_score = match header.split('\t').collect::<Vec<_>>()[..] {
        ["item_id", "pred"] => false,
        ["item_id", "pred", "score"] => true,
        _ => return Err(format!("unexpected predictions header {header:?}")),
    };
    let mut out = Predictions {
        preds: BTreeMap::new(),
        scores: with_score.then(BTreeMap::new),
    };
    for (n, line) in lines {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 + usize::from(with_score) || f[0].is_empty() {
            return Err(format!("line {n}: malformed row {line:?}"));
        }
        let pred = match f[1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(format!("line {n}: pred must be 0 or 1, got {other:?}")),
        };
        if out.preds.insert(f[0].to_string(), pred).is_some() {
            return Err(format!("line {n}: duplicate item_id {:?}", f[0]));
        }
        if let Some(scores) = out.scores.as_mut() {
            let s: f64 = f[2]
                .trim()
                .parse()
                .ok()
                .filter(|s: &f64| s.is_finite())
                .ok_or_else(|| format!("line {n}: invalid score {:?}", f[2]))?;
            scores.insert(f[0].to_string(), s);
        }
    }
    Ok(out)
}

pub fn render_predictions(rows: &[(String, bool, f64)], hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str("item_id\tpred\tscore\n");
    for (id, pred, score) in rows {
        let _ = writeln!(out, "{}\t{}\t{}", cell(id), u8::from(*pred), score);
    }
    out
}

// Held-out scores

#[derive(Clone, Debug, PartialEq)]
pub struct HeldoutScore {
    pub treebank: String,
    pub sent_id: String,
    pub gold: bool,
    pub score: f64,
}

pub fn render_heldout_scores(rows: &[HeldoutScore], hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str("treebank\tsent_id\tgold\tscore\n");
    for r in rows {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", cell(&r.treebank), cell(&r.sent_id), u8::from(r.gold), r.score);
    }
    out
}

pub fn parse_heldout_scores(text: &str) -> std::result::Result<Vec<HeldoutScore>, String> {
    let mut lines = data_lines(text);
    match lines.next() {
        Some((_, "treebank\tsent_id\tgold\tscore")) => {}
        _ => return Err("unexpected held-out scores header".into()),
    }
    lines
        .map(|(n, line)| {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || format!("line {n}: malformed row {line:?}");
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(HeldoutScore {
                treebank: f[0].to_string(),
                sent_id: f[1].to_string(),
                gold: match f[2] {
                    "0" => false,
                    "1" => true,
                    _ => return Err(bad()),
                },
                score: f[3].parse().map_err(|_| bad())?,
            })
        })
        .collect()
}

// Sweep

pub fn render_sweep(points: &[ThresholdPoint], hash: &str) -> String {
    let mut out = hash_line(hash);
    out.push_str("tau,tp,fp,fn,tn,precision,recall,f1\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.tau, p.tp, p.fp, p.fn_, p.tn, p.precision, p.recall, p.f1
        );
    }
    out
}

// JSON envelopes

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpaceArtifact {
    pub config_hash: String,
    pub feature_space_id: String,
    pub feature_space: FeatureSpace,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRecord {
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_met: Option<bool>,
    pub tau: f64,
    /// Which scores the sweep ran on.
    pub source: String,
    pub candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub config_hash: String,
    pub representation: String,
    pub model: LogisticModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration: Option<CalibrationRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibration_source: Option<String>,
    pub reports: Vec<SplitReport>,
}
