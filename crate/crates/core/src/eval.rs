//! Split-wise evaluation on the Random / NLVC / LVC diagnostic set.
//!
//! LVC items are the positive class; Random and NLVC are pooled as
//! negatives. Success rates are percentages rounded half-up to one decimal,
//! computed in integer arithmetic from the raw counts that travel with
//! every report.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Condition {
    Random,
    #[serde(rename = "NLVC")]
    Nlvc,
    #[serde(rename = "LVC")]
    Lvc,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Random, Condition::Nlvc, Condition::Lvc];

    pub fn gold(self) -> bool {
        self == Condition::Lvc
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Random => "Random",
            Condition::Nlvc => "NLVC",
            Condition::Lvc => "LVC",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiagnosticItem {
    pub item_id: String,
    pub surface_text: String,
    pub condition: Condition,
    /// Optional explicit gold label; must agree with the condition.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "crate::label::option")]
    pub gold: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma_text: Option<Vec<String>>,
    /// `sent_id` of the item's analysis in a companion CoNLL-U file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conllu_ref: Option<String>,
}

impl DiagnosticItem {
    pub fn new(item_id: &str, condition: Condition) -> DiagnosticItem {
        DiagnosticItem {
            item_id: item_id.to_string(),
            surface_text: String::new(),
            condition,
            gold: None,
            lemma_text: None,
            conllu_ref: None,
        }
    }

    pub fn gold(&self) -> bool {
        self.condition.gold()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no prediction for items: {}", .0.join(", "))]
    MissingPredictions(Vec<String>),
    #[error("predictions for unknown items: {}", .0.join(", "))]
    ExtraPredictions(Vec<String>),
    #[error("duplicate diagnostic item ids: {}", .0.join(", "))]
    DuplicateItems(Vec<String>),
    #[error("item {0} has a gold label that contradicts its condition")]
    GoldMismatch(String),
    #[error("diagnostic set is empty")]
    Empty,
}

/// Checks ids are unique and explicit gold labels agree with conditions.
pub fn validate_items(items: &[DiagnosticItem]) -> Result<(), EvalError> {
    if items.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut seen = BTreeSet::new();
    let dups: BTreeSet<String> = items
        .iter()
        .filter(|i| !seen.insert(i.item_id.as_str()))
        .map(|i| i.item_id.clone())
        .collect();
    if !dups.is_empty() {
        return Err(EvalError::DuplicateItems(dups.into_iter().collect()));
    }
    if let Some(bad) = items.iter().find(|i| i.gold.is_some_and(|g| g != i.gold())) {
        return Err(EvalError::GoldMismatch(bad.item_id.clone()));
    }
    Ok(())
}

/// A percentage held as an integer number of tenths.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(pub u32);

impl Percent {
    /// `100 * num / den` rounded half-up to one decimal; 0 when `den` is 0.
    pub fn of(num: usize, den: usize) -> Percent {
        if den == 0 {
            return Percent(0);
        }
        let (num, den) = (num as u64, den as u64);
        Percent(((2000 * num + den) / (2 * den)) as u32)
    }

    pub fn tenths(self) -> u32 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = format!("{}.{}", self.0 / 10, self.0 % 10);
        f.pad(&s)
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        if !(0.0..=100.0).contains(&v) {
            return Err(serde::de::Error::custom("percentage outside [0, 100]"));
        }
        Ok(Percent(libm::round(v * 10.0) as u32))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionCounts {
    pub correct: usize,
    pub total: usize,
}

impl ConditionCounts {
    pub fn wrong(&self) -> usize {
        self.total - self.correct
    }

    pub fn success(&self) -> Percent {
        Percent::of(self.correct, self.total)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    pub run_label: String,
    pub random: ConditionCounts,
    pub nlvc: ConditionCounts,
    pub lvc: ConditionCounts,
    pub random_pct: Percent,
    pub nlvc_pct: Percent,
    pub lvc_pct: Percent,
    pub overall_pct: Percent,
    /// Mistakes on Random + NLVC.
    pub fp_pooled: usize,
    /// Mistakes on LVC.
    pub fn_pooled: usize,
    /// FP decomposition, reported next to the pooled count.
    pub fp_random: usize,
    pub fp_nlvc: usize,
    pub tp: usize,
    pub precision_pct: Percent,
    pub recall_pct: Percent,
}

impl SplitReport {
    /// Builds a report from per-condition `(correct, total)` counts.
    pub fn from_counts(run_label: &str, random: ConditionCounts, nlvc: ConditionCounts, lvc: ConditionCounts) -> SplitReport {
        let fp = random.wrong() + nlvc.wrong();
        let tp = lvc.correct;
        let n = random.total + nlvc.total + lvc.total;
        SplitReport {
            run_label: run_label.to_string(),
            random,
            nlvc,
            lvc,
            random_pct: random.success(),
            nlvc_pct: nlvc.success(),
            lvc_pct: lvc.success(),
            overall_pct: Percent::of(random.correct + nlvc.correct + lvc.correct, n),
            fp_pooled: fp,
            fn_pooled: lvc.wrong(),
            fp_random: random.wrong(),
            fp_nlvc: nlvc.wrong(),
            tp,
            precision_pct: Percent::of(tp, tp + fp),
            recall_pct: Percent::of(tp, lvc.total),
        }
    }

    pub fn total(&self) -> usize {
        self.random.total + self.nlvc.total + self.lvc.total
    }

    pub fn correct(&self) -> usize {
        self.random.correct + self.nlvc.correct + self.lvc.correct
    }

    pub fn counts(&self, c: Condition) -> ConditionCounts {
        match c {
            Condition::Random => self.random,
            Condition::Nlvc => self.nlvc,
            Condition::Lvc => self.lvc,
        }
    }
}

/// Scores binary predictions against the diagnostic items. Every item
/// needs exactly one prediction and no prediction may name an unknown item.
pub fn evaluate_split(
    predictions: &BTreeMap<String, bool>,
    items: &[DiagnosticItem],
    run_label: &str,
) -> Result<SplitReport, EvalError> {
    validate_items(items)?;
    let ids: BTreeSet<&str> = items.iter().map(|i| i.item_id.as_str()).collect();
    let missing: Vec<String> = items
        .iter()
        .filter(|i| !predictions.contains_key(&i.item_id))
        .map(|i| i.item_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(EvalError::MissingPredictions(missing));
    }
    let extra: Vec<String> = predictions.keys().filter(|k| !ids.contains(k.as_str())).cloned().collect();
    if !extra.is_empty() {
        return Err(EvalError::ExtraPredictions(extra));
    }
    let mut counts: BTreeMap<Condition, ConditionCounts> = BTreeMap::new();
    for item in items {
        let c = counts.entry(item.condition).or_default();
        c.total += 1;
        if predictions[&item.item_id] == item.gold() {
            c.correct += 1;
        }
    }
    let get = |c| counts.get(&c).copied().unwrap_or_default();
    Ok(SplitReport::from_counts(
        run_label,
        get(Condition::Random),
        get(Condition::Nlvc),
        get(Condition::Lvc),
    ))
}

pub const TABLE_HEADER: [&str; 10] = ["Model", "Setting", "Random", "NLVC", "LVC", "Overall", "FP", "FN", "Prec", "Rec"];

fn split_label(label: &str) -> (&str, &str) {
    match label.split_once(" / ") {
        Some((model, setting)) => (model, setting),
        None => (label, "--"),
    }
}

/// Cells of one table row, in header order. A run label of the form
/// `"Model / Setting"` fills the first two columns.
pub fn table_row(r: &SplitReport) -> [String; 10] {
    let (model, setting) = split_label(&r.run_label);
    [
        model.to_string(),
        setting.to_string(),
        r.random_pct.to_string(),
        r.nlvc_pct.to_string(),
        r.lvc_pct.to_string(),
        r.overall_pct.to_string(),
        r.fp_pooled.to_string(),
        r.fn_pooled.to_string(),
        r.precision_pct.to_string(),
        r.recall_pct.to_string(),
    ]
}

/// Aligned plain-text table; text columns left-aligned, numbers right.
pub fn render_text(reports: &[SplitReport]) -> String {
    let rows: Vec<[String; 10]> = reports.iter().map(table_row).collect();
    let mut widths = TABLE_HEADER.map(str::len);
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: [&str; 10]| {
        let parts: Vec<String> = cells
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if i < 2 {
                    format!("{:<w$}", c, w = widths[i])
                } else {
                    format!("{:>w$}", c, w = widths[i])
                }
            })
            .collect();
        let mut l = parts.join("  ");
        l.truncate(l.trim_end().len());
        l.push('\n');
        l
    };
    let mut out = line(TABLE_HEADER);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in &rows {
        let cells: [&str; 10] = core::array::from_fn(|i| row[i].as_str());
        out.push_str(&line(cells));
    }
    out
}
