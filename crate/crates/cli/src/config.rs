//! Experiment configuration: one TOML document, overridable from flags.

use std::path::{Path, PathBuf};

use lvcprobe_core::calibrate::DEFAULT_PRECISION_FLOOR;
use lvcprobe_core::conllu::ParseMode;
use lvcprobe_core::featurize::{Casing, DEFAULT_MAX_FEATURES, DEFAULT_NGRAM_MAX};
use lvcprobe_core::logreg::{SplitSpec, TrainConfig, DEFAULT_LAMBDA, DEFAULT_MAX_ITER, DEFAULT_TOL};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    #[default]
    LemmaTfidf,
    Grammar,
}

impl Representation {
    pub fn parse(s: &str) -> Result<Representation> {
        match s {
            "lemma_tfidf" => Ok(Representation::LemmaTfidf),
            "grammar" => Ok(Representation::Grammar),
            _ => Err(CliError::Config(format!("unknown representation {s:?} (expected lemma_tfidf or grammar)"))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Representation::LemmaTfidf => "lemma_tfidf",
            Representation::Grammar => "grammar",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CalibrationMode {
    None,
    #[default]
    MaxF1,
    PrecisionFloor,
}

impl CalibrationMode {
    pub fn parse(s: &str) -> Result<CalibrationMode> {
        match s {
            "none" => Ok(CalibrationMode::None),
            "max_f1" => Ok(CalibrationMode::MaxF1),
            "precision_floor" => Ok(CalibrationMode::PrecisionFloor),
            _ => Err(CliError::Config(format!(
                "unknown calibration mode {s:?} (expected none, max_f1 or precision_floor)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CalibrationMode::None => "none",
            CalibrationMode::MaxF1 => "max_f1",
            CalibrationMode::PrecisionFloor => "precision_floor",
        }
    }
}

fn parse_casing(s: &str) -> Result<Casing> {
    match s {
        "standard" => Ok(Casing::Standard),
        "turkish" => Ok(Casing::Turkish),
        _ => Err(CliError::Config(format!("unknown casing {s:?} (expected standard or turkish)"))),
    }
}

fn parse_mode(s: &str) -> Result<ParseMode> {
    match s {
        "strict" => Ok(ParseMode::Strict),
        "lenient" => Ok(ParseMode::Lenient),
        _ => Err(CliError::Config(format!("unknown parse mode {s:?} (expected strict or lenient)"))),
    }
}

// On-disk shape. Every field is optional so unset values can be told apart
// from defaults during validation.

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    output_dir: Option<PathBuf>,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    features: FeatureSection,
    #[serde(default)]
    train: TrainSection,
    #[serde(default)]
    split: SplitSection,
    #[serde(default)]
    calibration: CalibrationSection,
    #[serde(default)]
    diagnostic: DiagnosticSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    treebanks: Option<Vec<PathBuf>>,
    review_sheet: Option<PathBuf>,
    parse_mode: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureSection {
    representation: Option<String>,
    casing: Option<String>,
    max_features: Option<usize>,
    ngram_max: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainSection {
    lambda: Option<f64>,
    max_iter: Option<usize>,
    tol: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SplitSection {
    train_fraction: Option<f64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CalibrationSection {
    mode: Option<String>,
    floor: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiagnosticSection {
    items: Option<PathBuf>,
    conllu: Option<PathBuf>,
}

/// Values given on the command line; each replaces its config counterpart.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub treebanks: Vec<PathBuf>,
    pub review_sheet: Option<PathBuf>,
    pub parse_mode: Option<String>,
    pub representation: Option<String>,
    pub casing: Option<String>,
    pub max_features: Option<usize>,
    pub ngram_max: Option<usize>,
    pub lambda: Option<f64>,
    pub max_iter: Option<usize>,
    pub tol: Option<f64>,
    pub train_fraction: Option<f64>,
    pub seed: Option<u64>,
    pub calibration_mode: Option<String>,
    pub floor: Option<f64>,
    pub diagnostic_items: Option<PathBuf>,
    pub diagnostic_conllu: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub output_dir: PathBuf,
    pub treebanks: Vec<PathBuf>,
    pub review_sheet: Option<PathBuf>,
    pub parse_mode: ParseMode,
    pub representation: Representation,
    pub casing: Casing,
    pub max_features: usize,
    pub ngram_max: usize,
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub calibration: CalibrationMode,
    pub floor: f64,
    pub diagnostic_items: Option<PathBuf>,
    pub diagnostic_conllu: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let split = SplitSpec::default();
        ExperimentConfig {
            output_dir: PathBuf::from("lvcprobe-out"),
            treebanks: Vec::new(),
            review_sheet: None,
            parse_mode: ParseMode::Strict,
            representation: Representation::LemmaTfidf,
            casing: Casing::Turkish,
            max_features: DEFAULT_MAX_FEATURES,
            ngram_max: DEFAULT_NGRAM_MAX,
            lambda: DEFAULT_LAMBDA,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
            train_fraction: split.train_fraction,
            seed: split.seed,
            calibration: CalibrationMode::MaxF1,
            floor: DEFAULT_PRECISION_FLOOR,
            diagnostic_items: None,
            diagnostic_conllu: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (if any), applies `overrides`, and validates. Relative
    /// paths inside the file resolve against the file's directory.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<ExperimentConfig> {
        let (file, base) = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                let file: FileConfig =
                    toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                (file, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (FileConfig::default(), PathBuf::new()),
        };
        let rebase = |p: PathBuf| if p.is_absolute() { p } else { base.join(p) };
        Self::merge(file, overrides, rebase)
    }

    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<ExperimentConfig> {
        let file: FileConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        Self::merge(file, overrides, |p| p)
    }

    fn merge(file: FileConfig, o: &Overrides, rebase: impl Fn(PathBuf) -> PathBuf) -> Result<ExperimentConfig> {
        let d = ExperimentConfig::default();
        let representation = match o.representation.as_deref().or(file.features.representation.as_deref()) {
            Some(s) => Representation::parse(s)?,
            None => d.representation,
        };
        let max_features = o.max_features.or(file.features.max_features);
        let ngram_max = o.ngram_max.or(file.features.ngram_max);
        if representation == Representation::Grammar && (max_features.is_some() || ngram_max.is_some()) {
            return Err(CliError::Config(
                "max_features and ngram_max only apply to the lemma_tfidf representation".into(),
            ));
        }
        let treebanks = if o.treebanks.is_empty() {
            file.data.treebanks.unwrap_or_default().into_iter().map(&rebase).collect()
        } else {
            o.treebanks.clone()
        };
        let config = ExperimentConfig {
            output_dir: o
                .output_dir
                .clone()
                .or(file.output_dir.map(&rebase))
                .unwrap_or(d.output_dir),
            treebanks,
            review_sheet: o.review_sheet.clone().or(file.data.review_sheet.map(&rebase)),
            parse_mode: match o.parse_mode.as_deref().or(file.data.parse_mode.as_deref()) {
                Some(s) => parse_mode(s)?,
                None => d.parse_mode,
            },
            representation,
            casing: match o.casing.as_deref().or(file.features.casing.as_deref()) {
                Some(s) => parse_casing(s)?,
                None => d.casing,
            },
            max_features: max_features.unwrap_or(d.max_features),
            ngram_max: ngram_max.unwrap_or(d.ngram_max),
            lambda: o.lambda.or(file.train.lambda).unwrap_or(d.lambda),
            max_iter: o.max_iter.or(file.train.max_iter).unwrap_or(d.max_iter),
            tol: o.tol.or(file.train.tol).unwrap_or(d.tol),
            train_fraction: o.train_fraction.or(file.split.train_fraction).unwrap_or(d.train_fraction),
            seed: o.seed.or(file.split.seed).unwrap_or(d.seed),
            calibration: match o.calibration_mode.as_deref().or(file.calibration.mode.as_deref()) {
                Some(s) => CalibrationMode::parse(s)?,
                None => d.calibration,
            },
            floor: o.floor.or(file.calibration.floor).unwrap_or(d.floor),
            diagnostic_items: o.diagnostic_items.clone().or(file.diagnostic.items.map(&rebase)),
            diagnostic_conllu: o.diagnostic_conllu.clone().or(file.diagnostic.conllu.map(&rebase)),
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.max_features == 0 {
            return bad("max_features must be at least 1".into());
        }
        if !(1..=2).contains(&self.ngram_max) {
            return bad(format!("ngram_max must be 1 or 2, got {}", self.ngram_max));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be positive, got {}", self.lambda));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return bad(format!("tol must be non-negative, got {}", self.tol));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        if !(0.0..=1.0).contains(&self.floor) {
            return bad(format!("precision floor must lie in [0, 1], got {}", self.floor));
        }
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lambda: self.lambda,
            max_iter: self.max_iter,
            tol: self.tol,
        }
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    /// SHA-256 of the effective configuration, output directory excluded so
    /// the same experiment hashes alike wherever it is written.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = PathBuf::new();
        let json = serde_json::to_string(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    pub fn review_sheet_path(&self) -> PathBuf {
        self.review_sheet.clone().unwrap_or_else(|| self.out(crate::formats::REVIEW_SHEET))
    }
}
