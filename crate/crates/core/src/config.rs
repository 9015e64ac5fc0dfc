//! Scenario files for studies, in TOML or JSON.
//!
//! ```toml
//! title = "normal target, n = 50"
//! tables = ["estimates", "fan-plain"]
//! row_label = "label"
//!
//! [defaults]
//! kernel = "fan"
//! noise = { type = "gaussian", sd = 0.4 }
//! n = 50
//! replications = 500
//! seed = 7
//! eval_points = [0.0, 0.92]
//! bandwidth = "mise-optimal"
//!
//! [[scenario]]
//! label = "#1"
//! target = "normal"
//! ```
//!
//! Every scenario key may also appear under `[defaults]`; scenario values win.

use std::path::Path;

use serde::Deserialize;

use crate::asymptotics::StatisticVariant;
use crate::simulation::{BandwidthChoice, RowLabel, StudyConfig, TableKind};
use crate::{Error, ErrorModel, Kernel, Result, TargetDensity};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    /// JSON for a `.json` extension, TOML otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RawBandwidth {
    Fixed(f64),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawNoise {
    Gaussian { sd: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    label: Option<String>,
    target: Option<String>,
    kernel: Option<String>,
    noise: Option<RawNoise>,
    n: Option<usize>,
    replications: Option<usize>,
    seed: Option<u64>,
    eval_points: Option<Vec<f64>>,
    bandwidth: Option<RawBandwidth>,
    fft: Option<bool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    title: Option<String>,
    #[serde(default)]
    tables: Vec<String>,
    #[serde(default)]
    row_label: RowLabel,
    histogram_bins: Option<usize>,
    #[serde(default)]
    defaults: RawScenario,
    #[serde(default, rename = "scenario")]
    scenarios: Vec<RawScenario>,
}

/// A validated scenario file.
#[derive(Debug, Clone)]
pub struct StudyFile {
    pub title: Option<String>,
    pub tables: Vec<TableKind>,
    pub row_label: RowLabel,
    pub histogram_bins: usize,
    pub scenarios: Vec<StudyConfig>,
}

impl StudyFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))?;
        Self::parse(&text, Format::from_path(path))
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        let raw: RawFile = match format {
            Format::Toml => {
                let de = toml::Deserializer::parse(text)
                    .map_err(|e| Error::Config(vec![e.to_string()]))?;
                serde_path_to_error::deserialize(de).map_err(path_error)?
            }
            Format::Json => {
                let mut de = serde_json::Deserializer::from_str(text);
                serde_path_to_error::deserialize(&mut de).map_err(path_error)?
            }
        };
        resolve(raw)
    }

    /// Replace every scenario's seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        for s in &mut self.scenarios {
            s.master_seed = seed;
        }
        self
    }
}

fn path_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> Error {
    let path = e.path().to_string();
    Error::Config(vec![format!("{path}: {}", e.into_inner())])
}

fn table_kind(name: &str) -> Option<TableKind> {
    match name {
        "estimates" => Some(TableKind::Estimates),
        "fan-plain" => Some(TableKind::Fan(StatisticVariant::Plain)),
        "fan-sample-variance" => Some(TableKind::Fan(StatisticVariant::SampleVariance)),
        _ => None,
    }
}

fn resolve(raw: RawFile) -> Result<StudyFile> {
    let mut errors = Vec::new();

    let mut tables = Vec::new();
    for (i, name) in raw.tables.iter().enumerate() {
        match table_kind(name) {
            Some(t) => tables.push(t),
            None => errors.push(format!(
                "tables[{i}]: unknown table `{name}` (expected estimates, fan-plain or fan-sample-variance)"
            )),
        }
    }
    if tables.is_empty() && raw.tables.is_empty() {
        tables.push(TableKind::Estimates);
    }
    let histogram_bins = raw.histogram_bins.unwrap_or(20);
    if histogram_bins < 2 {
        errors.push(format!(
            "histogram_bins: need at least 2, got {histogram_bins}"
        ));
    }
    if raw.scenarios.is_empty() {
        errors.push("scenario: at least one [[scenario]] is required".into());
    }

    let mut scenarios = Vec::new();
    for (i, s) in raw.scenarios.iter().enumerate() {
        if let Some(c) = resolve_scenario(&format!("scenario[{i}]"), s, &raw.defaults, &mut errors)
        {
            scenarios.push(c);
        }
    }

    if errors.is_empty() {
        Ok(StudyFile {
            title: raw.title,
            tables,
            row_label: raw.row_label,
            histogram_bins,
            scenarios,
        })
    } else {
        Err(Error::Config(errors))
    }
}

fn resolve_scenario(
    at: &str,
    s: &RawScenario,
    d: &RawScenario,
    errors: &mut Vec<String>,
) -> Option<StudyConfig> {
    let before = errors.len();
    macro_rules! field {
        ($name:ident) => {
            s.$name.clone().or_else(|| d.$name.clone())
        };
    }
    let mut require = |name: &str, present: bool| {
        if !present {
            errors.push(format!(
                "{at}.{name}: missing (set it here or under [defaults])"
            ));
        }
    };
    let target_name = field!(target);
    let noise = field!(noise);
    let n = field!(n);
    let bandwidth = field!(bandwidth);
    require("target", target_name.is_some());
    require("noise", noise.is_some());
    require("n", n.is_some());
    require("bandwidth", bandwidth.is_some());

    let target = target_name.and_then(|t| {
        TargetDensity::by_name(&t)
            .map_err(|e| errors.push(format!("{at}.target: {e}")))
            .ok()
    });
    let kernel = Kernel::by_name(&field!(kernel).unwrap_or_else(|| "fan".into()))
        .map_err(|e| errors.push(format!("{at}.kernel: {e}")))
        .ok();
    let noise = noise.and_then(|RawNoise::Gaussian { sd }| {
        ErrorModel::gaussian(sd)
            .map_err(|e| errors.push(format!("{at}.noise.sd: {e}")))
            .ok()
    });
    let bandwidth = match bandwidth {
        Some(RawBandwidth::Fixed(h)) if h > 0.0 && h.is_finite() => Some(BandwidthChoice::Fixed(h)),
        Some(RawBandwidth::Fixed(h)) => {
            errors.push(format!("{at}.bandwidth: must be positive, got {h}"));
            None
        }
        Some(RawBandwidth::Named(name)) if name == "mise-optimal" => {
            Some(BandwidthChoice::MiseOptimal)
        }
        Some(RawBandwidth::Named(name)) => {
            errors.push(format!(
                "{at}.bandwidth: expected a number or \"mise-optimal\", got `{name}`"
            ));
            None
        }
        None => None,
    };
    if let Some(n) = n.filter(|&n| n < 2) {
        errors.push(format!("{at}.n: must be at least 2, got {n}"));
    }
    let replications = field!(replications).unwrap_or(500);
    if replications == 0 {
        errors.push(format!("{at}.replications: must be at least 1"));
    }
    let eval_points = field!(eval_points).unwrap_or_else(|| vec![0.0, 0.92]);
    if eval_points.is_empty() {
        errors.push(format!("{at}.eval_points: must not be empty"));
    }
    if errors.len() > before {
        return None;
    }

    let target = target?;
    Some(StudyConfig {
        label: field!(label).unwrap_or_else(|| target.name().to_string()),
        target,
        noise: noise?,
        kernel: kernel?,
        n: n?,
        replications,
        bandwidth: bandwidth?,
        eval_points,
        master_seed: field!(seed).unwrap_or(0),
        use_fft: field!(fft).unwrap_or(false),
        grid: None,
    })
}
