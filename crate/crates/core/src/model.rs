//! The versioned JSON model file.
//!
//! Everything is serialized canonically: struct fields in declaration order,
//! map keys sorted, rationals as "num/den" strings, complex numbers as
//! [re, im] pairs, and transition rows as exact integer count arrays so that
//! loading and re-saving a file is byte-identical and training twice on the
//! same corpus produces identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::composer::GeneratorConfig;
use crate::contour::{ClusterDiagnostics, ContourModel, SampledCurve};
use crate::corpus::FileFingerprint;
use crate::error::{Error, Result};
use crate::markov::{Alphabet, Feature, PitchSymbol, SymbolId, TransitionModel, BLANK};
use crate::pipeline::TrainedModels;
use crate::time::RationalTime;

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub config: GeneratorConfig,
    pub corpus: CorpusFingerprint,
    pub pitch_model: TransitionTableData,
    pub duration_model: TransitionTableData,
    pub pitch_contour: ContourData,
    pub rhythm_contour: ContourData,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFingerprint {
    /// Hash of the corpus archive the models were trained from.
    pub corpus_sha256: String,
    /// Per-source-file hashes carried over from ingest.
    pub files: Vec<FileFingerprint>,
}

/// One per-feature transition tensor. Contexts are symbol token arrays with
/// `null` for the blank padding symbol; rows are successor counts aligned
/// with `alphabet`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTableData {
    pub feature: Feature,
    pub order: usize,
    pub alphabet: Vec<String>,
    pub offbeats: BTreeMap<String, Vec<TransitionRow>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionRow {
    pub context: Vec<Option<String>>,
    pub counts: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourData {
    pub feature: Feature,
    pub n_samples: usize,
    pub selected_cluster: usize,
    pub mean_spectrum: Vec<[f64; 2]>,
    pub curve: Vec<f64>,
    pub clusters: Vec<ClusterData>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterData {
    pub id: usize,
    pub size: usize,
    pub width: f64,
    pub quality: f64,
    pub selected: bool,
    pub mean_spectrum: Vec<[f64; 2]>,
}

impl ContourData {
    /// Rebuild a cluster's mean contour on the unmirrored domain from its
    /// stored spectrum: `n_samples` values at t = 0, 1/N, ..., (N-1)/N.
    pub fn cluster_curve(&self, cluster_id: usize) -> Vec<f64> {
        let spectrum = pairs_complex(&self.clusters[cluster_id].mean_spectrum);
        let full = crate::contour::reconstruct(&spectrum, 2 * self.n_samples);
        full[self.n_samples..].to_vec()
    }
}

/// Symbol <-> token codec for the two state kinds.
trait SymbolToken: Sized {
    fn to_token(&self) -> String;
    fn from_token(token: &str) -> Option<Self>;
}

impl SymbolToken for PitchSymbol {
    fn to_token(&self) -> String {
        self.to_string()
    }

    fn from_token(token: &str) -> Option<Self> {
        if token == "rest" {
            return Some(PitchSymbol::Rest);
        }
        token.parse::<u8>().ok().filter(|p| *p <= 127).map(PitchSymbol::Pitch)
    }
}

impl SymbolToken for RationalTime {
    fn to_token(&self) -> String {
        format!("{}/{}", self.numerator(), self.denominator())
    }

    fn from_token(token: &str) -> Option<Self> {
        token.parse().ok()
    }
}

fn schema_err(path: impl Into<String>, detail: impl Into<String>) -> Error {
    Error::Schema { path: path.into(), detail: detail.into() }
}

fn table_to_data<S: Ord + Clone + SymbolToken>(
    model: &TransitionModel<S>,
    feature: Feature,
) -> TransitionTableData {
    let alphabet: Vec<String> = model.alphabet().states().iter().map(|s| s.to_token()).collect();
    let mut offbeats = BTreeMap::new();
    for (key, table) in model.table() {
        let rows: Vec<TransitionRow> = table
            .iter()
            .map(|(context, counts)| TransitionRow {
                context: context
                    .iter()
                    .map(|&id| {
                        (id != BLANK).then(|| model.alphabet().symbol(id).to_token())
                    })
                    .collect(),
                counts: counts.clone(),
            })
            .collect();
        offbeats.insert(key.to_token(), rows);
    }
    TransitionTableData { feature, order: model.order(), alphabet, offbeats }
}

fn table_from_data<S: Ord + Clone + SymbolToken>(
    data: &TransitionTableData,
    field: &str,
) -> Result<TransitionModel<S>> {
    let mut states = Vec::with_capacity(data.alphabet.len());
    for (i, token) in data.alphabet.iter().enumerate() {
        let state = S::from_token(token)
            .ok_or_else(|| schema_err(format!("{field}.alphabet[{i}]"), format!("bad symbol `{token}`")))?;
        states.push(state);
    }
    let alphabet = Alphabet::from_states(states.clone());
    if alphabet.len() != data.alphabet.len() {
        return Err(schema_err(format!("{field}.alphabet"), "duplicate symbols"));
    }

    let mut table = BTreeMap::new();
    for (key_token, rows) in &data.offbeats {
        let key: RationalTime = key_token
            .parse()
            .map_err(|e| schema_err(format!("{field}.offbeats[{key_token}]"), e))?;
        if !(RationalTime::zero()..RationalTime::from_int(1)).contains(&key) {
            return Err(schema_err(
                format!("{field}.offbeats[{key_token}]"),
                "off-beat keys must lie in [0, 1)",
            ));
        }
        let mut offbeat_table = BTreeMap::new();
        for (r, row) in rows.iter().enumerate() {
            let path = format!("{field}.offbeats[{key_token}][{r}]");
            if row.context.is_empty() || row.context.len() > data.order {
                return Err(schema_err(&path, "context length must be 1..=order"));
            }
            if row.counts.len() != alphabet.len() {
                return Err(schema_err(&path, "counts length must match the alphabet"));
            }
            let mut context: Vec<SymbolId> = Vec::with_capacity(row.context.len());
            let mut seen_symbol = false;
            for token in &row.context {
                match token {
                    None => {
                        if seen_symbol {
                            return Err(schema_err(&path, "blank after a symbol in context"));
                        }
                        context.push(BLANK);
                    }
                    Some(token) => {
                        seen_symbol = true;
                        let state = S::from_token(token)
                            .ok_or_else(|| schema_err(&path, format!("bad symbol `{token}`")))?;
                        let id = alphabet
                            .id_of(&state)
                            .ok_or_else(|| schema_err(&path, format!("symbol `{token}` not in alphabet")))?;
                        context.push(id);
                    }
                }
            }
            if offbeat_table.insert(context, row.counts.clone()).is_some() {
                return Err(schema_err(&path, "duplicate context"));
            }
        }
        table.insert(key, offbeat_table);
    }
    Ok(TransitionModel::from_parts(alphabet, data.order, table))
}

fn complex_pairs(spectrum: &[Complex64]) -> Vec<[f64; 2]> {
    spectrum.iter().map(|c| [c.re, c.im]).collect()
}

fn pairs_complex(pairs: &[[f64; 2]]) -> Vec<Complex64> {
    pairs.iter().map(|[re, im]| Complex64::new(*re, *im)).collect()
}

fn contour_to_data(model: &ContourModel) -> ContourData {
    ContourData {
        feature: model.feature,
        n_samples: model.curve.len(),
        selected_cluster: model.selected_cluster,
        mean_spectrum: complex_pairs(&model.mean_spectrum),
        curve: model.curve.samples.clone(),
        clusters: model
            .diagnostics
            .iter()
            .map(|d| ClusterData {
                id: d.id,
                size: d.size,
                width: d.width,
                quality: d.quality,
                selected: d.selected,
                mean_spectrum: complex_pairs(&d.mean_spectrum),
            })
            .collect(),
    }
}

fn contour_from_data(data: &ContourData, field: &str) -> Result<ContourModel> {
    if data.n_samples == 0 {
        return Err(schema_err(format!("{field}.n_samples"), "must be at least 1"));
    }
    if data.curve.len() != data.n_samples {
        return Err(schema_err(format!("{field}.curve"), "length must equal n_samples"));
    }
    if data.selected_cluster >= data.clusters.len() {
        return Err(schema_err(
            format!("{field}.selected_cluster"),
            "selected cluster out of range",
        ));
    }
    if data.mean_spectrum.is_empty() || data.mean_spectrum.len() > data.n_samples {
        return Err(schema_err(
            format!("{field}.mean_spectrum"),
            "must hold 1..=n_samples coefficients",
        ));
    }
    for (i, cluster) in data.clusters.iter().enumerate() {
        if cluster.mean_spectrum.is_empty() || cluster.mean_spectrum.len() > data.n_samples {
            return Err(schema_err(
                format!("{field}.clusters[{i}].mean_spectrum"),
                "must hold 1..=n_samples coefficients",
            ));
        }
    }
    Ok(ContourModel {
        feature: data.feature,
        selected_cluster: data.selected_cluster,
        mean_spectrum: pairs_complex(&data.mean_spectrum),
        curve: SampledCurve { samples: data.curve.clone() },
        diagnostics: data
            .clusters
            .iter()
            .map(|c| ClusterDiagnostics {
                id: c.id,
                size: c.size,
                width: c.width,
                quality: c.quality,
                selected: c.selected,
                mean_spectrum: pairs_complex(&c.mean_spectrum),
            })
            .collect(),
    })
}

impl ModelFile {
    pub fn from_trained(
        config: GeneratorConfig,
        corpus: CorpusFingerprint,
        models: &TrainedModels,
    ) -> Self {
        ModelFile {
            version: MODEL_VERSION,
            config,
            corpus,
            pitch_model: table_to_data(&models.pitch_model, Feature::Pitch),
            duration_model: table_to_data(&models.duration_model, Feature::Duration),
            pitch_contour: contour_to_data(&models.pitch_contour),
            rhythm_contour: contour_to_data(&models.rhythm_contour),
        }
    }

    /// Validate and rebuild the in-memory models.
    pub fn to_trained(&self) -> Result<TrainedModels> {
        if self.version != MODEL_VERSION {
            return Err(Error::Version { found: self.version, expected: MODEL_VERSION });
        }
        let duration_model: TransitionModel<RationalTime> =
            table_from_data(&self.duration_model, "duration_model")?;
        // the composer's termination bound is c_total / min duration state
        if duration_model.alphabet().states().iter().any(|d| !d.is_positive()) {
            return Err(schema_err(
                "duration_model.alphabet",
                "duration states must be positive",
            ));
        }
        Ok(TrainedModels {
            pitch_model: table_from_data(&self.pitch_model, "pitch_model")?,
            duration_model,
            pitch_contour: contour_from_data(&self.pitch_contour, "pitch_contour")?,
            rhythm_contour: contour_from_data(&self.rhythm_contour, "rhythm_contour")?,
        })
    }

    pub fn to_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("model file serializes");
        out.push('\n');
        out
    }

    pub fn from_json(json: &str) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| schema_err(format!("line {}", e.line()), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json)
    }
}
