//! Glue from corpus phrases to trained models.

use crate::composer::GeneratorConfig;
use crate::contour::{learn_contour, ContourModel, ContourParams, DEFAULT_SAMPLES};
use crate::error::{Error, Result};
use crate::markov::{train, Alphabet, Feature, PitchSymbol, TrainingSequence, TransitionModel};
use crate::score::Phrase;
use crate::time::RationalTime;

/// Pitch states of a phrase, each with its onset count.
pub fn pitch_sequence(phrase: &Phrase) -> TrainingSequence<PitchSymbol> {
    phrase
        .notes
        .iter()
        .map(|n| (PitchSymbol::from_note_pitch(n.pitch), n.onset))
        .collect()
}

/// Duration states of a phrase, each with its onset count. Rests contribute
/// their duration like any note.
pub fn duration_sequence(phrase: &Phrase) -> TrainingSequence<RationalTime> {
    phrase.notes.iter().map(|n| (n.duration, n.onset)).collect()
}

/// Both Markov models and both contour models of one training run.
#[derive(Debug, Clone)]
pub struct TrainedModels {
    pub pitch_model: TransitionModel<PitchSymbol>,
    pub duration_model: TransitionModel<RationalTime>,
    pub pitch_contour: ContourModel,
    pub rhythm_contour: ContourModel,
}

/// Train everything from phrase-split corpus data.
pub fn train_pipeline(phrases: &[&Phrase], config: &GeneratorConfig) -> Result<TrainedModels> {
    config.validate()?;
    if config.lowpass_k > DEFAULT_SAMPLES {
        return Err(Error::InvalidConfig {
            detail: format!("lowpass_k must be at most the curve resolution {DEFAULT_SAMPLES}"),
        });
    }
    if phrases.iter().all(|p| p.notes.is_empty()) {
        return Err(Error::EmptyCorpus);
    }

    let pitch_sequences: Vec<_> = phrases.iter().map(|p| pitch_sequence(p)).collect();
    let duration_sequences: Vec<_> = phrases.iter().map(|p| duration_sequence(p)).collect();

    let pitch_alphabet = Alphabet::from_observed(
        pitch_sequences.iter().flatten().map(|(s, _)| s),
    );
    let duration_alphabet = Alphabet::from_observed(
        duration_sequences.iter().flatten().map(|(s, _)| s),
    );

    let params = ContourParams {
        n_samples: DEFAULT_SAMPLES,
        lowpass_k: config.lowpass_k,
        max_clusters: config.max_clusters,
        gamma: config.gamma,
    };

    Ok(TrainedModels {
        pitch_model: train(&pitch_sequences, config.order, &pitch_alphabet)?,
        duration_model: train(&duration_sequences, config.order, &duration_alphabet)?,
        pitch_contour: learn_contour(phrases, Feature::Pitch, &params)?,
        rhythm_contour: learn_contour(phrases, Feature::Duration, &params)?,
    })
}
