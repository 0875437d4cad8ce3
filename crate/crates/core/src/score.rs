//! Monophonic score model: notes, phrases, melodies.

use serde::{Deserialize, Serialize};

use crate::time::RationalTime;

/// A pitched note or an explicit rest. Onsets are counted from the start of
/// the containing phrase, in quarter notes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Note {
    /// MIDI pitch 0..=127; `None` is a rest.
    pub pitch: Option<u8>,
    pub duration: RationalTime,
    pub onset: RationalTime,
}

impl Note {
    pub fn new(pitch: Option<u8>, onset: RationalTime, duration: RationalTime) -> Self {
        debug_assert!(duration.is_positive(), "note duration must be > 0");
        if let Some(p) = pitch {
            debug_assert!(p <= 127);
        }
        Note { pitch, duration, onset }
    }

    pub fn is_rest(&self) -> bool {
        self.pitch.is_none()
    }

    pub fn end(&self) -> RationalTime {
        self.onset + self.duration
    }
}

/// A contiguous, gap-free run of notes: `onset[i+1] = onset[i] + duration[i]`,
/// rests included as explicit notes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub notes: Vec<Note>,
    pub source_id: String,
    pub index_in_song: usize,
}

impl Phrase {
    pub fn new(notes: Vec<Note>, source_id: impl Into<String>, index_in_song: usize) -> Self {
        let phrase = Phrase { notes, source_id: source_id.into(), index_in_song };
        debug_assert!(phrase.is_gap_free());
        phrase
    }

    pub fn total_duration(&self) -> RationalTime {
        self.notes
            .iter()
            .fold(RationalTime::zero(), |acc, n| acc + n.duration)
    }

    pub fn is_gap_free(&self) -> bool {
        self.notes
            .windows(2)
            .all(|w| w[1].onset == w[0].end())
    }

    /// Duration-blind mean of the sounding pitches; `None` for all-rest phrases.
    pub fn mean_pitch(&self) -> Option<f64> {
        let pitches: Vec<f64> = self
            .notes
            .iter()
            .filter_map(|n| n.pitch.map(f64::from))
            .collect();
        if pitches.is_empty() {
            None
        } else {
            Some(pitches.iter().sum::<f64>() / pitches.len() as f64)
        }
    }
}

/// A parsed song: ordered phrases plus normalization provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Melody {
    pub phrases: Vec<Phrase>,
    /// Semitones added to every pitch on ingest (from the filename infix).
    pub transpose_applied: i32,
    pub time_signature: (u8, u8),
}

impl Melody {
    pub fn note_count(&self) -> usize {
        self.phrases.iter().map(|p| p.notes.len()).sum()
    }

    pub fn total_duration(&self) -> RationalTime {
        self.phrases
            .iter()
            .fold(RationalTime::zero(), |acc, p| acc + p.total_duration())
    }

    /// All notes in order with onsets rebased to the melody start.
    pub fn flattened_notes(&self) -> Vec<Note> {
        let mut out = Vec::with_capacity(self.note_count());
        let mut offset = RationalTime::zero();
        for phrase in &self.phrases {
            for note in &phrase.notes {
                out.push(Note { pitch: note.pitch, duration: note.duration, onset: note.onset + offset });
            }
            offset += phrase.total_duration();
        }
        out
    }
}
