//! Corpus preprocessing: transpose infixes, phrase splitting, statistics,
//! and the canonical corpus archive written by `ingest`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::midi::{self, MarkerKinds};
use crate::score::{Melody, Note, Phrase};
use crate::time::RationalTime;

/// Extract the key-normalization infix from a file name: `song_m2.mid` means
/// "add -2 semitones to reach C major", `song_p3.mid` means "+3", no infix
/// means the file is already in C major.
pub fn parse_transpose_infix(filename: &str) -> Result<i32> {
    let name = Path::new(filename)
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| filename.to_string());
    let stem = name
        .strip_suffix(".midi")
        .or_else(|| name.strip_suffix(".mid"))
        .unwrap_or(&name);

    let Some(pos) = stem.rfind('_') else { return Ok(0) };
    let infix = &stem[pos + 1..];
    let Some(sign_char) = infix.chars().next() else { return Ok(0) };
    let sign = match sign_char {
        'm' => -1,
        'p' => 1,
        _ => return Ok(0), // underscore is part of the name, not an infix
    };
    let digits = &infix[1..];
    if digits.is_empty() {
        return Err(Error::InfixParse {
            file: filename.to_string(),
            reason: format!("`_{sign_char}` must be followed by digits"),
        });
    }
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Ok(0); // e.g. `_mix` — not an infix
    }
    let k: i32 = digits.parse().map_err(|e| Error::InfixParse {
        file: filename.to_string(),
        reason: format!("bad semitone count `{digits}`: {e}"),
    })?;
    Ok(sign * k)
}

/// Cut the melody at the marker positions. A marker strictly inside a note
/// snaps to that note's onset; markers at the ends (or duplicates after
/// snapping) are dropped. Every returned phrase has onsets rebased to its
/// own start, so their concatenation reproduces the melody.
pub fn split_phrases(melody: &Melody, marker_ticks: &[RationalTime]) -> Vec<Phrase> {
    let notes = melody.flattened_notes();
    if notes.is_empty() {
        return Vec::new();
    }
    let total = melody.total_duration();
    let source_id = melody
        .phrases
        .first()
        .map(|p| p.source_id.clone())
        .unwrap_or_default();

    // snap each marker to the onset of the note containing it
    let mut boundaries: Vec<RationalTime> = marker_ticks
        .iter()
        .filter(|m| m.is_positive() && **m < total)
        .map(|m| {
            notes
                .iter()
                .find(|n| n.onset <= *m && *m < n.end())
                .map(|n| n.onset)
                .unwrap_or(*m)
        })
        .collect();
    boundaries.sort();
    boundaries.dedup();
    boundaries.retain(|b| b.is_positive());

    let mut phrases = Vec::with_capacity(boundaries.len() + 1);
    let mut start = RationalTime::zero();
    let mut note_iter = notes.iter().peekable();
    for boundary in boundaries.iter().copied().chain(std::iter::once(total)) {
        let mut phrase_notes = Vec::new();
        while let Some(note) = note_iter.peek() {
            if note.onset >= boundary {
                break;
            }
            let note = note_iter.next().unwrap();
            phrase_notes.push(Note::new(note.pitch, note.onset - start, note.duration));
        }
        if !phrase_notes.is_empty() {
            let index = phrases.len();
            phrases.push(Phrase::new(phrase_notes, source_id.clone(), index));
        }
        start = boundary;
    }
    phrases
}

/// Aggregate corpus counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub songs: usize,
    pub phrases: usize,
    pub mean_phrases_per_song: f64,
    pub mean_phrase_len_bars: f64,
}

pub fn corpus_stats(melodies: &[Melody]) -> CorpusStats {
    let songs = melodies.len();
    let phrases: usize = melodies.iter().map(|m| m.phrases.len()).sum();
    if songs == 0 || phrases == 0 {
        return CorpusStats {
            songs,
            phrases,
            mean_phrases_per_song: 0.0,
            mean_phrase_len_bars: 0.0,
        };
    }
    let total_counts: f64 = melodies
        .iter()
        .flat_map(|m| &m.phrases)
        .map(|p| p.total_duration().to_f64())
        .sum();
    CorpusStats {
        songs,
        phrases,
        mean_phrases_per_song: phrases as f64 / songs as f64,
        mean_phrase_len_bars: total_counts / 4.0 / phrases as f64,
    }
}

/// One row of the ingest report CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportRow {
    pub file: String,
    pub status: FileStatus,
    pub phrases: usize,
    pub total_counts: RationalTime,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FileStatus {
    Ok,
    SkippedPolyphonic,
    Error(String),
}

impl FileStatus {
    pub fn label(&self) -> &'static str {
        match self {
            FileStatus::Ok => "ok",
            FileStatus::SkippedPolyphonic => "skipped_polyphonic",
            FileStatus::Error(_) => "error",
        }
    }
}

/// The canonical corpus archive: phrase-split, key-normalized songs plus
/// fingerprints of the source files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusArchive {
    pub version: u32,
    pub files: Vec<FileFingerprint>,
    pub songs: Vec<Song>,
}

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileFingerprint {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Song {
    pub source_id: String,
    pub transpose_applied: i32,
    pub phrases: Vec<Phrase>,
}

impl CorpusArchive {
    pub fn all_phrases(&self) -> Vec<&Phrase> {
        self.songs.iter().flat_map(|s| &s.phrases).collect()
    }

    /// Structural checks that deserialization alone cannot enforce. The
    /// composer's termination argument needs strictly positive durations.
    pub fn validate(&self) -> Result<()> {
        for (s, song) in self.songs.iter().enumerate() {
            for (p, phrase) in song.phrases.iter().enumerate() {
                let path = format!("songs[{s}].phrases[{p}]");
                if phrase.notes.is_empty() {
                    return Err(Error::Schema { path, detail: "empty phrase".into() });
                }
                if !phrase.is_gap_free() {
                    return Err(Error::Schema { path, detail: "notes overlap or leave gaps".into() });
                }
                for (n, note) in phrase.notes.iter().enumerate() {
                    if !note.duration.is_positive() {
                        return Err(Error::Schema {
                            path: format!("{path}.notes[{n}]"),
                            detail: "duration must be positive".into(),
                        });
                    }
                    if note.pitch.is_some_and(|p| p > 127) {
                        return Err(Error::Schema {
                            path: format!("{path}.notes[{n}]"),
                            detail: "pitch must be 0..=127".into(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> CorpusStats {
        let melodies: Vec<Melody> = self
            .songs
            .iter()
            .map(|s| Melody {
                phrases: s.phrases.clone(),
                transpose_applied: s.transpose_applied,
                time_signature: (4, 4),
            })
            .collect();
        corpus_stats(&melodies)
    }
}

/// Outcome of ingesting one directory of `.mid` / `.midi` files.
#[derive(Debug)]
pub struct IngestResult {
    pub archive: CorpusArchive,
    pub report: Vec<ReportRow>,
    pub skipped_polyphonic: usize,
}

/// Parse every MIDI file under `entries` (name, bytes), in the given order.
/// Polyphonic files are skipped and counted; other failures become error
/// rows. Non-4/4 files are rejected because the whole pipeline assumes 4/4.
pub fn ingest_files(entries: &[(String, Vec<u8>)], marker_kinds: MarkerKinds) -> IngestResult {
    let mut report = Vec::with_capacity(entries.len());
    let mut files = Vec::new();
    let mut songs = Vec::new();
    let mut skipped_polyphonic = 0;

    for (name, bytes) in entries {
        let row = match ingest_one(name, bytes, marker_kinds) {
            Ok((song, fingerprint)) => {
                let phrases = song.phrases.len();
                let total = song
                    .phrases
                    .iter()
                    .fold(RationalTime::zero(), |acc, p| acc + p.total_duration());
                files.push(fingerprint);
                songs.push(song);
                ReportRow { file: name.clone(), status: FileStatus::Ok, phrases, total_counts: total }
            }
            Err(Error::PolyphonicInput { .. }) => {
                skipped_polyphonic += 1;
                ReportRow {
                    file: name.clone(),
                    status: FileStatus::SkippedPolyphonic,
                    phrases: 0,
                    total_counts: RationalTime::zero(),
                }
            }
            Err(e) => ReportRow {
                file: name.clone(),
                status: FileStatus::Error(e.to_string()),
                phrases: 0,
                total_counts: RationalTime::zero(),
            },
        };
        report.push(row);
    }

    IngestResult {
        archive: CorpusArchive { version: CORPUS_VERSION, files, songs },
        report,
        skipped_polyphonic,
    }
}

fn ingest_one(
    name: &str,
    bytes: &[u8],
    marker_kinds: MarkerKinds,
) -> Result<(Song, FileFingerprint)> {
    let transpose = parse_transpose_infix(name)?;
    let parsed = midi::parse_midi(bytes, transpose, marker_kinds, name)?;
    let (num, den) = parsed.melody.time_signature;
    if (num, den) != (4, 4) {
        return Err(Error::UnsupportedTimeSignature { file: name.to_string(), num, den });
    }
    let phrases = split_phrases(&parsed.melody, &parsed.markers);
    let fingerprint = FileFingerprint { file: name.to_string(), sha256: sha256_hex(bytes) };
    Ok((
        Song { source_id: name.to_string(), transpose_applied: transpose, phrases },
        fingerprint,
    ))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
