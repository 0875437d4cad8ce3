//! Standard MIDI File ingestion and emission.
//!
//! Reading is symbolic only: tempo is ignored, onsets and durations are
//! quantized to the 1/24-quarter grid, and gaps of at least one grid step
//! become explicit rest notes. Files where two notes sound at once are
//! rejected as [`Error::PolyphonicInput`] so the caller can skip and count
//! them.

use midly::num::{u15, u24, u28, u4, u7};
use midly::{Format, Header, MetaMessage, MidiMessage, Smf, Timing, TrackEvent, TrackEventKind};

use crate::error::{Error, Result};
use crate::score::{Melody, Note, Phrase};
use crate::time::RationalTime;

/// Which meta event kinds mark phrase boundaries. The MTC corpus encodes
/// phrase marks as text events on a separate track, but other corpora use
/// proper marker events, so both are accepted by default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarkerKinds {
    pub text: bool,
    pub marker: bool,
}

impl Default for MarkerKinds {
    fn default() -> Self {
        MarkerKinds { text: true, marker: true }
    }
}

impl MarkerKinds {
    /// Parse a comma-separated list of `text` / `marker`.
    pub fn parse(spec: &str) -> std::result::Result<Self, String> {
        let mut kinds = MarkerKinds { text: false, marker: false };
        for part in spec.split(',') {
            match part.trim() {
                "text" => kinds.text = true,
                "marker" => kinds.marker = true,
                other => return Err(format!("unknown marker type `{other}` (expected text|marker)")),
            }
        }
        if !kinds.text && !kinds.marker {
            return Err("at least one marker type required".into());
        }
        Ok(kinds)
    }
}

/// A parsed file: the melody as one unsplit phrase plus the phrase-boundary
/// marker positions found in any track.
#[derive(Debug, Clone)]
pub struct ParsedMidi {
    pub melody: Melody,
    pub markers: Vec<RationalTime>,
}

/// Default resolution for emitted files; 480 is divisible by the grid
/// denominator 24, so grid times map to ticks exactly.
pub const WRITE_PPQ: i64 = 480;
/// 120 BPM.
const WRITE_TEMPO_US_PER_QUARTER: u32 = 500_000;
const WRITE_VELOCITY: u8 = 80;

/// Parse a format 0/1 SMF with at most one note-bearing track into a
/// [`Melody`] of a single phrase, shifting every pitch by `transpose`
/// semitones and collecting phrase markers.
pub fn parse_midi(
    bytes: &[u8],
    transpose: i32,
    marker_kinds: MarkerKinds,
    file: &str,
) -> Result<ParsedMidi> {
    let smf = Smf::parse(bytes).map_err(|e| Error::MidiParse {
        file: file.to_string(),
        detail: e.to_string(),
    })?;

    match smf.header.format {
        Format::SingleTrack | Format::Parallel => {}
        Format::Sequential => {
            return Err(Error::MidiParse {
                file: file.to_string(),
                detail: "format 2 (sequential) files are unsupported".into(),
            })
        }
    }
    let ppq = match smf.header.timing {
        Timing::Metrical(t) => i64::from(t.as_int()),
        Timing::Timecode(..) => {
            return Err(Error::MidiParse {
                file: file.to_string(),
                detail: "SMPTE timecode division is unsupported".into(),
            })
        }
    };

    let mut raw_notes: Vec<(i64, i64, u8)> = Vec::new(); // (start_tick, end_tick, pitch)
    let mut marker_ticks: Vec<i64> = Vec::new();
    let mut time_signature: Option<(u8, u8)> = None;
    let mut note_track_seen = false;

    for track in &smf.tracks {
        let mut tick: i64 = 0;
        // (tick, index_in_track, is_on, pitch); offs sort before ons at a tick
        let mut note_events: Vec<(i64, usize, bool, u8)> = Vec::new();
        for (idx, event) in track.iter().enumerate() {
            tick += i64::from(event.delta.as_int());
            match event.kind {
                TrackEventKind::Midi { message, .. } => match message {
                    MidiMessage::NoteOn { key, vel } => {
                        note_events.push((tick, idx, vel.as_int() > 0, key.as_int()));
                    }
                    MidiMessage::NoteOff { key, .. } => {
                        note_events.push((tick, idx, false, key.as_int()));
                    }
                    _ => {}
                },
                TrackEventKind::Meta(meta) => match meta {
                    MetaMessage::Text(_) if marker_kinds.text => marker_ticks.push(tick),
                    MetaMessage::Marker(_) if marker_kinds.marker => marker_ticks.push(tick),
                    MetaMessage::TimeSignature(num, den_pow2, _, _)
                        if time_signature.is_none() =>
                    {
                        time_signature = Some((num, 1u8 << den_pow2.min(7)));
                    }
                    _ => {}
                },
                _ => {}
            }
        }

        if note_events.is_empty() {
            continue;
        }
        if note_track_seen {
            return Err(Error::MultipleNoteTracks { file: file.to_string() });
        }
        note_track_seen = true;

        note_events.sort_by_key(|&(tick, idx, is_on, _)| (tick, is_on, idx));
        let mut active: Option<(u8, i64)> = None;
        for (tick, _, is_on, pitch) in note_events {
            match (is_on, &mut active) {
                (true, Some((held, _))) => {
                    return Err(Error::PolyphonicInput {
                        file: file.to_string(),
                        detail: format!("note {pitch} starts at tick {tick} while note {held} is sounding"),
                    });
                }
                (true, None) => active = Some((pitch, tick)),
                (false, Some((held, start))) if *held == pitch => {
                    raw_notes.push((*start, tick, pitch));
                    active = None;
                }
                // stray or duplicate note-off: tolerated
                (false, _) => {}
            }
        }
        if let Some((pitch, start)) = active {
            return Err(Error::MidiParse {
                file: file.to_string(),
                detail: format!("note {pitch} started at tick {start} never ends"),
            });
        }
    }

    if raw_notes.is_empty() {
        return Err(Error::MidiParse {
            file: file.to_string(),
            detail: "no note events found".into(),
        });
    }

    let quantize = |tick: i64| RationalTime::new(tick, ppq).quantize_to_grid();

    let mut notes: Vec<Note> = Vec::new();
    let mut cursor = RationalTime::zero();
    for (start_tick, end_tick, pitch) in raw_notes {
        let onset = quantize(start_tick);
        let end = quantize(end_tick);
        if end <= onset {
            continue; // vanishes on the grid
        }
        let shifted = i32::from(pitch) + transpose;
        let shifted = u8::try_from(shifted).ok().filter(|p| *p <= 127).ok_or_else(|| {
            Error::MidiParse {
                file: file.to_string(),
                detail: format!("pitch {pitch} transposed by {transpose} leaves the MIDI range"),
            }
        })?;
        if onset > cursor {
            notes.push(Note::new(None, cursor, onset - cursor));
        }
        notes.push(Note::new(Some(shifted), onset, end - onset));
        cursor = end;
    }
    if notes.is_empty() {
        return Err(Error::MidiParse {
            file: file.to_string(),
            detail: "all notes quantize to zero length".into(),
        });
    }

    let mut markers: Vec<RationalTime> = marker_ticks.into_iter().map(quantize).collect();
    markers.sort();
    markers.dedup();

    let melody = Melody {
        phrases: vec![Phrase::new(notes, file, 0)],
        transpose_applied: transpose,
        time_signature: time_signature.unwrap_or((4, 4)),
    };
    Ok(ParsedMidi { melody, markers })
}

/// Serialize notes (onsets from zero) as a format 0 SMF: PPQ 480, 120 BPM,
/// 4/4 meter, C major key signature.
pub fn write_midi(notes: &[Note]) -> Vec<u8> {
    write_midi_with_markers(notes, &[])
}

/// [`write_midi`] plus phrase-boundary marker meta events, for producing
/// phrase-annotated corpora.
pub fn write_midi_with_markers(notes: &[Note], markers: &[RationalTime]) -> Vec<u8> {
    let mut track: Vec<TrackEvent<'_>> = vec![
        meta_event(0, MetaMessage::Tempo(u24::new(WRITE_TEMPO_US_PER_QUARTER))),
        meta_event(0, MetaMessage::TimeSignature(4, 2, 24, 8)),
        meta_event(0, MetaMessage::KeySignature(0, false)),
    ];

    // (tick, priority, event); markers sort before note events at a tick
    let mut events: Vec<(i64, u8, TrackEventKind<'_>)> = Vec::new();
    for marker in markers {
        events.push((
            marker.to_ticks(WRITE_PPQ),
            0,
            TrackEventKind::Meta(MetaMessage::Marker(b"phrase")),
        ));
    }
    for note in notes {
        let Some(pitch) = note.pitch else { continue };
        events.push((
            note.onset.to_ticks(WRITE_PPQ),
            2,
            TrackEventKind::Midi {
                channel: u4::new(0),
                message: MidiMessage::NoteOn { key: u7::new(pitch), vel: u7::new(WRITE_VELOCITY) },
            },
        ));
        events.push((
            note.end().to_ticks(WRITE_PPQ),
            1,
            TrackEventKind::Midi {
                channel: u4::new(0),
                message: MidiMessage::NoteOff { key: u7::new(pitch), vel: u7::new(0) },
            },
        ));
    }
    events.sort_by_key(|&(tick, priority, _)| (tick, priority));

    let mut last_tick: i64 = 0;
    for (tick, _, kind) in events {
        track.push(TrackEvent { delta: u28::new((tick - last_tick) as u32), kind });
        last_tick = tick;
    }
    track.push(meta_event(0, MetaMessage::EndOfTrack));

    let smf = Smf {
        header: Header::new(Format::SingleTrack, Timing::Metrical(u15::new(WRITE_PPQ as u16))),
        tracks: vec![track],
    };
    let mut out = Vec::new();
    smf.write_std(&mut out).expect("writing to a Vec cannot fail");
    out
}

fn meta_event(delta: u32, meta: MetaMessage<'_>) -> TrackEvent<'_> {
    TrackEvent { delta: u28::new(delta), kind: TrackEventKind::Meta(meta) }
}
