//! Fixture corpus shared by the integration suites.

use cantus_core::score::{Note, Phrase};
use cantus_core::time::RationalTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(n: i64) -> RationalTime {
    RationalTime::from_int(n)
}

fn rt(n: i64, d: i64) -> RationalTime {
    RationalTime::new(n, d)
}

/// 20 four-bar phrases over the C major scale with mixed bar rhythms and a
/// forced cadence tone; dense enough that order-2 composition always
/// completes (exercised over 500 seeds in the acceptance suite).
pub fn fixture_corpus() -> Vec<Phrase> {
    let scale: [u8; 8] = [60, 62, 64, 65, 67, 69, 71, 72];
    let patterns: [&[RationalTime]; 4] = [
        &[q(1), q(1), q(1), q(1)],
        &[q(1), rt(1, 2), rt(1, 2), q(1), q(1)],
        &[rt(1, 2), rt(1, 2), q(1), q(1), q(1)],
        &[q(1), q(1), q(2)],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let mut phrases = Vec::with_capacity(20);
    for p in 0..20 {
        let mut notes: Vec<Note> = Vec::new();
        let mut onset = RationalTime::zero();
        let mut degree: i32 = rng.gen_range(0..8);
        for bar in 0..4usize {
            for &duration in patterns[(p + bar) % 4] {
                degree = (degree + rng.gen_range(-2..=2)).clamp(0, 7);
                notes.push(Note::new(Some(scale[degree as usize]), onset, duration));
                onset += duration;
            }
        }
        // cadence: end the phrase on a tonic-triad tone near the walk
        let last = notes.last_mut().unwrap();
        let candidates = [60u8, 64, 67, 72];
        let current = last.pitch.unwrap();
        last.pitch = Some(
            *candidates
                .iter()
                .min_by_key(|&&c| (i32::from(c) - i32::from(current)).abs())
                .unwrap(),
        );
        phrases.push(Phrase::new(notes, "fixture", p));
    }
    phrases
}

/// Write the fixture phrases as MIDI files; file 0 is stored two semitones
/// up with the `_m2` infix so ingest transposes it back.
pub fn write_fixture_corpus(dir: &std::path::Path) {
    use cantus_core::midi::write_midi;
    std::fs::create_dir_all(dir).unwrap();
    for (p, phrase) in fixture_corpus().into_iter().enumerate() {
        let (name, shift) = if p == 0 {
            ("tune_m2.mid".to_string(), 2u8)
        } else {
            (format!("song{p:02}.mid"), 0)
        };
        let notes: Vec<Note> = phrase
            .notes
            .iter()
            .map(|n| Note::new(n.pitch.map(|v| v + shift), n.onset, n.duration))
            .collect();
        std::fs::write(dir.join(name), write_midi(&notes)).unwrap();
    }
}
