//! End-to-end checks of the binary: per-file report statuses, transposition,
//! exit codes, ablation flags, and inspect output consistency.

use std::path::Path;
use std::process::Command;

mod common;
use common::write_fixture_corpus;

use cantus_core::midi::{parse_midi, write_midi, MarkerKinds};
use cantus_core::score::Note;
use cantus_core::time::RationalTime;

fn q(n: i64) -> RationalTime {
    RationalTime::from_int(n)
}

fn cantus(args: &[&str], cwd: &Path) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_cantus"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs");
    (
        output.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&output.stdout).into_owned(),
        String::from_utf8_lossy(&output.stderr).into_owned(),
    )
}

fn scale_song(shift: u8, end_pitch: u8) -> Vec<Note> {
    let scale: [u8; 8] = [60, 62, 64, 65, 67, 69, 71, 72];
    let mut notes: Vec<Note> = (0..16)
        .map(|i| Note::new(Some(scale[(i % 8) as usize] + shift), q(i), q(1)))
        .collect();
    notes.last_mut().unwrap().pitch = Some(end_pitch + shift);
    notes
}

/// Raw polyphonic SMF: two simultaneous note-ons.
fn polyphonic_bytes() -> Vec<u8> {
    let mut track = Vec::new();
    for ev in [[0x00, 0x90, 60, 80], [0x00, 0x90, 64, 80], [0x60, 0x80, 60, 0]] {
        track.extend_from_slice(&ev);
    }
    track.extend_from_slice(&[0x00, 0x80, 64, 0]);
    track.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    let mut bytes = Vec::new();
    bytes.extend_from_slice(b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x00\x60MTrk");
    bytes.extend_from_slice(&(track.len() as u32).to_be_bytes());
    bytes.extend_from_slice(&track);
    bytes
}

#[test]
fn ingest_reports_statuses_and_transposes() {
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    std::fs::write(midi.join("a.mid"), write_midi(&scale_song(0, 72))).unwrap();
    // written two semitones up, tagged for -2 on ingest
    std::fs::write(midi.join("b_m2.mid"), write_midi(&scale_song(2, 72))).unwrap();
    std::fs::write(midi.join("c.mid"), polyphonic_bytes()).unwrap();
    std::fs::write(midi.join("d.mid"), b"garbage").unwrap();

    let (code, stdout, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "report.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("2 songs"));

    let report = std::fs::read_to_string(root.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "file,status,phrases,total_counts");
    assert!(lines[1].starts_with("a.mid,ok,1,16"));
    assert!(lines[2].starts_with("b_m2.mid,ok,1,16"));
    assert!(lines[3].starts_with("c.mid,skipped_polyphonic,0"));
    assert!(lines[4].starts_with("d.mid,error,0"));

    // the archived pitches of the tagged file equal the untagged original
    let corpus: serde_json::Value =
        serde_json::from_slice(&std::fs::read(root.path().join("corpus.json")).unwrap()).unwrap();
    let songs = corpus["songs"].as_array().unwrap();
    assert_eq!(songs.len(), 2);
    assert_eq!(songs[1]["transpose_applied"], -2);
    let notes_of = |song: &serde_json::Value| -> Vec<i64> {
        song["phrases"][0]["notes"]
            .as_array()
            .unwrap()
            .iter()
            .map(|n| n["pitch"].as_i64().unwrap())
            .collect()
    };
    assert_eq!(notes_of(&songs[0]), notes_of(&songs[1]));
}

#[test]
fn ingest_empty_directory_exits_2_with_report() {
    let root = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(root.path().join("midi")).unwrap();
    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "report.csv"],
        root.path(),
    );
    assert_eq!(code, 2);
    assert!(root.path().join("report.csv").exists());
    assert!(!root.path().join("corpus.json").exists());
}

#[test]
fn compose_from_thin_corpus_exits_3() {
    // one whole-note song gives the search nothing to continue with
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    let note = vec![Note::new(Some(60), q(0), q(4))];
    std::fs::write(midi.join("a.mid"), write_midi(&note)).unwrap();

    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "r.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "1", "--max-clusters", "1"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, stderr) = cantus(
        &["compose", "model.json", "--bars", "2", "--seed", "5"],
        root.path(),
    );
    assert_eq!(code, 3);
    assert!(stderr.contains("seed 5"), "failure names the seed: {stderr}");

    // one bar is reachable: the whole note itself
    let (code, _, _) = cantus(
        &["compose", "model.json", "--bars", "1", "--out-dir", "."],
        root.path(),
    );
    assert_eq!(code, 0);
}

#[test]
fn corrupt_model_exits_4() {
    let root = tempfile::tempdir().unwrap();
    std::fs::write(root.path().join("model.json"), b"{ \"version\": 1 ").unwrap();
    let (code, _, _) = cantus(&["compose", "model.json"], root.path());
    assert_eq!(code, 4);
    let (code, _, _) = cantus(&["inspect", "model.json"], root.path());
    assert_eq!(code, 4);
}

#[test]
fn crafted_corpus_with_negative_duration_exits_4() {
    let root = tempfile::tempdir().unwrap();
    let corpus = r#"{
      "version": 1,
      "files": [],
      "songs": [{
        "source_id": "bad.mid",
        "transpose_applied": 0,
        "phrases": [{
          "notes": [{"pitch": 60, "duration": "-1/2", "onset": "0/1"}],
          "source_id": "bad.mid",
          "index_in_song": 0
        }]
      }]
    }"#;
    std::fs::write(root.path().join("corpus.json"), corpus).unwrap();
    let (code, _, stderr) = cantus(
        &["train", "corpus.json", "--out", "model.json"],
        root.path(),
    );
    assert_eq!(code, 4, "{stderr}");
    assert!(stderr.contains("duration"), "{stderr}");
}

#[test]
fn inspect_quality_column_recomputes_from_size_and_width() {
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    // two contour families so inspect has several clusters to report
    for p in 0..6u8 {
        let notes: Vec<Note> = (0..16)
            .map(|i| {
                let arch = 62.0 + 8.0 * (std::f64::consts::PI * i as f64 / 15.0).sin();
                Note::new(Some(arch as u8 + p % 2), q(i), q(1))
            })
            .collect();
        std::fs::write(midi.join(format!("arch{p}.mid")), write_midi(&notes)).unwrap();
    }
    for p in 0..4u8 {
        let notes: Vec<Note> = (0..16)
            .map(|i| Note::new(Some((80 - i) as u8 + p % 2), q(i as i64), q(1)))
            .collect();
        std::fs::write(midi.join(format!("ramp{p}.mid")), write_midi(&notes)).unwrap();
    }

    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "r.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "1", "--max-clusters", "2"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, stdout, _) = cantus(
        &["inspect", "model.json", "--out-dir", "inspect"],
        root.path(),
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("pitch contour"));

    for name in ["pitch", "rhythm"] {
        let csv =
            std::fs::read_to_string(root.path().join(format!("inspect/clusters_{name}.csv")))
                .unwrap();
        let rows: Vec<(usize, f64, f64, f64, bool)> = csv
            .lines()
            .skip(1)
            .map(|line| {
                let f: Vec<&str> = line.split(',').collect();
                (
                    f[1].parse().unwrap(),
                    f[2].parse().unwrap(),
                    f[3].parse().unwrap(),
                    0.0,
                    f[4] == "true",
                )
            })
            .collect();
        let max_size = rows.iter().map(|r| r.0).max().unwrap() as f64;
        let max_damped = rows
            .iter()
            .map(|r| r.1.powf(1.0 / 3.0))
            .fold(0.0f64, f64::max);
        let mut best = (f64::MIN, 0usize);
        for (i, (size, width, quality, _, _)) in rows.iter().enumerate() {
            let width_term = if max_damped > 0.0 { width.powf(1.0 / 3.0) / max_damped } else { 0.0 };
            let expected = *size as f64 / max_size + width_term;
            assert!(
                (quality - expected).abs() < 1e-9,
                "{name} cluster {i}: {quality} vs {expected}"
            );
            if *quality > best.0 {
                best = (*quality, i);
            }
        }
        // the selected flag marks the argmax row
        assert!(rows[best.1].4, "{name}: argmax row not flagged selected");
        // each cluster has a contour curve CSV with t in [0, 1)
        let curve =
            std::fs::read_to_string(root.path().join(format!("inspect/contour_{name}_c0.csv")))
                .unwrap();
        let mut lines = curve.lines();
        assert_eq!(lines.next().unwrap(), "t,value");
        let first = lines.next().unwrap();
        assert!(first.starts_with("0,"));
    }
}

#[test]
fn ingest_splits_marked_songs_into_phrases() {
    use cantus_core::midi::write_midi_with_markers;
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    // 12-bar songs with markers every 4 bars: three phrases each
    let scale: [u8; 8] = [60, 62, 64, 65, 67, 69, 71, 72];
    for song in 0..5u8 {
        let notes: Vec<Note> = (0..48)
            .map(|i| {
                let deg = ((i + i64::from(song)) % 8) as usize;
                Note::new(Some(scale[deg]), q(i), q(1))
            })
            .collect();
        let markers = vec![q(16), q(32)];
        std::fs::write(
            midi.join(format!("song{song}.mid")),
            write_midi_with_markers(&notes, &markers),
        )
        .unwrap();
    }

    let (code, stdout, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "report.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("5 songs, 15 phrases, 3.00 phrases/song, 4.00 bars/phrase"));

    let report = std::fs::read_to_string(root.path().join("report.csv")).unwrap();
    for line in report.lines().skip(1) {
        assert!(line.contains(",ok,3,48"), "row: {line}");
    }

    // phrase-split corpora train and compose end to end
    let (code, _, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "2", "--max-clusters", "3"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["compose", "model.json", "--bars", "4", "--seed", "2", "--out-dir", "."],
        root.path(),
    );
    assert_eq!(code, 0);
}

#[test]
fn train_reports_max_context_rows_for_29_pitches() {
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    // exactly 29 distinct pitches across the corpus, no rests
    let pitches: Vec<u8> = (48..48 + 29).collect();
    for (i, chunk) in pitches.chunks(8).enumerate() {
        let mut notes: Vec<Note> = chunk
            .iter()
            .enumerate()
            .map(|(j, &p)| Note::new(Some(p), q(j as i64), q(1)))
            .collect();
        // pad to a full line ending on a triad tone
        let len = notes.len() as i64;
        notes.push(Note::new(Some(60), q(len), q(1)));
        std::fs::write(midi.join(format!("line{i}.mid")), write_midi(&notes)).unwrap();
    }

    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "r.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, stdout, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "4"],
        root.path(),
    );
    assert_eq!(code, 0);
    assert!(stdout.contains("29 pitch states"), "{stdout}");
    assert!(
        stdout.contains("max pitch contexts per off-beat at order 4: 732540"),
        "{stdout}"
    );
}

#[test]
fn ablation_flags_compose_valid_output() {
    let root = tempfile::tempdir().unwrap();
    let midi_dir = root.path().join("midi");
    write_fixture_corpus(&midi_dir);
    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "r.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "2"],
        root.path(),
    );
    assert_eq!(code, 0);

    for (dir, flags) in [
        ("plain", vec![]),
        ("nc", vec!["--no-contour"]),
        ("np", vec!["--no-parametric"]),
        ("both", vec!["--no-contour", "--no-parametric"]),
    ] {
        let mut args = vec![
            "compose", "model.json", "--bars", "4", "--count", "2", "--seed", "21",
            "--out-dir", dir,
        ];
        args.extend(&flags);
        let (code, _, stderr) = cantus(&args, root.path());
        assert_eq!(code, 0, "flags {flags:?}: {stderr}");
        for seed in [21u64, 22] {
            let bytes = std::fs::read(root.path().join(format!("{dir}/melody_seed{seed}.mid")))
                .unwrap();
            let parsed = parse_midi(&bytes, 0, MarkerKinds::default(), "out.mid").unwrap();
            let melody = &parsed.melody.phrases[0];
            assert_eq!(melody.total_duration(), q(16), "flags {flags:?}");
            let last = melody.notes.last().unwrap().pitch.unwrap();
            assert!([0u8, 4, 7].contains(&(last % 12)), "flags {flags:?}");
        }
    }

    // contour filtering changes the output; determinism holds per variant
    let plain = std::fs::read(root.path().join("plain/melody_seed21.mid")).unwrap();
    let nc = std::fs::read(root.path().join("nc/melody_seed21.mid")).unwrap();
    assert_ne!(plain, nc, "disabling the contour filter must alter this seed");
}

#[test]
fn compose_reproduces_chain_via_cli() {
    // the deterministic-chain corpus through the full binary pipeline
    let root = tempfile::tempdir().unwrap();
    let midi = root.path().join("midi");
    std::fs::create_dir_all(&midi).unwrap();
    let pitches: Vec<u8> = (57..=71).chain(std::iter::once(72)).collect();
    let notes: Vec<Note> = pitches
        .iter()
        .enumerate()
        .map(|(i, &p)| Note::new(Some(p), q(i as i64), q(1)))
        .collect();
    std::fs::write(midi.join("chain.mid"), write_midi(&notes)).unwrap();

    let (code, _, _) = cantus(
        &["ingest", "midi", "--out", "corpus.json", "--report", "r.csv"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["train", "corpus.json", "--out", "model.json", "--order", "4", "--max-clusters", "1"],
        root.path(),
    );
    assert_eq!(code, 0);
    let (code, _, _) = cantus(
        &["compose", "model.json", "--bars", "4", "--seed", "3", "--no-contour", "--out-dir", "out"],
        root.path(),
    );
    assert_eq!(code, 0);

    let bytes = std::fs::read(root.path().join("out/melody_seed3.mid")).unwrap();
    let parsed = parse_midi(&bytes, 0, MarkerKinds::default(), "out.mid").unwrap();
    let composed: Vec<u8> = parsed.melody.phrases[0]
        .notes
        .iter()
        .map(|n| n.pitch.unwrap())
        .collect();
    assert_eq!(composed, pitches);

    // a single-cluster model inspects as one diagnostics row, selected
    let (code, _, _) = cantus(&["inspect", "model.json", "--out-dir", "insp"], root.path());
    assert_eq!(code, 0);
    for name in ["pitch", "rhythm"] {
        let csv = std::fs::read_to_string(root.path().join(format!("insp/clusters_{name}.csv")))
            .unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 1, "{name}: {csv}");
        assert!(rows[0].ends_with(",true"), "{name}: {csv}");
    }
}
