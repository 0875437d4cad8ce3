//! Command implementations behind the `cantus` binary.

use std::fs;
use std::path::{Path, PathBuf};

use cantus_core::composer::{
    compose_phrase, ComposeOptions, GeneratorConfig, TONIC_TRIAD_PITCH_CLASSES,
};
use cantus_core::corpus::{ingest_files, sha256_hex, CorpusArchive, FileStatus, ReportRow};
use cantus_core::error::{Error, Result};
use cantus_core::markov::model_size;
use cantus_core::midi::{write_midi, MarkerKinds};
use cantus_core::model::{ContourData, CorpusFingerprint, ModelFile};
use cantus_core::pipeline::train_pipeline;
use cantus_core::score::Phrase;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Map pipeline errors onto the stable scripting contract:
/// 0 success, 2 input error, 3 search exhausted, 4 schema error.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::SearchExhausted => 3,
        Error::Schema { .. } | Error::Version { .. } => 4,
        _ => 2,
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn csv_field(value: &str) -> String {
    if value.contains(',') || value.contains('"') {
        format!("\"{}\"", value.replace('"', "\"\""))
    } else {
        value.to_string()
    }
}

fn report_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from("file,status,phrases,total_counts\n");
    for row in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&row.file),
            row.status.label(),
            row.phrases,
            row.total_counts,
        ));
    }
    out
}

/// Parse a directory of `.mid` / `.midi` files into the canonical corpus
/// archive plus a per-file report.
pub fn cmd_ingest(
    dir: &Path,
    corpus_out: &Path,
    report_out: &Path,
    marker_kinds: MarkerKinds,
) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            matches!(
                p.extension().and_then(|e| e.to_str()),
                Some("mid") | Some("midi")
            )
        })
        .collect();
    paths.sort();

    let mut entries = Vec::with_capacity(paths.len());
    for path in &paths {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        entries.push((name, read_file(path)?));
    }

    let result = ingest_files(&entries, marker_kinds);
    write_file(report_out, report_csv(&result.report).as_bytes())?;

    for row in &result.report {
        if let FileStatus::Error(detail) = &row.status {
            eprintln!("error: {}: {detail}", row.file);
        }
    }

    let stats = result.archive.stats();
    println!(
        "{} files: {} ok, {} skipped (polyphonic), {} errors",
        result.report.len(),
        result.archive.songs.len(),
        result.skipped_polyphonic,
        result
            .report
            .iter()
            .filter(|r| matches!(r.status, FileStatus::Error(_)))
            .count(),
    );
    println!(
        "corpus: {} songs, {} phrases, {:.2} phrases/song, {:.2} bars/phrase",
        stats.songs, stats.phrases, stats.mean_phrases_per_song, stats.mean_phrase_len_bars,
    );

    if result.archive.songs.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut json = serde_json::to_string_pretty(&result.archive).expect("archive serializes");
    json.push('\n');
    write_file(corpus_out, json.as_bytes())?;
    println!("wrote {} and {}", corpus_out.display(), report_out.display());
    Ok(())
}

fn load_archive(path: &Path) -> Result<(CorpusArchive, String)> {
    let bytes = read_file(path)?;
    let archive: CorpusArchive = serde_json::from_slice(&bytes).map_err(|e| Error::Schema {
        path: format!("{}:{}", path.display(), e.line()),
        detail: e.to_string(),
    })?;
    archive.validate()?;
    Ok((archive, sha256_hex(&bytes)))
}

/// Train both Markov models and both contours, then write the model file.
pub fn cmd_train(corpus_path: &Path, model_out: &Path, config: GeneratorConfig) -> Result<()> {
    let (archive, corpus_sha256) = load_archive(corpus_path)?;
    let phrases: Vec<&Phrase> = archive.all_phrases();
    if phrases.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let models = train_pipeline(&phrases, &config)?;

    let pitch_states = models.pitch_model.alphabet().len() as u64;
    println!(
        "trained on {} phrases: {} pitch states, {} duration states",
        phrases.len(),
        pitch_states,
        models.duration_model.alphabet().len(),
    );
    match model_size(pitch_states, config.order as u32) {
        Ok(rows) => println!("max pitch contexts per off-beat at order {}: {rows}", config.order),
        Err(_) => println!("max pitch contexts per off-beat at order {}: overflow", config.order),
    }
    println!(
        "stored rows: pitch {}, duration {}",
        models.pitch_model.row_count(),
        models.duration_model.row_count(),
    );

    for contour in [&models.pitch_contour, &models.rhythm_contour] {
        println!("{} contour clusters:", contour.feature);
        println!("  id  size  width      quality    selected");
        for d in &contour.diagnostics {
            println!(
                "  {:<3} {:<5} {:<10.6} {:<10.6} {}",
                d.id,
                d.size,
                d.width,
                d.quality,
                if d.selected { "*" } else { "" },
            );
        }
    }

    let fingerprint = CorpusFingerprint { corpus_sha256, files: archive.files.clone() };
    let file = ModelFile::from_trained(config, fingerprint, &models);
    file.save(model_out)?;
    println!("wrote {}", model_out.display());
    Ok(())
}

/// Flags of one `compose` invocation.
#[derive(Debug, Clone)]
pub struct ComposeArgs {
    pub bars: Option<u32>,
    pub count: u32,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub no_contour: bool,
    pub no_parametric: bool,
}

fn melody_csv(phrase: &Phrase) -> String {
    let mut out = String::from("note,onset,duration,pitch\n");
    for (i, note) in phrase.notes.iter().enumerate() {
        let pitch = match note.pitch {
            Some(p) => p.to_string(),
            None => "rest".to_string(),
        };
        out.push_str(&format!("{i},{},{},{pitch}\n", note.onset, note.duration));
    }
    out
}

/// Compose `count` melodies from a model file and write one MIDI + CSV pair
/// per seed.
pub fn cmd_compose(model_path: &Path, args: &ComposeArgs) -> Result<()> {
    let file = ModelFile::load(model_path)?;
    let mut models = file.to_trained()?;

    let mut config = file.config.clone();
    if let Some(bars) = args.bars {
        config.bars = bars;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }

    let options = ComposeOptions {
        use_contour: !args.no_contour,
        use_offbeat: !args.no_parametric,
    };
    if args.no_parametric {
        models.pitch_model = models.pitch_model.collapse_offbeats();
        models.duration_model = models.duration_model.collapse_offbeats();
    }

    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    for i in 0..u64::from(args.count) {
        let seed = config.seed.wrapping_add(i);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phrase = compose_phrase(
            &models.pitch_model,
            &models.duration_model,
            &models.pitch_contour,
            &models.rhythm_contour,
            &config,
            &options,
            &mut rng,
        )
        .map_err(|e| match e {
            Error::SearchExhausted => {
                eprintln!("seed {seed}: search exhausted");
                Error::SearchExhausted
            }
            other => other,
        })?;

        debug_assert!(phrase
            .notes
            .last()
            .and_then(|n| n.pitch)
            .is_some_and(|p| TONIC_TRIAD_PITCH_CLASSES.contains(&(p % 12))));

        let midi_path = args.out_dir.join(format!("melody_seed{seed}.mid"));
        let csv_path = args.out_dir.join(format!("melody_seed{seed}.csv"));
        write_file(&midi_path, &write_midi(&phrase.notes))?;
        write_file(&csv_path, melody_csv(&phrase).as_bytes())?;
        println!("wrote {} ({} notes)", midi_path.display(), phrase.notes.len());
    }
    Ok(())
}

fn cluster_csv(contour: &ContourData) -> String {
    let mut out = String::from("cluster_id,size,width,quality,selected\n");
    for c in &contour.clusters {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.id, c.size, c.width, c.quality, c.selected
        ));
    }
    out
}

fn contour_curve_csv(contour: &ContourData, cluster_id: usize) -> String {
    let n = contour.n_samples;
    let mut out = String::from("t,value\n");
    for (j, value) in contour.cluster_curve(cluster_id).iter().enumerate() {
        out.push_str(&format!("{},{}\n", j as f64 / n as f64, value));
    }
    out
}

/// Dump per-cluster diagnostics and mean-contour curves for plotting.
pub fn cmd_inspect(model_path: &Path, out_dir: &Path) -> Result<()> {
    let file = ModelFile::load(model_path)?;
    // full schema validation, not just JSON well-formedness
    let models = file.to_trained()?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    println!("model version {} (corpus {})", file.version, &file.corpus.corpus_sha256[..12]);
    println!(
        "config: order={} bars={} sigma2_pitch={} sigma2_rhythm={} gamma={} lowpass_k={} max_clusters={}",
        file.config.order,
        file.config.bars,
        file.config.sigma2_pitch,
        file.config.sigma2_rhythm,
        file.config.gamma,
        file.config.lowpass_k,
        file.config.max_clusters,
    );
    println!(
        "alphabets: {} pitch states ({} rows), {} duration states ({} rows)",
        models.pitch_model.alphabet().len(),
        models.pitch_model.row_count(),
        models.duration_model.alphabet().len(),
        models.duration_model.row_count(),
    );

    for (name, contour) in [("pitch", &file.pitch_contour), ("rhythm", &file.rhythm_contour)] {
        let clusters_path = out_dir.join(format!("clusters_{name}.csv"));
        write_file(&clusters_path, cluster_csv(contour).as_bytes())?;
        for cluster in &contour.clusters {
            let curve_path = out_dir.join(format!("contour_{name}_c{}.csv", cluster.id));
            write_file(&curve_path, contour_curve_csv(contour, cluster.id).as_bytes())?;
        }
        println!(
            "{name} contour: {} clusters, selected {} (size {})",
            contour.clusters.len(),
            contour.selected_cluster,
            contour.clusters[contour.selected_cluster].size,
        );
    }
    println!("wrote cluster and contour CSVs to {}", out_dir.display());
    Ok(())
}
