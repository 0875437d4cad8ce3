use std::path::PathBuf;
use std::process::ExitCode;

use cantus::{cmd_compose, cmd_ingest, cmd_inspect, cmd_train, exit_code, ComposeArgs};
use cantus_core::composer::GeneratorConfig;
use cantus_core::midi::MarkerKinds;
use clap::{Args, Parser, Subcommand};

/// Learn melodic style from a phrase-annotated MIDI corpus and compose new
/// fixed-length phrases from it.
#[derive(Parser)]
#[command(name = "cantus", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a directory of MIDI files into a corpus archive + report CSV
    Ingest {
        /// Directory containing .mid / .midi files
        dir: PathBuf,
        /// Corpus archive to write
        #[arg(long, default_value = "corpus.json")]
        out: PathBuf,
        /// Per-file report CSV to write
        #[arg(long, default_value = "corpus_report.csv")]
        report: PathBuf,
        /// Meta event kinds that mark phrase boundaries: text,marker
        #[arg(long, default_value = "text,marker", value_parser = MarkerKinds::parse)]
        marker_types: MarkerKinds,
    },
    /// Train Markov models and contours from a corpus archive
    Train {
        /// Corpus archive from `ingest`
        corpus: PathBuf,
        /// Model file to write
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigFlags,
    },
    /// Compose melodies from a trained model
    Compose {
        /// Model file from `train`
        model: PathBuf,
        /// Phrase length in 4/4 bars (default: the trained config)
        #[arg(long)]
        bars: Option<u32>,
        /// How many melodies to compose (seeds seed, seed+1, ...)
        #[arg(long, default_value_t = 1)]
        count: u32,
        /// Base RNG seed (default: the trained config)
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for MIDI + CSV files
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Disable the Gaussian contour filters
        #[arg(long)]
        no_contour: bool,
        /// Collapse all off-beat bins: pure higher-order Markov baseline
        #[arg(long)]
        no_parametric: bool,
    },
    /// Dump cluster diagnostics and mean contour curves from a model
    Inspect {
        /// Model file from `train`
        model: PathBuf,
        /// Output directory for the CSVs
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct ConfigFlags {
    /// Markov order m
    #[arg(long, default_value_t = 4)]
    order: usize,
    /// Default phrase length in 4/4 bars
    #[arg(long, default_value_t = 4)]
    bars: u32,
    /// Gaussian variance for the melody contour filter (semitones²)
    #[arg(long, default_value_t = 4.0)]
    sigma2_pitch: f64,
    /// Gaussian variance for the rhythm contour filter (quarter-notes²)
    #[arg(long, default_value_t = 0.33)]
    sigma2_rhythm: f64,
    /// Cluster-selection weight between size and contour width
    #[arg(long, default_value_t = 3.0)]
    gamma: f64,
    /// Retained FFT coefficients per contour
    #[arg(long, default_value_t = 6)]
    lowpass_k: usize,
    /// Dendrogram cut: maximum number of contour clusters
    #[arg(long, default_value_t = 17)]
    max_clusters: usize,
    /// Default RNG seed for composition
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl From<ConfigFlags> for GeneratorConfig {
    fn from(f: ConfigFlags) -> Self {
        GeneratorConfig {
            order: f.order,
            bars: f.bars,
            sigma2_pitch: f.sigma2_pitch,
            sigma2_rhythm: f.sigma2_rhythm,
            gamma: f.gamma,
            lowpass_k: f.lowpass_k,
            max_clusters: f.max_clusters,
            seed: f.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest { dir, out, report, marker_types } => {
            cmd_ingest(&dir, &out, &report, marker_types)
        }
        Command::Train { corpus, out, config } => cmd_train(&corpus, &out, config.into()),
        Command::Compose { model, bars, count, seed, out_dir, no_contour, no_parametric } => {
            cmd_compose(
                &model,
                &ComposeArgs { bars, count, seed, out_dir, no_contour, no_parametric },
            )
        }
        Command::Inspect { model, out_dir } => cmd_inspect(&model, &out_dir),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
