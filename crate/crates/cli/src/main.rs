use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use suturenet::dataset::{load_jigsaws, parse_transcript, preprocess, read_demonstration, write_demonstration, AmendmentTable, PrepOptions};
use suturenet::harness::{
    emit_report, evaluate_saved, generate_synthetic, load_corpus, prediction_tracks, run_experiment, timeline_csv, train_all,
    ExperimentConfig, ModelReport, SyntheticGrammar,
};
use suturenet::metrics::{aggregate_folds, parse_prediction_file, score_traces, F1Pooling, ScoreReport};
use suturenet::progress::label_progress;
use suturenet::recnet::load_checkpoint;

#[derive(Parser)]
#[command(name = "suturenet", version, about = "Gesture recognition and progress estimation for robotic suturing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest a JIGSAWS suturing directory and write preprocessed demonstrations.
    Prep {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Amendment table replacing the built-in one.
        #[arg(long)]
        amendments: Option<PathBuf>,
        /// Leave features unnormalized (for training-fold statistics).
        #[arg(long)]
        no_trial_normalization: bool,
    },
    /// Print per-frame progress stages for a gesture transcript.
    Label {
        transcript: PathBuf,
        /// Number of frames; defaults to one past the last labelled frame.
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Write a synthetic corpus of demonstration files.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        subjects: usize,
        #[arg(long, default_value_t = 16)]
        trials: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
    /// Train every fold and seed, saving logs and checkpoints.
    Train(RunArgs),
    /// Score saved checkpoints and write the fold-aggregated report.
    Eval(RunArgs),
    /// Train and evaluate in one pass.
    Run(RunArgs),
    /// Combine experiment reports into JSON and mean(std) CSV tables.
    Report {
        /// `NAME=path/to/report.json`, one per model.
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-frame label timeline of checkpoints on one demonstration.
    Timeline {
        #[arg(long)]
        demo: PathBuf,
        /// `NAME=path/to/checkpoint.bin`, one per model.
        #[arg(long = "model")]
        models: Vec<String>,
    },
    /// Score `frame truth pred` prediction files as one fold.
    Score {
        files: Vec<PathBuf>,
        /// Treat labels as progress stages and report the normalized MAE.
        #[arg(long)]
        progress: bool,
        /// Pool segmental F1 counts over all files.
        #[arg(long)]
        pooled: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set hidden=64`.
    #[arg(long = "set")]
    sets: Vec<String>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    direction: Option<String>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Run directory root.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut text = match &self.config {
            Some(p) => fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
            None => String::new(),
        };
        let mut push = |k: &str, v: String| text.push_str(&format!("\n{k} = {v}"));
        if let Some(a) = &self.arch {
            push("architecture", a.clone());
        }
        if let Some(d) = &self.direction {
            push("direction", d.clone());
        }
        if let Some(h) = self.hidden {
            push("hidden", h.to_string());
        }
        if let Some(s) = &self.seeds {
            push("seeds", s.clone());
        }
        if let Some(m) = self.max_iterations {
            push("max_iterations", m.to_string());
        }
        for kv in &self.sets {
            if !kv.contains('=') {
                bail!("--set expects key=value, got {kv:?}");
            }
            text.push('\n');
            text.push_str(kv);
        }
        Ok(ExperimentConfig::from_text(&text)?)
    }
}

fn named_path(spec: &str) -> Result<(&str, &Path)> {
    spec.split_once('=')
        .map(|(n, p)| (n, Path::new(p)))
        .with_context(|| format!("expected NAME=PATH, got {spec:?}"))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Prep {
            data,
            out,
            amendments,
            no_trial_normalization,
        } => {
            let table = match amendments {
                Some(p) => AmendmentTable::load(&p)?,
                None => AmendmentTable::builtin(),
            };
            let opts = PrepOptions {
                per_trial_normalization: !no_trial_normalization,
                ..PrepOptions::default()
            };
            fs::create_dir_all(&out)?;
            let trials = load_jigsaws(&data)?;
            for raw in &trials {
                let demo = preprocess(raw, &table, &opts)?;
                write_demonstration(&demo, &out.join(format!("{}.txt", demo.trial_id)))?;
            }
            eprintln!("wrote {} demonstrations to {}", trials.len(), out.display());
        }
        Command::Label { transcript, frames } => {
            let segments = parse_transcript(&transcript)?;
            let n = frames.unwrap_or_else(|| segments.iter().map(|s| s.end + 1).max().unwrap_or(0));
            let track = label_progress(&segments, n);
            let gestures = suturenet::gesture::segments_to_frames(&segments, n);
            for (t, (g, s)) in gestures.iter().zip(&track.stages).enumerate() {
                let g = g.map_or("-".to_string(), |g| g.to_string());
                let s = s.map_or("-".to_string(), |s| s.value().to_string());
                println!("{t} {g} {s}");
            }
        }
        Command::Synth {
            out,
            subjects,
            trials,
            seed,
        } => {
            fs::create_dir_all(&out)?;
            for t in generate_synthetic(&SyntheticGrammar::default(), subjects, trials, seed)? {
                write_demonstration(&t.demo, &out.join(format!("{}.txt", t.demo.trial_id)))?;
            }
            eprintln!("wrote {trials} synthetic demonstrations to {}", out.display());
        }
        Command::Train(args) => {
            let config = args.config()?;
            let corpus = load_corpus(&config)?;
            let runs = train_all(&config, &corpus, Some(&args.out))?;
            for r in &runs {
                let last = r.log.iterations.last().map(|i| i.csv()).unwrap_or_default();
                eprintln!("fold {} seed {}: {last}", r.subject, r.seed);
            }
        }
        Command::Eval(args) => {
            let config = args.config()?;
            let corpus = load_corpus(&config)?;
            let report = evaluate_saved(&config, &corpus, &args.out)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run(args) => {
            let config = args.config()?;
            let corpus = load_corpus(&config)?;
            let result = run_experiment(&config, &corpus, Some(&args.out))?;
            println!("{}", serde_json::to_string_pretty(&result.report)?);
        }
        Command::Report { inputs, out } => {
            let mut reports = Vec::new();
            for spec in &inputs {
                let (name, path) = named_path(spec)?;
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let report: ScoreReport = serde_json::from_str(&text)?;
                reports.push(ModelReport {
                    name: name.to_string(),
                    report,
                });
            }
            for p in emit_report(&reports, &out)? {
                eprintln!("wrote {}", p.display());
            }
        }
        Command::Timeline { demo, models } => {
            let demo = read_demonstration(&demo)?;
            let mut loaded = Vec::new();
            for spec in &models {
                let (name, path) = named_path(spec)?;
                loaded.push((name, load_checkpoint(path)?.model));
            }
            let refs: Vec<(&str, &_)> = loaded.iter().map(|(n, m)| (*n, m)).collect();
            print!("{}", timeline_csv(&prediction_tracks(&demo, &refs)?)?);
        }
        Command::Score { files, progress, pooled } => {
            if files.is_empty() {
                bail!("no prediction files given");
            }
            let mut traces = Vec::new();
            for f in &files {
                let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
                traces.push(parse_prediction_file(&text, f)?);
            }
            let pooling = if pooled { F1Pooling::Pooled } else { F1Pooling::PerDemonstration };
            let scores = score_traces(&traces, progress, pooling)?;
            let report = aggregate_folds(vec![("all".to_string(), scores)]);
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}
