//! Leave-one-user-out experiments: corpus loading, fold loops over seeds,
//! run directories and score aggregation.

mod config;
mod eval;
mod folds;
mod report;
mod synth;
mod train;

use std::fs;
use std::path::{Path, PathBuf};

pub use config::{Architecture, Balancing, DataSource, ExperimentConfig, Normalization, Optimizer, DATA_ENV};
pub use eval::{evaluate, predict_fold, score_model};
pub use folds::{build_folds, build_folds_by_subject, prepare_fold, FeatureStats, Fold, FoldData, FoldPlan};
pub use report::{emit_report, format_csv, timeline_csv, ModelReport, Track};
pub use synth::{generate_synthetic, SyntheticGrammar, SyntheticTrial, SUBJECTS};
pub use train::{train, IterationLog, Snapshot, TrainLog, TrainedRun, TRAIN_LOG_HEADER};

use crate::dataset::{load_jigsaws, preprocess, read_demonstration, AmendmentTable, Demonstration, PrepOptions};
use crate::error::{Error, Result};
use crate::metrics::{aggregate_folds, ScoreReport};
use crate::recnet::{load_checkpoint, save_checkpoint, SeqModel};

/// Demonstrations named by the configuration's data source.
pub fn load_corpus(config: &ExperimentConfig) -> Result<Vec<Demonstration>> {
    let per_trial = config.normalization == Normalization::PerTrial;
    match &config.data {
        DataSource::Jigsaws { path } => {
            let root = match path {
                Some(p) => p.clone(),
                None => std::env::var_os(DATA_ENV)
                    .map(PathBuf::from)
                    .ok_or_else(|| Error::Config(format!("no dataset path given and {DATA_ENV} is unset")))?,
            };
            let table = AmendmentTable::builtin();
            let opts = PrepOptions {
                per_trial_normalization: per_trial,
                ..PrepOptions::default()
            };
            load_jigsaws(&root)?.iter().map(|raw| preprocess(raw, &table, &opts)).collect()
        }
        DataSource::Prepared { path } => {
            let mut files: Vec<PathBuf> = fs::read_dir(path)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            files.sort();
            files.iter().map(|p| read_demonstration(p)).collect()
        }
        DataSource::Synthetic {
            grammar,
            subjects,
            trials,
            seed,
        } => {
            let grammar = SyntheticGrammar {
                per_trial_normalization: per_trial,
                ..grammar.clone()
            };
            Ok(generate_synthetic(&grammar, *subjects, *trials, *seed)?
                .into_iter()
                .map(|t| t.demo)
                .collect())
        }
    }
}

/// History of one fold and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub subject: char,
    pub seed: u64,
    pub log: TrainLog,
    pub run: TrainedRun,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub report: ScoreReport,
    pub runs: Vec<RunRecord>,
}

/// Directory of one fold inside a seed's run directory.
pub fn fold_dir(config: &ExperimentConfig, root: &Path, seed: u64, subject: char) -> PathBuf {
    config.run_dir(root, seed).join(format!("fold-{subject}"))
}

fn checkpoint_path(dir: &Path, iteration: usize) -> PathBuf {
    dir.join(format!("ckpt-iter{iteration}.bin"))
}

fn write_logs(dir: &Path, log: &TrainLog) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("train_log.csv"), log.loss_csv())?;
    if !log.gradnorm.is_empty() {
        fs::write(dir.join("gradnorm_log.csv"), log.gradnorm_csv())?;
    }
    Ok(())
}

fn train_fold(config: &ExperimentConfig, data: &FoldData, seed: u64, out: Option<&Path>) -> Result<RunRecord> {
    let mut log = TrainLog::default();
    let result = train(config, &data.train, seed, &mut log);
    if let Some(root) = out {
        let dir = fold_dir(config, root, seed, data.subject);
        write_logs(&dir, &log)?;
        fs::write(config.run_dir(root, seed).join("config.txt"), config.to_text())?;
        if let Ok(run) = &result {
            for snap in &run.snapshots {
                save_checkpoint(&snap.model, seed, &checkpoint_path(&dir, snap.iteration))?;
            }
        }
    }
    Ok(RunRecord {
        subject: data.subject,
        seed,
        log,
        run: result?,
    })
}

/// Trains every fold and seed, writing logs and checkpoints under `out`.
pub fn train_all(config: &ExperimentConfig, corpus: &[Demonstration], out: Option<&Path>) -> Result<Vec<RunRecord>> {
    config.validate()?;
    let plan = build_folds(corpus)?;
    let mut records = Vec::new();
    for fold in &plan.folds {
        let data = prepare_fold(corpus, fold, config.normalization == Normalization::TrainingFold)?;
        for &seed in &config.seeds {
            records.push(train_fold(config, &data, seed, out)?);
        }
    }
    Ok(records)
}

/// Trains and evaluates in one pass: each fold's score averages all test
/// iterations of all seeds, then folds are aggregated.
pub fn run_experiment(config: &ExperimentConfig, corpus: &[Demonstration], out: Option<&Path>) -> Result<ExperimentResult> {
    config.validate()?;
    let plan = build_folds(corpus)?;
    let mut per_fold = Vec::new();
    let mut runs = Vec::new();
    for fold in &plan.folds {
        let data = prepare_fold(corpus, fold, config.normalization == Normalization::TrainingFold)?;
        let mut fold_runs = Vec::new();
        for &seed in &config.seeds {
            fold_runs.push(train_fold(config, &data, seed, out)?);
        }
        let models = fold_runs.iter().flat_map(|r| r.run.snapshots.iter().map(|s| &s.model));
        per_fold.push((fold.subject.to_string(), evaluate(models, &data.test, config.f1_pooling)?));
        runs.extend(fold_runs);
    }
    let report = aggregate_folds(per_fold);
    if let Some(root) = out {
        write_report(config, root, &report)?;
    }
    Ok(ExperimentResult { report, runs })
}

fn write_report(config: &ExperimentConfig, root: &Path, report: &ScoreReport) -> Result<PathBuf> {
    let path = root.join(format!("{}-{}-report.json", config.architecture.name(), config.hash()));
    fs::create_dir_all(root)?;
    fs::write(&path, serde_json::to_string_pretty(report)?)?;
    Ok(path)
}

/// Evaluates checkpoints previously written by [`train_all`] and writes the
/// aggregated report next to the run directories.
pub fn evaluate_saved(config: &ExperimentConfig, corpus: &[Demonstration], out: &Path) -> Result<ScoreReport> {
    config.validate()?;
    let plan = build_folds(corpus)?;
    let mut per_fold = Vec::new();
    for fold in &plan.folds {
        let data = prepare_fold(corpus, fold, config.normalization == Normalization::TrainingFold)?;
        let mut models: Vec<SeqModel> = Vec::new();
        for &seed in &config.seeds {
            let dir = fold_dir(config, out, seed, fold.subject);
            for &it in &config.test_iterations {
                models.push(load_checkpoint(&checkpoint_path(&dir, it))?.model);
            }
        }
        per_fold.push((fold.subject.to_string(), evaluate(&models, &data.test, config.f1_pooling)?));
    }
    let report = aggregate_folds(per_fold);
    write_report(config, out, &report)?;
    Ok(report)
}

/// Truth and predicted label tracks of one demonstration for timeline
/// plots. Unlabelled truth frames show as `-`.
pub fn prediction_tracks(demo: &Demonstration, models: &[(&str, &SeqModel)]) -> Result<Vec<Track>> {
    let mut tracks = vec![
        Track {
            name: "truth_action".into(),
            labels: demo.gestures.iter().map(|g| g.map_or("-".into(), |g| g.to_string())).collect(),
        },
        Track {
            name: "truth_progress".into(),
            labels: demo.progress.iter().map(|s| s.map_or("-".into(), |s| s.value().to_string())).collect(),
        },
    ];
    for (name, model) in models {
        let p = model.predict(&demo.features)?;
        if let Some(actions) = p.actions {
            tracks.push(Track {
                name: format!("{name}_action"),
                labels: actions.iter().map(ToString::to_string).collect(),
            });
        }
        if let Some(progress) = p.progress {
            tracks.push(Track {
                name: format!("{name}_progress"),
                labels: progress.iter().map(|s| s.value().to_string()).collect(),
            });
        }
    }
    Ok(tracks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(arch: Architecture) -> ExperimentConfig {
        let mut c = ExperimentConfig::desk(arch);
        c.hidden = 4;
        c.max_iterations = 3;
        c.lr_decay_at = 2;
        c.test_iterations = vec![2, 3];
        c.seeds = vec![1, 2];
        c.data = DataSource::Synthetic {
            grammar: SyntheticGrammar {
                cycles: 1,
                ..SyntheticGrammar::default()
            },
            subjects: 3,
            trials: 6,
            seed: 9,
        };
        c
    }

    #[test]
    fn saved_checkpoints_reproduce_in_memory_scores() {
        let config = tiny(Architecture::APr);
        let corpus = load_corpus(&config).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let live = run_experiment(&config, &corpus, Some(dir.path())).unwrap();
        assert_eq!(live.report.folds.len(), 3);
        assert_eq!(live.runs.len(), 6);
        let saved = evaluate_saved(&config, &corpus, dir.path()).unwrap();
        assert_eq!(saved, live.report);
        let fold = fold_dir(&config, dir.path(), 2, 'C');
        assert!(fold.join("train_log.csv").exists());
        assert!(fold.join("gradnorm_log.csv").exists());
        assert!(fold.join("ckpt-iter3.bin").exists());
        let text = fs::read_to_string(config.run_dir(dir.path(), 2).join("config.txt")).unwrap();
        assert_eq!(ExperimentConfig::from_text(&text).unwrap(), config);
    }

    #[test]
    fn action_only_model_never_balances() {
        let config = tiny(Architecture::A);
        let corpus = load_corpus(&config).unwrap();
        let result = run_experiment(&config, &corpus, None).unwrap();
        assert!(result.runs.iter().all(|r| r.log.gradnorm.is_empty()));
        assert!(result.report.mean.progress_accuracy.is_none());
        assert!(result.report.mean.accuracy.is_some());
    }

    #[test]
    fn training_fold_normalization_runs() {
        let mut config = tiny(Architecture::Poc);
        config.normalization = Normalization::TrainingFold;
        let corpus = load_corpus(&config).unwrap();
        let result = run_experiment(&config, &corpus, None).unwrap();
        assert!(result.report.mean.progress_nmae.is_some());
        assert!(result.report.mean.accuracy.is_none());
    }

    #[test]
    fn missing_dataset_path_is_config_error() {
        let mut config = ExperimentConfig::paper(Architecture::APc);
        config.data = DataSource::Jigsaws {
            path: Some("/nonexistent/jigsaws".into()),
        };
        assert!(load_corpus(&config).is_err());
    }

    #[test]
    fn tracks_cover_every_head() {
        let config = tiny(Architecture::APc);
        let corpus = load_corpus(&config).unwrap();
        let model = SeqModel::new(config.model_config(corpus[0].dims()), 1);
        let tracks = prediction_tracks(&corpus[0], &[("APc", &model)]).unwrap();
        let names: Vec<&str> = tracks.iter().map(|t| t.name.as_str()).collect();
        assert_eq!(names, vec!["truth_action", "truth_progress", "APc_action", "APc_progress"]);
        assert!(timeline_csv(&tracks).unwrap().starts_with("frame,truth_action"));
    }
}
