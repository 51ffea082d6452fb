//! Training runs with per-epoch evaluation, multi-trial sweeps and their CSV
//! output.
//!
//! An experiment samples its training set once from `data_seed`. Each trial
//! then initializes weights from `trial_seed_base + trial`, and every epoch it
//! reshuffles the set, applies one update per sample, freezes the model and
//! records its error profile.
//!
//! Sweep layout, one directory per grid cell:
//!
//! ```text
//! <out>/<cell>/config.json
//! <out>/<cell>/trial_<i>.csv        trial,epoch,loss,e1..ek,e1_censored..ek_censored
//! <out>/<cell>/aggregate.csv        epoch,mean_e1..mean_ek,censored_trials_e1..ek
//! <out>/<cell>/checkpoints/trial_<i>.ckpt
//! <out>/<cell>/errors.txt           only when a trial failed
//! ```

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{DistributionSpec, LengthSampler, LengthWindow};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, ErrorProfile, ErrorSlot, EvalConfig};
use crate::languages::{Language, Sample};
use crate::lstm::{Gradients, LstmParameters, Optimizer, OptimizerKind, Workspace};

/// One cell of a sweep grid. Serializes as a flat JSON object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Directory name inside a sweep; derived from the other fields if unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub language: Language,
    pub distribution: DistributionSpec,
    pub window: LengthWindow,
    pub hidden_units: usize,
    pub training_set_size: usize,
    pub epochs: usize,
    pub trials: usize,
    pub k: usize,
    pub max_n: usize,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub data_seed: u64,
    pub trial_seed_base: u64,
    /// Draw a fresh training set every epoch instead of reshuffling one.
    pub resample_each_epoch: bool,
    /// Vary only the recurrent matrices between trials.
    pub reseed_recurrent_only: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            name: None,
            language: Language::AnBn,
            distribution: DistributionSpec::Uniform,
            window: LengthWindow::new(1, 50).unwrap(),
            hidden_units: 2,
            training_set_size: 1000,
            epochs: 100,
            trials: 10,
            k: 5,
            max_n: 1000,
            optimizer: OptimizerKind::Adam,
            learning_rate: 1e-3,
            data_seed: 0,
            trial_seed_base: 1,
            resample_each_epoch: false,
            reseed_recurrent_only: false,
        }
    }
}

impl ExperimentConfig {
    pub fn eval(&self) -> EvalConfig {
        EvalConfig {
            k: self.k,
            max_n: self.max_n,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if self.trials == 0 {
            return bad("trials must be at least 1");
        }
        if self.training_set_size == 0 {
            return bad("training_set_size must be at least 1");
        }
        if self.hidden_units == 0 {
            return bad("hidden_units must be at least 1");
        }
        if self.k == 0 || self.max_n == 0 {
            return bad("k and max_n must be at least 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        Ok(())
    }

    /// `name` if set, else e.g. `anbn_uniform_1-50_h2`.
    pub fn label(&self) -> String {
        if let Some(name) = &self.name {
            return name.clone();
        }
        let raw = format!(
            "{}_{}_{}-{}_h{}",
            self.language,
            self.distribution,
            self.window.lo(),
            self.window.hi(),
            self.hidden_units
        );
        raw.chars()
            .map(|c| match c {
                ':' | ',' => '_',
                c => c,
            })
            .collect()
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.trial_seed_base.wrapping_add(trial as u64)
    }

    pub fn initial_parameters(&self, trial: usize) -> LstmParameters {
        let d = self.language.input_dim();
        if self.reseed_recurrent_only {
            LstmParameters::init_recurrent_reseeded(
                d,
                self.hidden_units,
                self.trial_seed_base,
                self.trial_seed(trial),
            )
        } else {
            LstmParameters::init(d, self.hidden_units, self.trial_seed(trial))
        }
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)?;
        Ok(cfg)
    }
}

/// Result of one epoch of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub trial: usize,
    /// 1-based.
    pub epoch: usize,
    /// Mean per-sample loss over the epoch's updates.
    pub training_loss: f64,
    pub error_profile: ErrorProfile,
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub records: Vec<EpochRecord>,
    pub parameters: LstmParameters,
}

/// Draws `training_set_size` samples from the configured distribution.
pub fn build_training_set(cfg: &ExperimentConfig) -> Vec<Sample> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
    draw_samples(cfg, &mut rng)
}

fn draw_samples(cfg: &ExperimentConfig, rng: &mut ChaCha8Rng) -> Vec<Sample> {
    let sampler = LengthSampler::new(cfg.distribution, cfg.window);
    (0..cfg.training_set_size)
        .map(|_| {
            cfg.language
                .generate_sample(sampler.sample(rng))
                .expect("window starts at 1 or above")
        })
        .collect()
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialOutcome> {
    let set = build_training_set(cfg);
    run_trial_on(cfg, trial, &set, |_| {})
}

/// Runs one trial on a prebuilt training set, calling `observer` after
/// every epoch.
pub fn run_trial_on(
    cfg: &ExperimentConfig,
    trial: usize,
    training_set: &[Sample],
    mut observer: impl FnMut(&EpochRecord),
) -> Result<TrialOutcome> {
    cfg.validate()?;
    let mut params = cfg.initial_parameters(trial);
    let mut opt = Optimizer::new(cfg.optimizer, &params, cfg.learning_rate);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.trial_seed(trial));
    shuffle_rng.set_stream(1);
    let mut resample_rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
    resample_rng.set_stream(1);

    let mut ws = Workspace::default();
    let mut grads = Gradients::zeros_like(&params);
    let mut fresh: Vec<Sample>;
    let mut records = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let set: &[Sample] = if cfg.resample_each_epoch && epoch > 1 {
            fresh = draw_samples(cfg, &mut resample_rng);
            &fresh
        } else {
            training_set
        };
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.shuffle(&mut shuffle_rng);

        let mut total = 0.0;
        for (i, &idx) in order.iter().enumerate() {
            let loss = params.backward_into(&set[idx], &mut ws, &mut grads);
            if !loss.is_finite() || grads.as_slice().iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite {
                    trial,
                    epoch,
                    sample: i,
                    n: set[idx].n,
                });
            }
            opt.apply_update(&mut params, &grads);
            total += loss;
        }
        let training_loss = total / set.len().max(1) as f64;

        let mut profile = evaluate(&params, cfg.language, cfg.eval());
        profile.loss_at_eval = Some(training_loss);
        let record = EpochRecord {
            trial,
            epoch,
            training_loss,
            error_profile: profile,
        };
        observer(&record);
        records.push(record);
    }
    Ok(TrialOutcome {
        records,
        parameters: params,
    })
}

/// Hidden-unit counts for the capacity sweep.
pub fn capacity_grid(language: Language) -> Vec<usize> {
    match language {
        Language::AnBn => vec![1, 2, 3, 36],
        Language::AnBnCn => vec![2, 3, 4, 36],
        Language::AnBnCnDn => vec![3, 4, 5, 36],
    }
}

/// Hidden units used by the distribution and window sweeps.
pub fn default_hidden_units(language: Language) -> usize {
    match language {
        Language::AnBn => 2,
        Language::AnBnCn => 3,
        Language::AnBnCnDn => 4,
    }
}

/// The four length distributions on window [1, 50].
pub fn distribution_sweep(language: Language, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    DistributionSpec::presets()
        .into_iter()
        .map(|distribution| ExperimentConfig {
            name: None,
            language,
            distribution,
            window: LengthWindow::new(1, 50).unwrap(),
            hidden_units: default_hidden_units(language),
            ..base.clone()
        })
        .collect()
}

/// Uniform lengths on each of the three windows.
pub fn window_sweep(language: Language, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    LengthWindow::presets()
        .into_iter()
        .map(|window| ExperimentConfig {
            name: None,
            language,
            distribution: DistributionSpec::Uniform,
            window,
            hidden_units: default_hidden_units(language),
            ..base.clone()
        })
        .collect()
}

/// Uniform lengths on [1, 50] for each capacity in [`capacity_grid`].
pub fn capacity_sweep(language: Language, base: &ExperimentConfig) -> Vec<ExperimentConfig> {
    capacity_grid(language)
        .into_iter()
        .map(|hidden_units| ExperimentConfig {
            name: None,
            language,
            distribution: DistributionSpec::Uniform,
            window: LengthWindow::new(1, 50).unwrap(),
            hidden_units,
            ..base.clone()
        })
        .collect()
}

/// Column names of the per-trial CSV for `k` error slots.
pub fn trial_csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["trial".to_string(), "epoch".into(), "loss".into()];
    h.extend((1..=k).map(|i| format!("e{i}")));
    h.extend((1..=k).map(|i| format!("e{i}_censored")));
    h
}

pub fn aggregate_csv_header(k: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string()];
    h.extend((1..=k).map(|i| format!("mean_e{i}")));
    h.extend((1..=k).map(|i| format!("censored_trials_e{i}")));
    h
}

pub fn trial_csv(records: &[EpochRecord], k: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(trial_csv_header(k))?;
    for r in records {
        let mut row = vec![
            r.trial.to_string(),
            r.epoch.to_string(),
            r.training_loss.to_string(),
        ];
        let slots = &r.error_profile.errors;
        row.extend(
            slots
                .iter()
                .map(|s| s.value().map(|n| n.to_string()).unwrap_or_default()),
        );
        row.extend(
            slots
                .iter()
                .map(|s| u8::from(*s == ErrorSlot::Censored).to_string()),
        );
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

/// One aggregate row: means over trials with a concrete value, plus how many
/// trials were censored in each slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub epoch: usize,
    pub mean: Vec<Option<f64>>,
    pub censored_trials: Vec<usize>,
}

/// Aggregates trials epoch by epoch. Trials shorter than others simply stop
/// contributing.
pub fn aggregate(trials: &[Vec<EpochRecord>], k: usize) -> Vec<AggregateRow> {
    let epochs = trials.iter().map(Vec::len).max().unwrap_or(0);
    (0..epochs)
        .map(|e| {
            let rows: Vec<&EpochRecord> = trials.iter().filter_map(|t| t.get(e)).collect();
            let mut mean = Vec::with_capacity(k);
            let mut censored_trials = Vec::with_capacity(k);
            for slot in 1..=k {
                let values: Vec<f64> = rows
                    .iter()
                    .filter_map(|r| r.error_profile.e(slot))
                    .map(|n| n as f64)
                    .collect();
                censored_trials.push(rows.len() - values.len());
                mean.push(if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                });
            }
            AggregateRow {
                epoch: rows.first().map(|r| r.epoch).unwrap_or(e + 1),
                mean,
                censored_trials,
            }
        })
        .collect()
}

pub fn aggregate_csv(rows: &[AggregateRow], k: usize) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(aggregate_csv_header(k))?;
    for r in rows {
        let mut row = vec![r.epoch.to_string()];
        row.extend(
            r.mean
                .iter()
                .map(|m| m.map(|v| v.to_string()).unwrap_or_default()),
        );
        row.extend(r.censored_trials.iter().map(|c| c.to_string()));
        w.write_record(&row)?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub label: String,
    pub dir: PathBuf,
    pub completed_trials: usize,
    pub failures: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub cells: Vec<CellSummary>,
}

impl SweepSummary {
    pub fn failed_trials(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }
}

/// Runs every cell × trial (in parallel) and writes results under `out`.
/// A failing trial is logged in its cell's `errors.txt` and skipped in the
/// aggregate; only I/O errors on `out` itself abort the sweep.
pub fn run_sweep(grid: &[ExperimentConfig], out: &Path) -> Result<SweepSummary> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut seen = HashSet::new();
    let labels: Vec<String> = grid
        .iter()
        .map(|cfg| {
            let base = cfg.label();
            let mut label = base.clone();
            let mut i = 2;
            while !seen.insert(label.clone()) {
                label = format!("{base}-{i}");
                i += 1;
            }
            label
        })
        .collect();

    for (cfg, label) in grid.iter().zip(&labels) {
        let dir = out.join(label);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_atomic(
            &dir.join("config.json"),
            serde_json::to_string_pretty(cfg)?.as_bytes(),
        )?;
    }

    let sets: Vec<Vec<Sample>> = grid.iter().map(build_training_set).collect();
    let jobs: Vec<(usize, usize)> = grid
        .iter()
        .enumerate()
        .filter(|(_, cfg)| cfg.validate().is_ok())
        .flat_map(|(c, cfg)| (0..cfg.trials).map(move |t| (c, t)))
        .collect();

    let results: Vec<(usize, usize, Result<Vec<EpochRecord>>)> = jobs
        .into_par_iter()
        .map(|(c, t)| {
            let cfg = &grid[c];
            let dir = out.join(&labels[c]);
            let result = run_trial_on(cfg, t, &sets[c], |_| {}).and_then(|outcome| {
                write_atomic(
                    &dir.join(format!("trial_{t}.csv")),
                    &trial_csv(&outcome.records, cfg.k)?,
                )?;
                outcome
                    .parameters
                    .save(dir.join("checkpoints").join(format!("trial_{t}.ckpt")))?;
                Ok(outcome.records)
            });
            (c, t, result)
        })
        .collect();

    let mut cells = Vec::with_capacity(grid.len());
    for (c, cfg) in grid.iter().enumerate() {
        let dir = out.join(&labels[c]);
        let mut failures = Vec::new();
        if let Err(e) = cfg.validate() {
            failures.push(e.to_string());
        }
        let mut trials = Vec::new();
        for (_, t, result) in results.iter().filter(|(cc, _, _)| *cc == c) {
            match result {
                Ok(records) => trials.push(records.clone()),
                Err(e) => failures.push(format!("trial {t}: {e}")),
            }
        }
        write_atomic(
            &dir.join("aggregate.csv"),
            &aggregate_csv(&aggregate(&trials, cfg.k), cfg.k)?,
        )?;
        if !failures.is_empty() {
            write_atomic(
                &dir.join("errors.txt"),
                (failures.join("\n") + "\n").as_bytes(),
            )?;
        }
        cells.push(CellSummary {
            label: labels[c].clone(),
            dir,
            completed_trials: trials.len(),
            failures,
        });
    }
    Ok(SweepSummary { cells })
}
