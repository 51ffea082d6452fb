//! Full training runs at the default settings. Slow (tens of seconds).

use langlab::experiments::{build_training_set, run_trial_on};
use langlab::ExperimentConfig;

#[test]
fn uniform_anbn_generalizes_past_the_window() {
    let cfg = ExperimentConfig::default();
    let set = build_training_set(&cfg);
    let mut medians = Vec::new();
    for trial in 0..cfg.trials {
        let out = run_trial_on(&cfg, trial, &set, |_| {}).unwrap();
        assert_eq!(out.records.len(), cfg.epochs);
        let mut last: Vec<usize> = out.records[cfg.epochs - 10..]
            .iter()
            .map(|r| r.error_profile.e_or_beyond(1))
            .collect();
        last.sort_unstable();
        medians.push((last[4] + last[5]) as f64 / 2.0);
    }
    let beyond = medians.iter().filter(|&&m| m > 50.0).count();
    assert!(
        beyond * 2 > cfg.trials,
        "median final-10 e1 per trial: {medians:?}"
    );
}
