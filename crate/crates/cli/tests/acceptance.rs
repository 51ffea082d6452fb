//! Acceptance suite (custom harness). Each criterion prints one
//! `ACCEPTANCE <id> PASS|FAIL` line with the measured quantity next to its
//! pinned threshold; the process exits nonzero if any criterion fails.
//!
//! Training-based checks are deterministic for fixed seeds; their runs are
//! archived under `$CARGO_TARGET_TMPDIR/acceptance/` for inspection.

use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;

use langlab::distributions::LengthSampler;
use langlab::evaluation::{evaluate, Acceptor, ErrorSlot};
use langlab::experiments::{build_training_set, run_trial_on, trial_csv, write_atomic};
use langlab::tracing::{
    detect_counters, phase_correlations, trace_csv, trace_sequence, PhaseSegmentation,
};
use langlab::{
    DistributionSpec, EpochRecord, EvalConfig, ExperimentConfig, Language, LengthWindow,
    LstmParameters,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

// Pinned tolerances and thresholds.
const GRAD_EPS: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-4;
const PMF_SUM_TOL: f64 = 1e-9;
const CHI_SQUARE_ALPHA: f64 = 0.001;
const CHI_SQUARE_DRAWS: usize = 100_000;
const WINDOW_HI: usize = 50;
const DISSOCIATION_GAP: usize = 5;
const SHORT_SIDE_MIN_ACCEPTED: usize = 10;
const COUNTER_RHO: f64 = 0.9;
const TRIALS: usize = 5;

fn report(id: u32, title: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!(
        "ACCEPTANCE {id:>2} {} {title}: {}",
        if pass { "PASS" } else { "FAIL" },
        detail.as_ref()
    );
    pass
}

fn archive_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

struct Trained {
    records: Vec<EpochRecord>,
    parameters: LstmParameters,
}

/// Runs `TRIALS` trials of `cfg` and archives their CSVs and checkpoints.
fn train_all(cfg: &ExperimentConfig, name: &str) -> Vec<Trained> {
    let dir = archive_dir(name);
    write_atomic(
        &dir.join("config.json"),
        serde_json::to_string_pretty(cfg).unwrap().as_bytes(),
    )
    .unwrap();
    let set = build_training_set(cfg);
    (0..cfg.trials)
        .map(|t| {
            let out = run_trial_on(cfg, t, &set, |_| {}).unwrap();
            write_atomic(
                &dir.join(format!("trial_{t}.csv")),
                &trial_csv(&out.records, cfg.k).unwrap(),
            )
            .unwrap();
            out.parameters
                .save(dir.join(format!("trial_{t}.ckpt")))
                .unwrap();
            Trained {
                records: out.records,
                parameters: out.parameters,
            }
        })
        .collect()
}

fn c01_gradient_correctness() -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let lang = Language::ALL[rng.random_range(0..3)];
        let hidden = rng.random_range(1..=5);
        let n = rng.random_range(1..=4);
        let p = LstmParameters::init(lang.input_dim(), hidden, rng.random());
        let sample = lang.generate_sample(n).unwrap();
        let (exact, _) = p.backward(&sample);
        let numeric = p.finite_difference_grad(&sample, GRAD_EPS).unwrap();
        worst = worst.max(exact.max_relative_error(&numeric, GRAD_FLOOR));
    }
    let pass = worst <= GRAD_REL_TOL;
    report(
        1,
        "gradient correctness",
        pass,
        format!("max relative error {worst:.2e} over 20 configs (limit {GRAD_REL_TOL:.0e})"),
    )
}

/// Legal next symbols after each prefix, found by asking which one-symbol
/// extensions are still prefixes of some member (or are a member).
fn legal_continuations(lang: Language, input: &[langlab::Symbol]) -> Vec<langlab::SymbolSet> {
    let letters = &langlab::Symbol::ALL[..lang.input_dim()];
    let is_prefix = |s: &[langlab::Symbol]| -> bool {
        // A member prefix is a^i then non-decreasing blocks of later letters,
        // each no longer than the a-block, with all but the last complete.
        let a = s.iter().take_while(|&&x| x == letters[0]).count();
        if a == 0 {
            return s.is_empty();
        }
        let mut rest = &s[a..];
        for &l in &letters[1..] {
            let run = rest.iter().take_while(|&&x| x == l).count();
            if run > a {
                return false;
            }
            rest = &rest[run..];
            if run < a {
                return rest.is_empty();
            }
        }
        rest.is_empty()
    };
    let is_member = |s: &[langlab::Symbol]| -> bool {
        let a = s.iter().take_while(|&&x| x == letters[0]).count();
        a > 0 && s.len() == a * letters.len() && is_prefix(s)
    };
    (1..=input.len())
        .map(|len| {
            let mut set = langlab::SymbolSet::EMPTY;
            for &l in letters {
                let mut ext = input[..len].to_vec();
                ext.push(l);
                if is_prefix(&ext) {
                    set = set.with(l);
                }
            }
            if is_member(&input[..len]) {
                set = set.with(langlab::Symbol::End);
            }
            set
        })
        .collect()
}

fn c02_target_oracle() -> bool {
    let mut mismatches = Vec::new();
    for lang in Language::ALL {
        for n in 1..=25 {
            let s = lang.generate_sample(n).unwrap();
            if s.targets != legal_continuations(lang, &s.input) {
                mismatches.push(format!("{lang} n={n}"));
            }
        }
    }
    let pass = mismatches.is_empty();
    report(
        2,
        "target-scheme oracle",
        pass,
        format!("75 samples (3 languages, n<=25), mismatches {mismatches:?}"),
    )
}

fn chi_square_p(spec: DistributionSpec, w: LengthWindow, seed: u64) -> f64 {
    let sampler = LengthSampler::new(spec, w);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![0usize; w.size()];
    for _ in 0..CHI_SQUARE_DRAWS {
        counts[sampler.sample(&mut rng) - w.lo()] += 1;
    }
    // Pool neighbouring bins until each expects at least 5 draws.
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for (i, &c) in counts.iter().enumerate() {
        o += c as f64;
        e += spec.pmf(w, w.lo() + i) * CHI_SQUARE_DRAWS as f64;
        if e >= 5.0 {
            bins.push((o, e));
            (o, e) = (0.0, 0.0);
        }
    }
    if let Some(last) = bins.last_mut() {
        last.0 += o;
        last.1 += e;
    }
    let stat: f64 = bins.iter().map(|(o, e)| (o - e) * (o - e) / e).sum();
    1.0 - ChiSquared::new((bins.len() - 1) as f64).unwrap().cdf(stat)
}

fn c03_distribution_fidelity() -> bool {
    let mut worst_sum: f64 = 0.0;
    let mut min_p: f64 = 1.0;
    let mut shapes = true;
    let mut seed = 100;
    for w in LengthWindow::presets() {
        for spec in DistributionSpec::presets() {
            let total: f64 = (w.lo()..=w.hi()).map(|n| spec.pmf(w, n)).sum();
            worst_sum = worst_sum.max((total - 1.0).abs());
            min_p = min_p.min(chi_square_p(spec, w, seed));
            seed += 1;
        }
        let argmax = |spec: DistributionSpec| {
            (w.lo()..=w.hi())
                .max_by(|&a, &b| spec.pmf(w, a).total_cmp(&spec.pmf(w, b)))
                .unwrap()
        };
        let u = DistributionSpec::U_SHAPED;
        let mid = (w.lo() + w.hi()) / 2;
        shapes &= argmax(DistributionSpec::RIGHT_TAILED) == w.lo()
            && argmax(DistributionSpec::LEFT_TAILED) == w.hi()
            && u.pmf(w, w.lo()) > u.pmf(w, mid)
            && u.pmf(w, w.hi()) > u.pmf(w, mid);
    }
    let pass = worst_sum <= PMF_SUM_TOL && min_p > CHI_SQUARE_ALPHA && shapes;
    report(
        3,
        "distribution fidelity",
        pass,
        format!(
            "max |Σpmf−1| {worst_sum:.1e} (limit {PMF_SUM_TOL:.0e}), min chi-square p {min_p:.4} (> {CHI_SQUARE_ALPHA}), shapes {}",
            if shapes { "ok" } else { "wrong" }
        )
    )
}

fn c04_evaluator_semantics() -> bool {
    let cfg = EvalConfig::default();
    let planted = [3, 7, 8, 20, 31];
    let a = evaluate(
        &|_: Language, n: usize| !planted.contains(&n),
        Language::AnBn,
        cfg,
    );
    let b = evaluate(&|_: Language, _| true, Language::AnBn, cfg);
    let c = evaluate(&|_: Language, _| false, Language::AnBn, cfg);
    let pass = a.failures().collect::<Vec<_>>() == planted
        && b.errors == vec![ErrorSlot::Censored; 5]
        && c.failures().collect::<Vec<_>>() == [1, 2, 3, 4, 5];
    report(
        4,
        "evaluator semantics",
        pass,
        format!("planted: {a} | none: {b} | all: {c}"),
    )
}

fn c5_models() -> &'static Vec<Trained> {
    static MODELS: OnceLock<Vec<Trained>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let cfg = ExperimentConfig {
            language: Language::AnBn,
            distribution: DistributionSpec::Uniform,
            window: LengthWindow::new(1, 50).unwrap(),
            hidden_units: 2,
            training_set_size: 1000,
            epochs: 200,
            trials: TRIALS,
            ..ExperimentConfig::default()
        };
        train_all(&cfg, "c05_anbn_uniform_h2")
    })
}

fn c05_desk_scale_generalization() -> bool {
    let finals: Vec<usize> = c5_models()
        .iter()
        .map(|t| t.records.last().unwrap().error_profile.e_or_beyond(1))
        .collect();
    let beyond = finals.iter().filter(|&&e1| e1 > WINDOW_HI).count();
    let pass = beyond * 2 > TRIALS;
    report(
        5,
        "desk-scale generalization",
        pass,
        format!(
            "final e1 per trial {finals:?}; {beyond}/{TRIALS} exceed {WINDOW_HI} (need a majority)"
        ),
    )
}

fn c06_e1_e5_dissociation() -> bool {
    let cfg = ExperimentConfig {
        language: Language::AnBnCn,
        distribution: DistributionSpec::LEFT_TAILED,
        window: LengthWindow::new(1, 50).unwrap(),
        hidden_units: 3,
        epochs: 300,
        learning_rate: 0.01,
        trials: TRIALS,
        ..ExperimentConfig::default()
    };
    let trials = train_all(&cfg, "c06_anbncn_left_tailed_h3");
    let first_dissociated: Vec<Option<usize>> = trials
        .iter()
        .map(|t| {
            t.records
                .iter()
                .find(|r| {
                    let p = &r.error_profile;
                    p.e(1).is_some_and(|e1| {
                        e1 < WINDOW_HI && p.e_or_beyond(5) > e1 + DISSOCIATION_GAP
                    })
                })
                .map(|r| r.epoch)
        })
        .collect();
    let hits = first_dissociated.iter().flatten().count();
    let pass = hits * 2 > TRIALS;
    report(
        6,
        "e1/e5 dissociation",
        pass,
        format!(
            "first epoch with e1<{WINDOW_HI} and e5>e1+{DISSOCIATION_GAP} per trial {first_dissociated:?}; {hits}/{TRIALS} (need a majority)"
        )
    )
}

fn c07_short_side_generalization() -> bool {
    let cfg = ExperimentConfig {
        language: Language::AnBn,
        distribution: DistributionSpec::Uniform,
        window: LengthWindow::new(50, 100).unwrap(),
        hidden_units: 2,
        epochs: 200,
        trials: TRIALS,
        ..ExperimentConfig::default()
    };
    let trials = train_all(&cfg, "c07_anbn_uniform_50_100_h2");
    let accepted: Vec<usize> = trials
        .iter()
        .map(|t| {
            (1..WINDOW_HI)
                .filter(|&n| t.parameters.accepts(Language::AnBn, n))
                .count()
        })
        .collect();
    let pass = accepted.iter().any(|&a| a >= SHORT_SIDE_MIN_ACCEPTED);
    report(
        7,
        "short-side generalization",
        pass,
        format!("accepted n<{WINDOW_HI} per trial {accepted:?} (need one trial with >= {SHORT_SIDE_MIN_ACCEPTED})")
    )
}

fn c08_zero_weight_case() -> bool {
    let mut ok = true;
    let mut checked = 0;
    for lang in Language::ALL {
        let p = LstmParameters::zeros(lang.input_dim(), 3);
        for n in [1, 2, 7, 30] {
            let s = lang.generate_sample(n).unwrap();
            let run = p.run_sequence(&s);
            ok &= run.outputs.iter().flatten().all(|&y| y == 0.5);
            ok &= run.loss == 0.25 * s.input.len() as f64;
            ok &= p.loss(&s) == run.loss && p.backward(&s).1 == run.loss;
            checked += 1;
        }
    }
    report(
        8,
        "zero-weight analytic case",
        ok,
        format!("{checked} samples: outputs == 0.5 and loss == 0.25·len exactly"),
    )
}

fn c09_reproducibility() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str| {
        let status = Command::new(env!("CARGO_BIN_EXE_langlab"))
            .args([
                "train",
                "--language",
                "anbncn",
                "--hidden",
                "3",
                "--epochs",
                "3",
                "--samples",
                "200",
            ])
            .args([
                "--dist",
                "u-shaped",
                "--seed",
                "11",
                "--data-seed",
                "5",
                "--max-n",
                "200",
                "--out",
            ])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(
            status.status.success(),
            "{}",
            String::from_utf8_lossy(&status.stderr)
        );
    };
    run("a");
    run("b");
    let files = ["trial_0.csv", "trial_0.ckpt", "config.json"];
    let same: Vec<bool> = files
        .iter()
        .map(|f| {
            std::fs::read(dir.path().join("a").join(f)).unwrap()
                == std::fs::read(dir.path().join("b").join(f)).unwrap()
        })
        .collect();
    let pass = same.iter().all(|&s| s);
    report(
        9,
        "reproducibility",
        pass,
        format!("two `train` runs, identical bytes for {files:?}: {same:?}"),
    )
}

fn c10_counting_trace() -> bool {
    let n = WINDOW_HI;
    let dir = archive_dir("c10_traces");
    let mut found = Vec::new();
    let mut summary = Vec::new();
    for (t, trained) in c5_models().iter().enumerate() {
        let trace = trace_sequence(&trained.parameters, Language::AnBn, n).unwrap();
        write_atomic(
            &dir.join(format!("trial_{t}_n{n}.csv")),
            &trace_csv(&trace).unwrap(),
        )
        .unwrap();
        // The a-phase alone, as a single segment.
        let a_phase = &trace[..n];
        let whole = PhaseSegmentation::new(Vec::new()).unwrap();
        let rho: Vec<String> = phase_correlations(a_phase, &whole)
            .iter()
            .map(|r| format!("{:+.2}", r[0]))
            .collect();
        summary.push(format!("t{t}:[{}]", rho.join(",")));
        found.extend(
            detect_counters(a_phase, &whole, COUNTER_RHO)
                .into_iter()
                .map(|c| (t, c.unit)),
        );
    }
    let pass = !found.is_empty();
    report(
        10,
        "counting trace",
        pass,
        format!(
            "a-phase ρ per unit {}; (trial, unit) with |ρ| >= {COUNTER_RHO}: {found:?}",
            summary.join(" ")
        ),
    )
}

fn main() {
    let criteria: [fn() -> bool; 10] = [
        c01_gradient_correctness,
        c02_target_oracle,
        c03_distribution_fidelity,
        c04_evaluator_semantics,
        c05_desk_scale_generalization,
        c06_e1_e5_dissociation,
        c07_short_side_generalization,
        c08_zero_weight_case,
        c09_reproducibility,
        c10_counting_trace,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
