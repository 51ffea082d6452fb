//! First-k-error generalization protocol.
//!
//! A frozen model is run on every member of a language in increasing order of
//! `n`. The first `k` values of `n` it gets wrong are its error profile
//! `e₁ < e₂ < … < e_k`; slots still empty when `max_n` is reached are
//! censored.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::decode_prediction;
use crate::languages::{Language, Sample, SymbolSet};
use crate::lstm::LstmParameters;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub max_n: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { k: 5, max_n: 1000 }
    }
}

/// One `e_i` slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorSlot {
    Failed(usize),
    /// No further failure up to and including `max_n`.
    Censored,
}

impl ErrorSlot {
    pub fn value(self) -> Option<usize> {
        match self {
            ErrorSlot::Failed(n) => Some(n),
            ErrorSlot::Censored => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorProfile {
    pub errors: Vec<ErrorSlot>,
    pub max_n: usize,
    pub loss_at_eval: Option<f64>,
}

impl ErrorProfile {
    /// `e_i`, 1-based; `None` when censored.
    pub fn e(&self, i: usize) -> Option<usize> {
        self.errors.get(i - 1).and_then(|s| s.value())
    }

    pub fn failures(&self) -> impl Iterator<Item = usize> + '_ {
        self.errors.iter().filter_map(|s| s.value())
    }

    pub fn censored_count(&self) -> usize {
        self.errors
            .iter()
            .filter(|s| **s == ErrorSlot::Censored)
            .count()
    }

    /// `e_i`, with a censored slot read as `max_n + 1`.
    pub fn e_or_beyond(&self, i: usize) -> usize {
        self.e(i).unwrap_or(self.max_n + 1)
    }
}

impl fmt::Display for ErrorProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, slot) in self.errors.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            match slot {
                ErrorSlot::Failed(n) => write!(f, "e{}={n}", i + 1)?,
                ErrorSlot::Censored => write!(f, "e{}=>{}", i + 1, self.max_n)?,
            }
        }
        Ok(())
    }
}

/// Anything that can accept or reject the member of a language with
/// parameter `n`.
pub trait Acceptor {
    fn accepts(&self, lang: Language, n: usize) -> bool;
}

impl<F: Fn(Language, usize) -> bool> Acceptor for F {
    fn accepts(&self, lang: Language, n: usize) -> bool {
        self(lang, n)
    }
}

impl Acceptor for LstmParameters {
    fn accepts(&self, lang: Language, n: usize) -> bool {
        let sample = lang.generate_sample(n).expect("n >= 1");
        self.matches_targets(&sample)
    }
}

/// Per-position decoded predictions for a whole sample.
pub trait Predictor {
    fn predict(&self, sample: &Sample) -> Vec<SymbolSet>;
}

impl Predictor for LstmParameters {
    fn predict(&self, sample: &Sample) -> Vec<SymbolSet> {
        self.run_sequence(sample)
            .outputs
            .iter()
            .map(|y| decode_prediction(sample.language, y))
            .collect()
    }
}

/// A model that always emits the exact targets.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactTargets;

impl Predictor for ExactTargets {
    fn predict(&self, sample: &Sample) -> Vec<SymbolSet> {
        sample.targets.clone()
    }
}

impl Acceptor for ExactTargets {
    fn accepts(&self, _lang: Language, _n: usize) -> bool {
        true
    }
}

/// Enumerates `n = 1, 2, …` until `k` failures or `max_n`.
pub fn evaluate<A: Acceptor + ?Sized>(model: &A, lang: Language, cfg: EvalConfig) -> ErrorProfile {
    let mut errors = Vec::with_capacity(cfg.k);
    for n in 1..=cfg.max_n {
        if errors.len() == cfg.k {
            break;
        }
        if !model.accepts(lang, n) {
            errors.push(ErrorSlot::Failed(n));
        }
    }
    finish(errors, cfg)
}

/// Same result as [`evaluate`], testing candidates in parallel blocks.
pub fn evaluate_parallel<A: Acceptor + Sync + ?Sized>(
    model: &A,
    lang: Language,
    cfg: EvalConfig,
) -> ErrorProfile {
    const BLOCK: usize = 64;
    let mut errors = Vec::with_capacity(cfg.k);
    let mut start = 1;
    while start <= cfg.max_n && errors.len() < cfg.k {
        let end = (start + BLOCK - 1).min(cfg.max_n);
        let failed: Vec<usize> = (start..=end)
            .into_par_iter()
            .filter(|&n| !model.accepts(lang, n))
            .collect();
        let room = cfg.k - errors.len();
        errors.extend(failed.into_iter().take(room).map(ErrorSlot::Failed));
        start = end + 1;
    }
    finish(errors, cfg)
}

fn finish(mut errors: Vec<ErrorSlot>, cfg: EvalConfig) -> ErrorProfile {
    errors.resize(cfg.k, ErrorSlot::Censored);
    ErrorProfile {
        errors,
        max_n: cfg.max_n,
        loss_at_eval: None,
    }
}
