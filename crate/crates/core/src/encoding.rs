//! One-hot inputs, k-hot targets, and threshold decoding of network outputs.

use crate::error::{Error, Result};
use crate::languages::{Language, Symbol, SymbolSet};

/// Activations strictly above this decode as "symbol predicted".
pub const THRESHOLD: f64 = 0.5;

/// Index of `s` within the output vocabulary of `lang` (⊣ is last).
pub fn output_index(lang: Language, s: Symbol) -> Option<usize> {
    match s {
        Symbol::End => Some(lang.input_dim()),
        _ => input_index(lang, s),
    }
}

/// Index of `s` within the input vocabulary of `lang`.
pub fn input_index(lang: Language, s: Symbol) -> Option<usize> {
    lang.input_vocab().iter().position(|&v| v == s)
}

pub fn encode_input(lang: Language, s: Symbol) -> Result<Vec<f64>> {
    let idx = input_index(lang, s).ok_or_else(|| Error::NotInInputVocabulary {
        symbol: s,
        language: lang.to_string(),
    })?;
    let mut v = vec![0.0; lang.input_dim()];
    v[idx] = 1.0;
    Ok(v)
}

pub fn encode_target(lang: Language, set: SymbolSet) -> Result<Vec<f64>> {
    if set.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let mut v = vec![0.0; lang.output_dim()];
    for s in set.iter() {
        let idx = output_index(lang, s).ok_or_else(|| Error::NotInOutputVocabulary {
            set: set.to_string(),
            language: lang.to_string(),
        })?;
        v[idx] = 1.0;
    }
    Ok(v)
}

/// Symbols whose activation is strictly greater than [`THRESHOLD`].
///
/// # Panics
///
/// If `activations` is not `d + 1` long.
pub fn decode_prediction(lang: Language, activations: &[f64]) -> SymbolSet {
    let vocab = lang.output_vocab();
    assert_eq!(
        activations.len(),
        vocab.len(),
        "activation vector has the wrong width for {lang}"
    );
    vocab
        .into_iter()
        .zip(activations)
        .filter(|(_, &a)| a > THRESHOLD)
        .fold(SymbolSet::EMPTY, |acc, (s, _)| acc.with(s))
}

/// True iff every position's predicted set equals its target set.
///
/// # Panics
///
/// On a length mismatch, which can only come from a caller bug.
pub fn sample_accepted(predicted: &[SymbolSet], targets: &[SymbolSet]) -> bool {
    assert_eq!(
        predicted.len(),
        targets.len(),
        "prediction and target sequences differ in length"
    );
    predicted == targets
}
