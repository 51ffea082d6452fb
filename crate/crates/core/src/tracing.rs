//! Hidden/cell-state trajectories on probe sequences, counter detection, and
//! run-length rendering of decoded outputs.

use std::fmt::Write as _;

use crate::encoding::decode_prediction;
use crate::error::{Error, Result};
use crate::evaluation::Predictor;
use crate::languages::{Language, Symbol, SymbolSet};
use crate::lstm::LstmParameters;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: usize,
    pub input: Symbol,
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub predicted: SymbolSet,
}

/// Timesteps at which the input symbol changes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSegmentation {
    boundaries: Vec<usize>,
}

impl PhaseSegmentation {
    pub fn new(boundaries: Vec<usize>) -> Result<Self> {
        if boundaries.windows(2).any(|w| w[0] >= w[1]) || boundaries.first() == Some(&0) {
            return Err(Error::Config(format!(
                "phase boundaries must be strictly increasing and positive: {boundaries:?}"
            )));
        }
        Ok(PhaseSegmentation { boundaries })
    }

    /// Boundaries of the member of `lang` with parameter `n`.
    pub fn for_sample(lang: Language, n: usize) -> Self {
        PhaseSegmentation {
            boundaries: lang.phase_boundaries(n),
        }
    }

    /// Boundaries read off a trace wherever the input symbol changes.
    pub fn from_trace(trace: &[TraceRecord]) -> Self {
        let boundaries = trace
            .windows(2)
            .filter(|w| w[0].input != w[1].input)
            .map(|w| w[1].t)
            .collect();
        PhaseSegmentation { boundaries }
    }

    pub fn boundaries(&self) -> &[usize] {
        &self.boundaries
    }

    /// Half-open `[start, end)` ranges covering `0..len`.
    pub fn phases(&self, len: usize) -> Vec<(usize, usize)> {
        let mut cuts = vec![0];
        cuts.extend(self.boundaries.iter().copied().filter(|&b| b < len));
        cuts.push(len);
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Full per-step record of a zero-state run over the member with parameter `n`.
pub fn trace_sequence(p: &LstmParameters, lang: Language, n: usize) -> Result<Vec<TraceRecord>> {
    let sample = lang.generate_sample(n)?;
    let run = p.run_sequence(&sample);
    Ok(run
        .states
        .into_iter()
        .zip(&run.outputs)
        .zip(&sample.input)
        .enumerate()
        .map(|(t, ((state, y), &input))| TraceRecord {
            t,
            input,
            h: state.h,
            c: state.c,
            predicted: decode_prediction(lang, y),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Up,
    Down,
}

/// A unit whose cell state moves monotonically (in rank) within every phase.
#[derive(Debug, Clone, PartialEq)]
pub struct CounterUnit {
    pub unit: usize,
    pub directions: Vec<Direction>,
    pub rho: Vec<f64>,
}

/// Spearman correlation of each unit's cell state with time, per phase.
/// Indexed `[unit][phase]`; phases shorter than two steps or with constant
/// values give 0.
pub fn phase_correlations(trace: &[TraceRecord], seg: &PhaseSegmentation) -> Vec<Vec<f64>> {
    let units = trace.first().map(|r| r.c.len()).unwrap_or(0);
    let phases = seg.phases(trace.len());
    (0..units)
        .map(|u| {
            phases
                .iter()
                .map(|&(start, end)| {
                    let series: Vec<f64> = trace[start..end].iter().map(|r| r.c[u]).collect();
                    let time: Vec<f64> = (start..end).map(|t| t as f64).collect();
                    spearman(&time, &series)
                })
                .collect()
        })
        .collect()
}

/// Units with `|ρ| >= rho_min` in every phase, with the sign of each.
pub fn detect_counters(
    trace: &[TraceRecord],
    seg: &PhaseSegmentation,
    rho_min: f64,
) -> Vec<CounterUnit> {
    phase_correlations(trace, seg)
        .into_iter()
        .enumerate()
        .filter(|(_, rho)| !rho.is_empty() && rho.iter().all(|r| r.abs() >= rho_min))
        .map(|(unit, rho)| CounterUnit {
            unit,
            directions: rho
                .iter()
                .map(|&r| {
                    if r > 0.0 {
                        Direction::Up
                    } else {
                        Direction::Down
                    }
                })
                .collect(),
            rho,
        })
        .collect()
}

/// Average ranks, 1-based; ties share the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Decoded outputs of `model` on the member with parameter `n`, run-length
/// rendered, e.g. `(a/b)^1000 b^996 ⊣^4`.
pub fn probe_failure_mode<P: Predictor + ?Sized>(
    model: &P,
    lang: Language,
    n: usize,
) -> Result<String> {
    let sample = lang.generate_sample(n)?;
    Ok(render_run_length(&model.predict(&sample)))
}

pub fn render_run_length(sets: &[SymbolSet]) -> String {
    let mut out = String::new();
    let mut i = 0;
    while i < sets.len() {
        let run = sets[i..].iter().take_while(|&&s| s == sets[i]).count();
        if !out.is_empty() {
            out.push(' ');
        }
        if sets[i].len() > 1 {
            write!(out, "({})", sets[i]).unwrap();
        } else {
            write!(out, "{}", sets[i]).unwrap();
        }
        if run > 1 {
            write!(out, "^{run}").unwrap();
        }
        i += run;
    }
    out
}

/// Inverse of [`render_run_length`].
pub fn expand_run_length(text: &str) -> Result<Vec<SymbolSet>> {
    let mut out = Vec::new();
    for token in text.split_whitespace() {
        let (body, count) = match token.rsplit_once('^') {
            Some((body, count)) => (
                body,
                count
                    .parse::<usize>()
                    .map_err(|e| Error::parse("run-length token", token, e.to_string()))?,
            ),
            None => (token, 1),
        };
        let body = body
            .strip_prefix('(')
            .and_then(|b| b.strip_suffix(')'))
            .unwrap_or(body);
        let set: SymbolSet = body.parse()?;
        out.extend(std::iter::repeat_n(set, count));
    }
    Ok(out)
}

/// Long-format trace CSV: `t,input,unit,h,c`.
pub fn trace_csv(trace: &[TraceRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "input", "unit", "h", "c"])?;
    for r in trace {
        for (u, (h, c)) in r.h.iter().zip(&r.c).enumerate() {
            w.write_record([
                r.t.to_string(),
                r.input.to_string(),
                u.to_string(),
                h.to_string(),
                c.to_string(),
            ])?;
        }
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}

/// Prediction sidecar: `t,input,predicted_set`.
pub fn predictions_csv(trace: &[TraceRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "input", "predicted_set"])?;
    for r in trace {
        w.write_record([
            r.t.to_string(),
            r.input.to_string(),
            r.predicted.to_string(),
        ])?;
    }
    w.into_inner()
        .map_err(|e| Error::Csv(e.into_error().into()))
}
