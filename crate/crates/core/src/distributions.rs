//! Length distributions over a closed window of `n` values.
//!
//! The beta-binomial is defined on `{0..N}`; a window `[lo, hi]` is covered by
//! taking `N = hi - lo` and shifting, `n = lo + x`.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

/// Closed interval `[lo, hi]` of language parameters, `1 <= lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LengthWindow {
    lo: usize,
    hi: usize,
}

impl LengthWindow {
    pub fn new(lo: usize, hi: usize) -> Result<Self> {
        if lo == 0 || lo > hi {
            return Err(Error::InvalidWindow { lo, hi });
        }
        Ok(LengthWindow { lo, hi })
    }

    pub fn lo(self) -> usize {
        self.lo
    }

    pub fn hi(self) -> usize {
        self.hi
    }

    pub fn contains(self, n: usize) -> bool {
        (self.lo..=self.hi).contains(&n)
    }

    /// Number of admissible values, `hi - lo + 1`.
    pub fn size(self) -> usize {
        self.hi - self.lo + 1
    }

    /// The three windows studied: [1,30], [1,50], [50,100].
    pub fn presets() -> [LengthWindow; 3] {
        [
            LengthWindow { lo: 1, hi: 30 },
            LengthWindow { lo: 1, hi: 50 },
            LengthWindow { lo: 50, hi: 100 },
        ]
    }
}

impl fmt::Display for LengthWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for LengthWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::parse("length window", s, "expected LO:HI"))?;
        let lo = lo
            .trim()
            .parse()
            .map_err(|e| Error::parse("length window", s, format!("{e}")))?;
        let hi = hi
            .trim()
            .parse()
            .map_err(|e| Error::parse("length window", s, format!("{e}")))?;
        LengthWindow::new(lo, hi)
    }
}

impl TryFrom<String> for LengthWindow {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<LengthWindow> for String {
    fn from(w: LengthWindow) -> String {
        w.to_string()
    }
}

/// How `n` is drawn from a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum DistributionSpec {
    Uniform,
    BetaBinomial { alpha: f64, beta: f64 },
}

impl DistributionSpec {
    /// α = β = 0.25: both ends of the window likely, the middle rare.
    pub const U_SHAPED: DistributionSpec = DistributionSpec::BetaBinomial {
        alpha: 0.25,
        beta: 0.25,
    };
    /// α = 1, β = 5: short sequences more probable.
    pub const RIGHT_TAILED: DistributionSpec = DistributionSpec::BetaBinomial {
        alpha: 1.0,
        beta: 5.0,
    };
    /// α = 5, β = 1: long sequences more probable.
    pub const LEFT_TAILED: DistributionSpec = DistributionSpec::BetaBinomial {
        alpha: 5.0,
        beta: 1.0,
    };

    pub fn beta_binomial(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::InvalidShape { alpha, beta });
        }
        Ok(DistributionSpec::BetaBinomial { alpha, beta })
    }

    /// The four regimes: uniform, U-shaped, right-tailed, left-tailed.
    pub fn presets() -> [DistributionSpec; 4] {
        [
            DistributionSpec::Uniform,
            DistributionSpec::U_SHAPED,
            DistributionSpec::RIGHT_TAILED,
            DistributionSpec::LEFT_TAILED,
        ]
    }

    /// Probability of drawing `n` from `window`; zero outside it.
    pub fn pmf(self, window: LengthWindow, n: usize) -> f64 {
        if !window.contains(n) {
            return 0.0;
        }
        match self {
            DistributionSpec::Uniform => 1.0 / window.size() as f64,
            DistributionSpec::BetaBinomial { alpha, beta } => {
                let big_n = (window.hi - window.lo) as f64;
                let x = (n - window.lo) as f64;
                let ln_choose =
                    ln_gamma(big_n + 1.0) - ln_gamma(x + 1.0) - ln_gamma(big_n - x + 1.0);
                let ln_p = ln_choose + ln_beta_unchecked(x + alpha, big_n - x + beta)
                    - ln_beta_unchecked(alpha, beta);
                ln_p.exp()
            }
        }
    }

    /// Draws a single `n`. Builds the table on every call; use
    /// [`LengthSampler`] for repeated draws.
    pub fn sample_length<R: Rng + ?Sized>(self, window: LengthWindow, rng: &mut R) -> usize {
        LengthSampler::new(self, window).sample(rng)
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            DistributionSpec::Uniform => f.write_str("uniform"),
            s if s == DistributionSpec::U_SHAPED => f.write_str("u-shaped"),
            s if s == DistributionSpec::RIGHT_TAILED => f.write_str("right-tailed"),
            s if s == DistributionSpec::LEFT_TAILED => f.write_str("left-tailed"),
            DistributionSpec::BetaBinomial { alpha, beta } => {
                write!(f, "beta-binomial:{alpha},{beta}")
            }
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => return Ok(DistributionSpec::Uniform),
            "u-shaped" => return Ok(DistributionSpec::U_SHAPED),
            "right-tailed" => return Ok(DistributionSpec::RIGHT_TAILED),
            "left-tailed" => return Ok(DistributionSpec::LEFT_TAILED),
            _ => {}
        }
        let params = s.strip_prefix("beta-binomial:").ok_or_else(|| {
            Error::parse(
                "distribution",
                s,
                "expected uniform, u-shaped, right-tailed, left-tailed or beta-binomial:ALPHA,BETA",
            )
        })?;
        let (a, b) = params
            .split_once(',')
            .ok_or_else(|| Error::parse("distribution", s, "expected ALPHA,BETA"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse("distribution", s, e.to_string()))
        };
        DistributionSpec::beta_binomial(parse(a)?, parse(b)?)
    }
}

impl TryFrom<String> for DistributionSpec {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<DistributionSpec> for String {
    fn from(d: DistributionSpec) -> String {
        d.to_string()
    }
}

/// `ln B(α, β) = lnΓ(α) + lnΓ(β) − lnΓ(α + β)`.
pub fn ln_beta(alpha: f64, beta: f64) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::InvalidShape { alpha, beta });
    }
    Ok(ln_beta_unchecked(alpha, beta))
}

fn ln_beta_unchecked(alpha: f64, beta: f64) -> f64 {
    ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta)
}

/// Inverse-CDF sampler over an explicit pmf table for one window.
#[derive(Debug, Clone)]
pub struct LengthSampler {
    window: LengthWindow,
    cdf: Vec<f64>,
}

impl LengthSampler {
    pub fn new(spec: DistributionSpec, window: LengthWindow) -> Self {
        let mut acc = 0.0;
        let cdf = (window.lo..=window.hi)
            .map(|n| {
                acc += spec.pmf(window, n);
                acc
            })
            .collect();
        LengthSampler { window, cdf }
    }

    pub fn window(&self) -> LengthWindow {
        self.window
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cdf.last().expect("window is never empty");
        let u = rng.random::<f64>() * total;
        let idx = self.cdf.partition_point(|&c| c <= u);
        self.window.lo + idx.min(self.cdf.len() - 1)
    }
}
