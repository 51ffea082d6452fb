//! A small laboratory for training single-layer LSTMs on the counting
//! languages aⁿbⁿ, aⁿbⁿcⁿ and aⁿbⁿcⁿdⁿ and measuring how far they generalize.
//!
//! The pieces compose bottom-up:
//!
//! - [`languages`] defines the three languages and their next-symbol targets.
//! - [`distributions`] draws the language parameter `n` from a length window.
//! - [`encoding`] turns symbols and symbol sets into network vectors and back.
//! - [`lstm`] is the model, its exact BPTT gradients and optimizers.
//! - [`evaluation`] finds the first `k` values of `n` a frozen model rejects.
//! - [`experiments`] trains, evaluates every epoch, and writes CSV results.
//! - [`tracing`] records hidden/cell trajectories and looks for counters.

pub mod distributions;
pub mod encoding;
pub mod error;
pub mod evaluation;
pub mod experiments;
pub mod languages;
pub mod lstm;
pub mod tracing;

pub use distributions::{DistributionSpec, LengthWindow};
pub use error::{Error, Result};
pub use evaluation::{Acceptor, ErrorProfile, ErrorSlot, EvalConfig};
pub use experiments::{EpochRecord, ExperimentConfig};
pub use languages::{Language, Sample, Symbol, SymbolSet};
pub use lstm::{Gradients, LstmParameters, LstmState, Optimizer, OptimizerKind};
