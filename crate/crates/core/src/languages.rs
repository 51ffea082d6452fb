//! The three counting languages and their next-symbol prediction targets.
//!
//! Every member of a language is fully determined by its parameter `n`. At
//! each input position the target is the set of symbols that may legally come
//! next: `{a, b}` while reading the leading block of `a`s, and a single forced
//! symbol afterwards, ending with the terminator `⊣`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the three studied languages.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Language {
    AnBn,
    AnBnCn,
    AnBnCnDn,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::AnBn, Language::AnBnCn, Language::AnBnCnDn];

    /// Number of distinct input symbols, `d`.
    pub fn input_dim(self) -> usize {
        match self {
            Language::AnBn => 2,
            Language::AnBnCn => 3,
            Language::AnBnCnDn => 4,
        }
    }

    /// `d + 1`: the input symbols plus the terminator.
    pub fn output_dim(self) -> usize {
        self.input_dim() + 1
    }

    /// The language whose input vocabulary has `d` symbols.
    pub fn from_input_dim(d: usize) -> Option<Language> {
        Language::ALL.into_iter().find(|l| l.input_dim() == d)
    }

    pub fn input_vocab(self) -> &'static [Symbol] {
        &Symbol::LETTERS[..self.input_dim()]
    }

    pub fn output_vocab(self) -> Vec<Symbol> {
        let mut v = self.input_vocab().to_vec();
        v.push(Symbol::End);
        v
    }

    /// Length of the member with parameter `n` (2n, 3n or 4n).
    pub fn sequence_length(self, n: usize) -> usize {
        self.input_dim() * n
    }

    /// Indices where the input symbol changes: `[n]`, `[n, 2n]` or `[n, 2n, 3n]`.
    pub fn phase_boundaries(self, n: usize) -> Vec<usize> {
        (1..self.input_dim()).map(|k| k * n).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::AnBn => "anbn",
            Language::AnBnCn => "anbncn",
            Language::AnBnCnDn => "anbncndn",
        }
    }

    /// Builds the member with parameter `n` together with its targets.
    pub fn generate_sample(self, n: usize) -> Result<Sample> {
        if n == 0 {
            return Err(Error::InvalidN(n));
        }
        let d = self.input_dim();
        let mut input = Vec::with_capacity(d * n);
        for &letter in self.input_vocab() {
            input.extend(std::iter::repeat_n(letter, n));
        }

        let either = SymbolSet::from_symbols([Symbol::A, Symbol::B]);
        let mut targets = Vec::with_capacity(d * n);
        targets.extend(std::iter::repeat_n(either, n));
        targets.extend(std::iter::repeat_n(SymbolSet::single(Symbol::B), n - 1));
        for &letter in &self.input_vocab()[2..] {
            targets.extend(std::iter::repeat_n(SymbolSet::single(letter), n));
        }
        targets.push(SymbolSet::single(Symbol::End));

        Ok(Sample {
            language: self,
            n,
            input,
            targets,
        })
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "anbn" => Ok(Language::AnBn),
            "anbncn" => Ok(Language::AnBnCn),
            "anbncndn" => Ok(Language::AnBnCnDn),
            _ => Err(Error::parse(
                "language",
                s,
                "expected one of anbn, anbncn, anbncndn",
            )),
        }
    }
}

impl TryFrom<String> for Language {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Language> for String {
    fn from(l: Language) -> String {
        l.name().to_string()
    }
}

/// A vocabulary symbol. [`Symbol::End`] (`⊣`) only ever appears in targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    A,
    B,
    C,
    D,
    End,
}

impl Symbol {
    pub const LETTERS: [Symbol; 4] = [Symbol::A, Symbol::B, Symbol::C, Symbol::D];
    pub const ALL: [Symbol; 5] = [Symbol::A, Symbol::B, Symbol::C, Symbol::D, Symbol::End];

    /// Position in the canonical order a, b, c, d, ⊣.
    fn bit(self) -> u8 {
        match self {
            Symbol::A => 0,
            Symbol::B => 1,
            Symbol::C => 2,
            Symbol::D => 3,
            Symbol::End => 4,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::A => 'a',
            Symbol::B => 'b',
            Symbol::C => 'c',
            Symbol::D => 'd',
            Symbol::End => '⊣',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        Some(match c {
            'a' => Symbol::A,
            'b' => Symbol::B,
            'c' => Symbol::C,
            'd' => Symbol::D,
            '⊣' => Symbol::End,
            _ => return None,
        })
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_char())
    }
}

/// A subset of {a, b, c, d, ⊣}, iterated in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SymbolSet(u8);

impl SymbolSet {
    pub const EMPTY: SymbolSet = SymbolSet(0);

    pub fn single(s: Symbol) -> Self {
        SymbolSet(1 << s.bit())
    }

    pub fn from_symbols(symbols: impl IntoIterator<Item = Symbol>) -> Self {
        symbols
            .into_iter()
            .fold(SymbolSet::EMPTY, |acc, s| acc.with(s))
    }

    pub fn with(self, s: Symbol) -> Self {
        SymbolSet(self.0 | (1 << s.bit()))
    }

    pub fn contains(self, s: Symbol) -> bool {
        self.0 & (1 << s.bit()) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Symbol> {
        Symbol::ALL.into_iter().filter(move |&s| self.contains(s))
    }

    pub fn is_subset_of(self, other: SymbolSet) -> bool {
        self.0 & !other.0 == 0
    }
}

/// Slash-joined members (`a/b`), or `{}` for the empty set.
impl fmt::Display for SymbolSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("{}");
        }
        for (i, s) in self.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

impl FromStr for SymbolSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "{}" {
            return Ok(SymbolSet::EMPTY);
        }
        s.split('/').try_fold(SymbolSet::EMPTY, |acc, part| {
            let mut chars = part.chars();
            match (chars.next().and_then(Symbol::from_char), chars.next()) {
                (Some(sym), None) => Ok(acc.with(sym)),
                _ => Err(Error::parse(
                    "symbol set",
                    s,
                    format!("bad member {part:?}"),
                )),
            }
        })
    }
}

/// A language member with its per-position target sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub language: Language,
    pub n: usize,
    pub input: Vec<Symbol>,
    pub targets: Vec<SymbolSet>,
}

impl Sample {
    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// One dump line: `input<TAB>target sets separated by spaces`.
    pub fn dump_line(&self) -> String {
        let input: String = self.input.iter().map(|s| s.as_char()).collect();
        let targets: Vec<String> = self.targets.iter().map(|t| t.to_string()).collect();
        format!("{input}\t{}", targets.join(" "))
    }
}
