//! Dichotomic question trees mapping yes/no answer paths to group symbols.
//!
//! A scheme is data: the symbol set, the letter grouping and one decode table
//! per word position, each table a complete prefix-free set of answer paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::{Answer, Error, Result};

pub const POSITIONS: usize = 3;
pub const MAX_PATH_LEN: usize = 3;

const JAPANESE_VOWEL: &str = include_str!("../data/schemes/japanese-vowel.json");
const ENGLISH_6COL: &str = include_str!("../data/schemes/english-6col.json");

pub const BUNDLED_SCHEMES: [&str; 2] = ["japanese-vowel", "english-6col"];

/// A group symbol: a vowel, NN, a letter-matrix column or the end marker.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Symbol(pub String);

impl Symbol {
    pub fn new(s: impl Into<String>) -> Self {
        Symbol(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol(s.to_string())
    }
}

pub fn path_string(answers: &[Answer]) -> String {
    answers.iter().map(|a| a.as_char()).collect()
}

/// Parses `"YNY"`, `"y,n,y"` or `"yes no yes"`.
pub fn parse_path(s: &str) -> Result<Vec<Answer>> {
    let parts: Vec<&str> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|p| !p.is_empty())
        .collect();
    if parts.len() == 1 && parts[0].chars().all(|c| matches!(c, 'Y' | 'N' | 'y' | 'n')) {
        return parts[0].chars().map(|c| c.to_string().parse()).collect();
    }
    parts.iter().map(|p| p.parse()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeTable {
    pub positions: Vec<usize>,
    pub paths: BTreeMap<String, Symbol>,
}

#[derive(Debug, Clone, Deserialize)]
struct RawScheme {
    name: String,
    symbols: Vec<Symbol>,
    end_symbol: Symbol,
    letters: BTreeMap<String, Symbol>,
    #[serde(default)]
    skip_unmapped_letters: bool,
    #[serde(default)]
    normalize_long_vowels: bool,
    tables: Vec<DecodeTable>,
    #[serde(default)]
    labels: BTreeMap<Symbol, String>,
    question_template: String,
}

/// A validated grouping scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchemeSer")]
pub struct Scheme {
    pub name: String,
    pub symbols: Vec<Symbol>,
    pub end_symbol: Symbol,
    pub letters: BTreeMap<String, Symbol>,
    pub skip_unmapped_letters: bool,
    pub normalize_long_vowels: bool,
    pub tables: Vec<DecodeTable>,
    pub labels: BTreeMap<Symbol, String>,
    pub question_template: String,
}

// Serialized form is the raw form; deserializing re-validates.
#[derive(Deserialize)]
#[serde(transparent)]
struct RawSchemeSer(RawScheme);

impl TryFrom<RawSchemeSer> for Scheme {
    type Error = Error;

    fn try_from(raw: RawSchemeSer) -> Result<Self> {
        Scheme::validate(raw.0)
    }
}

/// The question asked at an interior node of a position's tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub text: String,
    /// Symbols for which the answer is yes.
    pub subset: Vec<Symbol>,
}

/// Result of feeding a partial path to a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Step {
    Symbol(Symbol),
    Ask(Question),
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidScheme(msg.into())
}

impl Scheme {
    fn validate(raw: RawScheme) -> Result<Self> {
        let symbol_set: BTreeSet<&Symbol> = raw.symbols.iter().collect();
        if symbol_set.len() != raw.symbols.len() {
            return Err(invalid("duplicate symbol"));
        }
        if !symbol_set.contains(&raw.end_symbol) {
            return Err(invalid(format!("end symbol {} not in symbol set", raw.end_symbol)));
        }
        for (letter, sym) in &raw.letters {
            if letter.is_empty() {
                return Err(invalid("empty letter"));
            }
            if !symbol_set.contains(sym) {
                return Err(invalid(format!("letter {letter:?} maps to unknown symbol {sym}")));
            }
        }
        let mut covered = [0usize; POSITIONS];
        for table in &raw.tables {
            for &p in &table.positions {
                if !(1..=POSITIONS).contains(&p) {
                    return Err(invalid(format!("position {p} out of range")));
                }
                covered[p - 1] += 1;
            }
            check_table(table, &symbol_set)?;
            if table.positions.contains(&1) && table.paths.values().any(|s| *s == raw.end_symbol) {
                return Err(invalid("the end symbol cannot be chosen first"));
            }
        }
        if covered.iter().any(|c| *c != 1) {
            return Err(invalid("each position needs exactly one decode table"));
        }
        Ok(Scheme {
            name: raw.name,
            symbols: raw.symbols,
            end_symbol: raw.end_symbol,
            letters: raw.letters,
            skip_unmapped_letters: raw.skip_unmapped_letters,
            normalize_long_vowels: raw.normalize_long_vowels,
            tables: raw.tables,
            labels: raw.labels,
            question_template: raw.question_template,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let raw: RawScheme = serde_json::from_str(json)?;
        Self::validate(raw)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        match name {
            "japanese-vowel" => Self::from_json(JAPANESE_VOWEL),
            "english-6col" => Self::from_json(ENGLISH_6COL),
            other => Err(invalid(format!("no bundled scheme named {other:?}"))),
        }
    }

    pub fn japanese() -> Self {
        Self::bundled("japanese-vowel").expect("bundled scheme is valid")
    }

    pub fn english() -> Self {
        Self::bundled("english-6col").expect("bundled scheme is valid")
    }

    pub fn symbol(&self, s: &str) -> Result<Symbol> {
        let sym = Symbol::new(s.trim().to_ascii_uppercase());
        if self.symbols.contains(&sym) {
            Ok(sym)
        } else {
            Err(Error::UnknownSymbol(s.to_string()))
        }
    }

    pub fn is_end(&self, s: &Symbol) -> bool {
        *s == self.end_symbol
    }

    pub fn table(&self, position: usize) -> Result<&DecodeTable> {
        self.tables
            .iter()
            .find(|t| t.positions.contains(&position))
            .ok_or_else(|| Error::Protocol(format!("no position {position}; positions are 1-{POSITIONS}")))
    }

    /// Symbols selectable at `position`, in scheme order.
    pub fn symbols_at(&self, position: usize) -> Result<Vec<Symbol>> {
        let table = self.table(position)?;
        Ok(self
            .symbols
            .iter()
            .filter(|s| table.paths.values().any(|v| v == *s))
            .cloned()
            .collect())
    }

    pub fn label(&self, s: &Symbol) -> String {
        self.labels.get(s).cloned().unwrap_or_else(|| s.0.clone())
    }

    fn subset_at(&self, table: &DecodeTable, prefix: &str) -> Vec<Symbol> {
        let yes = format!("{prefix}Y");
        let found: BTreeSet<&Symbol> = table
            .paths
            .iter()
            .filter(|(p, _)| p.starts_with(&yes))
            .map(|(_, s)| s)
            .collect();
        self.symbols.iter().filter(|s| found.contains(s)).cloned().collect()
    }

    fn question_text(&self, position: usize, subset: &[Symbol]) -> String {
        let labels: Vec<String> = subset.iter().map(|s| self.label(s)).collect();
        let listed = match labels.len() {
            0 => String::new(),
            1 => labels[0].clone(),
            n => format!("{} or {}", labels[..n - 1].join(", "), labels[n - 1]),
        };
        let ordinal = match position {
            1 => "first",
            2 => "second",
            3 => "third",
            _ => "next",
        };
        self.question_template
            .replace("{ordinal}", ordinal)
            .replace("{subset}", &listed)
    }

    /// Complete path → symbol, proper prefix → the next question.
    pub fn step(&self, position: usize, partial: &[Answer]) -> Result<Step> {
        let table = self.table(position)?;
        let key = path_string(partial);
        if let Some(sym) = table.paths.get(&key) {
            return Ok(Step::Symbol(sym.clone()));
        }
        if partial.len() >= MAX_PATH_LEN || !table.paths.keys().any(|p| p.starts_with(&key)) {
            return Err(Error::Protocol(format!(
                "answer path {key} is not valid at position {position}"
            )));
        }
        let subset = self.subset_at(table, &key);
        Ok(Step::Ask(Question {
            text: self.question_text(position, &subset),
            subset,
        }))
    }

    pub fn decode(&self, position: usize, answers: &[Answer]) -> Result<Symbol> {
        match self.step(position, answers)? {
            Step::Symbol(s) => Ok(s),
            Step::Ask(q) => Err(Error::NeedMoreAnswers { question: q.text }),
        }
    }

    pub fn next_question(&self, position: usize, partial: &[Answer]) -> Result<Question> {
        match self.step(position, partial)? {
            Step::Ask(q) => Ok(q),
            Step::Symbol(_) => Err(Error::PathComplete),
        }
    }

    /// Inverse of [`Scheme::decode`].
    pub fn encode(&self, position: usize, symbol: &Symbol) -> Result<Vec<Answer>> {
        let table = self.table(position)?;
        let path = table
            .paths
            .iter()
            .find(|(_, s)| *s == symbol)
            .map(|(p, _)| p)
            .ok_or_else(|| Error::UnknownSymbol(format!("{symbol} at position {position}")))?;
        parse_path(path)
    }

    pub fn letter_symbol(&self, letter: &str) -> Result<Symbol> {
        self.letters
            .get(&letter.to_lowercase())
            .cloned()
            .ok_or_else(|| Error::UnknownLetter(letter.to_string()))
    }
}

fn check_table(table: &DecodeTable, symbols: &BTreeSet<&Symbol>) -> Result<()> {
    if table.paths.is_empty() {
        return Err(invalid("empty decode table"));
    }
    let mut seen = BTreeSet::new();
    for (path, sym) in &table.paths {
        if path.is_empty() || path.len() > MAX_PATH_LEN || !path.chars().all(|c| c == 'Y' || c == 'N') {
            return Err(invalid(format!("bad answer path {path:?}")));
        }
        if !symbols.contains(sym) {
            return Err(invalid(format!("path {path} maps to unknown symbol {sym}")));
        }
        if !seen.insert(sym) {
            return Err(invalid(format!("symbol {sym} has two paths")));
        }
    }
    for a in table.paths.keys() {
        for b in table.paths.keys() {
            if a != b && b.starts_with(a.as_str()) {
                return Err(invalid(format!("path {a} is a prefix of {b}")));
            }
        }
    }
    // Complete tree: every interior node has both children.
    let mut interior = BTreeSet::new();
    for path in table.paths.keys() {
        for k in 0..path.len() {
            interior.insert(&path[..k]);
        }
    }
    for node in interior {
        for c in ['Y', 'N'] {
            let child = format!("{node}{c}");
            if !table.paths.keys().any(|p| p.starts_with(&child)) {
                return Err(invalid(format!("answer path {child} leads nowhere")));
            }
        }
    }
    Ok(())
}
