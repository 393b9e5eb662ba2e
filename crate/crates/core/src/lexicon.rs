//! Word lists indexed by their three-symbol skeleton.
//!
//! A reading is scanned left to right against the scheme's letter map
//! (longest letter key first), the first three emitted symbols form the
//! skeleton and short words are padded with the end symbol.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{Scheme, Symbol, POSITIONS};
use crate::{Error, Result};

const JAPANESE_TSV: &str = include_str!("../data/lexicon/japanese.tsv");
const ENGLISH_TSV: &str = include_str!("../data/lexicon/english.tsv");

/// Bundled lexicons as `(lexicon name, scheme name)`.
pub const BUNDLED_LEXICONS: [(&str, &str); 2] =
    [("japanese", "japanese-vowel"), ("english", "english-6col")];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub reading: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency_rank: Option<u32>,
}

impl LexiconEntry {
    pub fn new(surface: &str, reading: &str, gloss: Option<&str>, frequency_rank: Option<u32>) -> Self {
        LexiconEntry {
            surface: surface.to_string(),
            reading: reading.to_string(),
            gloss: gloss.map(str::to_string),
            frequency_rank,
        }
    }

    fn rank_key(&self) -> (u32, &str) {
        (self.frequency_rank.unwrap_or(u32::MAX), &self.reading)
    }
}

/// Three group symbols; the end symbol may only fill a suffix.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Skeleton(pub [Symbol; POSITIONS]);

impl Skeleton {
    /// Checks membership in the scheme and the end-suffix rule.
    pub fn new(scheme: &Scheme, symbols: [Symbol; POSITIONS]) -> Result<Self> {
        for (i, s) in symbols.iter().enumerate() {
            if !scheme.symbols.contains(s) {
                return Err(Error::UnknownSymbol(s.to_string()));
            }
            if i > 0 && scheme.is_end(&symbols[i - 1]) && !scheme.is_end(s) {
                return Err(Error::InvalidSkeleton(format!(
                    "{} follows the end symbol",
                    s
                )));
            }
        }
        if scheme.is_end(&symbols[0]) {
            return Err(Error::InvalidSkeleton("no symbol before the end symbol".into()));
        }
        Ok(Skeleton(symbols))
    }

    /// Parses `"E,I,A"` or `"E I A"`.
    pub fn parse(scheme: &Scheme, s: &str) -> Result<Self> {
        let parts: Vec<&str> = s
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|p| !p.is_empty())
            .collect();
        if parts.len() != POSITIONS {
            return Err(Error::InvalidSkeleton(format!(
                "expected {POSITIONS} symbols, got {:?}",
                s
            )));
        }
        let syms = [scheme.symbol(parts[0])?, scheme.symbol(parts[1])?, scheme.symbol(parts[2])?];
        Skeleton::new(scheme, syms)
    }

    pub fn symbols(&self) -> &[Symbol; POSITIONS] {
        &self.0
    }

    /// Copy with `position` (1-based) replaced.
    pub fn with(&self, position: usize, symbol: Symbol) -> Self {
        let mut out = self.clone();
        out.0[position - 1] = symbol;
        out
    }
}

impl fmt::Display for Skeleton {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'i' | 'u' | 'e' | 'o')
}

/// Lowercases; with long-vowel normalization, macron and circumflex vowels
/// become doubled vowels and `oh` not followed by a vowel or `y` becomes `ou`.
pub fn normalize_reading(scheme: &Scheme, reading: &str) -> String {
    let lower = reading.trim().to_lowercase();
    if !scheme.normalize_long_vowels {
        return lower;
    }
    let mut doubled = String::with_capacity(lower.len() + 4);
    for c in lower.chars() {
        let base = match c {
            'ā' | 'â' => Some('a'),
            'ī' | 'î' => Some('i'),
            'ū' | 'û' => Some('u'),
            'ē' | 'ê' => Some('e'),
            'ō' | 'ô' => Some('o'),
            _ => None,
        };
        match base {
            Some(b) => {
                doubled.push(b);
                doubled.push(b);
            }
            None => doubled.push(c),
        }
    }
    let chars: Vec<char> = doubled.chars().collect();
    let mut out = String::with_capacity(chars.len());
    for (i, &c) in chars.iter().enumerate() {
        let next = chars.get(i + 1).copied();
        if c == 'h'
            && i > 0
            && chars[i - 1] == 'o'
            && !next.is_some_and(|n| is_vowel(n) || n == 'y')
        {
            out.push('u');
        } else {
            out.push(c);
        }
    }
    out
}

/// Symbols emitted by a reading, in order, before truncation.
pub fn emissions(scheme: &Scheme, reading: &str) -> Result<Vec<Symbol>> {
    let norm = normalize_reading(scheme, reading);
    let chars: Vec<char> = norm.chars().collect();
    let max_key = scheme.letters.keys().map(|k| k.chars().count()).max().unwrap_or(1);
    let mut out = Vec::new();
    let mut i = 0;
    'scan: while i < chars.len() {
        for len in (1..=max_key.min(chars.len() - i)).rev() {
            let key: String = chars[i..i + len].iter().collect();
            if let Some(sym) = scheme.letters.get(&key) {
                out.push(sym.clone());
                i += len;
                continue 'scan;
            }
        }
        if scheme.skip_unmapped_letters && chars[i].is_ascii_lowercase() {
            i += 1;
        } else {
            return Err(Error::UnknownLetter(chars[i].to_string()));
        }
    }
    Ok(out)
}

pub fn skeletonize(scheme: &Scheme, reading: &str) -> Result<Skeleton> {
    let mut syms = emissions(scheme, reading)?;
    if syms.is_empty() {
        return Err(Error::EmptyReading(reading.to_string()));
    }
    syms.truncate(POSITIONS);
    while syms.len() < POSITIONS {
        syms.push(scheme.end_symbol.clone());
    }
    let arr: [Symbol; POSITIONS] = syms.try_into().expect("length is POSITIONS");
    Skeleton::new(scheme, arr)
}

/// An entry left out of the index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconWarning {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub reading: String,
    pub message: String,
}

/// A substituted skeleton and its matches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Neighbor {
    pub skeleton: Skeleton,
    pub position: usize,
    pub symbol: Symbol,
    pub entries: Vec<LexiconEntry>,
}

/// Immutable skeleton index over one scheme.
#[derive(Debug, Clone)]
pub struct Lexicon {
    name: String,
    scheme: Scheme,
    entries: Vec<LexiconEntry>,
    index: HashMap<Skeleton, Vec<usize>>,
    warnings: Vec<LexiconWarning>,
}

impl Lexicon {
    /// Deduplicates readings (smaller rank wins) and drops entries that do
    /// not skeletonize, recording a warning for each.
    pub fn build(name: &str, scheme: &Scheme, entries: Vec<LexiconEntry>) -> Self {
        let mut warnings = Vec::new();
        let mut by_reading: BTreeMap<String, (LexiconEntry, Skeleton)> = BTreeMap::new();
        for e in entries {
            if e.reading.trim().is_empty() {
                warnings.push(LexiconWarning {
                    line: None,
                    reading: e.reading.clone(),
                    message: "empty reading".into(),
                });
                continue;
            }
            let sk = match skeletonize(scheme, &e.reading) {
                Ok(sk) => sk,
                Err(err) => {
                    warnings.push(LexiconWarning {
                        line: None,
                        reading: e.reading.clone(),
                        message: err.to_string(),
                    });
                    continue;
                }
            };
            match by_reading.get(&e.reading) {
                Some((old, _)) if old.rank_key() <= e.rank_key() => {}
                _ => {
                    by_reading.insert(e.reading.clone(), (e, sk));
                }
            }
        }
        let mut pairs: Vec<(LexiconEntry, Skeleton)> = by_reading.into_values().collect();
        pairs.sort_by(|a, b| a.0.rank_key().cmp(&b.0.rank_key()));
        let mut index: HashMap<Skeleton, Vec<usize>> = HashMap::new();
        let mut stored = Vec::with_capacity(pairs.len());
        for (i, (e, sk)) in pairs.into_iter().enumerate() {
            index.entry(sk).or_default().push(i);
            stored.push(e);
        }
        Lexicon {
            name: name.to_string(),
            scheme: scheme.clone(),
            entries: stored,
            index,
            warnings,
        }
    }

    pub fn from_tsv(name: &str, scheme: &Scheme, text: &str) -> Result<Self> {
        let (entries, lines) = parse_tsv(text)?;
        let mut lex = Lexicon::build(name, scheme, entries);
        for w in &mut lex.warnings {
            w.line = lines.get(&w.reading).copied();
        }
        Ok(lex)
    }

    pub fn load(name: &str, scheme: &Scheme, path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_tsv(name, scheme, &text)
    }

    /// `"japanese"` or `"english"`, built over its bundled scheme.
    pub fn bundled(name: &str) -> Result<Self> {
        let (text, scheme_name) = match name {
            "japanese" => (JAPANESE_TSV, "japanese-vowel"),
            "english" => (ENGLISH_TSV, "english-6col"),
            other => return Err(Error::Parse(format!("no bundled lexicon {other:?}"))),
        };
        Self::from_tsv(name, &Scheme::bundled(scheme_name)?, text)
    }

    /// The bundled lexicon that goes with a bundled scheme.
    pub fn bundled_for(scheme: &Scheme) -> Result<Self> {
        let name = BUNDLED_LEXICONS
            .iter()
            .find(|(_, s)| *s == scheme.name)
            .map(|(l, _)| *l)
            .ok_or_else(|| Error::Parse(format!("no bundled lexicon for scheme {:?}", scheme.name)))?;
        Self::bundled(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scheme(&self) -> &Scheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in rank order.
    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn warnings(&self) -> &[LexiconWarning] {
        &self.warnings
    }

    pub fn skeleton_count(&self) -> usize {
        self.index.len()
    }

    pub fn get(&self, reading: &str) -> Option<&LexiconEntry> {
        self.entries.iter().find(|e| e.reading == reading)
    }

    pub fn skeletonize(&self, reading: &str) -> Result<Skeleton> {
        skeletonize(&self.scheme, reading)
    }

    /// Matches ordered by rank (unranked last), then reading.
    pub fn query(&self, skeleton: &Skeleton) -> Vec<&LexiconEntry> {
        self.index
            .get(skeleton)
            .map(|ix| ix.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    /// Every non-empty one-symbol substitution of `skeleton`, largest first.
    pub fn neighbors(&self, skeleton: &Skeleton) -> Vec<Neighbor> {
        let order = |s: &Symbol| self.scheme.symbols.iter().position(|x| x == s).unwrap_or(usize::MAX);
        let mut out = Vec::new();
        for position in 1..=POSITIONS {
            let Ok(choices) = self.scheme.symbols_at(position) else {
                continue;
            };
            for sym in choices {
                if sym == skeleton.0[position - 1] {
                    continue;
                }
                let variant = skeleton.with(position, sym.clone());
                if Skeleton::new(&self.scheme, variant.0.clone()).is_err() {
                    continue;
                }
                let entries: Vec<LexiconEntry> = self.query(&variant).into_iter().cloned().collect();
                if !entries.is_empty() {
                    out.push(Neighbor {
                        skeleton: variant,
                        position,
                        symbol: sym,
                        entries,
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            b.entries
                .len()
                .cmp(&a.entries.len())
                .then(a.position.cmp(&b.position))
                .then(order(&a.symbol).cmp(&order(&b.symbol)))
        });
        out
    }
}

/// Parses `surface<TAB>reading<TAB>gloss<TAB>frequency_rank`; gloss and rank
/// may be empty or missing. Also returns the line number of each reading.
pub fn parse_tsv(text: &str) -> Result<(Vec<LexiconEntry>, HashMap<String, usize>)> {
    let mut entries = Vec::new();
    let mut lines = HashMap::new();
    for (n, line) in text.lines().enumerate() {
        let lineno = n + 1;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 2 || cols.len() > 4 {
            return Err(Error::Parse(format!(
                "line {lineno}: expected 2-4 tab-separated columns, got {}",
                cols.len()
            )));
        }
        let gloss = cols.get(2).map(|g| g.trim()).filter(|g| !g.is_empty());
        let rank = match cols.get(3).map(|r| r.trim()).filter(|r| !r.is_empty()) {
            Some(r) => Some(
                r.parse::<u32>()
                    .map_err(|_| Error::Parse(format!("line {lineno}: bad rank {r:?}")))?,
            ),
            None => None,
        };
        let entry = LexiconEntry::new(cols[0].trim(), cols[1].trim(), gloss, rank);
        lines.entry(entry.reading.clone()).or_insert(lineno);
        entries.push(entry);
    }
    Ok((entries, lines))
}

pub fn to_tsv(entries: &[LexiconEntry]) -> String {
    let mut out = String::new();
    for e in entries {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            e.surface,
            e.reading,
            e.gloss.as_deref().unwrap_or(""),
            e.frequency_rank.map(|r| r.to_string()).unwrap_or_default()
        ));
    }
    out
}
