use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::hash::{Hash, Hasher};

use crate::error::{Error, Result};

pub const EPSILON: u32 = 0;
pub const EPS_SYMBOL: &str = "<eps>";
pub const BLANK_SYMBOL: &str = "<blk>";

/// Bidirectional map between symbol strings and dense ids. Id 0 is always
/// `<eps>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::new()
    }
}

impl SymbolTable {
    pub fn new() -> Self {
        let mut table = SymbolTable {
            symbols: Vec::new(),
            ids: HashMap::new(),
        };
        table.add(EPS_SYMBOL);
        table
    }

    /// Returns the id of `symbol`, inserting it if absent.
    pub fn add(&mut self, symbol: &str) -> u32 {
        if let Some(&id) = self.ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as u32;
        self.symbols.push(symbol.to_string());
        self.ids.insert(symbol.to_string(), id);
        id
    }

    pub fn find(&self, symbol: &str) -> Option<u32> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: u32) -> Option<&str> {
        self.symbols.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.len() <= 1
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &str)> {
        self.symbols
            .iter()
            .enumerate()
            .map(|(i, s)| (i as u32, s.as_str()))
    }

    /// Hash of the (id, symbol) content, independent of any table name.
    pub fn content_hash(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.symbols.hash(&mut hasher);
        hasher.finish()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (id, sym) in self.iter() {
            let _ = writeln!(out, "{sym}\t{id}");
        }
        out
    }

    /// Parses `symbol<TAB>id` lines. Ids must be dense and start at `<eps>` 0.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Format {
                what: "symbol table",
                msg: format!("line {}: {msg}", lineno + 1),
            };
            let mut fields = line.split('\t');
            let (Some(sym), Some(id), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(bad("expected `symbol<TAB>id`"));
            };
            let id: u32 = id.trim().parse().map_err(|_| bad("bad id"))?;
            entries.push((id, sym.to_string()));
        }
        entries.sort_by_key(|e| e.0);
        let mut table = SymbolTable {
            symbols: Vec::new(),
            ids: HashMap::new(),
        };
        for (expected, (id, sym)) in entries.into_iter().enumerate() {
            if id as usize != expected {
                return Err(Error::Format {
                    what: "symbol table",
                    msg: format!("ids are not dense at {id}"),
                });
            }
            if expected == 0 && sym != EPS_SYMBOL {
                return Err(Error::Format {
                    what: "symbol table",
                    msg: "id 0 must be <eps>".into(),
                });
            }
            if table.ids.insert(sym.clone(), id).is_some() {
                return Err(Error::Format {
                    what: "symbol table",
                    msg: format!("duplicate symbol `{sym}`"),
                });
            }
            table.symbols.push(sym);
        }
        if table.symbols.is_empty() {
            return Ok(SymbolTable::new());
        }
        Ok(table)
    }
}

/// The label set plus blank. State id 0 is blank; label `i` has state id
/// `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alphabet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl Alphabet {
    pub const BLANK: usize = 0;

    pub fn new<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let mut out = Vec::new();
        let mut index = HashMap::new();
        for label in labels {
            let label = label.as_ref();
            if label.is_empty() || label.chars().any(char::is_whitespace) {
                return Err(Error::Alphabet(format!("invalid label name {label:?}")));
            }
            if label == BLANK_SYMBOL || label == EPS_SYMBOL || label == "<s>" || label == "</s>" {
                return Err(Error::Alphabet(format!("reserved label name {label}")));
            }
            if index.insert(label.to_string(), out.len() + 1).is_some() {
                return Err(Error::Alphabet(format!("duplicate label {label}")));
            }
            out.push(label.to_string());
        }
        Ok(Alphabet { labels: out, index })
    }

    /// Reads one label per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        Self::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn num_labels(&self) -> usize {
        self.labels.len()
    }

    /// |S_π| = labels + blank.
    pub fn num_states(&self) -> usize {
        self.labels.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// State id of a label name.
    pub fn state_id(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Name of a state id (`<blk>` for 0).
    pub fn state_name(&self, state: usize) -> Option<&str> {
        match state {
            0 => Some(BLANK_SYMBOL),
            s => self.labels.get(s - 1).map(String::as_str),
        }
    }

    pub fn encode<S: AsRef<str>>(&self, labels: &[S]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|l| {
                self.state_id(l.as_ref())
                    .ok_or_else(|| Error::Oov(l.as_ref().to_string()))
            })
            .collect()
    }

    pub fn decode(&self, states: &[usize]) -> Vec<String> {
        states
            .iter()
            .filter_map(|&s| self.state_name(s).map(str::to_string))
            .collect()
    }

    /// Input symbol table of transducers over S_π: `<eps>` 0, `<blk>` 1,
    /// label `i` at `i + 2`. FST label = state id + 1.
    pub fn state_symbols(&self) -> SymbolTable {
        let mut table = SymbolTable::new();
        table.add(BLANK_SYMBOL);
        for l in &self.labels {
            table.add(l);
        }
        table
    }

    /// Label symbol table: `<eps>` 0, label `i` at `i + 1` (equal to its
    /// state id).
    pub fn label_symbols(&self) -> SymbolTable {
        let mut table = SymbolTable::new();
        for l in &self.labels {
            table.add(l);
        }
        table
    }
}

/// FST input label carrying state id `state`.
#[inline]
pub fn state_to_fst_label(state: usize) -> u32 {
    state as u32 + 1
}

/// Inverse of [`state_to_fst_label`]; `None` for epsilon.
#[inline]
pub fn fst_label_to_state(label: u32) -> Option<usize> {
    label.checked_sub(1).map(|s| s as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabet_ids() {
        let a = Alphabet::new(["a", "b"]).unwrap();
        assert_eq!(a.num_states(), 3);
        assert_eq!(a.state_id("a"), Some(1));
        assert_eq!(a.state_name(0), Some("<blk>"));
        assert_eq!(a.state_symbols().find("b"), Some(3));
        assert_eq!(a.label_symbols().find("b"), Some(2));
    }

    #[test]
    fn alphabet_rejects_bad_names() {
        assert!(Alphabet::new(["a", "a"]).is_err());
        assert!(Alphabet::new(["<blk>"]).is_err());
        assert!(Alphabet::new([""]).is_err());
    }

    #[test]
    fn symbol_table_text_round_trip() {
        let t = Alphabet::new(["x", "y"]).unwrap().state_symbols();
        let back = SymbolTable::parse_text(&t.to_text()).unwrap();
        assert_eq!(t, back);
        assert_eq!(t.content_hash(), back.content_hash());
        assert!(SymbolTable::parse_text("a\t0\n").is_err());
    }
}
