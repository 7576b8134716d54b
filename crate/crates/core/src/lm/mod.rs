//! Backoff n-gram language models over labels or words.
//!
//! Probabilities are stored as log10 values (the ARPA convention) and
//! converted to natural log exactly once, when scoring or building FSTs.

mod arpa;
mod estimate;
mod fst;

pub use arpa::{emit_arpa, parse_arpa};
pub use estimate::{estimate, estimate_with_vocabulary, parse_corpus, NGramCounts};
pub use fst::{lm_to_fst, lm_to_fst_closed, lm_to_fst_with_symbols};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::symbols::SymbolTable;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
/// log10 probability ARPA files give to `<s>`, which is never predicted.
pub const BOS_LOG10_PROB: f64 = -99.0;

pub(crate) const LN_10: f64 = std::f64::consts::LN_10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NGramEntry {
    pub log10_prob: f64,
    pub log10_backoff: Option<f64>,
}

/// Backoff n-gram model. Vocabulary ids: `<eps>` 0 (unused), `<s>` 1,
/// `</s>` 2, then words.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab: SymbolTable,
    // entries[k] holds n-grams of length k + 1
    entries: Vec<HashMap<Vec<u32>, NGramEntry>>,
}

impl NGramModel {
    /// Model with the given vocabulary and no n-grams.
    pub fn empty(order: usize) -> Result<Self> {
        Self::with_vocabulary(order, std::iter::empty::<&str>())
    }

    pub(crate) fn with_vocabulary<S: AsRef<str>>(
        order: usize,
        words: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        if order == 0 {
            return Err(Error::Lm("order must be at least 1".into()));
        }
        let mut vocab = SymbolTable::new();
        vocab.add(BOS);
        vocab.add(EOS);
        for w in words {
            vocab.add(w.as_ref());
        }
        Ok(NGramModel {
            order,
            vocab,
            entries: vec![HashMap::new(); order],
        })
    }

    /// Builds a model from explicit entries and checks the prefix invariant.
    pub fn from_entries(
        order: usize,
        vocab: SymbolTable,
        entries: Vec<HashMap<Vec<u32>, NGramEntry>>,
    ) -> Result<Self> {
        if order == 0 || entries.len() != order {
            return Err(Error::Lm("entry table does not match order".into()));
        }
        if vocab.find(BOS) != Some(1) || vocab.find(EOS) != Some(2) {
            return Err(Error::Lm("vocabulary must start with <s>, </s>".into()));
        }
        let model = NGramModel {
            order,
            vocab,
            entries,
        };
        for k in 1..order {
            for ngram in model.entries[k].keys() {
                if ngram.len() != k + 1 {
                    return Err(Error::Lm(format!("n-gram of wrong length in order {}", k + 1)));
                }
                if !model.entries[k - 1].contains_key(&ngram[..k]) {
                    return Err(Error::Lm(format!(
                        "context `{}` of `{}` is missing",
                        model.render(&ngram[..k]),
                        model.render(ngram)
                    )));
                }
            }
        }
        Ok(model)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab(&self) -> &SymbolTable {
        &self.vocab
    }

    pub fn bos(&self) -> u32 {
        1
    }

    pub fn eos(&self) -> u32 {
        2
    }

    /// Predictable words, excluding the sentence boundaries.
    pub fn words(&self) -> impl Iterator<Item = (u32, &str)> {
        self.vocab.iter().filter(|&(id, _)| id > 2)
    }

    pub fn num_words(&self) -> usize {
        self.vocab.len().saturating_sub(3)
    }

    /// Symbol table over the words: `<eps>` 0 then words in vocabulary order.
    pub fn word_symbols(&self) -> SymbolTable {
        let mut t = SymbolTable::new();
        for (_, w) in self.words() {
            t.add(w);
        }
        t
    }

    pub fn entry(&self, ngram: &[u32]) -> Option<&NGramEntry> {
        if ngram.is_empty() || ngram.len() > self.order {
            return None;
        }
        self.entries[ngram.len() - 1].get(ngram)
    }

    /// Number of n-grams of length `n`.
    pub fn count(&self, n: usize) -> usize {
        self.entries.get(n.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    /// Entries of length `n` sorted by id sequence.
    pub fn sorted_entries(&self, n: usize) -> Vec<(&Vec<u32>, &NGramEntry)> {
        let mut v: Vec<_> = self.entries[n - 1].iter().collect();
        v.sort_by(|a, b| a.0.cmp(b.0));
        v
    }

    pub(crate) fn render(&self, ngram: &[u32]) -> String {
        ngram
            .iter()
            .map(|&id| self.vocab.symbol(id).unwrap_or("?"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// log10 p(word | context) through the backoff recursion. `None` when the
    /// word has no unigram probability.
    pub fn log10_cond(&self, context: &[u32], word: u32) -> Option<f64> {
        let keep = context.len().min(self.order - 1);
        let mut context = &context[context.len() - keep..];
        let mut backoff = 0.0;
        loop {
            let mut ngram = context.to_vec();
            ngram.push(word);
            if let Some(e) = self.entries[context.len()].get(&ngram) {
                return Some(backoff + e.log10_prob);
            }
            if context.is_empty() {
                return None;
            }
            if let Some(bo) = self.entries[context.len() - 1]
                .get(context)
                .and_then(|e| e.log10_backoff)
            {
                backoff += bo;
            }
            context = &context[1..];
        }
    }

    /// Natural-log conditional probability; `-inf` for unknown words.
    pub fn ln_cond(&self, context: &[u32], word: u32) -> f64 {
        self.log10_cond(context, word)
            .map_or(f64::NEG_INFINITY, |p| p * LN_10)
    }

    pub fn encode<S: AsRef<str>>(&self, words: &[S]) -> Result<Vec<u32>> {
        words
            .iter()
            .map(|w| {
                let w = w.as_ref();
                match self.vocab.find(w) {
                    Some(id) if id > 2 => Ok(id),
                    _ => Err(Error::Oov(w.to_string())),
                }
            })
            .collect()
    }

    /// Natural-log probability of `<s> words </s>`.
    pub fn score_sequence<S: AsRef<str>>(&self, words: &[S]) -> Result<f64> {
        let ids = self.encode(words)?;
        self.score_ids(&ids)
    }

    /// Same as [`score_sequence`](Self::score_sequence) on vocabulary ids.
    pub fn score_ids(&self, ids: &[u32]) -> Result<f64> {
        let mut history = vec![self.bos()];
        let mut total = 0.0;
        for &w in ids.iter().chain(std::iter::once(&self.eos())) {
            let p = self
                .log10_cond(&history, w)
                .ok_or_else(|| Error::Oov(self.render(&[w])))?;
            total += p;
            history.push(w);
        }
        Ok(total * LN_10)
    }

    /// Histories that can condition a prediction: the empty context plus
    /// every stored n-gram shorter than the order that carries a backoff
    /// weight or extends to a longer n-gram. `</s>`-final n-grams are never
    /// contexts.
    pub fn contexts(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for k in 0..self.order.saturating_sub(1) {
            let mut level: Vec<Vec<u32>> = self.entries[k]
                .iter()
                .filter(|(ngram, e)| {
                    ngram.last() != Some(&self.eos())
                        && (e.log10_backoff.is_some()
                            || self.entries[k + 1].keys().any(|g| g[..k + 1] == ngram[..]))
                })
                .map(|(ngram, _)| ngram.clone())
                .collect();
            level.sort();
            out.extend(level);
        }
        if self.order > 1 && !out.iter().any(|c| c == &[self.bos()]) {
            out.push(vec![self.bos()]);
        }
        out
    }

    /// Total probability of all next symbols (words and `</s>`) after
    /// `context`; 1 for a normalized model.
    pub fn next_symbol_mass(&self, context: &[u32]) -> f64 {
        self.words()
            .map(|(id, _)| id)
            .chain(std::iter::once(self.eos()))
            .filter_map(|w| self.log10_cond(context, w))
            .map(|p| 10f64.powf(p))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scoring_is_deterministic() {
        let lm = estimate(&[vec!["a", "b"], vec!["b"]], 2, 0.5).unwrap();
        let s1 = lm.score_sequence(&["a", "b", "b"]).unwrap();
        let s2 = lm.score_sequence(&["a", "b", "b"]).unwrap();
        assert_eq!(s1.to_bits(), s2.to_bits());
    }

    #[test]
    fn empty_sequence_scores_end_of_sentence() {
        let lm = estimate(&[vec!["a", "b"], vec![]], 2, 0.5).unwrap();
        let want = lm.log10_cond(&[lm.bos()], lm.eos()).unwrap() * LN_10;
        assert_eq!(lm.score_sequence::<&str>(&[]).unwrap(), want);
    }

    #[test]
    fn oov_is_an_error() {
        let lm = estimate(&[vec!["a"]], 1, 0.5).unwrap();
        assert!(matches!(lm.score_sequence(&["z"]), Err(Error::Oov(w)) if w == "z"));
        assert!(lm.score_sequence(&["</s>"]).is_err());
    }

    #[test]
    fn from_entries_checks_prefixes() {
        let mut vocab = SymbolTable::new();
        for s in [BOS, EOS, "a"] {
            vocab.add(s);
        }
        let e = NGramEntry {
            log10_prob: -0.5,
            log10_backoff: None,
        };
        let mut entries = vec![HashMap::new(), HashMap::new()];
        entries[0].insert(vec![3], e);
        entries[1].insert(vec![1, 3], e);
        assert!(NGramModel::from_entries(2, vocab, entries).is_err());
    }
}
