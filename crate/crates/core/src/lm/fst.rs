use std::collections::HashMap;

use super::{NGramModel, LN_10};
use crate::error::{Error, Result};
use crate::symbols::{SymbolTable, EPSILON};
use crate::wfst::{Arc, Wfst};
use crate::Semiring;

struct ContextStates {
    ids: HashMap<Vec<u32>, usize>,
    contexts: Vec<Vec<u32>>,
}

impl ContextStates {
    fn new(lm: &NGramModel, fst: &mut Wfst) -> Self {
        let contexts = lm.contexts();
        let ids = contexts
            .iter()
            .map(|c| (c.clone(), fst.add_state()))
            .collect();
        ContextStates { ids, contexts }
    }

    /// State of the longest suffix of `history` that is a context.
    fn state_for(&self, lm: &NGramModel, history: &[u32]) -> usize {
        let keep = history.len().min(lm.order() - 1);
        let mut h = &history[history.len() - keep..];
        loop {
            if let Some(&s) = self.ids.get(h) {
                return s;
            }
            h = &h[1..];
        }
    }
}

fn word_map(lm: &NGramModel, symbols: &SymbolTable) -> Result<Vec<(u32, u32)>> {
    lm.words()
        .map(|(id, w)| {
            symbols
                .find(w)
                .filter(|&l| l != EPSILON)
                .map(|l| (id, l))
                .ok_or_else(|| {
                    Error::SymbolTableMismatch(format!("LM word `{w}` missing from symbol table"))
                })
        })
        .collect()
}

/// Backoff acceptor over the model's own word table.
pub fn lm_to_fst(lm: &NGramModel) -> Wfst {
    lm_to_fst_with_symbols(lm, &lm.word_symbols()).expect("own word table covers the model")
}

/// Backoff acceptor: one state per context, n-gram arcs weighted by
/// natural-log probability, epsilon arcs to the backed-off context weighted
/// by the backoff weight, final weight from explicit `</s>` entries. The
/// start state is the `<s>` context.
///
/// Backoff arcs are plain epsilons, so a word with an explicit n-gram can
/// also be read through the backoff path. The path that always takes the
/// explicit n-gram when one exists scores the sequence exactly; other paths
/// may score higher or lower, and the path sum over-counts.
pub fn lm_to_fst_with_symbols(lm: &NGramModel, symbols: &SymbolTable) -> Result<Wfst> {
    let words: HashMap<u32, u32> = word_map(lm, symbols)?.into_iter().collect();
    let sr = Semiring::Log;
    let mut fst = Wfst::new(sr, symbols.clone(), symbols.clone());
    let states = ContextStates::new(lm, &mut fst);
    let start = states.state_for(lm, &[lm.bos()]);
    fst.set_start(start);

    let has_any = (1..=lm.order()).any(|n| lm.count(n) > 0);
    for (ci, context) in states.contexts.iter().enumerate() {
        let src = states.ids[context];
        debug_assert_eq!(src, ci);
        if context.len() < lm.order() {
            let mut next: Vec<_> = lm
                .sorted_entries(context.len() + 1)
                .into_iter()
                .filter(|(g, _)| g[..context.len()] == context[..])
                .collect();
            next.sort_by(|a, b| a.0.cmp(b.0));
            for (ngram, entry) in next {
                let w = *ngram.last().expect("non-empty n-gram");
                let weight = entry.log10_prob * LN_10;
                if w == lm.eos() {
                    fst.set_final(src, weight);
                } else if let Some(&label) = words.get(&w) {
                    let dst = states.state_for(lm, ngram);
                    fst.add_arc(src, Arc::new(label, label, weight, dst));
                }
            }
        }
        if !context.is_empty() {
            let backoff = lm
                .entry(context)
                .and_then(|e| e.log10_backoff)
                .unwrap_or(0.0)
                * LN_10;
            let dst = states.state_for(lm, &context[1..]);
            fst.add_arc(src, Arc::new(EPSILON, EPSILON, backoff, dst));
        }
    }
    if !has_any {
        fst.set_final(start, sr.one());
    }
    Ok(fst)
}

/// Epsilon-free acceptor over a closed vocabulary: every context state gets
/// one arc per word carrying the full backoff-resolved probability. Each
/// word sequence has exactly one path, weighted by its exact log
/// probability, so path sums are exact.
pub fn lm_to_fst_closed(lm: &NGramModel, symbols: &SymbolTable) -> Result<Wfst> {
    let words = word_map(lm, symbols)?;
    let sr = Semiring::Log;
    let mut fst = Wfst::new(sr, symbols.clone(), symbols.clone());
    let states = ContextStates::new(lm, &mut fst);
    fst.set_start(states.state_for(lm, &[lm.bos()]));
    for context in &states.contexts {
        let src = states.ids[context];
        for &(id, label) in &words {
            let weight = lm.ln_cond(context, id);
            if weight == f64::NEG_INFINITY {
                continue;
            }
            let mut history = context.clone();
            history.push(id);
            let dst = states.state_for(lm, &history);
            fst.add_arc(src, Arc::new(label, label, weight, dst));
        }
        fst.set_final(src, lm.ln_cond(context, lm.eos()));
    }
    Ok(fst.trim())
}
