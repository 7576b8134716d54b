use std::collections::{BTreeMap, HashMap};

use super::{NGramEntry, NGramModel, BOS_LOG10_PROB};
use crate::error::{Error, Result};

/// Raw n-gram counts over `<s> sentence </s>`, keyed by vocabulary ids.
#[derive(Debug, Clone)]
pub struct NGramCounts {
    model: NGramModel,
    closed: bool,
    // counts[k]: n-grams of length k + 1
    counts: Vec<HashMap<Vec<u32>, f64>>,
}

impl NGramCounts {
    /// Open vocabulary: words are added as they are seen.
    pub fn new(order: usize) -> Result<Self> {
        Ok(NGramCounts {
            model: NGramModel::empty(order)?,
            closed: false,
            counts: vec![HashMap::new(); order],
        })
    }

    /// Closed vocabulary: sentences may only use `words`.
    pub fn with_vocabulary<S: AsRef<str>>(order: usize, words: &[S]) -> Result<Self> {
        Ok(NGramCounts {
            model: NGramModel::with_vocabulary(order, words)?,
            closed: true,
            counts: vec![HashMap::new(); order],
        })
    }

    pub fn add_sentence<S: AsRef<str>>(&mut self, sentence: &[S]) -> Result<()> {
        let mut tokens = vec![self.model.bos()];
        for w in sentence {
            let w = w.as_ref();
            if w == super::BOS || w == super::EOS {
                return Err(Error::Lm(format!("sentence boundary `{w}` inside a sentence")));
            }
            let id = match self.model.vocab.find(w) {
                Some(id) => id,
                None if self.closed => return Err(Error::Oov(w.to_string())),
                None => self.model.vocab.add(w),
            };
            tokens.push(id);
        }
        tokens.push(self.model.eos());
        for i in 1..tokens.len() {
            for n in 1..=self.model.order.min(i + 1) {
                *self.counts[n - 1]
                    .entry(tokens[i + 1 - n..=i].to_vec())
                    .or_insert(0.0) += 1.0;
            }
        }
        Ok(())
    }

    pub fn count(&self, ngram: &[u32]) -> f64 {
        if ngram.is_empty() || ngram.len() > self.counts.len() {
            return 0.0;
        }
        self.counts[ngram.len() - 1].get(ngram).copied().unwrap_or(0.0)
    }

    pub fn id(&self, word: &str) -> Option<u32> {
        self.model.vocab.find(word)
    }

    /// Absolute-discounting backoff estimate.
    ///
    /// Unigrams: `max(c - D, 0) / N` plus the discounted mass `D * seen / N`
    /// spread uniformly over the vocabulary (with `</s>`). Higher orders:
    /// `(c(h w) - D) / c(h)` for seen words, the remainder handed to the
    /// shorter context through a normalizing backoff weight. A context that
    /// has seen every symbol keeps its maximum-likelihood estimate.
    pub fn estimate(&self, discount: f64) -> Result<NGramModel> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::Lm(format!("discount {discount} outside (0, 1)")));
        }
        let mut model = self.model.clone();
        let order = model.order;
        let predictable: Vec<u32> = model
            .words()
            .map(|(id, _)| id)
            .chain(std::iter::once(model.eos()))
            .collect();
        let total: f64 = self.counts[0].values().sum();
        if total == 0.0 {
            return Err(Error::Lm("empty corpus".into()));
        }

        let seen = self.counts[0].len() as f64;
        let floor = discount * seen / (total * predictable.len() as f64);
        for &w in &predictable {
            let c = self.count(&[w]);
            let p = (c - discount).max(0.0) / total + floor;
            model.entries[0].insert(
                vec![w],
                NGramEntry {
                    log10_prob: p.log10(),
                    log10_backoff: None,
                },
            );
        }
        let bos = model.bos();
        model.entries[0].insert(
            vec![bos],
            NGramEntry {
                log10_prob: BOS_LOG10_PROB,
                log10_backoff: None,
            },
        );

        for n in 2..=order {
            // group n-gram counts by context, in a stable order
            let mut by_context: BTreeMap<Vec<u32>, Vec<(u32, f64)>> = BTreeMap::new();
            for (ngram, &c) in &self.counts[n - 1] {
                by_context
                    .entry(ngram[..n - 1].to_vec())
                    .or_default()
                    .push((ngram[n - 1], c));
            }
            for (context, mut next) in by_context {
                next.sort_by_key(|e| e.0);
                let context_total: f64 = next.iter().map(|e| e.1).sum();
                let d = if next.len() == predictable.len() {
                    0.0
                } else {
                    discount
                };
                let mut kept = 0.0;
                let mut lower = 0.0;
                for &(w, c) in &next {
                    let p = (c - d) / context_total;
                    kept += p;
                    lower += model
                        .log10_cond(&context[1..], w)
                        .map_or(0.0, |lp| 10f64.powf(lp));
                    let mut ngram = context.clone();
                    ngram.push(w);
                    model.entries[n - 1].insert(
                        ngram,
                        NGramEntry {
                            log10_prob: p.log10(),
                            log10_backoff: None,
                        },
                    );
                }
                let backoff = if d == 0.0 || lower >= 1.0 {
                    1.0
                } else {
                    ((1.0 - kept) / (1.0 - lower)).max(f64::MIN_POSITIVE)
                };
                let entry = model.entries[n - 2]
                    .get_mut(&context)
                    .expect("context counted at lower order");
                entry.log10_backoff = Some(backoff.log10());
            }
        }
        Ok(model)
    }
}

/// Estimates an absolute-discounting backoff model; the vocabulary is every
/// word in the corpus.
pub fn estimate<S: AsRef<str>>(
    corpus: &[Vec<S>],
    order: usize,
    discount: f64,
) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::Lm("empty corpus".into()));
    }
    let mut counts = NGramCounts::new(order)?;
    for sentence in corpus {
        counts.add_sentence(sentence)?;
    }
    counts.estimate(discount)
}

/// As [`estimate`] with a closed vocabulary; unseen vocabulary words get
/// probability through backoff.
pub fn estimate_with_vocabulary<S: AsRef<str>, V: AsRef<str>>(
    corpus: &[Vec<S>],
    order: usize,
    discount: f64,
    vocabulary: &[V],
) -> Result<NGramModel> {
    if corpus.is_empty() {
        return Err(Error::Lm("empty corpus".into()));
    }
    let mut counts = NGramCounts::with_vocabulary(order, vocabulary)?;
    for sentence in corpus {
        counts.add_sentence(sentence)?;
    }
    counts.estimate(discount)
}

/// One whitespace-tokenized sentence per line; blank lines are skipped.
pub fn parse_corpus(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::LN_10;
    use proptest::prelude::*;

    fn p(lm: &NGramModel, context: &[&str], w: &str) -> f64 {
        let ids: Vec<u32> = context.iter().map(|s| lm.vocab().find(s).unwrap()).collect();
        10f64.powf(lm.log10_cond(&ids, lm.vocab().find(w).unwrap()).unwrap())
    }

    #[test]
    fn unigram_hand_computed() {
        // counts a:2 b:1 </s>:3, N = 6, D = 0.5, 3 seen of 3 symbols
        let lm = estimate(&[vec!["a"], vec!["a"], vec!["b"]], 1, 0.5).unwrap();
        let floor = 0.5 * 3.0 / (6.0 * 3.0);
        assert!((p(&lm, &[], "a") - (1.5 / 6.0 + floor)).abs() < 1e-12);
        assert!((p(&lm, &[], "b") - (0.5 / 6.0 + floor)).abs() < 1e-12);
        assert!((p(&lm, &[], "</s>") - (2.5 / 6.0 + floor)).abs() < 1e-12);
        assert!(p(&lm, &[], "a") > p(&lm, &[], "b"));
        assert!((lm.next_symbol_mass(&[]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bigram_beats_unigram_on_seen_pair() {
        let lm = estimate(&[vec!["a", "b"]], 2, 0.5).unwrap();
        // c(a b) = 1 of c(a ·) = 1, 1 of 3 symbols seen: (1 - 0.5) / 1
        assert!((p(&lm, &["a"], "b") - 0.5).abs() < 1e-12);
        // unigram: 0.5/3 + 0.5*3/(3*3)
        assert!((p(&lm, &[], "b") - (0.5 / 3.0 + 1.5 / 9.0)).abs() < 1e-12);
        assert!(p(&lm, &["a"], "b") > p(&lm, &[], "b"));
    }

    #[test]
    fn single_symbol_corpus() {
        let lm = estimate(&[vec!["a"]], 1, 0.5).unwrap();
        assert_eq!(lm.num_words(), 1);
        assert_eq!(lm.count(1), 3); // a, </s>, <s>
        let score = lm.score_sequence(&["a"]).unwrap();
        let want = (p(&lm, &[], "a").log10() + p(&lm, &[], "</s>").log10()) * LN_10;
        assert!((score - want).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(estimate::<&str>(&[], 2, 0.5).is_err());
        assert!(estimate(&[vec!["a"]], 0, 0.5).is_err());
        assert!(estimate(&[vec!["a"]], 1, 1.5).is_err());
        assert!(estimate_with_vocabulary(&[vec!["z"]], 1, 0.5, &["a"]).is_err());
    }

    #[test]
    fn closed_vocabulary_covers_unseen_words() {
        let lm = estimate_with_vocabulary(&[vec!["a", "a"]], 2, 0.5, &["a", "b", "c"]).unwrap();
        assert!(lm.score_sequence(&["c", "b"]).unwrap().is_finite());
    }

    fn corpus() -> impl Strategy<Value = Vec<Vec<String>>> {
        let word = prop::sample::select(vec!["a", "b", "c", "d"]).prop_map(String::from);
        prop::collection::vec(prop::collection::vec(word, 0..6), 1..8)
    }

    proptest! {
        #[test]
        fn every_context_is_normalized(c in corpus(), order in 1usize..4, d in 0.05f64..0.95) {
            let lm = estimate(&c, order, d).unwrap();
            for ctx in lm.contexts() {
                let mass = lm.next_symbol_mass(&ctx);
                prop_assert!((mass - 1.0).abs() < 1e-6, "context {:?} mass {}", ctx, mass);
            }
        }

        #[test]
        fn adding_a_sentence_never_lowers_counts(c in corpus(), extra in corpus(), order in 1usize..4) {
            let mut counts = NGramCounts::new(order).unwrap();
            for s in &c {
                counts.add_sentence(s).unwrap();
            }
            let before = counts.clone();
            counts.add_sentence(&extra[0]).unwrap();
            let mut tokens = vec![1u32];
            tokens.extend(extra[0].iter().map(|w| counts.id(w).unwrap()));
            tokens.push(2);
            for i in 1..tokens.len() {
                for n in 1..=order.min(i + 1) {
                    let g = &tokens[i + 1 - n..=i];
                    prop_assert!(counts.count(g) >= before.count(g) + 1.0 - 1e-12);
                }
            }
        }
    }
}
