use std::collections::HashMap;

use super::{build_ctc_topology, compose, Arc, Wfst};
use crate::error::{Error, Result};
use crate::lm::{lm_to_fst_closed, lm_to_fst_with_symbols, NGramModel};
use crate::symbols::{Alphabet, SymbolTable, EPSILON};
use crate::Semiring;

/// Word pronunciations over the label alphabet.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    prons: HashMap<String, Vec<Vec<String>>>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add<S: AsRef<str>>(&mut self, word: &str, pron: &[S]) {
        self.prons
            .entry(word.to_string())
            .or_default()
            .push(pron.iter().map(|s| s.as_ref().to_string()).collect());
    }

    /// `word l1 l2 ...` per line, whitespace separated. A word may repeat
    /// to list alternative pronunciations.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::new();
        for (i, line) in text.lines().enumerate() {
            let mut fields = line.split_whitespace();
            let Some(word) = fields.next() else { continue };
            let pron: Vec<&str> = fields.collect();
            if pron.is_empty() {
                return Err(Error::Format {
                    what: "lexicon",
                    msg: format!("line {}: `{word}` has an empty pronunciation", i + 1),
                });
            }
            lex.add(word, &pron);
        }
        Ok(lex)
    }

    pub fn pronunciations(&self, word: &str) -> &[Vec<String>] {
        self.prons.get(word).map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.prons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prons.is_empty()
    }
}

/// Lexicon transducer from label strings to word strings: a single
/// start/final hub, one loop per pronunciation emitting the word on its
/// first label. Every word in `words` needs a pronunciation.
pub fn lexicon_to_fst(lexicon: &Lexicon, alphabet: &Alphabet, words: &SymbolTable) -> Result<Wfst> {
    let sr = Semiring::Log;
    let mut fst = Wfst::new(sr, alphabet.label_symbols(), words.clone());
    let hub = fst.add_state();
    fst.set_start(hub);
    fst.set_final(hub, sr.one());
    for (word_id, word) in words.iter().filter(|&(id, _)| id != EPSILON) {
        let prons = lexicon.pronunciations(word);
        if prons.is_empty() {
            return Err(Error::MissingPronunciation(word.to_string()));
        }
        for pron in prons {
            let labels = alphabet.encode(pron)?;
            let mut src = hub;
            for (k, &label) in labels.iter().enumerate() {
                let dst = if k + 1 == labels.len() {
                    hub
                } else {
                    fst.add_state()
                };
                let out = if k == 0 { word_id } else { EPSILON };
                fst.add_arc(src, Arc::new(label as u32, out, sr.one(), dst));
                src = dst;
            }
        }
    }
    Ok(fst)
}

/// Denominator graph: CTC topology composed with the label LM, in the log
/// semiring. The LM side is the epsilon-free closed-vocabulary acceptor, so
/// each state sequence has exactly one path weighted by `log p(B(π))`.
pub fn build_denominator_graph(alphabet: &Alphabet, lm: &NGramModel) -> Result<Wfst> {
    let labels = alphabet.label_symbols();
    if lm.num_words() != alphabet.num_labels() || lm.words().any(|(_, w)| labels.find(w).is_none()) {
        return Err(Error::SymbolTableMismatch(
            "denominator LM vocabulary must equal the label alphabet".into(),
        ));
    }
    let topo = build_ctc_topology(alphabet)?;
    let grammar = lm_to_fst_closed(lm, &labels)?;
    compose(&topo, &grammar)
}

/// Decoding graph T∘(L∘G) in the tropical semiring. Without a lexicon the
/// labels are the words and every LM word must be a label.
pub fn build_decoding_graph(
    alphabet: &Alphabet,
    lexicon: Option<&Lexicon>,
    word_lm: &NGramModel,
) -> Result<Wfst> {
    if word_lm.num_words() == 0 {
        return Err(Error::Construction("word LM has no words".into()));
    }
    let topo = build_ctc_topology(alphabet)?.with_semiring(Semiring::Tropical);
    match lexicon {
        Some(lex) => {
            let words = word_lm.word_symbols();
            let lexicon_fst = lexicon_to_fst(lex, alphabet, &words)?.with_semiring(Semiring::Tropical);
            let grammar = lm_to_fst_with_symbols(word_lm, &words)?.with_semiring(Semiring::Tropical);
            let lg = compose(&lexicon_fst, &grammar)?;
            compose(&topo, &lg)
        }
        None => {
            let labels = alphabet.label_symbols();
            if let Some((_, w)) = word_lm.words().find(|(_, w)| labels.find(w).is_none()) {
                return Err(Error::MissingPronunciation(w.to_string()));
            }
            let grammar = lm_to_fst_with_symbols(word_lm, &labels)?.with_semiring(Semiring::Tropical);
            compose(&topo, &grammar)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::estimate;
    use crate::symbols::state_to_fst_label;

    #[test]
    fn lexicon_word_transduces_through_topology() {
        let alphabet = Alphabet::new(["g", "o"]).unwrap();
        let mut lex = Lexicon::new();
        lex.add("go", &["g", "o"]);
        let lm = estimate(&[vec!["go"]], 1, 0.5).unwrap();
        let graph = build_decoding_graph(&alphabet, Some(&lex), &lm).unwrap();
        // g g <blk> o
        let input: Vec<u32> = [1, 1, 0, 2].iter().map(|&s| state_to_fst_label(s)).collect();
        let outs = graph.transduce(&input);
        assert!(!outs.is_empty());
        let go = graph.osyms().find("go").unwrap();
        assert!(outs.iter().all(|(o, _)| o == &vec![go]));
    }

    #[test]
    fn missing_pronunciation_names_the_word() {
        let alphabet = Alphabet::new(["g", "o"]).unwrap();
        let lex = Lexicon::new();
        let lm = estimate(&[vec!["go"]], 1, 0.5).unwrap();
        match build_decoding_graph(&alphabet, Some(&lex), &lm) {
            Err(Error::MissingPronunciation(w)) => assert_eq!(w, "go"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            build_decoding_graph(&alphabet, None, &lm),
            Err(Error::MissingPronunciation(_))
        ));
    }

    #[test]
    fn empty_word_lm_is_an_error() {
        let alphabet = Alphabet::new(["a"]).unwrap();
        let lm = NGramModel::empty(1).unwrap();
        assert!(build_decoding_graph(&alphabet, None, &lm).is_err());
    }

    #[test]
    fn denominator_rejects_foreign_vocabulary() {
        let alphabet = Alphabet::new(["a", "b"]).unwrap();
        let lm = estimate(&[vec!["a", "c"]], 1, 0.5).unwrap();
        assert!(matches!(
            build_denominator_graph(&alphabet, &lm),
            Err(Error::SymbolTableMismatch(_))
        ));
    }

    #[test]
    fn lexicon_parse() {
        let lex = Lexicon::parse("go g o\ngo g o o\n\nno n o\n").unwrap();
        assert_eq!(lex.pronunciations("go").len(), 2);
        assert!(Lexicon::parse("go\n").is_err());
    }
}
