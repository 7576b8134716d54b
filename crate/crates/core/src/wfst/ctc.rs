use super::{Arc, Wfst};
use crate::error::{Error, Result};
use crate::symbols::{state_to_fst_label, Alphabet, EPSILON};
use crate::Semiring;

/// CTC topology transducer from S_π strings to label strings.
///
/// State 0 (blank/start) plus one state per label, all final:
/// - state 0: blank self-loop `<blk>:ε`, entry arc to each label state `i:i`
/// - label state `i`: self-loop `i:ε`, exit `<blk>:ε` to 0, cross arc `j:j`
///   to every other label state `j`
///
/// Blank arcs never emit; the machine is input-deterministic and maps each
/// input string to exactly the collapsed label string.
pub fn build_ctc_topology(alphabet: &Alphabet) -> Result<Wfst> {
    if alphabet.is_empty() {
        return Err(Error::Construction("CTC topology needs at least one label".into()));
    }
    let sr = Semiring::Log;
    let mut t = Wfst::new(sr, alphabet.state_symbols(), alphabet.label_symbols());
    let n = alphabet.num_labels();
    for _ in 0..=n {
        let s = t.add_state();
        t.set_final(s, sr.one());
    }
    t.set_start(0);

    let blank = state_to_fst_label(Alphabet::BLANK);
    t.add_arc(0, Arc::new(blank, EPSILON, sr.one(), 0));
    for i in 1..=n {
        t.add_arc(0, Arc::new(state_to_fst_label(i), i as u32, sr.one(), i));
    }
    for i in 1..=n {
        t.add_arc(i, Arc::new(state_to_fst_label(i), EPSILON, sr.one(), i));
        t.add_arc(i, Arc::new(blank, EPSILON, sr.one(), 0));
        for j in (1..=n).filter(|&j| j != i) {
            t.add_arc(i, Arc::new(state_to_fst_label(j), j as u32, sr.one(), j));
        }
    }
    Ok(t)
}

/// Reference collapse: merge runs of identical symbols, then drop blanks.
/// Input and output are state ids (labels keep their state id).
pub fn map_b(pi: &[usize], alphabet: &Alphabet) -> Result<Vec<usize>> {
    let size = alphabet.num_states();
    let mut out = Vec::new();
    let mut prev = None;
    for &s in pi {
        if s >= size {
            return Err(Error::SymbolOutOfRange { symbol: s, size });
        }
        if Some(s) != prev && s != Alphabet::BLANK {
            out.push(s);
        }
        prev = Some(s);
    }
    Ok(out)
}
