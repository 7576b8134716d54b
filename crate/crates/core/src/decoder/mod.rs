//! One-best decoding: per-frame greedy CTC decoding and WFST beam search.

mod beam;
mod score;

pub use beam::{beam_decode, BeamConfig, DecodeResult};
pub use score::{evaluate_error_rate, ErrorRate};

use crate::crfloss::PosteriorMatrix;
use crate::symbols::Alphabet;

/// Per-frame argmax (lowest id wins ties) collapsed through B; returns
/// label state ids.
pub fn greedy_decode_states(posterior: &PosteriorMatrix) -> Vec<usize> {
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..posterior.frames() {
        let row = posterior.row(t);
        let mut best = 0;
        for (s, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = s;
            }
        }
        if Some(best) != prev && best != Alphabet::BLANK {
            out.push(best);
        }
        prev = Some(best);
    }
    out
}

/// Greedy decode to label names.
pub fn greedy_decode(posterior: &PosteriorMatrix, alphabet: &Alphabet) -> Vec<String> {
    alphabet.decode(&greedy_decode_states(posterior))
}
