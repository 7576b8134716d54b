//! Seeded fixtures shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctccrf::lm::estimate_with_vocabulary;
use ctccrf::synthetic::{random_posteriors, spiky_posteriors, toy_alignment, toy_label_names};
use ctccrf::wfst::{build_decoding_graph, build_denominator_graph};
use ctccrf::{flatten_denominator, Alphabet, DenominatorTable, NGramModel, PosteriorMatrix, Wfst};

pub struct LossFixture {
    pub posterior: PosteriorMatrix,
    pub labels: Vec<usize>,
    pub log_pl: f64,
    pub den: DenominatorTable,
}

fn label_lm(alphabet: &Alphabet, order: usize, rng: &mut ChaCha8Rng) -> NGramModel {
    let n = alphabet.num_labels();
    let corpus: Vec<Vec<String>> = (0..200)
        .map(|_| {
            let len = rng.gen_range(2..12);
            (0..len).map(|_| alphabet.labels()[rng.gen_range(0..n)].clone()).collect()
        })
        .collect();
    estimate_with_vocabulary(&corpus, order, 0.5, alphabet.labels()).expect("label LM")
}

/// `num_labels` labels, an `order`-gram denominator and `frames` random
/// posterior frames with a transcript about a fifth as long.
pub fn loss_fixture(num_labels: usize, order: usize, frames: usize, seed: u64) -> LossFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = Alphabet::new(toy_label_names(num_labels)).expect("alphabet");
    let lm = label_lm(&alphabet, order, &mut rng);
    let den = flatten_denominator(&build_denominator_graph(&alphabet, &lm).expect("den graph"))
        .expect("flatten");
    let labels: Vec<usize> = (0..frames / 5).map(|_| rng.gen_range(1..=num_labels)).collect();
    let words = alphabet.decode(&labels);
    LossFixture {
        posterior: random_posteriors(frames, alphabet.num_states(), &mut rng).expect("posteriors"),
        log_pl: lm.score_sequence(&words).expect("log p(l)"),
        labels,
        den,
    }
}

pub struct DecodeFixture {
    pub posterior: PosteriorMatrix,
    pub graph: Wfst,
}

/// A bigram TLG over `num_labels` labels and a blank-dominated posterior
/// of roughly `frames` frames, peaked at `peak` on the aligned state.
pub fn decode_fixture(num_labels: usize, frames: usize, peak: f64, seed: u64) -> DecodeFixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alphabet = Alphabet::new(toy_label_names(num_labels)).expect("alphabet");
    let lm = label_lm(&alphabet, 2, &mut rng);
    let graph = build_decoding_graph(&alphabet, None, &lm).expect("TLG");
    let mut states = Vec::with_capacity(frames);
    while states.len() < frames {
        let labels: Vec<usize> = (0..4).map(|_| rng.gen_range(1..=num_labels)).collect();
        states.extend(toy_alignment(&labels, &mut rng));
    }
    DecodeFixture {
        posterior: spiky_posteriors(&states, alphabet.num_states(), peak).expect("posteriors"),
        graph,
    }
}
