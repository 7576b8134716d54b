//! Seeded toy data: label sequences, their frame-level state sequences and
//! noisy one-hot features. The generator doubles as the oracle for training
//! and decoding tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::acoustic::Example;
use crate::crfloss::{flatten_denominator, DenominatorTable, PosteriorMatrix};
use crate::error::{Error, Result};
use crate::lm::{estimate_with_vocabulary, NGramModel};
use crate::matrix::Matrix;
use crate::symbols::Alphabet;
use crate::wfst::build_denominator_graph;

#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub num_labels: usize,
    pub feature_dim: usize,
    pub noise: f64,
    pub min_len: usize,
    pub max_len: usize,
    pub train: usize,
    pub heldout: usize,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            num_labels: 5,
            feature_dim: 8,
            noise: 0.2,
            min_len: 3,
            max_len: 6,
            train: 200,
            heldout: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyUtterance {
    pub id: String,
    /// Label state ids (1-based, blank excluded).
    pub labels: Vec<usize>,
    /// Frame-level state sequence; `B(states) == labels`.
    pub states: Vec<usize>,
    pub features: Matrix,
}

#[derive(Debug, Clone)]
pub struct ToyDataset {
    pub alphabet: Alphabet,
    pub train: Vec<ToyUtterance>,
    pub heldout: Vec<ToyUtterance>,
}

/// Label names `a`, `b`, ... (then `l26`, `l27`, ... past the alphabet).
pub fn toy_label_names(n: usize) -> Vec<String> {
    (0..n)
        .map(|i| {
            if i < 26 {
                ((b'a' + i as u8) as char).to_string()
            } else {
                format!("l{i}")
            }
        })
        .collect()
}

/// Frame-level alignment: 0-2 leading blanks per label (at least one between
/// repeats), each label held for 1-3 frames, 0-2 trailing blanks.
pub fn toy_alignment<R: Rng>(labels: &[usize], rng: &mut R) -> Vec<usize> {
    let mut states = Vec::new();
    let mut prev = None;
    for &l in labels {
        let min_blanks = usize::from(prev == Some(l));
        for _ in 0..rng.gen_range(min_blanks..=2) {
            states.push(Alphabet::BLANK);
        }
        for _ in 0..rng.gen_range(1..=3) {
            states.push(l);
        }
        prev = Some(l);
    }
    for _ in 0..rng.gen_range(0..=2) {
        states.push(Alphabet::BLANK);
    }
    states
}

fn utterance<R: Rng>(id: String, config: &ToyConfig, noise: &Normal<f64>, rng: &mut R) -> ToyUtterance {
    let len = rng.gen_range(config.min_len..=config.max_len);
    let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(1..=config.num_labels)).collect();
    let states = toy_alignment(&labels, rng);
    let mut features = Matrix::zeros(states.len(), config.feature_dim);
    for (t, &s) in states.iter().enumerate() {
        for (d, v) in features.row_mut(t).iter_mut().enumerate() {
            *v = f64::from(u8::from(d == s)) + noise.sample(rng);
        }
    }
    ToyUtterance {
        id,
        labels,
        states,
        features,
    }
}

pub fn generate_toy(config: &ToyConfig) -> Result<ToyDataset> {
    if config.num_labels == 0 || config.feature_dim < config.num_labels + 1 {
        return Err(Error::Config(format!(
            "feature_dim {} must cover {} labels plus blank",
            config.feature_dim, config.num_labels
        )));
    }
    if config.min_len == 0 || config.min_len > config.max_len {
        return Err(Error::Config("toy lengths need 0 < min_len <= max_len".into()));
    }
    let noise = Normal::new(0.0, config.noise)
        .map_err(|e| Error::Config(format!("noise level {}: {e}", config.noise)))?;
    let alphabet = Alphabet::new(toy_label_names(config.num_labels))?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let train = (0..config.train)
        .map(|i| utterance(format!("train{i:04}"), config, &noise, &mut rng))
        .collect();
    let heldout = (0..config.heldout)
        .map(|i| utterance(format!("test{i:04}"), config, &noise, &mut rng))
        .collect();
    Ok(ToyDataset {
        alphabet,
        train,
        heldout,
    })
}

/// Everything needed to train on a toy dataset: the denominator LM
/// estimated from the training transcripts, its flattened graph, and the
/// examples with their cached `log p(l)`.
pub struct ToyTask {
    pub alphabet: Alphabet,
    pub lm: NGramModel,
    pub den: DenominatorTable,
    pub train: Vec<Example>,
    pub heldout: Vec<Example>,
}

pub const TOY_DISCOUNT: f64 = 0.5;

impl ToyTask {
    pub fn new(data: &ToyDataset, lm_order: usize) -> Result<Self> {
        let corpus: Vec<Vec<String>> = data
            .train
            .iter()
            .map(|u| data.alphabet.decode(&u.labels))
            .collect();
        let lm = estimate_with_vocabulary(&corpus, lm_order, TOY_DISCOUNT, data.alphabet.labels())?;
        let den = flatten_denominator(&build_denominator_graph(&data.alphabet, &lm)?)?;
        let examples = |set: &[ToyUtterance]| -> Result<Vec<Example>> {
            set.iter()
                .map(|u| {
                    Ok(Example {
                        features: u.features.clone(),
                        labels: u.labels.clone(),
                        log_pl: lm.score_sequence(&data.alphabet.decode(&u.labels))?,
                    })
                })
                .collect()
        };
        let train = examples(&data.train)?;
        let heldout = examples(&data.heldout)?;
        Ok(ToyTask {
            alphabet: data.alphabet.clone(),
            lm,
            den,
            train,
            heldout,
        })
    }
}

/// Log-softmax posteriors that put `peak` probability on the given state at
/// every frame, the rest spread evenly.
pub fn spiky_posteriors(states: &[usize], width: usize, peak: f64) -> Result<PosteriorMatrix> {
    if width < 2 || !(peak > 0.0 && peak < 1.0) {
        return Err(Error::Config("spiky posteriors need width >= 2 and 0 < peak < 1".into()));
    }
    let rest = ((1.0 - peak) / (width - 1) as f64).ln();
    let rows: Vec<Vec<f64>> = states
        .iter()
        .map(|&s| (0..width).map(|k| if k == s { peak.ln() } else { rest }).collect())
        .collect();
    PosteriorMatrix::from_rows(&rows)
}

/// Random log-softmax posteriors.
pub fn random_posteriors<R: Rng>(frames: usize, width: usize, rng: &mut R) -> Result<PosteriorMatrix> {
    let rows: Vec<Vec<f64>> = (0..frames)
        .map(|_| {
            let mut row: Vec<f64> = (0..width).map(|_| rng.gen_range(-3.0..3.0)).collect();
            crate::numeric::log_softmax_in_place(&mut row);
            row
        })
        .collect();
    PosteriorMatrix::from_rows(&rows)
}
