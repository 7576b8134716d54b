use crate::crfloss::PosteriorMatrix;
use crate::error::{Error, Result};
use crate::symbols::{state_to_fst_label, Alphabet, EPSILON};
use crate::wfst::Wfst;

/// Beam search settings.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamConfig {
    /// Maximum number of live tokens after pruning.
    pub width: usize,
    /// Tokens scoring more than `slack` below the frame's best are dropped.
    pub slack: f64,
    /// Skip frames whose blank probability exceeds this threshold.
    pub blank_skip: Option<f64>,
    /// Charge skipped frames their blank log-posterior instead of nothing.
    pub skip_adds_blank: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            width: 64,
            slack: 16.0,
            blank_skip: None,
            skip_adds_blank: false,
        }
    }
}

impl BeamConfig {
    /// No pruning at all: exact Viterbi over the graph.
    pub fn unlimited() -> Self {
        BeamConfig {
            width: usize::MAX,
            slack: f64::INFINITY,
            blank_skip: None,
            skip_adds_blank: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 {
            return Err(Error::Config("beam width must be positive".into()));
        }
        if !(self.slack >= 0.0) {
            return Err(Error::Config(format!("beam slack {} must be >= 0", self.slack)));
        }
        if let Some(th) = self.blank_skip {
            if !(th > 0.0 && th <= 1.0) {
                return Err(Error::Config(format!("blank threshold {th} must lie in (0, 1]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Output label ids of the best path, epsilons removed.
    pub output: Vec<u32>,
    /// Output symbols of the best path.
    pub words: Vec<String>,
    /// Tropical path score (log-likelihood); `-inf` when nothing survived.
    pub score: f64,
    pub frames_processed: usize,
    pub frames_skipped: usize,
    /// False when no token reached a final state.
    pub success: bool,
}

#[derive(Clone, Copy)]
struct Token {
    score: f64,
    trace: usize,
}

const NO_TRACE: usize = usize::MAX;

struct Decoder<'g> {
    graph: &'g Wfst,
    // (previous trace, output label)
    arena: Vec<(usize, u32)>,
    slot: Vec<Option<Token>>,
    active: Vec<usize>,
    expansions: Vec<u32>,
}

impl<'g> Decoder<'g> {
    fn relax(&mut self, state: usize, score: f64, prev: usize, olabel: u32) -> bool {
        if score == f64::NEG_INFINITY {
            return false;
        }
        match self.slot[state] {
            Some(t) if t.score >= score => false,
            existing => {
                if existing.is_none() {
                    self.active.push(state);
                }
                let trace = if olabel == EPSILON {
                    prev
                } else {
                    self.arena.push((prev, olabel));
                    self.arena.len() - 1
                };
                self.slot[state] = Some(Token { score, trace });
                true
            }
        }
    }

    fn epsilon_close(&mut self) {
        let limit = self.graph.num_states().max(1) as u32;
        let mut queue: Vec<usize> = self.active.clone();
        queue.sort_unstable();
        queue.reverse();
        while let Some(s) = queue.pop() {
            if self.expansions[s] >= limit {
                continue;
            }
            self.expansions[s] += 1;
            let tok = self.slot[s].expect("queued state has a token");
            for arc in self.graph.arcs(s) {
                if arc.ilabel != EPSILON {
                    continue;
                }
                if self.relax(arc.next, tok.score + arc.weight, tok.trace, arc.olabel) {
                    queue.push(arc.next);
                }
            }
        }
        // every state touched this frame is active; counters start at zero
        // on the next call, including for states reached only via epsilons
        for &s in &self.active {
            self.expansions[s] = 0;
        }
    }

    fn take_active(&mut self) -> Vec<(usize, Token)> {
        let mut out: Vec<(usize, Token)> = self
            .active
            .drain(..)
            .map(|s| (s, self.slot[s].take().expect("active state has a token")))
            .collect();
        out.sort_unstable_by_key(|&(s, _)| s);
        out
    }

    fn prune(tokens: &mut Vec<(usize, Token)>, config: &BeamConfig) {
        let best = tokens.iter().map(|t| t.1.score).fold(f64::NEG_INFINITY, f64::max);
        tokens.retain(|t| t.1.score >= best - config.slack);
        if tokens.len() > config.width {
            tokens.sort_by(|a, b| b.1.score.total_cmp(&a.1.score).then(a.0.cmp(&b.0)));
            tokens.truncate(config.width);
            tokens.sort_unstable_by_key(|&(s, _)| s);
        }
    }

    fn backtrace(&self, mut trace: usize) -> Vec<u32> {
        let mut out = Vec::new();
        while trace != NO_TRACE {
            let (prev, label) = self.arena[trace];
            out.push(label);
            trace = prev;
        }
        out.reverse();
        out
    }
}

/// Time-synchronous Viterbi beam search over a decoding graph whose input
/// labels are posterior columns plus one (0 is epsilon). Ties are broken
/// towards the lowest state id and then the earliest arc.
pub fn beam_decode(
    posterior: &PosteriorMatrix,
    graph: &Wfst,
    config: &BeamConfig,
) -> Result<DecodeResult> {
    config.validate()?;
    let width = posterior.width();
    if graph.isyms().len() != width + 1 {
        return Err(Error::Shape(format!(
            "graph has {} input symbols, posteriors have {} columns",
            graph.isyms().len(),
            width
        )));
    }
    let mut result = DecodeResult {
        output: Vec::new(),
        words: Vec::new(),
        score: f64::NEG_INFINITY,
        frames_processed: 0,
        frames_skipped: 0,
        success: false,
    };
    let Some(start) = graph.start() else {
        return Ok(result);
    };
    let mut dec = Decoder {
        graph,
        arena: Vec::new(),
        slot: vec![None; graph.num_states()],
        active: Vec::new(),
        expansions: vec![0; graph.num_states()],
    };
    dec.relax(start, 0.0, NO_TRACE, EPSILON);
    dec.epsilon_close();
    let mut tokens = dec.take_active();
    Decoder::prune(&mut tokens, config);

    let blank = state_to_fst_label(Alphabet::BLANK);
    for t in 0..posterior.frames() {
        let row = posterior.row(t);
        // a skipped frame is read as a certain blank: tokens follow their
        // blank arcs only, at no acoustic cost unless configured otherwise
        let skip = config.blank_skip.is_some_and(|th| row[0].exp() > th);
        if skip {
            result.frames_skipped += 1;
        } else {
            result.frames_processed += 1;
        }
        for &(s, tok) in &tokens {
            for arc in graph.arcs(s) {
                if arc.ilabel == EPSILON || (skip && arc.ilabel != blank) {
                    continue;
                }
                let col = arc.ilabel as usize - 1;
                if col >= width {
                    return Err(Error::SymbolOutOfRange {
                        symbol: arc.ilabel as usize,
                        size: width + 1,
                    });
                }
                let acoustic = if skip && !config.skip_adds_blank { 0.0 } else { row[col] };
                dec.relax(arc.next, tok.score + arc.weight + acoustic, tok.trace, arc.olabel);
            }
        }
        dec.epsilon_close();
        tokens = dec.take_active();
        Decoder::prune(&mut tokens, config);
        if tokens.is_empty() {
            return Ok(result);
        }
    }

    let mut best: Option<(f64, usize)> = None;
    for &(s, tok) in &tokens {
        let total = tok.score + graph.final_weight(s);
        if total > f64::NEG_INFINITY && best.is_none_or(|(b, _)| total > b) {
            best = Some((total, tok.trace));
        }
    }
    if let Some((score, trace)) = best {
        result.output = dec.backtrace(trace);
        result.words = result
            .output
            .iter()
            .map(|&l| graph.osyms().symbol(l).unwrap_or("<unk>").to_string())
            .collect();
        result.score = score;
        result.success = true;
    }
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semiring::Semiring;
    use crate::symbols::SymbolTable;
    use crate::wfst::Arc;

    fn two_word_graph() -> (Wfst, Alphabet) {
        let a = Alphabet::new(["a", "b"]).unwrap();
        let mut out = SymbolTable::new();
        out.add("<eps>");
        out.add("A");
        out.add("B");
        let mut g = Wfst::new(Semiring::Tropical, a.state_symbols(), out);
        let s = g.add_state();
        g.set_start(s);
        g.set_final(s, 0.0);
        g.add_arc(s, Arc::new(1, 0, 0.0, s));
        g.add_arc(s, Arc::new(2, 1, -0.1, s));
        g.add_arc(s, Arc::new(3, 2, -0.1, s));
        (g, a)
    }

    #[test]
    fn epsilon_only_states_expand_on_every_frame() {
        // state 1 is entered only through an epsilon arc, once per frame,
        // for more frames than the graph has states
        let a = Alphabet::new(["a", "b"]).unwrap();
        let mut out = SymbolTable::new();
        out.add("<eps>");
        out.add("X");
        let mut g = Wfst::new(Semiring::Tropical, a.state_symbols(), out);
        let (s0, s1, s2) = (g.add_state(), g.add_state(), g.add_state());
        g.set_start(s0);
        g.add_arc(s0, Arc::new(1, 0, 0.0, s0));
        g.add_arc(s0, Arc::new(EPSILON, 0, 0.0, s1));
        g.add_arc(s1, Arc::new(EPSILON, 1, -0.5, s2));
        g.set_final(s2, 0.0);
        let post = PosteriorMatrix::uniform(6, 3);
        let r = beam_decode(&post, &g, &BeamConfig::unlimited()).unwrap();
        assert!(r.success);
        assert_eq!(r.words, vec!["X"]);
        assert!((r.score - (6.0 * (1.0f64 / 3.0).ln() - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn picks_the_obvious_path() {
        let (g, _) = two_word_graph();
        let p = PosteriorMatrix::from_rows(&[
            vec![-0.1, -3.0, -3.0],
            vec![-3.0, -0.1, -3.0],
            vec![-3.0, -3.0, -0.1],
        ])
        .unwrap();
        let r = beam_decode(&p, &g, &BeamConfig::default()).unwrap();
        assert!(r.success);
        assert_eq!(r.words, vec!["A", "B"]);
        assert!((r.score - (-0.3 - 0.2)).abs() < 1e-12);
    }

    #[test]
    fn skipping_counts_frames() {
        let (g, _) = two_word_graph();
        let p = PosteriorMatrix::from_rows(&[
            vec![-0.01, -5.0, -5.0],
            vec![-3.0, -0.1, -3.0],
        ])
        .unwrap();
        let cfg = BeamConfig {
            blank_skip: Some(0.7),
            ..Default::default()
        };
        let r = beam_decode(&p, &g, &cfg).unwrap();
        assert_eq!((r.frames_skipped, r.frames_processed), (1, 1));
        assert_eq!(r.words, vec!["A"]);
    }

    #[test]
    fn bad_config_and_shape() {
        let (g, _) = two_word_graph();
        let p = PosteriorMatrix::uniform(2, 4);
        assert!(matches!(
            beam_decode(&p, &g, &BeamConfig::default()),
            Err(Error::Shape(_))
        ));
        let cfg = BeamConfig {
            width: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
