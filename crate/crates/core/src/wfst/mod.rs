//! Weighted finite-state transducers over the log and tropical semirings.
//!
//! States are dense `usize` ids; labels are `u32` ids into the attached
//! symbol tables, with 0 reserved for epsilon. A state is final when its
//! final weight differs from the semiring zero.

mod compose;
mod ctc;
mod graphs;
mod text;

pub use compose::compose;
pub use ctc::{build_ctc_topology, map_b};
pub use graphs::{build_decoding_graph, build_denominator_graph, lexicon_to_fst, Lexicon};
pub use text::format_weight;

use std::collections::VecDeque;

use crate::symbols::{SymbolTable, EPSILON};
use crate::Semiring;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arc {
    pub ilabel: u32,
    pub olabel: u32,
    pub weight: f64,
    pub next: usize,
}

impl Arc {
    pub fn new(ilabel: u32, olabel: u32, weight: f64, next: usize) -> Self {
        Arc {
            ilabel,
            olabel,
            weight,
            next,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Wfst {
    semiring: Semiring,
    arcs: Vec<Vec<Arc>>,
    finals: Vec<f64>,
    start: Option<usize>,
    isyms: SymbolTable,
    osyms: SymbolTable,
}

impl Wfst {
    pub fn new(semiring: Semiring, isyms: SymbolTable, osyms: SymbolTable) -> Self {
        Wfst {
            semiring,
            arcs: Vec::new(),
            finals: Vec::new(),
            start: None,
            isyms,
            osyms,
        }
    }

    pub fn semiring(&self) -> Semiring {
        self.semiring
    }

    pub fn isyms(&self) -> &SymbolTable {
        &self.isyms
    }

    pub fn osyms(&self) -> &SymbolTable {
        &self.osyms
    }

    pub fn add_state(&mut self) -> usize {
        self.arcs.push(Vec::new());
        self.finals.push(self.semiring.zero());
        self.arcs.len() - 1
    }

    pub fn set_start(&mut self, state: usize) {
        assert!(state < self.num_states(), "start state {state} does not exist");
        self.start = Some(state);
    }

    pub fn set_final(&mut self, state: usize, weight: f64) {
        self.finals[state] = weight;
    }

    pub fn add_arc(&mut self, state: usize, arc: Arc) {
        assert!(
            arc.next < self.arcs.len(),
            "arc target {} does not exist",
            arc.next
        );
        self.arcs[state].push(arc);
    }

    pub fn start(&self) -> Option<usize> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.arcs.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.iter().map(Vec::len).sum()
    }

    pub fn arcs(&self, state: usize) -> &[Arc] {
        &self.arcs[state]
    }

    pub fn final_weight(&self, state: usize) -> f64 {
        self.finals[state]
    }

    pub fn is_final(&self, state: usize) -> bool {
        self.finals[state] != self.semiring.zero()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_none()
    }

    pub fn states(&self) -> std::ops::Range<usize> {
        0..self.arcs.len()
    }

    /// Same machine reinterpreted in another semiring (weights are shared).
    pub fn with_semiring(mut self, semiring: Semiring) -> Self {
        self.semiring = semiring;
        self
    }

    /// Sorted, deduplicated set of input labels used on arcs.
    pub fn input_labels(&self) -> Vec<u32> {
        let mut labels: Vec<u32> = self.arcs.iter().flatten().map(|a| a.ilabel).collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// Removes states that are not on any start-to-final path. The weighted
    /// language is unchanged; state order is preserved.
    pub fn trim(&self) -> Wfst {
        let n = self.num_states();
        let mut out = Wfst::new(self.semiring, self.isyms.clone(), self.osyms.clone());
        let Some(start) = self.start else {
            return out;
        };

        let mut accessible = vec![false; n];
        let mut queue = VecDeque::from([start]);
        accessible[start] = true;
        while let Some(s) = queue.pop_front() {
            for arc in &self.arcs[s] {
                if !accessible[arc.next] {
                    accessible[arc.next] = true;
                    queue.push_back(arc.next);
                }
            }
        }

        let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (s, arcs) in self.arcs.iter().enumerate() {
            for arc in arcs {
                reverse[arc.next].push(s);
            }
        }
        let mut coaccessible = vec![false; n];
        for s in 0..n {
            if self.is_final(s) {
                coaccessible[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &p in &reverse[s] {
                if !coaccessible[p] {
                    coaccessible[p] = true;
                    queue.push_back(p);
                }
            }
        }

        if !coaccessible[start] {
            return out;
        }
        let mut map = vec![usize::MAX; n];
        for s in 0..n {
            if accessible[s] && coaccessible[s] {
                map[s] = out.add_state();
            }
        }
        for s in 0..n {
            if map[s] == usize::MAX {
                continue;
            }
            out.finals[map[s]] = self.finals[s];
            for arc in &self.arcs[s] {
                if map[arc.next] != usize::MAX {
                    out.arcs[map[s]].push(Arc {
                        next: map[arc.next],
                        ..*arc
                    });
                }
            }
        }
        out.start = Some(map[start]);
        out
    }

    /// All complete paths whose input string (epsilons removed) equals
    /// `input`, as (output string without epsilons, path weight). Paths are
    /// not merged. Input-epsilon runs are bounded by the state count, so
    /// epsilon cycles are not followed around indefinitely.
    pub fn transduce(&self, input: &[u32]) -> Vec<(Vec<u32>, f64)> {
        let mut results = Vec::new();
        if let Some(start) = self.start {
            let mut output = Vec::new();
            self.transduce_from(start, input, 0, &mut output, self.semiring.one(), &mut results);
        }
        results
    }

    fn transduce_from(
        &self,
        state: usize,
        input: &[u32],
        eps_run: usize,
        output: &mut Vec<u32>,
        weight: f64,
        results: &mut Vec<(Vec<u32>, f64)>,
    ) {
        if input.is_empty() && self.is_final(state) {
            results.push((
                output.clone(),
                self.semiring.times(weight, self.finals[state]),
            ));
        }
        for arc in &self.arcs[state] {
            let (rest, run) = if arc.ilabel == EPSILON {
                if eps_run >= self.num_states() {
                    continue;
                }
                (input, eps_run + 1)
            } else if input.first() == Some(&arc.ilabel) {
                (&input[1..], 0)
            } else {
                continue;
            };
            if arc.olabel != EPSILON {
                output.push(arc.olabel);
            }
            self.transduce_from(
                arc.next,
                rest,
                run,
                output,
                self.semiring.times(weight, arc.weight),
                results,
            );
            if arc.olabel != EPSILON {
                output.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(weights: &[f64], extra_unreachable: bool) -> Wfst {
        let mut t = SymbolTable::new();
        t.add("x");
        let mut f = Wfst::new(Semiring::Log, t.clone(), t);
        let mut prev = f.add_state();
        f.set_start(prev);
        for &w in weights {
            let s = f.add_state();
            f.add_arc(prev, Arc::new(1, 1, w, s));
            prev = s;
        }
        f.set_final(prev, 0.0);
        if extra_unreachable {
            let dead = f.add_state();
            f.set_final(dead, 0.0);
            f.add_arc(dead, Arc::new(1, 1, 0.0, 0));
        }
        f
    }

    #[test]
    fn trim_drops_unreachable_state() {
        let f = chain(&[-1.0, -2.0], true);
        let t = f.trim();
        assert_eq!(t.num_states(), 3);
        assert_eq!(t, chain(&[-1.0, -2.0], false));
    }

    #[test]
    fn trim_without_reachable_final_is_empty() {
        let mut f = chain(&[-1.0], false);
        f.set_final(1, Semiring::Log.zero());
        let t = f.trim();
        assert!(t.is_empty());
        assert_eq!(t.num_states(), 0);
    }

    #[test]
    fn trim_is_idempotent() {
        let f = chain(&[-0.5, -0.25, -3.0], false);
        assert_eq!(f.trim(), f);
        assert_eq!(f.trim().trim(), f.trim());
    }

    #[test]
    fn transduce_reads_chain() {
        let f = chain(&[-1.0, -2.0], false);
        let out = f.transduce(&[1, 1]);
        assert_eq!(out, vec![(vec![1, 1], -3.0)]);
        assert!(f.transduce(&[1]).is_empty());
    }
}
