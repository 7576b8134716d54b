#![allow(dead_code)]

use std::collections::BTreeMap;

use ctccrf::numeric::log_add;
use ctccrf::wfst::Arc;
use ctccrf::{PosteriorMatrix, Semiring, SymbolTable, Wfst};
use rand::Rng;

/// `<eps>` followed by `n` symbols `s1..sn`.
pub fn table(n: usize) -> SymbolTable {
    let mut t = SymbolTable::new();
    t.add("<eps>");
    for i in 1..=n {
        t.add(&format!("s{i}"));
    }
    t
}

/// Random machine over label ids `1..=isyms.len()-1` / `1..=osyms.len()-1`.
/// Input-epsilon arcs only go to higher state ids, so there are no
/// input-epsilon cycles and path enumeration terminates.
pub fn random_wfst<R: Rng>(
    rng: &mut R,
    semiring: Semiring,
    states: usize,
    isyms: &SymbolTable,
    osyms: &SymbolTable,
    eps_prob: f64,
) -> Wfst {
    let mut f = Wfst::new(semiring, isyms.clone(), osyms.clone());
    for _ in 0..states {
        f.add_state();
    }
    f.set_start(0);
    let (ni, no) = (isyms.len() as u32 - 1, osyms.len() as u32 - 1);
    for s in 0..states {
        if rng.gen_bool(0.5) || s == states - 1 {
            f.set_final(s, rng.gen_range(-1.0..0.0));
        }
        for _ in 0..rng.gen_range(1..=3) {
            let next = rng.gen_range(0..states);
            let ilabel = if next > s && rng.gen_bool(eps_prob) {
                0
            } else {
                rng.gen_range(1..=ni)
            };
            let olabel = if rng.gen_bool(eps_prob) { 0 } else { rng.gen_range(1..=no) };
            f.add_arc(s, Arc::new(ilabel, olabel, rng.gen_range(-2.0..0.0), next));
        }
    }
    f
}

/// Sums (or maxes, for tropical) path weights per output string.
pub fn aggregate(paths: Vec<(Vec<u32>, f64)>, semiring: Semiring) -> BTreeMap<Vec<u32>, f64> {
    let mut out = BTreeMap::new();
    for (o, w) in paths {
        let e = out.entry(o).or_insert(f64::NEG_INFINITY);
        *e = match semiring {
            Semiring::Log => log_add(*e, w),
            Semiring::Tropical => e.max(w),
        };
    }
    out
}

/// Every string over `1..=k` of length `0..=max_len`.
pub fn all_strings(k: u32, max_len: usize) -> Vec<Vec<u32>> {
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for s in &frontier {
            for l in 1..=k {
                let mut t: Vec<u32> = s.clone();
                t.push(l);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

pub fn maps_close(a: &BTreeMap<Vec<u32>, f64>, b: &BTreeMap<Vec<u32>, f64>, tol: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|((ka, va), (kb, vb))| {
            ka == kb && (va == vb || (va - vb).abs() <= tol)
        })
}

/// Best score of every output string over complete paths that consume one
/// posterior frame per non-epsilon arc, by explicit depth-first enumeration.
pub fn exhaustive_output_scores(graph: &Wfst, post: &PosteriorMatrix) -> BTreeMap<Vec<u32>, f64> {
    fn go(
        g: &Wfst,
        post: &PosteriorMatrix,
        s: usize,
        t: usize,
        eps_run: usize,
        score: f64,
        out: &mut Vec<u32>,
        best: &mut BTreeMap<Vec<u32>, f64>,
    ) {
        if score == f64::NEG_INFINITY {
            return;
        }
        if t == post.frames() && g.is_final(s) {
            let total = score + g.final_weight(s);
            let slot = best.entry(out.clone()).or_insert(f64::NEG_INFINITY);
            *slot = slot.max(total);
        }
        for arc in g.arcs(s) {
            let (nt, run, gain) = if arc.ilabel == 0 {
                if eps_run >= g.num_states() {
                    continue;
                }
                (t, eps_run + 1, arc.weight)
            } else {
                if t == post.frames() {
                    continue;
                }
                (t + 1, 0, arc.weight + post.get(t, arc.ilabel as usize - 1))
            };
            if arc.olabel != 0 {
                out.push(arc.olabel);
            }
            go(g, post, arc.next, nt, run, score + gain, out, best);
            if arc.olabel != 0 {
                out.pop();
            }
        }
    }
    let mut best = BTreeMap::new();
    if let Some(start) = graph.start() {
        go(graph, post, start, 0, 0, 0.0, &mut Vec::new(), &mut best);
    }
    best.retain(|_, v| *v > f64::NEG_INFINITY);
    best
}

/// Best complete path score, or `None` when nothing is accepted.
pub fn exhaustive_best_score(graph: &Wfst, post: &PosteriorMatrix) -> Option<f64> {
    exhaustive_output_scores(graph, post).into_values().reduce(f64::max)
}

/// True when `output` is an optimal output: its best path scores within
/// `tol` of the overall best. Distinct outputs can tie exactly when a
/// graph's cycles are traversed in a different order.
pub fn is_optimal_output(scores: &BTreeMap<Vec<u32>, f64>, output: &[u32], tol: f64) -> bool {
    let best = scores.values().copied().fold(f64::NEG_INFINITY, f64::max);
    scores.get(output).is_some_and(|&v| (v - best).abs() < tol)
}
