use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use super::{ForwardBackward, PosteriorMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{log_sum_exp, LOG_ZERO};
use crate::symbols::{fst_label_to_state, EPSILON};
use crate::wfst::{Arc, Wfst};
use crate::Semiring;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DenArc {
    pub from: usize,
    pub to: usize,
    /// S_π state id (column of the posterior).
    pub label: usize,
    /// Natural-log transition weight.
    pub weight: f64,
}

/// Epsilon-free transition list of the denominator graph, shared read-only
/// by every utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct DenominatorTable {
    num_states: usize,
    width: usize,
    start: usize,
    finals: Vec<f64>,
    arcs: Vec<DenArc>,
    // exp(weight) per arc, cached for the scaled recursions
    arc_probs: Vec<f64>,
}

impl DenominatorTable {
    pub fn new(
        num_states: usize,
        width: usize,
        start: usize,
        finals: Vec<f64>,
        mut arcs: Vec<DenArc>,
    ) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            what: "denominator table",
            msg,
        };
        if num_states == 0 || start >= num_states || finals.len() != num_states {
            return Err(bad("inconsistent state count".into()));
        }
        for a in &arcs {
            if a.from >= num_states || a.to >= num_states {
                return Err(bad(format!("arc {}->{} leaves the table", a.from, a.to)));
            }
            if a.label >= width {
                return Err(bad(format!("label {} outside width {width}", a.label)));
            }
        }
        arcs.sort_by_key(|a| (a.from, a.to, a.label));
        let arc_probs = arcs.iter().map(|a| a.weight.exp()).collect();
        Ok(DenominatorTable {
            num_states,
            width,
            start,
            finals,
            arcs,
            arc_probs,
        })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// |S_π| of the posteriors this table accepts.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn start(&self) -> usize {
        self.start
    }

    pub fn finals(&self) -> &[f64] {
        &self.finals
    }

    pub fn arcs(&self) -> &[DenArc] {
        &self.arcs
    }

    /// Sorted set of labels on the arcs.
    pub fn labels(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.arcs.iter().map(|a| a.label).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `den<TAB>states<TAB>width<TAB>start`, then `arc<TAB>from<TAB>to<TAB>label<TAB>weight`
    /// and `final<TAB>state<TAB>weight` lines. Weights use the shortest
    /// round-trip representation.
    pub fn to_text(&self) -> String {
        let mut out = format!("den\t{}\t{}\t{}\n", self.num_states, self.width, self.start);
        for a in &self.arcs {
            let _ = writeln!(out, "arc\t{}\t{}\t{}\t{:?}", a.from, a.to, a.label, a.weight);
        }
        for (s, &w) in self.finals.iter().enumerate() {
            if w != LOG_ZERO {
                let _ = writeln!(out, "final\t{s}\t{w:?}");
            }
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let bad = |line: usize, msg: &str| Error::Format {
            what: "denominator table",
            msg: format!("line {line}: {msg}"),
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
        let h: Vec<&str> = header.split('\t').collect();
        let [tag, states, width, start] = h.as_slice() else {
            return Err(bad(1, "bad header"));
        };
        let num = |s: &str, line| s.parse::<usize>().map_err(|_| bad(line, "bad integer"));
        if *tag != "den" {
            return Err(bad(1, "bad header"));
        }
        let (num_states, width, start) = (num(states, 1)?, num(width, 1)?, num(start, 1)?);
        let mut finals = vec![LOG_ZERO; num_states];
        let mut arcs = Vec::new();
        for (i, line) in lines {
            let lineno = i + 1;
            let f: Vec<&str> = line.split('\t').collect();
            let weight = |s: &str| s.parse::<f64>().map_err(|_| bad(lineno, "bad weight"));
            match f.as_slice() {
                ["arc", from, to, label, w] => arcs.push(DenArc {
                    from: num(from, lineno)?,
                    to: num(to, lineno)?,
                    label: num(label, lineno)?,
                    weight: weight(w)?,
                }),
                ["final", s, w] => {
                    let s = num(s, lineno)?;
                    if s >= num_states {
                        return Err(bad(lineno, "final state out of range"));
                    }
                    finals[s] = weight(w)?;
                }
                _ => return Err(bad(lineno, "unrecognized line")),
            }
        }
        Self::new(num_states, width, start, finals, arcs)
    }
}

/// Weighted epsilon closure of `fst` restricted to input-epsilon arcs:
/// `closure[q]` lists `(r, w)` with `w` the ⊕-sum over epsilon paths q→r
/// (including the empty path).
fn epsilon_closure(fst: &Wfst) -> Result<Vec<Vec<(usize, f64)>>> {
    let sr = fst.semiring();
    let n = fst.num_states();
    let eps: Vec<Vec<(usize, f64)>> = fst
        .states()
        .map(|s| {
            fst.arcs(s)
                .iter()
                .filter(|a| a.ilabel == EPSILON)
                .map(|a| (a.next, a.weight))
                .collect()
        })
        .collect();

    let sccs = tarjan(&eps);
    let mut component = vec![0; n];
    for (c, members) in sccs.iter().enumerate() {
        for &s in members {
            component[s] = c;
        }
    }

    let mut closure: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    // Tarjan emits components sinks-first, so successors are already closed.
    for (c, members) in sccs.iter().enumerate() {
        let k = members.len();
        let local: HashMap<usize, usize> = members.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        // plus-closure inside the component (Lehmann / Floyd-Warshall)
        let mut m = vec![vec![LOG_ZERO; k]; k];
        for (i, &s) in members.iter().enumerate() {
            for &(t, w) in &eps[s] {
                if component[t] == c {
                    let j = local[&t];
                    m[i][j] = sr.plus(m[i][j], w);
                }
            }
        }
        for p in 0..k {
            let star = sr
                .star(m[p][p])
                .ok_or(Error::DivergentClosure(members[p]))?;
            let prev = m.clone();
            for i in 0..k {
                for j in 0..k {
                    let via = sr.times(sr.times(prev[i][p], star), prev[p][j]);
                    m[i][j] = sr.plus(prev[i][j], via);
                }
            }
        }
        for (i, &q) in members.iter().enumerate() {
            let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
            for (j, &r) in members.iter().enumerate() {
                let within = if i == j { sr.plus(sr.one(), m[i][j]) } else { m[i][j] };
                if within == LOG_ZERO {
                    continue;
                }
                let e = acc.entry(r).or_insert(LOG_ZERO);
                *e = sr.plus(*e, within);
                for &(t, w) in &eps[r] {
                    if component[t] == c {
                        continue;
                    }
                    for &(u, d) in &closure[t] {
                        let e = acc.entry(u).or_insert(LOG_ZERO);
                        *e = sr.plus(*e, sr.times(within, sr.times(w, d)));
                    }
                }
            }
            closure[q] = acc.into_iter().collect();
        }
    }
    Ok(closure)
}

fn tarjan(graph: &[Vec<(usize, f64)>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        graph: &'a [Vec<(usize, f64)>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(st: &mut State, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for i in 0..st.graph[v].len() {
            let w = st.graph[v][i].0;
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                _ => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("non-empty stack");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            comp.sort_unstable();
            st.out.push(comp);
        }
    }
    let n = graph.len();
    let mut st = State {
        graph,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}

/// Removes input epsilons from a log-semiring graph over S_π by weighted
/// epsilon closure, merges parallel arcs, trims, and transcribes the result.
pub fn flatten_denominator(den_fst: &Wfst) -> Result<DenominatorTable> {
    if den_fst.semiring() != Semiring::Log {
        return Err(Error::SemiringMismatch {
            left: den_fst.semiring(),
            right: Semiring::Log,
        });
    }
    let Some(start) = den_fst.start() else {
        return Err(Error::Construction("denominator graph is empty".into()));
    };
    // input table: <eps>, <blk>, labels...
    let width = den_fst.isyms().len() - 1;
    let sr = Semiring::Log;
    let closure = epsilon_closure(den_fst)?;

    let mut flat = Wfst::new(sr, den_fst.isyms().clone(), den_fst.osyms().clone());
    for _ in den_fst.states() {
        flat.add_state();
    }
    flat.set_start(start);
    for q in den_fst.states() {
        let mut merged: BTreeMap<(usize, u32), f64> = BTreeMap::new();
        let mut fin = LOG_ZERO;
        for &(r, d) in &closure[q] {
            fin = sr.plus(fin, sr.times(d, den_fst.final_weight(r)));
            for arc in den_fst.arcs(r).iter().filter(|a| a.ilabel != EPSILON) {
                let e = merged.entry((arc.next, arc.ilabel)).or_insert(LOG_ZERO);
                *e = sr.plus(*e, sr.times(d, arc.weight));
            }
        }
        flat.set_final(q, fin);
        for ((next, ilabel), w) in merged {
            flat.add_arc(q, Arc::new(ilabel, EPSILON, w, next));
        }
    }
    let flat = flat.trim();
    let Some(start) = flat.start() else {
        return Err(Error::Construction("denominator graph accepts nothing".into()));
    };
    let mut arcs = Vec::with_capacity(flat.num_arcs());
    for s in flat.states() {
        for a in flat.arcs(s) {
            let label = fst_label_to_state(a.ilabel).expect("epsilons removed");
            arcs.push(DenArc {
                from: s,
                to: a.next,
                label,
                weight: a.weight,
            });
        }
    }
    let finals = flat.states().map(|s| flat.final_weight(s)).collect();
    DenominatorTable::new(flat.num_states(), width, start, finals, arcs)
}

/// Forward-backward over the denominator table. Every frame is rescaled by
/// the running maxima of the forward (or backward) scores and of the
/// posterior row, so the inner loop runs in the probability domain.
pub fn denominator_forward(
    posterior: &PosteriorMatrix,
    den: &DenominatorTable,
) -> Result<ForwardBackward> {
    let frames = posterior.frames();
    let width = posterior.width();
    if width != den.width {
        return Err(Error::Shape(format!(
            "posterior width {width} differs from denominator width {}",
            den.width
        )));
    }
    if frames == 0 {
        return Err(Error::Shape("posterior has no frames".into()));
    }
    let n = den.num_states;

    let row_max: Vec<f64> = (0..frames)
        .map(|t| posterior.row(t).iter().copied().fold(LOG_ZERO, f64::max))
        .collect();
    let emissions = |t: usize| -> Vec<f64> {
        posterior
            .row(t)
            .iter()
            .map(|&p| (p - row_max[t]).exp())
            .collect()
    };

    let mut alpha = Matrix::filled(frames + 1, n, LOG_ZERO);
    alpha.set(0, den.start, 0.0);
    let mut scaled = vec![0.0; n];
    let mut next = vec![0.0; n];
    for t in 0..frames {
        let m = alpha.row(t).iter().copied().fold(LOG_ZERO, f64::max);
        if m == LOG_ZERO || row_max[t] == LOG_ZERO {
            return Ok(ForwardBackward::infeasible(frames, width));
        }
        for (s, v) in scaled.iter_mut().enumerate() {
            *v = (alpha.get(t, s) - m).exp();
        }
        let e = emissions(t);
        next.iter_mut().for_each(|v| *v = 0.0);
        for (a, &p) in den.arcs.iter().zip(&den.arc_probs) {
            next[a.to] += scaled[a.from] * p * e[a.label];
        }
        let offset = m + row_max[t];
        for (s, &v) in next.iter().enumerate() {
            if v > 0.0 {
                alpha.set(t + 1, s, v.ln() + offset);
            }
        }
    }
    let ends: Vec<f64> = (0..n).map(|s| alpha.get(frames, s) + den.finals[s]).collect();
    let score = log_sum_exp(&ends);
    if score == LOG_ZERO || !score.is_finite() {
        return Ok(ForwardBackward::infeasible(frames, width));
    }

    let mut beta = Matrix::filled(frames + 1, n, LOG_ZERO);
    for s in 0..n {
        beta.set(frames, s, den.finals[s]);
    }
    let mut occupancy = Matrix::zeros(frames, width);
    let mut scaled_alpha = vec![0.0; n];
    let mut prev = vec![0.0; n];
    for t in (0..frames).rev() {
        let mb = beta.row(t + 1).iter().copied().fold(LOG_ZERO, f64::max);
        let ma = alpha.row(t).iter().copied().fold(LOG_ZERO, f64::max);
        for s in 0..n {
            scaled[s] = (beta.get(t + 1, s) - mb).exp();
            scaled_alpha[s] = (alpha.get(t, s) - ma).exp();
        }
        let e = emissions(t);
        prev.iter_mut().for_each(|v| *v = 0.0);
        let occ = occupancy.row_mut(t);
        for (a, &p) in den.arcs.iter().zip(&den.arc_probs) {
            let through = p * e[a.label] * scaled[a.to];
            prev[a.from] += through;
            occ[a.label] += scaled_alpha[a.from] * through;
        }
        let offset = mb + row_max[t];
        for (s, &v) in prev.iter().enumerate() {
            if v > 0.0 {
                beta.set(t, s, v.ln() + offset);
            }
        }
        // each complete path crosses exactly one arc at frame t
        let total: f64 = occ.iter().sum();
        if total > 0.0 && total.is_finite() {
            occ.iter_mut().for_each(|v| *v /= total);
        } else {
            occupancy_in_log_domain(posterior, den, &alpha, &beta, t, score, occupancy.row_mut(t));
        }
    }
    Ok(ForwardBackward {
        score,
        occupancy,
        feasible: true,
    })
}

fn occupancy_in_log_domain(
    posterior: &PosteriorMatrix,
    den: &DenominatorTable,
    alpha: &Matrix,
    beta: &Matrix,
    t: usize,
    score: f64,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for a in &den.arcs {
        let g = alpha.get(t, a.from) + a.weight + posterior.get(t, a.label) + beta.get(t + 1, a.to)
            - score;
        if g > LOG_ZERO {
            out[a.label] += g.exp();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::SymbolTable;

    fn isyms(labels: usize) -> SymbolTable {
        let mut t = SymbolTable::new();
        t.add("<blk>");
        for i in 0..labels {
            t.add(&format!("l{i}"));
        }
        t
    }

    #[test]
    fn degenerate_lm_two_symbols() {
        // single state, blank and one label both loop with weight 0
        let table = DenominatorTable::new(
            1,
            2,
            0,
            vec![0.0],
            vec![
                DenArc { from: 0, to: 0, label: 0, weight: 0.0 },
                DenArc { from: 0, to: 0, label: 1, weight: 0.0 },
            ],
        )
        .unwrap();
        let fb = denominator_forward(&PosteriorMatrix::uniform(2, 2), &table).unwrap();
        assert!(fb.score.abs() < 1e-12);
        for t in 0..2 {
            assert!((fb.occupancy.get(t, 0) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn epsilon_free_fst_transcribes_directly() {
        let mut f = Wfst::new(Semiring::Log, isyms(1), SymbolTable::new());
        let a = f.add_state();
        let b = f.add_state();
        f.set_start(a);
        f.add_arc(a, Arc::new(1, 0, -0.5, b));
        f.add_arc(b, Arc::new(2, 0, -0.25, a));
        f.set_final(b, -1.0);
        let t = flatten_denominator(&f).unwrap();
        assert_eq!(t.num_states(), 2);
        assert_eq!(
            t.arcs(),
            &[
                DenArc { from: 0, to: 1, label: 0, weight: -0.5 },
                DenArc { from: 1, to: 0, label: 1, weight: -0.25 },
            ]
        );
        assert_eq!(t.finals(), &[LOG_ZERO, -1.0]);
    }

    #[test]
    fn zero_weight_epsilon_loop_diverges() {
        let mut f = Wfst::new(Semiring::Log, isyms(1), SymbolTable::new());
        let a = f.add_state();
        f.set_start(a);
        f.set_final(a, 0.0);
        f.add_arc(a, Arc::new(0, 0, 0.0, a));
        f.add_arc(a, Arc::new(1, 0, -1.0, a));
        assert!(matches!(flatten_denominator(&f), Err(Error::DivergentClosure(0))));
    }

    #[test]
    fn epsilon_cycle_with_negative_weight_is_summed() {
        // a -eps(ln .5)-> b -eps(ln .5)-> a, b final; closure(a, b) = .5 / (1 - .25)
        let mut f = Wfst::new(Semiring::Log, isyms(1), SymbolTable::new());
        let a = f.add_state();
        let b = f.add_state();
        f.set_start(a);
        f.set_final(b, 0.0);
        f.add_arc(a, Arc::new(0, 0, 0.5f64.ln(), b));
        f.add_arc(b, Arc::new(0, 0, 0.5f64.ln(), a));
        f.add_arc(a, Arc::new(1, 0, 0.0, a));
        let closure = epsilon_closure(&f).unwrap();
        let ab = closure[a].iter().find(|e| e.0 == b).unwrap().1;
        assert!((ab.exp() - 0.5 / 0.75).abs() < 1e-12);
        let aa = closure[a].iter().find(|e| e.0 == a).unwrap().1;
        assert!((aa.exp() - 1.0 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn table_text_round_trip() {
        let table = DenominatorTable::new(
            2,
            2,
            1,
            vec![-0.1, LOG_ZERO],
            vec![DenArc { from: 1, to: 0, label: 1, weight: -0.123456789012345 }],
        )
        .unwrap();
        let back = DenominatorTable::parse_text(&table.to_text()).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let table = DenominatorTable::new(1, 3, 0, vec![0.0], vec![]).unwrap();
        assert!(denominator_forward(&PosteriorMatrix::uniform(2, 2), &table).is_err());
    }
}
