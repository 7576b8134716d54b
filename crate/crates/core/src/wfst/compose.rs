use std::collections::HashMap;
use std::collections::VecDeque;

use super::{Arc, Wfst};
use crate::error::{Error, Result};
use crate::symbols::EPSILON;

/// Composition filter state: 0 = no pending epsilon move, 1 = the left
/// machine just advanced alone on an output epsilon, 2 = the right machine
/// just advanced alone on an input epsilon.
type Filter = u8;

/// Composes `a` with `b` (`a`'s outputs feed `b`'s inputs) and trims the
/// result.
///
/// Epsilons are matched through a three-state filter: a left-alone move is
/// never followed directly by a right-alone move and vice versa, and a
/// simultaneous epsilon pair is only taken from the neutral state. Every
/// pair of matching paths therefore appears exactly once.
pub fn compose(a: &Wfst, b: &Wfst) -> Result<Wfst> {
    if a.semiring() != b.semiring() {
        return Err(Error::SemiringMismatch {
            left: a.semiring(),
            right: b.semiring(),
        });
    }
    if a.osyms().content_hash() != b.isyms().content_hash() || a.osyms() != b.isyms() {
        return Err(Error::SymbolTableMismatch(
            "left output symbols differ from right input symbols".into(),
        ));
    }
    let sr = a.semiring();
    let mut out = Wfst::new(sr, a.isyms().clone(), b.osyms().clone());
    let (Some(sa), Some(sb)) = (a.start(), b.start()) else {
        return Ok(out);
    };

    // right-side arcs grouped by input label, per state
    let by_ilabel: Vec<HashMap<u32, Vec<usize>>> = b
        .states()
        .map(|s| {
            let mut m: HashMap<u32, Vec<usize>> = HashMap::new();
            for (i, arc) in b.arcs(s).iter().enumerate() {
                m.entry(arc.ilabel).or_default().push(i);
            }
            m
        })
        .collect();

    let mut ids: HashMap<(usize, usize, Filter), usize> = HashMap::new();
    let mut queue = VecDeque::new();
    let mut intern = |key: (usize, usize, Filter), out: &mut Wfst, queue: &mut VecDeque<_>| {
        *ids.entry(key).or_insert_with(|| {
            queue.push_back(key);
            out.add_state()
        })
    };

    let start = intern((sa, sb, 0), &mut out, &mut queue);
    out.set_start(start);

    while let Some(key @ (qa, qb, filter)) = queue.pop_front() {
        let src = intern(key, &mut out, &mut queue);
        let final_weight = sr.times(a.final_weight(qa), b.final_weight(qb));
        out.set_final(src, final_weight);

        for ea in a.arcs(qa) {
            if ea.olabel != EPSILON {
                if let Some(matches) = by_ilabel[qb].get(&ea.olabel) {
                    for &j in matches {
                        let eb = &b.arcs(qb)[j];
                        let dst = intern((ea.next, eb.next, 0), &mut out, &mut queue);
                        out.add_arc(
                            src,
                            Arc::new(ea.ilabel, eb.olabel, sr.times(ea.weight, eb.weight), dst),
                        );
                    }
                }
            } else {
                if filter == 0 {
                    if let Some(matches) = by_ilabel[qb].get(&EPSILON) {
                        for &j in matches {
                            let eb = &b.arcs(qb)[j];
                            let dst = intern((ea.next, eb.next, 0), &mut out, &mut queue);
                            out.add_arc(
                                src,
                                Arc::new(
                                    ea.ilabel,
                                    eb.olabel,
                                    sr.times(ea.weight, eb.weight),
                                    dst,
                                ),
                            );
                        }
                    }
                }
                if filter != 2 {
                    let dst = intern((ea.next, qb, 1), &mut out, &mut queue);
                    out.add_arc(src, Arc::new(ea.ilabel, EPSILON, ea.weight, dst));
                }
            }
        }
        if filter != 1 {
            if let Some(matches) = by_ilabel[qb].get(&EPSILON) {
                for &j in matches {
                    let eb = &b.arcs(qb)[j];
                    let dst = intern((qa, eb.next, 2), &mut out, &mut queue);
                    out.add_arc(src, Arc::new(EPSILON, eb.olabel, eb.weight, dst));
                }
            }
        }
    }
    Ok(out.trim())
}
