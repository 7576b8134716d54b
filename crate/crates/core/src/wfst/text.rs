use std::fmt::Write as _;

use super::{Arc, Wfst};
use crate::error::{Error, Result};
use crate::numeric::format_significant;
use crate::symbols::SymbolTable;
use crate::Semiring;

/// Formats a weight with 9 significant digits in the style of C's `%.9g`.
pub fn format_weight(w: f64) -> String {
    format_significant(w, 9)
}

fn parse_weight(s: &str) -> Option<f64> {
    match s {
        "inf" | "Infinity" => Some(f64::INFINITY),
        "-inf" | "-Infinity" => Some(f64::NEG_INFINITY),
        _ => s.parse().ok(),
    }
}

impl Wfst {
    /// Text serialization: per state, its arcs
    /// `src<TAB>dst<TAB>ilabel<TAB>olabel<TAB>weight` followed by its final
    /// line `state<TAB>weight`. The start state is written as state 0.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let Some(start) = self.start() else {
            return out;
        };
        let rename = |s: usize| {
            if s == start {
                0
            } else if s == 0 {
                start
            } else {
                s
            }
        };
        let mut order: Vec<usize> = self.states().collect();
        order.sort_by_key(|&s| rename(s));
        for s in order {
            for arc in self.arcs(s) {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}",
                    rename(s),
                    rename(arc.next),
                    arc.ilabel,
                    arc.olabel,
                    format_weight(arc.weight)
                );
            }
            if self.is_final(s) {
                let _ = writeln!(out, "{}\t{}", rename(s), format_weight(self.final_weight(s)));
            }
        }
        out
    }

    /// Parses the text format; state 0 becomes the start state.
    pub fn parse_text(
        text: &str,
        semiring: Semiring,
        isyms: SymbolTable,
        osyms: SymbolTable,
    ) -> Result<Wfst> {
        enum Line {
            Arc(usize, Arc),
            Final(usize, f64),
        }
        let mut lines = Vec::new();
        let mut max_state = None::<usize>;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let err = |msg: &str| Error::FstFormat {
                line: lineno,
                msg: msg.to_string(),
            };
            let fields: Vec<&str> = raw.split('\t').collect();
            let state = |s: &str| s.parse::<usize>().map_err(|_| err("bad state id"));
            let label = |s: &str| s.parse::<u32>().map_err(|_| err("bad label"));
            let weight = |s: &str| parse_weight(s).ok_or_else(|| err("bad weight"));
            let line = match fields.as_slice() {
                [src, dst, il, ol, w] => {
                    let (src, dst) = (state(src)?, state(dst)?);
                    let (il, ol) = (label(il)?, label(ol)?);
                    if il as usize >= isyms.len() || ol as usize >= osyms.len() {
                        return Err(err("label outside symbol table"));
                    }
                    max_state = max_state.max(Some(src.max(dst)));
                    Line::Arc(src, Arc::new(il, ol, weight(w)?, dst))
                }
                [src, dst, il, ol] => {
                    let (src, dst) = (state(src)?, state(dst)?);
                    max_state = max_state.max(Some(src.max(dst)));
                    Line::Arc(src, Arc::new(label(il)?, label(ol)?, semiring.one(), dst))
                }
                [s, w] => {
                    let s = state(s)?;
                    max_state = max_state.max(Some(s));
                    Line::Final(s, weight(w)?)
                }
                [s] => {
                    let s = state(s)?;
                    max_state = max_state.max(Some(s));
                    Line::Final(s, semiring.one())
                }
                _ => return Err(err("expected 1, 2, 4 or 5 tab-separated fields")),
            };
            lines.push(line);
        }
        let mut fst = Wfst::new(semiring, isyms, osyms);
        if let Some(max) = max_state {
            for _ in 0..=max {
                fst.add_state();
            }
            fst.set_start(0);
        }
        for line in lines {
            match line {
                Line::Arc(s, arc) => fst.add_arc(s, arc),
                Line::Final(s, w) => fst.set_final(s, w),
            }
        }
        Ok(fst)
    }
}
