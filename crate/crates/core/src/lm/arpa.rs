use std::collections::HashMap;
use std::fmt::Write as _;

use super::{NGramEntry, NGramModel, BOS, EOS};
use crate::error::{Error, Result};
use crate::symbols::SymbolTable;

fn arpa_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Arpa {
        line,
        msg: msg.into(),
    }
}

fn format_log10(v: f64) -> String {
    let s = format!("{v:.7}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

/// Parses an ARPA backoff model. The vocabulary is taken from the unigram
/// section in file order.
pub fn parse_arpa(text: &str) -> Result<NGramModel> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    // \data\ header
    let mut header_line = 0;
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            continue;
        }
        if line != "\\data\\" {
            return Err(arpa_err(n, "expected \\data\\"));
        }
        header_line = n;
        break;
    }
    if header_line == 0 {
        return Err(arpa_err(1, "missing \\data\\ header"));
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut section: Option<(usize, usize)> = None; // (n, header line)
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("ngram ") {
            let (order, count) = rest
                .split_once('=')
                .ok_or_else(|| arpa_err(n, "malformed ngram count"))?;
            let order: usize = order.trim().parse().map_err(|_| arpa_err(n, "bad order"))?;
            let count: usize = count.trim().parse().map_err(|_| arpa_err(n, "bad count"))?;
            if order != declared.len() + 1 {
                return Err(arpa_err(n, "ngram counts out of order"));
            }
            declared.push(count);
        } else if let Some(k) = section_header(line) {
            section = Some((k, n));
            break;
        } else {
            return Err(arpa_err(n, format!("unexpected line `{line}` in header")));
        }
    }
    let order = declared.len();
    if order == 0 {
        return Err(arpa_err(header_line, "no ngram counts declared"));
    }

    let mut vocab = SymbolTable::new();
    vocab.add(BOS);
    vocab.add(EOS);
    let mut entries: Vec<HashMap<Vec<u32>, NGramEntry>> = vec![HashMap::new(); order];
    let mut saw_end = false;

    while let Some((k, header)) = section.take() {
        if k == 0 || k > order {
            return Err(arpa_err(header, format!("section \\{k}-grams: not declared")));
        }
        if !entries[k - 1].is_empty() {
            return Err(arpa_err(header, format!("duplicate \\{k}-grams: section")));
        }
        for (n, line) in lines.by_ref() {
            if line.is_empty() {
                continue;
            }
            if line == "\\end\\" {
                saw_end = true;
                break;
            }
            if let Some(next) = section_header(line) {
                section = Some((next, n));
                break;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != k + 1 && fields.len() != k + 2 {
                return Err(arpa_err(n, format!("expected {k}-gram entry")));
            }
            let prob: f64 = fields[0]
                .parse()
                .map_err(|_| arpa_err(n, "bad probability"))?;
            let mut ngram = Vec::with_capacity(k);
            for w in &fields[1..=k] {
                let id = if k == 1 {
                    vocab.add(w)
                } else {
                    vocab
                        .find(w)
                        .ok_or_else(|| arpa_err(n, format!("word `{w}` has no unigram")))?
                };
                ngram.push(id);
            }
            let backoff = match fields.get(k + 1) {
                Some(b) => Some(b.parse().map_err(|_| arpa_err(n, "bad backoff"))?),
                None => None,
            };
            if entries[k - 1]
                .insert(
                    ngram,
                    NGramEntry {
                        log10_prob: prob,
                        log10_backoff: backoff,
                    },
                )
                .is_some()
            {
                return Err(arpa_err(n, "duplicate n-gram"));
            }
        }
        if entries[k - 1].len() != declared[k - 1] {
            return Err(arpa_err(
                header,
                format!(
                    "\\{k}-grams: declares {} entries but lists {}",
                    declared[k - 1],
                    entries[k - 1].len()
                ),
            ));
        }
    }
    if !saw_end {
        return Err(arpa_err(text.lines().count(), "missing \\end\\"));
    }
    for (k, &count) in declared.iter().enumerate() {
        if count > 0 && entries[k].is_empty() {
            return Err(arpa_err(header_line, format!("missing \\{}-grams: section", k + 1)));
        }
    }
    NGramModel::from_entries(order, vocab, entries).map_err(|e| arpa_err(0, e.to_string()))
}

fn section_header(line: &str) -> Option<usize> {
    line.strip_prefix('\\')?
        .strip_suffix("-grams:")?
        .parse()
        .ok()
}

/// Canonical ARPA text: entries of each order sorted by vocabulary id
/// sequence, values with at most 7 decimals.
pub fn emit_arpa(lm: &NGramModel) -> String {
    let mut out = String::from("\\data\\\n");
    for n in 1..=lm.order() {
        let _ = writeln!(out, "ngram {n}={}", lm.count(n));
    }
    for n in 1..=lm.order() {
        let _ = write!(out, "\n\\{n}-grams:\n");
        for (ngram, e) in lm.sorted_entries(n) {
            let _ = write!(out, "{}\t{}", format_log10(e.log10_prob), lm.render(ngram));
            if let Some(bo) = e.log10_backoff {
                let _ = write!(out, "\t{}", format_log10(bo));
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}
