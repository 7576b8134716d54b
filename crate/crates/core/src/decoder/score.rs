use crate::error::{Error, Result};

/// Corpus-level edit-distance breakdown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ErrorRate {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub reference_length: usize,
}

impl ErrorRate {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    /// `(S + D + I) / N`. With an empty reference the rate is 0 without
    /// errors and 1 otherwise.
    pub fn rate(&self) -> f64 {
        match (self.reference_length, self.errors()) {
            (0, 0) => 0.0,
            (0, _) => 1.0,
            (n, e) => e as f64 / n as f64,
        }
    }
}

/// Levenshtein alignment of one pair. Among minimum-cost alignments the
/// backtrace prefers match/substitution, then deletion, then insertion.
fn align<T: PartialEq>(hyp: &[T], reference: &[T]) -> ErrorRate {
    let (n, m) = (reference.len(), hyp.len());
    let mut cost = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in cost.iter_mut().enumerate() {
        row[0] = i;
    }
    for j in 0..=m {
        cost[0][j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = cost[i - 1][j - 1] + usize::from(reference[i - 1] != hyp[j - 1]);
            cost[i][j] = sub.min(cost[i - 1][j] + 1).min(cost[i][j - 1] + 1);
        }
    }
    let mut out = ErrorRate {
        reference_length: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hyp[j - 1];
            if cost[i][j] == cost[i - 1][j - 1] + usize::from(!same) {
                if !same {
                    out.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && cost[i][j] == cost[i - 1][j] + 1 {
            out.deletions += 1;
            i -= 1;
        } else {
            out.insertions += 1;
            j -= 1;
        }
    }
    out
}

/// Error-rate breakdown summed over paired hypothesis/reference lists.
pub fn evaluate_error_rate<T: PartialEq>(hyps: &[Vec<T>], refs: &[Vec<T>]) -> Result<ErrorRate> {
    if hyps.len() != refs.len() {
        return Err(Error::Shape(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let mut total = ErrorRate::default();
    for (h, r) in hyps.iter().zip(refs) {
        let e = align(h, r);
        total.substitutions += e.substitutions;
        total.deletions += e.deletions;
        total.insertions += e.insertions;
        total.reference_length += e.reference_length;
    }
    Ok(total)
}
