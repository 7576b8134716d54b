use super::{ForwardBackward, PosteriorMatrix};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{log_add, log_sum_exp, LOG_ZERO};
use crate::symbols::Alphabet;

/// CTC forward-backward over the `2|l|+1` blank-interleaved label lattice.
///
/// `labels` are state ids (1..width). The returned score is
/// `log_pl + log Σ_{π ∈ B⁻¹(l)} exp(Σ_t posterior[t][π_t])`; `log_pl` is a
/// constant and does not touch the occupancy.
pub fn numerator_forward(
    posterior: &PosteriorMatrix,
    labels: &[usize],
    log_pl: f64,
) -> Result<ForwardBackward> {
    let width = posterior.width();
    let frames = posterior.frames();
    if frames == 0 {
        return Err(Error::Shape("posterior has no frames".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l == Alphabet::BLANK || l >= width) {
        return Err(Error::SymbolOutOfRange {
            symbol: bad,
            size: width,
        });
    }
    let repeats = labels.windows(2).filter(|w| w[0] == w[1]).count();
    if frames < labels.len() + repeats {
        return Ok(ForwardBackward::infeasible(frames, width));
    }

    let ext: Vec<usize> = std::iter::once(Alphabet::BLANK)
        .chain(labels.iter().flat_map(|&l| [l, Alphabet::BLANK]))
        .collect();
    let n = ext.len();
    // skip transition s-2 -> s allowed onto a label that differs from s-2
    let can_skip = |s: usize| s >= 2 && ext[s] != Alphabet::BLANK && ext[s] != ext[s - 2];

    let mut alpha = Matrix::filled(frames, n, LOG_ZERO);
    alpha.set(0, 0, posterior.get(0, ext[0]));
    if n > 1 {
        alpha.set(0, 1, posterior.get(0, ext[1]));
    }
    for t in 1..frames {
        for s in 0..n {
            let mut acc = alpha.get(t - 1, s);
            if s >= 1 {
                acc = log_add(acc, alpha.get(t - 1, s - 1));
            }
            if can_skip(s) {
                acc = log_add(acc, alpha.get(t - 1, s - 2));
            }
            if acc != LOG_ZERO {
                alpha.set(t, s, acc + posterior.get(t, ext[s]));
            }
        }
    }
    let last = frames - 1;
    let total = if n > 1 {
        log_add(alpha.get(last, n - 1), alpha.get(last, n - 2))
    } else {
        alpha.get(last, 0)
    };
    if total == LOG_ZERO {
        return Ok(ForwardBackward::infeasible(frames, width));
    }

    // beta[t][s]: mass of frames t+1.. given lattice position s at frame t
    let mut beta = Matrix::filled(frames, n, LOG_ZERO);
    beta.set(last, n - 1, 0.0);
    if n > 1 {
        beta.set(last, n - 2, 0.0);
    }
    for t in (0..last).rev() {
        for s in 0..n {
            let mut terms = [LOG_ZERO; 3];
            terms[0] = beta.get(t + 1, s) + posterior.get(t + 1, ext[s]);
            if s + 1 < n {
                terms[1] = beta.get(t + 1, s + 1) + posterior.get(t + 1, ext[s + 1]);
            }
            if s + 2 < n && can_skip(s + 2) {
                terms[2] = beta.get(t + 1, s + 2) + posterior.get(t + 1, ext[s + 2]);
            }
            beta.set(t, s, log_sum_exp(&terms));
        }
    }

    let mut occupancy = Matrix::zeros(frames, width);
    for t in 0..frames {
        for s in 0..n {
            let g = alpha.get(t, s) + beta.get(t, s) - total;
            if g > LOG_ZERO {
                occupancy.add_at(t, ext[s], g.exp());
            }
        }
    }
    Ok(ForwardBackward {
        score: log_pl + total,
        occupancy,
        feasible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_two_frames_single_label() {
        // aa, a·blk, blk·a each weigh 0.25
        let post = PosteriorMatrix::uniform(2, 2);
        let fb = numerator_forward(&post, &[1], 0.0).unwrap();
        assert!((fb.score - 0.75f64.ln()).abs() < 1e-12);
        // P(π_0 = a) = 2/3
        assert!((fb.occupancy.get(0, 1) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_labels_keep_only_all_blank_path() {
        let post = PosteriorMatrix::from_rows(&[
            vec![0.3f64.ln(), 0.7f64.ln()],
            vec![0.6f64.ln(), 0.4f64.ln()],
            vec![0.9f64.ln(), 0.1f64.ln()],
        ])
        .unwrap();
        let fb = numerator_forward(&post, &[], -1.25).unwrap();
        let want = -1.25 + (0.3f64 * 0.6 * 0.9).ln();
        assert!((fb.score - want).abs() < 1e-12);
        for t in 0..3 {
            assert_eq!(fb.occupancy.get(t, 0), 1.0);
        }
    }

    #[test]
    fn too_short_is_infeasible() {
        let post = PosteriorMatrix::uniform(1, 3);
        let fb = numerator_forward(&post, &[1, 2], 0.0).unwrap();
        assert!(!fb.feasible);
        assert_eq!(fb.score, f64::NEG_INFINITY);
        assert!(fb.occupancy.as_slice().iter().all(|&v| v == 0.0));
        // a repeated label needs a separating blank
        let post = PosteriorMatrix::uniform(2, 3);
        assert!(!numerator_forward(&post, &[1, 1], 0.0).unwrap().feasible);
    }

    #[test]
    fn rejects_out_of_alphabet_labels() {
        let post = PosteriorMatrix::uniform(3, 3);
        assert!(numerator_forward(&post, &[3], 0.0).is_err());
        assert!(numerator_forward(&post, &[0], 0.0).is_err());
    }
}
