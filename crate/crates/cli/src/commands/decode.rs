use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::time::Instant;

use rayon::prelude::*;

use ctccrf::acoustic::decode_checkpoint;
use ctccrf::decoder::{beam_decode, evaluate_error_rate, greedy_decode, BeamConfig};
use ctccrf::io::parse_keyed_lines;
use ctccrf::{Semiring, SymbolTable, Wfst};

use crate::cli::{DecodeArgs, ScoreArgs};
use crate::data::{alphabet_path, graphs_dir, load_set, model_dir, read_alphabet};
use crate::error::{data, CliResult};
use crate::fsutil::{read_to_string, require_file, write_atomic};

fn read_graph(work: &std::path::Path) -> CliResult<Wfst> {
    let dir = graphs_dir(work);
    let (fst, isyms, osyms) = (dir.join("TLG.fst"), dir.join("TLG.isyms"), dir.join("TLG.osyms"));
    for p in [&fst, &isyms, &osyms] {
        require_file(p, "decoding graph")?;
    }
    Ok(Wfst::parse_text(
        &read_to_string(&fst)?,
        Semiring::Tropical,
        SymbolTable::parse_text(&read_to_string(&isyms)?)?,
        SymbolTable::parse_text(&read_to_string(&osyms)?)?,
    )?)
}

struct Decoded {
    words: Vec<String>,
    frames: usize,
    skipped: usize,
    millis: f64,
    failed: bool,
}

pub fn decode(args: &DecodeArgs) -> CliResult<()> {
    let config = BeamConfig {
        width: args.beam,
        slack: args.slack,
        blank_skip: (!args.no_blank_skip).then_some(args.blank_skip),
        skip_adds_blank: args.skip_adds_blank,
    };
    config.validate()?;
    let alphabet = read_alphabet(&alphabet_path(&args.work))?;
    let ckpt = args.checkpoint.clone().unwrap_or_else(|| model_dir(&args.work).join("final.ckpt"));
    require_file(&ckpt, "checkpoint")?;
    let bytes = fs::read(&ckpt).map_err(|e| data(format!("{}: {e}", ckpt.display())))?;
    let model = decode_checkpoint(&bytes)?;
    if model.num_outputs() != alphabet.num_states() {
        return Err(data(format!(
            "checkpoint predicts {} states but the alphabet has {}",
            model.num_outputs(),
            alphabet.num_states()
        )));
    }
    let graph = if args.greedy { None } else { Some(read_graph(&args.work)?) };
    let utts = load_set(&args.work, &args.set, &alphabet)?;

    let results: Vec<Decoded> = utts
        .par_iter()
        .map(|u| -> CliResult<Decoded> {
            let post = model.forward(&u.example.features)?;
            let start = Instant::now();
            let d = match &graph {
                None => Decoded {
                    words: greedy_decode(&post, &alphabet),
                    frames: post.frames(),
                    skipped: 0,
                    millis: 0.0,
                    failed: false,
                },
                Some(g) => {
                    let r = beam_decode(&post, g, &config)?;
                    Decoded {
                        words: r.words,
                        frames: post.frames(),
                        skipped: r.frames_skipped,
                        millis: 0.0,
                        failed: !r.success,
                    }
                }
            };
            Ok(Decoded { millis: start.elapsed().as_secs_f64() * 1e3, ..d })
        })
        .collect::<CliResult<_>>()?;

    let mut hyp = String::new();
    let (mut frames, mut skipped, mut millis) = (0usize, 0usize, 0.0);
    for (u, d) in utts.iter().zip(&results) {
        let _ = writeln!(hyp, "{}\t{}", u.id, d.words.join(" "));
        eprintln!(
            "{}\tframes={}\tskipped={:.1}%\ttime={:.3}ms{}",
            u.id,
            d.frames,
            100.0 * d.skipped as f64 / d.frames.max(1) as f64,
            d.millis,
            if d.failed { "\tno surviving path" } else { "" }
        );
        frames += d.frames;
        skipped += d.skipped;
        millis += d.millis;
    }
    let out = args
        .hyp_out
        .clone()
        .unwrap_or_else(|| args.work.join("decode").join(format!("{}.hyp", args.set)));
    write_atomic(&out, hyp.as_bytes())?;
    let failed = results.iter().filter(|d| d.failed).count();
    eprintln!(
        "decoded {} utterances: {frames} frames, {:.1}% skipped, {millis:.3} ms search time{}",
        utts.len(),
        100.0 * skipped as f64 / frames.max(1) as f64,
        if failed > 0 { format!(", {failed} without a surviving path") } else { String::new() }
    );
    Ok(())
}

fn read_transcripts(path: &std::path::Path, what: &'static str) -> CliResult<Vec<(String, Vec<String>)>> {
    require_file(path, what)?;
    Ok(parse_keyed_lines(&read_to_string(path)?, what)?
        .into_iter()
        .map(|(id, text)| (id, text.split_whitespace().map(str::to_string).collect()))
        .collect())
}

pub fn score(args: &ScoreArgs) -> CliResult<()> {
    let refs = read_transcripts(&args.reference, "references")?;
    let hyps: HashMap<String, Vec<String>> =
        read_transcripts(&args.hyp, "hypotheses")?.into_iter().collect();
    if hyps.len() != refs.len() {
        return Err(data(format!(
            "{} hypotheses for {} references",
            hyps.len(),
            refs.len()
        )));
    }
    let mut ordered = Vec::with_capacity(refs.len());
    for (id, _) in &refs {
        let h = hyps
            .get(id)
            .ok_or_else(|| data(format!("no hypothesis for utterance `{id}`")))?;
        ordered.push(h.clone());
    }
    let refs: Vec<Vec<String>> = refs.into_iter().map(|(_, r)| r).collect();
    let er = evaluate_error_rate(&ordered, &refs)?;
    let report = format!(
        "error rate {:.2}% [{} errors / {} tokens]\tsubstitutions={}\tdeletions={}\tinsertions={}\tutterances={}\n",
        100.0 * er.rate(),
        er.errors(),
        er.reference_length,
        er.substitutions,
        er.deletions,
        er.insertions,
        refs.len()
    );
    print!("{report}");
    if let Some(path) = &args.report {
        write_atomic(path, report.as_bytes())?;
    }
    Ok(())
}
