use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;

use ctccrf::io::{encode_matrix, format_log_pl_cache, parse_keyed_lines, read_matrix};
use ctccrf::lm::parse_arpa;
use ctccrf::Error;

use crate::cli::PrepareArgs;
use crate::data::{alphabet_path, check_utt_id, default_den_lm, read_alphabet, set_dir, MANIFEST_HEADER};
use crate::error::{data, CliError, CliResult};
use crate::fsutil::{read_to_string, require_file, sibling, write_atomic};

pub fn prepare(args: &PrepareArgs) -> CliResult<()> {
    if args.subsample == 0 {
        return Err(CliError::Usage("--subsample must be positive".into()));
    }
    let den_path = args.den_lm.clone().unwrap_or_else(|| default_den_lm(&args.work));
    require_file(&den_path, "denominator LM")?;
    require_file(&args.labels, "label file")?;
    require_file(&args.features, "feature list")?;
    let alphabet = read_alphabet(&args.alphabet)?;
    let den = parse_arpa(&read_to_string(&den_path)?)?;

    let transcripts = parse_keyed_lines(&read_to_string(&args.labels)?, "labels")?;
    let scp: HashMap<String, String> =
        parse_keyed_lines(&read_to_string(&args.features)?, "feature list")?.into_iter().collect();

    // validate everything before the first write
    let mut utts = Vec::with_capacity(transcripts.len());
    let mut dim = None;
    for (id, text) in &transcripts {
        check_utt_id(id)?;
        let tokens: Vec<&str> = text.split_whitespace().collect();
        if tokens.is_empty() {
            return Err(data(format!("utterance `{id}` has an empty transcript")));
        }
        let labels = alphabet.encode(&tokens).map_err(|e| match e {
            Error::Oov(w) => data(format!("utterance `{id}`: label `{w}` is not in the alphabet")),
            e => data(format!("utterance `{id}`: {e}")),
        })?;
        let rel = scp
            .get(id)
            .ok_or_else(|| data(format!("utterance `{id}` has no features")))?;
        let feats = read_matrix(&sibling(&args.features, rel))
            .map_err(|e| data(format!("utterance `{id}`: {e}")))?
            .subsample_rows(args.subsample);
        if *dim.get_or_insert(feats.cols()) != feats.cols() {
            return Err(data(format!(
                "utterance `{id}` has {} feature dims, expected {}",
                feats.cols(),
                dim.unwrap_or(0)
            )));
        }
        if feats.rows() == 0 {
            return Err(data(format!("utterance `{id}` has no frames")));
        }
        let log_pl = den
            .score_sequence(&tokens)
            .map_err(|e| data(format!("utterance `{id}`: {e}")))?;
        utts.push((id.as_str(), tokens, labels.len(), feats, log_pl));
    }
    if utts.is_empty() {
        return Err(data(format!("{}: no utterances", args.labels.display())));
    }
    if let Some((id, _)) = scp.iter().find(|(id, _)| !transcripts.iter().any(|(t, _)| t == *id)) {
        return Err(data(format!("utterance `{id}` has features but no transcript")));
    }

    let alpha_text: String = alphabet.labels().iter().map(|l| format!("{l}\n")).collect();
    let shared = alphabet_path(&args.work);
    if shared.is_file() && read_to_string(&shared)? != alpha_text {
        return Err(data(format!("{} holds a different alphabet", shared.display())));
    }
    write_atomic(&shared, alpha_text.as_bytes())?;

    // stage the set next to its final location and swap it in whole
    let dir = set_dir(&args.work, &args.set);
    let staging = dir.with_file_name(format!(".{}.staging", args.set));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| data(format!("{}: {e}", staging.display())))?;
    }
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    let mut labels = String::new();
    let mut frames_total = 0usize;
    let mut short = 0usize;
    for (id, tokens, n_labels, feats, _) in &utts {
        let rel = format!("feats/{id}.catm");
        write_atomic(&staging.join(&rel), &encode_matrix(feats))?;
        let text = tokens.join(" ");
        let _ = writeln!(manifest, "{id}\t{}\t{}\t{rel}\t{text}", feats.rows(), feats.cols());
        let _ = writeln!(labels, "{id}\t{text}");
        frames_total += feats.rows();
        if feats.rows() < *n_labels {
            short += 1;
        }
    }
    let cache = format_log_pl_cache(utts.iter().map(|u| (u.0, u.4)));
    write_atomic(&staging.join("log_pl.txt"), cache.as_bytes())?;
    write_atomic(&staging.join("labels.txt"), labels.as_bytes())?;
    write_atomic(&staging.join("manifest.tsv"), manifest.as_bytes())?;
    if dir.exists() {
        fs::remove_dir_all(&dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    }
    fs::rename(&staging, &dir).map_err(|e| data(format!("{}: {e}", dir.display())))?;
    eprintln!(
        "set `{}`: {} utterances, {frames_total} frames",
        args.set,
        utts.len()
    );
    if short > 0 {
        eprintln!("warning: {short} utterances have fewer frames than labels and will be skipped in training");
    }
    Ok(())
}
