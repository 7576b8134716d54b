//! The prepared work-directory layout.
//!
//! ```text
//! WORK/data/alphabet.txt
//! WORK/data/SET/{manifest.tsv, labels.txt, log_pl.txt, feats/UTT.catm}
//! WORK/graphs/{T.fst, T.isyms, T.osyms, den.fst, TLG.fst, TLG.isyms, TLG.osyms}
//! WORK/model/{epoch-NNN.ckpt, final.ckpt, metrics.tsv}
//! WORK/decode/SET.hyp
//! ```

use std::path::{Path, PathBuf};

use ctccrf::acoustic::Example;
use ctccrf::io::{parse_keyed_lines, parse_log_pl_cache, read_matrix};
use ctccrf::{Alphabet, DenominatorTable};

use crate::error::{data, CliResult};
use crate::fsutil::{read_to_string, require_file};

pub const MANIFEST_HEADER: &str = "utt\tframes\tdim\tfeats\tlabels";

pub fn alphabet_path(work: &Path) -> PathBuf {
    work.join("data").join("alphabet.txt")
}

pub fn set_dir(work: &Path, set: &str) -> PathBuf {
    work.join("data").join(set)
}

pub fn graphs_dir(work: &Path) -> PathBuf {
    work.join("graphs")
}

pub fn model_dir(work: &Path) -> PathBuf {
    work.join("model")
}

pub fn default_den_lm(work: &Path) -> PathBuf {
    work.join("lm").join("den.arpa")
}

pub fn read_alphabet(path: &Path) -> CliResult<Alphabet> {
    require_file(path, "alphabet")?;
    Ok(Alphabet::parse(&read_to_string(path)?)?)
}

pub fn read_den_table(work: &Path) -> CliResult<DenominatorTable> {
    let path = graphs_dir(work).join("den.fst");
    require_file(&path, "denominator graph")?;
    Ok(DenominatorTable::parse_text(&read_to_string(&path)?)?)
}

/// Utterance ids become file names, so they must be plain.
pub fn check_utt_id(id: &str) -> CliResult<()> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id.chars().all(|c| c.is_ascii_alphanumeric() || "-_.".contains(c));
    if ok {
        Ok(())
    } else {
        Err(data(format!("utterance id `{id}` must use only ASCII letters, digits, `-`, `_` or `.`")))
    }
}

pub struct PreparedUtt {
    pub id: String,
    pub example: Example,
}

/// Loads a prepared set in manifest order.
pub fn load_set(work: &Path, set: &str, alphabet: &Alphabet) -> CliResult<Vec<PreparedUtt>> {
    let dir = set_dir(work, set);
    let manifest = dir.join("manifest.tsv");
    require_file(&manifest, &format!("manifest of set `{set}`"))?;
    let log_pl = parse_log_pl_cache(&read_to_string(&dir.join("log_pl.txt"))?)?;
    let text = read_to_string(&manifest)?;
    let body = text.strip_prefix(MANIFEST_HEADER).unwrap_or(&text);
    let mut out = Vec::new();
    for (id, rest) in parse_keyed_lines(body, "manifest")? {
        let fields: Vec<&str> = rest.split('\t').collect();
        if fields.len() != 4 {
            return Err(data(format!("{}: utterance `{id}` needs 5 columns", manifest.display())));
        }
        let features = read_matrix(&dir.join(fields[2]))?;
        let labels = alphabet
            .encode(&fields[3].split_whitespace().collect::<Vec<_>>())
            .map_err(|e| data(format!("utterance `{id}`: {e}")))?;
        let log_pl = *log_pl
            .get(&id)
            .ok_or_else(|| data(format!("utterance `{id}` has no cached log p(l)")))?;
        out.push(PreparedUtt {
            id,
            example: Example { features, labels, log_pl },
        });
    }
    if out.is_empty() {
        return Err(data(format!("set `{set}` is empty")));
    }
    Ok(out)
}
