use ctccrf::lm::parse_arpa;
use ctccrf::wfst::{build_ctc_topology, build_decoding_graph, build_denominator_graph, Lexicon};
use ctccrf::{flatten_denominator, Wfst};

use crate::cli::BuildGraphsArgs;
use crate::data::{alphabet_path, default_den_lm, graphs_dir, read_alphabet};
use crate::error::CliResult;
use crate::fsutil::{read_to_string, require_file, write_atomic};

fn write_fst(dir: &std::path::Path, name: &str, fst: &Wfst) -> CliResult<()> {
    write_atomic(&dir.join(format!("{name}.fst")), fst.to_text().as_bytes())?;
    write_atomic(&dir.join(format!("{name}.isyms")), fst.isyms().to_text().as_bytes())?;
    write_atomic(&dir.join(format!("{name}.osyms")), fst.osyms().to_text().as_bytes())
}

pub fn build_graphs(args: &BuildGraphsArgs) -> CliResult<()> {
    let alphabet_file = args.alphabet.clone().unwrap_or_else(|| alphabet_path(&args.work));
    let den_path = args.den_lm.clone().unwrap_or_else(|| default_den_lm(&args.work));
    let word_path = args.word_lm.clone().unwrap_or_else(|| den_path.clone());
    require_file(&alphabet_file, "alphabet")?;
    require_file(&den_path, "denominator LM")?;
    require_file(&word_path, "word LM")?;
    if let Some(lex) = &args.lexicon {
        require_file(lex, "lexicon")?;
    }

    let alphabet = read_alphabet(&alphabet_file)?;
    let den_lm = parse_arpa(&read_to_string(&den_path)?)?;
    let word_lm = if word_path == den_path {
        den_lm.clone()
    } else {
        parse_arpa(&read_to_string(&word_path)?)?
    };
    let lexicon = match &args.lexicon {
        Some(p) => Some(Lexicon::parse(&read_to_string(p)?)?),
        None => None,
    };

    // build everything before writing anything
    let topo = build_ctc_topology(&alphabet)?;
    let den = flatten_denominator(&build_denominator_graph(&alphabet, &den_lm)?)?;
    let tlg = build_decoding_graph(&alphabet, lexicon.as_ref(), &word_lm)?;

    let dir = graphs_dir(&args.work);
    write_fst(&dir, "T", &topo)?;
    write_atomic(&dir.join("den.fst"), den.to_text().as_bytes())?;
    write_fst(&dir, "TLG", &tlg)?;
    eprintln!("T: {} states, {} arcs", topo.num_states(), topo.num_arcs());
    eprintln!("den: {} states, {} arcs", den.num_states(), den.num_arcs());
    eprintln!("TLG: {} states, {} arcs", tlg.num_states(), tlg.num_arcs());
    Ok(())
}
