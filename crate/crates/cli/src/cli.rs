use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ctccrf", version, about = "CTC-CRF training, graph building and decoding")]
pub struct Cli {
    /// Flat `key = value` file supplying defaults for any flag of the
    /// chosen subcommand. Flags given on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Worker threads for loss and decoding (defaults to all cores).
    #[arg(long, global = true, value_name = "N")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded toy corpus: alphabet, transcripts and features.
    Synth(SynthArgs),
    /// Estimate a backoff n-gram LM from a text corpus and write ARPA.
    LmTrain(LmTrainArgs),
    /// Validate one data set, cache `log p(l)` and store subsampled features.
    Prepare(PrepareArgs),
    /// Build the CTC topology, the flattened denominator and the TLG graph.
    BuildGraphs(BuildGraphsArgs),
    /// Check the CTC-CRF gradient against finite differences.
    Gradcheck(GradcheckArgs),
    /// Train the acoustic model with the CTC-CRF objective.
    Train(TrainArgs),
    /// Decode a prepared set with the beam search or greedily.
    Decode(DecodeArgs),
    /// Score hypotheses against reference transcripts.
    Score(ScoreArgs),
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct SynthArgs {
    /// Output directory.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub num_labels: usize,
    #[arg(long, default_value_t = 8)]
    pub feature_dim: usize,
    /// Standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.2)]
    pub noise: f64,
    #[arg(long, default_value_t = 200)]
    pub train_size: usize,
    #[arg(long, default_value_t = 50)]
    pub test_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct LmTrainArgs {
    /// One whitespace-tokenized sentence per line.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Absolute discount subtracted from every seen count.
    #[arg(long, default_value_t = 0.5)]
    pub discount: f64,
    /// Close the vocabulary over this label alphabet.
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    /// Output ARPA file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct PrepareArgs {
    #[arg(long)]
    pub alphabet: PathBuf,
    /// `utt<TAB>label label ...` transcripts.
    #[arg(long)]
    pub labels: PathBuf,
    /// `utt<TAB>path` feature list; relative paths resolve against it.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub work: PathBuf,
    #[arg(long, default_value = "train")]
    pub set: String,
    /// Denominator LM used for `log p(l)` [default: WORK/lm/den.arpa].
    #[arg(long)]
    pub den_lm: Option<PathBuf>,
    /// Keep every k-th feature frame.
    #[arg(long, default_value_t = 1)]
    pub subsample: usize,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct BuildGraphsArgs {
    #[arg(long)]
    pub work: PathBuf,
    /// Label alphabet [default: WORK/data/alphabet.txt].
    #[arg(long)]
    pub alphabet: Option<PathBuf>,
    /// Label LM for the denominator [default: WORK/lm/den.arpa].
    #[arg(long)]
    pub den_lm: Option<PathBuf>,
    /// Word LM for decoding [default: the denominator LM].
    #[arg(long)]
    pub word_lm: Option<PathBuf>,
    /// `word l1 l2 ...` pronunciations; without it words are labels.
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 3)]
    pub frames: usize,
    #[arg(long, default_value_t = 2)]
    pub num_labels: usize,
    #[arg(long, default_value_t = 2)]
    pub lm_order: usize,
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-4)]
    pub step: f64,
    /// Maximum relative error on node potentials.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
    #[arg(long, default_value = "affine:6,tanh,birnn:4")]
    pub model_layers: String,
    /// Maximum relative error through the acoustic model.
    #[arg(long, default_value_t = 1e-3)]
    pub model_tolerance: f64,
    /// Skip the end-to-end check through the acoustic model.
    #[arg(long)]
    pub no_model: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct TrainArgs {
    #[arg(long)]
    pub work: PathBuf,
    #[arg(long, default_value = "train")]
    pub set: String,
    /// Prepared set used for the per-epoch token error.
    #[arg(long)]
    pub heldout_set: Option<String>,
    /// Comma-separated layer menu, e.g. `affine:32,tanh,birnn:16`.
    #[arg(long, default_value = "birnn:8")]
    pub layers: String,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.01)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerKind::Adam)]
    pub optimizer: OptimizerKind,
    /// Weight of the auxiliary CTC term.
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Global gradient-norm clip; 0 disables clipping.
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    #[arg(long, default_value_t = 0.0)]
    pub dropout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct DecodeArgs {
    #[arg(long)]
    pub work: PathBuf,
    #[arg(long, default_value = "test")]
    pub set: String,
    /// Model checkpoint [default: WORK/model/final.ckpt].
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Maximum live tokens per frame.
    #[arg(long, default_value_t = 64)]
    pub beam: usize,
    /// Score slack below the frame's best token.
    #[arg(long, default_value_t = 16.0)]
    pub slack: f64,
    /// Skip frames whose blank probability exceeds this threshold.
    #[arg(long, default_value_t = 0.7)]
    pub blank_skip: f64,
    #[arg(long)]
    pub no_blank_skip: bool,
    /// Charge skipped frames their blank log-posterior.
    #[arg(long)]
    pub skip_adds_blank: bool,
    /// Per-frame argmax instead of the graph search; outputs labels.
    #[arg(long)]
    pub greedy: bool,
    /// Hypothesis file [default: WORK/decode/SET.hyp].
    #[arg(long)]
    pub hyp_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(args_override_self = true)]
pub struct ScoreArgs {
    /// `utt<TAB>token token ...` hypotheses.
    #[arg(long)]
    pub hyp: PathBuf,
    /// Reference transcripts in the same format.
    #[arg(long = "ref")]
    pub reference: PathBuf,
    /// Also write the breakdown to this file.
    #[arg(long)]
    pub report: Option<PathBuf>,
}
