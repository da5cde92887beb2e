use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use endocrine::config::RunConfig;
use endocrine::data::Hormone;
use endocrine::eval::{evaluate, predict, write_embeddings_csv, ACCURACY_TOL};
use endocrine::infer::{infer, inspect_attention, run_session, DEFAULT_LAMBDA};
use endocrine::model::{load_checkpoint, ModelConfig, Seq2SeqModel};
use endocrine::pipeline::{tone_counts, Dataset};
use endocrine::train::{train, TrainOutputs};

/// Hormone-modulated encoder-decoder: data generation, training, evaluation
/// and inference.
#[derive(Parser)]
#[command(name = "endocrine", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the tone-annotated dialogue dataset (train.jsonl, val.jsonl, vocab.txt).
    GenData(GenData),
    /// Train a model; writes best.ckpt, last.ckpt, metrics.csv and summary.json.
    Train(Train),
    /// Score hormone predictions on a dataset split.
    Eval(Eval),
    /// Generate a response and report the predicted hormones as JSON.
    Infer(Infer),
    /// Run a multi-turn session and write the smoothed hormone trajectory.
    Session(Session),
    /// Export hormone-head attention weights over an input.
    InspectAttention(Inspect),
}

#[derive(Args)]
struct ConfigArg {
    /// Flat `key = value` config file; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct GenData {
    #[command(flatten)]
    config: ConfigArg,
    /// Output directory [config: data_dir]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Random seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Copies of each seed pair [default: 10]
    #[arg(long)]
    factor: Option<usize>,
}

#[derive(Args)]
struct Train {
    #[command(flatten)]
    config: ConfigArg,
    /// Dataset directory from gen-data [config: data_dir]
    #[arg(long)]
    data: Option<PathBuf>,
    /// Run directory [config: out_dir]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum epochs [default: 50]
    #[arg(long)]
    epochs: Option<usize>,
    /// Batch size [default: 8]
    #[arg(long)]
    batch_size: Option<usize>,
    /// Peak learning rate [default: 0.0001]
    #[arg(long)]
    lr: Option<f64>,
    /// Early-stopping patience in epochs [default: 10]
    #[arg(long)]
    patience: Option<usize>,
    /// No early stop at or before this epoch [default: 30]
    #[arg(long)]
    min_epoch_for_stop: Option<usize>,
    /// Random seed [default: 42]
    #[arg(long)]
    seed: Option<u64>,
    /// Detach hormone-head inputs from the sequence loss [default: off]
    #[arg(long)]
    detach_hormone_gradients: bool,
    /// Keep Gaussian key/value projections in the hormone heads [default: off]
    #[arg(long)]
    random_kv_init: bool,
    /// Gaussian instead of orthogonal hormone queries [default: off]
    #[arg(long)]
    random_query_init: bool,
    /// Drop the diversity loss [default: off]
    #[arg(long)]
    disable_diversity_loss: bool,
    /// Drop the margin loss [default: off]
    #[arg(long)]
    disable_margin_loss: bool,
    /// Predict only dopamine, cortisol and oxytocin [default: off]
    #[arg(long = "three-hormones")]
    three_hormones: bool,
    /// Fix the modulation gate at this value in [0.1, 0.5] [default: learnable, init 0.3]
    #[arg(long)]
    fixed_alpha: Option<f64>,
}

#[derive(Args)]
struct CkptArg {
    /// Checkpoint file [config: checkpoint]
    #[arg(long)]
    ckpt: Option<PathBuf>,
}

#[derive(Args)]
struct Eval {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    ckpt: CkptArg,
    /// Dataset directory [config: data_dir]
    #[arg(long)]
    data: Option<PathBuf>,
    /// Split to score: val or train [default: val]
    #[arg(long, default_value = "val")]
    split: String,
    /// Directory for report.json and table.csv [default: checkpoint directory]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write per-example hormones and embeddings to this CSV
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Accuracy tolerance [default: 0.15]
    #[arg(long, default_value_t = ACCURACY_TOL)]
    tol: f64,
}

#[derive(Args)]
struct Infer {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    ckpt: CkptArg,
    /// Input text
    #[arg(long, required_unless_present = "session_file")]
    text: Option<String>,
    /// Run a session over this file (one turn per line) instead of one input
    #[arg(long)]
    session_file: Option<PathBuf>,
    /// Session decay coefficient in [0, 1] [default: 0.7]
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Maximum generated tokens [default: max_sequence_length]
    #[arg(long)]
    max_gen_len: Option<usize>,
}

#[derive(Args)]
struct Session {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    ckpt: CkptArg,
    /// Turns, one per line
    #[arg(long)]
    session_file: PathBuf,
    /// Decay coefficient in [0, 1] [default: 0.7]
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Trajectory CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Maximum generated tokens [default: max_sequence_length]
    #[arg(long)]
    max_gen_len: Option<usize>,
}

#[derive(Args)]
struct Inspect {
    #[command(flatten)]
    config: ConfigArg,
    #[command(flatten)]
    ckpt: CkptArg,
    /// Input text
    #[arg(long)]
    text: String,
    /// Attention CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Numerical(_) => 2,
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn load_config(arg: &ConfigArg) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(p) = &arg.config {
        cfg.apply_file(p).map_err(usage)?;
    }
    Ok(cfg)
}

fn require(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf, Failure> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| Failure::Usage(format!("missing --{name} (or set it in the config file)")))
}

fn load_model(arg: &CkptArg, cfg: &RunConfig) -> Result<(PathBuf, Seq2SeqModel, endocrine::data::Vocab), Failure> {
    let path = require(arg.ckpt.clone(), &cfg.paths.checkpoint, "ckpt")?;
    let (model, vocab) = load_checkpoint(&path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok((path, model, vocab))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| usage(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn gen_data(a: GenData) -> Result<(), Failure> {
    let mut cfg = load_config(&a.config)?;
    if let Some(s) = a.seed {
        cfg.train.seed = s;
    }
    if let Some(f) = a.factor {
        cfg.data.expansion_factor = f;
    }
    let out = require(a.out, &cfg.paths.data_dir, "out")?;
    let ds = Dataset::generate(cfg.train.seed, cfg.data.expansion_factor, cfg.data.train_fraction).map_err(usage)?;
    ds.write(&out).map_err(|e| usage(format!("{}: {e}", out.display())))?;
    println!("wrote {} train / {} val pairs, vocabulary {} to {}", ds.train.len(), ds.val.len(), ds.vocab.len(), out.display());
    for ((tone, tr), (_, va)) in tone_counts(&ds.train).into_iter().zip(tone_counts(&ds.val)) {
        println!("  {:<9} train {tr:>5}  val {va:>4}", tone.name());
    }
    Ok(())
}

fn cmd_train(a: Train) -> Result<(), Failure> {
    let mut cfg = load_config(&a.config)?;
    let t = &mut cfg.train;
    if let Some(v) = a.epochs {
        t.epochs = v;
    }
    if let Some(v) = a.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = a.lr {
        t.lr = v;
    }
    if let Some(v) = a.patience {
        t.patience = v;
    }
    if let Some(v) = a.min_epoch_for_stop {
        t.min_epoch_for_stop = v;
    }
    if let Some(v) = a.seed {
        t.seed = v;
    }
    let ab = &mut cfg.model.ablation;
    ab.detach_hormone_gradients |= a.detach_hormone_gradients;
    ab.random_kv_init |= a.random_kv_init;
    ab.random_query_init |= a.random_query_init;
    ab.disable_diversity_loss |= a.disable_diversity_loss;
    ab.disable_margin_loss |= a.disable_margin_loss;
    ab.three_hormone_mode |= a.three_hormones;
    if a.fixed_alpha.is_some() {
        ab.fixed_alpha = a.fixed_alpha;
    }
    cfg.validate().map_err(usage)?;
    let data = require(a.data, &cfg.paths.data_dir, "data")?;
    let out = require(a.out, &cfg.paths.out_dir, "out")?;
    let ds = Dataset::read(&data).map_err(|e| usage(format!("{}: {e}", data.display())))?;

    let model_cfg = ModelConfig { vocab_size: ds.vocab.len(), ..cfg.model.clone() };
    let model = Seq2SeqModel::new(model_cfg, cfg.train.seed).map_err(usage)?;
    std::fs::create_dir_all(&out).map_err(usage)?;
    std::fs::write(out.join("config.txt"), cfg.to_kv()).map_err(usage)?;
    println!(
        "training {} parameters ({:.1}% trainable) on {} pairs",
        model.parameters().iter().map(|(_, t)| t.numel()).sum::<usize>(),
        100.0 * model.trainable_fraction(),
        ds.train.len()
    );
    let outputs = TrainOutputs { dir: out.clone() };
    let outcome = train(&model, &ds.vocab, &ds.train, &ds.val, &cfg.train, Some(&outputs), |r| {
        println!(
            "epoch {:>3}  lr {:.2e}  train {:.4}  val {:.4}  (seq {:.4}  hormone {:.5}  div {:.5})  alpha {:.3}",
            r.epoch, r.lr, r.train.total, r.val.total, r.val.seq, r.val.hormone, r.val.diversity, r.alpha_eff
        )
    })
    .map_err(|e| if e.is_numerical() { Failure::Numerical(e.to_string()) } else { usage(e) })?;
    let s = &outcome.summary;
    println!(
        "best epoch {} (val {:.4}){}; {:.0}s; artifacts in {}",
        s.best_epoch,
        s.best_val_loss,
        if s.stopped_early { ", stopped early" } else { "" },
        s.wall_seconds,
        out.display()
    );
    Ok(())
}

fn cmd_eval(a: Eval) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let (ckpt, model, vocab) = load_model(&a.ckpt, &cfg)?;
    let data = require(a.data, &cfg.paths.data_dir, "data")?;
    let ds = Dataset::read(&data).map_err(|e| usage(format!("{}: {e}", data.display())))?;
    if ds.vocab != vocab {
        return Err(usage("dataset vocabulary does not match the checkpoint"));
    }
    let pairs = match a.split.as_str() {
        "val" => &ds.val,
        "train" => &ds.train,
        other => return Err(usage(format!("unknown split {other:?} (expected val or train)"))),
    };
    let report = evaluate(&model, &vocab, pairs, a.tol).map_err(usage)?;
    let out = a.out.unwrap_or_else(|| ckpt.parent().map(Path::to_path_buf).unwrap_or_default());
    std::fs::create_dir_all(&out).map_err(usage)?;
    report.write_json(&out.join("report.json")).map_err(usage)?;
    report.write_table_csv(&out.join("table.csv")).map_err(usage)?;
    if let Some(path) = a.embeddings {
        let (preds, embeds) = predict(&model, &vocab, pairs).map_err(usage)?;
        write_embeddings_csv(&path, pairs, &model.hormone.hormones(), &preds, &embeds).map_err(usage)?;
    }
    print!("{}", report.render());
    Ok(())
}

fn trajectory_csv(rows: &[(endocrine::infer::InferenceResult, endocrine::infer::SessionState)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["turn".to_string()];
    header.extend(Hormone::ALL.iter().map(|h| format!("raw_{}", h.name())));
    header.extend(Hormone::ALL.iter().map(|h| format!("smoothed_{}", h.name())));
    w.write_record(&header).expect("in-memory write");
    for (i, (r, s)) in rows.iter().enumerate() {
        let raw = r.vector().expect("session results carry six hormones");
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(raw.0.iter().map(|v| v.to_string()));
        rec.extend(s.current.0.iter().map(|v| v.to_string()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn session_turns(path: &Path) -> Result<Vec<String>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    Ok(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
}

fn cmd_infer(a: Infer) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let (_, model, vocab) = load_model(&a.ckpt, &cfg)?;
    let max_gen = a.max_gen_len.unwrap_or(model.config.max_len);
    if let Some(file) = a.session_file {
        let rows = run_session(&model, &vocab, &session_turns(&file)?, a.lambda, max_gen).map_err(usage)?;
        print!("{}", trajectory_csv(&rows));
        return Ok(());
    }
    let text = a.text.expect("clap enforces --text");
    let r = infer(&model, &vocab, &text, max_gen).map_err(usage)?;
    println!("{}", serde_json::to_string_pretty(&r.to_json()).expect("json"));
    Ok(())
}

fn cmd_session(a: Session) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let (_, model, vocab) = load_model(&a.ckpt, &cfg)?;
    let max_gen = a.max_gen_len.unwrap_or(model.config.max_len);
    let rows = run_session(&model, &vocab, &session_turns(&a.session_file)?, a.lambda, max_gen).map_err(usage)?;
    for (i, (r, _)) in rows.iter().enumerate() {
        eprintln!("turn {}: [{}] {}", i + 1, r.nearest_tone.name(), r.response);
    }
    write_or_print(a.out.as_deref(), &trajectory_csv(&rows))
}

fn cmd_inspect(a: Inspect) -> Result<(), Failure> {
    let cfg = load_config(&a.config)?;
    let (_, model, vocab) = load_model(&a.ckpt, &cfg)?;
    let rows = inspect_attention(&model, &vocab, &a.text).map_err(usage)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["hormone", "head", "position", "token", "weight"]).expect("in-memory write");
    for r in rows {
        let rec = [r.hormone.name().to_string(), r.head.to_string(), r.position.to_string(), r.token, r.weight.to_string()];
        w.write_record(&rec).expect("in-memory write");
    }
    let text = String::from_utf8(w.into_inner().expect("flush")).expect("utf8");
    write_or_print(a.out.as_deref(), &text)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.cmd {
        Cmd::GenData(a) => gen_data(a),
        Cmd::Train(a) => cmd_train(a),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Infer(a) => cmd_infer(a),
        Cmd::Session(a) => cmd_session(a),
        Cmd::InspectAttention(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (Failure::Usage(m) | Failure::Numerical(m)) = &f;
            eprintln!("error: {m}");
            ExitCode::from(f.code())
        }
    }
}
