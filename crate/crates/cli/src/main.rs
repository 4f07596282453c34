mod config;

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gridknot::eval::{self, SweepConfig, DEFAULT_BINARIZE_THRESHOLD};
use gridknot::generator::{self, derive_seed, ClassSampling, GenConfig, GenError};
use gridknot::knot_table::parse_class_list;
use gridknot::learner::{
    self, argmax, checkpoint_dtype, load_checkpoint, save_checkpoint, CheckpointError, Classifier, EpochRecord,
    InputEncoding, Normalization, OptimizerKind, TrainConfig, TrainData,
};
use gridknot::moves::{self, parse_move_log};
use gridknot::search::{self, SearchBudget, Verdict};
use gridknot::{ClassRegistry, GridDiagram, Move, MoveSet, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use config::FileConfig;

const EXIT_INVALID: u8 = 3;
const EXIT_IO: u8 = 4;
const EXIT_KNOTTED: u8 = 10;
const EXIT_INCONCLUSIVE: u8 = 11;

#[derive(Parser)]
#[command(name = "gridknot", version, about = "Grid diagrams of knots: moves, datasets, unknot search and a BiLSTM classifier")]
struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for default input and output files.
    #[arg(long, global = true, env = "GRIDKNOT_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    /// TOML experiment config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a diagram file and print its size and crossing count.
    Validate(DiagramIo),
    /// Draw a diagram as text.
    Render(DiagramIo),
    /// Re-encode a diagram by its vertical edges.
    Dual(DiagramIo),
    /// Apply moves to a diagram.
    Move(MoveArgs),
    /// Write a labeled dataset as JSON lines.
    Generate(GenerateArgs),
    /// Decide whether a diagram is the unknot (exit 0), knotted (10) or undecided (11).
    Simplify(SimplifyArgs),
    /// Train a classifier and write a checkpoint.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset.
    Eval(EvalArgs),
    /// Accuracy against number of extra switch moves, per complexity.
    Sweep(SweepArgs),
    /// Test-time augmentation accuracy curve.
    Tta(TtaArgs),
    /// Train once with internal switches only and once with external ones.
    Compare(CompareArgs),
}

#[derive(Args)]
struct DiagramIo {
    /// Diagram JSON file, `-` for stdin.
    #[arg(long, short)]
    input: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct MoveArgs {
    #[command(flatten)]
    io: DiagramIo,
    /// A move such as `INTERNAL_SWITCH_ROWS 6`; repeatable.
    #[arg(long = "move", short = 'm')]
    moves: Vec<String>,
    /// File with one move per line.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct GenFlags {
    /// `all`, `first:K` or names such as `0_1,3_1`.
    #[arg(long)]
    classes: Option<String>,
    #[arg(long)]
    complexity_min: Option<usize>,
    #[arg(long)]
    complexity_max: Option<usize>,
    #[arg(long)]
    switch_moves: Option<usize>,
    /// `internal` or `external`.
    #[arg(long)]
    move_set: Option<MoveSet>,
    #[arg(long)]
    validation_complexity: Option<usize>,
    #[arg(long)]
    validation_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SetKind {
    Train,
    Validation,
    Fixed,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[arg(long, value_enum, default_value = "train")]
    set: SetKind,
    /// Training batches to write (`--set train`).
    #[arg(long, default_value_t = 1)]
    batches: u64,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Complexity of a fixed set.
    #[arg(long)]
    complexity: Option<usize>,
    /// Size of a fixed set.
    #[arg(long, default_value_t = 100)]
    count: usize,
    /// Balanced classes instead of uniform draws (fixed sets).
    #[arg(long)]
    balanced: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimplifyArgs {
    #[arg(long, short)]
    input: PathBuf,
    #[arg(long, default_value_t = SearchBudget::default().max_states)]
    max_states: usize,
    /// Write the move certificate here when the diagram is an unknot.
    #[arg(long)]
    certificate: Option<PathBuf>,
}

#[derive(Args, Clone, Default)]
struct TrainFlags {
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epoch_size: Option<usize>,
    /// `adam` or `sgd`.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long, value_enum)]
    encoding: Option<EncodingArg>,
    #[arg(long, value_enum)]
    normalization: Option<NormArg>,
    #[arg(long)]
    init_scale: Option<f64>,
    /// `f64` or `f32`.
    #[arg(long)]
    dtype: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EncodingArg {
    RowPairs,
    Vertices,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    DivideByN,
    Raw,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[command(flatten)]
    train: TrainFlags,
    /// Train on this fixed dataset instead of fresh batches.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Skip validation.
    #[arg(long)]
    no_validation: bool,
    /// Per-epoch history as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Average predictions over this many switch moves.
    #[arg(long)]
    tta: Option<usize>,
    #[arg(long, default_value = "internal")]
    move_set: MoveSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Confusion matrix CSV.
    #[arg(long)]
    confusion: Option<PathBuf>,
    /// Binarized confusion matrix picture.
    #[arg(long)]
    confusion_svg: Option<PathBuf>,
    #[arg(long)]
    threshold: Option<u64>,
    /// Per-class precision/recall/f1 CSV.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    /// Comma-separated complexities.
    #[arg(long, value_delimiter = ',')]
    complexities: Option<Vec<usize>>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    step: Option<usize>,
    #[arg(long)]
    probes: Option<usize>,
    #[arg(long, default_value = "internal")]
    move_set: MoveSet,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct TtaArgs {
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Largest number of averaged predictions.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, default_value = "internal")]
    move_set: MoveSet,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    gen: GenFlags,
    #[command(flatten)]
    train: TrainFlags,
    #[arg(long, short)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

/// An error together with the process exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        Failure {
            code: classify(&error),
            error,
        }
    }
}

fn classify(e: &anyhow::Error) -> u8 {
    let io = e.chain().any(|c| {
        c.is::<io::Error>()
            || matches!(c.downcast_ref::<GenError>(), Some(GenError::Io(_)))
            || matches!(c.downcast_ref::<CheckpointError>(), Some(CheckpointError::Io(_)))
    });
    if io {
        EXIT_IO
    } else {
        EXIT_INVALID
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Ctx {
    data_dir: PathBuf,
    file: FileConfig,
}

impl Ctx {
    fn data_path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.data_dir.join(default))
    }
}

fn read_input(path: &Path) -> anyhow::Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn read_diagram(path: &Path) -> anyhow::Result<GridDiagram> {
    Ok(GridDiagram::from_json(&read_input(path)?)?)
}

fn write_output(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn gen_config(ctx: &Ctx, flags: &GenFlags) -> anyhow::Result<GenConfig> {
    let file = &ctx.file.generator;
    let mut cfg = GenConfig::default();
    if let Some(c) = flags.classes.as_ref().or(file.classes.as_ref()) {
        cfg.classes = parse_class_list(c)?;
    }
    macro_rules! pick {
        ($field:ident) => {
            if let Some(v) = flags.$field.or(file.$field) {
                cfg.$field = v;
            }
        };
    }
    pick!(complexity_min);
    pick!(complexity_max);
    pick!(switch_moves);
    pick!(move_set);
    pick!(validation_complexity);
    pick!(validation_count);
    if let Some(b) = file.batch_size {
        cfg.batch_size = b;
    }
    if let Some(s) = flags.seed.or(ctx.file.seed) {
        cfg.seed = s;
    }
    let largest = ClassRegistry::builtin().max_seed_size(&cfg.classes);
    // keep desk defaults usable with any class list
    if flags.complexity_min.or(file.complexity_min).is_none() {
        cfg.complexity_min = cfg.complexity_min.max(largest);
    }
    if flags.complexity_max.or(file.complexity_max).is_none() {
        cfg.complexity_max = cfg.complexity_max.max(cfg.complexity_min);
    }
    if flags.validation_complexity.or(file.validation_complexity).is_none() {
        cfg.validation_complexity = cfg.validation_complexity.max(cfg.complexity_max);
    }
    Ok(cfg)
}

fn train_config(ctx: &Ctx, flags: &TrainFlags, seed: u64) -> anyhow::Result<(TrainConfig, String)> {
    let file = &ctx.file.train;
    let mut cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    if let Some(v) = flags.hidden_dim.or(file.hidden_dim) {
        cfg.hidden_dim = v;
    }
    if let Some(v) = flags.steps.or(file.steps) {
        cfg.steps = v;
    }
    if let Some(v) = flags.lr.or(file.learning_rate) {
        cfg.learning_rate = v;
    }
    if let Some(v) = flags.batch_size.or(file.batch_size) {
        cfg.batch_size = v;
    }
    if let Some(v) = flags.epoch_size.or(file.epoch_size) {
        cfg.epoch_size = v;
    }
    if let Some(v) = flags.init_scale.or(file.init_scale) {
        cfg.init_scale = Some(v);
    }
    cfg.encoding = match flags.encoding {
        Some(EncodingArg::RowPairs) => InputEncoding::RowPairs,
        Some(EncodingArg::Vertices) => InputEncoding::Vertices,
        None => file.encoding.unwrap_or_default(),
    };
    cfg.normalization = match flags.normalization {
        Some(NormArg::DivideByN) => Normalization::DivideByN,
        Some(NormArg::Raw) => Normalization::Raw,
        None => file.normalization.unwrap_or_default(),
    };
    match flags.optimizer.as_deref().or(file.optimizer.as_deref()) {
        None | Some("adam") => cfg.optimizer = OptimizerKind::adam(),
        Some("sgd") => cfg.optimizer = OptimizerKind::Sgd,
        Some(other) => bail!("unknown optimizer '{other}' (expected adam|sgd)"),
    }
    let dtype = flags
        .dtype
        .clone()
        .or_else(|| file.dtype.clone())
        .unwrap_or_else(|| "f64".into());
    if dtype != "f64" && dtype != "f32" {
        bail!("unknown dtype '{dtype}' (expected f64|f32)");
    }
    cfg.validate()?;
    Ok((cfg, dtype))
}

fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,step,train_loss,train_accuracy,val_loss,val_accuracy\n");
    for r in history {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        s.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.epoch,
            r.step,
            r.train_loss,
            r.train_accuracy,
            opt(r.val_loss),
            opt(r.val_accuracy)
        ));
    }
    s
}

fn print_epoch(r: &EpochRecord) {
    let val = match (r.val_loss, r.val_accuracy) {
        (Some(l), Some(a)) => format!(" val_loss {l:.4} val_acc {a:.4}"),
        _ => String::new(),
    };
    eprintln!(
        "epoch {:>4} step {:>7} loss {:.4} acc {:.4}{val}",
        r.epoch, r.step, r.train_loss, r.train_accuracy
    );
}

fn cmd_validate(a: &DiagramIo) -> CliResult {
    let d = read_diagram(&a.input)?;
    let text = format!("valid knot diagram: n={} crossings={}\n", d.n(), d.crossing_count());
    write_output(a.output.as_deref(), &text)?;
    Ok(())
}

fn cmd_render(a: &DiagramIo) -> CliResult {
    let d = read_diagram(&a.input)?;
    write_output(a.output.as_deref(), &d.render_ascii())?;
    Ok(())
}

fn cmd_dual(a: &DiagramIo) -> CliResult {
    let d = read_diagram(&a.input)?;
    write_output(a.output.as_deref(), &format!("{}\n", d.dual().to_json()))?;
    Ok(())
}

fn cmd_move(a: &MoveArgs) -> CliResult {
    let mut d = read_diagram(&a.io.input)?;
    let mut list: Vec<Move> = Vec::new();
    if let Some(log) = &a.log {
        list.extend(parse_move_log(&read_input(log)?)?);
    }
    for m in &a.moves {
        list.push(m.parse::<Move>()?);
    }
    for m in list {
        d = moves::apply(&d, m)?;
    }
    write_output(a.io.output.as_deref(), &format!("{}\n", d.to_json()))?;
    Ok(())
}

fn cmd_generate(ctx: &Ctx, a: &GenerateArgs) -> CliResult {
    let reg = ClassRegistry::builtin();
    let mut cfg = gen_config(ctx, &a.gen)?;
    if let Some(b) = a.batch_size {
        cfg.batch_size = b;
    }
    let samples = match a.set {
        SetKind::Train => {
            let mut out = Vec::new();
            for b in 0..a.batches {
                out.extend(generator::make_batch(&cfg, reg, b)?);
            }
            out
        }
        SetKind::Validation => {
            cfg.validate(reg)?;
            generator::make_validation_set(&cfg, reg)?
        }
        SetKind::Fixed => {
            let complexity = a.complexity.unwrap_or(cfg.complexity_max);
            let sampling = if a.balanced {
                ClassSampling::RoundRobin
            } else {
                ClassSampling::Uniform
            };
            generator::make_fixed_set(&cfg, reg, derive_seed(cfg.seed, 3, 0), complexity, a.count, sampling)?
        }
    };
    let path = ctx.data_path(&a.out, "dataset.jsonl");
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    generator::save_dataset(&path, &samples)?;
    eprintln!("wrote {} samples to {}", samples.len(), path.display());
    Ok(())
}

fn cmd_simplify(a: &SimplifyArgs) -> CliResult<u8> {
    let d = read_diagram(&a.input)?;
    let out = search::decide(&d, SearchBudget::with_max_states(a.max_states));
    let summary = format!(
        "states visited {}, smallest complexity {}",
        out.states_visited, out.min_complexity
    );
    Ok(match out.verdict {
        Verdict::Unknot { certificate } => {
            println!("unknot ({} moves; {summary})", certificate.len());
            if let Some(p) = &a.certificate {
                write_output(Some(p), &moves::format_move_log(&certificate))?;
            }
            0
        }
        Verdict::Knotted => {
            println!("knotted ({summary})");
            EXIT_KNOTTED
        }
        Verdict::Inconclusive => {
            println!("inconclusive ({summary})");
            EXIT_INCONCLUSIVE
        }
    })
}

fn run_train<F: Scalar>(
    ctx: &Ctx,
    a: &TrainArgs,
    cfg: &TrainConfig,
    gen: &GenConfig,
    fixed: Option<Vec<generator::LabeledSample>>,
) -> CliResult {
    let reg = ClassRegistry::builtin();
    let validation = if a.no_validation {
        None
    } else {
        Some(generator::make_validation_set(gen, reg)?)
    };
    let data = match &fixed {
        Some(samples) => TrainData::Fixed {
            samples,
            classes: &gen.classes,
        },
        None => TrainData::Generated(gen),
    };
    let out = learner::train::<F>(cfg, data, reg, validation.as_deref(), print_epoch)?;
    let path = ctx.data_path(&a.out, "model.json");
    save_checkpoint(&path, &out.model, cfg)?;
    if let Some(h) = &a.history {
        write_output(Some(h), &history_csv(&out.history))?;
    }
    eprintln!("saved {}", path.display());
    Ok(())
}

fn cmd_train(ctx: &Ctx, a: &TrainArgs) -> CliResult {
    let mut gen = gen_config(ctx, &a.gen)?;
    let (cfg, dtype) = train_config(ctx, &a.train, gen.seed)?;
    gen.batch_size = cfg.batch_size;
    let fixed = match &a.dataset {
        Some(p) => {
            let samples = generator::load_dataset(p)?;
            if a.gen.classes.is_none() && ctx.file.generator.classes.is_none() {
                let mut classes: Vec<_> = samples.iter().map(|s| s.label).collect();
                classes.sort();
                classes.dedup();
                gen.classes = classes;
            }
            Some(samples)
        }
        None => None,
    };
    gen.validate(ClassRegistry::builtin())?;
    match dtype.as_str() {
        "f32" => run_train::<f32>(ctx, a, &cfg, &gen, fixed),
        _ => run_train::<f64>(ctx, a, &cfg, &gen, fixed),
    }
}

const TAG_EVAL_TTA: u64 = 0xe7a;

fn run_eval<F: Scalar>(ctx: &Ctx, a: &EvalArgs, ckpt: &Path) -> CliResult {
    let (model, _) = load_checkpoint::<F>(ckpt)?;
    let samples = generator::load_dataset(&ctx.data_path(&a.dataset, "dataset.jsonl"))?;
    let labels = samples
        .iter()
        .map(|s| {
            model
                .coordinate(s.label)
                .ok_or_else(|| anyhow!("dataset class {} is not known to the model", s.label))
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let tta = a.tta.or(ctx.file.eval.tta_steps);
    let predictions: Vec<usize> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| -> anyhow::Result<usize> {
            let probs = match tta {
                Some(j) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(a.seed, TAG_EVAL_TTA, i as u64));
                    eval::tta_predict(&model, &s.diagram, j, &mut rng, a.move_set)?
                }
                None => model.predict(&s.diagram)?,
            };
            Ok(argmax(&probs))
        })
        .collect::<anyhow::Result<_>>()?;
    let report = eval::report(&predictions, &labels, model.num_classes())?;
    let cm = eval::confusion(&predictions, &labels, model.num_classes())?;
    println!("samples {} accuracy {:.4}", report.total, report.accuracy);
    println!("{:<6} {:>9} {:>9} {:>9} {:>8}", "class", "precision", "recall", "f1", "support");
    for (c, m) in model.classes.iter().zip(&report.per_class) {
        println!(
            "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>8}",
            c.name(),
            m.precision,
            m.recall,
            m.f1,
            m.support
        );
    }
    if let Some(p) = &a.report {
        write_output(Some(p), &report.to_csv(&model.classes))?;
    }
    if let Some(p) = &a.confusion {
        write_output(Some(p), &cm.to_csv(&model.classes))?;
    }
    if let Some(p) = &a.confusion_svg {
        let threshold = a
            .threshold
            .or(ctx.file.eval.binarize_threshold)
            .unwrap_or(DEFAULT_BINARIZE_THRESHOLD);
        write_output(Some(p), &cm.to_svg(threshold))?;
    }
    Ok(())
}

/// Runs `$body` with `$F` bound to the checkpoint's scalar type.
macro_rules! with_dtype {
    ($path:expr, $f:ident => $body:expr) => {
        match checkpoint_dtype($path)?.as_str() {
            "f32" => {
                type $f = f32;
                $body
            }
            "f64" => {
                type $f = f64;
                $body
            }
            other => Err(anyhow!("unsupported checkpoint dtype '{other}'").into()),
        }
    };
}

fn cmd_eval(ctx: &Ctx, a: &EvalArgs) -> CliResult {
    let ckpt = ctx.data_path(&a.ckpt, "model.json");
    with_dtype!(&ckpt, F => run_eval::<F>(ctx, a, &ckpt))
}

fn run_sweep<F: Scalar>(ctx: &Ctx, a: &SweepArgs, ckpt: &Path) -> CliResult {
    let (model, _): (Classifier<F>, _) = load_checkpoint(ckpt)?;
    let file = &ctx.file.sweep;
    let d = SweepConfig::default();
    let cfg = SweepConfig {
        complexities: a.complexities.clone().or(file.complexities.clone()).unwrap_or(d.complexities),
        samples_per_complexity: a.samples.or(file.samples).unwrap_or(d.samples_per_complexity),
        warmup: a.warmup.or(file.warmup).unwrap_or(d.warmup),
        step: a.step.or(file.step).unwrap_or(d.step),
        probes: a.probes.or(file.probes).unwrap_or(d.probes),
        move_set: a.move_set,
        seed: a.seed.or(ctx.file.seed).unwrap_or(d.seed),
    };
    let table = eval::sweep_accuracy_vs_moves(&model, ClassRegistry::builtin(), &cfg)?;
    write_output(a.out.as_deref(), &table.to_csv())?;
    if let Some(p) = &a.svg {
        write_output(Some(p), &table.to_svg())?;
    }
    Ok(())
}

fn cmd_sweep(ctx: &Ctx, a: &SweepArgs) -> CliResult {
    let ckpt = ctx.data_path(&a.ckpt, "model.json");
    with_dtype!(&ckpt, F => run_sweep::<F>(ctx, a, &ckpt))
}

fn run_tta<F: Scalar>(ctx: &Ctx, a: &TtaArgs, ckpt: &Path) -> CliResult {
    let (model, _): (Classifier<F>, _) = load_checkpoint(ckpt)?;
    let samples = generator::load_dataset(&ctx.data_path(&a.dataset, "dataset.jsonl"))?;
    let steps = a.steps.or(ctx.file.eval.tta_steps).unwrap_or(50);
    let curve = eval::tta_curve(&model, &samples, steps, a.seed, a.move_set)?;
    eprintln!(
        "single {:.4}, j={} {:.4}",
        curve.single_accuracy,
        steps,
        curve.points.last().map(|p| p.1).unwrap_or(curve.single_accuracy)
    );
    write_output(a.out.as_deref(), &curve.to_csv())?;
    Ok(())
}

fn cmd_tta(ctx: &Ctx, a: &TtaArgs) -> CliResult {
    let ckpt = ctx.data_path(&a.ckpt, "model.json");
    with_dtype!(&ckpt, F => run_tta::<F>(ctx, a, &ckpt))
}

fn cmd_compare(ctx: &Ctx, a: &CompareArgs) -> CliResult {
    let mut gen = gen_config(ctx, &a.gen)?;
    let (cfg, dtype) = train_config(ctx, &a.train, gen.seed)?;
    gen.batch_size = cfg.batch_size;
    let reg = ClassRegistry::builtin();
    let curves = match dtype.as_str() {
        "f32" => eval::internal_vs_external::<f32>(&cfg, &gen, reg)?,
        _ => eval::internal_vs_external::<f64>(&cfg, &gen, reg)?,
    };
    let (i, e) = curves.final_val_accuracy();
    eprintln!(
        "final validation accuracy: internal {:.4}, external {:.4}",
        i.unwrap_or(f64::NAN),
        e.unwrap_or(f64::NAN)
    );
    write_output(a.out.as_deref(), &curves.to_csv())?;
    if let Some(p) = &a.svg {
        write_output(Some(p), &curves.to_svg())?;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<u8> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let ctx = Ctx {
        data_dir: cli.data_dir,
        file,
    };
    match &cli.command {
        Command::Validate(a) => cmd_validate(a)?,
        Command::Render(a) => cmd_render(a)?,
        Command::Dual(a) => cmd_dual(a)?,
        Command::Move(a) => cmd_move(a)?,
        Command::Generate(a) => cmd_generate(&ctx, a)?,
        Command::Simplify(a) => return cmd_simplify(a),
        Command::Train(a) => cmd_train(&ctx, a)?,
        Command::Eval(a) => cmd_eval(&ctx, a)?,
        Command::Sweep(a) => cmd_sweep(&ctx, a)?,
        Command::Tta(a) => cmd_tta(&ctx, a)?,
        Command::Compare(a) => cmd_compare(&ctx, a)?,
    }
    Ok(0)
}

/// The error chain joined by `: `, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.ends_with(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", describe(&f.error));
            ExitCode::from(f.code)
        }
    }
}
