//! Command-line front end: generate, train, eval, gradcheck, ablate.
//!
//! Every command resolves one [`RunConfig`] (TOML file, then flags), writes a
//! [`RunManifest`] next to its outputs, and maps failures to exit codes:
//! 2 config, 3 I/O, 4 data, 5 compatibility, 6 numeric check.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    generate_synthetic, load_corpus, sample_clip_batch, sample_phase_batch, sample_video_batch,
    save_corpus, synthetic_prompts, Corpus, GeneratorConfig,
};
use crate::encoders::{ModelConfig, ModelParams};
use crate::error::{HecvlError, Level, Result};
use crate::numerics::{finite_diff_check, Matrix};
use crate::objectives::{check_against, check_loss_gradients, compute_loss, LossInput, Temperature};
use crate::rng::{digest_hex, substream};
use crate::trainer::{
    cycle_mean_losses, load_checkpoint, log_to_jsonl, save_checkpoint, train, Checkpoint, Levels,
    TrainConfig, TrainMode, Trainer,
};
use crate::zeroshot::{evaluate_checkpoint, render_table, MetricsReport, PromptSet, TableRow};

/// Gradient checks pass below this relative error.
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

/// Central-difference steps tried per coordinate by [`gradcheck`].
pub const GRADCHECK_STEPS: [f64; 4] = [1e-3, 1e-4, 1e-5, 1e-6];

#[derive(Debug, Parser)]
#[command(name = "hecvl", version, about = "Hierarchical video-text contrastive learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus, class prompts and a manifest.
    Generate(GenerateArgs),
    /// Train on the non-held-out videos of a corpus.
    Train(TrainArgs),
    /// Zero-shot phase classification of held-out clips.
    Eval(EvalArgs),
    /// Finite-difference check of all four losses.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate the four level-subset variants.
    Ablate(AblateArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides `generator.videos`.
    #[arg(long)]
    pub videos: Option<usize>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct TrainFlags {
    /// Overrides `train.mode`.
    #[arg(long)]
    pub mode: Option<TrainMode>,
    /// Overrides `train.cycles`.
    #[arg(long)]
    pub cycles: Option<u64>,
    /// Overrides `train.lr`.
    #[arg(long)]
    pub lr: Option<f64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long)]
    pub corpus: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Save the freshly initialized checkpoint without training.
    #[arg(long)]
    pub init_only: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturbs one analytic gradient entry before checking.
    #[arg(long, hide = true)]
    pub corrupt: bool,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(flatten)]
    pub flags: TrainFlags,
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub prompts: PathBuf,
    /// Existing output directory.
    #[arg(long)]
    pub out: PathBuf,
}

impl std::str::FromStr for Levels {
    type Err = HecvlError;

    fn from_str(s: &str) -> Result<Self> {
        let mut l = Levels {
            clip: false,
            phase: false,
            video: false,
        };
        for part in s.split('+') {
            match part {
                "clip" => l.clip = true,
                "phase" => l.phase = true,
                "video" => l.video = true,
                other => return Err(HecvlError::Config(format!("unknown level {other:?}"))),
            }
        }
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Fraction of videos held out for zero-shot evaluation.
    pub holdout: f64,
    pub prompts_per_class: usize,
    pub prompt_len: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            holdout: 0.25,
            prompts_per_class: 2,
            prompt_len: 6,
        }
    }
}

/// Complete configuration of a run; the root seed is copied into every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub generator: GeneratorConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HecvlError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    /// File (if any), then `--seed`, then propagation of the root seed.
    pub fn resolve(common: &CommonArgs) -> Result<Self> {
        let mut cfg = match &common.config {
            Some(p) => Self::load(p)?,
            None => Self::default(),
        };
        if let Some(s) = common.seed {
            cfg.seed = s;
        }
        cfg.generator.seed = cfg.seed;
        cfg.train.seed = cfg.seed;
        Ok(cfg)
    }

    fn apply(&mut self, flags: &TrainFlags) {
        if let Some(m) = flags.mode {
            self.train.mode = m;
        }
        if let Some(c) = flags.cycles {
            self.train.cycles = c;
        }
        if let Some(lr) = flags.lr {
            self.train.lr = lr;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.train.validate()?;
        let e = &self.eval;
        if !(e.holdout > 0.0 && e.holdout < 1.0) {
            return Err(HecvlError::Config(format!(
                "eval.holdout must lie in (0, 1), got {}",
                e.holdout
            )));
        }
        if e.prompts_per_class == 0 || e.prompt_len == 0 {
            return Err(HecvlError::Config(
                "eval.prompts_per_class and eval.prompt_len must be >= 1".into(),
            ));
        }
        Ok(())
    }

    /// Class prompts from the generator's vocabulary blocks.
    pub fn prompts(&self) -> Result<PromptSet> {
        let mut rng = substream(self.seed, "prompts");
        PromptSet::from_pairs(synthetic_prompts(
            &self.generator,
            self.eval.prompts_per_class,
            self.eval.prompt_len,
            &mut rng,
        )?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub sha256: Option<String>,
}

impl FileRecord {
    fn of(path: &Path) -> Self {
        Self {
            path: path.display().to_string(),
            sha256: fs::read(path).ok().map(|b| digest_hex(&b)),
        }
    }
}

/// Provenance record written before a run and completed after it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub status: String,
    pub tool_version: String,
    pub seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
}

impl RunManifest {
    fn begin(command: &str, config: &RunConfig, inputs: &[&Path], out_dir: &Path) -> Result<Self> {
        let m = Self {
            command: command.into(),
            status: "started".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            seed: config.seed,
            config: config.clone(),
            inputs: inputs.iter().map(|p| FileRecord::of(p)).collect(),
            outputs: Vec::new(),
        };
        m.write(out_dir)?;
        Ok(m)
    }

    fn finish(mut self, outputs: &[PathBuf], out_dir: &Path) -> Result<()> {
        self.status = "complete".into();
        self.outputs = outputs.iter().map(|p| FileRecord::of(p)).collect();
        self.write(out_dir)
    }

    fn write(&self, out_dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::from)?;
        write_atomic(&out_dir.join(format!("{}.manifest.json", self.command)), format!("{json}\n").as_bytes())
    }
}

/// Writes via a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn require_dir(dir: &Path) -> Result<()> {
    if dir.is_dir() {
        Ok(())
    } else {
        Err(HecvlError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("output directory {} does not exist", dir.display()),
        )))
    }
}

pub fn exit_code(err: &HecvlError) -> u8 {
    use HecvlError::*;
    match err {
        Config(_) => 2,
        Io(_) => 3,
        Parse { .. } | Version { .. } | Integrity(_) | InsufficientData { .. } | Vocabulary { .. }
        | Coverage { .. } | EmptySegment | EmptyAggregation => 4,
        Compatibility(_) | Shape { .. } => 5,
        NonFinite { .. } | NonFiniteGradient { .. } | GradCheck { .. } | DegenerateEmbedding { .. } => 6,
        Contract(_) => 1,
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(if code == 0 { out as &mut dyn Write } else { err }, "{e}");
            return ExitCode::from(code);
        }
    };
    match run(&cli, out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

pub fn run(cli: &Cli, out: &mut impl Write) -> Result<()> {
    match &cli.command {
        Command::Generate(a) => cmd_generate(a, out),
        Command::Train(a) => cmd_train(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Gradcheck(a) => cmd_gradcheck(a, out),
        Command::Ablate(a) => cmd_ablate(a, out),
    }
}

pub fn cmd_generate(a: &GenerateArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = RunConfig::resolve(&a.common)?;
    if let Some(v) = a.videos {
        cfg.generator.videos = v;
    }
    cfg.validate()?;
    require_dir(&a.out)?;
    let manifest = RunManifest::begin("generate", &cfg, &[], &a.out)?;

    let corpus = generate_synthetic(&cfg.generator)?;
    let corpus_path = a.out.join("corpus.jsonl");
    let prompts_path = a.out.join("prompts.json");
    save_corpus(&corpus, &corpus_path)?;
    cfg.prompts()?.save(&prompts_path)?;

    let counts = corpus.pair_counts();
    writeln!(out, "clip pairs: {}", counts.clip)?;
    writeln!(out, "phase pairs: {}", counts.phase)?;
    writeln!(out, "video pairs: {}", counts.video)?;
    manifest.finish(&[corpus_path, prompts_path], &a.out)
}

fn train_split(corpus: &Corpus, cfg: &RunConfig) -> Result<(Corpus, Corpus)> {
    corpus.split_holdout(cfg.eval.holdout)
}

pub fn cmd_train(a: &TrainArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = RunConfig::resolve(&a.common)?;
    cfg.apply(&a.flags);
    cfg.validate()?;
    require_dir(&a.out)?;
    let manifest = RunManifest::begin("train", &cfg, &[&a.corpus], &a.out)?;

    let corpus = load_corpus(&a.corpus)?;
    let (train_set, _) = train_split(&corpus, &cfg)?;
    cfg.train.check_corpus(&train_set)?;
    let ckpt_path = a.out.join("checkpoint.hecv");
    let mut outputs = vec![ckpt_path.clone()];

    if a.init_only {
        save_checkpoint(&Trainer::new(cfg.train.clone())?.checkpoint(), &ckpt_path)?;
        writeln!(out, "saved untrained checkpoint")?;
        return manifest.finish(&outputs, &a.out);
    }

    let result = train(&cfg.train, &train_set)?;
    let log_path = a.out.join("train_log.jsonl");
    write_atomic(&log_path, log_to_jsonl(&result.log).as_bytes())?;
    outputs.push(log_path);
    save_checkpoint(&result.checkpoint, &ckpt_path)?;
    if !result.periodic.is_empty() {
        let dir = a.out.join("checkpoints");
        fs::create_dir_all(&dir)?;
        for (cycle, ckpt) in &result.periodic {
            let p = dir.join(format!("cycle-{cycle:04}.hecv"));
            save_checkpoint(ckpt, &p)?;
            outputs.push(p);
        }
    }

    let per_cycle = cfg.train.batches_per_cycle();
    let per_cycle = if cfg.train.mode == TrainMode::Sequential {
        cfg.train.total_batches()
    } else {
        per_cycle
    };
    let last = cfg.train.total_batches() / per_cycle - 1;
    writeln!(out, "trained {} batches", result.log.len())?;
    for ((level, first), (_, final_)) in cycle_mean_losses(&result.log, per_cycle, 0)
        .into_iter()
        .zip(cycle_mean_losses(&result.log, per_cycle, last))
    {
        writeln!(out, "{level}: first-cycle loss {first:.4}, final-cycle loss {final_:.4}")?;
    }
    manifest.finish(&outputs, &a.out)
}

/// Holds `ckpt` against the corpus and prompts it is about to be run on.
fn check_eval_compat(ckpt: &Checkpoint, corpus: &Corpus, prompts: &PromptSet) -> Result<()> {
    let model = ckpt.params.config();
    if let Some(d) = corpus.frame_dim() {
        if d != model.d_in {
            return Err(HecvlError::Compatibility(format!(
                "corpus frames have width {d}, checkpoint expects {}",
                model.d_in
            )));
        }
    }
    for class in prompts.classes() {
        for p in &class.prompts {
            if p.check_vocab(model.vocab).is_err() {
                return Err(HecvlError::Compatibility(format!(
                    "prompts for class {} use tokens outside the checkpoint vocabulary of {}",
                    class.label, model.vocab
                )));
            }
        }
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs, out: &mut impl Write) -> Result<()> {
    let cfg = RunConfig::resolve(&a.common)?;
    cfg.validate()?;
    require_dir(&a.out)?;
    let manifest = RunManifest::begin(
        "eval",
        &cfg,
        &[&a.checkpoint, &a.corpus, &a.prompts],
        &a.out,
    )?;

    let ckpt = load_checkpoint(&a.checkpoint)?;
    let corpus = load_corpus(&a.corpus)?;
    let prompts = PromptSet::load(&a.prompts)?;
    check_eval_compat(&ckpt, &corpus, &prompts)?;
    let (_, test) = train_split(&corpus, &cfg)?;
    let report = evaluate_checkpoint(&ckpt, &test, &prompts)?;

    let json_path = a.out.join("report.json");
    let table_path = a.out.join("report.txt");
    write_atomic(&json_path, format!("{}\n", report.to_json()).as_bytes())?;
    let table = render_table(&[TableRow {
        model: format!("hecvl/{}", mode_name(ckpt.config.mode)),
        dataset: "synthetic".into(),
        accuracy: report.accuracy,
        f1: report.macro_f1,
    }]);
    write_atomic(&table_path, table.as_bytes())?;
    write!(out, "{table}")?;
    writeln!(out, "F1 is macro-averaged over {} classes", report.per_class.len())?;
    manifest.finish(&[json_path, table_path], &a.out)
}

fn mode_name(m: TrainMode) -> &'static str {
    match m {
        TrainMode::Hecvl => "hecvl",
        TrainMode::Single => "single",
        TrainMode::Sequential => "sequential",
    }
}

/// Per-loss outcome of [`gradcheck`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradcheckLine {
    pub loss: Level,
    pub max_rel_error: f64,
    pub coords_checked: usize,
}

/// Checks the four losses on small random batches drawn from a tiny corpus.
pub fn gradcheck(seed: u64, corrupt: bool) -> Result<Vec<GradcheckLine>> {
    let corpus = generate_synthetic(&GeneratorConfig {
        videos: 4,
        phase_classes: 3,
        clips_per_phase: 2,
        frames_per_clip: 3,
        d_in: 6,
        vocab: 24,
        seed,
        ..GeneratorConfig::default()
    })?;
    let model = ModelConfig {
        d_in: 6,
        hidden: 16,
        d_emb: 8,
        d_tok: 6,
        vocab: 24,
    };
    let params = ModelParams::init(&model, &mut substream(seed, "gradcheck-init"))?;
    let tau = Temperature::default();
    let mut rng = substream(seed, "gradcheck-batches");
    let clip = sample_clip_batch(&corpus, 3, 2, &mut rng)?;
    let phase = sample_phase_batch(&corpus, 3, 3, &mut rng)?;
    let video = sample_video_batch(&corpus, 2, 4, &mut rng)?;
    let inputs = [
        LossInput::Clip(&clip),
        LossInput::Phase(&phase),
        LossInput::Video(&video),
        LossInput::Single {
            clip: &clip,
            phase: &phase,
            video: &video,
        },
    ];
    let mut lines = Vec::new();
    for (i, input) in inputs.into_iter().enumerate() {
        let report = if corrupt {
            let mut grads = compute_loss(input, &params, tau)?.grads.to_blocks();
            // visual.b2 is small enough to be checked in full.
            let g = &mut grads[3];
            let v = g.get(0, 0);
            g.set(0, 0, v + 1.0);
            check_against(input, &params, tau, &grads, &GRADCHECK_STEPS, seed + i as u64)?
        } else {
            check_loss_gradients(input, &params, tau, &GRADCHECK_STEPS, seed + i as u64)?
        };
        lines.push(GradcheckLine {
            loss: input.level(),
            max_rel_error: report.max_rel_error,
            coords_checked: report.coords_checked,
        });
    }
    Ok(lines)
}

/// Central differences on `f(x) = Σ a_i x_i²`; exact up to roundoff.
pub fn quadratic_self_test() -> Result<f64> {
    let a = Matrix::from_rows(&[[1.0, -2.0, 0.5], [3.0, 0.25, -1.5]])?;
    let mut x = vec![Matrix::from_rows(&[[0.3, -0.7, 1.1], [-0.2, 0.9, 0.4]])?];
    let grad = Matrix::from_vec(
        2,
        3,
        a.data().iter().zip(x[0].data()).map(|(a, x)| 2.0 * a * x).collect(),
    )?;
    let f = |p: &[Matrix]| -> Result<f64> {
        Ok(a.data().iter().zip(p[0].data()).map(|(a, x)| a * x * x).sum())
    };
    Ok(finite_diff_check(f, &mut x, &[grad], 1e-5, 0)?.max_rel_error)
}

pub fn cmd_gradcheck(a: &GradcheckArgs, out: &mut impl Write) -> Result<()> {
    let q = quadratic_self_test()?;
    writeln!(out, "quadratic self-test: max rel error {q:.3e}")?;
    let mut worst: Option<(Level, f64)> = None;
    for line in gradcheck(a.seed, a.corrupt)? {
        let ok = line.max_rel_error < GRADCHECK_TOLERANCE;
        writeln!(
            out,
            "{:<6} max rel error {:.3e} over {} coordinates: {}",
            line.loss.as_str(),
            line.max_rel_error,
            line.coords_checked,
            if ok { "pass" } else { "FAIL" }
        )?;
        if !ok && worst.is_none_or(|(_, e)| line.max_rel_error > e) {
            worst = Some((line.loss, line.max_rel_error));
        }
    }
    match worst {
        Some((loss, error)) => Err(HecvlError::GradCheck {
            loss: loss.as_str().to_string(),
            error,
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub clip: bool,
    pub phase: bool,
    pub video: bool,
    pub single_space: bool,
    pub batches: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
}

pub const ABLATION_VARIANTS: [&str; 4] = ["clip-only", "clip+phase", "single", "full"];

/// Training configuration of a named ablation variant.
pub fn ablation_variant(base: &TrainConfig, name: &str) -> Result<TrainConfig> {
    let mut cfg = base.clone();
    cfg.mode = TrainMode::Hecvl;
    match name {
        "clip-only" => cfg.levels = "clip".parse()?,
        "clip+phase" => cfg.levels = "clip+phase".parse()?,
        "full" => cfg.levels = Levels::default(),
        "single" => {
            cfg.levels = Levels::default();
            cfg.mode = TrainMode::Single;
        }
        other => return Err(HecvlError::Config(format!("unknown ablation variant {other:?}"))),
    }
    Ok(cfg)
}

/// Trains and evaluates every variant from the same seed.
pub fn ablate(
    base: &TrainConfig,
    train_set: &Corpus,
    test_set: &Corpus,
    prompts: &PromptSet,
) -> Result<Vec<(AblationRow, MetricsReport)>> {
    ABLATION_VARIANTS
        .iter()
        .map(|name| {
            let cfg = ablation_variant(base, name)?;
            cfg.check_corpus(train_set)?;
            let result = train(&cfg, train_set)?;
            let report = evaluate_checkpoint(&result.checkpoint, test_set, prompts)?;
            let row = AblationRow {
                variant: name.to_string(),
                clip: cfg.levels.clip,
                phase: cfg.levels.phase,
                video: cfg.levels.video,
                single_space: cfg.mode == TrainMode::Single,
                batches: result.log.len() as u64,
                accuracy: report.accuracy,
                macro_f1: report.macro_f1,
            };
            Ok((row, report))
        })
        .collect()
}

pub fn render_ablation(rows: &[AblationRow]) -> String {
    let mark = |b: bool| if b { "x" } else { "" };
    let mut out = format!(
        "{:<12} {:^5} {:^5} {:^5} {:^6} {:>10} {:>8}\n",
        "Variant", "Clip", "Phase", "Video", "Single", "Top-1 Acc.", "F1 Score"
    );
    out.push_str(&"-".repeat(59));
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{:<12} {:^5} {:^5} {:^5} {:^6} {:>10.1} {:>8.1}\n",
            r.variant,
            mark(r.clip),
            mark(r.phase),
            mark(r.video),
            mark(r.single_space),
            100.0 * r.accuracy,
            100.0 * r.macro_f1
        ));
    }
    out
}

pub fn cmd_ablate(a: &AblateArgs, out: &mut impl Write) -> Result<()> {
    let mut cfg = RunConfig::resolve(&a.common)?;
    cfg.apply(&a.flags);
    cfg.validate()?;
    require_dir(&a.out)?;
    let manifest = RunManifest::begin("ablate", &cfg, &[&a.corpus, &a.prompts], &a.out)?;

    let corpus = load_corpus(&a.corpus)?;
    let prompts = PromptSet::load(&a.prompts)?;
    let (train_set, test_set) = train_split(&corpus, &cfg)?;
    let results = ablate(&cfg.train, &train_set, &test_set, &prompts)?;
    let rows: Vec<AblationRow> = results.iter().map(|(r, _)| r.clone()).collect();

    let json_path = a.out.join("ablation.json");
    let table_path = a.out.join("ablation.txt");
    let json = serde_json::to_string_pretty(&rows).map_err(std::io::Error::from)?;
    write_atomic(&json_path, format!("{json}\n").as_bytes())?;
    let table = render_ablation(&rows);
    write_atomic(&table_path, table.as_bytes())?;
    write!(out, "{table}")?;
    manifest.finish(&[json_path, table_path], &a.out)
}
