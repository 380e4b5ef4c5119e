use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, Parser, Subcommand};
use serde_json::{json, Value};

use seginr::data::{generate, read_dataset, write_dataset, DurationRule, TaskSpec};
use seginr::decode::{decode, probe_csv, probe_segment, DecodeConfig, DecodeMode, StopRule};
use seginr::eval::{ablation_csv, evaluate, run_ablation};
use seginr::net::tiny_gradient_check;
use seginr::numerics::{format_float, rng_from_seed};
use seginr::train::{load_checkpoint, save_checkpoint, train, TrainConfig};
use seginr::{Error, ModelConfig, ModelParams, TokenSequence};

#[derive(Parser)]
#[command(
    name = "seginr",
    version,
    about = "Segment-wise implicit neural representation toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset
    GenData(GenDataArgs),
    /// Write an untrained (random or all-zero) checkpoint
    Init(InitArgs),
    /// Train a checkpoint
    Train(TrainArgs),
    /// Decode one input sequence
    Decode(DecodeArgs),
    /// Per-index end-class and token probabilities of one segment
    Probe(ProbeArgs),
    /// Finite-difference check of the backward pass
    Gradcheck(GradcheckArgs),
    /// Padded-training x stop-rule ablation
    Ablate(AblateArgs),
    /// Error rate and duration accuracy on a dataset
    Eval(EvalArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, default_value = "contextual")]
    spec: DurationRule,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    umin: usize,
    #[arg(long, default_value_t = 8)]
    umax: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct ModelArgs {
    #[arg(long, default_value_t = 64)]
    embed_dim: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 2)]
    enc_layers: usize,
    #[arg(long, default_value_t = 3)]
    siren_layers: usize,
    #[arg(long, default_value_t = 1)]
    window: usize,
    #[arg(long, default_value_t = 1.0)]
    w0: f64,
}

impl ModelArgs {
    fn config(&self) -> ModelConfig {
        ModelConfig {
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            enc_layers: self.enc_layers,
            siren_layers: self.siren_layers,
            window: self.window,
            w0: self.w0,
            ..ModelConfig::default()
        }
    }
}

#[derive(Args)]
struct InitArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// All parameters zero instead of random
    #[arg(long)]
    zero: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    ipad: usize,
    #[arg(long, default_value_t = 30_000)]
    steps: usize,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = true, action = ArgAction::Set)]
    padded: bool,
    #[arg(long, default_value_t = 0)]
    ckpt_interval: usize,
    #[arg(long, default_value_t = 1000)]
    log_every: usize,
    /// Omit the optimizer state from the final checkpoint
    #[arg(long)]
    weights_only: bool,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecodeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Space-separated input token ids
    #[arg(long)]
    input: String,
    #[arg(long, default_value = "parallel")]
    mode: DecodeMode,
    #[arg(long, default_value = "threshold")]
    rule: String,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    imax: usize,
}

#[derive(Args)]
struct ProbeArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    input: String,
    #[arg(long, default_value_t = 0)]
    u: usize,
    #[arg(long, default_value_t = 20)]
    ipad: usize,
    /// CSV destination; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Tiny model (D=8, H=16, U=3, i_pad=4); the only supported size
    #[arg(long, default_value_t = true)]
    tiny: bool,
    #[arg(long, default_value_t = 200)]
    samples: usize,
    #[arg(long, default_value_t = 1e-5)]
    h: f64,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    padded_ckpt: PathBuf,
    #[arg(long)]
    unpadded_ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 20)]
    imax: usize,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "threshold")]
    rule: String,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 20)]
    imax: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status 1: validation failure.
struct Validation(String);

enum Failure {
    Lib(Error),
    Validation(Validation),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CmdResult = Result<(), Failure>;

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

struct Manifest {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: u64,
}

impl Manifest {
    fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        Self {
            command,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: unix_now(),
        }
    }

    /// Writes `<artifact>.manifest.json` next to the first output.
    fn write(&self) -> Result<(), Error> {
        let Some(first) = self.outputs.first() else {
            return Ok(());
        };
        let path = sidecar(first, "manifest.json");
        let value = json!({
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "started_unix": self.started,
            "finished_unix": unix_now(),
        });
        let text = serde_json::to_string_pretty(&value).expect("manifest serializes");
        write_text(&path, &(text + "\n"))
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn parse_input(text: &str, model: &ModelParams) -> Result<TokenSequence, Failure> {
    let tokens = text
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| Failure::Validation(Validation(format!("bad token id {t:?}"))))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(TokenSequence::new(tokens, model.vocab())?)
}

fn parse_rule(rule: &str, tau: f64) -> Result<StopRule, Failure> {
    match rule {
        "threshold" => Ok(StopRule::Threshold(tau)),
        "argmax" => Ok(StopRule::Argmax),
        other => Err(Failure::Validation(Validation(format!(
            "unknown stop rule {other:?}"
        )))),
    }
}

fn join(items: impl IntoIterator<Item = impl ToString>) -> String {
    items
        .into_iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn cmd_gen_data(a: GenDataArgs) -> CmdResult {
    let spec = TaskSpec {
        rule: a.spec,
        u_min: a.umin,
        u_max: a.umax,
        seed: a.seed,
        ..TaskSpec::default()
    };
    let mut manifest = Manifest::new(
        "gen-data",
        json!({"rule": a.spec.to_string(), "n": a.n, "input_size": spec.input_size,
               "output_size": spec.output_size, "u_min": a.umin, "u_max": a.umax}),
        Some(a.seed),
    );
    let examples = generate(&spec, a.n)?;
    write_dataset(&examples, &a.out)?;
    manifest.outputs.push(a.out.clone());
    manifest.write()?;
    eprintln!("wrote {} examples to {}", examples.len(), a.out.display());
    Ok(())
}

fn cmd_init(a: InitArgs) -> CmdResult {
    let config = a.model.config();
    let model = if a.zero {
        ModelParams::zeros(config)?
    } else {
        ModelParams::init(config, &mut rng_from_seed(a.seed))?
    };
    save_checkpoint(&model, None, &a.out)?;
    let mut manifest = Manifest::new(
        "init",
        json!({"model": config_json(&config), "zero": a.zero}),
        Some(a.seed),
    );
    manifest.outputs.push(a.out);
    manifest.write()?;
    Ok(())
}

fn config_json(c: &ModelConfig) -> Value {
    json!({
        "input_size": c.input_size, "output_size": c.output_size, "embed_dim": c.embed_dim,
        "hidden": c.hidden, "enc_layers": c.enc_layers, "siren_layers": c.siren_layers,
        "window": c.window, "w0": c.w0,
    })
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let dataset = read_dataset(&a.data)?;
    let config = a.model.config();
    let model = ModelParams::init(config, &mut rng_from_seed(a.seed))?;
    let cfg = TrainConfig {
        i_pad: a.ipad,
        lr: a.lr,
        steps: a.steps,
        batch_size: a.batch,
        seed: a.seed,
        padded: a.padded,
        checkpoint_path: (a.ckpt_interval > 0).then(|| a.out.clone()),
        checkpoint_interval: a.ckpt_interval,
    };
    let mut manifest = Manifest::new(
        "train",
        json!({"model": config_json(&config), "i_pad": a.ipad, "lr": a.lr, "steps": a.steps,
               "batch_size": a.batch, "padded": a.padded, "ckpt_interval": a.ckpt_interval,
               "weights_only": a.weights_only}),
        Some(a.seed),
    );
    manifest.inputs.push(a.data.clone());
    let log_every = a.log_every.max(1);
    let outcome = train(&dataset, model, &cfg, |step, loss| {
        if step % log_every == 0 || step + 1 == a.steps {
            eprintln!("step {step:>6}  loss {loss:.6}");
        }
    })?;
    let adam = (!a.weights_only).then_some(&outcome.adam);
    save_checkpoint(&outcome.model, adam, &a.out)?;
    let mut trace = String::from("step,loss\n");
    for (k, l) in outcome.losses.iter().enumerate() {
        writeln!(trace, "{k},{}", format_float(*l)).unwrap();
    }
    let trace_path = sidecar(&a.out, "loss.csv");
    write_text(&trace_path, &trace)?;
    manifest.outputs.push(a.out.clone());
    manifest.outputs.push(trace_path);
    manifest.write()?;
    if let (Some(first), Some(last)) = (outcome.losses.first(), outcome.losses.last()) {
        eprintln!("initial loss {first:.6}, final loss {last:.6}");
    }
    Ok(())
}

fn cmd_decode(a: DecodeArgs) -> CmdResult {
    let ck = load_checkpoint(&a.ckpt)?;
    let x = parse_input(&a.input, &ck.model)?;
    let cfg = DecodeConfig {
        mode: a.mode,
        rule: parse_rule(&a.rule, a.tau)?,
        i_max: a.imax,
    };
    let r = decode(&x, &ck.model, &cfg)?;
    println!("output: {}", join(&r.output));
    println!("durations: {}", join(&r.durations));
    println!(
        "truncated: {}",
        join(r.truncated.iter().map(|&t| u8::from(t)))
    );
    // wasted is reported for the parallel grid regardless of mode
    let grid_waste: usize = r.durations.iter().map(|d| a.imax - d).sum();
    println!("wasted: {grid_waste}");
    Ok(())
}

fn cmd_probe(a: ProbeArgs) -> CmdResult {
    let ck = load_checkpoint(&a.ckpt)?;
    let x = parse_input(&a.input, &ck.model)?;
    let records = probe_segment(a.u, &x, &ck.model, a.ipad)?;
    let csv = probe_csv(&records);
    match &a.out {
        Some(path) => {
            write_text(path, &csv)?;
            let mut manifest = Manifest::new(
                "probe",
                json!({"input": a.input, "u": a.u, "i_pad": a.ipad}),
                None,
            );
            manifest.inputs.push(a.ckpt.clone());
            manifest.outputs.push(path.clone());
            manifest.write()?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CmdResult {
    if !a.tiny {
        return Err(Failure::Validation(Validation(
            "only the tiny model is supported".into(),
        )));
    }
    let err = tiny_gradient_check(a.seed, a.samples, a.h)?;
    println!("max relative error: {}", format_float(err));
    if let Some(path) = &a.out {
        write_text(
            path,
            &format!(
                "seed,samples,h,max_rel_error\n{},{},{},{}\n",
                a.seed,
                a.samples,
                format_float(a.h),
                format_float(err)
            ),
        )?;
        let mut manifest = Manifest::new(
            "gradcheck",
            json!({"samples": a.samples, "h": a.h, "tol": a.tol}),
            Some(a.seed),
        );
        manifest.outputs.push(path.clone());
        manifest.write()?;
    }
    if err > a.tol {
        return Err(Failure::Validation(Validation(format!(
            "gradient check failed: {err:e} > {:e}",
            a.tol
        ))));
    }
    Ok(())
}

fn cmd_ablate(a: AblateArgs) -> CmdResult {
    let padded = load_checkpoint(&a.padded_ckpt)?.model;
    let unpadded = load_checkpoint(&a.unpadded_ckpt)?.model;
    let dataset = read_dataset(&a.data)?;
    let report = run_ablation(&dataset, &padded, &unpadded, a.imax, a.tau)?;
    let csv = ablation_csv(&report);
    match &a.out {
        Some(path) => {
            write_text(path, &csv)?;
            let mut manifest =
                Manifest::new("ablate", json!({"i_max": a.imax, "tau": a.tau}), None);
            manifest.inputs.extend([
                a.padded_ckpt.clone(),
                a.unpadded_ckpt.clone(),
                a.data.clone(),
            ]);
            manifest.outputs.push(path.clone());
            manifest.write()?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let model = load_checkpoint(&a.ckpt)?.model;
    let dataset = read_dataset(&a.data)?;
    let rule = parse_rule(&a.rule, a.tau)?;
    let counts = evaluate(&dataset, &model, rule, a.imax)?;
    let csv = format!(
        "seq_error,dur_acc,wasted_mean\n{},{},{}\n",
        format_float(counts.seq_error()),
        format_float(counts.duration_accuracy()),
        format_float(counts.wasted_mean())
    );
    match &a.out {
        Some(path) => {
            write_text(path, &csv)?;
            let mut manifest = Manifest::new(
                "eval",
                json!({"rule": a.rule, "tau": a.tau, "i_max": a.imax}),
                None,
            );
            manifest.inputs.extend([a.ckpt.clone(), a.data.clone()]);
            manifest.outputs.push(path.clone());
            manifest.write()?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn configure_threads() {
    if let Some(n) = std::env::var("SEGINR_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        // only fails if a global pool already exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    configure_threads();
    let result = match cli.command {
        Command::GenData(a) => cmd_gen_data(a),
        Command::Init(a) => cmd_init(a),
        Command::Train(a) => cmd_train(a),
        Command::Decode(a) => cmd_decode(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Eval(a) => cmd_eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(Validation(msg))) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
