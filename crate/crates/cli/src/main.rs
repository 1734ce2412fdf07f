//! `sigfcn`: synthesize, split, train, evaluate, gradient-check and compare.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
//! 3 non-finite loss during training, 4 gradient check failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use sigfcn_core::checkpoint::{load_checkpoint, save_checkpoint};
use sigfcn_core::config::{Flavor, ModelConfig};
use sigfcn_core::data::{
    load_samples, split_dataset, split_fingerprint, synth_generate, DatasetCatalog, SignatureImage,
    SynthConfig, MANIFEST_NAME,
};
use sigfcn_core::eval::{evaluate, paper_reference_rows, render_csv, render_text, MetricsRow};
use sigfcn_core::exec::Executor;
use sigfcn_core::gradcheck::{self, Fault, GradCheckOptions};
use sigfcn_core::network::Network;
use sigfcn_core::train::{train, Example, SgdConfig, TrainReport};
use sigfcn_core::{Error, Rng};

const OUT_ENV: &str = "SIGFCN_OUT_DIR";
/// Stream of the root seed used for parameter initialization; training
/// shuffles draw from the per-epoch streams.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Parser)]
#[command(name = "sigfcn", version, about = "Offline signature verification with CNN and FCN models")]
struct Cli {
    /// Worker threads for per-sample work; 0 uses every core. Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic signature corpus and its manifest.
    Synth(SynthArgs),
    /// Split a manifest into train.manifest and test.manifest.
    Split(SplitArgs),
    /// Train a model and write model.ckpt and loss.csv.
    Train(TrainArgs),
    /// Evaluate a checkpoint and write metrics.csv and metrics.txt.
    Eval(EvalArgs),
    /// Check every analytic gradient against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Train and evaluate the CNN and FCN presets under identical conditions.
    Compare(CompareArgs),
}

#[derive(Args)]
struct OutDir {
    /// Output directory.
    #[arg(long, env = OUT_ENV)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 4)]
    persons: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 54)]
    height: usize,
    #[arg(long, default_value_t = 72)]
    width: usize,
    #[arg(long, default_value_t = 27)]
    genuine: usize,
    #[arg(long, default_value_t = 36)]
    simple: usize,
    #[arg(long, default_value_t = 6)]
    skilled: usize,
    #[arg(long, default_value_t = 3)]
    opposite: usize,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct SplitArgs {
    /// Dataset manifest (`path,person,kind`).
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct InputArgs {
    /// Override the model input height.
    #[arg(long, requires = "width")]
    height: Option<usize>,
    /// Override the model input width.
    #[arg(long, requires = "height")]
    width: Option<usize>,
}

#[derive(Args)]
struct SgdArgs {
    #[arg(long, default_value_t = 0.001)]
    lr: f64,
    #[arg(long, default_value_t = 128)]
    batch_size: usize,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SgdArgs {
    fn config(&self) -> SgdConfig {
        SgdConfig {
            learning_rate: self.lr,
            batch_size: self.batch_size,
            epochs: self.epochs,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    /// Preset name (`cnn`, `fcn`) or model config file.
    #[arg(long)]
    model: String,
    /// Training manifest.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sgd: SgdArgs,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test manifest.
    #[arg(long)]
    data: PathBuf,
    /// Expected model (preset or file); a checkpoint built from another config is rejected.
    #[arg(long)]
    model: Option<String>,
    #[command(flatten)]
    input: InputArgs,
    /// Row label; defaults to CNN or FCN by architecture.
    #[arg(long)]
    name: Option<String>,
    /// Append the published reference figures, labelled as such.
    #[arg(long)]
    with_paper_reference: bool,
    #[command(flatten)]
    out: OutDir,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    Conv,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Args)]
struct CompareArgs {
    /// Training manifest shared by both models.
    #[arg(long)]
    train: PathBuf,
    /// Test manifest shared by both models.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "cnn")]
    cnn: String,
    #[arg(long, default_value = "fcn")]
    fcn: String,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sgd: SgdArgs,
    /// Append the published reference figures, labelled as such.
    #[arg(long)]
    with_paper_reference: bool,
    #[command(flatten)]
    out: OutDir,
}

enum Failure {
    Core(Error),
    Usage(String),
    Gradcheck(Vec<&'static str>),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Gradcheck(_) => 4,
            Failure::Core(e) => match e {
                Error::Io { .. }
                | Error::Image { .. }
                | Error::CheckpointMagic
                | Error::CheckpointVersion { .. }
                | Error::CheckpointTruncated
                | Error::CheckpointChecksum { .. } => 2,
                Error::NonFiniteLoss { .. } => 3,
                _ => 1,
            },
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let exec = Executor::with_threads(cli.threads);
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a, &exec),
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a, &exec),
        Command::Eval(a) => cmd_eval(a, &exec),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Compare(a) => cmd_compare(a, &exec),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Core(e) => eprintln!("error: {e}"),
                Failure::Usage(msg) => eprintln!("error: {msg}"),
                Failure::Gradcheck(names) => eprintln!("error: gradient check failed for {}", names.join(", ")),
            }
            ExitCode::from(f.exit_code())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve_model(spec: &str, input: &InputArgs) -> Result<ModelConfig, Error> {
    let config = match ModelConfig::preset(spec) {
        Some(c) => c,
        None => ModelConfig::load(Path::new(spec))?,
    };
    let config = match (input.height, input.width) {
        (Some(h), Some(w)) => {
            let channels = config.input.channels;
            config.with_input(channels, h, w)
        }
        _ => config,
    };
    config.propagate()?;
    Ok(config)
}

fn flavor_name(config: &ModelConfig) -> &'static str {
    match config.flavor() {
        Ok(Flavor::Cnn) => "CNN",
        Ok(Flavor::Fcn) => "FCN",
        Err(_) => "model",
    }
}

fn load_set(manifest: &Path, config: &ModelConfig, exec: &Executor) -> Result<Vec<SignatureImage>, Error> {
    let catalog = DatasetCatalog::read(manifest)?;
    if catalog.is_empty() {
        return Err(Error::Empty("manifest"));
    }
    load_samples(catalog.entries(), config.input, exec)
}

fn cmd_synth(a: SynthArgs, exec: &Executor) -> CmdResult {
    let mut cfg = SynthConfig::new(a.persons, a.height, a.width, a.seed);
    cfg.genuine = a.genuine;
    cfg.simple = a.simple;
    cfg.skilled = a.skilled;
    cfg.opposite = a.opposite;
    let catalog = synth_generate(&cfg, &a.out.out, exec)?;
    println!(
        "wrote {} images and {}",
        catalog.len(),
        a.out.out.join(MANIFEST_NAME).display()
    );
    Ok(())
}

fn cmd_split(a: SplitArgs) -> CmdResult {
    let catalog = DatasetCatalog::read(&a.manifest)?;
    let split = split_dataset(&catalog, &Rng::new(a.seed))?;
    create_dir(&a.out.out)?;
    let (train_path, test_path) = (a.out.out.join("train.manifest"), a.out.out.join("test.manifest"));
    let comments = [format!("seed = {}", a.seed), format!("source = {}", DatasetCatalog::fingerprint(catalog.entries()))];
    DatasetCatalog::write_annotated(&train_path, &split.train, &comments)?;
    DatasetCatalog::write_annotated(&test_path, &split.test, &comments)?;
    let fingerprint = split_fingerprint(
        DatasetCatalog::read(&train_path)?.entries(),
        DatasetCatalog::read(&test_path)?.entries(),
    );
    println!("train: {} samples -> {}", split.train.len(), train_path.display());
    println!("test: {} samples -> {}", split.test.len(), test_path.display());
    println!("split = {fingerprint}");
    Ok(())
}

fn init_network(config: &ModelConfig, seed: u64) -> Result<Network<f32>, Error> {
    Network::build(config, &mut Rng::new(seed).fork(INIT_STREAM))
}

fn loss_csv(report: &TrainReport, seed: u64, config: &ModelConfig) -> String {
    let mut out = format!("# seed = {seed}\n# config_hash = {}\nepoch,loss,train_accuracy\n", config.hash());
    for (i, (loss, acc)) in report.losses.iter().zip(&report.accuracies).enumerate() {
        out.push_str(&format!("{},{loss:.9},{acc:.6}\n", i + 1));
    }
    out
}

fn cmd_train(a: TrainArgs, exec: &Executor) -> CmdResult {
    let config = resolve_model(&a.model, &a.input)?;
    let sgd = a.sgd.config();
    sgd.validate()?;
    let data: Vec<Example> = load_set(&a.data, &config, exec)?.iter().map(SignatureImage::to_example).collect();
    let mut net = init_network(&config, sgd.seed)?;
    log::info!(
        "{} with {} parameters, {} training samples",
        flavor_name(&config),
        net.param_count(),
        data.len()
    );
    let report = train(&mut net, &data, &sgd, exec)?;
    create_dir(&a.out.out)?;
    save_checkpoint(&net, sgd.seed, &a.out.out.join("model.ckpt"))?;
    write_file(&a.out.out.join("loss.csv"), &loss_csv(&report, sgd.seed, &config))?;
    println!(
        "trained {} epochs: final loss {:.6}, train accuracy {:.2}%",
        report.losses.len(),
        report.losses.last().copied().unwrap_or(f64::NAN),
        report.accuracies.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

fn metrics_header(lines: &[String]) -> String {
    lines.iter().map(|l| format!("# {l}\n")).collect()
}

fn cmd_eval(a: EvalArgs, exec: &Executor) -> CmdResult {
    let ckpt = load_checkpoint(&a.checkpoint)?;
    let config = ckpt.network.config().clone();
    if let Some(spec) = &a.model {
        let expected = resolve_model(spec, &a.input)?;
        if expected.hash() != config.hash() {
            return Err(Failure::Usage(format!(
                "checkpoint model (config hash {}) does not match `{spec}` (config hash {})",
                config.hash(),
                expected.hash()
            )));
        }
    }
    let samples = load_set(&a.data, &config, exec)?;
    let evaluation = evaluate(&ckpt.network, &samples, exec)?;
    let name = a.name.unwrap_or_else(|| flavor_name(&config).to_string());
    let mut rows = vec![MetricsRow::from_evaluation(&name, &evaluation)?];
    if a.with_paper_reference {
        rows.extend(paper_reference_rows());
    }
    let refs: Vec<_> = samples
        .iter()
        .map(|s| sigfcn_core::data::SampleRef {
            path: s.source.clone(),
            person: s.person.clone(),
            kind: s.kind,
        })
        .collect();
    let header = metrics_header(&[
        format!("seed = {}", ckpt.seed),
        format!("config_hash = {}", config.hash()),
        format!("test_set = {}", DatasetCatalog::fingerprint(&refs)),
    ]);
    create_dir(&a.out.out)?;
    let text = render_text(&rows);
    write_file(&a.out.out.join("metrics.csv"), &format!("{header}{}", render_csv(&rows)))?;
    write_file(&a.out.out.join("metrics.txt"), &format!("{header}{text}"))?;
    print!("{text}");
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CmdResult {
    let opts = GradCheckOptions {
        eps: a.eps,
        seed: a.seed,
        tolerance: a.tolerance,
        fault: a.inject_fault.map(|FaultArg::Conv| Fault::ConvSignFlip),
    };
    let report = gradcheck::run(&opts)?;
    print!("{}", report.render());
    if report.passed() {
        Ok(())
    } else {
        Err(Failure::Gradcheck(report.failures().map(|c| c.name).collect()))
    }
}

fn cmd_compare(a: CompareArgs, exec: &Executor) -> CmdResult {
    let sgd = a.sgd.config();
    sgd.validate()?;
    let train_refs = DatasetCatalog::read(&a.train)?;
    let test_refs = DatasetCatalog::read(&a.test)?;
    let fingerprint = split_fingerprint(train_refs.entries(), test_refs.entries());

    let mut rows = Vec::new();
    let mut lines = vec![format!("seed = {}", sgd.seed), format!("split = {fingerprint}")];
    let mut counts = Vec::new();
    for spec in [&a.cnn, &a.fcn] {
        let config = resolve_model(spec, &a.input)?;
        let name = flavor_name(&config);
        let data: Vec<Example> = load_samples(train_refs.entries(), config.input, exec)?
            .iter()
            .map(SignatureImage::to_example)
            .collect();
        let test = load_samples(test_refs.entries(), config.input, exec)?;
        let mut net = init_network(&config, sgd.seed)?;
        log::info!("training {name} ({} parameters)", net.param_count());
        train(&mut net, &data, &sgd, exec)?;
        let evaluation = evaluate(&net, &test, exec)?;
        rows.push(MetricsRow::from_evaluation(name, &evaluation)?);
        counts.push((name, net.param_count()));
        lines.push(format!("{name} config_hash = {}", config.hash()));
    }
    for (name, n) in &counts {
        lines.push(format!("{name} parameters = {n}"));
    }
    let (cnn_acc, fcn_acc) = (rows[0].accuracy.unwrap_or(f64::NAN), rows[1].accuracy.unwrap_or(f64::NAN));
    let ordering = if fcn_acc > cnn_acc {
        "FCN accuracy above CNN"
    } else if fcn_acc < cnn_acc {
        "FCN accuracy below CNN"
    } else {
        "FCN and CNN accuracy equal"
    };
    lines.push(format!("ordering (informational) = {ordering}"));
    if a.with_paper_reference {
        rows.extend(paper_reference_rows());
    }

    let header = metrics_header(&lines);
    let text = render_text(&rows);
    create_dir(&a.out.out)?;
    write_file(&a.out.out.join("compare.csv"), &format!("{header}{}", render_csv(&rows)))?;
    write_file(&a.out.out.join("compare.txt"), &format!("{header}{text}"))?;
    print!("{header}{text}");
    Ok(())
}
