//! `qmri`: command-line driver for the reconstruction toolkit.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 usage or invalid argument,
//! 3 malformed file, 4 numeric failure (NaN loss or output).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qmri_core::formats::{
    parse_key_values, write_atomic, write_pgm, Checkpoint, KeyValues, TensorFile,
};
use qmri_core::mri::{default_center_fraction, make_cartesian_mask, KSpaceVolume, PhantomSpec};
use qmri_core::nn::FrontEndKind;
use qmri_core::pipeline::{
    self, compare, evaluate, from_checkpoint, loss_history_csv, pad_kspace, predict,
    prepare_dataset, prepare_pairs, read_prepared, to_checkpoint, train_with_progress,
    write_phantom_slices, write_prepared, Split, TrainConfig, CONFIG_KEYS,
    TOOL_VERSION,
};
use qmri_core::qsim::CircuitConfig;
use qmri_core::quanv::quanvolve;
use qmri_core::Error;

/// Relative output directories are resolved under this directory when set.
const OUTPUT_ROOT_ENV: &str = "QMRI_OUTPUT_ROOT";

#[derive(Parser)]
#[command(name = "qmri", version, about = "Hybrid quanvolution + U-net MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a random Cartesian line mask.
    MaskGen(MaskGenArgs),
    /// Apply the quanvolution layer to a 2-D image file.
    Quanvolve(QuanvolveArgs),
    /// Write synthetic multicoil phantom slices.
    Phantom(PhantomArgs),
    /// Build and store one split of the dataset described by a config.
    Prepare(PrepareArgs),
    /// Train a network and evaluate it on the test split.
    Train(RunArgs),
    /// Evaluate a checkpoint.
    Eval(EvalArgs),
    /// Reconstruct one multicoil k-space slice.
    Reconstruct(ReconstructArgs),
    /// Train and compare both front ends at every configured acceleration.
    Compare(RunArgs),
}

#[derive(Args)]
struct MaskGenArgs {
    #[arg(long)]
    height: usize,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    accel: f64,
    /// Fraction of fully sampled center lines; defaults by acceleration.
    #[arg(long)]
    center_frac: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Mask tensor file; the line summary goes to `<out>.txt`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QuanvolveArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "mean-z")]
    readout: String,
    #[arg(long, default_value = "chain")]
    topology: String,
    #[arg(long, default_value_t = 1.0)]
    angle_scale: f64,
}

#[derive(Args)]
struct PhantomArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 4)]
    coils: usize,
    #[arg(long, default_value_t = 6)]
    ellipses: usize,
    #[arg(long, default_value_t = 8)]
    slices: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Write into a non-empty directory.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, as `key=value`; may repeat.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, overriding `out_dir`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seed for every stochastic step, overriding `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct PrepareArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long, default_value = "test")]
    split: String,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Prepared dataset directory; defaults to regenerating the test split.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Metrics CSV; defaults to `eval_metrics.csv` beside the checkpoint.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Fully sampled multicoil k-space, complex `[coils, H, W]`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Reconstructed magnitude image in the input's intensity scale.
    #[arg(long)]
    out: PathBuf,
    /// Also write an 8-bit PGM preview.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidArgument(_) | Error::DegenerateInput(_) | Error::State(_) => 2,
            Error::Format(_) => 3,
            Error::Numeric(_) => 4,
            Error::Io(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult = Result<(), Failure>;

fn output_path(path: PathBuf) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if path.is_relative() => Path::new(&root).join(path),
        _ => path,
    }
}

fn load_config(args: &ConfigArgs) -> Result<TrainConfig, Failure> {
    let text = match &args.config {
        Some(path) => fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut kv = parse_key_values(&text, CONFIG_KEYS)?;
    for item in &args.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects key=value, got {item:?}")))?;
        let key = key.trim();
        if !CONFIG_KEYS.contains(&key) {
            return Err(usage(format!("unknown config key {key:?}")));
        }
        kv.insert(key, value.trim());
    }
    if let Some(dir) = &args.out_dir {
        kv.insert("out_dir", dir.display().to_string());
    }
    if let Some(seed) = args.seed {
        kv.insert("seed", seed.to_string());
    }
    let mut config = TrainConfig::from_key_values(&kv)?;
    config.out_dir = output_path(config.out_dir);
    Ok(config)
}

fn write_run_metadata(dir: &Path, resolved: &str) -> CliResult {
    fs::create_dir_all(dir)?;
    write_atomic(&dir.join("resolved.cfg"), resolved.as_bytes())?;
    write_atomic(&dir.join("VERSION"), format!("{TOOL_VERSION}\n").as_bytes())?;
    Ok(())
}

fn cmd_mask_gen(a: MaskGenArgs) -> CliResult {
    let cf = a.center_frac.unwrap_or_else(|| default_center_fraction(a.accel));
    let mask = make_cartesian_mask(a.height, a.width, a.accel, cf, a.seed)?;
    let out = output_path(a.out);
    if let Some(parent) = out.parent() {
        fs::create_dir_all(parent)?;
    }
    TensorFile::from_image(&mask.to_image()).write(&out)?;
    let summary = format!(
        "height = {}\nwidth = {}\naccel = {}\ncenter_frac = {cf}\nseed = {}\nselected = {}\nlines = {}\n",
        a.height,
        a.width,
        a.accel,
        a.seed,
        mask.selected_count(),
        mask.line_summary()
    );
    let mut txt = out.clone().into_os_string();
    txt.push(".txt");
    write_atomic(Path::new(&txt), summary.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn cmd_quanvolve(a: QuanvolveArgs) -> CliResult {
    let circuit = CircuitConfig {
        readout: pipeline::parse_readout(&a.readout)?,
        entanglement: pipeline::parse_topology(&a.topology)?,
        angle_scale: a.angle_scale,
    };
    let image = TensorFile::read(&a.input)?.to_image()?;
    let fm = quanvolve(&image, &circuit)?;
    let dims = vec![fm.channels(), fm.height(), fm.width()];
    let file = TensorFile::new(dims, qmri_core::formats::TensorData::F64(fm.into_data()))?;
    file.write(&output_path(a.out))?;
    Ok(())
}

fn cmd_phantom(a: PhantomArgs) -> CliResult {
    let dir = output_path(a.out_dir);
    if dir.exists() && fs::read_dir(&dir)?.next().is_some() && !a.force {
        return Err(usage(format!(
            "{} is not empty; pass --force to write into it",
            dir.display()
        )));
    }
    let phantoms = pipeline::slice_seeds(a.seed, a.slices)
        .into_iter()
        .map(|seed| {
            qmri_core::mri::phantom_generate(&PhantomSpec {
                height: a.height,
                width: a.width,
                coils: a.coils,
                ellipses: a.ellipses,
                seed,
            })
        })
        .collect::<qmri_core::Result<Vec<_>>>()?;
    write_phantom_slices(&dir, &phantoms)?;
    let mut kv = KeyValues::default();
    for (k, v) in [
        ("height", a.height),
        ("width", a.width),
        ("coils", a.coils),
        ("ellipses", a.ellipses),
        ("slices", a.slices),
    ] {
        kv.insert(k, v.to_string());
    }
    kv.insert("seed", a.seed.to_string());
    write_run_metadata(&dir, &kv.render())?;
    eprintln!("wrote {} slices to {}", a.slices, dir.display());
    Ok(())
}

fn parse_split(name: &str) -> Result<Split, Failure> {
    match name {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(usage(format!("split must be train or test, got {other:?}"))),
    }
}

fn cmd_prepare(a: PrepareArgs) -> CliResult {
    let split = parse_split(&a.split)?;
    let config = TrainConfig { precompute_quanv: false, ..load_config(&a.config)? };
    let data = prepare_dataset(&config, split)?;
    write_prepared(&config.out_dir, &data, &config.protocol_hash())?;
    write_run_metadata(&config.out_dir, &config.resolved_text())?;
    eprintln!("wrote {} {} pairs to {}", data.len(), split.name(), config.out_dir.display());
    Ok(())
}

fn cmd_train(a: RunArgs) -> CliResult {
    let config = load_config(&a.config)?;
    let out = config.out_dir.clone();
    write_run_metadata(&out, &config.resolved_text())?;
    let train_data = prepare_dataset(&config, Split::Train)?;
    let mut outcome = train_with_progress(&config, &train_data, |epoch, loss| {
        eprintln!("epoch {:>4}  loss {loss:.6e}", epoch + 1);
    })?;
    write_atomic(&out.join("loss_history.csv"), loss_history_csv(&outcome.history).as_bytes())?;
    to_checkpoint(&config, &mut outcome.network, &outcome.optimizer)
        .write(&out.join("checkpoint.qmrc"))?;

    let test_data = prepare_dataset(&config, Split::Test)?;
    write_prepared(&out.join("test_data"), &test_data, &config.protocol_hash())?;
    let report = evaluate(
        &mut outcome.network,
        &test_data,
        pipeline::front_end_name(config.front_end),
        config.acceleration,
    )?;
    write_atomic(&out.join("metrics.csv"), report.to_csv().as_bytes())?;
    println!(
        "test PSNR {:.4} dB  SSIM {:.4}  (zero-filled {:.4} dB, {:.4})",
        report.mean.psnr, report.mean.ssim, report.zero_filled_mean.psnr, report.zero_filled_mean.ssim
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult {
    let ckpt = Checkpoint::read(&a.checkpoint)?;
    let (mut config, mut network, _) = from_checkpoint(&ckpt)?;
    let mut data = match &a.data {
        Some(dir) => {
            let (data, hash) = read_prepared(dir)?;
            if hash != ckpt.protocol_hash {
                return Err(usage(format!(
                    "refusing to evaluate: data protocol hash {hash} does not match checkpoint {}",
                    ckpt.protocol_hash
                )));
            }
            data
        }
        None => {
            config.out_dir = a.checkpoint.parent().map(Path::to_path_buf).unwrap_or_default();
            prepare_dataset(&TrainConfig { precompute_quanv: false, ..config.clone() }, Split::Test)?
        }
    };
    data.features = None;
    let report = evaluate(
        &mut network,
        &data,
        pipeline::front_end_name(config.front_end),
        config.acceleration,
    )?;
    let out = match a.out {
        Some(p) => output_path(p),
        None => a.checkpoint.with_file_name("eval_metrics.csv"),
    };
    write_atomic(&out, report.to_csv().as_bytes())?;
    println!(
        "PSNR {:.4} dB  SSIM {:.4}  MSE {:.6e}  (zero-filled {:.4} dB, {:.4})",
        report.mean.psnr,
        report.mean.ssim,
        report.mean.mse,
        report.zero_filled_mean.psnr,
        report.zero_filled_mean.ssim
    );
    Ok(())
}

fn cmd_reconstruct(a: ReconstructArgs) -> CliResult {
    let ckpt = Checkpoint::read(&a.checkpoint)?;
    let (config, mut network, _) = from_checkpoint(&ckpt)?;
    let coils = TensorFile::read(&a.input)?.to_complex_images()?;
    let kspace = KSpaceVolume::new(coils.iter().map(pad_kspace).collect())?;
    let data = prepare_pairs(&config, Split::Test, &[kspace])?;
    let prediction = predict(&mut network, &data)?.remove(0);
    let image = prediction.scaled(data.pairs[0].scale);
    TensorFile::from_image(&image).write(&output_path(a.out))?;
    if let Some(p) = a.pgm {
        write_pgm(&image, &output_path(p))?;
    }
    Ok(())
}

fn cmd_compare(a: RunArgs) -> CliResult {
    let config = load_config(&a.config)?;
    if config.front_end != FrontEndKind::Quantum {
        eprintln!("note: compare trains both front ends; front_end is ignored");
    }
    let report = compare(&config, |line| eprintln!("{line}"))?;
    print!("{}", report.table1_csv());
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::MaskGen(a) => cmd_mask_gen(a),
        Command::Quanvolve(a) => cmd_quanvolve(a),
        Command::Phantom(a) => cmd_phantom(a),
        Command::Prepare(a) => cmd_prepare(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Reconstruct(a) => cmd_reconstruct(a),
        Command::Compare(a) => cmd_compare(a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
