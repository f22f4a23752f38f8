//! `qunet`: train and evaluate U-Net / Qu-Net models, run the gradient
//! checks, print parameter accounting and simulate QuFeX circuits.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use qunet::data::{load_dataset, make_partitions, resize_sample, synth_dataset, Sample};
use qunet::harness::{gradcheck, run_protocol, train, write_runs_csv, ProtocolConfig, TrainConfig, RUNS_FILE};
use qunet::models::{build_model, reconcile, save_checkpoint, table_targets, ArchOptions, ModelConfig, Scale, Variant};
use qunet::qsim::run_circuit;
use qunet::qufex::{build_template_with, EncodingBasis};

#[derive(Parser)]
#[command(name = "qunet", version, about = "U-Net and Qu-Net segmentation with simulated QuFeX layers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on one train/test split.
    Train(RunArgs),
    /// Train a fresh model on each of several random splits and summarize.
    Protocol {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        partitions: Option<usize>,
    },
    /// Run every finite-difference gradient check.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Reconcile built parameter counts with the published table.
    Params {
        #[arg(long)]
        json: bool,
    },
    /// Run a QuFeX circuit template and print <Z> per qubit.
    Simulate {
        /// qufex-<qubits>-<layer>, e.g. qufex-4-1 or qufex-8-2.
        template: String,
        /// Four comma-separated angles.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<f64>,
        /// One feature value per qubit, encoded as the angle pi * v.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        inputs: Vec<f64>,
        /// Close the second layer's X-basis encoding with a Hadamard.
        #[arg(long)]
        closing_h: bool,
    },
}

#[derive(Args, Clone, Default)]
struct RunArgs {
    /// TOML file with any of the settings below; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    scale: Option<Scale>,
    /// Side length images are resized to (a multiple of 32).
    #[arg(long)]
    size: Option<usize>,
    /// Directory holding `images/` and `masks/`.
    #[arg(long, conflicts_with_all = ["images", "masks", "synthetic"])]
    data_dir: Option<PathBuf>,
    #[arg(long, requires = "masks", conflicts_with = "synthetic")]
    images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    masks: Option<PathBuf>,
    /// Use N generated images instead of files.
    #[arg(long, value_name = "N")]
    synthetic: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Base seed: split k and its model use seed + k.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// The config file: model fields mirror `ModelConfig`, plus run settings.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    variant: Option<Variant>,
    scale: Option<Scale>,
    input_size: Option<usize>,
    arch: Option<ArchOptions>,
    data_dir: Option<PathBuf>,
    images: Option<PathBuf>,
    masks: Option<PathBuf>,
    synthetic: Option<usize>,
    epochs: Option<usize>,
    batch_size: Option<usize>,
    lr: Option<f64>,
    seed: Option<u64>,
    partitions: Option<usize>,
    train_fraction: Option<f64>,
    out: Option<PathBuf>,
}

enum Source {
    Files { images: PathBuf, masks: PathBuf },
    Synthetic(usize),
}

struct Resolved {
    protocol: ProtocolConfig,
    source: Source,
    out: PathBuf,
}

fn resolve(args: &RunArgs, partitions: Option<usize>) -> Result<Resolved> {
    let file: FileConfig = match &args.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => FileConfig::default(),
    };
    let variant = args.variant.or(file.variant).unwrap_or(Variant::Unet);
    let scale = args.scale.or(file.scale).unwrap_or(Scale::Tiny);
    let mut model = ModelConfig::new(variant, scale)
        .with_input_size(args.size.or(file.input_size).unwrap_or(ModelConfig::DEFAULT_INPUT_SIZE));
    if let Some(arch) = file.arch {
        model = model.with_arch(arch);
    }
    model.validate()?;

    let defaults = TrainConfig::default();
    let mut protocol = ProtocolConfig::new(model);
    protocol.train = TrainConfig {
        epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        batch_size: args.batch_size.or(file.batch_size).unwrap_or(defaults.batch_size),
        lr: args.lr.or(file.lr).unwrap_or(defaults.lr),
    };
    protocol.base_seed = args.seed.or(file.seed).unwrap_or(0);
    protocol.partitions = partitions.or(file.partitions).unwrap_or(protocol.partitions);
    protocol.train_fraction = args.train_fraction.or(file.train_fraction).unwrap_or(protocol.train_fraction);

    // Flags pick the data source first; the file is consulted only if no flag names one.
    let flag_source = args.data_dir.is_some() || args.images.is_some() || args.synthetic.is_some();
    let (data_dir, images, masks, synthetic) = if flag_source {
        (args.data_dir.clone(), args.images.clone(), args.masks.clone(), args.synthetic)
    } else {
        (file.data_dir, file.images, file.masks, file.synthetic)
    };
    let source = match (data_dir, images, masks, synthetic) {
        (Some(d), None, None, None) => Source::Files { images: d.join("images"), masks: d.join("masks") },
        (None, Some(images), Some(masks), None) => Source::Files { images, masks },
        (None, None, None, Some(n)) => Source::Synthetic(n),
        (None, None, None, None) => bail!("no data: pass --data-dir, --images/--masks or --synthetic N"),
        _ => bail!("choose exactly one data source"),
    };
    let out = args.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("qunet-out"));
    Ok(Resolved { protocol, source, out })
}

fn load(source: &Source, size: usize, seed: u64) -> Result<Vec<Sample>> {
    match source {
        Source::Synthetic(n) => Ok(synth_dataset(*n, size, seed)?),
        Source::Files { images, masks } => {
            let raw = load_dataset(images, masks)?;
            log::info!("loaded {} image/mask pairs", raw.len());
            Ok(raw.iter().map(|s| resize_sample(s, size)).collect::<qunet::Result<_>>()?)
        }
    }
}

fn checkpoint_stem(out: &Path, tag: &str, seed: u64) -> PathBuf {
    out.join("checkpoints").join(format!("{tag}-seed{seed}"))
}

fn cmd_train(args: &RunArgs) -> Result<()> {
    let r = resolve(args, Some(1))?;
    let cfg = &r.protocol;
    let data = load(&r.source, cfg.model.input_size, cfg.base_seed)?;
    let ids: Vec<String> = data.iter().map(|s| s.id.clone()).collect();
    let partition = make_partitions(&ids, 1, cfg.train_fraction, cfg.base_seed)?.remove(0);
    let mut model = build_model(&cfg.model, partition.seed)?;
    let count = model.count_params();
    println!("{}: {} classical + {} quantum parameters", cfg.model.tag(), count.classical, count.quantum);

    let run = train(&mut model, &partition, &data, &cfg.train)?;
    std::fs::create_dir_all(r.out.join("checkpoints"))?;
    write_runs_csv(&r.out.join(RUNS_FILE), std::slice::from_ref(&run))?;
    let stem = checkpoint_stem(&r.out, &cfg.model.tag(), partition.seed);
    save_checkpoint(&model, &stem)?;
    for (i, l) in run.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}  loss {l:.5}", i + 1);
    }
    println!("test IoU {:.4} ({} test images)", run.test_iou, partition.test_ids.len());
    println!("wrote {} and {}.{{json,bin}}", r.out.join(RUNS_FILE).display(), stem.display());
    Ok(())
}

fn cmd_protocol(args: &RunArgs, partitions: Option<usize>) -> Result<()> {
    let r = resolve(args, partitions)?;
    let cfg = &r.protocol;
    // The synthetic set is drawn once, from the base seed, and shared by all splits.
    let data = load(&r.source, cfg.model.input_size, cfg.base_seed)?;
    let outcome = run_protocol(cfg, &data, Some(&r.out))?;
    for run in &outcome.runs {
        println!("seed {:>3}  IoU {:.4}", run.partition_seed, run.test_iou);
    }
    let s = &outcome.stats;
    println!(
        "{}: mean {:.4}  Q3 {:.4}  median {:.4}  Q1 {:.4}  whiskers [{:.4}, {:.4}]  outliers {:?}",
        cfg.model.tag(),
        s.mean,
        s.lower_quartile,
        s.median,
        s.upper_quartile,
        s.lower_whisker,
        s.upper_whisker,
        s.outliers
    );
    println!("wrote {}", r.out.display());
    Ok(())
}

fn cmd_gradcheck(seed: u64) -> Result<()> {
    let reports = gradcheck::run_all(seed)?;
    for r in &reports {
        println!("{}", r.line());
    }
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed > 0 {
        bail!("{failed} of {} gradient checks failed", reports.len());
    }
    println!("all {} gradient checks passed", reports.len());
    Ok(())
}

fn cmd_params(json: bool) -> Result<()> {
    let recs = table_targets().iter().map(reconcile).collect::<qunet::Result<Vec<_>>>()?;
    if json {
        println!("{}", serde_json::to_string_pretty(&recs)?);
    } else {
        recs.iter().for_each(|r| print!("{}", r.render()));
    }
    Ok(())
}

fn parse_template(name: &str) -> Result<(usize, usize)> {
    let parts: Vec<&str> = name.split('-').collect();
    match parts[..] {
        ["qufex", n, layer] => Ok((n.parse()?, layer.parse()?)),
        _ => bail!("template names look like qufex-4-1 or qufex-8-2, got {name}"),
    }
}

fn cmd_simulate(template: &str, theta: &[f64], inputs: &[f64], closing_h: bool) -> Result<()> {
    let (n, layer) = parse_template(template)?;
    let basis = match (layer, closing_h) {
        (2, h) => EncodingBasis::X { closing_h: h },
        (_, true) => bail!("--closing-h only applies to layer 2"),
        (l, false) => EncodingBasis::for_layer(l),
    };
    let t = build_template_with(n, layer, basis)?;
    let theta = if theta.is_empty() { vec![0.0; 4] } else { theta.to_vec() };
    let inputs = if inputs.is_empty() { vec![0.0; n] } else { inputs.to_vec() };
    let angles: Vec<f64> = inputs.iter().map(|v| PI * v).collect();
    for (q, z) in run_circuit(&t, &theta, &angles)?.iter().enumerate() {
        // Adding 0.0 turns -0.0 into 0.0 for printing.
        println!("<Z{q}> = {:.12}", z + 0.0);
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Train(args) => cmd_train(&args),
        Command::Protocol { run, partitions } => cmd_protocol(&run, partitions),
        Command::Gradcheck { seed } => cmd_gradcheck(seed),
        Command::Params { json } => cmd_params(json),
        Command::Simulate { template, theta, inputs, closing_h } => cmd_simulate(&template, &theta, &inputs, closing_h),
    }
}
