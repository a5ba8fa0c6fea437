//! Command-line driver: build operator pools, train, reweight stored runs
//! into pre-training data, sample circuits from checkpoints, and evaluate
//! energies against exact diagonalization.
//!
//! Exit codes: 0 success, 1 validation error (bad arguments, unreadable or
//! malformed inputs), 2 runtime failure.

mod manifest;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gqe_core::eigen::exact_ground_energy;
use gqe_core::exec::ExecMode;
use gqe_core::model::{load_checkpoint, save_checkpoint};
use gqe_core::pauli::{parse_hamiltonian, Hamiltonian};
use gqe_core::pool::{build_pool, default_angle_set, load_pool, serialize_pool, OperatorPool};
use gqe_core::reweight::{
    build_pretrain_dataset, read_record_file, write_record_line, CacheRecord, MixSchedule,
};
use gqe_core::rng;
use gqe_core::sampler::{evaluate_batch, generate_batch, RecordOrigin, TokenSequence};
use gqe_core::statevector::hartree_fock_state;
use gqe_core::trainer::{EpochReport, LossKind, PretrainSource, TrainConfig, Trainer};

use manifest::{ManifestOutputs, RunManifest};

const CHEMICAL_ACCURACY: f64 = 0.0016;

#[derive(Parser)]
#[command(name = "gqe", version, about = "Generative quantum eigensolver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Grpo,
    LogitMatching,
}

impl From<LossArg> for LossKind {
    fn from(v: LossArg) -> LossKind {
        match v {
            LossArg::Grpo => LossKind::Grpo,
            LossArg::LogitMatching => LossKind::LogitMatching,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ExecArg {
    Auto,
    Sequential,
    Parallel,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or validate) an operator pool file
    Pool(PoolArgs),
    /// Train the model on a Hamiltonian; writes a CSV trace, checkpoints,
    /// a cache-record file, and a run manifest
    Train(TrainArgs),
    /// Reweight a cache-record file to a new Hamiltonian and keep the
    /// lowest-energy fraction as a pre-training dataset
    Reweight(ReweightArgs),
    /// Sample circuits from a checkpoint and emit them as JSON lines
    Sample(SampleArgs),
    /// Report best energy, exact ground energy, and the chemical-accuracy
    /// verdict for a checkpoint or a sequence file
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PoolArgs {
    /// Spin-orbital (qubit) count
    #[arg(long)]
    qubits: Option<usize>,
    /// Electron count
    #[arg(long)]
    electrons: Option<usize>,
    /// Largest k in the angle set {±2^k/320}
    #[arg(long, default_value_t = 5)]
    k_max: u32,
    /// Validate and canonicalize an existing pool file instead of building
    #[arg(long, conflicts_with_all = ["qubits", "electrons"])]
    custom: Option<PathBuf>,
    /// Output pool file
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    hamiltonian: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    /// JSON file mirroring the training configuration fields
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    loss: Option<LossArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Electron count; defaults to the Hamiltonian `electrons` header
    #[arg(long)]
    electrons: Option<usize>,
    /// Cache-record file to reweight into pre-training data
    #[arg(long)]
    pretrain: Option<PathBuf>,
    /// Fraction of lowest-energy records kept from the pre-training source
    #[arg(long, default_value_t = 0.10)]
    pretrain_top_frac: f64,
    #[arg(long, value_enum, default_value_t = ExecArg::Auto)]
    exec: ExecArg,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ReweightArgs {
    /// Cache-record JSON-lines file from a previous run
    #[arg(long)]
    records: PathBuf,
    /// Target Hamiltonian file
    #[arg(long)]
    hamiltonian: PathBuf,
    /// Keep this fraction of the lowest reweighted energies
    #[arg(long, default_value_t = 0.10)]
    top_frac: f64,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    hamiltonian: PathBuf,
    #[arg(long)]
    electrons: Option<usize>,
    #[arg(long, default_value_t = 50)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    /// Tokens per sequence; defaults to the checkpoint position capacity − 1
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON-lines file; stdout when absent
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    hamiltonian: PathBuf,
    #[arg(long)]
    pool: PathBuf,
    #[arg(long)]
    electrons: Option<usize>,
    /// JSON-lines file of sequences (objects with a `sequence` field)
    #[arg(long, conflicts_with = "checkpoint")]
    sequences: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long)]
    seq_len: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

enum CliError {
    Validation(anyhow::Error),
    Runtime(anyhow::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            CliError::Validation(e) | CliError::Runtime(e) => e,
        }
    }
}

fn validation<T>(r: Result<T>) -> std::result::Result<T, CliError> {
    r.map_err(CliError::Validation)
}

fn runtime<T>(r: Result<T>) -> std::result::Result<T, CliError> {
    r.map_err(CliError::Runtime)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are successes, everything else is a
            // validation failure
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Pool(args) => cmd_pool(args),
        Command::Train(args) => cmd_train(args),
        Command::Reweight(args) => cmd_reweight(args),
        Command::Sample(args) => cmd_sample(args),
        Command::Evaluate(args) => cmd_evaluate(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {:#}", e.error());
            ExitCode::from(e.code())
        }
    }
}

fn read_hamiltonian(path: &Path) -> Result<Hamiltonian> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_hamiltonian(&text).with_context(|| format!("parsing {}", path.display()))
}

fn read_pool(path: &Path) -> Result<OperatorPool> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    load_pool(&text).with_context(|| format!("parsing {}", path.display()))
}

fn electrons_for(h: &Hamiltonian, flag: Option<usize>) -> Result<usize> {
    if let Some(n) = flag {
        return Ok(n);
    }
    h.header("electrons")
        .ok_or_else(|| anyhow!("no --electrons flag and no `# electrons:` header"))?
        .parse()
        .map_err(|_| anyhow!("invalid `# electrons:` header"))
}

fn exec_mode(arg: ExecArg) -> ExecMode {
    match arg {
        ExecArg::Auto => ExecMode::auto(),
        ExecArg::Sequential => ExecMode::Sequential,
        ExecArg::Parallel => ExecMode::Parallel,
    }
}

fn cmd_pool(args: PoolArgs) -> std::result::Result<(), CliError> {
    let pool = if let Some(custom) = &args.custom {
        validation(read_pool(custom))?
    } else {
        let (qubits, electrons) = match (args.qubits, args.electrons) {
            (Some(q), Some(e)) => (q, e),
            _ => {
                return Err(CliError::Validation(anyhow!(
                    "either --custom or both --qubits and --electrons are required"
                )))
            }
        };
        let angles = default_angle_set(args.k_max);
        validation(build_pool(qubits, electrons, &angles).map_err(anyhow::Error::from))?
    };
    if pool.len() == 1 {
        eprintln!("warning: empty generator set, pool holds only the identity token");
    }
    runtime(std::fs::write(&args.out, serialize_pool(&pool)).map_err(anyhow::Error::from))?;
    let n_angles = if args.custom.is_some() {
        0
    } else {
        default_angle_set(args.k_max).len()
    };
    let n_generators = (pool.len() - 1).checked_div(n_angles).unwrap_or(0);
    println!("pool_size: {}", pool.len());
    if args.custom.is_none() {
        println!("n_generators: {n_generators}");
        println!("n_angles: {n_angles}");
    }
    println!("written: {}", args.out.display());
    Ok(())
}

fn load_train_config(args: &TrainArgs) -> Result<TrainConfig> {
    let mut config: TrainConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    if let Some(loss) = args.loss {
        config.loss = loss.into();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(epochs) = args.epochs {
        config.n_epochs = epochs;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(args: TrainArgs) -> std::result::Result<(), CliError> {
    let config = validation(load_train_config(&args))?;
    let hamiltonian = validation(read_hamiltonian(&args.hamiltonian))?;
    let pool = validation(read_pool(&args.pool))?;
    let electrons = validation(electrons_for(&hamiltonian, args.electrons))?;
    let init = validation(
        hartree_fock_state(hamiltonian.n_qubits(), electrons).map_err(anyhow::Error::from),
    )?;
    if !(0.0 < args.pretrain_top_frac && args.pretrain_top_frac <= 1.0) {
        return Err(CliError::Validation(anyhow!(
            "--pretrain-top-frac must lie in (0, 1]"
        )));
    }

    let pretrain = match &args.pretrain {
        Some(path) => {
            let records = validation(read_record_file(path).map_err(anyhow::Error::from))?;
            let source_geometry = records.iter().find_map(|r| r.geometry.clone());
            let source: Vec<_> = records
                .into_iter()
                .map(|r| r.into_record(RecordOrigin::Preconstructed))
                .collect();
            let dataset = validation(
                build_pretrain_dataset(
                    &source,
                    &hamiltonian,
                    args.pretrain_top_frac,
                    source_geometry,
                )
                .map_err(anyhow::Error::from),
            )?;
            Some(PretrainSource {
                dataset,
                schedule: MixSchedule {
                    initial_fraction: config.pretrain_fraction,
                    decay_epochs: config.pretrain_decay_epochs,
                },
            })
        }
        None => None,
    };

    runtime(std::fs::create_dir_all(&args.out_dir).map_err(anyhow::Error::from))?;
    let outputs = ManifestOutputs {
        trace_csv: args.out_dir.join("trace.csv"),
        records: args.out_dir.join("records.jsonl"),
        final_checkpoint: args.out_dir.join("checkpoint_final.json"),
    };
    let manifest_path = args.out_dir.join("manifest.json");
    let mut run_manifest = runtime(RunManifest::start(
        config.seed,
        config.clone(),
        &args.hamiltonian,
        &args.pool,
        args.pretrain.as_deref(),
        outputs.clone(),
    ))?;
    runtime(run_manifest.write_atomic(&manifest_path))?;

    let n_epochs = config.n_epochs;
    let checkpoint_every = config.checkpoint_every;
    let geometry = hamiltonian.geometry_label().map(str::to_string);
    let mut trainer = validation(
        Trainer::new(config, pool, hamiltonian, init, pretrain).map_err(anyhow::Error::from),
    )?;
    trainer.exec_mode(exec_mode(args.exec));

    let mut run = || -> Result<()> {
        let mut csv = BufWriter::new(File::create(&outputs.trace_csv)?);
        writeln!(csv, "{}", EpochReport::CSV_HEADER)?;
        let mut records_out = BufWriter::new(File::create(&outputs.records)?);
        trainer.warmup()?;
        for rec in trainer.drain_new_records() {
            write_record_line(
                &mut records_out,
                &CacheRecord::from_record(&rec, geometry.as_deref()),
            )?;
        }
        for epoch in 1..=n_epochs {
            let report = trainer.train_epoch()?;
            writeln!(csv, "{}", report.csv_row())?;
            for rec in trainer.drain_new_records() {
                write_record_line(
                    &mut records_out,
                    &CacheRecord::from_record(&rec, geometry.as_deref()),
                )?;
            }
            if checkpoint_every > 0 && epoch % checkpoint_every == 0 {
                save_checkpoint(
                    &trainer.params,
                    args.out_dir.join(format!("checkpoint_epoch_{epoch}.json")),
                )?;
            }
        }
        save_checkpoint(&trainer.params, &outputs.final_checkpoint)?;
        csv.flush()?;
        records_out.flush()?;
        Ok(())
    };
    runtime(run())?;
    runtime(run_manifest.finalize(&manifest_path))?;

    if let Some((best, _)) = trainer.best() {
        println!("best_energy: {best}");
    }
    println!("epochs: {n_epochs}");
    println!("energy_evaluations: {}", trainer.n_energy_evals);
    println!("out_dir: {}", args.out_dir.display());
    Ok(())
}

fn cmd_reweight(args: ReweightArgs) -> std::result::Result<(), CliError> {
    let hamiltonian = validation(read_hamiltonian(&args.hamiltonian))?;
    let records = validation(read_record_file(&args.records).map_err(anyhow::Error::from))?;
    if records.is_empty() {
        return Err(CliError::Validation(anyhow!(
            "{} holds no records",
            args.records.display()
        )));
    }
    let source_geometry = records.iter().find_map(|r| r.geometry.clone());
    let source: Vec<_> = records
        .into_iter()
        .map(|r| r.into_record(RecordOrigin::Preconstructed))
        .collect();
    let dataset = runtime(
        build_pretrain_dataset(&source, &hamiltonian, args.top_frac, source_geometry)
            .map_err(anyhow::Error::from),
    )?;
    let write = || -> Result<()> {
        let mut out = BufWriter::new(File::create(&args.out)?);
        let target = hamiltonian.geometry_label();
        for rec in dataset.records() {
            write_record_line(&mut out, &CacheRecord::from_record(rec, target))?;
        }
        out.flush()?;
        Ok(())
    };
    runtime(write())?;

    let energies = dataset.energies();
    let mean = energies.iter().sum::<f64>() / energies.len() as f64;
    let std = gqe_core::trainer::population_std(&energies);
    println!("count: {}", dataset.len());
    println!("min: {}", energies.first().copied().unwrap_or(f64::NAN));
    println!("mean: {mean}");
    println!("std: {std}");
    println!("written: {}", args.out.display());
    Ok(())
}

fn cmd_sample(args: SampleArgs) -> std::result::Result<(), CliError> {
    let params = validation(load_checkpoint(&args.checkpoint).map_err(anyhow::Error::from))?;
    let pool = validation(read_pool(&args.pool))?;
    let hamiltonian = validation(read_hamiltonian(&args.hamiltonian))?;
    let electrons = validation(electrons_for(&hamiltonian, args.electrons))?;
    let init = validation(
        hartree_fock_state(hamiltonian.n_qubits(), electrons).map_err(anyhow::Error::from),
    )?;
    let seq_len = args.seq_len.unwrap_or(params.config.max_positions - 1);
    let circuits = runtime(
        generate_batch(
            ExecMode::auto(),
            &params,
            seq_len,
            args.beta,
            args.seed,
            rng::purpose::EPOCH_SAMPLE,
            0,
            args.count,
        )
        .map_err(anyhow::Error::from),
    )?;
    let sequences: Vec<TokenSequence> = circuits.iter().map(|c| c.sequence.clone()).collect();
    let records = runtime(
        evaluate_batch(ExecMode::auto(), &sequences, &pool, &hamiltonian, &init)
            .map_err(anyhow::Error::from),
    )?;

    let emit = |out: &mut dyn Write| -> Result<()> {
        for (circuit, record) in circuits.iter().zip(&records) {
            let line = serde_json::json!({
                "sequence": circuit.sequence.tokens(),
                "w_sum": circuit.w_sum,
                "energy": record.energy,
            });
            writeln!(out, "{line}")?;
        }
        Ok(())
    };
    match &args.out {
        Some(path) => {
            let mut file =
                BufWriter::new(runtime(File::create(path).map_err(anyhow::Error::from))?);
            runtime(emit(&mut file))?;
            runtime(file.flush().map_err(anyhow::Error::from))?;
        }
        None => {
            let stdout = std::io::stdout();
            runtime(emit(&mut stdout.lock()))?;
        }
    }
    Ok(())
}

fn read_sequence_file(path: &Path) -> Result<Vec<TokenSequence>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("{}:{}", path.display(), i + 1))?;
        let seq = value
            .get("sequence")
            .ok_or_else(|| anyhow!("{}:{}: no `sequence` field", path.display(), i + 1))?;
        let tokens: Vec<usize> = serde_json::from_value(seq.clone())
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(TokenSequence(tokens));
    }
    if out.is_empty() {
        bail!("{} holds no sequences", path.display());
    }
    Ok(out)
}

fn cmd_evaluate(args: EvaluateArgs) -> std::result::Result<(), CliError> {
    let hamiltonian = validation(read_hamiltonian(&args.hamiltonian))?;
    let pool = validation(read_pool(&args.pool))?;
    let electrons = validation(electrons_for(&hamiltonian, args.electrons))?;
    let init = validation(
        hartree_fock_state(hamiltonian.n_qubits(), electrons).map_err(anyhow::Error::from),
    )?;

    let sequences: Vec<TokenSequence> = match (&args.sequences, &args.checkpoint) {
        (Some(path), None) => validation(read_sequence_file(path))?,
        (None, Some(ckpt)) => {
            let params = validation(load_checkpoint(ckpt).map_err(anyhow::Error::from))?;
            let seq_len = args.seq_len.unwrap_or(params.config.max_positions - 1);
            let circuits = runtime(
                generate_batch(
                    ExecMode::auto(),
                    &params,
                    seq_len,
                    args.beta,
                    args.seed,
                    rng::purpose::EPOCH_SAMPLE,
                    0,
                    args.count,
                )
                .map_err(anyhow::Error::from),
            )?;
            circuits.into_iter().map(|c| c.sequence).collect()
        }
        _ => {
            return Err(CliError::Validation(anyhow!(
                "exactly one of --sequences or --checkpoint is required"
            )))
        }
    };

    let records = runtime(
        evaluate_batch(ExecMode::auto(), &sequences, &pool, &hamiltonian, &init)
            .map_err(anyhow::Error::from),
    )?;
    let best = records
        .iter()
        .map(|r| r.energy)
        .fold(f64::INFINITY, f64::min);
    let exact = runtime(exact_ground_energy(&hamiltonian).map_err(anyhow::Error::from))?;
    let error = (best - exact).abs();
    println!("best_energy: {best}");
    println!("exact_ground_energy: {exact}");
    println!("absolute_error: {error}");
    println!(
        "verdict: {} chemical accuracy (threshold {CHEMICAL_ACCURACY} Ha)",
        if error <= CHEMICAL_ACCURACY {
            "within"
        } else {
            "outside"
        }
    );
    Ok(())
}
