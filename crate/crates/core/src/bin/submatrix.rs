use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use submatrix::error::{Error, Result};
use submatrix::experiment::{self, AlgoSettings, Algorithm, ExperimentConfig, Mode, Units};
use submatrix::model::{generate_instance, random_signal, NoiseSpec, Observation};
use submatrix::rng::derive_seed;
use submatrix::search;

#[derive(Parser)]
#[command(
    name = "submatrix",
    version,
    about = "Planted submatrix localization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one instance: matrix CSV plus a `.signal.json` sidecar.
    Gen(Common),
    /// Localize a matrix CSV and print the result as JSON.
    Localize {
        /// Matrix CSV to read.
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Success rates over a lambda grid.
    Sweep(Common),
    /// Success rates over an (alpha, beta) grid.
    Phase(Common),
    /// Clique-to-submatrix reduction trials.
    Reduce(Common),
}

#[derive(Args)]
struct Common {
    /// Full experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Units of the lambda grid: absolute or snrc.
    #[arg(long)]
    units: Option<Units>,
}

impl Common {
    fn load(&self, mode: Mode) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => ExperimentConfig::default(),
        };
        cfg.mode = mode;
        if let Some(s) = self.seed {
            cfg.master_seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(a) = self.algo {
            cfg.algorithm = a;
        }
        if let Some(u) = self.units {
            cfg.units = u;
        }
        if self.out.is_some() {
            cfg.output = self.out.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// `dir/name.csv` -> `dir/name.<suffix>`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().unwrap_or_default().to_string_lossy();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn gen(cfg: &ExperimentConfig) -> Result<()> {
    let out = cfg
        .output
        .as_deref()
        .ok_or_else(|| Error::Validation("gen needs --out".into()))?;
    let lambda = *cfg
        .lambda_values()?
        .first()
        .ok_or_else(|| Error::Validation("gen needs one lambda value".into()))?;
    let noise = NoiseSpec::new(cfg.noise, cfg.sigma)?;
    let signal = random_signal(
        cfg.m,
        cfg.n,
        cfg.k_m,
        cfg.k_n,
        cfg.r,
        lambda,
        derive_seed(cfg.master_seed, &[0]),
    )?;
    let (x, truth) = generate_instance(&signal, &noise, derive_seed(cfg.master_seed, &[1]))?;
    let mut w = open_out(Some(out))?;
    x.write_csv(&mut w)?;
    w.flush()?;
    std::fs::write(sibling(out, "signal.json"), truth.to_json()?)?;
    Ok(())
}

fn localize(input: &Path, cfg: &ExperimentConfig) -> Result<()> {
    let x = Observation::read_csv(BufReader::new(File::open(input)?))?;
    let settings = AlgoSettings::from_config(cfg);
    let res = experiment::run_algorithm(
        &x,
        cfg.k_m,
        cfg.k_n,
        cfg.r,
        cfg.sigma,
        &settings,
        cfg.master_seed,
    )?;
    res.validate(x.m(), x.n())?;
    let mut w = open_out(cfg.output.as_deref())?;
    serde_json::to_writer_pretty(&mut w, &res)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn sweep(cfg: &ExperimentConfig) -> Result<()> {
    let out = experiment::run_sweep(cfg)?;
    let mut w = open_out(cfg.output.as_deref())?;
    experiment::write_records_csv(&mut w, &out.records, out.timing)?;
    w.flush()?;
    match cfg.output.as_deref() {
        Some(p) => {
            experiment::write_summary_csv(File::create(sibling(p, "summary.csv"))?, &out.summary)?
        }
        None => experiment::write_summary_csv(io::stderr().lock(), &out.summary)?,
    }
    if out.any_budget_refusal() {
        return Err(Error::BudgetExceeded {
            required: search::enumeration_count(cfg.m, cfg.n, cfg.k_m, cfg.k_n),
            budget: cfg.budget,
        });
    }
    Ok(())
}

fn phase(cfg: &ExperimentConfig) -> Result<()> {
    let cells = experiment::run_phase_diagram(cfg)?;
    let mut w = open_out(cfg.output.as_deref())?;
    experiment::write_phase_csv(&mut w, &cells)?;
    w.flush()?;
    Ok(())
}

fn reduce(cfg: &ExperimentConfig) -> Result<()> {
    let records = experiment::run_reduction(cfg)?;
    let mut w = open_out(cfg.output.as_deref())?;
    experiment::write_reduction_csv(&mut w, &records)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(c) => gen(&c.load(Mode::Gen)?),
        Command::Localize { input, common } => localize(&input, &common.load(Mode::Localize)?),
        Command::Sweep(c) => sweep(&c.load(Mode::Sweep)?),
        Command::Phase(c) => phase(&c.load(Mode::Phase)?),
        Command::Reduce(c) => reduce(&c.load(Mode::Reduce)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Validation(_) => 2,
                Error::BudgetExceeded { .. } => 3,
                _ => 1,
            })
        }
    }
}
