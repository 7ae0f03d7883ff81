//! `dyncover`: experiment runner for spectra, hitting times and covering estimates.

mod config;
mod decay;
mod output;
mod pipelines;
mod selftest;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand};

use config::{Event, ExperimentConfig, Kind};
use output::Manifest;
use pipelines::Context;

#[derive(Parser)]
#[command(name = "dyncover", version, about = "Thermodynamic spectra, hitting times and shrinking-target covers for the doubling map")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Pressure curve, entropy spectrum, extremes and predicted covering dimensions.
    Spectrum,
    /// Return times, or hitting times of targets drawn from `--target`.
    Hit,
    /// Hit and unhit cylinder counts with dimension slopes.
    Cover,
    /// Subword counts binned by local entropy.
    Census,
    /// Tree counts and the Cantor lower bound.
    Tree,
    /// Pressure, spectrum and emptiness predictions on a subshift of finite type.
    Sft,
    /// Uncovered dyadic cells of the circle.
    Circle,
    /// Frequencies of late hits, early hits or tree failures against n.
    Decay,
    /// Quick exact checks; exits 1 if one fails.
    Selftest,
}

impl Command {
    fn kind(self) -> Kind {
        match self {
            Command::Spectrum => Kind::Spectrum,
            Command::Hit => Kind::Hit,
            Command::Cover => Kind::Cover,
            Command::Census => Kind::Census,
            Command::Tree => Kind::Tree,
            Command::Sft => Kind::Sft,
            Command::Circle => Kind::Circle,
            Command::Decay => Kind::Decay,
            Command::Selftest => Kind::Selftest,
        }
    }
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct Flags {
    /// TOML experiment config, or a manifest.json from an earlier run.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Potential file or `builtin:<name>`.
    #[arg(long, global = true)]
    potential: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Potential for target sampling.
    #[arg(long, global = true)]
    target: Option<String>,
    /// Forbidden-word file, `builtin:golden-mean` or `builtin:full`.
    #[arg(long, global = true)]
    sft: Option<String>,
    #[arg(long, global = true, value_delimiter = ',')]
    kappa: Option<Vec<f64>>,
    /// Word lengths, as `4..12` or `4,8,12`.
    #[arg(long, global = true, value_parser = grid)]
    n: Option<Grid>,
    /// Orbit length.
    #[arg(long, global = true)]
    length: Option<usize>,
    #[arg(long, global = true)]
    replicates: Option<usize>,
    #[arg(long, global = true, value_enum)]
    event: Option<Event>,
}

#[derive(Clone)]
struct Grid(Vec<usize>);

fn grid(s: &str) -> std::result::Result<Grid, String> {
    config::parse_grid(s).map(Grid)
}

impl Flags {
    fn apply(&self, c: &mut ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    c.$f = v.clone();
                }
            )*};
        }
        take!(potential, seed, threads, out, kappa, length, replicates, event);
        if let Some(Grid(n)) = &self.n {
            c.n = n.clone();
        }
        if self.target.is_some() {
            c.target = self.target.clone();
        }
        if self.sft.is_some() {
            c.sft = self.sft.clone();
        }
    }
}

fn selftest() -> ExitCode {
    let checks = selftest::run();
    for c in &checks {
        println!("{} {:<32} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let kind = cli.command.kind();
    if kind == Kind::Selftest {
        return Ok(selftest());
    }
    let (mut cfg, mut inputs) = match &cli.flags.config {
        Some(path) => {
            let loaded = config::load(path)?;
            (loaded.config, loaded.inputs)
        }
        None => (ExperimentConfig::default(), BTreeMap::new()),
    };
    if let Some(k) = cfg.kind.filter(|&k| k != kind) {
        anyhow::bail!("config field `kind`: the config is for `{}`, not `{}`", k.name(), kind.name());
    }
    if cli.flags.potential.is_some() {
        inputs.remove("potential");
    }
    if cli.flags.target.is_some() {
        inputs.remove("target");
    }
    if cli.flags.sft.is_some() {
        inputs.remove("sft");
    }
    cli.flags.apply(&mut cfg);
    cfg.kind = Some(kind);
    cfg.validate(kind)?;

    let mut recorded = BTreeMap::new();
    let (potential, text) = config::potential("potential", &cfg.potential, &inputs)?;
    recorded.insert("potential".to_string(), text);
    let target = match &cfg.target {
        Some(spec) => {
            let (p, text) = config::potential("target", spec, &inputs)?;
            recorded.insert("target".to_string(), text);
            Some(p)
        }
        None => None,
    };
    let sft = match &cfg.sft {
        Some(spec) => {
            let (s, text) = config::sft(spec, &inputs)?;
            recorded.insert("sft".to_string(), text);
            Some(s)
        }
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .context("starting the worker pool")?;
    let threads = pool.current_num_threads();
    let ctx = Context {
        config: cfg,
        potential,
        target,
        sft,
        pool,
    };

    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let artifacts = match kind {
        Kind::Spectrum => pipelines::spectrum(&ctx)?,
        Kind::Hit => pipelines::hit(&ctx)?,
        Kind::Cover => pipelines::cover(&ctx)?,
        Kind::Census => pipelines::census(&ctx)?,
        Kind::Tree => pipelines::tree(&ctx)?,
        Kind::Sft => pipelines::sft(&ctx)?,
        Kind::Circle => pipelines::circle(&ctx)?,
        Kind::Decay => decay::decay(&ctx)?,
        Kind::Selftest => unreachable!(),
    };
    let wall = started.elapsed().as_secs_f64();
    let outputs = output::write_all(&ctx.config.out, &artifacts)?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        library_version: dyncover::VERSION.to_string(),
        command: kind,
        config_sha256: output::config_hash(&ctx.config, &recorded),
        config: ctx.config.clone(),
        inputs: recorded,
        threads,
        started_unix,
        wall_clock_seconds: wall,
        outputs,
    };
    output::write_all(&ctx.config.out, &[output::json("manifest.json", &manifest)?])?;
    for o in &manifest.outputs {
        println!("{}", ctx.config.out.join(&o.file).display());
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
