//! `adlab`: command-line driver for the advection-diffusion laboratory.
//!
//! Exit codes: 0 all gates passed, 1 a gate failed, 2 invalid configuration
//! or arguments, 3 numerical failure, 4 I/O failure.

mod config;
mod experiments;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use adlab::Exponent;
use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Kind, RegimeBlock};
use output::{commit_dir, commit_file, Artifacts, Manifest};

#[derive(Debug)]
pub enum CliError {
    Schema(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Schema(m) => write!(f, "invalid configuration: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Io(m) => write!(f, "i/o failure: {m}"),
        }
    }
}

impl From<adlab::Error> for CliError {
    fn from(e: adlab::Error) -> Self {
        use adlab::Error as E;
        let msg = e.to_string();
        match e {
            E::CflViolation { .. } | E::NumericalBlowup { .. } | E::NonFinite { .. } => CliError::Numerical(msg),
            E::Io(_) | E::Format(_) => CliError::Io(msg),
            _ => CliError::Schema(msg),
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "adlab", version, about = "Advection-diffusion experiments on the flat torus")]
struct Cli {
    /// Experiment configuration (JSON). Without a subcommand the experiment
    /// kind is taken from the file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized checks (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve the equation and check the a-priori gates.
    Simulate,
    /// Commutator decay study along a dyadic mollifier schedule.
    Commutator,
    /// Well-posedness regimes in exponent space.
    #[command(subcommand)]
    Regime(RegimeCommand),
    /// The velocity field catalog.
    #[command(subcommand)]
    Fields(FieldsCommand),
}

#[derive(Subcommand, Debug)]
enum RegimeCommand {
    /// Classify one exponent tuple; prints the report as JSON.
    Classify(ClassifyArgs),
    /// Region map of the (1/p, 1/q) square as SVG and CSV.
    Map(MapArgs),
}

#[derive(Args, Debug)]
struct ClassifyArgs {
    #[arg(long)]
    d: Option<usize>,
    /// Time exponent of b (number or "inf").
    #[arg(long)]
    alpha: Option<Exponent>,
    #[arg(long)]
    p: Option<Exponent>,
    #[arg(long)]
    q: Option<Exponent>,
}

#[derive(Args, Debug)]
struct MapArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    alpha: Option<Exponent>,
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum FieldsCommand {
    /// Print the catalog with integrability cards.
    List,
    /// Measure integrability trends for a field (needs --config).
    Audit,
}

struct Context {
    config: Option<(ExperimentConfig, String)>,
    out: Option<PathBuf>,
    seed: u64,
    threads: usize,
}

impl Context {
    fn expect_kind(&self, kinds: &[Kind]) -> Result<&ExperimentConfig, CliError> {
        let (cfg, _) = self
            .config
            .as_ref()
            .ok_or_else(|| CliError::Schema("this subcommand needs --config".into()))?;
        if !kinds.contains(&cfg.kind) {
            return Err(CliError::Schema(format!("config kind \"{}\" does not match the subcommand", cfg.kind.name())));
        }
        Ok(cfg)
    }

    fn out_dir(&self, kind: Kind) -> PathBuf {
        self.out
            .clone()
            .or_else(|| self.config.as_ref().and_then(|(c, _)| c.output_dir.clone()))
            .unwrap_or_else(|| PathBuf::from(format!("adlab-{}", kind.name())))
    }

    /// Writes artifacts plus manifest atomically; returns whether all gates passed.
    fn finish(&self, kind: Kind, mut art: Artifacts, started: Instant) -> Result<bool, CliError> {
        let dir = self.out_dir(kind);
        let tolerances = self.config.as_ref().map(|(c, _)| c.tolerances.clone()).unwrap_or_default();
        let manifest = Manifest {
            tool: "adlab",
            version: env!("CARGO_PKG_VERSION"),
            kind: kind.name().into(),
            config_hash: self.config.as_ref().map(|(_, h)| h.clone()),
            seed: self.seed,
            threads: self.threads,
            grid: art.grid,
            tolerances,
            wall_time_s: started.elapsed().as_secs_f64(),
            passed: art.passed(),
            gates: std::mem::take(&mut art.gates),
            outputs: art.files.iter().map(|(n, _)| n.clone()).chain(["manifest.json".to_string()]).collect(),
            warnings: art.warnings.clone(),
            summary: std::mem::take(&mut art.summary),
        };
        art.add_json("manifest.json", &manifest);
        commit_dir(&dir, &art.files)?;
        for g in manifest.gates.iter().filter(|g| !g.pass) {
            eprintln!("gate failed: {} = {:e} (tolerance {:e})", g.name, g.value, g.tolerance);
        }
        for w in &manifest.warnings {
            eprintln!("warning: {w}");
        }
        println!("{} -> {} ({})", kind.name(), dir.display(), if manifest.passed { "pass" } else { "FAIL" });
        Ok(manifest.passed)
    }
}

fn regime_block_from_flags(d: Option<usize>, alpha: Option<Exponent>, p: Option<Exponent>, q: Option<Exponent>, resolution: Option<usize>) -> Result<RegimeBlock, CliError> {
    Ok(RegimeBlock {
        d: d.ok_or_else(|| CliError::Schema("--d is required without --config".into()))?,
        alpha: alpha.unwrap_or(Exponent::INFINITY),
        p,
        q,
        resolution: resolution.unwrap_or(64),
    })
}

fn run_kind(ctx: &Context, kind: Kind) -> Result<bool, CliError> {
    let started = Instant::now();
    let cfg = ctx.expect_kind(&[kind])?;
    let art = match kind {
        Kind::Simulate => experiments::simulate(cfg.simulate.as_ref().expect("validated"), &cfg.tolerances)?,
        Kind::Commutator => experiments::commutator(cfg.commutator.as_ref().expect("validated"))?,
        Kind::RegimeClassify => experiments::regime_classify(cfg.regime.as_ref().expect("validated"), ctx.seed)?.0,
        Kind::RegimeMap => experiments::regime_map(cfg.regime.as_ref().expect("validated"))?,
        Kind::FieldAudit => experiments::field_audit(cfg.field_audit.as_ref().expect("validated"))?,
    };
    ctx.finish(kind, art, started)
}

fn classify_cmd(ctx: &Context, args: &ClassifyArgs) -> Result<bool, CliError> {
    let started = Instant::now();
    let block = match &ctx.config {
        Some(_) => ctx.expect_kind(&[Kind::RegimeClassify])?.regime.clone().expect("validated"),
        None => regime_block_from_flags(args.d, args.alpha, args.p, args.q, None)?,
    };
    let (art, report) = experiments::regime_classify(&block, ctx.seed)?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serializable"));
    if ctx.out.is_some() || ctx.config.is_some() {
        ctx.finish(Kind::RegimeClassify, art, started)
    } else {
        Ok(art.passed())
    }
}

fn map_cmd(ctx: &Context, args: &MapArgs) -> Result<bool, CliError> {
    let started = Instant::now();
    let block = match &ctx.config {
        Some(_) => ctx.expect_kind(&[Kind::RegimeMap])?.regime.clone().expect("validated"),
        None => regime_block_from_flags(args.d, args.alpha, None, None, args.resolution)?,
    };
    let art = experiments::regime_map(&block)?;
    match ctx.out.as_deref().filter(|p| p.extension().is_some_and(|e| e == "svg")) {
        // plain file pair next to each other: map.svg + map.csv
        Some(svg) => {
            let find = |n: &str| art.files.iter().find(|(f, _)| f == n).map(|(_, b)| b.clone()).expect("written");
            commit_file(svg, &find("region_map.svg"))?;
            commit_file(&svg.with_extension("csv"), &find("region_map.csv"))?;
            println!("regime-map -> {} ({})", svg.display(), if art.passed() { "pass" } else { "FAIL" });
            Ok(art.passed())
        }
        None => ctx.finish(Kind::RegimeMap, art, started),
    }
}

fn dispatch(cli: &Cli) -> Result<bool, CliError> {
    let config = cli.config.as_deref().map(|p: &Path| ExperimentConfig::load(p)).transpose()?;
    let seed = cli.seed.or(config.as_ref().map(|(c, _)| c.seed)).unwrap_or(0);
    let threads = init_threads(cli.threads)?;
    let ctx = Context { config, out: cli.out.clone(), seed, threads };
    match &cli.command {
        None => match &ctx.config {
            Some((c, _)) => run_kind(&ctx, c.kind),
            None => Err(CliError::Schema("give a subcommand or --config (see --help)".into())),
        },
        Some(Command::Simulate) => run_kind(&ctx, Kind::Simulate),
        Some(Command::Commutator) => run_kind(&ctx, Kind::Commutator),
        Some(Command::Regime(RegimeCommand::Classify(a))) => classify_cmd(&ctx, a),
        Some(Command::Regime(RegimeCommand::Map(a))) => map_cmd(&ctx, a),
        Some(Command::Fields(FieldsCommand::List)) => {
            print!("{}", experiments::catalog_table());
            Ok(true)
        }
        Some(Command::Fields(FieldsCommand::Audit)) => run_kind(&ctx, Kind::FieldAudit),
    }
}

#[cfg(feature = "parallel")]
fn init_threads(n: Option<usize>) -> Result<usize, CliError> {
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Schema("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Schema(e.to_string()))?;
    }
    Ok(adlab::par::current_num_threads())
}

#[cfg(not(feature = "parallel"))]
fn init_threads(n: Option<usize>) -> Result<usize, CliError> {
    if n.is_some_and(|n| n != 1) {
        eprintln!("warning: built without the parallel feature; running on one thread");
    }
    Ok(1)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("adlab: {e}");
            ExitCode::from(e.code())
        }
    }
}
