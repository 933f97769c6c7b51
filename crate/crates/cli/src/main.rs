use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "fastslow", version, about = "Analysis of fast-slow maps")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Seed for randomly sampled test points.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct ModelArg {
    /// Model to use when no --config is given.
    #[arg(long, default_value = "chialvo")]
    pub model: String,
    /// Override the configured eps.
    #[arg(long)]
    pub eps: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical manifold, singularities, spectral bounds, slow manifolds and fixed points.
    Analyze(ModelArg),
    /// Iterate the map from an initial point.
    Simulate(commands::SimulateArgs),
    /// Critical, first-order and numeric slow manifolds on the configured grid.
    SlowManifold(ModelArg),
    /// Folds, flips and complex crossings along the first chart parameter.
    Singularities(ModelArg),
    /// Reduced trajectories and fiber contraction rates.
    Reduced(commands::ReducedArgs),
    /// Chialvo regimes I to IV.
    Regimes(commands::RegimesArgs),
    /// Distance between discretized and continuous slow manifolds over (eps, h).
    EulerStudy(commands::EulerStudyArgs),
    /// Return map of the Hopf test system and its averaged equation.
    Poincare(commands::PoincareArgs),
    /// Generic pipeline against closed forms.
    Oracle(ModelArg),
}

/// Files produced by a command, written only after every computation succeeded.
pub struct Output {
    pub files: Vec<(String, String)>,
    /// Set when the files are written but the run should still fail.
    pub failed: Option<String>,
}

impl Output {
    pub fn ok(files: Vec<(String, String)>) -> Self {
        Output { files, failed: None }
    }
}

pub struct Ctx {
    pub config: Option<PathBuf>,
    pub seed: u64,
}

fn run(cli: &Cli) -> fastslow::Result<Output> {
    let ctx = Ctx {
        config: cli.config.clone(),
        seed: cli.seed,
    };
    match &cli.command {
        Command::Analyze(m) => commands::analyze(&ctx, m),
        Command::Simulate(a) => commands::simulate(&ctx, a),
        Command::SlowManifold(m) => commands::slow_manifold(&ctx, m),
        Command::Singularities(m) => commands::singularities(&ctx, m),
        Command::Reduced(a) => commands::reduced(&ctx, a),
        Command::Regimes(a) => commands::regimes(&ctx, a),
        Command::EulerStudy(a) => commands::euler_study(&ctx, a),
        Command::Poincare(a) => commands::poincare(&ctx, a),
        Command::Oracle(m) => commands::oracle(&ctx, m),
    }
}

fn write_all(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, contents) in files {
        fastslow::io::write_atomic(&dir.join(name), contents)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let out = match run(&cli) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(if e.is_usage() { 2 } else { 1 });
        }
    };
    if let Err(e) = write_all(&cli.out, &out.files) {
        eprintln!("error: writing to {}: {e}", cli.out.display());
        return ExitCode::from(1);
    }
    for (name, _) in &out.files {
        println!("{}", cli.out.join(name).display());
    }
    match out.failed {
        Some(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        None => ExitCode::SUCCESS,
    }
}
