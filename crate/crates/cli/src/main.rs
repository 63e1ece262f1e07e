use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use qbc_cli::config::RunConfig;
use qbc_cli::run::{self, Format};
use qbc_cli::Mode;

/// Recurrence and shrinking-target counting on piecewise-linear expanding maps.
#[derive(Debug, Parser)]
#[command(name = "qbc", version, about)]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for the manifest, tables and charts; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for point simulation (0 = all cores).
    #[arg(long, global = true, env = "QBC_THREADS")]
    threads: Option<usize>,
    /// Table format on stdout and on disk.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recurrence counts R(x, N) for sampled points.
    Count,
    /// Shrinking-target counts W(x, N) for sampled points.
    Target,
    /// Exact measures of single events.
    Measure,
    /// Exact measures of pairwise intersections.
    Intersect,
    /// Exact mixing deficits for a rectangle and a union of rectangles.
    Mixing,
    /// Monte Carlo experiment with threshold checks (exit 2 on failure).
    Experiment,
    /// Error-exponent fit over an experiment.
    Fit,
    /// Convergent-rate experiment (exit 2 if some final count is too large).
    Dichotomy,
    /// Print the canonical form of the config and its hash.
    Config,
}

fn fail(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let Some(path) = &cli.config else {
        return fail("--config <path> is required");
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return fail(format!("{}: {e}", path.display())),
    };
    let mut config: RunConfig = match toml::from_str(&text) {
        Ok(c) => c,
        Err(e) => return fail(format!("cannot parse config: {e}")),
    };
    config.mode = match cli.command {
        Command::Count => Mode::Count,
        Command::Target => Mode::Target,
        Command::Measure => Mode::Measure,
        Command::Intersect => Mode::Intersect,
        Command::Mixing => Mode::Mixing,
        Command::Experiment => Mode::Experiment,
        Command::Fit => Mode::Fit,
        Command::Dichotomy => Mode::Dichotomy,
        Command::Config => config.mode,
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output.dir = Some(out.display().to_string());
    }
    let resolved = match config.resolve() {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    if matches!(cli.command, Command::Config) {
        print!("{}", qbc_cli::emit(&resolved.config));
        println!("# hash = {}", resolved.config.hash());
        return ExitCode::SUCCESS;
    }

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(e);
        }
    }

    let started = run::now();
    let outcome = match run::execute(&resolved) {
        Ok(o) => o,
        Err(e) => return fail(e),
    };
    if let Some(t) = outcome.tables.first() {
        print!("{}", t.render(cli.format));
    }
    if let Some(dir) = &resolved.config.output.dir {
        match run::persist(dir.as_ref(), &resolved, &outcome, cli.format, started) {
            Ok(m) => log::info!("wrote {} artifacts to {dir}", m.artifacts.len()),
            Err(e) => return fail(e),
        }
    }
    for (check, ok) in &outcome.checks {
        eprintln!("{} {check}", if *ok { "PASS" } else { "FAIL" });
    }
    if matches!(resolved.config.mode, Mode::Experiment | Mode::Dichotomy) && !outcome.passed() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
