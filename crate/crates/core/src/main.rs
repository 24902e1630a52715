use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qmax::dynamics::TimeSpan;
use qmax::harness::config::{MatrixSpec, ObservableSpec, RunOptions};
use qmax::harness::{emit_report, gen_hamiltonian, run_scenario, GenKind, GenOptions, Mode, ReportFormat, ScenarioConfig, Tolerances};
use qmax::{linalg, Result};

/// Exit status for configuration and I/O failures.
const EXIT_SETUP: u8 = 126;

#[derive(Parser)]
#[command(name = "qmax", version, about = "Transition-amplitude maximization and weak values for non-Hermitian Hamiltonians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximal amplitude, bound and real weak values for a non-Hermitian H.
    VerifyTheorem1(RunArgs),
    /// Maximal final state and weak-value collapse for a Hermitian H.
    VerifyTheorem2(RunArgs),
    /// Maximizing pairs by every method, without observables.
    Maximize(RunArgs),
    /// Weak values of the configured observables along the analytic pair.
    WeakValue(RunArgs),
    /// Sweep over duration or dimension as given by the `[scan]` table.
    Scan(RunArgs),
    /// Print a scenario file holding a freshly generated Hamiltonian.
    Gen(GenArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    /// Number of sample times in [T_A, T_B].
    #[arg(long)]
    times: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Hermitian,
    NormalNonhermitian,
    Nonnormal,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "nonnormal")]
    kind: Kind,
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    imag_max: f64,
    #[arg(long, default_value_t = 100.0)]
    cond_p_max: f64,
    #[arg(long, default_value_t = 1)]
    degeneracy: usize,
    /// Duration `T_B − T_A` of the emitted span.
    #[arg(long, default_value_t = 1.0)]
    duration: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(args: &RunArgs, mode: Mode) -> Result<u8> {
    let mut cfg = ScenarioConfig::load(&args.config)?;
    if mode != Mode::Scan || cfg.mode == Mode::Scan {
        cfg.mode = mode;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(times) = args.times {
        cfg.run.times = times;
    }
    let report = run_scenario(&cfg)?;
    let format = match args.format {
        Format::Json => ReportFormat::Json,
        Format::Csv => ReportFormat::Csv,
    };
    emit_report(&report, format, args.out.as_deref())?;
    eprintln!(
        "{} checks failed; wall time {:.3} s",
        report.failed_count(),
        report.wall_time.0.as_secs_f64()
    );
    Ok(report.exit_code() as u8)
}

fn generate(args: &GenArgs) -> Result<u8> {
    let kind = match args.kind {
        Kind::Hermitian => GenKind::Hermitian,
        Kind::NormalNonhermitian => GenKind::NormalNonhermitian,
        Kind::Nonnormal => GenKind::Nonnormal,
    };
    let opts = GenOptions { imag_max: args.imag_max, cond_p_max: args.cond_p_max, degeneracy: args.degeneracy };
    let h = gen_hamiltonian(kind, args.n, args.seed, &opts)?;
    let cfg = ScenarioConfig {
        mode: if kind == GenKind::Hermitian { Mode::Theorem2 } else { Mode::Theorem1 },
        seed: args.seed,
        hbar: 1.0,
        span: TimeSpan::new(0.0, args.duration)?,
        hamiltonian: MatrixSpec::Matrix(linalg::to_rows(&h)),
        observables: vec![ObservableSpec::Identity, ObservableSpec::RandomQHermitian],
        tolerances: Tolerances::from_env(),
        run: RunOptions::default(),
        scan: None,
    };
    let text = cfg.to_toml_string()?;
    match &args.out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::VerifyTheorem1(a) => run(a, Mode::Theorem1),
        Command::VerifyTheorem2(a) => run(a, Mode::Theorem2),
        Command::Maximize(a) => run(a, Mode::Maximize),
        Command::WeakValue(a) => run(a, Mode::Weakvalue),
        Command::Scan(a) => run(a, Mode::Scan),
        Command::Gen(a) => generate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_SETUP)
        }
    }
}
