use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mlmc_sketch::cli::{
    fm_curve_csv, parse_config_file, run_estimate, run_oracle, run_sweep, sweep_csv, CliError,
    CliResult, OracleOptions, SweepConfig,
};

/// MLMC estimators for E[f(a'b)] and E[f(AB)] with index-sampling sketches.
#[derive(Parser, Debug)]
#[command(name = "mlmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run MLMC and the MC baseline for every M in the list; write CSV.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Leave the time columns empty so reruns are byte-identical.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write the f(M) = (M+1)^2 / (M ln^2 M) curve as CSV.
    FmCurve {
        #[arg(long, default_value_t = 2)]
        m_min: u64,
        #[arg(long, default_value_t = 60)]
        m_max: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the sketch mean and variance identities by full enumeration.
    Oracle {
        #[arg(long, default_value_t = 4)]
        max_n: usize,
        #[arg(long, default_value_t = 3)]
        max_s: usize,
        #[arg(long, hide = true)]
        corrupt_rescaling: bool,
    },
    /// Print one MLMC estimate per M with its per-level table.
    Estimate {
        #[command(flatten)]
        run: RunArgs,
    },
}

/// Every flag can also be set in the `--config` file as `key = value`
/// (same names without the dashes); flags win.
#[derive(Args, Debug)]
struct RunArgs {
    /// Flat key=value file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// inner | matmul [default: inner]
    #[arg(long)]
    mode: Option<String>,
    /// paper-inner | paper-matrix | constant-ones | deterministic [default: paper-<mode>]
    #[arg(long)]
    model: Option<String>,
    /// f1 | f2 | identity [default: f1 for inner, f2 for matmul]
    #[arg(long)]
    target: Option<String>,
    /// Comma-separated bases, e.g. 7,10,11
    #[arg(long)]
    m_list: Option<String>,
    /// Accuracy target [default: 0.1]
    #[arg(long)]
    epsilon: Option<f64>,
    /// Bias constant of the level rule [default: 1]
    #[arg(long)]
    c1: Option<f64>,
    /// Variance constant of the replication rule [default: 1]
    #[arg(long)]
    c2: Option<f64>,
    /// Master seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Repetitions per M [default: 1]
    #[arg(long)]
    reps: Option<u64>,
    /// Exact-product draws for the reference value [default: 100000]
    #[arg(long)]
    n_ref: Option<u64>,
    /// Output file (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 1 runs sequentially [default: all cores]
    #[arg(long)]
    threads: Option<usize>,
    /// Smoothing width of f2 [default: 1e-12]
    #[arg(long)]
    zeta: Option<f64>,
    /// Inner dimension n [default: 1000]
    #[arg(long)]
    n: Option<usize>,
    /// Rows of A in matmul mode [default: 10]
    #[arg(long)]
    m: Option<usize>,
    /// Columns of B in matmul mode [default: 10]
    #[arg(long)]
    d: Option<usize>,
}

impl RunArgs {
    fn resolve(self) -> CliResult<SweepConfig> {
        let mut config = SweepConfig::default();
        if let Some(path) = &self.config {
            config.apply_all(&parse_config_file(&std::fs::read_to_string(path)?)?)?;
        }
        let flags: [(&str, Option<String>); 16] = [
            ("mode", self.mode),
            ("model", self.model),
            ("target", self.target),
            ("m-list", self.m_list),
            ("epsilon", self.epsilon.map(|v| v.to_string())),
            ("c1", self.c1.map(|v| v.to_string())),
            ("c2", self.c2.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("reps", self.reps.map(|v| v.to_string())),
            ("n-ref", self.n_ref.map(|v| v.to_string())),
            ("threads", self.threads.map(|v| v.to_string())),
            ("zeta", self.zeta.map(|v| v.to_string())),
            ("n", self.n.map(|v| v.to_string())),
            ("m", self.m.map(|v| v.to_string())),
            ("d", self.d.map(|v| v.to_string())),
            ("out", self.out.map(|p| p.display().to_string())),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                config.apply(key, &v)?;
            }
        }
        config.validate()?;
        Ok(config)
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Sweep { run, no_timing } => {
            let mut config = run.resolve()?;
            if no_timing {
                config.timing = false;
            }
            let rows = run_sweep(&config)?;
            emit(config.out.as_deref(), &sweep_csv(&rows, config.timing))
        }
        Command::FmCurve { m_min, m_max, out } => emit(out.as_deref(), &fm_curve_csv(m_min, m_max)?),
        Command::Oracle { max_n, max_s, corrupt_rescaling } => {
            let report = run_oracle(OracleOptions { max_n, max_s, corrupt_rescaling })?;
            print!("{}", report.table());
            if report.passed() {
                Ok(())
            } else {
                let first = report.failures().next().expect("failed report has a failure");
                Err(CliError::Oracle(format!(
                    "{}: {} expected {:e}, observed {:e}",
                    first.instance, first.identity, first.expected, first.observed
                )))
            }
        }
        Command::Estimate { run } => {
            let config = run.resolve()?;
            let text = run_estimate(&config)?;
            emit(config.out.as_deref(), &text)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlmc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
