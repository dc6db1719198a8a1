use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finmc_cli::{generate, ErrorKind, resume_experiment, run_experiment, sweep, CliError, ParameterGrid, RunConfig};

#[derive(Parser)]
#[command(name = "finmc", version, about = "Reconstruct cooling-fin conductivity from boundary temperatures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize data, run one chain and write all artifacts.
    Run(Settings),
    /// Run one chain per point of a parameter grid.
    Sweep {
        #[command(flatten)]
        settings: Settings,
        /// Grid axis `key=v1,v2,...`; repeat for more axes.
        #[arg(long = "grid", value_name = "KEY=VALUES")]
        grid: Vec<String>,
        /// Runs executed concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Continue a run from the checkpoint in its output directory.
    Resume {
        /// Output directory of the interrupted run.
        dir: PathBuf,
        /// New total iteration count.
        #[arg(long)]
        iterations: Option<String>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Write the true field and boundary data only.
    Gen(Settings),
}

macro_rules! setting_flags {
    ($($field:ident),* $(,)?) => {
        #[derive(Args)]
        struct Settings {
            /// Config file of `key = value` lines.
            #[arg(long, short)]
            config: Option<PathBuf>,
            /// Output directory.
            #[arg(long)]
            out: Option<String>,
            #[arg(long)]
            seed: Option<String>,
            $(
                #[arg(long, allow_hyphen_values = true)]
                $field: Option<String>,
            )*
            /// Any config key, `key=value`; applied after the named flags.
            #[arg(long = "set", value_name = "KEY=VALUE")]
            set: Vec<String>,
        }

        impl Settings {
            fn overrides(&self) -> Result<Vec<(String, String)>, CliError> {
                let mut out = Vec::new();
                if let Some(v) = &self.out {
                    out.push(("out".to_string(), v.clone()));
                }
                if let Some(v) = &self.seed {
                    out.push(("seed".to_string(), v.clone()));
                }
                $(
                    if let Some(v) = &self.$field {
                        out.push((stringify!($field).to_string(), v.clone()));
                    }
                )*
                out.extend(split_assignments(&self.set)?);
                Ok(out)
            }

            fn load(&self) -> Result<RunConfig, CliError> {
                RunConfig::load(self.config.as_deref(), &self.overrides()?)
            }
        }
    };
}

setting_flags!(
    m, n, lx, ly, h, delta, q, contact_fraction, trial, noise_std, lambda, mu, w, sigma, epsilon0, kernel,
    omega_bound, kappa_min, iterations, k0, thin, snapshots, checkpoint_every,
);

fn split_assignments(items: &[String]) -> Result<Vec<(String, String)>, CliError> {
    items
        .iter()
        .map(|item| {
            item.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| CliError::Syntax { text: item.clone(), line: 0 })
        })
        .collect()
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run(settings) => {
            let manifest = run_experiment(&settings.load()?)?;
            let err = manifest.error.expect("complete run");
            let acc = manifest.acceptance.expect("complete run");
            println!(
                "{}: mean_abs {:.6} rms {:.6} max_abs {:.6} acceptance {:.4} f {:.6e}",
                manifest.config.out.display(),
                err.mean_abs,
                err.rms,
                err.max_abs,
                acc.acceptance_rate,
                acc.final_f
            );
        }
        Command::Sweep { settings, grid, jobs } => {
            let grid = ParameterGrid::parse(&grid)?;
            let report = sweep(&settings.load()?, &grid, jobs)?;
            println!("{} completed, {} failed", report.completed.len(), report.failures.len());
            for f in &report.failures {
                eprintln!("run {}: {}", f.index, f.error.message);
            }
        }
        Command::Resume { dir, iterations, set } => {
            let mut overrides = split_assignments(&set)?;
            if let Some(it) = iterations {
                overrides.insert(0, ("iterations".to_string(), it));
            }
            let manifest = resume_experiment(&dir, &overrides)?;
            let err = manifest.error.expect("complete run");
            println!(
                "{}: resumed at {}, mean_abs {:.6}",
                dir.display(),
                manifest.resumed_from.unwrap_or(0),
                err.mean_abs
            );
        }
        Command::Gen(settings) => {
            let cfg = settings.load()?;
            let (truth, data) = generate(&cfg, &cfg.out)?;
            println!(
                "{}: {} nodes, {} boundary values",
                cfg.out.display(),
                truth.values().len(),
                data.len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return if err.use_stderr() {
                ExitCode::from(ErrorKind::Validation.exit_code() as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let record = err.record();
            eprintln!("{}", serde_json::to_string(&record).expect("record serializes"));
            ExitCode::from(record.exit_code as u8)
        }
    }
}
