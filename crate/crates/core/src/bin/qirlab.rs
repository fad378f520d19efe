use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use qirlab::app::{self, BootstrapArgs, EstimateArgs, McTableArgs, SimulateArgs};
use qirlab::bootstrap::BootConfig;
use qirlab::gqr::SqfSpec;
use qirlab::lp::EstimatorKind;
use qirlab::svar::{DgpParams, SimConfig};
use qirlab::Error;

#[derive(Parser)]
#[command(
    name = "qirlab",
    version,
    about = "Structural quantile impulse responses"
)]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecArg {
    Linear,
    Quadratic,
}

impl From<SpecArg> for SqfSpec {
    fn from(s: SpecArg) -> Self {
        match s {
            SpecArg::Linear => SqfSpec::Linear,
            SpecArg::Quadratic => SqfSpec::Quadratic,
        }
    }
}

#[derive(Args)]
struct Common {
    /// Master seed.
    #[arg(long, env = "QIRLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct Boot {
    #[arg(long, default_value_t = 7)]
    block_length: usize,
    /// Bootstrap replications; 0 disables bands.
    #[arg(long, default_value_t = 1000)]
    boot_reps: usize,
    /// Confidence level of the percentile bands.
    #[arg(long, default_value_t = 0.90)]
    level: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the SVAR and recover structural quantile curves by binning.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Volatility parameter.
        #[arg(long, default_value_t = 9.0)]
        phi: f64,
        /// Retained path length.
        #[arg(long, default_value_t = 100_000)]
        length: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 1)]
        horizons: usize,
        #[arg(long, default_value = "0.1,0.5,0.9")]
        taus: String,
        #[arg(long, default_value_t = 20)]
        bins: usize,
    },
    /// Monte Carlo bias/RMSE table of the quantile estimators.
    McTable {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        mc_reps: usize,
        #[arg(long, default_value_t = 9.0)]
        phi: f64,
        #[arg(long, default_value_t = 1000)]
        length: usize,
        #[arg(long, default_value_t = 10)]
        horizons: usize,
        #[arg(long, default_value = "0.1,0.5,0.9")]
        taus: String,
        #[arg(long, value_enum, default_value_t = SpecArg::Linear)]
        spec: SpecArg,
    },
    /// Estimate an empirical QIR surface from a data manifest.
    Estimate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        manifest: PathBuf,
        /// credit-risk, volatility-risk or a column name.
        #[arg(long, default_value = "credit-risk")]
        treatment: String,
        #[arg(long, default_value_t = 24)]
        horizons: usize,
        /// Comma list or start:end:step range.
        #[arg(long, default_value = "0.1,0.5,0.9")]
        taus: String,
        #[arg(long, value_enum, default_value_t = SpecArg::Linear)]
        spec: SpecArg,
        #[arg(long, default_value = "gqr-lp")]
        estimator: String,
        #[command(flatten)]
        boot: Boot,
        /// Skip the 0.05..0.95 quantile sweep.
        #[arg(long)]
        no_sweep: bool,
    },
    /// Add bootstrap bands to an estimated surface.
    Bootstrap {
        #[command(flatten)]
        common: Common,
        /// Surface JSON written by `estimate`.
        #[arg(long)]
        surface: PathBuf,
        /// Use this manifest instead of the recorded one.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        boot: Boot,
    },
    /// Bundle the figures and tables of a directory into report.html.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "qirlab report")]
        title: String,
    },
}

fn boot_config(b: &Boot, seed: u64) -> Option<BootConfig> {
    (b.boot_reps > 0).then_some(BootConfig {
        block_length: b.block_length,
        replications: b.boot_reps,
        level: b.level,
        seed,
    })
}

fn run(cli: Cli) -> qirlab::Result<Vec<PathBuf>> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    match cli.command {
        Command::Simulate {
            common,
            phi,
            length,
            burn_in,
            horizons,
            taus,
            bins,
        } => app::cmd_simulate(&SimulateArgs {
            params: DgpParams {
                phi,
                ..DgpParams::default()
            },
            sim: SimConfig {
                t: length,
                burn_in,
                seed: common.seed,
                mc_reps: 1,
            },
            horizons,
            taus: app::parse_taus(&taus)?,
            bins,
            out: common.out,
        }),
        Command::McTable {
            common,
            mc_reps,
            phi,
            length,
            horizons,
            taus,
            spec,
        } => {
            let mut args = McTableArgs::standard(
                DgpParams {
                    phi,
                    ..DgpParams::default()
                },
                SimConfig {
                    t: length,
                    burn_in: 1000,
                    seed: common.seed,
                    mc_reps,
                },
                common.out,
            );
            args.mc.horizons = horizons;
            args.mc.taus = app::parse_taus(&taus)?;
            args.mc.spec = spec.into();
            app::cmd_mc_table(&args)
        }
        Command::Estimate {
            common,
            manifest,
            treatment,
            horizons,
            taus,
            spec,
            estimator,
            boot,
            no_sweep,
        } => app::cmd_estimate(&EstimateArgs {
            manifest,
            treatment: treatment.parse()?,
            estimator: estimator.parse::<EstimatorKind>()?,
            horizons,
            taus: app::parse_taus(&taus)?,
            spec: spec.into(),
            bootstrap: boot_config(&boot, common.seed),
            sweep: !no_sweep,
            seed: common.seed,
            out: common.out,
        }),
        Command::Bootstrap {
            common,
            surface,
            manifest,
            boot,
        } => {
            let bootstrap = boot_config(&boot, common.seed)
                .ok_or_else(|| Error::InvalidInput("--boot-reps must be positive".into()))?;
            app::cmd_bootstrap(&BootstrapArgs {
                surface,
                manifest,
                bootstrap,
                out: common.out,
            })
        }
        Command::Report { out, title } => Ok(vec![app::cmd_report(&out, &title)?]),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(Error::Cells(errors)) => {
            eprintln!("error: {} cell(s) failed", errors.len());
            for e in errors {
                eprintln!("  {e}");
            }
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
