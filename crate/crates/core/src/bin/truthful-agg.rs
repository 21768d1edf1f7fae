use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use truthful_agg::harness::{
    check_lemma2_bounds, gradcheck_report, lemma2_digest, privacy_report,
    resolve_output_dir, run_experiment, validate_graph, ExperimentConfig, ExperimentKind,
    HarnessError, Outcome, OUTPUT_ENV,
};
use truthful_agg::network::{SpectralBand, Topology};

#[derive(Parser)]
#[command(name = "truthful-agg", version, about = "Noise-injected gradient tracking for truthful aggregative optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Band {
    Strict,
    Contractive,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named by the config's `kind`.
    Run {
        config: Option<PathBuf>,
        /// Print the default config for a kind and exit.
        #[arg(long, value_name = "KIND")]
        print_config: Option<String>,
        /// Output directory; overrides the config and the environment.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check an edge list and its uniform-weight mixing matrix.
    ValidateGraph {
        edgelist: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        weight: f64,
        #[arg(long, value_enum, default_value_t = Band::Strict)]
        band: Band,
    },
    /// Regime checks, privacy budget, truthfulness bound and calibration.
    PrivacyReport { config: PathBuf },
    /// Finite-difference check of the configured problem's gradients.
    Gradcheck { config: PathBuf },
    /// Numeric check of the two sequence bounds over random draws.
    Lemma2 {
        draws: usize,
        horizon: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn report(outcome: &Outcome) -> ExitCode {
    match outcome {
        Outcome::Success => println!("status: ok"),
        Outcome::ExpectedDivergence => println!("status: divergence flagged, as expected"),
        Outcome::AssertionFailed(msgs) => {
            for m in msgs {
                println!("assertion failed: {m}");
            }
        }
    }
    ExitCode::from(outcome.exit_code() as u8)
}

fn kind_by_name(name: &str) -> Result<ExperimentKind, HarnessError> {
    ExperimentKind::ALL
        .into_iter()
        .find(|k| k.name() == name)
        .ok_or_else(|| HarnessError::Config(format!("unknown experiment kind `{name}`")))
}

fn execute(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Run {
            config,
            print_config,
            out,
        } => {
            if let Some(kind) = print_config {
                print!("{}", ExperimentConfig::template(kind_by_name(&kind)?).to_toml());
                return Ok(ExitCode::SUCCESS);
            }
            let path = config.ok_or_else(|| HarnessError::Config("run needs a config file".into()))?;
            let config = ExperimentConfig::load(&path)?;
            let dir = out.unwrap_or_else(|| resolve_output_dir(&config));
            println!("{} -> {} (set {OUTPUT_ENV} to redirect)", config.kind, dir.display());
            let outcome = run_experiment(&config, &dir)?;
            Ok(report(&outcome))
        }
        Command::ValidateGraph {
            edgelist,
            weight,
            band,
        } => {
            let topo = Topology::load_edge_list(&edgelist)?;
            let band = match band {
                Band::Strict => SpectralBand::Strict,
                Band::Contractive => SpectralBand::Contractive,
            };
            let r = validate_graph(&topo, weight, band);
            print!("{r}");
            Ok(report(&r.outcome()))
        }
        Command::PrivacyReport { config } => {
            let config = ExperimentConfig::load(&config)?;
            let r = privacy_report(&config, None)?;
            print!("{r}");
            Ok(report(&r.outcome()))
        }
        Command::Gradcheck { config } => {
            let config = ExperimentConfig::load(&config)?;
            let r = gradcheck_report(&config, None)?;
            print!("{r}");
            Ok(report(&r.outcome()))
        }
        Command::Lemma2 {
            draws,
            horizon,
            seed,
        } => {
            let s = check_lemma2_bounds(draws, horizon, seed);
            print!("{}", lemma2_digest(&s));
            let outcome = if s.passes() {
                Outcome::Success
            } else {
                Outcome::AssertionFailed(vec!["sequence bound violated".into()])
            };
            Ok(report(&outcome))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
