use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use prodiab::elimination::epsilon_report;
use prodiab::harness::{exit_code, parse_representations, run_scenario, ScenarioConfig, ScenarioSettings};
use prodiab::{Error, Result};

#[derive(Parser)]
#[command(name = "prodiab", version, about = "Compare exact and eliminated cavity-QED dynamics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write data files plus a report.
    Run {
        config: PathBuf,
        /// Output directory (overrides output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of exact,adb,pdb,pdb-lme.
        #[arg(long)]
        reps: Option<String>,
        /// Replace a config entry, as key=value.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse a config and print its expansion-parameter report.
    Validate { config: PathBuf },
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("PRODIAB_THREADS") {
        Err(_) => Ok(None),
        Ok(v) => v.trim().parse::<usize>().ok().filter(|&n| n > 0).map(Some).ok_or_else(|| Error::Config {
            line: 0,
            msg: format!("PRODIAB_THREADS: '{v}' is not a positive integer"),
        }),
    }
}

fn epsilon_lines(cfg: &ScenarioConfig) -> Vec<String> {
    match &cfg.settings {
        ScenarioSettings::Jc(s) => s
            .drives
            .iter()
            .map(|&f| {
                let p = prodiab::elimination::JCParams { f, ..s.params };
                format!("f/kappa={f}: {}", epsilon_report(&p).summary())
            })
            .collect(),
        ScenarioSettings::Stirap(s) => vec![s.params.epsilon_report().summary()],
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { config } => {
            let cfg = ScenarioConfig::from_file(&config, &[])?;
            println!("{}: scenario {} ok", config.display(), cfg.scenario.name());
            for line in epsilon_lines(&cfg) {
                println!("{line}");
            }
            Ok(())
        }
        Command::Run { config, out, reps, mut overrides } => {
            if let Some(r) = reps {
                parse_representations(&r)
                    .map_err(|msg| Error::Config { line: 0, msg: format!("--reps: {msg}") })?;
                overrides.push(format!("representations={r}"));
            }
            let cfg = ScenarioConfig::from_file(&config, &overrides)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = threads()? {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
            let output = pool.install(|| run_scenario(&cfg))?;
            for path in output.write(&dir)? {
                println!("wrote {}", path.display());
            }
            for r in output.report.runs.iter().filter(|r| r.max_leak.is_some()) {
                println!(
                    "{}: max_leak {:e} at n_max {}",
                    r.name,
                    r.max_leak.unwrap_or(0.0),
                    r.n_max.unwrap_or(0)
                );
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("prodiab: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
