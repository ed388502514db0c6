//! `snlse` — stationary states of the capped stochastic NLSE: simulation,
//! Gibbs-oracle comparison, mean-field solves, coupling scans, and
//! infrared probes, driven by flat key = value configuration files.

mod commands;
mod config;

use config::Config;
use snlse_core::error::Error;
use std::path::PathBuf;
use std::process::ExitCode;

const USAGE: &str = "\
snlse — capped stochastic NLSE toolkit

USAGE:
  snlse <COMMAND> --config PATH [FLAGS]

COMMANDS:
  describe    print the mode lattice table ([lattice], [cap])
  simulate    stationary histograms from Langevin trajectories
              ([lattice], [cap], [params], [run])
  meanfield   solve the self-consistency equation at one coupling
              ([meanfield], [cap])
  scan        sweep the coupling and locate the transition
              ([meanfield], [cap], [scan])
  infrared    probe the infrared limit of the moment integral
              ([meanfield], [cap], [infrared])

FLAGS:
  --config PATH       configuration file (required)
  --out DIR           output directory (required for writing commands)
  --seed U64          override the [run] seed
  --threads N         size of the worker pool
  --with-oracle       also run the Metropolis Gibbs oracle (simulate, reflect)
  --emit-plot-data    write paired simulation/oracle histogram columns
  --help              this text

EXIT CODES:
  0 success, 2 configuration error, 3 numerical failure
";

#[derive(Debug, Default)]
pub struct Globals {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub emit_plot_data: bool,
    pub with_oracle: bool,
}

fn parse_args() -> Result<(String, Globals), String> {
    let mut args = std::env::args().skip(1);
    let command = match args.next() {
        Some(c) if c == "--help" || c == "-h" => {
            print!("{USAGE}");
            std::process::exit(0);
        }
        Some(c) => c,
        None => return Err("missing command".into()),
    };
    let mut g = Globals::default();
    while let Some(arg) = args.next() {
        let mut take = |name: &str| -> Result<String, String> {
            args.next().ok_or_else(|| format!("missing value for {name}"))
        };
        match arg.as_str() {
            "--help" | "-h" => {
                print!("{USAGE}");
                std::process::exit(0);
            }
            "--config" => g.config = Some(PathBuf::from(take("--config")?)),
            "--out" => g.out = Some(PathBuf::from(take("--out")?)),
            "--seed" => {
                g.seed = Some(
                    take("--seed")?
                        .parse()
                        .map_err(|_| "--seed expects a u64".to_string())?,
                )
            }
            "--threads" => {
                g.threads = Some(
                    take("--threads")?
                        .parse()
                        .map_err(|_| "--threads expects a positive integer".to_string())?,
                )
            }
            "--emit-plot-data" => g.emit_plot_data = true,
            "--with-oracle" => g.with_oracle = true,
            other => return Err(format!("unknown argument {other:?}")),
        }
    }
    Ok((command, g))
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_)
        | Error::ModeLimit { .. }
        | Error::Domain(_)
        | Error::BinningMismatch(_)
        | Error::Parse(_) => 2,
        Error::StepTooLarge(_)
        | Error::QuadratureDiverged(_)
        | Error::NoBranch(_)
        | Error::NonStationary(_)
        | Error::TuningFailed(_) => 3,
        Error::Io(_) => 1,
    }
}

fn main() -> ExitCode {
    let (command, globals) = match parse_args() {
        Ok(v) => v,
        Err(msg) => {
            eprintln!("error: {msg}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };

    #[cfg(feature = "parallel")]
    if let Some(n) = globals.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: could not size the worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    #[cfg(not(feature = "parallel"))]
    if globals.threads.is_some() {
        eprintln!("note: built without the parallel feature; --threads is ignored");
    }

    let Some(config_path) = globals.config.as_deref() else {
        eprintln!("error: --config PATH is required\n\n{USAGE}");
        return ExitCode::from(2);
    };
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match Config::parse(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };

    let result = match command.as_str() {
        "describe" => commands::cmd_describe(cfg, &globals),
        "simulate" => commands::cmd_simulate(cfg, &globals),
        "meanfield" => commands::cmd_meanfield(cfg, &globals),
        "scan" => commands::cmd_scan(cfg, &globals),
        "infrared" => commands::cmd_infrared(cfg, &globals),
        other => {
            eprintln!("error: unknown command {other:?}\n\n{USAGE}");
            return ExitCode::from(2);
        }
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
