use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use phasesim::config::{parse_config, parse_grid, RunConfig};
use phasesim::runner::{budget, compare_csv, run_to_csv, sweep, sweep_csv, write_file, Mode};
use phasesim::{Error, Result};

#[derive(Parser)]
#[command(name = "phasesim", version, about = "Phase-space trajectory simulation of k-local TFIM dynamics")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "PHASESIM_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RunMode {
    Psa,
    Mf,
    Exact,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration and write the observable CSV.
    Run {
        #[arg(long, value_enum)]
        mode: RunMode,
        #[arg(long)]
        config: PathBuf,
        /// Output file; overrides `output.path`, stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides `ensemble.master_seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Significant digits in the CSV; overrides `output.precision`.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=17))]
        precision: Option<u8>,
    },
    /// Deviation table over a grid of k, eta and initial states.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Significant digits in the CSV; overrides `output.precision`.
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=17))]
        precision: Option<u8>,
    },
    /// Per-column deviations between two observable CSV files.
    Compare { a: PathBuf, b: PathBuf },
    /// Largest MPS bond dimension and entropy for a memory of 2^m complex numbers.
    Budget {
        #[arg(long)]
        m: u32,
        #[arg(long = "L")]
        sites: u64,
        #[arg(long, default_value_t = 2)]
        d: u64,
    },
}

fn read(path: &PathBuf) -> Result<String> {
    std::fs::read_to_string(path).map_err(Error::Io)
}

fn load_config(path: &PathBuf) -> Result<RunConfig> {
    parse_config(&read(path)?)
}

fn emit(text: &str, out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_file(&p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            mode,
            config,
            out,
            seed,
            precision,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.ensemble.master_seed = s;
            }
            if let Some(p) = precision {
                cfg.output.precision = p.into();
            }
            let mode = match mode {
                RunMode::Psa => Mode::Psa,
                RunMode::Mf => Mode::Mf,
                RunMode::Exact => Mode::Exact,
            };
            let csv = run_to_csv(mode, &cfg)?;
            emit(&csv, out.or(cfg.output.path.map(PathBuf::from)))
        }
        Command::Sweep {
            config,
            grid,
            out,
            precision,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(p) = precision {
                cfg.output.precision = p.into();
            }
            let grid = parse_grid(&read(&grid)?, &cfg)?;
            let rows = sweep(&cfg, &grid);
            for r in rows.iter().filter(|r| r.status.starts_with("error")) {
                log::warn!("k={:?} eta={} {}: {}", r.k, r.eta, r.initial_state, r.status);
            }
            emit(&sweep_csv(&rows, cfg.output.precision)?, out)
        }
        Command::Compare { a, b } => {
            let cmp = compare_csv(&read(&a)?, &read(&b)?)?;
            for name in &cmp.unmatched {
                log::warn!("column {name} appears in only one file");
            }
            print!("{}", cmp.render());
            Ok(())
        }
        Command::Budget { m, sites, d } => {
            let b = budget(m, sites, d)?;
            println!("chi_max={}", b.chi_max);
            println!("s_max={}", b.s_max);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("phasesim: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Config(errs) => {
                    eprintln!("phasesim: invalid configuration");
                    for fe in errs {
                        eprintln!("  {fe}");
                    }
                }
                other => eprintln!("phasesim: {other}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
