use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use toda_cli::{run, Mode, RunConfig};

#[derive(Parser)]
#[command(name = "toda", version, about = "Minimise the SU(3) Toda functional on the unit torus")]
struct Args {
    #[arg(value_enum)]
    verb: Mode,
    /// TOML run configuration
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (default: `out` from the config, else ./out)
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// grid size N, a power of two in [32, 512]
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => match RunConfig::load(p) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(e.exit_code() as u8);
            }
        },
        None => RunConfig::default(),
    };
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.grid {
        cfg.grid = n;
    }
    let out = args.out.or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match run(args.verb, &cfg, &out, args.quiet) {
        Ok(o) => {
            if !args.quiet {
                eprintln!("{} -> {}", o.summary["status"], out.join("summary.json").display());
            }
            ExitCode::from(o.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
