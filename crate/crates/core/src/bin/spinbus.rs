use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use spinbus::config::{load_config, run};

/// Runs one experiment file and writes its artifacts.
#[derive(Parser, Debug)]
#[command(name = "spinbus", version)]
struct Cli {
    /// Experiment TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to all cores. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides the seed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let result = pool.install(|| {
        let config = load_config(&cli.config)?.with_seed(cli.seed);
        run(&config, &cli.out, cli.verbose)
    });
    match result {
        Ok(summary) => {
            println!("{}", summary.line);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
