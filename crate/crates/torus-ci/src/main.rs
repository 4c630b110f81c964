use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use torus_ci::cli::{execute, exit_code, Overrides};

#[derive(Parser)]
#[command(name = "torus-ci", version, about = "Convex-integration laboratory on the 2D torus")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the command named in a config file.
    Run {
        config: PathBuf,
        /// Output directory for report.json, CSV tables and field dumps.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides `run.seed`.
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated times at which to dump fields.
        #[arg(long, value_delimiter = ',')]
        dump_fields: Option<Vec<f64>>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Cmd::Run { config, out, seed, dump_fields } = cli.cmd;
    let text = match std::fs::read_to_string(&config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config.display());
            return ExitCode::from(2);
        }
    };
    let result = execute(&text, &Overrides { seed, dump_times: dump_fields }).and_then(|o| o.write(&out).map(|_| o));
    match result {
        Ok(o) => {
            print!("{}", o.summary);
            if o.passed() {
                println!("{}: all assertions passed", o.command);
                ExitCode::SUCCESS
            } else {
                let failed = o.assertions.iter().filter(|a| !a.pass).count();
                println!("{}: {failed} assertion(s) failed", o.command);
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {}: {e}", config.display());
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
