use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loopfield::config::ExperimentConfig;
use loopfield::experiments::{run, selftest};
use loopfield::fixtures::{emit, FIXTURE_KINDS};

#[derive(Parser)]
#[command(name = "loopfield", version, about = "Master loop equation checks for 2D lattice Yang-Mills")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        /// Write the CSV/JSON reports into this directory instead.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a fixture file (loop-ops, graphs or char-tables).
    Fixtures {
        kind: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run the exact-backend experiments from the bundled configs.
    Selftest,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{e}");
                    return code(e.exit_code());
                }
            };
            if let Some(dir) = out {
                cfg.redirect_outputs(&dir);
            }
            match run(&cfg) {
                Ok(o) => {
                    for c in &o.clauses {
                        println!("{}", c.line());
                    }
                    println!("{} finished in {:.2} s", o.experiment, o.seconds);
                    code(if o.passed() { 0 } else { 1 })
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Fixtures { kind, out } => {
            if !FIXTURE_KINDS.contains(&kind.as_str()) {
                eprintln!("unknown fixture kind `{kind}`; expected one of {FIXTURE_KINDS:?}");
                return code(2);
            }
            match emit(&kind, &out) {
                Ok(p) => {
                    println!("{}", p.display());
                    code(0)
                }
                Err(e) => {
                    eprintln!("{e}");
                    code(e.exit_code())
                }
            }
        }
        Command::Selftest => match selftest() {
            Ok(outcomes) => {
                let mut ok = true;
                for o in &outcomes {
                    for c in &o.clauses {
                        println!("{}", c.line());
                    }
                    ok &= o.passed();
                }
                code(if ok { 0 } else { 1 })
            }
            Err(e) => {
                eprintln!("{e}");
                code(e.exit_code())
            }
        },
    }
}
