use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use secantlab::config::Config;
use secantlab::runner::{run, RunOptions, WORKERS_ENV};
use secantlab::{catalog, RunReport};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "secantlab", version, about = "Asymptotics of analytic gradient flows")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the scenarios of a configuration file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Suppress the per-analysis summary.
        #[arg(long, short)]
        quiet: bool,
    },
    /// Show the built-in scenarios.
    Catalog {
        #[arg(long)]
        list: bool,
        /// Print the catalog as a configuration file instead.
        #[arg(long)]
        json: bool,
    },
    /// Pretty-print the report of a previous run.
    Report { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(match cli.cmd {
        Cmd::Run {
            config,
            out,
            workers,
            seed,
            quiet,
        } => {
            let cfg = match Config::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            let opts = RunOptions {
                workers,
                seed,
                out_dir: Some(out),
            };
            match run(&cfg, &opts) {
                Ok(rep) => {
                    if !quiet {
                        print!("{}", rep.render());
                    }
                    if rep.passed() {
                        EXIT_PASS
                    } else {
                        EXIT_FAIL
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    EXIT_FAIL
                }
            }
        }
        Cmd::Catalog { list, json } => {
            let cat = catalog::catalog_config();
            if json {
                println!("{}", cat.to_json());
            } else if list {
                for sc in &cat.scenarios {
                    let what = sc.field.as_deref().unwrap_or("");
                    println!("{:<22} {:<10} {:<26} {}", sc.name, sc.kind.to_string(), what, sc.analyses.join(","));
                }
            } else {
                println!("{} built-in scenarios; use --list or --json", cat.scenarios.len());
            }
            EXIT_PASS
        }
        Cmd::Report { dir } => match RunReport::load(&dir) {
            Ok(rep) => {
                print!("{}", rep.render());
                if rep.passed() {
                    EXIT_PASS
                } else {
                    EXIT_FAIL
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                EXIT_CONFIG
            }
        },
    })
}
