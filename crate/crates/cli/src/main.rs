//! `polyagg` command-line tool.

mod commands;
mod manifest;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{AgglomerateArgs, BenchArgs, GenerateArgs, TrainArgs};

#[derive(Parser, Debug)]
#[command(name = "polyagg", version, about = "Agglomerate tetrahedral meshes into polyhedral meshes")]
struct Cli {
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a bisection network on a directory of meshes.
    Train(TrainArgs),
    /// Agglomerate one mesh.
    Agglomerate(AgglomerateArgs),
    /// Time single bisection calls.
    Bench(BenchArgs),
    /// Write synthetic cube meshes.
    Generate(GenerateArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();

    let exec = match cli.threads {
        Some(1) => polyagg::Exec::Sequential,
        Some(n) => {
            if let Err(e) = polyagg::par::set_threads(n) {
                eprintln!("error: {e}");
                return ExitCode::from(commands::EXIT_USAGE);
            }
            polyagg::Exec::default()
        }
        None => polyagg::Exec::default(),
    };
    let ctx = commands::Context { exec, threads: cli.threads };
    let result = match cli.command {
        Command::Train(a) => commands::train(a, &ctx),
        Command::Agglomerate(a) => commands::agglomerate(a, &ctx),
        Command::Bench(a) => commands::bench(a, &ctx),
        Command::Generate(a) => commands::generate(a, &ctx),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
