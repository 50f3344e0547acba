//! `halfplane`: command-line front end to the half-plane calculus.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CliError;

#[derive(Debug, Parser)]
#[command(name = "halfplane", version, about = "Affine time-frequency calculus on the half-plane")]
struct Cli {
    /// JSON run configuration; its values override the flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run on one thread (the reference path).
    #[arg(long, global = true)]
    serial: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Affine Wigner distribution of a signal.
    Wigner(commands::WignerArgs),
    /// Symbol of an operator kernel.
    Symbol(commands::SymbolArgs),
    /// Operator kernel of a symbol.
    Kernel(commands::KernelArgs),
    /// Star product of two symbols.
    Star(commands::StarArgs),
    /// Hamiltonian flow of a signal, compared with the transported distribution.
    Flow(commands::FlowArgs),
    /// Symbols and Wigner functions of the G_k family.
    Gk(commands::GkArgs),
    /// Run the acceptance checks.
    Selftest(commands::SelftestArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let g = commands::Globals { config: cli.config, serial: cli.serial, threads: cli.threads };
    let res = match &cli.command {
        Command::Wigner(a) => commands::run("wigner", a, &g, commands::wigner),
        Command::Symbol(a) => commands::run("symbol", a, &g, commands::symbol),
        Command::Kernel(a) => commands::run("kernel", a, &g, commands::kernel),
        Command::Star(a) => commands::run("star", a, &g, commands::star),
        Command::Flow(a) => commands::run("flow", a, &g, commands::flow),
        Command::Gk(a) => commands::run("gk", a, &g, commands::gk),
        Command::Selftest(a) => commands::run("selftest", a, &g, commands::selftest),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("halfplane: {e}");
            match e {
                CliError::Failed(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
