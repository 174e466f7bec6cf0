use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use isotrack::commands;

/// Gradient-free isoline tracking: simulations, sweeps and stability checks.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scenario, write its trajectory CSV and print metrics.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// kp, ki, c1, c2, v, noise_std or initial.theta
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check gain conditions, Lyapunov certificate and error bound.
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the ultimate bound of z' = -k tanh z + b by simulation.
    Lemma {
        #[arg(long, allow_negative_numbers = true)]
        k: f64,
        #[arg(long, allow_negative_numbers = true)]
        b: f64,
        #[arg(long, allow_negative_numbers = true)]
        z0: f64,
        #[arg(long)]
        t: f64,
    },
    /// Sample a field from a config onto a grid file.
    GenField {
        #[arg(long)]
        config: PathBuf,
        /// x_min,x_max,y_min,y_max
        #[arg(long, allow_hyphen_values = true)]
        region: String,
        #[arg(long)]
        resolution: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(commands::EXIT_INPUT as u8);
        }
    };
    let (mut out, mut err) = (io::stdout().lock(), io::stderr().lock());
    let code = match cli.command {
        Command::Simulate { config, out: path } => commands::simulate(&config, &path, &mut out, &mut err),
        Command::Sweep {
            config,
            axis,
            values,
            out: path,
        } => commands::sweep(&config, &axis, &values, &path, &mut out, &mut err),
        Command::Stability { config } => commands::stability(&config, &mut out, &mut err),
        Command::Lemma { k, b, z0, t } => commands::lemma(k, b, z0, t, &mut out, &mut err),
        Command::GenField {
            config,
            region,
            resolution,
            out: path,
        } => commands::gen_field(&config, &region, resolution, &path, &mut out, &mut err),
    };
    ExitCode::from(code as u8)
}
