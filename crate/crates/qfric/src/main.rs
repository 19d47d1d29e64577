use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "qfric", about = "Quantum friction simulator: Lindblad dynamics of translationally invariant dissipators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Output directory; overrides `output_dir` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
    /// Print the tool version.
    Version,
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Version => {
            println!("qfric {}", qfric::VERSION);
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match qfric::load(&config).and_then(|(cfg, _)| qfric::validate(&cfg)) {
            Ok(()) => {
                println!("{}: ok", config.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{e}");
                code(e.exit_code())
            }
        },
        Command::Run { config, out } => match qfric::run_file(&config, out.as_deref()) {
            Ok(report) => {
                for f in &report.manifest.flags {
                    eprintln!("flag: {f}");
                }
                if let Some(e) = &report.failure {
                    eprintln!("{e}");
                }
                println!("wrote {}", report.output_dir.display());
                code(report.exit_code())
            }
            Err(e) => {
                eprintln!("{e}");
                code(e.exit_code())
            }
        },
    }
}
