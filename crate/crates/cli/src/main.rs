//! `visr`: run, expand, check, format and serve hybrid programs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use visr_core::interp::Fuel;
use visr_core::pipeline::{self, Budgets};
use visr_core::protocol::{self, ServerOptions};
use visr_core::session::SessionConfig;
use visr_core::visr::Registry;

#[derive(Parser)]
#[command(name = "visr", version, about = "Hybrid programs with interactive syntax")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Directory searched for extension modules; may be repeated.
    #[arg(long = "path", global = true, value_name = "DIR")]
    paths: Vec<PathBuf>,
    /// Step budget for every evaluation phase (overrides VISR_FUEL).
    #[arg(long, global = true, value_name = "STEPS")]
    fuel: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Elaborate and evaluate a program, printing its output.
    Run { file: PathBuf },
    /// Print the program with every instance elaborated away.
    Expand { file: PathBuf },
    /// Report elaboration problems without running.
    Check { file: PathBuf },
    /// Print the canonical layout of a file.
    Fmt {
        file: PathBuf,
        /// Rewrite the file in place.
        #[arg(long, conflicts_with = "check")]
        write: bool,
        /// Exit with status 1 if the file is not already formatted.
        #[arg(long)]
        check: bool,
    },
    /// Speak the editor protocol.
    Serve {
        /// Use stdin and stdout.
        #[arg(long, conflicts_with = "listen", required_unless_present = "listen")]
        stdio: bool,
        /// Accept TCP connections on this address.
        #[arg(long, value_name = "ADDR")]
        listen: Option<String>,
    },
}

impl Global {
    fn paths(&self) -> Vec<PathBuf> {
        if self.paths.is_empty() {
            vec![PathBuf::from(".")]
        } else {
            self.paths.clone()
        }
    }

    fn registry(&self) -> Registry {
        Registry::with_paths(self.paths())
    }

    fn budgets(&self) -> Budgets {
        match self.fuel {
            Some(n) => Budgets::uniform(Fuel::new(n)),
            None => Budgets::default(),
        }
    }

    fn session_config(&self) -> SessionConfig {
        match self.fuel {
            Some(n) => SessionConfig::uniform(Fuel::new(n)),
            None => SessionConfig::default(),
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn execute(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Run { file } => {
            let text = read(file)?;
            match pipeline::run(&text, &mut g.registry(), g.budgets()) {
                Ok(out) => {
                    print!("{}", out.output);
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    if let pipeline::PipelineError::Runtime { output, .. } = &e {
                        print!("{output}");
                    }
                    eprintln!("{}:{}", file.display(), e.located(&text));
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Expand { file } => {
            let text = read(file)?;
            match pipeline::expand(&text, &mut g.registry(), g.budgets()) {
                Ok(out) => {
                    print!("{out}");
                    Ok(ExitCode::SUCCESS)
                }
                Err(e) => {
                    eprintln!("{}:{}", file.display(), e.located(&text));
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::Check { file } => {
            let text = read(file)?;
            let errors = pipeline::check(&text, &mut g.registry(), g.budgets());
            for e in &errors {
                eprintln!("{}:{}", file.display(), e.located(&text));
            }
            Ok(if errors.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Fmt { file, write, check } => {
            let text = read(file)?;
            let formatted = match pipeline::format(&text) {
                Ok(f) => f,
                Err(e) => {
                    eprintln!("{}:{}", file.display(), e.located(&text));
                    return Ok(ExitCode::FAILURE);
                }
            };
            if *check {
                if formatted != text {
                    eprintln!("{} is not formatted", file.display());
                    return Ok(ExitCode::FAILURE);
                }
            } else if *write {
                if formatted != text {
                    std::fs::write(file, &formatted).with_context(|| format!("cannot write {}", file.display()))?;
                }
            } else {
                print!("{formatted}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { stdio, listen } => {
            let options = ServerOptions { paths: g.paths(), config: g.session_config() };
            if *stdio {
                protocol::serve_stdio(options)?;
            } else if let Some(addr) = listen {
                let listener = std::net::TcpListener::bind(addr).with_context(|| format!("cannot listen on {addr}"))?;
                eprintln!("listening on {}", listener.local_addr()?);
                protocol::serve_listener(listener, options)?;
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors.
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
