use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use nslab::cli::{cmd_explore, cmd_replay, cmd_run, Options};
use nslab::scenario::Level;
use nslab::SpecId;

#[derive(Parser)]
#[command(
    name = "nslab",
    version,
    about = "Run, search and replay Needham-Schroeder(-Lowe) scenarios"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a scripted scenario and check its properties.
    Run {
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Search all interleavings within the scenario's bounds.
    Explore {
        scenario: PathBuf,
        #[command(flatten)]
        flags: Flags,
        /// Worker threads for the search.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Re-execute a trace and verify it.
    Replay { trace: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecArg {
    PostNs,
    NslFt,
    Inv,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Abstract,
    Concrete,
}

#[derive(clap::Args)]
struct Flags {
    /// Property to check; repeatable. Defaults to the scenario's `spec` line.
    #[arg(long = "spec", value_enum)]
    specs: Vec<SpecArg>,
    #[arg(long, value_enum)]
    level: Option<LevelArg>,
    #[arg(long)]
    trace_out: Option<PathBuf>,
    /// Omit ghost fields from the written trace.
    #[arg(long)]
    no_ghost: bool,
    #[arg(long)]
    max_steps: Option<usize>,
}

impl Flags {
    fn options(self, workers: usize) -> Options {
        let mut specs = Vec::new();
        for s in self.specs {
            let ids: &[SpecId] = match s {
                SpecArg::PostNs => &[SpecId::PostNs],
                SpecArg::NslFt => &[SpecId::NslFt],
                SpecArg::Inv => &[SpecId::Inv],
                SpecArg::All => &SpecId::ALL,
            };
            for id in ids {
                if !specs.contains(id) {
                    specs.push(*id);
                }
            }
        }
        Options {
            specs,
            level: self.level.map(|l| match l {
                LevelArg::Abstract => Level::Abstract,
                LevelArg::Concrete => Level::Concrete,
            }),
            trace_out: self.trace_out,
            no_ghost: self.no_ghost,
            max_steps: self.max_steps,
            workers,
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let mut out = std::io::stdout();
    let code = match cli.cmd {
        Cmd::Run { scenario, flags } => cmd_run(&scenario, &flags.options(1), &mut out),
        Cmd::Explore {
            scenario,
            flags,
            workers,
        } => cmd_explore(&scenario, &flags.options(workers), &mut out),
        Cmd::Replay { trace } => cmd_replay(&trace, &mut out),
    };
    ExitCode::from(code as u8)
}
