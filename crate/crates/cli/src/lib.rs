//! Command-line front end for `smearing-core`.
//!
//! Every command resolves its arguments into a [`RunConfig`], echoes that
//! config into the artifact it writes, and can be replayed from the artifact
//! with `smearing rerun`.

pub mod commands;
pub mod config;
pub mod error;

pub use config::{Cli, Command, RunConfig};
pub use error::CliError;

/// Process exit status for a finished command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Success, or a confident attack verdict.
    Done,
    /// The attack flagged more than one guess.
    Inconclusive,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Self::Done => 0,
            Self::Inconclusive => 2,
        }
    }
}

/// Exit status for usage, configuration and input errors.
pub const EXIT_USAGE: i32 = 1;

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Prob(a) => commands::run_config(RunConfig::Prob(a)),
        Command::Mapdist(a) => commands::run_config(RunConfig::Mapdist(a)),
        Command::Attack(a) => commands::run_config(RunConfig::Attack(a)),
        Command::Params(a) => commands::run_config(RunConfig::Params(a)),
        Command::Rerun(r) => {
            let text = commands::read_text(&r.config)?;
            let mut config = RunConfig::from_artifact_text(&text)?;
            config.output_mut().out = r.out;
            commands::run_config(config)
        }
    }
}
