//! Library side of the workbench CLI: configuration, the one-shot study
//! pipeline, and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod output;
pub mod study;

pub use config::StudyConfig;
pub use study::{run_study, StudySummary};

/// Environment variable that overrides the configured output directory.
pub const OUTPUT_DIR_ENV: &str = "AIRSERIES_OUTPUT_DIR";

/// CLI failures carrying their process exit code: 2 for configuration
/// problems, 3 for data/schema problems, 4 when every candidate of a
/// requested model family failed.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    AllCandidatesFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::AllCandidatesFailed(_) => 4,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::AllCandidatesFailed(m) => m,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.message())
    }
}

impl std::error::Error for CliError {}
