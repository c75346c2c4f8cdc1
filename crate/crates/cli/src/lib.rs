//! Configuration, execution and artifact emission for the `sasaki` binary.

pub mod config;
pub mod emit;
pub mod runner;

pub use config::{parse_config, Command, RunConfig};
pub use runner::execute;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] sasaki_core::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for numerical failures, 3 for configuration problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 3);
        assert_eq!(
            CliError::from(sasaki_core::Error::Integration("x".into())).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(sasaki_core::Error::FocalRange { t: 1.0 }).exit_code(),
            2
        );
        assert_eq!(
            CliError::from(sasaki_core::Error::Argument("x".into())).exit_code(),
            3
        );
    }
}
