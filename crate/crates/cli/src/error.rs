use std::fmt;

use framesim::SimError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Sim(SimError),
    Io(std::io::Error),
}

impl CliError {
    /// Simulation errors caused by bad input count as config errors.
    pub fn from_config(e: SimError) -> Self {
        match e {
            SimError::Config(m) => CliError::Config(m),
            other => CliError::Sim(other),
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Sim(SimError::Config(_)) => 2,
            CliError::Sim(e) if e.is_numerical() => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Sim(e) if e.is_numerical() => write!(f, "numerical guard: {e}"),
            CliError::Sim(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use framesim::fockops::FactorKind;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(SimError::Config("x".into())).exit_code(), 2);
        let leak = SimError::Leakage { time: 0.0, factor: FactorKind::Cavity, occupation: 1.0, limit: 0.1 };
        assert_eq!(CliError::from(leak).exit_code(), 3);
        assert_eq!(CliError::from(SimError::Precondition("p".into())).exit_code(), 1);
    }
}
