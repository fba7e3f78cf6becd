use thiserror::Error;

/// Failures with their own exit status. Anything else exits with 1.
#[derive(Debug, Error)]
pub enum Halt {
    #[error("numerically infeasible: {0}")]
    Infeasible(String),
    #[error("protocol rejection: {0}")]
    Rejected(String),
}

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_INFEASIBLE: u8 = 2;
pub const EXIT_REJECTED: u8 = 3;

pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Halt>() {
        Some(Halt::Infeasible(_)) => EXIT_INFEASIBLE,
        Some(Halt::Rejected(_)) => EXIT_REJECTED,
        None => EXIT_USAGE,
    }
}
