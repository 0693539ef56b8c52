use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything the solvers can reject.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("player index {index} out of range for a {num_players}-player game")]
    PlayerIndex { index: usize, num_players: usize },

    #[error("strategy index {index} out of range for player {player} ({available} strategies)")]
    StrategyIndex {
        player: usize,
        index: usize,
        available: usize,
    },

    #[error("invalid {field}: {reason}")]
    Invalid { field: String, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("packet length L = {packet_bits} has no interior optimal SINR (need L >= 2)")]
    DegenerateOptimalSinr { packet_bits: u32 },

    #[error("operation supports {expected} players, model has {found}")]
    UnsupportedDimension { expected: usize, found: usize },

    #[error("no sampled profile lies in the improvement region of the disagreement point")]
    EmptyImprovementRegion,

    #[error(
        "cooperation is not individually rational for player {player}: \
         cooperative utility {cooperate} <= punishment utility {punish}"
    )]
    NotIndividuallyRational { player: usize, cooperate: f64, punish: f64 },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
