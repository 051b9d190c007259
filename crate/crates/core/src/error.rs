use thiserror::Error;

/// Errors shared across the library. Input and configuration problems are kept
/// distinct from property violations: the latter are reported through the
/// report types, never through this enum.
#[derive(Debug, Error)]
pub enum Error {
    #[error("circuit parse error at line {line}: {msg}")]
    CircuitParse { line: usize, msg: String },

    #[error("invalid dyadic literal {0:?}: expected `num/2^exp` or a plain integer")]
    DyadicParse(String),

    #[error("majority is undefined: the circuit accepts exactly half of all assignments")]
    TieNotAllowed,

    #[error("the sampled oracle round needs a strict majority of inner decisions, got a tie")]
    OuterTie,

    #[error("enumeration size {needed} exceeds the configured bound {bound}")]
    BoundExceeded { needed: u128, bound: u128 },

    #[error("a message or randomness width of {bits} bits is not supported (max 63)")]
    WidthOverflow { bits: u32 },

    #[error("reward {value} for {context} lies outside [0, 1]")]
    RewardOutOfRange { context: String, value: String },

    #[error("reward {value} for {context} is not a multiple of 2^-{resolution_bits}")]
    RewardOffGrid {
        context: String,
        value: String,
        resolution_bits: u32,
    },

    #[error("protocol shape error: {0}")]
    MalformedSpec(String),

    #[error("transcript is not well formed: {0}")]
    MalformedTranscript(String),

    #[error("no randomness is consistent with the observed responses: {0}")]
    InconsistentTranscript(String),

    #[error("exact value has a non-dyadic denominator ({0}); the model cannot represent it")]
    NonDyadicValue(String),

    #[error("a gap value is required but the protocol has no suboptimal message anywhere")]
    NoGap,

    #[error("a declared gap is required for {0} but none is available")]
    MissingDelta(String),

    #[error("split round {round} is out of range for a {rounds}-round protocol")]
    InvalidSplit { round: usize, rounds: usize },

    #[error("corpus format error at line {line}: {msg}")]
    CorpusFormat { line: usize, msg: String },

    #[error("recorded truth for instance {index} disagrees with recount: {msg}")]
    TruthMismatch { index: usize, msg: String },

    #[error("report error: {0}")]
    Report(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
