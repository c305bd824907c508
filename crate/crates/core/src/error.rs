use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid box ({x}, {y}, {w}, {h}): width and height must be positive and finite")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },

    #[error("tracklet must contain at least one box")]
    EmptyTracklet,

    #[error("tracklets end at different frames ({0} vs {1})")]
    FrameMismatch(usize, usize),

    #[error("frame {frame} is outside the sequence (length {len})")]
    FrameOutOfRange { frame: usize, len: usize },

    #[error("frame list is empty")]
    EmptyFrames,

    #[error("frame list is not a run of consecutive indices")]
    NonConsecutiveFrames,

    #[error("candidate list is empty")]
    NoCandidates,

    #[error("candidate boxes and scores differ in length ({boxes} vs {scores})")]
    MisalignedScores { boxes: usize, scores: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("candidate index {index} out of range for pool of {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("expected frame {expected}, got {got}")]
    UnexpectedFrame { expected: usize, got: usize },

    #[error("no viable candidate for the target")]
    NoViableCandidate,
}

pub type Result<T> = std::result::Result<T, Error>;
