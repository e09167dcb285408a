//! Pulse-sequence language: parsing, printing and compilation to schedules.

mod compile;
pub(crate) mod expr;
mod sequence;

use thiserror::Error;

pub use compile::{compile, Action, DriveTerm, Frame, OperatorId, Schedule, Segment, Source};
pub use expr::eval_expr;
pub use sequence::{parse, Channel, EventKind, PulseEvent, PulseSequence, SequenceParser};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DslError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{line}:{col}: undefined parameter `{name}`")]
    UndefinedParameter { name: String, line: usize, col: usize },
    #[error("line {line}: {msg}")]
    Validation { line: usize, msg: String },
    #[error("events {first} and {second} overlap on the {channel:?} channel")]
    ChannelOverlap { first: usize, second: usize, channel: Channel },
    #[error("RF event {rf} overlaps the instantaneous DD pulse {dd}")]
    RfOverlapsDd { rf: usize, dd: usize },
    #[error("events {first} and {second} overlap on a shared timeline")]
    TimelineOverlap { first: usize, second: usize },
    #[error("MW event {event} at {freq} MHz does not match the frame carrier {carrier} MHz")]
    CarrierMismatch { event: usize, freq: f64, carrier: f64 },
    #[error("unknown frame `{0}` (expected `lab` or `rotating`)")]
    UnknownFrame(String),
}
