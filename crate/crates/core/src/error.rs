use alloc::string::String;
use core::fmt;

/// Errors raised by spec validation, profile construction, and optimization.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A field of a hardware or layer spec violates its invariant.
    InvalidField {
        field: &'static str,
        message: String,
    },
    /// A width sweep request is malformed (empty, non-increasing, or over the cap).
    InvalidWidths(String),
    /// An operation parameter is out of its documented range.
    InvalidParameter {
        name: &'static str,
        message: String,
    },
    /// A width was looked up that the profile grid does not contain.
    /// Profiles are never interpolated; the staircase makes that misleading.
    WidthNotProfiled { layer_id: String, width: u32 },
    /// No profile table matches the given layer.
    MissingTable { layer_id: String },
    /// A model config is inconsistent (duplicate ids, width over maximum, ...).
    InvalidModel(String),
    /// A profile table violates its row invariants.
    InvalidProfile(String),
    /// The exhaustive search space exceeds the configured cap.
    SearchSpaceExceeded { size: u128, cap: u128 },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidField { field, message } => {
                write!(f, "invalid field `{field}`: {message}")
            }
            Error::InvalidWidths(msg) => write!(f, "invalid width list: {msg}"),
            Error::InvalidParameter { name, message } => {
                write!(f, "invalid parameter `{name}`: {message}")
            }
            Error::WidthNotProfiled { layer_id, width } => {
                write!(f, "width {width} of layer `{layer_id}` is not in the profile grid")
            }
            Error::MissingTable { layer_id } => {
                write!(f, "no profile table for layer `{layer_id}`")
            }
            Error::InvalidModel(msg) => write!(f, "invalid model config: {msg}"),
            Error::InvalidProfile(msg) => write!(f, "invalid profile table: {msg}"),
            Error::SearchSpaceExceeded { size, cap } => {
                write!(f, "search space of {size} assignments exceeds cap {cap}")
            }
        }
    }
}

impl core::error::Error for Error {}
