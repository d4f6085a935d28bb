//! Identifier newtypes and the discrete time axis.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// A discrete tick on the time axis. Written `tN` in scenario files.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct TimePoint(pub u64);

impl TimePoint {
    pub const ZERO: TimePoint = TimePoint(0);

    pub fn ordinal(self) -> u64 {
        self.0
    }

    pub fn next(self) -> TimePoint {
        TimePoint(self.0.saturating_add(1))
    }
}

impl fmt::Display for TimePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid time point `{0}`: expected `tN` with N a non-negative integer")]
pub struct ParseTimeError(pub String);

impl FromStr for TimePoint {
    type Err = ParseTimeError;

    /// Accepts `t12` and, for convenience on the command line, bare `12`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let digits = s.strip_prefix('t').unwrap_or(s);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ParseTimeError(s.to_owned()));
        }
        digits
            .parse()
            .map(TimePoint)
            .map_err(|_| ParseTimeError(s.to_owned()))
    }
}

macro_rules! name_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(s: impl Into<String>) -> Self {
                $name(s.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(s)
            }
        }
    };
}

name_type!(
    /// Name of a declared quantity kind or object kind.
    KindName
);
name_type!(
    /// Identifier of an object (a potential granule).
    ObjectId
);
name_type!(
    /// Identifier of a quantity (portion of matter).
    QuantityId
);
name_type!(
    /// Identifier of an event in the log.
    EventId
);
