//! Exit codes: 0 success, 2 usage, 3 refusal, 4 data error, 5 internal.

use std::fmt;

pub const USAGE: i32 = 2;
pub const REFUSAL: i32 = 3;
pub const DATA: i32 = 4;
pub const INTERNAL: i32 = 5;

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Coded {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Coded {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Coded {}

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Coded {
        code: USAGE,
        message: message.into(),
    }
    .into()
}

pub fn refusal(message: impl Into<String>) -> anyhow::Error {
    Coded {
        code: REFUSAL,
        message: message.into(),
    }
    .into()
}

fn core_code(e: &ersn_core::Error) -> i32 {
    use ersn_core::Error as E;
    match e {
        E::Context { source, .. } => core_code(source),
        E::InvalidArgument(_) => USAGE,
        _ => DATA,
    }
}

/// Exit code for an error chain: the first recognised cause decides.
pub fn code_of(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Coded>() {
            return c.code;
        }
        if let Some(e) = cause.downcast_ref::<ersn_core::Error>() {
            return core_code(e);
        }
        if let Some(e) = cause.downcast_ref::<ersn_gerrit::GerritError>() {
            return match e {
                ersn_gerrit::GerritError::InvalidArgument(_) => USAGE,
                _ => DATA,
            };
        }
        if cause.is::<toml::de::Error>() {
            return USAGE;
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return DATA;
        }
    }
    INTERNAL
}
