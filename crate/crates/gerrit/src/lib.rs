//! Mining review comments from a Gerrit server.
//!
//! [`GerritClient`] pages through `/changes/`, then flattens each change's
//! inline comments and change messages into [`ReviewComment`] records
//! ready for human labeling. All HTTP goes through a [`Transport`], so the
//! same code runs against a live server or canned fixtures.

mod client;
mod transport;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use chrono::NaiveDate;
use ersn_core::corpus::ReviewComment;
use thiserror::Error;

pub use client::{ChangeRecord, FetchEvent, GerritClient, RetryPolicy};
pub use transport::{FixtureTransport, HttpRequest, HttpResponse, Transport, UreqTransport};

#[derive(Debug, Error)]
pub enum GerritError {
    #[error("response is not valid UTF-8: {0}")]
    Decode(#[from] std::string::FromUtf8Error),

    #[error("authentication required ({status}) for {url}")]
    Auth { status: u16, url: String },

    #[error("HTTP {status} from {url}")]
    Status { status: u16, url: String },

    #[error("request to {url} failed: {message}")]
    Transport { url: String, message: String },

    #[error("malformed JSON from {url}: {source}")]
    Parse {
        url: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl GerritError {
    /// HTTP status carried by the error, if any.
    pub fn status(&self) -> Option<u16> {
        match self {
            GerritError::Auth { status, .. } | GerritError::Status { status, .. } => Some(*status),
            _ => None,
        }
    }
}

pub type Result<T, E = GerritError> = std::result::Result<T, E>;

const XSSI_PREFIX: &[u8] = b")]}'";

/// Removes Gerrit's `)]}'` guard line, if present, and decodes the rest.
pub fn strip_xssi_prefix(body: &[u8]) -> Result<String> {
    let rest = match body.strip_prefix(XSSI_PREFIX) {
        Some(r) => r
            .strip_prefix(b"\r\n")
            .or_else(|| r.strip_prefix(b"\n"))
            .unwrap_or(r),
        None => body,
    };
    Ok(String::from_utf8(rest.to_vec())?)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credentials {
    pub username: String,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GerritEndpoint {
    base_url: url::Url,
    pub credentials: Option<Credentials>,
    pub page_size: usize,
    pub request_timeout: Duration,
}

impl GerritEndpoint {
    pub fn new(base_url: &str) -> Result<Self> {
        let mut parsed = url::Url::parse(base_url)
            .map_err(|e| GerritError::InvalidArgument(format!("base URL {base_url:?}: {e}")))?;
        if !matches!(parsed.scheme(), "http" | "https") || parsed.cannot_be_a_base() {
            return Err(GerritError::InvalidArgument(format!(
                "base URL must be absolute http(s), got {base_url:?}"
            )));
        }
        if !parsed.path().ends_with('/') {
            let p = format!("{}/", parsed.path());
            parsed.set_path(&p);
        }
        Ok(GerritEndpoint {
            base_url: parsed,
            credentials: None,
            page_size: 100,
            request_timeout: Duration::from_secs(30),
        })
    }

    pub fn with_credentials(mut self, username: impl Into<String>, token: impl Into<String>) -> Self {
        self.credentials = Some(Credentials {
            username: username.into(),
            token: token.into(),
        });
        self
    }

    /// Base URL without the trailing slash, as used in comment links.
    pub fn base_url(&self) -> &str {
        self.base_url.as_str().trim_end_matches('/')
    }

    /// REST URL for `path` (no leading slash). Authenticated calls go
    /// through the `/a/` prefix.
    pub fn api_url(&self, path: &str) -> String {
        let prefix = if self.credentials.is_some() { "a/" } else { "" };
        format!("{}{prefix}{path}", self.base_url.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChangeStatus {
    #[default]
    Merged,
    Abandoned,
    Open,
    Any,
}

impl FromStr for ChangeStatus {
    type Err = GerritError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "merged" => Ok(ChangeStatus::Merged),
            "abandoned" => Ok(ChangeStatus::Abandoned),
            "open" => Ok(ChangeStatus::Open),
            "any" => Ok(ChangeStatus::Any),
            other => Err(GerritError::InvalidArgument(format!("unknown change status {other:?}"))),
        }
    }
}

impl fmt::Display for ChangeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChangeStatus::Merged => "merged",
            ChangeStatus::Abandoned => "abandoned",
            ChangeStatus::Open => "open",
            ChangeStatus::Any => "any",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChangeQuery {
    pub project: String,
    pub after: NaiveDate,
    pub before: NaiveDate,
    pub status: ChangeStatus,
}

impl ChangeQuery {
    pub fn new(project: impl Into<String>, after: NaiveDate, before: NaiveDate, status: ChangeStatus) -> Result<Self> {
        let project = project.into();
        if project.is_empty() {
            return Err(GerritError::InvalidArgument("project must not be empty".into()));
        }
        if after > before {
            return Err(GerritError::InvalidArgument(format!("after {after} is later than before {before}")));
        }
        Ok(ChangeQuery {
            project,
            after,
            before,
            status,
        })
    }

    /// Parses `YYYY-MM-DD` dates.
    pub fn parse(project: &str, after: &str, before: &str, status: ChangeStatus) -> Result<Self> {
        let date = |s: &str| {
            NaiveDate::parse_from_str(s, "%Y-%m-%d")
                .map_err(|e| GerritError::InvalidArgument(format!("date {s:?}: {e}")))
        };
        ChangeQuery::new(project, date(after)?, date(before)?, status)
    }

    /// The `q=` search expression.
    pub fn search(&self) -> String {
        let mut q = format!("project:{} after:{} before:{}", self.project, self.after, self.before);
        if self.status != ChangeStatus::Any {
            q.push_str(&format!(" status:{}", self.status));
        }
        q
    }
}

/// Lowercase search terms, matched as substrings of the raw message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeywordSet {
    terms: Vec<String>,
}

impl KeywordSet {
    pub fn new<I, S>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out: Vec<String> = Vec::new();
        for t in terms {
            let t = t.as_ref().trim().to_lowercase();
            if t.is_empty() {
                return Err(GerritError::InvalidArgument("empty keyword".into()));
            }
            if out.contains(&t) {
                return Err(GerritError::InvalidArgument(format!("duplicate keyword {t:?}")));
            }
            out.push(t);
        }
        if out.is_empty() {
            return Err(GerritError::InvalidArgument("keyword set is empty".into()));
        }
        Ok(KeywordSet { terms: out })
    }

    /// One term per line; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        KeywordSet::new(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#')),
        )
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn matches(&self, message: &str) -> bool {
        let lower = message.to_lowercase();
        self.terms.iter().any(|t| lower.contains(t.as_str()))
    }
}

/// Keeps the comments mentioning any keyword, in their original order.
pub fn filter_by_keywords(comments: &[ReviewComment], kw: &KeywordSet) -> Vec<ReviewComment> {
    comments.iter().filter(|c| kw.matches(&c.message)).cloned().collect()
}
