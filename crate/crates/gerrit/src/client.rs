use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use chrono::NaiveDateTime;
use ersn_core::corpus::ReviewComment;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::transport::{HttpRequest, Transport};
use crate::{strip_xssi_prefix, ChangeQuery, GerritEndpoint, GerritError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt, for 429, 5xx and connection errors.
    pub max_retries: u32,
    /// Doubled after every retry.
    pub initial_backoff: Duration,
    /// Minimum spacing between consecutive requests.
    pub min_interval: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            initial_backoff: Duration::from_millis(500),
            min_interval: Duration::from_millis(100),
        }
    }
}

impl RetryPolicy {
    /// No waiting at all, for fixture replay.
    pub fn immediate() -> Self {
        RetryPolicy {
            initial_backoff: Duration::ZERO,
            min_interval: Duration::ZERO,
            ..Self::default()
        }
    }
}

/// One attempted request, for the fetch log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FetchEvent {
    pub url: String,
    pub attempt: u32,
    /// Absent when the connection itself failed.
    pub status: Option<u16>,
}

/// A change as listed by the search endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRecord {
    pub id: String,
    pub project: String,
    #[serde(rename = "_number")]
    pub change_number: u64,
    #[serde(default)]
    pub current_revision: Option<String>,
    #[serde(default)]
    pub revisions: BTreeMap<String, RevisionInfo>,
    #[serde(rename = "_more_changes", default, skip_serializing)]
    more_changes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RevisionInfo {
    #[serde(rename = "_number")]
    pub patch_set: u32,
}

#[derive(Deserialize)]
struct CommentInfo {
    id: String,
    #[serde(default)]
    patch_set: Option<u32>,
    #[serde(default)]
    commit_id: Option<String>,
    #[serde(default)]
    line: Option<u32>,
    #[serde(default)]
    message: Option<String>,
    updated: String,
}

#[derive(Deserialize)]
struct MessageInfo {
    id: String,
    #[serde(default)]
    message: String,
    date: String,
    #[serde(rename = "_revision_number", default)]
    revision_number: Option<u32>,
}

pub struct GerritClient<T> {
    endpoint: GerritEndpoint,
    transport: T,
    policy: RetryPolicy,
    last_request: Mutex<Option<Instant>>,
    log: Mutex<Vec<FetchEvent>>,
}

impl<T: Transport> GerritClient<T> {
    pub fn new(endpoint: GerritEndpoint, transport: T, policy: RetryPolicy) -> Self {
        GerritClient {
            endpoint,
            transport,
            policy,
            last_request: Mutex::new(None),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn endpoint(&self) -> &GerritEndpoint {
        &self.endpoint
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    pub fn fetch_log(&self) -> Vec<FetchEvent> {
        self.log.lock().unwrap().clone()
    }

    fn throttle(&self) {
        let mut last = self.last_request.lock().unwrap();
        if let Some(t) = *last {
            let since = t.elapsed();
            if since < self.policy.min_interval {
                thread::sleep(self.policy.min_interval - since);
            }
        }
        *last = Some(Instant::now());
    }

    /// GETs `path` and decodes the JSON body, retrying transient failures.
    fn get_json<R: DeserializeOwned>(&self, path: &str) -> Result<R> {
        let req = HttpRequest {
            url: self.endpoint.api_url(path),
            credentials: self.endpoint.credentials.clone(),
        };
        let mut backoff = self.policy.initial_backoff;
        let mut attempt = 0;
        loop {
            self.throttle();
            let outcome = self.transport.get(&req);
            let status = outcome.as_ref().ok().map(|r| r.status);
            self.log.lock().unwrap().push(FetchEvent {
                url: req.url.clone(),
                attempt,
                status,
            });
            let retryable = match &outcome {
                Err(_) => true,
                Ok(r) => r.status == 429 || r.status >= 500,
            };
            if retryable && attempt < self.policy.max_retries {
                log::warn!("{} failed ({:?}); retrying in {:?}", req.url, status, backoff);
                thread::sleep(backoff);
                backoff *= 2;
                attempt += 1;
                continue;
            }
            let resp = outcome?;
            return match resp.status {
                200..=299 => {
                    let text = strip_xssi_prefix(&resp.body)?;
                    serde_json::from_str(&text).map_err(|source| GerritError::Parse {
                        url: req.url.clone(),
                        source,
                    })
                }
                401 | 403 => Err(GerritError::Auth {
                    status: resp.status,
                    url: req.url,
                }),
                status => Err(GerritError::Status { status, url: req.url }),
            };
        }
    }

    /// All changes matching `q`, following `_more_changes` page by page.
    pub fn fetch_changes(&self, q: &ChangeQuery) -> Result<Vec<ChangeRecord>> {
        let search: String = url::form_urlencoded::byte_serialize(q.search().as_bytes()).collect();
        let n = self.endpoint.page_size.max(1);
        let mut out: Vec<ChangeRecord> = Vec::new();
        loop {
            let path = format!("changes/?q={search}&n={n}&S={}&o=CURRENT_REVISION", out.len());
            let page: Vec<ChangeRecord> = self.get_json(&path)?;
            let more = page.last().is_some_and(|c| c.more_changes);
            out.extend(page);
            if !more {
                return Ok(out);
            }
        }
    }

    /// Inline comments (files in path order) followed by change messages,
    /// flattened into unlabeled records. Blank messages are dropped.
    pub fn fetch_comments(&self, change: &ChangeRecord) -> Result<Vec<ReviewComment>> {
        let n = change.change_number;
        let files: BTreeMap<String, Vec<CommentInfo>> = self.get_json(&format!("changes/{n}/comments"))?;
        let messages: Vec<MessageInfo> = self.get_json(&format!("changes/{n}/messages"))?;

        let patch_sets: HashMap<u32, &str> = change
            .revisions
            .iter()
            .map(|(rev, info)| (info.patch_set, rev.as_str()))
            .collect();
        let revision = |ps: Option<u32>| -> String {
            ps.and_then(|p| patch_sets.get(&p).map(|r| r.to_string()))
                .or_else(|| ps.map(|p| p.to_string()))
                .or_else(|| change.current_revision.clone())
                .unwrap_or_default()
        };
        let change_url = format!("{}/c/{}/+/{n}", self.endpoint.base_url(), change.project);

        let mut out = Vec::new();
        for (path, comments) in files {
            for c in comments {
                let Some(message) = c.message.filter(|m| !m.trim().is_empty()) else {
                    continue;
                };
                let mut url = change_url.clone();
                if let Some(ps) = c.patch_set {
                    url.push_str(&format!("/{ps}"));
                }
                url.push('/');
                url.push_str(&path);
                if let Some(line) = c.line {
                    url.push_str(&format!("#{line}"));
                }
                out.push(
                    ReviewComment {
                        id: c.id,
                        project: change.project.clone(),
                        change_number: n,
                        revision_id: c.commit_id.unwrap_or_else(|| revision(c.patch_set)),
                        file_path: path.clone(),
                        line: c.line,
                        message,
                        url,
                        timestamp: iso_timestamp(&c.updated),
                    }
                    .normalized(),
                );
            }
        }
        for m in messages {
            if m.message.trim().is_empty() {
                continue;
            }
            out.push(
                ReviewComment {
                    id: m.id,
                    project: change.project.clone(),
                    change_number: n,
                    revision_id: revision(m.revision_number),
                    file_path: String::new(),
                    line: None,
                    message: m.message,
                    url: change_url.clone(),
                    timestamp: iso_timestamp(&m.date),
                }
                .normalized(),
            );
        }
        Ok(out)
    }
}

/// Gerrit's `2019-05-03 12:34:56.000000000` (UTC) as RFC 3339. Anything
/// unparseable is passed through.
fn iso_timestamp(s: &str) -> String {
    match NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f") {
        Ok(t) => t.format("%Y-%m-%dT%H:%M:%SZ").to_string(),
        Err(_) => {
            log::warn!("unrecognized timestamp {s:?}");
            s.to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timestamps() {
        assert_eq!(iso_timestamp("2019-05-03 12:34:56.000000000"), "2019-05-03T12:34:56Z");
        assert_eq!(iso_timestamp("yesterday"), "yesterday");
    }
}
