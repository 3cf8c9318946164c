use std::collections::{HashMap, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine;

use crate::{Credentials, GerritError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpRequest {
    pub url: String,
    pub credentials: Option<Credentials>,
}

impl HttpRequest {
    /// `Authorization` header value for basic token auth.
    pub fn authorization(&self) -> Option<String> {
        self.credentials.as_ref().map(|c| {
            let raw = format!("{}:{}", c.username, c.token);
            format!("Basic {}", base64::engine::general_purpose::STANDARD.encode(raw))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpResponse {
    pub status: u16,
    pub body: Vec<u8>,
}

impl HttpResponse {
    pub fn ok(body: impl Into<Vec<u8>>) -> Self {
        HttpResponse {
            status: 200,
            body: body.into(),
        }
    }
}

/// Issues GET requests. Any status code is a successful transport-level
/// result; only connection-level failures are errors.
pub trait Transport: Send + Sync {
    fn get(&self, req: &HttpRequest) -> Result<HttpResponse>;
}

pub struct UreqTransport {
    agent: ureq::Agent,
}

impl UreqTransport {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .build();
        UreqTransport {
            agent: ureq::Agent::new_with_config(config),
        }
    }
}

impl Transport for UreqTransport {
    fn get(&self, req: &HttpRequest) -> Result<HttpResponse> {
        let fail = |e: ureq::Error| GerritError::Transport {
            url: req.url.clone(),
            message: e.to_string(),
        };
        let mut call = self.agent.get(&req.url).header("Accept", "application/json");
        if let Some(auth) = req.authorization() {
            call = call.header("Authorization", auth);
        }
        let mut resp = call.call().map_err(fail)?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_to_vec()
            .map_err(fail)?;
        Ok(HttpResponse { status, body })
    }
}

/// Replays canned responses keyed by URL. A route holding several
/// responses serves them in turn and repeats the last one. Every request
/// is recorded.
#[derive(Default)]
pub struct FixtureTransport {
    routes: Mutex<HashMap<String, VecDeque<HttpResponse>>>,
    requests: Mutex<Vec<HttpRequest>>,
}

impl FixtureTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn route(self, url: impl Into<String>, responses: Vec<HttpResponse>) -> Self {
        self.routes.lock().unwrap().insert(url.into(), responses.into());
        self
    }

    pub fn requests(&self) -> Vec<HttpRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Transport for FixtureTransport {
    fn get(&self, req: &HttpRequest) -> Result<HttpResponse> {
        self.requests.lock().unwrap().push(req.clone());
        let mut routes = self.routes.lock().unwrap();
        let queue = routes.get_mut(&req.url).ok_or_else(|| GerritError::Transport {
            url: req.url.clone(),
            message: "no fixture for this URL".into(),
        })?;
        match queue.len() {
            0 => Ok(HttpResponse { status: 404, body: Vec::new() }),
            1 => Ok(queue[0].clone()),
            _ => Ok(queue.pop_front().unwrap()),
        }
    }
}
