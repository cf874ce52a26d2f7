use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{DecisionOracle, OracleDecision, OracleError, OracleRequest, ScriptedOracle};

pub const ENDPOINT_ENV: &str = "OBJNAV_ORACLE_URL";
pub const API_KEY_ENV: &str = "OBJNAV_ORACLE_KEY";
pub const TIMEOUT_ENV: &str = "OBJNAV_ORACLE_TIMEOUT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default, skip_serializing)]
    pub api_key: Option<String>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// Extra attempts after the first failure before falling back.
    #[serde(default = "default_retries")]
    pub retries: usize,
}

fn default_timeout() -> f64 {
    30.0
}

fn default_retries() -> usize {
    2
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            api_key: None,
            timeout_secs: default_timeout(),
            retries: default_retries(),
        }
    }

    /// Reads endpoint, key and timeout from the environment.
    pub fn from_env() -> Option<Self> {
        let endpoint = std::env::var(ENDPOINT_ENV).ok()?;
        let mut cfg = Self::new(endpoint);
        cfg.api_key = std::env::var(API_KEY_ENV).ok();
        if let Some(t) = std::env::var(TIMEOUT_ENV).ok().and_then(|s| s.parse().ok()) {
            cfg.timeout_secs = t;
        }
        Some(cfg)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireReply {
    next_node: u32,
    direction: usize,
    found: u8,
}

/// Parses and validates a reply body against the request it answers.
pub fn parse_reply(body: &str, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
    let wire: WireReply =
        serde_json::from_str(body).map_err(|e| OracleError::MalformedReply(e.to_string()))?;
    let found = match wire.found {
        0 => false,
        1 => true,
        other => {
            return Err(OracleError::MalformedReply(format!(
                "found must be 0 or 1, got {other}"
            )))
        }
    };
    let decision = OracleDecision {
        next_node: wire.next_node,
        direction: wire.direction,
        found,
    };
    decision.validate(request)?;
    Ok(decision)
}

/// HTTP client for an external decision service, falling back to the
/// scripted rules once retries are exhausted.
pub struct RemoteOracle {
    config: RemoteConfig,
    agent: ureq::Agent,
    fallback: ScriptedOracle,
}

impl RemoteOracle {
    pub fn new(config: RemoteConfig, fallback: ScriptedOracle) -> Self {
        let agent = ureq::AgentBuilder::new()
            .timeout(Duration::from_secs_f64(config.timeout_secs))
            .build();
        Self {
            config,
            agent,
            fallback,
        }
    }

    /// One POST, no retries.
    pub fn remote_decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
        request.validate()?;
        let body = serde_json::to_string(request)
            .map_err(|e| OracleError::InvalidRequest(e.to_string()))?;
        let mut req = self
            .agent
            .post(&self.config.endpoint)
            .set("Content-Type", "application/json");
        if let Some(key) = &self.config.api_key {
            req = req.set("Authorization", &format!("Bearer {key}"));
        }
        let reply = req
            .send_string(&body)
            .map_err(|e| OracleError::Transport(e.to_string()))?
            .into_string()
            .map_err(|e| OracleError::Transport(e.to_string()))?;
        parse_reply(&reply, request)
    }
}

impl DecisionOracle for RemoteOracle {
    fn decide(&self, request: &OracleRequest) -> Result<OracleDecision, OracleError> {
        for attempt in 0..=self.config.retries {
            match self.remote_decide(request) {
                Ok(d) => return Ok(d),
                Err(e) if e.is_retriable() => {
                    log::warn!("remote oracle attempt {} failed: {e}", attempt + 1);
                }
                Err(e) => return Err(e),
            }
        }
        log::warn!("remote oracle unavailable, using scripted rules");
        self.fallback.decide(request)
    }
}
