use serde::{Deserialize, Serialize};

use super::{OracleConfig, OracleError, ENV_API_KEY};

#[derive(Serialize)]
struct ChatRequest<'a> {
    model: &'a str,
    messages: [ChatMessage<'a>; 1],
    max_tokens: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    temperature: Option<f64>,
}

#[derive(Serialize)]
struct ChatMessage<'a> {
    role: &'a str,
    content: &'a str,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ReplyMessage,
}

#[derive(Deserialize)]
struct ReplyMessage {
    content: String,
}

pub(super) struct RemoteBackend {
    client: reqwest::blocking::Client,
    endpoint: String,
    api_key: Option<String>,
}

impl RemoteBackend {
    pub(super) fn new(config: &OracleConfig) -> Result<Self, OracleError> {
        let endpoint = config
            .resolved_endpoint()
            .ok_or_else(|| OracleError::InvalidConfig("missing endpoint".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(std::time::Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| OracleError::InvalidConfig(e.to_string()))?;
        let api_key = std::env::var(ENV_API_KEY).ok().filter(|k| !k.is_empty());
        Ok(Self { client, endpoint, api_key })
    }

    pub(super) fn complete(&self, config: &OracleConfig, prompt: &str) -> Result<String, OracleError> {
        let body = ChatRequest {
            model: &config.model_name,
            messages: [ChatMessage { role: "user", content: prompt }],
            max_tokens: config.max_tokens,
            temperature: config.temperature,
        };
        let attempts = config.retries + 1;
        let mut last = String::new();
        for attempt in 1..=attempts {
            if attempt > 1 {
                std::thread::sleep(config.backoff(attempt - 1));
            }
            match self.send(&body) {
                Ok(text) => return Ok(text),
                Err(e) => {
                    log::warn!("oracle attempt {attempt}/{attempts} failed: {e}");
                    last = e;
                }
            }
        }
        Err(OracleError::TransportError { attempts, message: last })
    }

    fn send(&self, body: &ChatRequest<'_>) -> Result<String, String> {
        let mut req = self.client.post(&self.endpoint).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("HTTP {status}"));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| e.to_string())?;
        parsed
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| "response has no choices".to_string())
    }
}
