//! Chat-completion HTTP provider with a shared token-bucket rate limiter.

use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::json;

use super::{render_prompt, GenerationRequest, Provider, ProviderConfig, ProviderError};

/// Token bucket shared by every caller of one provider. Capacity is one
/// second's worth of requests, at least one token.
#[derive(Debug)]
pub struct TokenBucket {
    rate: f64,
    capacity: f64,
    state: Mutex<(f64, Instant)>,
}

impl TokenBucket {
    pub fn new(rate_per_s: f64) -> Self {
        assert!(rate_per_s > 0.0, "rate_limit must be positive");
        let capacity = rate_per_s.max(1.0);
        TokenBucket {
            rate: rate_per_s,
            capacity,
            state: Mutex::new((capacity, Instant::now())),
        }
    }

    /// Blocks until one token is available, then consumes it.
    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut guard = self.state.lock().unwrap_or_else(|e| e.into_inner());
                let (tokens, last) = *guard;
                let now = Instant::now();
                let refilled =
                    (tokens + now.duration_since(last).as_secs_f64() * self.rate).min(self.capacity);
                if refilled >= 1.0 {
                    *guard = (refilled - 1.0, now);
                    return;
                }
                *guard = (refilled, now);
                Duration::from_secs_f64((1.0 - refilled) / self.rate)
            };
            thread::sleep(wait);
        }
    }
}

pub struct HttpProvider {
    config: ProviderConfig,
    client: reqwest::blocking::Client,
    bucket: TokenBucket,
}

enum Attempt {
    Done(String),
    Retry(String),
    Fatal(ProviderError),
}

impl HttpProvider {
    pub fn new(config: ProviderConfig) -> Result<Self, ProviderError> {
        if config.rate_limit.is_nan() || config.rate_limit <= 0.0 {
            return Err(ProviderError::BadResponse(
                "rate_limit must be positive".into(),
            ));
        }
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(300))
            .build()
            .map_err(|e| ProviderError::BadResponse(e.to_string()))?;
        let bucket = TokenBucket::new(config.rate_limit);
        Ok(HttpProvider {
            config,
            client,
            bucket,
        })
    }

    pub fn config(&self) -> &ProviderConfig {
        &self.config
    }

    fn attempt(&self, body: &serde_json::Value, token: &str) -> Attempt {
        self.bucket.acquire();
        let resp = self
            .client
            .post(&self.config.endpoint)
            .bearer_auth(token)
            .json(body)
            .send();
        let resp = match resp {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(format!("transport: {e}")),
        };
        let status = resp.status();
        let text = resp.text().unwrap_or_default();
        if status.as_u16() == 429 || status.is_server_error() {
            return Attempt::Retry(format!("HTTP {}: {}", status.as_u16(), crate::util::truncate_bytes(&text, 512)));
        }
        if !status.is_success() {
            return Attempt::Fatal(ProviderError::Http {
                status: status.as_u16(),
                body: crate::util::truncate_bytes(&text, 512),
            });
        }
        match extract_content(&text) {
            Ok(content) => Attempt::Done(content),
            Err(e) => Attempt::Fatal(e),
        }
    }
}

/// Pulls `choices[0].message.content` out of a chat-completion response.
pub fn extract_content(body: &str) -> Result<String, ProviderError> {
    let v: serde_json::Value =
        serde_json::from_str(body).map_err(|e| ProviderError::BadResponse(e.to_string()))?;
    v.pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .map(str::to_string)
        .ok_or_else(|| ProviderError::BadResponse("missing choices[0].message.content".into()))
}

/// Request body for one single-message chat completion.
pub fn request_body(model: &str, request: &GenerationRequest, prompt: &str) -> serde_json::Value {
    let mut body = json!({
        "model": model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": request.sampling.temperature,
        "max_tokens": request.sampling.max_tokens,
    });
    if let Some(seed) = request.sampling.seed {
        body["seed"] = json!(seed);
    }
    body
}

impl Provider for HttpProvider {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, ProviderError> {
        let prompt = render_prompt(request)?;
        let token = std::env::var(&self.config.auth_token_env)
            .map_err(|_| ProviderError::MissingToken(self.config.auth_token_env.clone()))?;
        let body = request_body(&self.config.model_name, request, &prompt);
        let attempts = self.config.retry.max_attempts.max(1);
        let mut last = String::new();
        for attempt in 0..attempts {
            match self.attempt(&body, &token) {
                Attempt::Done(text) => return Ok(text),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(why) => {
                    log::warn!("provider attempt {} failed: {why}", attempt + 1);
                    last = why;
                    if attempt + 1 < attempts {
                        let backoff = self.config.retry.backoff_ms.saturating_mul(1 << attempt.min(6));
                        thread::sleep(Duration::from_millis(backoff));
                    }
                }
            }
        }
        Err(ProviderError::Exhausted { attempts, last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{RetryPolicy, TemplateId};

    #[test]
    fn bucket_limits_rate() {
        let bucket = TokenBucket::new(20.0);
        let start = Instant::now();
        // 20 tokens start in the bucket, 10 more need about 0.5 s
        for _ in 0..30 {
            bucket.acquire();
        }
        let elapsed = start.elapsed().as_secs_f64();
        assert!(elapsed >= 0.4, "{elapsed}");
    }

    #[test]
    fn content_extraction() {
        let body = r#"{"choices":[{"message":{"role":"assistant","content":"hi"}}]}"#;
        assert_eq!(extract_content(body).unwrap(), "hi");
        assert!(extract_content("{}").is_err());
    }

    #[test]
    fn body_has_single_user_message() {
        let req = GenerationRequest::new(TemplateId::Signature).seed(3);
        let body = request_body("m", &req, "prompt");
        assert_eq!(body["messages"].as_array().unwrap().len(), 1);
        assert_eq!(body["messages"][0]["role"], "user");
        assert_eq!(body["seed"], 3);
        assert_eq!(body["temperature"], 0.0);
    }

    #[test]
    fn missing_token_env_is_reported() {
        let p = HttpProvider::new(ProviderConfig {
            endpoint: "http://127.0.0.1:9/v1/chat/completions".into(),
            model_name: "m".into(),
            auth_token_env: "COTFORGE_TEST_TOKEN_THAT_IS_NOT_SET".into(),
            rate_limit: 100.0,
            retry: RetryPolicy::default(),
        })
        .unwrap();
        let req = GenerationRequest::new(TemplateId::Signature).var("instruction", "x");
        assert!(matches!(p.complete(&req), Err(ProviderError::MissingToken(_))));
    }
}
