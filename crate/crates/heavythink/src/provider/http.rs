//! OpenAI-compatible chat-completions HTTP client.
//!
//! Sends `POST {base_url}/chat/completions` with fields `model`, `messages`,
//! `temperature`, `top_p`, `top_k` (only when the endpoint advertises
//! support), `n`, `max_tokens`, and `seed` (when set). Replies are parsed
//! from `choices[*].message.content` and `choices[*].finish_reason`.
//! Structured `tool_calls` entries are folded back into the text as
//! `<tool_call>{...}</tool_call>` segments so downstream stages see one
//! uniform representation.

use async_trait::async_trait;
use serde::Deserialize;
use serde_json::json;

use super::{
    CompletionRequest, FinishReason, Provider, ProviderEndpoint, ProviderError, RawReply, Role,
    TokenUsage,
};

pub struct HttpProvider {
    endpoint: ProviderEndpoint,
    client: reqwest::Client,
}

impl HttpProvider {
    pub fn new(endpoint: ProviderEndpoint) -> Result<Self, ProviderError> {
        endpoint.validate()?;
        let client = reqwest::Client::builder()
            .timeout(std::time::Duration::from_secs_f64(endpoint.request_timeout_secs))
            .build()
            .map_err(|e| ProviderError::InvalidRequest(format!("http client: {e}")))?;
        Ok(Self { endpoint, client })
    }

    pub fn endpoint(&self) -> &ProviderEndpoint {
        &self.endpoint
    }

    fn api_key(&self) -> Result<Option<String>, ProviderError> {
        match &self.endpoint.api_key_env {
            None => Ok(None),
            Some(var) => match std::env::var(var) {
                Ok(key) => Ok(Some(key)),
                Err(_) => Err(ProviderError::Auth(format!(
                    "environment variable {var} is not set"
                ))),
            },
        }
    }

    fn body(&self, request: &CompletionRequest) -> serde_json::Value {
        let messages: Vec<serde_json::Value> = request
            .messages
            .iter()
            .map(|m| {
                json!({
                    "role": match m.role {
                        Role::System => "system",
                        Role::User => "user",
                        Role::Assistant => "assistant",
                        Role::Tool => "tool",
                    },
                    "content": m.content,
                })
            })
            .collect();
        let mut body = json!({
            "model": self.endpoint.model_id,
            "messages": messages,
            "temperature": request.sampling.temperature,
            "top_p": request.sampling.top_p,
            "n": request.n_samples,
            "max_tokens": request.sampling.max_output_tokens,
        });
        if self.endpoint.supports_top_k {
            if let Some(top_k) = request.sampling.top_k {
                body["top_k"] = json!(top_k);
            }
        }
        if let Some(seed) = request.sampling.seed {
            body["seed"] = json!(seed);
        }
        body
    }
}

#[derive(Debug, Deserialize)]
struct ChatResponse {
    choices: Vec<Choice>,
    #[serde(default)]
    usage: Option<UsageBody>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    message: ChoiceMessage,
    #[serde(default)]
    finish_reason: Option<String>,
}

#[derive(Debug, Deserialize)]
struct ChoiceMessage {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    tool_calls: Option<Vec<WireToolCall>>,
}

#[derive(Debug, Deserialize)]
struct WireToolCall {
    #[serde(default)]
    function: Option<WireFunction>,
}

#[derive(Debug, Deserialize)]
struct WireFunction {
    #[serde(default)]
    name: String,
    #[serde(default)]
    arguments: String,
}

#[derive(Debug, Deserialize)]
struct UsageBody {
    #[serde(default)]
    prompt_tokens: u64,
    #[serde(default)]
    completion_tokens: u64,
}

fn parse_finish(reason: Option<&str>) -> FinishReason {
    match reason {
        Some("length") => FinishReason::Length,
        Some("tool_calls") | Some("tool_call") | Some("function_call") => FinishReason::ToolCall,
        _ => FinishReason::Stop,
    }
}

fn render_choice(choice: &Choice) -> String {
    let mut text = choice.message.content.clone().unwrap_or_default();
    if let Some(calls) = &choice.message.tool_calls {
        for call in calls {
            if let Some(function) = &call.function {
                let payload = json!({
                    "name": function.name,
                    "arguments": function.arguments,
                });
                text.push_str(&format!("<tool_call>{payload}</tool_call>"));
            }
        }
    }
    text
}

#[async_trait]
impl Provider for HttpProvider {
    async fn send(&self, request: &CompletionRequest) -> Result<RawReply, ProviderError> {
        let url = format!("{}/chat/completions", self.endpoint.base_url.trim_end_matches('/'));
        let mut builder = self.client.post(&url).json(&self.body(request));
        if let Some(key) = self.api_key()? {
            builder = builder.bearer_auth(key);
        }
        for (name, value) in &self.endpoint.extra_headers {
            builder = builder.header(name, value);
        }

        let response = builder
            .send()
            .await
            .map_err(|e| ProviderError::Transient(format!("request to {url}: {e}")))?;
        let status = response.status();
        if status.as_u16() == 401 || status.as_u16() == 403 {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Auth(format!("{status}: {body}")));
        }
        if !status.is_success() {
            let body = response.text().await.unwrap_or_default();
            return Err(ProviderError::Status { status: status.as_u16(), body });
        }

        let parsed: ChatResponse = response
            .json()
            .await
            .map_err(|e| ProviderError::Malformed(format!("chat completion body: {e}")))?;
        if parsed.choices.is_empty() {
            return Err(ProviderError::Malformed("no choices in reply".into()));
        }

        let texts: Vec<String> = parsed.choices.iter().map(render_choice).collect();
        let finish_reasons: Vec<FinishReason> = parsed
            .choices
            .iter()
            .map(|c| parse_finish(c.finish_reason.as_deref()))
            .collect();
        let usage = parsed
            .usage
            .map(|u| TokenUsage {
                prompt_tokens: u.prompt_tokens,
                completion_tokens: u.completion_tokens,
            })
            .unwrap_or_default();
        Ok(RawReply { texts, finish_reasons, usage })
    }

    fn supports_n(&self) -> bool {
        self.endpoint.supports_n
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::provider::{Message, SamplingParams};

    fn endpoint() -> ProviderEndpoint {
        ProviderEndpoint::new("http://localhost:9/v1", "test-model")
    }

    #[test]
    fn body_omits_top_k_unless_supported() {
        let provider = HttpProvider::new(endpoint()).unwrap();
        let request =
            CompletionRequest::new(vec![Message::user("q")], SamplingParams::default(), 2);
        let body = provider.body(&request);
        assert_eq!(body["model"], "test-model");
        assert_eq!(body["n"], 2);
        assert_eq!(body["temperature"], 1.0);
        assert_eq!(body["top_p"], 0.95);
        assert!(body.get("top_k").is_none());

        let mut supported = endpoint();
        supported.supports_top_k = true;
        let provider = HttpProvider::new(supported).unwrap();
        let body = provider.body(&request);
        assert_eq!(body["top_k"], 10);
    }

    #[test]
    fn body_includes_seed_when_set() {
        let provider = HttpProvider::new(endpoint()).unwrap();
        let sampling = SamplingParams { seed: Some(7), ..SamplingParams::default() };
        let request = CompletionRequest::new(vec![Message::user("q")], sampling, 1);
        assert_eq!(provider.body(&request)["seed"], 7);
    }

    #[test]
    fn finish_reason_mapping() {
        assert_eq!(parse_finish(Some("stop")), FinishReason::Stop);
        assert_eq!(parse_finish(Some("length")), FinishReason::Length);
        assert_eq!(parse_finish(Some("tool_calls")), FinishReason::ToolCall);
        assert_eq!(parse_finish(None), FinishReason::Stop);
    }

    #[test]
    fn structured_tool_calls_fold_into_text() {
        let choice = Choice {
            message: ChoiceMessage {
                content: Some("let me compute".into()),
                tool_calls: Some(vec![WireToolCall {
                    function: Some(WireFunction {
                        name: "calculator".into(),
                        arguments: "2**10".into(),
                    }),
                }]),
            },
            finish_reason: Some("tool_calls".into()),
        };
        let text = render_choice(&choice);
        assert!(text.starts_with("let me compute"));
        assert!(text.contains("<tool_call>"));
        assert!(text.contains("\"name\":\"calculator\""));
        assert!(text.contains("2**10"));
    }

    #[test]
    fn invalid_endpoint_is_rejected() {
        let mut bad = endpoint();
        bad.base_url = String::new();
        assert!(HttpProvider::new(bad).is_err());
        let mut bad = endpoint();
        bad.request_timeout_secs = 0.0;
        assert!(HttpProvider::new(bad).is_err());
    }

    #[tokio::test]
    async fn unreachable_host_is_a_transient_error() {
        let provider = HttpProvider::new(endpoint()).unwrap();
        let request =
            CompletionRequest::new(vec![Message::user("q")], SamplingParams::default(), 1);
        let err = provider.send(&request).await.unwrap_err();
        assert!(err.is_retryable(), "connection failures must be retryable: {err}");
    }
}
