use std::thread;
use std::time::Duration;

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde_json::{json, Value};

use super::{Backend, ChatMessage, LmError, ModelRoleConfig};

pub const API_KEY_VAR: &str = "EVOCAD_API_KEY";
const MAX_BACKOFF: Duration = Duration::from_secs(30);

/// Blocking client for any chat-completions style HTTP endpoint.
#[derive(Debug, Clone)]
pub struct WireBackend {
    base_url: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    backoff: Duration,
}

impl WireBackend {
    pub fn new(base_url: impl Into<String>, api_key: Option<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .build()
            .into();
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            api_key,
            agent,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads the bearer token from `EVOCAD_API_KEY`, if set.
    pub fn from_env(base_url: impl Into<String>) -> Self {
        let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.is_empty());
        if key.is_none() {
            log::warn!("{API_KEY_VAR} is not set, sending requests without authorization");
        }
        Self::new(base_url, key)
    }

    /// Delay before the first retry; doubles on every further retry.
    pub fn with_backoff(mut self, base: Duration) -> Self {
        self.backoff = base;
        self
    }

    pub fn endpoint(&self) -> String {
        format!("{}/chat/completions", self.base_url)
    }

    pub fn request_body(messages: &[ChatMessage], cfg: &ModelRoleConfig) -> Result<Value, LmError> {
        let mut out = Vec::with_capacity(messages.len());
        for m in messages {
            let mut content = Vec::new();
            if !m.text.is_empty() {
                content.push(json!({"type": "text", "text": m.text}));
            }
            for img in &m.images {
                let png = img
                    .encode_png()
                    .map_err(|e| LmError::InvalidConfig(format!("cannot encode image: {e}")))?;
                content.push(json!({"type": "image", "mime_type": "image/png", "data": BASE64.encode(png)}));
            }
            out.push(json!({"role": m.role.as_str(), "content": content}));
        }
        Ok(json!({
            "model": cfg.model_name,
            "temperature": cfg.temperature,
            "messages": out,
        }))
    }

    fn attempt(&self, body: &Value, cfg: &ModelRoleConfig) -> Result<String, LmError> {
        let mut req = self
            .agent
            .post(&self.endpoint())
            .config()
            .timeout_global(Some(cfg.timeout))
            .build()
            .header("Content-Type", "application/json");
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req.send_json(body).map_err(map_transport)?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(map_transport)?;
        if !(200..300).contains(&status) {
            return Err(LmError::Http { status, body: text });
        }
        parse_response(&text)
    }
}

fn map_transport(e: ureq::Error) -> LmError {
    match e {
        ureq::Error::Timeout(_) => LmError::Timeout,
        ureq::Error::BadUri(u) => LmError::InvalidConfig(format!("bad endpoint url {u}")),
        ureq::Error::Http(e) => LmError::InvalidConfig(e.to_string()),
        other => LmError::Transport(other.to_string()),
    }
}

fn retryable(e: &LmError) -> bool {
    match e {
        LmError::Transport(_) | LmError::Timeout => true,
        LmError::Http { status, .. } => *status == 429 || *status >= 500,
        _ => false,
    }
}

/// Text at `choices[0].message.content`, given either as a string or as a
/// list of text parts.
pub(crate) fn parse_response(text: &str) -> Result<String, LmError> {
    let v: Value = serde_json::from_str(text).map_err(|e| LmError::MalformedResponse(e.to_string()))?;
    let content = &v["choices"][0]["message"]["content"];
    let out = match content {
        Value::String(s) => s.clone(),
        Value::Array(parts) => parts
            .iter()
            .filter_map(|p| p["text"].as_str())
            .collect::<Vec<_>>()
            .join(""),
        _ => return Err(LmError::MalformedResponse("no choices[0].message.content".into())),
    };
    if out.trim().is_empty() {
        return Err(LmError::EmptyResponse);
    }
    Ok(out)
}

impl Backend for WireBackend {
    fn complete(&self, messages: &[ChatMessage], cfg: &ModelRoleConfig) -> Result<String, LmError> {
        let body = Self::request_body(messages, cfg)?;
        let mut attempt = 0;
        loop {
            match self.attempt(&body, cfg) {
                Err(e) if retryable(&e) && attempt < cfg.max_retries => {
                    let wait = self.backoff.saturating_mul(1 << attempt.min(16)).min(MAX_BACKOFF);
                    log::warn!("{} call failed ({e}), retrying in {wait:?}", cfg.role);
                    thread::sleep(wait);
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn identity(&self) -> String {
        format!("wire({})", self.base_url)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::ModelRole;
    use crate::render::Image;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;
    use std::sync::mpsc;
    use std::time::Instant;

    /// Serves one canned `(status, body)` per connection and reports each
    /// request body it saw.
    fn serve(replies: Vec<(u16, String)>) -> (String, mpsc::Receiver<(String, String)>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for (status, body) in replies {
                let (stream, _) = listener.accept().unwrap();
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut headers = String::new();
                let mut len = 0;
                loop {
                    let mut line = String::new();
                    reader.read_line(&mut line).unwrap();
                    if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                        len = v.trim().parse().unwrap();
                    }
                    headers.push_str(&line);
                    if line == "\r\n" {
                        break;
                    }
                }
                let mut req = vec![0; len];
                reader.read_exact(&mut req).unwrap();
                tx.send((headers, String::from_utf8(req).unwrap())).unwrap();
                let mut s = stream;
                write!(
                    s,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                    body.len()
                )
                .unwrap();
            }
        });
        (url, rx)
    }

    fn ok_body(text: &str) -> String {
        json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string()
    }

    fn cfg(retries: u32) -> ModelRoleConfig {
        ModelRoleConfig {
            max_retries: retries,
            timeout: Duration::from_secs(5),
            ..ModelRoleConfig::new(ModelRole::Describer, "vision-model")
        }
    }

    #[test]
    fn request_shape() {
        let msgs = vec![
            ChatMessage::system("sys"),
            ChatMessage::user("look").with_image(Image::filled(1, 1, [1, 2, 3])),
        ];
        let body = WireBackend::request_body(&msgs, &cfg(0)).unwrap();
        assert_eq!(body["model"], "vision-model");
        assert_eq!(body["temperature"], 0.2);
        assert_eq!(body["messages"][0]["role"], "system");
        assert_eq!(body["messages"][0]["content"][0], json!({"type": "text", "text": "sys"}));
        let img = &body["messages"][1]["content"][1];
        assert_eq!(img["type"], "image");
        let png = BASE64.decode(img["data"].as_str().unwrap()).unwrap();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn round_trip_with_auth() {
        let (url, rx) = serve(vec![(200, ok_body("hello"))]);
        let b = WireBackend::new(url, Some("k123".into()));
        assert_eq!(b.complete(&[ChatMessage::user("hi")], &cfg(0)).unwrap(), "hello");
        let (headers, body) = rx.recv().unwrap();
        assert!(headers.starts_with("POST /chat/completions"));
        assert!(headers.contains("Bearer k123"));
        assert_eq!(serde_json::from_str::<Value>(&body).unwrap()["messages"][0]["content"][0]["text"], "hi");
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, rx) = serve(vec![(503, "busy".into()), (429, "slow down".into()), (200, ok_body("done"))]);
        let b = WireBackend::new(url, None).with_backoff(Duration::from_millis(5));
        assert_eq!(b.complete(&[ChatMessage::user("hi")], &cfg(2)).unwrap(), "done");
        assert_eq!(rx.try_iter().count(), 3);
    }

    #[test]
    fn gives_up_after_max_retries() {
        let (url, _rx) = serve(vec![(500, "a".into()), (500, "b".into())]);
        let b = WireBackend::new(url, None).with_backoff(Duration::from_millis(5));
        let err = b.complete(&[ChatMessage::user("hi")], &cfg(1)).unwrap_err();
        assert_eq!(err, LmError::Http { status: 500, body: "b".into() });
    }

    #[test]
    fn client_errors_and_bad_bodies_are_not_retried() {
        let (url, rx) = serve(vec![(400, "bad".into()), (200, "{\"nope\": 1}".into())]);
        let b = WireBackend::new(url, None).with_backoff(Duration::from_millis(5));
        assert!(matches!(b.complete(&[ChatMessage::user("x")], &cfg(3)), Err(LmError::Http { status: 400, .. })));
        assert!(matches!(b.complete(&[ChatMessage::user("x")], &cfg(3)), Err(LmError::MalformedResponse(_))));
        assert_eq!(rx.try_iter().count(), 2);
    }

    #[test]
    fn stalled_server_times_out() {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let hold = thread::spawn(move || {
            let (s, _) = listener.accept().unwrap();
            thread::sleep(Duration::from_millis(1500));
            drop(s);
        });
        let b = WireBackend::new(url, None);
        let c = ModelRoleConfig { timeout: Duration::from_millis(500), ..cfg(0) };
        let start = Instant::now();
        assert_eq!(b.complete(&[ChatMessage::user("x")], &c), Err(LmError::Timeout));
        assert!(start.elapsed() < Duration::from_secs(2));
        hold.join().unwrap();
    }

    #[test]
    fn content_parts_are_joined() {
        let body = json!({"choices": [{"message": {"content": [{"type": "text", "text": "a"}, {"type": "text", "text": "b"}]}}]});
        assert_eq!(parse_response(&body.to_string()).unwrap(), "ab");
        assert_eq!(parse_response(&ok_body("  ")), Err(LmError::EmptyResponse));
    }
}
