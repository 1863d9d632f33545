//! HTTP judge client. The endpoint receives a JSON `JudgeRequest` and
//! answers with the annotation array as the response body.

use std::thread;
use std::time::{Duration, Instant};

use serde::Serialize;
use spanprobe_core::annotate::{Judge, JudgeRequest};

pub const URL_ENV: &str = "SPANPROBE_JUDGE_URL";
pub const TOKEN_ENV: &str = "SPANPROBE_JUDGE_TOKEN";

#[derive(Debug, Clone)]
pub struct HttpJudgeConfig {
    pub url: String,
    pub token: Option<String>,
    pub timeout: Duration,
    /// Retries after the first attempt.
    pub max_retries: u32,
    pub backoff: Duration,
}

impl HttpJudgeConfig {
    /// URL from `url` or the environment; the bearer token only from the
    /// environment.
    pub fn from_env(url: Option<String>) -> Option<Self> {
        let url = url.or_else(|| std::env::var(URL_ENV).ok()).filter(|u| !u.is_empty())?;
        Some(HttpJudgeConfig {
            url,
            token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
            timeout: Duration::from_secs(120),
            max_retries: 3,
            backoff: Duration::from_millis(500),
        })
    }
}

pub struct HttpJudge {
    agent: ureq::Agent,
    cfg: HttpJudgeConfig,
    /// Requests sent so far, retries included.
    pub attempts: usize,
}

impl HttpJudge {
    pub fn new(cfg: HttpJudgeConfig) -> Self {
        let agent = ureq::Agent::new_with_config(
            ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).http_status_as_error(false).build(),
        );
        HttpJudge { agent, cfg, attempts: 0 }
    }

    fn once(&mut self, body: &str) -> Result<String, (bool, String)> {
        self.attempts += 1;
        let mut req = self.agent.post(&self.cfg.url).header("Content-Type", "application/json");
        if let Some(t) = &self.cfg.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.send(body).map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| (true, e.to_string()))?;
        match status {
            200..=299 => Ok(text),
            429 | 500..=599 => Err((true, format!("HTTP {status}"))),
            _ => Err((false, format!("HTTP {status}: {}", text.chars().take(200).collect::<String>()))),
        }
    }
}

impl Judge for HttpJudge {
    fn judge(&mut self, request: &JudgeRequest) -> spanprobe_core::Result<String> {
        let body = serde_json::to_string(request).map_err(|e| spanprobe_core::Error::External(e.to_string()))?;
        let mut delay = self.cfg.backoff;
        let mut last = String::new();
        for attempt in 0..=self.cfg.max_retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match self.once(&body) {
                Ok(text) => return Ok(text),
                Err((retry, msg)) => {
                    last = msg;
                    if !retry {
                        break;
                    }
                }
            }
        }
        Err(spanprobe_core::Error::External(format!("judge at {} failed after {} attempts: {last}", self.cfg.url, self.attempts)))
    }
}

/// One line of the annotation-run ledger.
#[derive(Debug, Clone, Serialize)]
pub struct LedgerEntry {
    pub sample_id: String,
    pub spans_returned: usize,
    pub dropped: usize,
    pub rejected: usize,
    pub latency_ms: u64,
}

pub fn timed<T>(f: impl FnOnce() -> T) -> (T, u64) {
    let t = Instant::now();
    let out = f();
    (out, t.elapsed().as_millis() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    fn serve(responses: Vec<(u16, &'static str)>) -> (String, thread::JoinHandle<Vec<String>>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/judge", listener.local_addr().unwrap());
        let handle = thread::spawn(move || {
            let mut seen = Vec::new();
            for (status, body) in responses {
                let (mut stream, _) = listener.accept().unwrap();
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
                let mut buf = vec![0; len];
                reader.read_exact(&mut buf).unwrap();
                seen.push(headers + &String::from_utf8(buf).unwrap());
                write!(stream, "HTTP/1.1 {status} X\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}", body.len()).unwrap();
            }
            seen
        });
        (url, handle)
    }

    fn cfg(url: String) -> HttpJudgeConfig {
        HttpJudgeConfig { url, token: Some("secret".into()), timeout: Duration::from_secs(5), max_retries: 3, backoff: Duration::from_millis(5) }
    }

    #[test]
    fn retries_server_errors_then_succeeds() {
        let (url, h) = serve(vec![(503, "busy"), (200, r#"[{"text":"a","label":"Supported"}]"#)]);
        let mut j = HttpJudge::new(cfg(url));
        let out = j.judge(&JudgeRequest::new("i", "a")).unwrap();
        assert!(out.contains("Supported"));
        assert_eq!(j.attempts, 2);
        let seen = h.join().unwrap();
        assert!(seen[1].contains("Bearer secret"));
        assert!(seen[1].contains("You are a fact-checker."));
    }

    #[test]
    fn client_errors_are_not_retried() {
        let (url, h) = serve(vec![(401, "no")]);
        let mut j = HttpJudge::new(cfg(url));
        assert!(j.judge(&JudgeRequest::new("i", "a")).is_err());
        assert_eq!(j.attempts, 1);
        h.join().unwrap();
    }

    #[test]
    fn refused_connection_is_retried_then_surfaced() {
        let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        let mut j = HttpJudge::new(cfg(format!("http://127.0.0.1:{port}/judge")));
        let err = j.judge(&JudgeRequest::new("i", "a")).unwrap_err();
        assert_eq!(j.attempts, 4);
        assert!(matches!(err, spanprobe_core::Error::External(_)));
    }
}
