//! A small scripted HTTP server speaking the remote completion protocol.
//!
//! Replies are chosen by exact prompt first, then by the query cell found
//! between the last `<eoe>` and the trailing `<tr><eos>`, then the default.
//! Used by the test suite and by `tabxform serve-mock`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::serializer::{EOE, EOS, TR};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockReply {
    #[serde(default = "ok_status")]
    pub status: u16,
    #[serde(default)]
    pub text: String,
}

fn ok_status() -> u16 {
    200
}

impl MockReply {
    pub fn text(text: impl Into<String>) -> Self {
        MockReply { status: 200, text: text.into() }
    }

    pub fn status(status: u16) -> Self {
        MockReply { status, text: String::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockScript {
    /// Replies keyed by the full prompt text.
    #[serde(default)]
    pub by_prompt: HashMap<String, MockReply>,
    /// Replies keyed by the query cell of the prompt.
    #[serde(default)]
    pub by_query: HashMap<String, MockReply>,
    #[serde(default = "empty_reply")]
    pub default: MockReply,
    /// The first this-many requests get a 500 regardless of the script.
    #[serde(default)]
    pub fail_first: usize,
    /// When set, requests without `Authorization: Bearer <token>` get a 401.
    #[serde(default)]
    pub require_token: Option<String>,
}

fn empty_reply() -> MockReply {
    MockReply::text("")
}

impl Default for MockScript {
    fn default() -> Self {
        MockScript {
            by_prompt: HashMap::new(),
            by_query: HashMap::new(),
            default: empty_reply(),
            fail_first: 0,
            require_token: None,
        }
    }
}

impl MockScript {
    /// Answers `text` whenever the query cell is `query`.
    pub fn complete(mut self, query: impl Into<String>, text: impl Into<String>) -> Self {
        self.by_query.insert(query.into(), MockReply::text(text));
        self
    }

    pub fn reply(mut self, query: impl Into<String>, reply: MockReply) -> Self {
        self.by_query.insert(query.into(), reply);
        self
    }

    fn respond(&self, prompt: &str) -> MockReply {
        if let Some(r) = self.by_prompt.get(prompt) {
            return r.clone();
        }
        query_of(prompt)
            .and_then(|q| self.by_query.get(q))
            .cloned()
            .unwrap_or_else(|| self.default.clone())
    }
}

/// The query cell of a serialized prompt, if it has the expected shape.
pub fn query_of(prompt: &str) -> Option<&str> {
    let tail = format!("{TR}{EOS}");
    let body = prompt.strip_suffix(tail.as_str())?;
    match body.rfind(EOE) {
        Some(i) => Some(&body[i + EOE.len()..]),
        None => body.strip_prefix(crate::serializer::SOS),
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct LoggedRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(skip)]
    pub authorization: Option<String>,
}

struct Shared {
    script: MockScript,
    requests: Mutex<Vec<LoggedRequest>>,
    seen: AtomicUsize,
    stop: AtomicBool,
}

pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds an ephemeral port on the loopback interface.
    pub fn start(script: MockScript) -> std::io::Result<Self> {
        Self::bind("127.0.0.1:0", script)
    }

    pub fn bind(addr: &str, script: MockScript) -> std::io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            script,
            requests: Mutex::new(Vec::new()),
            seen: AtomicUsize::new(0),
            stop: AtomicBool::new(false),
        });
        let worker = Arc::clone(&shared);
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if worker.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let conn = Arc::clone(&worker);
                std::thread::spawn(move || {
                    if let Err(e) = serve(stream, &conn) {
                        log::debug!("mock connection error: {e}");
                    }
                });
            }
        });
        Ok(MockServer { addr, shared, handle: Some(handle) })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}/complete", self.addr)
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.shared.requests.lock().expect("log lock").clone()
    }

    /// Blocks the calling thread until the process exits.
    pub fn wait(mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        // Wake the accept loop so it sees the flag.
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, shared: &Shared) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut line = String::new();
    if reader.read_line(&mut line)? == 0 {
        return Ok(());
    }
    let mut content_length = 0usize;
    let mut authorization = None;
    loop {
        let mut header = String::new();
        if reader.read_line(&mut header)? == 0 {
            break;
        }
        let header = header.trim_end();
        if header.is_empty() {
            break;
        }
        if let Some((name, value)) = header.split_once(':') {
            let value = value.trim();
            match name.trim().to_ascii_lowercase().as_str() {
                "content-length" => content_length = value.parse().unwrap_or(0),
                "authorization" => authorization = Some(value.to_string()),
                _ => {}
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;

    let nth = shared.seen.fetch_add(1, Ordering::SeqCst);
    let script = &shared.script;
    let reply = match serde_json::from_slice::<LoggedRequest>(&body) {
        Err(e) => MockReply { status: 400, text: format!("bad request: {e}") },
        Ok(mut req) => {
            req.authorization = authorization.clone();
            let prompt = req.prompt.clone();
            shared.requests.lock().expect("log lock").push(req);
            let authorized = match &script.require_token {
                Some(t) => authorization.as_deref() == Some(format!("Bearer {t}").as_str()),
                None => true,
            };
            if !authorized {
                MockReply { status: 401, text: "unauthorized".into() }
            } else if nth < script.fail_first {
                MockReply { status: 500, text: "scripted failure".into() }
            } else {
                script.respond(&prompt)
            }
        }
    };
    let payload = if reply.status == 200 {
        serde_json::json!({ "text": reply.text }).to_string()
    } else {
        reply.text.clone()
    };
    let mut out = stream;
    write!(
        out,
        "HTTP/1.1 {} {}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reason(reply.status),
        payload.len(),
        payload
    )?;
    out.flush()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        401 => "Unauthorized",
        429 => "Too Many Requests",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}
