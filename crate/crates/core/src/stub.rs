//! Minimal in-process HTTP server for hermetic tests.
//!
//! [`StubServer`] answers every request with a user-supplied handler; it is
//! used for the stub external scorer and for MediaWiki API fixtures. One
//! thread per connection, `Connection: close` on every response.

use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use serde::Deserialize;

#[derive(Debug, Clone)]
pub struct StubRequest {
    pub method: String,
    /// Request target including the query string.
    pub path: String,
    pub headers: Vec<(String, String)>,
    pub body: Vec<u8>,
}

impl StubRequest {
    pub fn header(&self, name: &str) -> Option<&str> {
        self.headers
            .iter()
            .find(|(k, _)| k.eq_ignore_ascii_case(name))
            .map(|(_, v)| v.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct StubResponse {
    pub status: u16,
    pub content_type: String,
    pub body: String,
    /// Sleep before answering.
    pub delay: Option<Duration>,
}

impl StubResponse {
    pub fn json(status: u16, body: String) -> Self {
        StubResponse {
            status,
            content_type: "application/json".into(),
            body,
            delay: None,
        }
    }

    pub fn delayed(mut self, delay: Duration) -> Self {
        self.delay = Some(delay);
        self
    }
}

type Handler = dyn Fn(&StubRequest) -> StubResponse + Send + Sync;

pub struct StubServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
    requests: Arc<Mutex<Vec<StubRequest>>>,
}

impl std::fmt::Debug for StubServer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StubServer").field("addr", &self.addr).finish()
    }
}

impl StubServer {
    pub fn start<F>(handler: F) -> io::Result<Self>
    where
        F: Fn(&StubRequest) -> StubResponse + Send + Sync + 'static,
    {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let requests = Arc::new(Mutex::new(Vec::new()));
        let handler: Arc<Handler> = Arc::new(handler);
        let accept_thread = {
            let stop = stop.clone();
            let requests = requests.clone();
            thread::spawn(move || {
                for stream in listener.incoming() {
                    if stop.load(Ordering::SeqCst) {
                        break;
                    }
                    let Ok(stream) = stream else { continue };
                    let handler = handler.clone();
                    let requests = requests.clone();
                    thread::spawn(move || {
                        let _ = serve_one(stream, &*handler, &requests);
                    });
                }
            })
        };
        Ok(StubServer {
            addr,
            stop,
            accept_thread: Some(accept_thread),
            requests,
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{}", self.addr, path)
    }

    /// Requests received so far, in arrival order.
    pub fn requests(&self) -> Vec<StubRequest> {
        self.requests.lock().unwrap().clone()
    }
}

impl Drop for StubServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

fn serve_one(
    stream: TcpStream,
    handler: &Handler,
    log: &Mutex<Vec<StubRequest>>,
) -> io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(10)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let mut parts = request_line.split_whitespace();
    let method = parts.next().unwrap_or_default().to_string();
    let path = parts.next().unwrap_or_default().to_string();
    let mut headers = Vec::new();
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            break;
        }
        let line = line.trim_end();
        if line.is_empty() {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            headers.push((k.trim().to_string(), v.trim().to_string()));
        }
    }
    let length: usize = headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case("content-length"))
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);
    let mut body = vec![0; length];
    reader.read_exact(&mut body)?;
    let request = StubRequest { method, path, headers, body };
    let response = handler(&request);
    log.lock().unwrap().push(request);
    if let Some(delay) = response.delay {
        thread::sleep(delay);
    }
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} {}\r\nContent-Type: {}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        response.status,
        reason(response.status),
        response.content_type,
        response.body.len(),
        response.body
    )?;
    stream.flush()
}

fn reason(status: u16) -> &'static str {
    match status {
        200 => "OK",
        400 => "Bad Request",
        404 => "Not Found",
        500 => "Internal Server Error",
        503 => "Service Unavailable",
        _ => "Status",
    }
}

/// Behaviour of the stub external scorer.
#[derive(Debug, Clone)]
pub enum StubScorerBehavior {
    /// Always answer `{"score": v}`.
    Fixed(f64),
    /// Answer `{"score": v}` after sleeping.
    Delayed(Duration, f64),
    /// Answer with the given raw body and status.
    Raw(u16, String),
    /// Score = number of comments in the request divided by `n`, capped at 1.
    PrefixLength(usize),
}

#[derive(Deserialize)]
struct ScoreRequest {
    comments: Vec<serde_json::Value>,
}

/// Stub implementation of the external scorer wire protocol.
pub fn stub_scorer(behavior: StubScorerBehavior) -> io::Result<StubServer> {
    StubServer::start(move |req| {
        if req.method != "POST" {
            return StubResponse::json(400, r#"{"error":"POST expected"}"#.into());
        }
        let parsed: Result<ScoreRequest, _> = serde_json::from_slice(&req.body);
        let Ok(parsed) = parsed else {
            return StubResponse::json(400, r#"{"error":"bad request"}"#.into());
        };
        match &behavior {
            StubScorerBehavior::Fixed(v) => StubResponse::json(200, format!(r#"{{"score": {v}}}"#)),
            StubScorerBehavior::Delayed(d, v) => {
                StubResponse::json(200, format!(r#"{{"score": {v}}}"#)).delayed(*d)
            }
            StubScorerBehavior::Raw(status, body) => StubResponse::json(*status, body.clone()),
            StubScorerBehavior::PrefixLength(n) => {
                let v = (parsed.comments.len() as f64 / *n as f64).min(1.0);
                StubResponse::json(200, format!(r#"{{"score": {v}}}"#))
            }
        }
    })
}
