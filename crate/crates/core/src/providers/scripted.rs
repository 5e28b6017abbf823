//! Minimal HTTP server that answers requests from an ordered script.
//!
//! Fixture format: a JSON array of `{"status": 200, "body": {...},
//! "delay_ms": 0}` objects. The n-th request accepted gets the n-th entry;
//! once the script is exhausted every request receives a 500. Each
//! connection is served on its own thread so a delayed (timed-out) response
//! does not hold up the client's retry.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::Value;

fn ok_status() -> u16 {
    200
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptedResponse {
    #[serde(default = "ok_status")]
    pub status: u16,
    #[serde(default)]
    pub body: Value,
    #[serde(default)]
    pub delay_ms: u64,
}

impl ScriptedResponse {
    pub fn ok(body: Value) -> Self {
        Self { status: 200, body, delay_ms: 0 }
    }

    pub fn delayed(body: Value, delay_ms: u64) -> Self {
        Self { status: 200, body, delay_ms }
    }

    pub fn status(status: u16, body: Value) -> Self {
        Self { status, body, delay_ms: 0 }
    }
}

/// A request as the server saw it.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordedRequest {
    pub path: String,
    pub body: Value,
}

struct Shared {
    script: Mutex<std::collections::VecDeque<ScriptedResponse>>,
    requests: Mutex<Vec<RecordedRequest>>,
    stop: AtomicBool,
}

pub struct ScriptedServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    handle: Option<JoinHandle<()>>,
}

impl ScriptedServer {
    pub fn start(script: Vec<ScriptedResponse>) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared { script: Mutex::new(script.into()), requests: Mutex::new(Vec::new()), stop: AtomicBool::new(false) });
        let s = shared.clone();
        let handle = std::thread::spawn(move || {
            for stream in listener.incoming() {
                if s.stop.load(Ordering::SeqCst) {
                    break;
                }
                let Ok(stream) = stream else { continue };
                let next = s.script.lock().expect("script poisoned").pop_front();
                let s2 = s.clone();
                std::thread::spawn(move || {
                    let _ = serve(stream, next, &s2);
                });
            }
        });
        Ok(Self { addr, shared, handle: Some(handle) })
    }

    pub fn from_fixture(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let script: Vec<ScriptedResponse> =
            serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        Self::start(script)
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests(&self) -> Vec<RecordedRequest> {
        self.shared.requests.lock().expect("requests poisoned").clone()
    }

    pub fn remaining(&self) -> usize {
        self.shared.script.lock().expect("script poisoned").len()
    }
}

impl Drop for ScriptedServer {
    fn drop(&mut self) {
        self.shared.stop.store(true, Ordering::SeqCst);
        let _ = TcpStream::connect(self.addr);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn serve(stream: TcpStream, response: Option<ScriptedResponse>, shared: &Shared) -> std::io::Result<()> {
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut request_line = String::new();
    if reader.read_line(&mut request_line)? == 0 {
        return Ok(());
    }
    let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_owned();
    let mut content_length = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 || line == "\r\n" || line == "\n" {
            break;
        }
        if let Some((k, v)) = line.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                content_length = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; content_length];
    reader.read_exact(&mut body)?;
    let body = serde_json::from_slice(&body).unwrap_or(Value::Null);
    shared.requests.lock().expect("requests poisoned").push(RecordedRequest { path, body });

    let response = response.unwrap_or(ScriptedResponse::status(500, serde_json::json!({"error": "script exhausted"})));
    if response.delay_ms > 0 {
        std::thread::sleep(Duration::from_millis(response.delay_ms));
    }
    let payload = response.body.to_string();
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} Scripted\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
        response.status,
        payload.len(),
        payload
    )?;
    stream.flush()
}
