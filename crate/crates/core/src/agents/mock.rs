//! A minimal local chat-completions endpoint for tests and demos.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;
use std::thread;

use parking_lot::Mutex;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
pub struct MockReply {
    pub status: u16,
    pub body: String,
}

impl MockReply {
    /// A successful completion with the given content.
    pub fn content(text: &str) -> Self {
        MockReply { status: 200, body: json!({"choices": [{"message": {"role": "assistant", "content": text}}]}).to_string() }
    }

    pub fn status(status: u16) -> Self {
        MockReply { status, body: json!({"error": {"message": "mock"}}).to_string() }
    }

    pub fn raw(status: u16, body: &str) -> Self {
        MockReply { status, body: body.to_string() }
    }
}

enum Mode {
    Echo,
    Scripted(Vec<MockReply>),
}

struct Shared {
    mode: Mode,
    served: usize,
    requests: Vec<Value>,
}

/// Serves on `127.0.0.1` from a background thread until dropped with the
/// process. Scripted replies are served in order, the last one repeating.
pub struct MockEndpoint {
    addr: String,
    shared: Arc<Mutex<Shared>>,
}

impl MockEndpoint {
    /// Replies with the content of the last message of each request.
    pub fn echo() -> Self {
        Self::start(Mode::Echo)
    }

    pub fn scripted(replies: Vec<MockReply>) -> Self {
        assert!(!replies.is_empty());
        Self::start(Mode::Scripted(replies))
    }

    fn start(mode: Mode) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").expect("bind mock endpoint");
        let addr = listener.local_addr().expect("local addr").to_string();
        let shared = Arc::new(Mutex::new(Shared { mode, served: 0, requests: Vec::new() }));
        let s = shared.clone();
        thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                let _ = serve(stream, &s);
            }
        });
        MockEndpoint { addr, shared }
    }

    pub fn url(&self) -> String {
        format!("http://{}/v1/chat/completions", self.addr)
    }

    /// Request bodies received so far.
    pub fn requests(&self) -> Vec<Value> {
        self.shared.lock().requests.clone()
    }
}

fn serve(stream: TcpStream, shared: &Mutex<Shared>) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut len = 0usize;
    loop {
        let mut line = String::new();
        if reader.read_line(&mut line)? == 0 {
            return Ok(());
        }
        let l = line.trim_end();
        if l.is_empty() {
            break;
        }
        if let Some((k, v)) = l.split_once(':') {
            if k.trim().eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; len];
    reader.read_exact(&mut body)?;
    let request: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
    let reply = {
        let mut s = shared.lock();
        s.requests.push(request.clone());
        let reply = match &s.mode {
            Mode::Echo => {
                let last = request["messages"].as_array().and_then(|m| m.last()).and_then(|m| m["content"].as_str()).unwrap_or("");
                MockReply::content(last)
            }
            Mode::Scripted(rs) => rs[s.served.min(rs.len() - 1)].clone(),
        };
        s.served += 1;
        reply
    };
    let mut stream = stream;
    write!(
        stream,
        "HTTP/1.1 {} MOCK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{}",
        reply.status,
        reply.body.len(),
        reply.body
    )?;
    stream.flush()
}
