use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use wmplan_core::gateway::{ChatBackend, ChatRequest, Decoding, GatewayError, Message};
use wmplan_core::ComponentTag;
use wmplan_harness::config::HttpConfig;
use wmplan_harness::http::HttpBackend;

/// Serves one scripted (status, body) per connection and records each request.
fn serve(script: Vec<(u16, String)>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, body) in script {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream);
            let mut head = String::new();
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            head.push_str(&String::from_utf8(buf).unwrap());
            log.lock().unwrap().push(head);
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            reader.get_mut().write_all(resp.as_bytes()).unwrap();
        }
    });
    (format!("http://{addr}/v1"), seen)
}

fn config(base_url: String, max_retries: u32) -> HttpConfig {
    HttpConfig { base_url, model: "test-model".into(), max_retries, backoff_ms: 1, timeout_secs: 5 }
}

fn request() -> ChatRequest {
    ChatRequest {
        tag: ComponentTag::Planner,
        messages: vec![Message::system("sys"), Message::user("hello")],
        decoding: Decoding { temperature: 0.0, max_tokens: 64 },
        attempt: 0,
    }
}

const OK: &str = r#"{"choices":[{"message":{"role":"assistant","content":"TASK COMPLETE"}}],"usage":{"prompt_tokens":12,"completion_tokens":2}}"#;

#[test]
fn sends_openai_body_and_reads_usage() {
    let (url, seen) = serve(vec![(200, OK.into())]);
    let mut b = HttpBackend::new(&config(url, 0), Some("sk-test".into())).unwrap();
    let c = b.complete(&request()).unwrap();
    assert_eq!(c.text, "TASK COMPLETE");
    let u = c.usage.unwrap();
    assert_eq!((u.prompt_tokens, u.completion_tokens), (12, 2));

    let req = seen.lock().unwrap()[0].clone();
    assert!(req.starts_with("POST /v1/chat/completions "));
    assert!(req.to_ascii_lowercase().contains("authorization: bearer sk-test"));
    let body: serde_json::Value = serde_json::from_str(req.split("\r\n\r\n").nth(1).unwrap()).unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["max_tokens"], 64);
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["messages"][1]["content"], "hello");
}

#[test]
fn retries_transient_failures() {
    let (url, seen) = serve(vec![(503, "{}".into()), (429, "{}".into()), (200, OK.into())]);
    let mut b = HttpBackend::new(&config(url, 2), None).unwrap();
    assert_eq!(b.complete(&request()).unwrap().text, "TASK COMPLETE");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn gives_up_after_retry_limit() {
    let (url, seen) = serve(vec![(500, "{}".into()), (500, "{}".into())]);
    let mut b = HttpBackend::new(&config(url, 1), None).unwrap();
    match b.complete(&request()) {
        Err(GatewayError::BackendUnavailable(msg)) => assert!(msg.contains("2 attempts"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let (url, seen) = serve(vec![(401, r#"{"error":"bad key"}"#.into())]);
    let mut b = HttpBackend::new(&config(url, 3), None).unwrap();
    match b.complete(&request()) {
        Err(GatewayError::BackendUnavailable(msg)) => assert!(msg.contains("401"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert_eq!(seen.lock().unwrap().len(), 1);
}

#[test]
fn unreachable_endpoint_is_backend_unavailable() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut b = HttpBackend::new(&config(format!("http://127.0.0.1:{port}/v1"), 1), None).unwrap();
    assert!(matches!(b.complete(&request()), Err(GatewayError::BackendUnavailable(_))));
}
