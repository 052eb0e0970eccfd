use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use jammin_core::{FormatTag, TimeSig, TrackContext};
use jammin_gen::{
    build_edit_prompt, build_generate_prompt, Backend, BackendConfig, BackendError, GenRequest, HttpBackend, Prompt,
    Purpose,
};

fn prompt() -> Prompt {
    let req = GenRequest::generate("funky bassline", TrackContext::new("Bass", 120.0, TimeSig::COMMON), FormatTag::Abc);
    Prompt { messages: build_generate_prompt(&req), purpose: Purpose::Generate(FormatTag::Abc), clip_name: req.clip_name }
}

fn config(base_url: String, key_var: &str) -> BackendConfig {
    BackendConfig {
        base_url,
        model_name: "test-model".into(),
        api_key_env_var: key_var.into(),
        request_timeout_s: 2.0,
        ..Default::default()
    }
}

/// Serves one HTTP request with a canned status and body, handing back the
/// request head and body.
fn one_shot_server(status: u16, body: &'static str) -> (String, mpsc::Receiver<(String, String)>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let (tx, rx) = mpsc::channel();
    std::thread::spawn(move || {
        let (stream, _) = listener.accept().unwrap();
        let mut reader = BufReader::new(stream.try_clone().unwrap());
        let mut head = String::new();
        let mut content_length = 0;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                content_length = v.trim().parse().unwrap();
            }
            if line == "\r\n" {
                break;
            }
            head.push_str(&line);
        }
        let mut req_body = vec![0; content_length];
        reader.read_exact(&mut req_body).unwrap();
        let mut stream = stream;
        write!(
            stream,
            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
            body.len()
        )
        .unwrap();
        tx.send((head, String::from_utf8(req_body).unwrap())).unwrap();
    });
    (url, rx)
}

#[test]
fn successful_completion_sends_chat_request() {
    std::env::set_var("JAMMIN_TEST_KEY_OK", "sk-test-123");
    let (url, rx) = one_shot_server(200, r#"{"choices":[{"message":{"role":"assistant","content":"| C | G |"}}]}"#);
    let backend = HttpBackend::new(config(url, "JAMMIN_TEST_KEY_OK")).unwrap();
    assert_eq!(backend.complete(&prompt()).unwrap(), "| C | G |");
    let (head, body) = rx.recv().unwrap();
    assert!(head.starts_with("POST /v1/chat/completions "), "{head}");
    assert!(head.contains("Bearer sk-test-123"));
    let json: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(json["model"], "test-model");
    assert_eq!(json["temperature"], 0.7);
    assert_eq!(json["max_tokens"], 1024);
    assert_eq!(json["messages"][0]["role"], "system");
    assert_eq!(json["messages"][1]["role"], "user");
}

#[test]
fn status_codes_map_to_distinct_errors() {
    std::env::set_var("JAMMIN_TEST_KEY_STATUS", "k");
    let cases: [(u16, &'static str); 4] = [(401, "{}"), (429, "{}"), (500, "boom"), (200, "not json")];
    let mut got = Vec::new();
    for (status, body) in cases {
        let (url, _rx) = one_shot_server(status, body);
        got.push(HttpBackend::new(config(url, "JAMMIN_TEST_KEY_STATUS")).unwrap().complete(&prompt()).unwrap_err());
    }
    assert!(matches!(got[0], BackendError::Auth(_)));
    assert_eq!(got[1], BackendError::RateLimited);
    assert_eq!(got[2], BackendError::Http { status: 500, body: "boom".into() });
    assert!(matches!(got[3], BackendError::BadResponse(_)));
}

#[test]
fn missing_key_fails_before_any_network_use() {
    // The listener would record a connection if one were made.
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    listener.set_nonblocking(true).unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let backend = HttpBackend::new(config(url, "JAMMIN_TEST_KEY_DEFINITELY_UNSET")).unwrap();
    assert!(matches!(backend.complete(&prompt()), Err(BackendError::Auth(_))));
    assert!(listener.accept().is_err(), "a connection was attempted");
}

#[test]
fn unreachable_server_is_a_transport_error_within_timeout() {
    std::env::set_var("JAMMIN_TEST_KEY_UNREACH", "k");
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let backend = HttpBackend::new(config(format!("http://127.0.0.1:{port}"), "JAMMIN_TEST_KEY_UNREACH")).unwrap();
    let started = Instant::now();
    let err = backend.complete(&prompt()).unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
    assert!(started.elapsed() < Duration::from_secs(3));
}

#[test]
fn silent_server_times_out() {
    std::env::set_var("JAMMIN_TEST_KEY_SLOW", "k");
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let hold = std::thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        std::thread::sleep(Duration::from_secs(2));
        drop(s);
    });
    let cfg = BackendConfig { request_timeout_s: 0.5, ..config(url, "JAMMIN_TEST_KEY_SLOW") };
    let err = HttpBackend::new(cfg).unwrap().complete(&prompt()).unwrap_err();
    assert!(matches!(err, BackendError::Timeout(_)), "{err:?}");
    hold.join().unwrap();
}

#[test]
fn prompts_carry_no_secrets_or_protocol_details() {
    std::env::set_var("JAMMIN_TEST_KEY_SCAN", "sk-secret-value");
    let track = TrackContext::new("Drums", 120.0, TimeSig::COMMON);
    let mut all = Vec::new();
    for f in [FormatTag::Abc, FormatTag::ChordSymbols, FormatTag::DrumTab] {
        all.extend(build_generate_prompt(&GenRequest::generate("4 bar thing", track.clone(), f)));
    }
    all.extend(build_edit_prompt(&GenRequest::edit("make it minor", track, "X:1\nK:C\nC|")));
    for m in all {
        assert!(!m.content.contains("sk-secret-value"));
        assert!(!m.content.contains("/jammin"));
        assert!(!m.content.contains("JAMMIN_API_KEY"));
        assert!(!m.content.trim().is_empty());
    }
}
