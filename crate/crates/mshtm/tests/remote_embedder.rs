//! Exercises the remote embedding client against a minimal in-process HTTP
//! server: batching, ordering, retry behavior, auth, and contract checks.

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use mshtm::embedder::{
    EmbedError, EmbedProvider, Embedder, EmbedderConfig, RetryPolicy,
};

#[derive(Clone, Copy)]
enum Reply {
    /// 200 with one embedding per input: [len + 1, first byte].
    Embeddings,
    /// The given HTTP status with an empty JSON body.
    Status(u16),
    /// 200 but with one embedding too few.
    ShortCount,
    /// 200 with embeddings of the given dimension (all ones).
    FixedDim(usize),
    /// 200 with a body that is not JSON.
    Garbage,
}

struct Stub {
    endpoint: String,
    bodies: Arc<Mutex<Vec<serde_json::Value>>>,
    headers: Arc<Mutex<Vec<String>>>,
}

impl Stub {
    fn request_count(&self) -> usize {
        self.bodies.lock().unwrap().len()
    }
}

fn expected_vector(sentence: &str) -> [f64; 2] {
    let raw = [sentence.len() as f64 + 1.0, sentence.bytes().next().unwrap_or(65) as f64];
    let norm = (raw[0] * raw[0] + raw[1] * raw[1]).sqrt();
    [raw[0] / norm, raw[1] / norm]
}

fn spawn_stub(replies: Vec<Reply>) -> Stub {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let endpoint = format!("http://{}/embed", listener.local_addr().unwrap());
    let bodies: Arc<Mutex<Vec<serde_json::Value>>> = Arc::default();
    let headers: Arc<Mutex<Vec<String>>> = Arc::default();

    let thread_bodies = Arc::clone(&bodies);
    let thread_headers = Arc::clone(&headers);
    std::thread::spawn(move || {
        let mut replies = replies.into_iter();
        while let Ok((stream, _)) = listener.accept() {
            let reply = replies.next().unwrap_or(Reply::Embeddings);
            handle_connection(stream, reply, &thread_bodies, &thread_headers);
        }
    });

    Stub { endpoint, bodies, headers }
}

fn handle_connection(
    mut stream: TcpStream,
    reply: Reply,
    bodies: &Mutex<Vec<serde_json::Value>>,
    headers: &Mutex<Vec<String>>,
) {
    let mut buf = Vec::new();
    let mut chunk = [0u8; 4096];
    let header_end = loop {
        match stream.read(&mut chunk) {
            Ok(0) => return,
            Ok(n) => {
                buf.extend_from_slice(&chunk[..n]);
                if let Some(pos) = find_header_end(&buf) {
                    break pos;
                }
            }
            Err(_) => return,
        }
    };
    let header_text = String::from_utf8_lossy(&buf[..header_end]).to_string();
    let content_length: usize = header_text
        .lines()
        .find_map(|l| {
            let (name, value) = l.split_once(':')?;
            name.eq_ignore_ascii_case("content-length").then(|| value.trim().parse().ok())?
        })
        .unwrap_or(0);
    let body_start = header_end + 4;
    while buf.len() < body_start + content_length {
        match stream.read(&mut chunk) {
            Ok(0) => break,
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(_) => return,
        }
    }

    let body: serde_json::Value =
        serde_json::from_slice(&buf[body_start..body_start + content_length])
            .unwrap_or(serde_json::Value::Null);
    let inputs: Vec<String> = body["inputs"]
        .as_array()
        .map(|a| a.iter().map(|v| v.as_str().unwrap_or("").to_string()).collect())
        .unwrap_or_default();
    bodies.lock().unwrap().push(body);
    headers.lock().unwrap().push(header_text);

    let (status_line, payload) = match reply {
        Reply::Embeddings => {
            let rows: Vec<Vec<f64>> = inputs
                .iter()
                .map(|s| vec![s.len() as f64 + 1.0, s.bytes().next().unwrap_or(65) as f64])
                .collect();
            ("200 OK", serde_json::json!({ "embeddings": rows }).to_string())
        }
        Reply::Status(code) => {
            let line: &'static str = match code {
                400 => "400 Bad Request",
                401 => "401 Unauthorized",
                429 => "429 Too Many Requests",
                500 => "500 Internal Server Error",
                503 => "503 Service Unavailable",
                _ => "500 Internal Server Error",
            };
            (line, "{}".to_string())
        }
        Reply::ShortCount => {
            let rows: Vec<Vec<f64>> =
                inputs.iter().skip(1).map(|_| vec![1.0, 0.0]).collect();
            ("200 OK", serde_json::json!({ "embeddings": rows }).to_string())
        }
        Reply::FixedDim(dim) => {
            let rows: Vec<Vec<f64>> = inputs.iter().map(|_| vec![1.0; dim]).collect();
            ("200 OK", serde_json::json!({ "embeddings": rows }).to_string())
        }
        Reply::Garbage => ("200 OK", "this is not json".to_string()),
    };
    let response = format!(
        "HTTP/1.1 {status_line}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
        payload.len()
    );
    let _ = stream.write_all(response.as_bytes());
}

fn find_header_end(buf: &[u8]) -> Option<usize> {
    buf.windows(4).position(|w| w == b"\r\n\r\n")
}

fn remote_config(endpoint: &str, batch_size: usize) -> EmbedderConfig {
    EmbedderConfig {
        provider: EmbedProvider::Remote,
        endpoint: Some(endpoint.to_string()),
        model: "test-model".to_string(),
        batch_size,
        retry: RetryPolicy { max_attempts: 3, base_delay_ms: 1 },
        timeout_ms: 5_000,
        ..EmbedderConfig::default()
    }
}

fn sentences(texts: &[&str]) -> Vec<String> {
    texts.iter().map(|s| s.to_string()).collect()
}

#[test]
fn embeds_in_input_order_across_batches() {
    let stub = spawn_stub(vec![]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 2)).unwrap();
    let input = sentences(&["alpha", "be", "gamma ray", "d", "epsilon"]);
    let matrix = embedder.embed(&input).unwrap();

    assert_eq!(stub.request_count(), 3, "5 sentences at batch_size 2");
    assert_eq!(matrix.rows.nrows(), 5);
    assert_eq!(matrix.dim, 2);
    for (i, sentence) in input.iter().enumerate() {
        let want = expected_vector(sentence);
        for j in 0..2 {
            assert!(
                (matrix.rows[[i, j]] - want[j]).abs() < 1e-12,
                "row {i} col {j}: got {} want {}",
                matrix.rows[[i, j]],
                want[j]
            );
        }
    }

    let first_batch = &stub.bodies.lock().unwrap()[0];
    assert_eq!(first_batch["model"], "test-model");
    assert_eq!(first_batch["inputs"].as_array().unwrap().len(), 2);
}

#[test]
fn transient_failures_are_retried_until_success() {
    let stub = spawn_stub(vec![Reply::Status(500), Reply::Status(429), Reply::Embeddings]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    let matrix = embedder.embed(&sentences(&["hello", "world"])).unwrap();
    assert_eq!(matrix.rows.nrows(), 2);
    assert_eq!(stub.request_count(), 3);
}

#[test]
fn retry_budget_exhaustion_reports_the_last_failure() {
    let stub = spawn_stub(vec![Reply::Status(503), Reply::Status(503)]);
    let config = EmbedderConfig {
        retry: RetryPolicy { max_attempts: 2, base_delay_ms: 1 },
        ..remote_config(&stub.endpoint, 8)
    };
    let embedder = Embedder::new(config).unwrap();
    match embedder.embed(&sentences(&["x"])) {
        Err(EmbedError::RetryExhausted { attempts, last_error }) => {
            assert_eq!(attempts, 2);
            assert!(last_error.contains("503"), "last_error: {last_error}");
        }
        other => panic!("expected RetryExhausted, got {other:?}"),
    }
    assert_eq!(stub.request_count(), 2);
}

#[test]
fn client_errors_fail_without_retry() {
    let stub = spawn_stub(vec![Reply::Status(400)]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    match embedder.embed(&sentences(&["x"])) {
        Err(EmbedError::Http { status, .. }) => assert_eq!(status, 400),
        other => panic!("expected Http error, got {other:?}"),
    }
    assert_eq!(stub.request_count(), 1);
}

#[test]
fn dimension_change_between_batches_is_an_error() {
    let stub = spawn_stub(vec![Reply::FixedDim(2), Reply::FixedDim(3)]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 1)).unwrap();
    match embedder.embed(&sentences(&["a", "b"])) {
        Err(EmbedError::DimensionMismatch { expected, got, batch }) => {
            assert_eq!((expected, got, batch), (2, 3, 1));
        }
        other => panic!("expected DimensionMismatch, got {other:?}"),
    }
}

#[test]
fn short_row_count_is_a_contract_violation() {
    let stub = spawn_stub(vec![Reply::ShortCount]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    assert!(matches!(
        embedder.embed(&sentences(&["a", "b", "c"])),
        Err(EmbedError::ProviderContract(_))
    ));
}

#[test]
fn non_json_body_is_a_contract_violation() {
    let stub = spawn_stub(vec![Reply::Garbage]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    assert!(matches!(
        embedder.embed(&sentences(&["a"])),
        Err(EmbedError::ProviderContract(_))
    ));
}

#[test]
fn bearer_token_from_environment_is_attached() {
    let stub = spawn_stub(vec![Reply::Embeddings]);
    let var = "REMOTE_EMBEDDER_TEST_TOKEN_7G";
    std::env::set_var(var, "sesame");
    let config = EmbedderConfig {
        auth_token_env: Some(var.to_string()),
        ..remote_config(&stub.endpoint, 8)
    };
    let embedder = Embedder::new(config).unwrap();
    embedder.embed(&sentences(&["open up"])).unwrap();

    let headers = stub.headers.lock().unwrap();
    assert!(
        headers[0].to_ascii_lowercase().contains("authorization: bearer sesame"),
        "headers were: {}",
        headers[0]
    );
}

#[test]
fn no_token_header_without_configuration() {
    let stub = spawn_stub(vec![Reply::Embeddings]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    embedder.embed(&sentences(&["plain"])).unwrap();
    let headers = stub.headers.lock().unwrap();
    assert!(!headers[0].to_ascii_lowercase().contains("authorization"));
}

#[test]
fn remote_rows_are_normalized_on_receipt() {
    let stub = spawn_stub(vec![]);
    let embedder = Embedder::new(remote_config(&stub.endpoint, 8)).unwrap();
    let matrix = embedder.embed(&sentences(&["anything at all"])).unwrap();
    let norm = matrix.rows.row(0).dot(&matrix.rows.row(0)).sqrt();
    assert!((norm - 1.0).abs() < 1e-12);
    assert!(matrix.zero_rows.is_empty());
}
