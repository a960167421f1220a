use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use lcm_core::oracle::{synthetic_grammar, BackendKind, Budget, Oracle, OracleConfig, OracleError, TemplateKind};

#[test]
fn synthetic_grammar_snapshot() {
    assert_eq!(
        synthetic_grammar(1, TemplateKind::TopicExpansion, "RootA", 5),
        ["1. RootA networks", "2. RootA trade", "3. RootA pricing", "4. RootA technology", "5. RootA policy"]
    );
    assert_eq!(
        synthetic_grammar(1, TemplateKind::CausalStatements, "RootA", 5),
        [
            "1. Roota investment causes roota participation.",
            "2. Unemployment leads to inflation.",
            "3. Roota supply causes economic uncertainty.",
            "4. Interest rates leads to roota output.",
            "5. Economic uncertainty causes roota supply.",
        ]
    );
}

/// Serves `statuses` in order, one per connection, recording request bodies.
fn mock_server(statuses: Vec<u16>) -> (String, Arc<Mutex<Vec<String>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/chat/completions", listener.local_addr().unwrap());
    let bodies = Arc::new(Mutex::new(Vec::new()));
    let seen = bodies.clone();
    thread::spawn(move || {
        for status in statuses {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" || line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            seen.lock().unwrap().push(String::from_utf8(body).unwrap());
            let payload = if status == 200 {
                r#"{"choices":[{"message":{"role":"assistant","content":"1. credit growth\n2. housing"}}]}"#
            } else {
                r#"{"error":"busy"}"#
            };
            let reply = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, bodies)
}

fn remote(url: &str, retries: u32) -> Oracle {
    Oracle::new(OracleConfig {
        backend: BackendKind::Remote,
        endpoint_url: Some(url.to_string()),
        model_name: "test-model".into(),
        retries,
        timeout_secs: 5,
        backoff_base_ms: 1,
        backoff_cap_ms: 2,
        ..OracleConfig::default()
    })
    .unwrap()
}

#[test]
fn remote_wire_shape_and_single_debit_on_retry() {
    let (url, bodies) = mock_server(vec![503, 200]);
    let o = remote(&url, 3);
    let budget = Budget::new(5);
    let text = o.generate_with_budget("List things.", Some(&budget)).unwrap();
    assert_eq!(text, "1. credit growth\n2. housing");
    assert_eq!(budget.remaining(), 4);
    let bodies = bodies.lock().unwrap();
    assert_eq!(bodies.len(), 2);
    let req: serde_json::Value = serde_json::from_str(&bodies[1]).unwrap();
    assert_eq!(req["model"], "test-model");
    assert_eq!(req["messages"][0]["role"], "user");
    assert_eq!(req["messages"][0]["content"], "List things.");
    assert_eq!(req["max_tokens"], 512);
    assert!(req.get("temperature").is_none());
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let port = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    let o = remote(&format!("http://127.0.0.1:{port}/v1"), 2);
    let budget = Budget::new(3);
    match o.generate_with_budget("x", Some(&budget)) {
        Err(OracleError::TransportError { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(budget.remaining(), 2);
}
