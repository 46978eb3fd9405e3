use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::thread;
use std::time::Duration;

use nalgebra::DMatrix;
use tabgfm::tabular::protocol::{echo_response, PredictRequest};
use tabgfm::tabular::{Endpoint, ExternalLearner, LearnerError, LearnerTask, TabularLearner};

/// Serves `/predict` with `respond(request_body) -> (status, body)` until the
/// test process exits. Returns the base URL.
fn serve<F>(delay: Duration, respond: F) -> String
where
    F: Fn(&str) -> (u16, String) + Send + 'static,
{
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let base = format!("http://{}", listener.local_addr().unwrap());
    thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut length = 0;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let line = line.trim_end();
                if line.is_empty() {
                    break;
                }
                if let Some((k, v)) = line.split_once(':') {
                    if k.eq_ignore_ascii_case("content-length") {
                        length = v.trim().parse().unwrap();
                    }
                }
            }
            let mut body = vec![0; length];
            if reader.read_exact(&mut body).is_err() {
                continue;
            }
            thread::sleep(delay);
            let (status, reply) = respond(&String::from_utf8(body).unwrap());
            let mut stream = stream;
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
                reply.len()
            );
        }
    });
    base
}

fn learner(base: &str, timeout: Duration) -> ExternalLearner {
    ExternalLearner::connect(&base.parse::<Endpoint>().unwrap(), timeout).unwrap()
}

fn call(l: &ExternalLearner) -> Result<DMatrix<f64>, LearnerError> {
    let context = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 1.0, 1.0, 0.9, 1.0]);
    let queries = DMatrix::from_row_slice(3, 2, &[0.0, 0.1, 1.0, 0.9, 0.5, 0.5]);
    l.fit_predict(&LearnerTask {
        id: "t",
        seed: 7,
        num_classes: 2,
        context: &context,
        labels: &[0, 0, 1, 1],
        queries: &queries,
        columns: &[0, 1],
    })
}

fn request_id(body: &str) -> String {
    serde_json::from_str::<PredictRequest>(body).unwrap().id
}

#[test]
fn echo_server_round_trip() {
    let base = serve(Duration::ZERO, |body| (200, echo_response(body)));
    let l = learner(&base, Duration::from_secs(10));
    let a = call(&l).unwrap();
    assert_eq!(a.shape(), (3, 2));
    for row in a.row_iter() {
        assert!((row.sum() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn wrong_row_count_is_malformed() {
    let base = serve(Duration::ZERO, |body| {
        (200, format!(r#"{{"id":"{}","probs":[[0.5,0.5]]}}"#, request_id(body)))
    });
    assert!(matches!(call(&learner(&base, Duration::from_secs(10))), Err(LearnerError::Malformed(_))));
}

#[test]
fn mismatched_id_is_malformed() {
    let base = serve(Duration::ZERO, |_| (200, r#"{"id":"other","probs":[[1,0],[1,0],[1,0]]}"#.into()));
    match call(&learner(&base, Duration::from_secs(10))) {
        Err(LearnerError::Malformed(msg)) => assert!(msg.contains("other")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn failure_body_is_remote_error() {
    let base = serve(Duration::ZERO, |body| (500, format!(r#"{{"id":"{}","error":"model exploded"}}"#, request_id(body))));
    match call(&learner(&base, Duration::from_secs(10))) {
        Err(LearnerError::Remote(msg)) => assert_eq!(msg, "model exploded"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn garbage_body_is_malformed() {
    let base = serve(Duration::ZERO, |_| (502, "<html>bad gateway</html>".into()));
    assert!(matches!(call(&learner(&base, Duration::from_secs(10))), Err(LearnerError::Malformed(_))));
}

#[test]
fn unreachable_server_is_transport_error() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let l = learner(&format!("http://127.0.0.1:{port}"), Duration::from_secs(5));
    assert!(matches!(call(&l), Err(LearnerError::Transport(_))));
}

#[test]
fn slow_server_times_out() {
    let base = serve(Duration::from_secs(3), |body| (200, echo_response(body)));
    let timeout = Duration::from_millis(300);
    match call(&learner(&base, timeout)) {
        Err(LearnerError::Timeout(t)) => assert_eq!(t, timeout),
        other => panic!("{other:?}"),
    }
}
