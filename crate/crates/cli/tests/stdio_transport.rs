use std::sync::{Arc, Barrier};
use std::thread;
use std::time::Duration;

use nalgebra::DMatrix;
use tabgfm::tabular::{Endpoint, ExternalLearner, LearnerError, LearnerTask, TabularLearner};

const BIN: &str = env!("CARGO_BIN_EXE_tabgfm");

fn connect(endpoint: &str, timeout: Duration) -> ExternalLearner {
    ExternalLearner::connect(&endpoint.parse::<Endpoint>().unwrap(), timeout).unwrap()
}

fn call(l: &ExternalLearner, id: &str, seed: u64) -> Result<DMatrix<f64>, LearnerError> {
    call_with(l, id, seed, 3)
}

fn call_with(l: &ExternalLearner, id: &str, seed: u64, num_queries: usize) -> Result<DMatrix<f64>, LearnerError> {
    let context = DMatrix::from_row_slice(4, 2, &[0.0, 0.0, 0.1, 0.0, 1.0, 1.0, 0.9, 1.0]);
    let queries = DMatrix::from_fn(num_queries, 2, |i, j| (i + j) as f64 / 4.0);
    l.fit_predict(&LearnerTask {
        id,
        seed,
        num_classes: 2,
        context: &context,
        labels: &[0, 0, 1, 1],
        queries: &queries,
        columns: &[0, 1],
    })
}

#[test]
fn out_of_order_responses_are_matched_by_id() {
    // The bridge holds the first request until the second arrives, then
    // answers both in reverse order. The tasks differ in query count, so a
    // response routed to the wrong request fails the shape check.
    let l = Arc::new(connect(&format!("stdio:{BIN} echo-bridge --reorder 2"), Duration::from_secs(30)));
    let barrier = Arc::new(Barrier::new(2));
    let handles: Vec<_> = [3usize, 5]
        .into_iter()
        .map(|n| {
            let (l, barrier) = (Arc::clone(&l), Arc::clone(&barrier));
            thread::spawn(move || {
                barrier.wait();
                call_with(&l, &format!("task{n}"), n as u64, n)
            })
        })
        .collect();
    for (h, n) in handles.into_iter().zip([3, 5]) {
        let probs = h.join().unwrap().unwrap();
        assert_eq!(probs.shape(), (n, 2));
    }
}

#[test]
fn echoed_request_is_malformed() {
    let l = connect("stdio:cat", Duration::from_secs(10));
    assert!(matches!(call(&l, "t", 0), Err(LearnerError::Malformed(_))));
}

#[test]
fn exited_process_is_transport_error() {
    let l = connect("stdio:true", Duration::from_secs(10));
    assert!(matches!(call(&l, "t", 0), Err(LearnerError::Transport(_))));
    assert!(matches!(call(&l, "t", 1), Err(LearnerError::Transport(_))));
}

#[test]
fn missing_program_is_transport_error() {
    let endpoint = "stdio:/nonexistent/learner".parse::<Endpoint>().unwrap();
    assert!(matches!(
        ExternalLearner::connect(&endpoint, Duration::from_secs(1)),
        Err(LearnerError::Transport(_))
    ));
}

#[test]
fn silent_process_times_out() {
    let timeout = Duration::from_millis(300);
    let l = connect("stdio:sleep 30", timeout);
    match call(&l, "t", 0) {
        Err(LearnerError::Timeout(t)) => assert_eq!(t, timeout),
        other => panic!("{other:?}"),
    }
}
