//! Client for tabular learners served over the wire protocol, either as a
//! child process (one JSON line per request on stdin/stdout) or over HTTP.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, RecvTimeoutError, Sender};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use log::warn;
use nalgebra::DMatrix;

use super::learner::{LearnerError, LearnerTask, TabularLearner};
use super::protocol::{ContextRows, PredictRequest, PredictResponse, QueryRows};
use crate::predictor::BackendTag;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// Where the learner lives: `stdio:<program> [args...]` or an `http(s)://` base URL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    Stdio { program: String, args: Vec<String> },
    Http { base: String },
}

impl FromStr for Endpoint {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(cmd) = s.strip_prefix("stdio:") {
            let mut parts = cmd.split_whitespace().map(str::to_owned);
            let program = parts.next().ok_or("stdio endpoint needs a program")?;
            Ok(Self::Stdio { program, args: parts.collect() })
        } else if s.starts_with("http://") || s.starts_with("https://") {
            Ok(Self::Http { base: s.trim_end_matches('/').to_owned() })
        } else {
            Err(format!("unrecognized endpoint {s:?}; expected stdio:<cmd> or http(s)://"))
        }
    }
}

type Reply = Result<PredictResponse, LearnerError>;

/// Requests awaiting a response, keyed by id.
#[derive(Default)]
struct Inbox {
    waiters: HashMap<String, Sender<Reply>>,
    /// Set once the child's output has ended.
    closed: Option<String>,
}

struct StdioSession {
    child: Mutex<Child>,
    stdin: Mutex<ChildStdin>,
    inbox: Arc<Mutex<Inbox>>,
}

enum Transport {
    Stdio(StdioSession),
    Http { agent: ureq::Agent, url: String },
}

/// A tabular learner reached over the wire protocol. Several requests may
/// be in flight at once; responses are matched to requests by id in
/// whatever order they arrive.
pub struct ExternalLearner {
    transport: Transport,
    timeout: Duration,
    counter: AtomicU64,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|p| p.into_inner())
}

/// Routes each response line from the child to the request waiting on its id.
fn dispatch_lines(stdout: ChildStdout, inbox: Arc<Mutex<Inbox>>) {
    let mut reason = "learner process closed its output".to_string();
    for line in BufReader::new(stdout).lines() {
        let text = match line {
            Ok(text) => text,
            Err(e) => {
                reason = format!("reading learner output: {e}");
                break;
            }
        };
        if text.trim().is_empty() {
            continue;
        }
        let mut inbox = lock(&inbox);
        match serde_json::from_str::<PredictResponse>(&text) {
            Ok(response) => match inbox.waiters.remove(response.id()) {
                Some(tx) => {
                    let _ = tx.send(Ok(response));
                }
                None => warn!("learner answered unknown or expired request {:?}", response.id()),
            },
            Err(e) => {
                let id = serde_json::from_str::<serde_json::Value>(&text)
                    .ok()
                    .and_then(|v| v.get("id").and_then(|i| i.as_str()).map(str::to_owned));
                let msg = format!("{e}: {text:.200}");
                match id.and_then(|id| inbox.waiters.remove(&id)) {
                    Some(tx) => {
                        let _ = tx.send(Err(LearnerError::Malformed(msg)));
                    }
                    None => {
                        for (_, tx) in inbox.waiters.drain() {
                            let _ = tx.send(Err(LearnerError::Malformed(msg.clone())));
                        }
                    }
                }
            }
        }
    }
    let mut inbox = lock(&inbox);
    for (_, tx) in inbox.waiters.drain() {
        let _ = tx.send(Err(LearnerError::Transport(reason.clone())));
    }
    inbox.closed = Some(reason);
}

impl ExternalLearner {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self, LearnerError> {
        let transport = match endpoint {
            Endpoint::Stdio { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .stderr(Stdio::inherit())
                    .spawn()
                    .map_err(|e| LearnerError::Transport(format!("spawning {program}: {e}")))?;
                let stdin = child.stdin.take().expect("piped stdin");
                let stdout = child.stdout.take().expect("piped stdout");
                let inbox = Arc::new(Mutex::new(Inbox::default()));
                let reader_inbox = Arc::clone(&inbox);
                std::thread::spawn(move || dispatch_lines(stdout, reader_inbox));
                Transport::Stdio(StdioSession { child: Mutex::new(child), stdin: Mutex::new(stdin), inbox })
            }
            Endpoint::Http { base } => {
                let agent: ureq::Agent = ureq::Agent::config_builder()
                    .timeout_global(Some(timeout))
                    .http_status_as_error(false)
                    .build()
                    .into();
                Transport::Http { agent, url: format!("{base}/predict") }
            }
        };
        Ok(Self { transport, timeout, counter: AtomicU64::new(0) })
    }

    fn exchange(&self, request: &PredictRequest) -> Result<PredictResponse, LearnerError> {
        match &self.transport {
            Transport::Stdio(session) => {
                let (tx, rx) = mpsc::channel();
                {
                    let mut inbox = lock(&session.inbox);
                    if let Some(reason) = &inbox.closed {
                        return Err(LearnerError::Transport(reason.clone()));
                    }
                    inbox.waiters.insert(request.id.clone(), tx);
                }
                let mut line = serde_json::to_string(request).expect("request serializes");
                line.push('\n');
                let written = {
                    let mut stdin = lock(&session.stdin);
                    stdin.write_all(line.as_bytes()).and_then(|()| stdin.flush())
                };
                if let Err(e) = written {
                    lock(&session.inbox).waiters.remove(&request.id);
                    return Err(LearnerError::Transport(e.to_string()));
                }
                match rx.recv_timeout(self.timeout) {
                    Ok(reply) => reply,
                    Err(RecvTimeoutError::Timeout) => {
                        lock(&session.inbox).waiters.remove(&request.id);
                        Err(LearnerError::Timeout(self.timeout))
                    }
                    Err(RecvTimeoutError::Disconnected) => {
                        Err(LearnerError::Transport("learner output reader stopped".into()))
                    }
                }
            }
            Transport::Http { agent, url } => {
                let mut resp = agent.post(url).send_json(request).map_err(|e| match e {
                    ureq::Error::Timeout(_) => LearnerError::Timeout(self.timeout),
                    other => LearnerError::Transport(other.to_string()),
                })?;
                let status = resp.status();
                let text = resp
                    .body_mut()
                    .with_config()
                    .limit(1 << 32)
                    .read_to_string()
                    .map_err(|e| LearnerError::Transport(e.to_string()))?;
                let response: PredictResponse = serde_json::from_str(&text)
                    .map_err(|e| LearnerError::Malformed(format!("HTTP {status}: {e}: {text:.200}")))?;
                if response.id() != request.id {
                    return Err(LearnerError::Malformed(format!(
                        "response id {:?} for request {:?}",
                        response.id(),
                        request.id
                    )));
                }
                Ok(response)
            }
        }
    }
}

impl Drop for ExternalLearner {
    fn drop(&mut self) {
        if let Transport::Stdio(session) = &self.transport {
            let mut child = lock(&session.child);
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

impl TabularLearner for ExternalLearner {
    fn tag(&self) -> BackendTag {
        BackendTag::External
    }

    fn fit_predict(&self, task: &LearnerTask<'_>) -> Result<DMatrix<f64>, LearnerError> {
        let n = self.counter.fetch_add(1, Ordering::Relaxed);
        let request = PredictRequest {
            id: format!("{}#{n}", task.id),
            seed: task.seed,
            num_classes: task.num_classes,
            context: ContextRows { rows: to_rows(task.context), labels: task.labels.to_vec() },
            query: QueryRows { rows: to_rows(task.queries) },
        };
        request.check_limits().map_err(LearnerError::Limits)?;
        match self.exchange(&request)? {
            PredictResponse::Failure { error, .. } => Err(LearnerError::Remote(error)),
            PredictResponse::Success { probs, .. } => {
                if probs.len() != task.queries.nrows() {
                    return Err(LearnerError::Malformed(format!(
                        "{} probability rows for {} queries",
                        probs.len(),
                        task.queries.nrows()
                    )));
                }
                let mut out = DMatrix::zeros(probs.len(), task.num_classes);
                for (i, row) in probs.iter().enumerate() {
                    if row.len() != task.num_classes {
                        return Err(LearnerError::Malformed(format!("row {i} has {} columns", row.len())));
                    }
                    if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                        return Err(LearnerError::Malformed(format!("row {i} has invalid probabilities")));
                    }
                    let total: f64 = row.iter().sum();
                    if total <= 0.0 {
                        return Err(LearnerError::Malformed(format!("row {i} sums to zero")));
                    }
                    for (j, p) in row.iter().enumerate() {
                        out[(i, j)] = p / total;
                    }
                }
                Ok(out)
            }
        }
    }
}
