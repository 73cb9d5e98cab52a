//! Client for external scoring bridges.
//!
//! The bridge is a child process speaking newline-delimited JSON over its
//! standard streams:
//!
//! ```text
//! -> {"type":"hello","version":1}
//! <- {"type":"ready","classes":K,"input":[H,W,C]}
//! -> {"type":"score","id":n,"tensor":"/path/to/image.tnsr"}
//! <- {"type":"scores","id":n,"probs":[...]}
//! -> {"type":"bye"}
//! ```
//!
//! Requests of a batch are written before any response is read, and
//! responses may arrive in any order. Ids increase strictly over the
//! session. A bridge may answer a request with
//! `{"type":"error","id":n,"msg":"..."}`.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use relbench_core::oracle::ScoringOracle;
use relbench_core::Image;

use crate::tnsr::save_tensor;
use crate::{Error, Result};

pub const PROTOCOL_VERSION: u64 = 1;
/// Allowed deviation of a probability row's sum from 1.
pub const SUM_TOLERANCE: f64 = 1e-4;

#[derive(Debug)]
struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
    next_id: u64,
    broken: Option<String>,
}

/// A scoring oracle served by a child process.
#[derive(Debug)]
pub struct BridgeOracle {
    session: Mutex<Session>,
    classes: usize,
    input: [usize; 3],
    timeout: Duration,
    scratch: tempfile::TempDir,
}

fn violation(msg: impl Into<String>) -> Error {
    Error::ProtocolViolation(msg.into())
}

impl Session {
    fn send(&mut self, v: &Value) -> Result<()> {
        let mut line = v.to_string();
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| violation(format!("cannot write to bridge: {e}")))
    }

    fn recv(&mut self, deadline: Instant, timeout: Duration) -> Result<Value> {
        let left = deadline.saturating_duration_since(Instant::now());
        match self.lines.recv_timeout(left) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map_err(|e| violation(format!("malformed line {line:?}: {e}"))),
            Ok(Err(e)) => Err(violation(format!("cannot read from bridge: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(Error::BridgeTimeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => Err(violation("bridge closed its output")),
        }
    }
}

impl BridgeOracle {
    /// Starts `command` through `sh -c` and performs the handshake.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Config(format!("cannot start bridge `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let scratch = tempfile::Builder::new()
            .prefix("relbench-bridge")
            .tempdir()
            .map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let mut session = Session {
            child,
            stdin,
            lines: rx,
            next_id: 0,
            broken: None,
        };
        session.send(&json!({"type": "hello", "version": PROTOCOL_VERSION}))?;
        let ready = session.recv(Instant::now() + timeout, timeout)?;
        if ready["type"] != "ready" {
            return Err(violation(format!("expected ready, got {ready}")));
        }
        let classes = ready["classes"]
            .as_u64()
            .filter(|&k| k > 0)
            .ok_or_else(|| violation(format!("ready without a class count: {ready}")))? as usize;
        let input = ready["input"]
            .as_array()
            .and_then(|a| {
                let d: Option<Vec<usize>> = a.iter().map(|v| v.as_u64().map(|x| x as usize)).collect();
                d.and_then(|d| <[usize; 3]>::try_from(d).ok())
            })
            .ok_or_else(|| violation(format!("ready without [H, W, C] input dims: {ready}")))?;
        Ok(Self {
            session: Mutex::new(session),
            classes,
            input,
            timeout,
            scratch,
        })
    }

    pub fn input_dims(&self) -> [usize; 3] {
        self.input
    }

    /// Scores a batch, reassembling responses by id.
    pub fn try_score_batch(&self, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        let mut s = self.session.lock().unwrap_or_else(|p| p.into_inner());
        if let Some(why) = &s.broken {
            return Err(violation(format!("session unusable after earlier failure: {why}")));
        }
        let out = self.exchange(&mut s, images);
        if let Err(e) = &out {
            s.broken = Some(e.to_string());
        }
        out
    }

    fn exchange(&self, s: &mut Session, images: &[Image]) -> Result<Vec<Vec<f64>>> {
        let mut pending: HashMap<u64, usize> = HashMap::new();
        let mut files = Vec::with_capacity(images.len());
        for (slot, img) in images.iter().enumerate() {
            let dims = [img.height(), img.width(), img.channels()];
            if dims != self.input {
                return Err(relbench_core::Error::DimMismatch(format!(
                    "bridge expects {:?}, image is {dims:?}",
                    self.input
                ))
                .into());
            }
            let id = s.next_id;
            s.next_id += 1;
            let path = self.scratch.path().join(format!("{id}.tnsr"));
            save_tensor(&img.to_tensor(), &path)?;
            s.send(&json!({"type": "score", "id": id, "tensor": path.to_string_lossy()}))?;
            pending.insert(id, slot);
            files.push(path);
        }
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; images.len()];
        let deadline = Instant::now() + self.timeout;
        while !pending.is_empty() {
            let msg = s.recv(deadline, self.timeout)?;
            let id = msg["id"]
                .as_u64()
                .ok_or_else(|| violation(format!("response without an id: {msg}")))?;
            let slot = pending
                .remove(&id)
                .ok_or_else(|| violation(format!("response for unknown id {id}")))?;
            match msg["type"].as_str() {
                Some("scores") => {}
                Some("error") => {
                    return Err(violation(format!(
                        "bridge rejected request {id}: {}",
                        msg["msg"].as_str().unwrap_or("no message")
                    )))
                }
                _ => return Err(violation(format!("unexpected message {msg}"))),
            }
            let probs: Vec<f64> = msg["probs"]
                .as_array()
                .and_then(|a| a.iter().map(Value::as_f64).collect())
                .ok_or_else(|| violation(format!("response {id} without numeric probs")))?;
            if probs.len() != self.classes {
                return Err(violation(format!(
                    "response {id} has {} probabilities for {} classes",
                    probs.len(),
                    self.classes
                )));
            }
            let sum: f64 = probs.iter().sum();
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::NonStochasticVector { id, sum });
            }
            rows[slot] = Some(probs);
        }
        for f in files {
            let _ = std::fs::remove_file(f);
        }
        Ok(rows.into_iter().map(|r| r.expect("every slot answered")).collect())
    }
}

impl ScoringOracle for BridgeOracle {
    fn num_classes(&self) -> usize {
        self.classes
    }

    fn score_batch(&self, images: &[Image]) -> relbench_core::Result<Vec<Vec<f64>>> {
        self.try_score_batch(images).map_err(|e| match e {
            Error::Core(c) => c,
            other => relbench_core::Error::Oracle(other.to_string()),
        })
    }
}

impl Drop for BridgeOracle {
    fn drop(&mut self) {
        let s = self.session.get_mut().unwrap_or_else(|p| p.into_inner());
        let _ = s.send(&json!({"type": "bye"}));
        let until = Instant::now() + Duration::from_secs(2);
        loop {
            match s.child.try_wait() {
                Ok(Some(_)) => return,
                Ok(None) if Instant::now() < until => thread::sleep(Duration::from_millis(10)),
                _ => break,
            }
        }
        let _ = s.child.kill();
        let _ = s.child.wait();
    }
}
