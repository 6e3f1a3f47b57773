//! Subprocess transport: one wire-JSON request per line on the child's
//! stdin, one response per line on its stdout. Stderr is left alone for the
//! child's logs. Calls are serialized over the single pipe pair, so this
//! transport declares a concurrency capacity of 1.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use crate::adapter::wire::{response_to_prediction, WireError, WireRequest, WireResponse};
use crate::adapter::{AdapterError, ModelPrediction, QaModel};
use crate::corpus::Article;

struct ProcessIo {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

pub struct SubprocessModel {
    io: Mutex<ProcessIo>,
    timeout: Duration,
    seed: Option<u64>,
    relevance_threshold: f64,
}

impl SubprocessModel {
    pub fn spawn(
        argv: &[String],
        timeout: Duration,
        seed: Option<u64>,
        relevance_threshold: f64,
    ) -> Result<Self, AdapterError> {
        let mut child = Command::new(&argv[0])
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| AdapterError::Transport(format!("cannot spawn {argv:?}: {e}")))?;
        let stdin = child.stdin.take().expect("stdin was piped");
        let stdout = child.stdout.take().expect("stdout was piped");
        let (tx, lines) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            io: Mutex::new(ProcessIo {
                child,
                stdin,
                lines,
            }),
            timeout,
            seed,
            relevance_threshold,
        })
    }
}

impl QaModel for SubprocessModel {
    fn predict(
        &self,
        question: &str,
        context: &[Article],
    ) -> Result<ModelPrediction, AdapterError> {
        let io = &mut *self
            .io
            .lock()
            .map_err(|_| AdapterError::Transport("subprocess state poisoned".into()))?;
        // Drop any stale line left over from a previously timed-out call so
        // requests and responses stay paired up.
        while io.lines.try_recv().is_ok() {}

        let request = WireRequest {
            question: question.to_string(),
            context: context.to_vec(),
            seed: self.seed,
        };
        let line = serde_json::to_string(&request).expect("requests serialize");
        writeln!(io.stdin, "{line}")
            .and_then(|()| io.stdin.flush())
            .map_err(|e| AdapterError::Transport(format!("writing request: {e}")))?;

        let reply = match io.lines.recv_timeout(self.timeout) {
            Ok(Ok(reply)) => reply,
            Ok(Err(e)) => return Err(AdapterError::Transport(format!("reading response: {e}"))),
            Err(RecvTimeoutError::Timeout) => return Err(AdapterError::Timeout(self.timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                return Err(AdapterError::Transport("subprocess closed its stdout".into()))
            }
        };
        match serde_json::from_str::<WireResponse>(&reply) {
            Ok(response) => {
                response_to_prediction(response, context, self.relevance_threshold)
                    .map_err(|e| AdapterError::protocol(e, &reply))
            }
            Err(_) => match serde_json::from_str::<WireError>(&reply) {
                Ok(we) => Err(AdapterError::protocol(
                    format!("model reported: {}", we.error),
                    &reply,
                )),
                Err(e) => Err(AdapterError::protocol(
                    format!("unparseable response: {e}"),
                    &reply,
                )),
            },
        }
    }

    fn max_concurrency(&self) -> usize {
        1
    }
}

impl Drop for SubprocessModel {
    fn drop(&mut self) {
        if let Ok(io) = self.io.get_mut() {
            let _ = io.child.kill();
            let _ = io.child.wait();
        }
    }
}
