//! Adapter that lets any executable speaking the line protocol act as the
//! teacher.
//!
//! Protocol: the child prints `DDT-TEACHER 1` on startup; each request is a
//! header `PREDICT <n> <p>` followed by n comma-separated rows (categorical
//! values as level strings); the reply is n lines, one response each. Calls
//! are serialized through an internal lock, one in-flight batch at a time.

use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use crate::error::{DdtError, Result};
use crate::schema::{CovariateKind, CovariateSchema, ResponseKind};
use crate::teacher::Teacher;

pub const HANDSHAKE: &str = "DDT-TEACHER 1";
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

struct Pipes {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

pub struct ExternalTeacher {
    pipes: Mutex<Pipes>,
    stderr_tail: Arc<Mutex<VecDeque<String>>>,
    schema: CovariateSchema,
    timeout: Duration,
    command: String,
}

/// Start `command` (via `sh -c`) and perform the handshake.
pub fn connect_external_teacher(
    command: &str,
    schema: &CovariateSchema,
    timeout: Option<Duration>,
) -> Result<ExternalTeacher> {
    let timeout = timeout.unwrap_or(DEFAULT_TIMEOUT);
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| DdtError::Teacher(format!("cannot start `{command}`: {e}")))?;

    let stdin = child.stdin.take().expect("piped stdin");
    let stdout = child.stdout.take().expect("piped stdout");
    let stderr = child.stderr.take().expect("piped stderr");

    let stderr_tail = Arc::new(Mutex::new(VecDeque::with_capacity(32)));
    let tail = Arc::clone(&stderr_tail);
    std::thread::spawn(move || {
        for line in BufReader::new(stderr).lines().map_while(|l| l.ok()) {
            let mut t = tail.lock().expect("stderr tail lock");
            if t.len() == 32 {
                t.pop_front();
            }
            t.push_back(line);
        }
    });

    let (tx, lines) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let mut reader = BufReader::new(stdout);
        loop {
            let mut line = String::new();
            match reader.read_line(&mut line) {
                Ok(0) => break,
                Ok(_) => {
                    if tx.send(Ok(line.trim_end().to_string())).is_err() {
                        break;
                    }
                }
                Err(e) => {
                    let _ = tx.send(Err(e));
                    break;
                }
            }
        }
    });

    let teacher = ExternalTeacher {
        pipes: Mutex::new(Pipes { child, stdin, lines }),
        stderr_tail,
        schema: schema.clone(),
        timeout,
        command: command.to_string(),
    };
    {
        let pipes = teacher.pipes.lock().expect("pipes lock");
        let first = teacher.read_line(&pipes, "handshake")?;
        if first != HANDSHAKE {
            return Err(teacher.protocol_error(format!(
                "expected handshake `{HANDSHAKE}`, got `{first}`"
            )));
        }
    }
    Ok(teacher)
}

impl ExternalTeacher {
    fn stderr_excerpt(&self) -> String {
        let tail = self.stderr_tail.lock().expect("stderr tail lock");
        if tail.is_empty() {
            "<empty>".to_string()
        } else {
            tail.iter().cloned().collect::<Vec<_>>().join(" | ")
        }
    }

    fn protocol_error(&self, what: String) -> DdtError {
        DdtError::Teacher(format!(
            "external teacher `{}`: {what}; stderr: {}",
            self.command,
            self.stderr_excerpt()
        ))
    }

    fn read_line(&self, pipes: &Pipes, context: &str) -> Result<String> {
        match pipes.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(self.protocol_error(format!("read failed during {context}: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                Err(self.protocol_error(format!("timed out after {:?} during {context}", self.timeout)))
            }
            Err(RecvTimeoutError::Disconnected) => {
                Err(self.protocol_error(format!("process closed its output during {context}")))
            }
        }
    }

    fn format_row(&self, row: &[f64]) -> String {
        row.iter()
            .zip(&self.schema.covariates)
            .map(|(v, c)| match &c.kind {
                CovariateKind::Continuous { .. } => format!("{v}"),
                CovariateKind::Categorical { levels } => levels[*v as usize].clone(),
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    fn parse_response(&self, line: &str, row_index: usize) -> Result<f64> {
        match &self.schema.response {
            ResponseKind::Continuous => {
                let v: f64 = line.trim().parse().map_err(|_| {
                    self.protocol_error(format!("row {row_index}: `{line}` is not numeric"))
                })?;
                if !v.is_finite() {
                    return Err(self.protocol_error(format!("row {row_index}: non-finite output {v}")));
                }
                Ok(v)
            }
            ResponseKind::Categorical { classes } => classes
                .iter()
                .position(|c| c == line.trim())
                .map(|i| i as f64)
                .ok_or_else(|| {
                    self.protocol_error(format!("row {row_index}: unknown class label `{line}`"))
                }),
        }
    }
}

impl Teacher for ExternalTeacher {
    fn predict_batch(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        let mut pipes = self.pipes.lock().expect("pipes lock");
        let mut request = format!("PREDICT {} {}\n", rows.len(), self.schema.dim());
        for row in rows {
            request.push_str(&self.format_row(row));
            request.push('\n');
        }
        pipes
            .stdin
            .write_all(request.as_bytes())
            .and_then(|_| pipes.stdin.flush())
            .map_err(|e| self.protocol_error(format!("write failed: {e}")))?;

        let mut out = Vec::with_capacity(rows.len());
        for i in 0..rows.len() {
            let line = self.read_line(&pipes, &format!("reply {} of {}", i + 1, rows.len()))?;
            out.push(self.parse_response(&line, i)?);
        }
        // reap an exited child so repeated batches fail fast
        if let Ok(Some(status)) = pipes.child.try_wait() {
            if !status.success() {
                return Err(self.protocol_error(format!("process exited with {status}")));
            }
        }
        Ok(out)
    }

    fn response_kind(&self) -> ResponseKind {
        self.schema.response.clone()
    }

    fn descriptor(&self) -> String {
        format!("external `{}`", self.command)
    }
}

impl Drop for ExternalTeacher {
    fn drop(&mut self) {
        if let Ok(mut pipes) = self.pipes.lock() {
            let _ = pipes.child.kill();
            let _ = pipes.child.wait();
        }
    }
}
