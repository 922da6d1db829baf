use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{FrameSource, SemanticFrame};

use super::{FrameRecord, SrlBackend};

#[derive(Serialize)]
struct Request<'a> {
    tokens: &'a [String],
}

#[derive(Deserialize)]
struct Response {
    #[serde(default)]
    frames: Vec<FrameRecord>,
    #[serde(default)]
    error: Option<String>,
}

struct Pipe {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
}

/// Adapter for an external SRL tool speaking line-delimited JSON.
///
/// For each sentence one request `{"tokens": [...]}` is written to the
/// child's stdin and one response line is read back, either
/// `{"frames": [<sidecar frame objects>]}` or `{"error": "..."}`.
pub struct SubprocessBackend {
    name: String,
    version: String,
    program: String,
    args: Vec<String>,
    pipe: Mutex<Option<Pipe>>,
}

impl SubprocessBackend {
    pub fn new(program: impl Into<String>, args: Vec<String>, version: impl Into<String>) -> Self {
        let program = program.into();
        Self {
            name: format!("subprocess:{program}"),
            version: version.into(),
            program,
            args,
            pipe: Mutex::new(None),
        }
    }

    /// Splits a shell-like command line on whitespace.
    pub fn from_command_line(cmd: &str, version: impl Into<String>) -> Result<Self> {
        let mut parts = cmd.split_whitespace().map(String::from);
        let program = parts
            .next()
            .ok_or_else(|| Error::Config("empty SRL command".into()))?;
        Ok(Self::new(program, parts.collect(), version))
    }

    fn fail(&self, reason: impl Into<String>) -> Error {
        Error::Backend {
            backend: self.name.clone(),
            reason: reason.into(),
        }
    }

    fn spawn(&self) -> Result<Pipe> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| self.fail(format!("cannot start: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(Pipe {
            child,
            stdin,
            stdout,
        })
    }

    fn roundtrip(&self, pipe: &mut Pipe, sentence: &[String]) -> Result<Response> {
        let mut line = serde_json::to_string(&Request { tokens: sentence })
            .map_err(|e| self.fail(e.to_string()))?;
        line.push('\n');
        pipe.stdin
            .write_all(line.as_bytes())
            .and_then(|_| pipe.stdin.flush())
            .map_err(|e| self.fail(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = pipe
            .stdout
            .read_line(&mut reply)
            .map_err(|e| self.fail(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(self.fail("process closed its output"));
        }
        serde_json::from_str(&reply).map_err(|e| self.fail(format!("bad response: {e}")))
    }
}

impl SrlBackend for SubprocessBackend {
    fn name(&self) -> &str {
        &self.name
    }

    fn version(&self) -> &str {
        &self.version
    }

    fn label(&self, sentence: &[String]) -> Result<Vec<SemanticFrame>> {
        let mut guard = self.pipe.lock().unwrap_or_else(|p| p.into_inner());
        if guard.is_none() {
            *guard = Some(self.spawn()?);
        }
        let pipe = guard.as_mut().expect("spawned above");
        let response = match self.roundtrip(pipe, sentence) {
            Ok(r) => r,
            Err(e) => {
                // The pipe is unusable after an I/O failure; respawn next time.
                if let Some(mut dead) = guard.take() {
                    let _ = dead.child.kill();
                    let _ = dead.child.wait();
                }
                return Err(e);
            }
        };
        if let Some(err) = response.error {
            return Err(self.fail(err));
        }
        Ok(response
            .frames
            .into_iter()
            .map(|f| f.into_frame(FrameSource::Document))
            .collect())
    }
}

impl Drop for SubprocessBackend {
    fn drop(&mut self) {
        if let Some(mut pipe) = self.pipe.get_mut().ok().and_then(Option::take) {
            drop(pipe.stdin);
            let _ = pipe.child.wait();
        }
    }
}
