//! Model handles: one interface over the builtin baseline, a subprocess or
//! HTTP endpoint speaking the line protocol, and recorded-probability
//! replay files, with the prediction cache in front.
//!
//! Locators:
//!
//! | locator              | backend                                      |
//! |----------------------|----------------------------------------------|
//! | `builtin:model.json` | baseline model file from `train-baseline`    |
//! | `cmd:<command line>` | child process, protocol over stdin/stdout    |
//! | `http(s)://host/base`| `POST base/hello`, `POST base/predict`       |
//! | `replay:table.jsonl` | `{"text","p_depressed"}` lines, exact match  |

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use deck_core::baseline::BaselineModel;
use deck_core::model::{ModelDescriptor, Prediction, Scorer};
use deck_core::runner::DEFAULT_BATCH_SIZE;
use serde::Deserialize;

use crate::cache::{text_sha256, PredictionCache};
use crate::protocol::{parse_hello, parse_predict, PredictResponse, Request};
use crate::{DeckError, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Builtin,
    Subprocess,
    Http,
    Replay,
}

impl BackendKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendKind::Builtin => "builtin",
            BackendKind::Subprocess => "subprocess",
            BackendKind::Http => "http",
            BackendKind::Replay => "replay",
        }
    }
}

/// Raw transport. Implementations answer every request line of a batch,
/// in any order; [`ModelHandle`] does the matching and checking.
pub trait Backend {
    fn hello(&mut self) -> Result<ModelDescriptor>;

    fn predict(&mut self, batch: &[Request]) -> deck_core::Result<Vec<PredictResponse>>;
}

fn backend_error(message: impl Into<String>) -> deck_core::Error {
    deck_core::Error::Backend(message.into())
}

pub struct BuiltinBackend {
    model: BaselineModel,
}

impl BuiltinBackend {
    pub fn new(model: BaselineModel) -> Result<Self> {
        model.validate()?;
        Ok(Self { model })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path).map_err(|e| DeckError::io(path, e))?;
        let model: BaselineModel =
            serde_json::from_str(&json).map_err(|e| DeckError::parse(path, e.line() as u64, e.to_string()))?;
        Self::new(model)
    }
}

impl Backend for BuiltinBackend {
    fn hello(&mut self) -> Result<ModelDescriptor> {
        Ok(self.model.descriptor())
    }

    fn predict(&mut self, batch: &[Request]) -> deck_core::Result<Vec<PredictResponse>> {
        Ok(batch
            .iter()
            .filter_map(|r| match r {
                Request::Predict { id, text } => Some(PredictResponse::ok(id.clone(), self.model.predict_proba(text))),
                Request::Hello { .. } => None,
            })
            .collect())
    }
}

#[derive(Deserialize)]
struct ReplayLine {
    text: String,
    p_depressed: f64,
}

/// Serves probabilities recorded in a file. Texts absent from the file are
/// answered with a per-item error.
pub struct ReplayBackend {
    descriptor: ModelDescriptor,
    table: HashMap<String, f64>,
}

impl ReplayBackend {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| DeckError::io(path, e))?;
        let text = String::from_utf8(bytes.clone())
            .map_err(|e| DeckError::parse(path, 0, format!("not UTF-8: {e}")))?;
        let mut table = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i as u64 + 1;
            let r: ReplayLine =
                serde_json::from_str(line).map_err(|e| DeckError::parse(path, line_no, e.to_string()))?;
            if let Some(prev) = table.insert(r.text.clone(), r.p_depressed) {
                if prev != r.p_depressed {
                    return Err(DeckError::parse(
                        path,
                        line_no,
                        format!("text {:?} recorded twice with different probabilities", r.text),
                    ));
                }
            }
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("replay");
        let digest = text_sha256(&text);
        Ok(Self {
            descriptor: ModelDescriptor::new(format!("replay-{stem}"), &digest[..16]),
            table,
        })
    }
}

impl Backend for ReplayBackend {
    fn hello(&mut self) -> Result<ModelDescriptor> {
        Ok(self.descriptor.clone())
    }

    fn predict(&mut self, batch: &[Request]) -> deck_core::Result<Vec<PredictResponse>> {
        Ok(batch
            .iter()
            .filter_map(|r| match r {
                Request::Predict { id, text } => Some(match self.table.get(text) {
                    Some(&p) => PredictResponse::ok(id.clone(), p),
                    None => PredictResponse::error(id.clone(), "text has no recorded probability"),
                }),
                Request::Hello { .. } => None,
            })
            .collect())
    }
}

/// A child process answering protocol lines on stdout. A reader thread
/// drains stdout so neither side can block on a full pipe.
pub struct ProcessBackend {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ProcessBackend {
    pub fn spawn(command_line: &str, timeout: Duration) -> Result<Self> {
        let unreachable = |message: String| DeckError::Unreachable {
            locator: format!("cmd:{command_line}"),
            message,
        };
        let argv = shell_words::split(command_line).map_err(|e| unreachable(format!("cannot parse command: {e}")))?;
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| unreachable("empty command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| unreachable(format!("cannot start {program}: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command_line.to_string(),
            child,
            stdin,
            lines: rx,
            timeout,
        })
    }

    fn send(&mut self, lines: &[String]) -> deck_core::Result<()> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| backend_error("backend stdin is closed"))?;
        let mut buf = String::new();
        for l in lines {
            buf.push_str(l);
            buf.push('\n');
        }
        stdin
            .write_all(buf.as_bytes())
            .and_then(|_| stdin.flush())
            .map_err(|e| backend_error(format!("writing to `{}` failed: {e}", self.command)))
    }

    fn recv(&mut self, deadline: Instant) -> deck_core::Result<String> {
        loop {
            let wait = deadline.saturating_duration_since(Instant::now());
            match self.lines.recv_timeout(wait) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(backend_error(format!("reading from `{}` failed: {e}", self.command))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(backend_error(format!(
                        "`{}` did not answer within {:?}",
                        self.command, self.timeout
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    let status = self.child.try_wait().ok().flatten();
                    return Err(backend_error(match status {
                        Some(s) => format!("`{}` exited ({s}) before answering", self.command),
                        None => format!("`{}` closed its stdout", self.command),
                    }));
                }
            }
        }
    }
}

impl Backend for ProcessBackend {
    fn hello(&mut self) -> Result<ModelDescriptor> {
        let deadline = Instant::now() + self.timeout;
        let locator = format!("cmd:{}", self.command);
        let unreachable = |e: deck_core::Error| DeckError::Unreachable {
            locator: locator.clone(),
            message: e.to_string(),
        };
        self.send(&[Request::hello().to_line()]).map_err(unreachable)?;
        let line = self.recv(deadline).map_err(unreachable)?;
        Ok(parse_hello(&line)?)
    }

    fn predict(&mut self, batch: &[Request]) -> deck_core::Result<Vec<PredictResponse>> {
        let deadline = Instant::now() + self.timeout;
        let lines: Vec<String> = batch.iter().map(Request::to_line).collect();
        self.send(&lines)?;
        let mut out = Vec::with_capacity(batch.len());
        for _ in 0..batch.len() {
            let line = self.recv(deadline)?;
            out.push(parse_predict(&line)?);
        }
        Ok(out)
    }
}

impl Drop for ProcessBackend {
    fn drop(&mut self) {
        // closing stdin is the shutdown signal; give the child a moment
        self.stdin.take();
        let deadline = Instant::now() + Duration::from_secs(2);
        while Instant::now() < deadline {
            match self.child.try_wait() {
                Ok(Some(_)) | Err(_) => return,
                Ok(None) => thread::sleep(Duration::from_millis(10)),
            }
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// JSON lines over HTTP POST: the hello line to `<base>/hello`, a batch of
/// predict lines to `<base>/predict`.
pub struct HttpBackend {
    base: String,
    agent: ureq::Agent,
    token: Option<String>,
}

impl HttpBackend {
    pub fn new(base: &str, token: Option<String>, timeout: Duration) -> Self {
        Self {
            base: base.trim_end_matches('/').to_string(),
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            token,
        }
    }

    fn post(&self, endpoint: &str, body: String) -> std::result::Result<String, (bool, String)> {
        let url = format!("{}/{endpoint}", self.base);
        let mut req = self.agent.post(&url).set("Content-Type", "application/x-ndjson");
        if let Some(t) = &self.token {
            req = req.set("Authorization", &format!("Bearer {t}"));
        }
        // the bool says whether the endpoint is unreachable rather than broken
        match req.send_string(&body) {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| (false, format!("reading {url} failed: {e}"))),
            Err(ureq::Error::Status(404, _)) => Err((true, format!("{url} returned 404"))),
            Err(ureq::Error::Status(code, resp)) => {
                let detail = resp.into_string().unwrap_or_default();
                Err((false, format!("{url} returned {code}: {}", detail.trim())))
            }
            Err(ureq::Error::Transport(t)) => Err((true, format!("{url}: {t}"))),
        }
    }
}

impl Backend for HttpBackend {
    fn hello(&mut self) -> Result<ModelDescriptor> {
        match self.post("hello", Request::hello().to_line()) {
            Ok(body) => {
                let line = body.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
                Ok(parse_hello(line)?)
            }
            Err((true, message)) => Err(DeckError::Unreachable {
                locator: self.base.clone(),
                message,
            }),
            Err((false, message)) => Err(backend_error(message).into()),
        }
    }

    fn predict(&mut self, batch: &[Request]) -> deck_core::Result<Vec<PredictResponse>> {
        let body: String = batch.iter().map(|r| r.to_line() + "\n").collect();
        let text = self.post("predict", body).map_err(|(_, m)| backend_error(m))?;
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(parse_predict)
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct AdapterOptions {
    pub batch_size: usize,
    /// Sent as `Authorization: Bearer <token>` to HTTP backends.
    pub token: Option<String>,
    pub timeout: Duration,
    /// Directory of the persistent prediction cache; `None` keeps it in
    /// memory for the lifetime of the handle.
    pub cache_dir: Option<PathBuf>,
}

impl Default for AdapterOptions {
    fn default() -> Self {
        Self {
            batch_size: DEFAULT_BATCH_SIZE,
            token: None,
            timeout: DEFAULT_TIMEOUT,
            cache_dir: None,
        }
    }
}

impl AdapterOptions {
    /// Defaults plus `$DECK_CACHE_DIR` when set.
    pub fn from_env() -> Self {
        Self {
            cache_dir: std::env::var_os(crate::cache::CACHE_ENV)
                .filter(|d| !d.is_empty())
                .map(PathBuf::from),
            ..Self::default()
        }
    }
}

/// Parses a locator and opens the matching backend, without a handshake.
pub fn open_backend(locator: &str, options: &AdapterOptions) -> Result<(BackendKind, Box<dyn Backend>)> {
    if let Some(path) = locator.strip_prefix("builtin:") {
        Ok((BackendKind::Builtin, Box::new(BuiltinBackend::load(Path::new(path))?)))
    } else if let Some(cmd) = locator.strip_prefix("cmd:") {
        Ok((BackendKind::Subprocess, Box::new(ProcessBackend::spawn(cmd, options.timeout)?)))
    } else if let Some(path) = locator.strip_prefix("replay:") {
        Ok((BackendKind::Replay, Box::new(ReplayBackend::load(Path::new(path))?)))
    } else if locator.starts_with("http://") || locator.starts_with("https://") {
        Ok((
            BackendKind::Http,
            Box::new(HttpBackend::new(locator, options.token.clone(), options.timeout)),
        ))
    } else {
        Err(DeckError::Invalid(format!(
            "unrecognized model locator {locator:?}; expected builtin:<file>, cmd:<command>, replay:<file> or http(s)://<url>"
        )))
    }
}

/// A backend after a successful handshake, with cache and batching.
pub struct ModelHandle {
    kind: BackendKind,
    locator: String,
    descriptor: ModelDescriptor,
    model_id: String,
    backend: Box<dyn Backend>,
    cache: PredictionCache,
    batch_size: usize,
    backend_calls: usize,
    backend_items: usize,
}

impl ModelHandle {
    pub fn open(locator: &str, options: &AdapterOptions) -> Result<Self> {
        let (kind, backend) = open_backend(locator, options)?;
        Self::with_backend(kind, locator, backend, options)
    }

    /// Handshakes with an already constructed backend.
    pub fn with_backend(
        kind: BackendKind,
        locator: &str,
        mut backend: Box<dyn Backend>,
        options: &AdapterOptions,
    ) -> Result<Self> {
        if options.batch_size == 0 {
            return Err(DeckError::Invalid("batch size must be at least 1".into()));
        }
        let descriptor = backend.hello()?;
        descriptor.validate()?;
        let model_id = format!("{}@{}", descriptor.name, descriptor.version);
        let cache = match &options.cache_dir {
            Some(dir) => PredictionCache::open(dir, &model_id)?,
            None => PredictionCache::in_memory(&model_id),
        };
        log::info!("connected to {model_id} via {} backend", kind.as_str());
        Ok(Self {
            kind,
            locator: locator.to_string(),
            descriptor,
            model_id,
            backend,
            cache,
            batch_size: options.batch_size,
            backend_calls: 0,
            backend_items: 0,
        })
    }

    pub fn kind(&self) -> BackendKind {
        self.kind
    }

    pub fn locator(&self) -> &str {
        &self.locator
    }

    pub fn descriptor(&self) -> &ModelDescriptor {
        &self.descriptor
    }

    /// Number of batches sent to the backend so far.
    pub fn backend_calls(&self) -> usize {
        self.backend_calls
    }

    /// Number of texts the backend has been asked to score so far.
    pub fn backend_items(&self) -> usize {
        self.backend_items
    }

    fn fetch(&mut self, requests: Vec<Request>, key_of: &BTreeMap<String, String>) -> deck_core::Result<()> {
        self.backend_calls += 1;
        self.backend_items += requests.len();
        let responses = self.backend.predict(&requests)?;
        let mut pending: BTreeMap<&str, &str> = requests
            .iter()
            .filter_map(|r| match r {
                Request::Predict { id, text } => Some((id.as_str(), text.as_str())),
                Request::Hello { .. } => None,
            })
            .collect();
        let mut fresh = Vec::with_capacity(responses.len());
        for r in &responses {
            let text = pending.remove(r.id.as_str()).ok_or_else(|| {
                deck_core::Error::Protocol(format!("backend answered unknown or repeated id {:?}", r.id))
            })?;
            let key = key_of.get(&r.id).map(String::as_str).unwrap_or(&r.id);
            if let Some(message) = &r.error {
                return Err(deck_core::Error::Model {
                    key: key.to_string(),
                    message: message.clone(),
                });
            }
            let p = r.p_depressed.expect("parse_predict guarantees p or error");
            Prediction::new(key, p)?;
            fresh.push((text_sha256(text), p));
        }
        if let Some((id, _)) = pending.into_iter().next() {
            let key = key_of.get(id).map(String::as_str).unwrap_or(id);
            return Err(deck_core::Error::Protocol(format!("backend sent no prediction for {key:?}")));
        }
        for (hash, p) in fresh {
            self.cache
                .insert(hash, p)
                .map_err(|e| backend_error(format!("cache write failed: {e}")))?;
        }
        Ok(())
    }
}

impl Scorer for ModelHandle {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn score(&mut self, items: &[(&str, &str)]) -> deck_core::Result<Vec<Prediction>> {
        let hashes: Vec<String> = items.iter().map(|(_, t)| text_sha256(t)).collect();
        // one request per distinct uncached text, identified by its position
        let mut requests = Vec::new();
        let mut key_of = BTreeMap::new();
        let mut queued = std::collections::HashSet::new();
        for (i, ((key, text), hash)) in items.iter().zip(&hashes).enumerate() {
            if self.cache.get(hash).is_none() && queued.insert(hash.as_str()) {
                let id = i.to_string();
                key_of.insert(id.clone(), key.to_string());
                requests.push(Request::Predict {
                    id,
                    text: text.to_string(),
                });
            }
        }
        let mut requests = requests.into_iter().peekable();
        while requests.peek().is_some() {
            let chunk: Vec<Request> = requests.by_ref().take(self.batch_size).collect();
            self.fetch(chunk, &key_of)?;
        }
        items
            .iter()
            .zip(&hashes)
            .map(|((key, _), hash)| {
                let p = self.cache.get(hash).expect("every text is cached after fetching");
                Prediction::new(*key, p)
            })
            .collect()
    }
}
