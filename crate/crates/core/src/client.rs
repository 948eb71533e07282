//! Model access: a deterministic oracle, seeded noise injection, and an
//! HTTP client for chat-completions style vision endpoints.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::parsing::{parse_answer, serialize, BorderPrediction, ParsedPrediction};
use crate::prompt::PromptBundle;
use crate::render::validate_image;
use crate::sheet::{AddressForm, CellAddress, TableRange};
use crate::task::{address_form_for, GroundTruth, TaskInstance};

pub const DEFAULT_API_KEY_ENV: &str = "SHEETPROBE_API_KEY";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub endpoint_url: String,
    pub model_name: String,
    pub api_key_env_var_name: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_output_tokens: u32,
    pub request_timeout_s: u64,
    pub max_retries: u32,
    pub max_concurrent_requests: usize,
    /// First retry delay; doubles on each further attempt.
    pub initial_backoff_ms: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            endpoint_url: "https://api.openai.com/v1/chat/completions".into(),
            model_name: "gpt-4o".into(),
            api_key_env_var_name: DEFAULT_API_KEY_ENV.into(),
            temperature: 0.7,
            top_p: 0.95,
            max_output_tokens: 4096,
            request_timeout_s: 120,
            max_retries: 3,
            max_concurrent_requests: 4,
            initial_backoff_ms: 1000,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ClientError> {
        let bad = |m: String| Err(ClientError::Config(m));
        if !(0.0..=2.0).contains(&self.temperature) {
            return bad(format!(
                "temperature must be in [0, 2], got {}",
                self.temperature
            ));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p must be in (0, 1], got {}", self.top_p));
        }
        if self.max_output_tokens == 0 {
            return bad("max_output_tokens must be at least 1".into());
        }
        if self.max_concurrent_requests == 0 {
            return bad("max_concurrent_requests must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub drop_rate: f64,
    pub insert_rate: f64,
    pub row_offset: i64,
    pub value_corrupt_rate: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, v) in [
            ("drop_rate", self.drop_rate),
            ("insert_rate", self.insert_rate),
            ("value_corrupt_rate", self.value_corrupt_rate),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(NoiseError::InvalidSpec(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.drop_rate == 0.0
            && self.insert_rate == 0.0
            && self.row_offset == 0
            && self.value_corrupt_rate == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NoiseError {
    #[error("invalid noise spec: {0}")]
    InvalidSpec(String),
    #[error("answer cannot be parsed for noise injection: {0}")]
    Unparseable(String),
}

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("environment variable {0} holding the API key is not set")]
    MissingApiKey(String),
    #[error("image rejected before sending: {0}")]
    ImageRejected(String),
    #[error("cannot read image {path}: {source}")]
    ImageRead {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("gave up after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

impl ClientError {
    /// Short machine-readable label for records.
    pub fn kind(&self) -> &'static str {
        match self {
            ClientError::Config(_) => "config",
            ClientError::MissingApiKey(_) => "missing_api_key",
            ClientError::ImageRejected(_) => "image_rejected",
            ClientError::ImageRead { .. } => "image_read",
            ClientError::Auth { .. } => "auth",
            ClientError::Timeout { .. } => "timeout",
            ClientError::RetriesExhausted { .. } => "retries_exhausted",
            ClientError::Http { .. } => "http",
            ClientError::Protocol(_) => "protocol",
        }
    }
}

/// Ground truth as a parsed prediction, i.e. what a perfect model says.
pub fn truth_as_prediction(gt: &GroundTruth) -> ParsedPrediction {
    match gt {
        GroundTruth::Ocr(t) => ParsedPrediction::Ocr(t.texts()),
        GroundTruth::Spatial(t) => ParsedPrediction::Spatial(
            t.queries
                .iter()
                .map(|q| (q.clone(), t.answers[q]))
                .collect(),
        ),
        GroundTruth::Format { addresses, .. } => ParsedPrediction::Format(addresses.clone()),
        GroundTruth::Table { truth, .. } => ParsedPrediction::TableFour(truth.boundaries.clone()),
    }
}

/// The answer form an instance expects.
pub fn answer_form(inst: &TaskInstance) -> AddressForm {
    match &inst.ground_truth {
        GroundTruth::Spatial(t) => t.address_form,
        GroundTruth::Format { address_form, .. } => *address_form,
        _ => address_form_for(inst.setting),
    }
}

/// Ground truth serialized in the instance's expected grammar.
pub fn oracle_answer(inst: &TaskInstance) -> String {
    let pred = match (&inst.ground_truth, inst.grammar) {
        (GroundTruth::Table { truth, .. }, crate::task::Grammar::RangeLines) => {
            ParsedPrediction::TableRange(truth.ranges.clone())
        }
        (gt, _) => truth_as_prediction(gt),
    };
    serialize(&pred, answer_form(inst))
}

/// FNV-1a, used to give every instance its own noise stream.
fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn noise_seed(spec: &NoiseSpec, instance_id: &str) -> u64 {
    spec.seed ^ fnv1a(instance_id)
}

fn spurious_value(rng: &mut ChaCha8Rng) -> String {
    format!("{:07}", rng.random_range(0..10_000_000u32))
}

const CORRUPT_ALPHABET: &[char] = &['x', 'q', 'z', '7', '#', 'K'];

/// Replaces one character so the result always differs from the input.
fn corrupt(s: &str, rng: &mut ChaCha8Rng) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    if chars.is_empty() {
        return "?".into();
    }
    let i = rng.random_range(0..chars.len());
    let choices: Vec<char> = CORRUPT_ALPHABET
        .iter()
        .copied()
        .filter(|c| *c != chars[i])
        .collect();
    chars[i] = choices[rng.random_range(0..choices.len())];
    chars.into_iter().collect()
}

fn offset_row(a: CellAddress, offset: i64) -> CellAddress {
    let row = (a.row() as i64 + offset).clamp(1, u32::MAX as i64) as u32;
    CellAddress::new(row, a.col()).expect("row clamped to >= 1")
}

fn offset_range(r: &TableRange, offset: i64) -> TableRange {
    TableRange::new(
        offset_row(r.top_left(), offset),
        offset_row(r.bottom_right(), offset),
    )
}

fn random_address(rng: &mut ChaCha8Rng) -> CellAddress {
    CellAddress::new(rng.random_range(1..=60), rng.random_range(1..=16)).expect("positive")
}

/// Drops, inserts and transforms items of one list.
fn noisy_list<T>(
    items: Vec<T>,
    spec: &NoiseSpec,
    rng: &mut ChaCha8Rng,
    mut make: impl FnMut(&mut ChaCha8Rng) -> T,
    mut alter: impl FnMut(T, &mut ChaCha8Rng) -> T,
) -> Vec<T> {
    let mut out = Vec::with_capacity(items.len());
    for item in items {
        if spec.insert_rate > 0.0 && rng.random_bool(spec.insert_rate) {
            out.push(make(rng));
        }
        if spec.drop_rate > 0.0 && rng.random_bool(spec.drop_rate) {
            continue;
        }
        out.push(alter(item, rng));
    }
    out
}

fn maybe_corrupt(s: String, rate: f64, rng: &mut ChaCha8Rng) -> String {
    if rate > 0.0 && rng.random_bool(rate) {
        corrupt(&s, rng)
    } else {
        s
    }
}

/// Applies seeded structural noise to an answer and re-serializes it.
///
/// Items are cells (OCR), pairs (spatial), addresses (format) or whole
/// tables. Value corruption acts on every string token, including each
/// boundary token of a table. Row offsets shift every address or range.
pub fn perturb(answer: &str, inst: &TaskInstance, spec: &NoiseSpec) -> Result<String, NoiseError> {
    spec.validate()?;
    let form = answer_form(inst);
    let parsed = parse_answer(answer, inst.grammar, form)
        .map_err(|e| NoiseError::Unparseable(e.to_string()))?
        .value;
    if spec.is_identity() {
        return Ok(serialize(&parsed, form));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise_seed(spec, &inst.id));
    let rate = spec.value_corrupt_rate;
    let off = spec.row_offset;
    let noisy = match parsed {
        ParsedPrediction::Ocr(items) => {
            ParsedPrediction::Ocr(noisy_list(items, spec, &mut rng, spurious_value, |s, r| {
                maybe_corrupt(s, rate, r)
            }))
        }
        ParsedPrediction::Spatial(items) => ParsedPrediction::Spatial(noisy_list(
            items,
            spec,
            &mut rng,
            |r| (spurious_value(r), random_address(r)),
            |(v, a), r| (maybe_corrupt(v, rate, r), offset_row(a, off)),
        )),
        ParsedPrediction::Format(set) => ParsedPrediction::Format(
            noisy_list(
                set.into_iter().collect(),
                spec,
                &mut rng,
                random_address,
                |a, _| offset_row(a, off),
            )
            .into_iter()
            .collect(),
        ),
        ParsedPrediction::TableFour(tables) => {
            let edge = |xs: Vec<String>, r: &mut ChaCha8Rng| -> Vec<String> {
                xs.into_iter().map(|s| maybe_corrupt(s, rate, r)).collect()
            };
            ParsedPrediction::TableFour(noisy_list(
                tables,
                spec,
                &mut rng,
                |r| BorderPrediction {
                    top: vec![spurious_value(r), spurious_value(r)],
                    bottom: vec![spurious_value(r), spurious_value(r)],
                    left: vec![spurious_value(r), spurious_value(r)],
                    right: vec![spurious_value(r), spurious_value(r)],
                },
                |t, r| BorderPrediction {
                    top: edge(t.top, r),
                    bottom: edge(t.bottom, r),
                    left: edge(t.left, r),
                    right: edge(t.right, r),
                },
            ))
        }
        ParsedPrediction::TableRange(ranges) => ParsedPrediction::TableRange(noisy_list(
            ranges,
            spec,
            &mut rng,
            |r| TableRange::new(random_address(r), random_address(r)),
            |t, _| offset_range(&t, off),
        )),
    };
    Ok(serialize(&noisy, form))
}

/// Counting semaphore bounding in-flight requests.
#[derive(Debug)]
struct Semaphore {
    permits: Mutex<usize>,
    cv: Condvar,
}

impl Semaphore {
    fn new(n: usize) -> Self {
        Self {
            permits: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SemaphoreGuard<'_> {
        let mut p = self.permits.lock().expect("semaphore lock");
        while *p == 0 {
            p = self.cv.wait(p).expect("semaphore lock");
        }
        *p -= 1;
        SemaphoreGuard(self)
    }
}

struct SemaphoreGuard<'a>(&'a Semaphore);

impl Drop for SemaphoreGuard<'_> {
    fn drop(&mut self) {
        *self.0.permits.lock().expect("semaphore lock") += 1;
        self.0.cv.notify_one();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelResponse {
    pub text: String,
    pub attempts: u32,
    pub latency_ms: u64,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
}

/// One audit record per request. The API key never appears here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub instance_id: String,
    pub repetition: u32,
    pub timestamp_unix_s: f64,
    pub latency_ms: u64,
    pub attempts: u32,
    pub prompt_tokens: Option<u64>,
    pub completion_tokens: Option<u64>,
    pub response_text: Option<String>,
    pub error: Option<String>,
}

/// Append-only JSONL audit log, safe to share between threads.
#[derive(Debug)]
pub struct AuditLog {
    file: Mutex<std::fs::File>,
}

impl AuditLog {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        Ok(Self {
            file: Mutex::new(file),
        })
    }

    pub fn record(&self, rec: &AuditRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(rec).expect("audit record serializes");
        let mut f = self.file.lock().expect("audit lock");
        writeln!(f, "{line}")
    }
}

pub fn now_unix_s() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

enum Attempt {
    Done(ModelResponse),
    Retry(String, bool),
    Fatal(ClientError),
}

pub struct HttpModel {
    cfg: ModelConfig,
    api_key: String,
    http: reqwest::blocking::Client,
    slots: Semaphore,
}

impl std::fmt::Debug for HttpModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HttpModel")
            .field("cfg", &self.cfg)
            .field("api_key", &"<redacted>")
            .finish_non_exhaustive()
    }
}

fn data_url(png: &[u8]) -> String {
    format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(png)
    )
}

impl HttpModel {
    /// Reads the API key from the configured environment variable.
    pub fn from_env(cfg: ModelConfig) -> Result<Self, ClientError> {
        let key = std::env::var(&cfg.api_key_env_var_name)
            .map_err(|_| ClientError::MissingApiKey(cfg.api_key_env_var_name.clone()))?;
        Self::with_key(cfg, key)
    }

    pub fn with_key(cfg: ModelConfig, api_key: String) -> Result<Self, ClientError> {
        cfg.validate()?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.request_timeout_s))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        let slots = Semaphore::new(cfg.max_concurrent_requests);
        Ok(Self {
            cfg,
            api_key,
            http,
            slots,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.cfg
    }

    /// Chat-completions request body with inline base64 images. A one-shot
    /// exemplar becomes a preceding user/assistant exchange.
    pub fn request_body(
        &self,
        bundle: &PromptBundle,
        image: &[u8],
        exemplar_image: Option<&[u8]>,
    ) -> serde_json::Value {
        let mut messages = vec![json!({"role": "system", "content": bundle.system_text})];
        if let (Some(ex), Some(ex_png)) = (&bundle.exemplar, exemplar_image) {
            messages.push(json!({"role": "user", "content": [
                {"type": "text", "text": "Example spreadsheet image."},
                {"type": "image_url", "image_url": {"url": data_url(ex_png)}}
            ]}));
            messages.push(json!({"role": "assistant", "content": ex.answer_text}));
        }
        messages.push(json!({"role": "user", "content": [
            {"type": "text", "text": bundle.user_text},
            {"type": "image_url", "image_url": {"url": data_url(image)}}
        ]}));
        json!({
            "model": self.cfg.model_name,
            "messages": messages,
            "temperature": self.cfg.temperature,
            "top_p": self.cfg.top_p,
            "max_tokens": self.cfg.max_output_tokens,
        })
    }

    /// Sends one bundle. Image paths are resolved against `base_dir`; every
    /// image is checked against the model input limits before any network
    /// traffic. 429, 5xx and transport failures are retried with
    /// exponential backoff.
    pub fn send(
        &self,
        bundle: &PromptBundle,
        base_dir: &Path,
    ) -> Result<ModelResponse, ClientError> {
        let read = |rel: &str| {
            let path = base_dir.join(rel);
            std::fs::read(&path).map_err(|e| ClientError::ImageRead { path, source: e })
        };
        let image = read(&bundle.image_ref)?;
        let exemplar_image = bundle
            .exemplar
            .as_ref()
            .map(|e| read(&e.image_ref))
            .transpose()?;
        for png in std::iter::once(&image).chain(exemplar_image.as_ref()) {
            let v = validate_image(png).map_err(|e| ClientError::ImageRejected(e.to_string()))?;
            if !v.passed {
                return Err(ClientError::ImageRejected(v.failures.join("; ")));
            }
        }
        let body = self.request_body(bundle, &image, exemplar_image.as_deref());
        let _slot = self.slots.acquire();
        let started = Instant::now();
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(&body, attempts, started) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fatal(e) => return Err(e),
                Attempt::Retry(last, timed_out) => {
                    if attempts > self.cfg.max_retries {
                        return Err(if timed_out {
                            ClientError::Timeout { attempts }
                        } else {
                            ClientError::RetriesExhausted { attempts, last }
                        });
                    }
                    let delay = self
                        .cfg
                        .initial_backoff_ms
                        .saturating_mul(1u64 << (attempts - 1).min(16));
                    tracing::warn!(
                        attempt = attempts,
                        delay_ms = delay,
                        "transient failure: {last}"
                    );
                    std::thread::sleep(Duration::from_millis(delay));
                }
            }
        }
    }

    fn attempt(&self, body: &serde_json::Value, attempts: u32, started: Instant) -> Attempt {
        let resp = match self
            .http
            .post(&self.cfg.endpoint_url)
            .bearer_auth(&self.api_key)
            .json(body)
            .send()
        {
            Ok(r) => r,
            Err(e) => return Attempt::Retry(e.to_string(), e.is_timeout()),
        };
        let status = resp.status().as_u16();
        let text = match resp.text() {
            Ok(t) => t,
            Err(e) => return Attempt::Retry(e.to_string(), e.is_timeout()),
        };
        match status {
            200..=299 => {}
            401 | 403 => return Attempt::Fatal(ClientError::Auth { status }),
            408 | 429 | 500..=599 => {
                return Attempt::Retry(format!("HTTP {status}"), status == 408)
            }
            _ => {
                return Attempt::Fatal(ClientError::Http {
                    status,
                    body: truncate(&text, 500),
                })
            }
        }
        let v: serde_json::Value = match serde_json::from_str(&text) {
            Ok(v) => v,
            Err(e) => {
                return Attempt::Fatal(ClientError::Protocol(format!("response is not JSON: {e}")))
            }
        };
        let Some(content) = message_text(&v) else {
            return Attempt::Fatal(ClientError::Protocol(
                "no choices[0].message.content in response".into(),
            ));
        };
        Attempt::Done(ModelResponse {
            text: content,
            attempts,
            latency_ms: started.elapsed().as_millis() as u64,
            prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(|x| x.as_u64()),
            completion_tokens: v
                .pointer("/usage/completion_tokens")
                .and_then(|x| x.as_u64()),
        })
    }
}

fn message_text(v: &serde_json::Value) -> Option<String> {
    let content = v.pointer("/choices/0/message/content")?;
    match content {
        serde_json::Value::String(s) => Some(s.clone()),
        serde_json::Value::Array(parts) => Some(
            parts
                .iter()
                .filter_map(|p| p.get("text").and_then(|t| t.as_str()))
                .collect::<Vec<_>>()
                .join(""),
        ),
        _ => None,
    }
}

fn truncate(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{build_prompt, Templates};
    use crate::task::{grammar_for, SheetLines, Shot, TaskKind};
    use crate::transform::Setting;
    use crate::truth::{BorderContents, OcrCell, OcrTruth, SpatialTruth, TableTruth};
    use std::collections::BTreeMap;

    fn addr(r: u32, c: u32) -> CellAddress {
        CellAddress::new(r, c).unwrap()
    }

    pub(crate) fn instance(task: TaskKind, setting: Setting, gt: GroundTruth) -> TaskInstance {
        let prompt = build_prompt(
            task,
            setting,
            Shot::Zero,
            &gt,
            "i.png",
            None,
            &Templates::default(),
        )
        .unwrap();
        TaskInstance {
            id: format!("wb__s__{task}__{setting}__zero"),
            workbook: "wb".into(),
            sheet: "s".into(),
            task,
            setting,
            shot: Shot::Zero,
            format: None,
            image_path: "i.png".into(),
            layout_path: "i.json".into(),
            grammar: grammar_for(task, setting),
            prompt,
            ground_truth: gt,
        }
    }

    fn ocr(n: usize) -> TaskInstance {
        let sequence = (0..n)
            .map(|i| OcrCell {
                addr: addr(i as u32 + 1, 1),
                text: format!("cell{i}"),
            })
            .collect();
        instance(
            TaskKind::Ocr,
            Setting::Vanilla,
            GroundTruth::Ocr(OcrTruth { sequence }),
        )
    }

    fn spatial() -> TaskInstance {
        let answers: BTreeMap<String, CellAddress> = [
            ("Other People".to_string(), addr(26, 2)),
            ("day".to_string(), addr(1, 1)),
        ]
        .into();
        let t = SpatialTruth {
            queries: vec!["day".into(), "Other People".into()],
            answers,
            address_form: AddressForm::Rc,
        };
        instance(TaskKind::Spatial, Setting::Vanilla, GroundTruth::Spatial(t))
    }

    #[test]
    fn config_defaults_and_bounds() {
        let c = ModelConfig::default();
        assert_eq!(
            (c.temperature, c.top_p, c.max_output_tokens),
            (0.7, 0.95, 4096)
        );
        assert!(c.validate().is_ok());
        assert!(ModelConfig {
            temperature: 2.5,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(ModelConfig {
            top_p: 0.0,
            ..c.clone()
        }
        .validate()
        .is_err());
        assert!(ModelConfig {
            max_output_tokens: 0,
            ..c
        }
        .validate()
        .is_err());
    }

    #[test]
    fn oracle_answers() {
        assert_eq!(oracle_answer(&ocr(3)), "cell0\ncell1\ncell2");
        assert!(oracle_answer(&spatial()).contains("Other People => 26,2"));
        let t = TableTruth {
            ranges: vec![TableRange::from_a1("A1:B2").unwrap()],
            boundaries: vec![BorderContents {
                top: vec!["a".into()],
                ..Default::default()
            }],
        };
        let gt = GroundTruth::Table {
            truth: t,
            lines: SheetLines::default(),
        };
        let four = instance(TaskKind::Table, Setting::Vanilla, gt.clone());
        assert!(oracle_answer(&four).starts_with("[{\"top\":[\"a\"]"));
        let range = instance(TaskKind::Table, Setting::AddressAugment, gt);
        assert_eq!(oracle_answer(&range), "A1:B2");
    }

    #[test]
    fn perturb_examples() {
        let inst = ocr(10);
        let answer = oracle_answer(&inst);
        assert_eq!(
            perturb(
                &answer,
                &inst,
                &NoiseSpec {
                    drop_rate: 1.0,
                    ..Default::default()
                }
            )
            .unwrap(),
            ""
        );
        assert_eq!(
            perturb(&answer, &inst, &NoiseSpec::default()).unwrap(),
            answer
        );

        let sp = spatial();
        let shifted = perturb(
            &oracle_answer(&sp),
            &sp,
            &NoiseSpec {
                row_offset: 1,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(shifted.contains("Other People => 27,2"));
        assert!(shifted.contains("day => 2,1"));
        let up = perturb(
            &oracle_answer(&sp),
            &sp,
            &NoiseSpec {
                row_offset: -5,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(up.contains("day => 1,1"));

        let spec = NoiseSpec {
            drop_rate: 0.3,
            insert_rate: 0.3,
            value_corrupt_rate: 0.3,
            seed: 9,
            ..Default::default()
        };
        let a = perturb(&answer, &inst, &spec).unwrap();
        assert_eq!(a, perturb(&answer, &inst, &spec).unwrap());
        assert_ne!(a, answer);
    }

    #[test]
    fn perturb_rejects_bad_input() {
        let t = instance(
            TaskKind::Table,
            Setting::Vanilla,
            GroundTruth::Table {
                truth: TableTruth::default(),
                lines: SheetLines::default(),
            },
        );
        assert!(matches!(
            perturb("{nope", &t, &NoiseSpec::default()),
            Err(NoiseError::Unparseable(_))
        ));
        assert!(matches!(
            perturb(
                "",
                &ocr(1),
                &NoiseSpec {
                    drop_rate: 1.5,
                    ..Default::default()
                }
            ),
            Err(NoiseError::InvalidSpec(_))
        ));
    }

    #[test]
    fn corruption_always_changes_the_token() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for s in ["x", "xx", "q", "7", "Other People", ""] {
            for _ in 0..50 {
                assert_ne!(corrupt(s, &mut rng), s);
            }
        }
    }

    #[test]
    fn request_body_shape() {
        let m = HttpModel::with_key(ModelConfig::default(), "k".into()).unwrap();
        let b = m.request_body(&ocr(1).prompt, b"png", None);
        assert_eq!(b["temperature"], 0.7);
        assert_eq!(b["max_tokens"], 4096);
        assert_eq!(b["messages"][0]["role"], "system");
        let url = b["messages"][1]["content"][1]["image_url"]["url"]
            .as_str()
            .unwrap();
        assert!(url.starts_with("data:image/png;base64,"));
        assert!(!b.to_string().contains("\"k\""));
    }

    #[test]
    fn oversize_image_rejected_before_network() {
        let dir = tempfile::tempdir().unwrap();
        let png = crate::render::encode_rgb(10, 10, &[255; 300]).unwrap();
        std::fs::write(dir.path().join("i.png"), png).unwrap();
        // The endpoint is unroutable; reaching the network would fail differently.
        let cfg = ModelConfig {
            endpoint_url: "http://127.0.0.1:9/".into(),
            max_retries: 0,
            ..Default::default()
        };
        let m = HttpModel::with_key(cfg, "k".into()).unwrap();
        let err = m.send(&ocr(1).prompt, dir.path()).unwrap_err();
        assert!(matches!(err, ClientError::ImageRejected(_)), "{err}");
    }
}
