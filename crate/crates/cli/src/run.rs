//! `run`: executes every task instance against the oracle or an HTTP model,
//! `repetitions` times, and writes `responses.jsonl`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sheetprobe::client::{
    now_unix_s, oracle_answer, perturb, AuditLog, AuditRecord, HttpModel, ModelConfig, NoiseSpec,
};
use sheetprobe::task::TaskInstance;

use crate::{
    io_err, read_jsonl, write_json, write_jsonl, Outcome, PipelineError, Result, AUDIT_FILE,
    RESPONSES_FILE, RUN_META_FILE,
};

pub const DEFAULT_REPETITIONS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseStatus {
    Ok,
    Error,
}

/// One model answer for one (instance, repetition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub instance_id: String,
    pub repetition: u32,
    pub model: String,
    pub status: ResponseStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_kind: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub enum ModelChoice {
    Oracle,
    Http(ModelConfig),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub model: ModelChoice,
    pub noise: Option<NoiseSpec>,
    pub repetitions: u32,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            model: ModelChoice::Oracle,
            noise: None,
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub toolkit_version: String,
    pub model: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// SHA-256 of the model configuration. The API key is not part of it.
    pub model_config_hash: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseSpec>,
    pub repetitions: u32,
    pub instances: usize,
    pub ok: usize,
    pub errors: usize,
    pub resumed: usize,
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn model_config_hash(model: &ModelChoice) -> String {
    match model {
        ModelChoice::Oracle => sha256_hex(b"oracle"),
        ModelChoice::Http(cfg) => sha256_hex(
            serde_json::to_string(cfg)
                .expect("config serializes")
                .as_bytes(),
        ),
    }
}

fn model_label(model: &ModelChoice) -> String {
    match model {
        ModelChoice::Oracle => "oracle".into(),
        ModelChoice::Http(cfg) => cfg.model_name.clone(),
    }
}

/// Noise for one repetition: each repetition draws a fresh stream.
pub fn repetition_noise(spec: &NoiseSpec, repetition: u32) -> NoiseSpec {
    NoiseSpec {
        seed: spec.seed.wrapping_add(repetition as u64),
        ..*spec
    }
}

/// The oracle's answer for one instance and repetition.
pub fn oracle_response(
    inst: &TaskInstance,
    repetition: u32,
    noise: Option<&NoiseSpec>,
) -> ResponseRecord {
    let clean = oracle_answer(inst);
    let result = match noise {
        Some(spec) if !spec.is_identity() => {
            perturb(&clean, inst, &repetition_noise(spec, repetition))
        }
        _ => Ok(clean),
    };
    match result {
        Ok(text) => ResponseRecord {
            instance_id: inst.id.clone(),
            repetition,
            model: "oracle".into(),
            status: ResponseStatus::Ok,
            text: Some(text),
            error_kind: None,
            error: None,
        },
        Err(e) => ResponseRecord {
            instance_id: inst.id.clone(),
            repetition,
            model: "oracle".into(),
            status: ResponseStatus::Error,
            text: None,
            error_kind: Some("noise".into()),
            error: Some(e.to_string()),
        },
    }
}

pub fn load_tasks(path: &Path) -> Result<Vec<TaskInstance>> {
    let tasks: Vec<TaskInstance> = read_jsonl(path)?;
    let mut seen = std::collections::HashSet::new();
    for t in &tasks {
        if !seen.insert(t.id.as_str()) {
            return Err(PipelineError::DuplicateInstance(t.id.clone()));
        }
    }
    Ok(tasks)
}

/// Runs every pending (instance, repetition) pair. Pairs that already have
/// an ok record in `out_dir/responses.jsonl` are kept and not re-run.
///
/// The responses file is rewritten with one record per pair, ordered by
/// task-file order and then repetition.
pub fn cmd_run(tasks_path: &Path, out_dir: &Path, opts: &RunOptions) -> Result<(RunMeta, Outcome)> {
    if opts.repetitions == 0 {
        return Err(PipelineError::Usage(
            "repetitions must be at least 1".into(),
        ));
    }
    if let Some(n) = &opts.noise {
        n.validate()?;
    }
    let tasks = load_tasks(tasks_path)?;
    let base_dir: PathBuf = tasks_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    crate::create_dir(out_dir)?;
    let responses_path = out_dir.join(RESPONSES_FILE);

    let mut done: BTreeMap<(usize, u32), ResponseRecord> = BTreeMap::new();
    let index: std::collections::HashMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    if responses_path.exists() {
        for r in read_jsonl::<ResponseRecord>(&responses_path)? {
            if r.status != ResponseStatus::Ok || r.repetition >= opts.repetitions {
                continue;
            }
            if let Some(&i) = index.get(r.instance_id.as_str()) {
                done.insert((i, r.repetition), r);
            }
        }
    }
    let resumed = done.len();
    let pending: Vec<(usize, u32)> = (0..tasks.len())
        .flat_map(|i| (0..opts.repetitions).map(move |rep| (i, rep)))
        .filter(|k| !done.contains_key(k))
        .collect();

    let audit =
        AuditLog::open(&out_dir.join(AUDIT_FILE)).map_err(io_err(&out_dir.join(AUDIT_FILE)))?;
    let fresh: Vec<ResponseRecord> = match &opts.model {
        ModelChoice::Oracle => pending
            .iter()
            .map(|&(i, rep)| {
                let started = Instant::now();
                let r = oracle_response(&tasks[i], rep, opts.noise.as_ref());
                audit_one(
                    &audit,
                    &r,
                    started.elapsed().as_millis() as u64,
                    1,
                    None,
                    None,
                );
                r
            })
            .collect(),
        ModelChoice::Http(cfg) => {
            let model = HttpModel::from_env(cfg.clone())?;
            run_http(&model, &tasks, &pending, &base_dir, &audit)
        }
    };
    for (&key, r) in pending.iter().zip(fresh) {
        done.insert(key, r);
    }

    let records: Vec<ResponseRecord> = done.into_values().collect();
    write_jsonl(&responses_path, &records)?;
    let errors = records
        .iter()
        .filter(|r| r.status == ResponseStatus::Error)
        .count();
    for r in records.iter().filter(|r| r.status == ResponseStatus::Error) {
        tracing::warn!(instance = %r.instance_id, repetition = r.repetition, "{}", r.error.as_deref().unwrap_or(""));
    }
    let meta = RunMeta {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        model: model_label(&opts.model),
        endpoint: match &opts.model {
            ModelChoice::Http(cfg) => Some(cfg.endpoint_url.clone()),
            ModelChoice::Oracle => None,
        },
        model_config_hash: model_config_hash(&opts.model),
        noise: opts.noise,
        repetitions: opts.repetitions,
        instances: tasks.len(),
        ok: records.len() - errors,
        errors,
        resumed,
    };
    write_json(&out_dir.join(RUN_META_FILE), &meta)?;
    Ok((meta, Outcome::from_failures(errors)))
}

fn audit_one(
    audit: &AuditLog,
    r: &ResponseRecord,
    latency_ms: u64,
    attempts: u32,
    prompt_tokens: Option<u64>,
    completion_tokens: Option<u64>,
) {
    let rec = AuditRecord {
        instance_id: r.instance_id.clone(),
        repetition: r.repetition,
        timestamp_unix_s: now_unix_s(),
        latency_ms,
        attempts,
        prompt_tokens,
        completion_tokens,
        response_text: r.text.clone(),
        error: r.error.clone(),
    };
    if let Err(e) = audit.record(&rec) {
        tracing::warn!("cannot write audit record: {e}");
    }
}

/// Sends pending pairs from a pool of worker threads no larger than the
/// configured concurrency limit. Results come back in `pending` order.
fn run_http(
    model: &HttpModel,
    tasks: &[TaskInstance],
    pending: &[(usize, u32)],
    base_dir: &Path,
    audit: &AuditLog,
) -> Vec<ResponseRecord> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ResponseRecord>>> = Mutex::new(vec![None; pending.len()]);
    let workers = model
        .config()
        .max_concurrent_requests
        .min(pending.len())
        .max(1);
    let label = model.config().model_name.clone();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let j = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(i, rep)) = pending.get(j) else {
                    break;
                };
                let inst = &tasks[i];
                let started = Instant::now();
                let record = match model.send(&inst.prompt, base_dir) {
                    Ok(resp) => {
                        let r = ResponseRecord {
                            instance_id: inst.id.clone(),
                            repetition: rep,
                            model: label.clone(),
                            status: ResponseStatus::Ok,
                            text: Some(resp.text),
                            error_kind: None,
                            error: None,
                        };
                        audit_one(
                            audit,
                            &r,
                            resp.latency_ms,
                            resp.attempts,
                            resp.prompt_tokens,
                            resp.completion_tokens,
                        );
                        r
                    }
                    Err(e) => {
                        let r = ResponseRecord {
                            instance_id: inst.id.clone(),
                            repetition: rep,
                            model: label.clone(),
                            status: ResponseStatus::Error,
                            text: None,
                            error_kind: Some(e.kind().to_string()),
                            error: Some(e.to_string()),
                        };
                        audit_one(
                            audit,
                            &r,
                            started.elapsed().as_millis() as u64,
                            0,
                            None,
                            None,
                        );
                        r
                    }
                };
                slots.lock().expect("result slots")[j] = Some(record);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every pair was processed"))
        .collect()
}
