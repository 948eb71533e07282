//! `score`: parses and scores responses, pools counts per
//! (task, setting, shot, repetition, metric) and writes the report.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sheetprobe::metrics::{score_response, Counts, InstanceScore, PRFScore, ScoreOptions};
use sheetprobe::task::{Shot, TaskInstance, TaskKind};
use sheetprobe::transform::Setting;

use crate::gen::GenMeta;
use crate::run::{load_tasks, ResponseRecord, ResponseStatus, RunMeta};
use crate::{
    io_err, read_json, read_jsonl, write_json, Outcome, PipelineError, Result, GEN_META_FILE,
    REPORT_CSV, REPORT_JSON, RUN_META_FILE,
};

/// Metric name under which all format kinds are pooled.
pub const FORMAT_MICRO: &str = "micro";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub toolkit_version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_config_hash: Option<String>,
    pub repetitions: u32,
    pub instances: usize,
    pub options: ScoreOptions,
    /// Choices this toolkit made where the original setup is unknown and
    /// which affect the scores present in this report.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deviations: Vec<String>,
}

/// Flag carried by reports that contain address-augmented instances.
pub const ADDRESS_AUGMENT_WIDTHS: &str =
    "address_augment: column widths are adjusted after tagging, with the cap widened by the tag length";

/// Corpus-level score of one group in one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub task: TaskKind,
    pub setting: Setting,
    pub shot: Shot,
    pub repetition: u32,
    pub metric: String,
    pub score: PRFScore,
    pub instances: usize,
    pub rejects: usize,
    pub unmappable: usize,
    pub missing: usize,
    pub errors: usize,
    pub parse_errors: usize,
}

/// Arithmetic mean of the corpus-level scores across repetitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub task: TaskKind,
    pub setting: Setting,
    pub shot: Shot,
    pub metric: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub repetitions: u32,
    pub rejects: usize,
    pub unmappable: usize,
}

/// An (instance, repetition) pair without an ok response. It is scored as
/// an empty prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Unanswered {
    pub instance_id: String,
    pub repetition: u32,
    /// `missing` or the error kind recorded by the run.
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub meta: ReportMeta,
    pub rows: Vec<ReportRow>,
    pub means: Vec<MeanRow>,
    pub unanswered: Vec<Unanswered>,
}

impl RunReport {
    pub fn rows_for(&self, task: TaskKind) -> impl Iterator<Item = &ReportRow> {
        self.rows.iter().filter(move |r| r.task == task)
    }
}

type GroupKey = (TaskKind, Setting, Shot, u32, String);

/// Group key with the task replaced by its position, for canonical order.
type SortKey = (usize, Setting, Shot, u32, String);

#[derive(Default)]
struct Acc {
    counts: Counts,
    instances: usize,
    rejects: usize,
    unmappable: usize,
    missing: usize,
    errors: usize,
    parse_errors: usize,
}

/// Scores in memory. Responses for ids not in `tasks` are an error; for
/// each pair the last ok record wins.
pub fn build_report(
    tasks: &[TaskInstance],
    responses: &[ResponseRecord],
    repetitions: u32,
    opts: &ScoreOptions,
) -> Result<RunReport> {
    let index: HashMap<&str, usize> = tasks
        .iter()
        .enumerate()
        .map(|(i, t)| (t.id.as_str(), i))
        .collect();
    let mut answer: HashMap<(usize, u32), &ResponseRecord> = HashMap::new();
    for r in responses {
        let Some(&i) = index.get(r.instance_id.as_str()) else {
            return Err(PipelineError::UnknownInstance(r.instance_id.clone()));
        };
        if r.repetition >= repetitions {
            continue;
        }
        let slot = answer.entry((i, r.repetition)).or_insert(r);
        if r.status == ResponseStatus::Ok || slot.status != ResponseStatus::Ok {
            *slot = r;
        }
    }

    let pairs: Vec<(usize, u32)> = (0..repetitions)
        .flat_map(|rep| (0..tasks.len()).map(move |i| (i, rep)))
        .collect();
    let scored: Vec<(InstanceScore, Option<Unanswered>)> = pairs
        .par_iter()
        .map(|&(i, rep)| {
            let inst = &tasks[i];
            match answer.get(&(i, rep)) {
                Some(r) if r.status == ResponseStatus::Ok => (
                    score_response(inst, r.text.as_deref().unwrap_or(""), opts),
                    None,
                ),
                other => {
                    let cause = other.and_then(|r| r.error_kind.clone()).unwrap_or_else(|| {
                        if other.is_some() {
                            "error".into()
                        } else {
                            "missing".into()
                        }
                    });
                    let u = Unanswered {
                        instance_id: inst.id.clone(),
                        repetition: rep,
                        cause,
                    };
                    (score_response(inst, "", opts), Some(u))
                }
            }
        })
        .collect();

    let task_pos = |t: TaskKind| {
        TaskKind::ALL
            .iter()
            .position(|x| *x == t)
            .expect("known task")
    };
    let mut groups: BTreeMap<SortKey, (GroupKey, Acc)> = BTreeMap::new();
    let mut unanswered = Vec::new();
    for (&(i, rep), (score, u)) in pairs.iter().zip(scored) {
        let inst = &tasks[i];
        let mut names: Vec<(String, Counts)> =
            score.metrics.iter().map(|(k, v)| (k.clone(), *v)).collect();
        if inst.task == TaskKind::Format {
            let micro = score
                .metrics
                .values()
                .copied()
                .fold(Counts::default(), |mut a, c| {
                    a += c;
                    a
                });
            names.push((FORMAT_MICRO.to_string(), micro));
        }
        for (metric, counts) in names {
            let key = (
                task_pos(inst.task),
                inst.setting,
                inst.shot,
                rep,
                metric.clone(),
            );
            let (_, acc) = groups.entry(key).or_insert_with(|| {
                (
                    (inst.task, inst.setting, inst.shot, rep, metric),
                    Acc::default(),
                )
            });
            acc.counts += counts;
            acc.instances += 1;
            acc.rejects += score.rejects;
            acc.unmappable += score.unmappable;
            acc.parse_errors += score.parse_error.is_some() as usize;
            match &u {
                Some(u) if u.cause == "missing" => acc.missing += 1,
                Some(_) => acc.errors += 1,
                None => {}
            }
        }
        if let Some(u) = u {
            unanswered.push(u);
        }
    }

    let rows: Vec<ReportRow> = groups
        .into_values()
        .map(
            |((task, setting, shot, repetition, metric), acc)| ReportRow {
                task,
                setting,
                shot,
                repetition,
                metric,
                score: PRFScore::from_counts(acc.counts),
                instances: acc.instances,
                rejects: acc.rejects,
                unmappable: acc.unmappable,
                missing: acc.missing,
                errors: acc.errors,
                parse_errors: acc.parse_errors,
            },
        )
        .collect();

    let mut mean_groups: BTreeMap<(usize, Setting, Shot, String), Vec<&ReportRow>> =
        BTreeMap::new();
    for r in &rows {
        mean_groups
            .entry((task_pos(r.task), r.setting, r.shot, r.metric.clone()))
            .or_default()
            .push(r);
    }
    let means = mean_groups
        .into_values()
        .map(|rs| {
            let n = rs.len() as f64;
            let avg = |f: fn(&PRFScore) -> f64| rs.iter().map(|r| f(&r.score)).sum::<f64>() / n;
            MeanRow {
                task: rs[0].task,
                setting: rs[0].setting,
                shot: rs[0].shot,
                metric: rs[0].metric.clone(),
                precision: avg(|s| s.precision),
                recall: avg(|s| s.recall),
                f1: avg(|s| s.f1),
                repetitions: rs.len() as u32,
                rejects: rs.iter().map(|r| r.rejects).sum(),
                unmappable: rs.iter().map(|r| r.unmappable).sum(),
            }
        })
        .collect();

    unanswered.sort_by(|a, b| (a.repetition, &a.instance_id).cmp(&(b.repetition, &b.instance_id)));
    Ok(RunReport {
        meta: ReportMeta {
            toolkit_version: crate::TOOLKIT_VERSION.to_string(),
            seed: None,
            model: None,
            model_config_hash: None,
            repetitions,
            instances: tasks.len(),
            options: *opts,
            deviations: if tasks.iter().any(|t| t.setting == Setting::AddressAugment) {
                vec![ADDRESS_AUGMENT_WIDTHS.to_string()]
            } else {
                Vec::new()
            },
        },
        rows,
        means,
        unanswered,
    })
}

/// Flat table: one row per (task, setting, shot, repetition, metric), then
/// one `mean` row per (task, setting, shot, metric).
pub fn write_csv(report: &RunReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record([
        "task",
        "setting",
        "shot",
        "repetition",
        "metric",
        "precision",
        "recall",
        "f1",
        "rejects",
    ])
    .map_err(|e| csv_err(path, e))?;
    for r in &report.rows {
        w.write_record([
            r.task.as_str().to_string(),
            r.setting.as_str().to_string(),
            r.shot.as_str().to_string(),
            r.repetition.to_string(),
            r.metric.clone(),
            r.score.precision.to_string(),
            r.score.recall.to_string(),
            r.score.f1.to_string(),
            r.rejects.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    for m in &report.means {
        w.write_record([
            m.task.as_str().to_string(),
            m.setting.as_str().to_string(),
            m.shot.as_str().to_string(),
            "mean".to_string(),
            m.metric.clone(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.rejects.to_string(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(io_err(path))
}

fn csv_err(path: &Path, e: csv::Error) -> PipelineError {
    PipelineError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Reads `tasks.jsonl` and `responses.jsonl`, writes `report.json` and
/// `report.csv` into `out_dir`. Metadata is taken from `gen_meta.json` and
/// `run_meta.json` when they sit next to the inputs.
pub fn cmd_score(
    tasks_path: &Path,
    responses_path: &Path,
    out_dir: &Path,
    repetitions: Option<u32>,
    opts: &ScoreOptions,
) -> Result<(RunReport, Outcome)> {
    if let Some(tau) = opts.table_iou {
        if !(tau > 0.0 && tau <= 1.0) {
            return Err(PipelineError::Usage(format!(
                "table IoU threshold must be in (0, 1], got {tau}"
            )));
        }
    }
    let tasks = load_tasks(tasks_path)?;
    let responses: Vec<ResponseRecord> = read_jsonl(responses_path)?;
    let sibling = |p: &Path, name: &str| p.parent().map(|d| d.join(name)).filter(|p| p.exists());
    let run_meta: Option<RunMeta> = sibling(responses_path, RUN_META_FILE)
        .map(|p| read_json(&p))
        .transpose()?;
    let gen_meta: Option<GenMeta> = sibling(tasks_path, GEN_META_FILE)
        .map(|p| read_json(&p))
        .transpose()?;
    let repetitions = repetitions
        .or(run_meta.as_ref().map(|m| m.repetitions))
        .unwrap_or_else(|| {
            responses
                .iter()
                .map(|r| r.repetition + 1)
                .max()
                .unwrap_or(1)
        });
    if repetitions == 0 {
        return Err(PipelineError::Usage(
            "repetitions must be at least 1".into(),
        ));
    }
    let mut report = build_report(&tasks, &responses, repetitions, opts)?;
    report.meta.seed = gen_meta.map(|m| m.options.seed);
    if let Some(m) = run_meta {
        report.meta.model = Some(m.model);
        report.meta.model_config_hash = Some(m.model_config_hash);
    }
    crate::create_dir(out_dir)?;
    write_json(&out_dir.join(REPORT_JSON), &report)?;
    write_csv(&report, &out_dir.join(REPORT_CSV))?;
    for u in &report.unanswered {
        tracing::warn!(instance = %u.instance_id, repetition = u.repetition, "scored as empty: {}", u.cause);
    }
    let outcome = Outcome::from_failures(report.unanswered.len());
    Ok((report, outcome))
}
