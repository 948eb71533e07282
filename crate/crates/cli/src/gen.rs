//! `gen`: task construction. Renders every sheet under every requested
//! setting and writes one task instance per (sheet, setting, task, format,
//! shot) to `tasks.jsonl`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sheetprobe::prompt::{build_prompt, Templates};
use sheetprobe::render::{render, validate_image, RenderConfig};
use sheetprobe::task::{
    address_form_for, check_combination, grammar_for, image_stem, instance_id, sanitize_name,
    GroundTruth, SheetLines, Shot, TaskInstance, TaskKind,
};
use sheetprobe::transform::{apply_setting, Setting};
use sheetprobe::truth::{
    default_spatial_k, extract_formats, extract_ocr, extract_spatial, extract_table_boundaries,
    FormatKind,
};
use sheetprobe::{Sheet, Workbook};

use crate::corpus::load_corpus;
use crate::{
    create_dir, write_file, write_json, write_jsonl, PipelineError, Result, GEN_META_FILE,
    IMAGES_DIR, TASKS_FILE,
};

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_K_SPATIAL: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenOptions {
    pub tasks: Vec<TaskKind>,
    pub settings: Vec<Setting>,
    pub shots: Vec<Shot>,
    pub seed: u64,
    pub k_spatial: usize,
    #[serde(skip)]
    pub render: RenderConfig,
    #[serde(skip)]
    pub templates: Option<PathBuf>,
}

impl Default for GenOptions {
    fn default() -> Self {
        Self {
            tasks: TaskKind::ALL.to_vec(),
            settings: Setting::ALL.to_vec(),
            shots: Shot::ALL.to_vec(),
            seed: DEFAULT_SEED,
            k_spatial: DEFAULT_K_SPATIAL,
            render: RenderConfig::default(),
            templates: None,
        }
    }
}

/// A combination that was requested but produced no instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub workbook: String,
    pub sheet: String,
    pub setting: Setting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<TaskKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<FormatKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shot: Option<Shot>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub toolkit_version: String,
    pub options: GenOptions,
    pub sheets: usize,
    pub instances: usize,
    pub instances_per_setting: BTreeMap<Setting, usize>,
    pub instances_per_task: BTreeMap<TaskKind, usize>,
    pub skipped: Vec<Skipped>,
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    pub instances: Vec<TaskInstance>,
    pub meta: GenMeta,
}

struct SheetRef<'a> {
    workbook: &'a str,
    sheet_name: &'a str,
    sheet: &'a Sheet,
    tables: &'a [sheetprobe::TableRange],
}

/// Zero-shot building block: sheet index, setting, task, format, truth,
/// image path and layout path.
type Base = (
    usize,
    Setting,
    TaskKind,
    Option<FormatKind>,
    GroundTruth,
    String,
    String,
);

type Truths = (
    Vec<(TaskKind, Option<FormatKind>, GroundTruth)>,
    Vec<(TaskKind, String)>,
);

/// One rendered (sheet, setting) pair.
struct Rendered {
    stem: String,
    png: Vec<u8>,
    layout_json: String,
    transformed: Sheet,
}

fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in s.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Truth for every (task, format) under one rendered setting. The spatial
/// sample depends on the sheet only, so every setting asks the same values.
fn base_truths(
    s: &SheetRef<'_>,
    setting: Setting,
    transformed: &Sheet,
    opts: &GenOptions,
) -> Truths {
    let mut out = Vec::new();
    let mut reasons = Vec::new();
    let form = address_form_for(setting);
    for &task in &opts.tasks {
        if let Err(e) = check_combination(task, setting) {
            reasons.push((task, e.to_string()));
            continue;
        }
        match task {
            TaskKind::Ocr => out.push((task, None, GroundTruth::Ocr(extract_ocr(transformed)))),
            TaskKind::Spatial => {
                let k = default_spatial_k(s.sheet, opts.k_spatial);
                if k == 0 {
                    reasons.push((task, "sheet has no unique-valued cells".into()));
                    continue;
                }
                let seed = opts.seed
                    ^ fnv1a(&format!(
                        "{}__{}",
                        sanitize_name(s.workbook),
                        sanitize_name(s.sheet_name)
                    ));
                match extract_spatial(s.sheet, k, seed, form) {
                    Ok(t) => out.push((task, None, GroundTruth::Spatial(t))),
                    Err(e) => reasons.push((task, e.to_string())),
                }
            }
            TaskKind::Format => {
                let formats = extract_formats(transformed);
                for kind in FormatKind::ALL {
                    out.push((
                        task,
                        Some(kind),
                        GroundTruth::Format {
                            format: kind,
                            address_form: form,
                            addresses: formats.get(kind),
                        },
                    ));
                }
            }
            TaskKind::Table => {
                if s.tables.is_empty() {
                    reasons.push((task, "sheet has no annotated tables".into()));
                    continue;
                }
                match extract_table_boundaries(transformed, s.tables) {
                    Ok(truth) => out.push((
                        task,
                        None,
                        GroundTruth::Table {
                            truth,
                            lines: SheetLines::of(transformed),
                        },
                    )),
                    Err(e) => reasons.push((task, e.to_string())),
                }
            }
        }
    }
    (out, reasons)
}

fn sheets_of(corpus: &[Workbook]) -> Result<Vec<SheetRef<'_>>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for wb in corpus {
        for ns in &wb.sheets {
            let key = format!("{}__{}", sanitize_name(&wb.name), sanitize_name(&ns.name));
            if !seen.insert(key.clone()) {
                return Err(PipelineError::NameCollision(key));
            }
            out.push(SheetRef {
                workbook: &wb.name,
                sheet_name: &ns.name,
                sheet: &ns.sheet,
                tables: &ns.tables,
            });
        }
    }
    Ok(out)
}

fn dedup_sorted<T: Ord + Copy>(xs: &[T]) -> Vec<T> {
    let set: BTreeSet<T> = xs.iter().copied().collect();
    set.into_iter().collect()
}

/// Builds all instances for an in-memory corpus and writes images, layouts,
/// `tasks.jsonl` and `gen_meta.json` into `out_dir`.
pub fn generate_tasks(corpus: &[Workbook], out_dir: &Path, opts: &GenOptions) -> Result<GenOutput> {
    let mut opts = opts.clone();
    opts.tasks = dedup_sorted(&opts.tasks);
    opts.settings = dedup_sorted(&opts.settings);
    opts.shots = dedup_sorted(&opts.shots);
    if opts.tasks.is_empty() || opts.settings.is_empty() || opts.shots.is_empty() {
        return Err(PipelineError::Usage(
            "tasks, settings and shots must each be non-empty".into(),
        ));
    }
    opts.render
        .validate()
        .map_err(|e| PipelineError::Usage(e.to_string()))?;
    let templates = match &opts.templates {
        Some(dir) => Templates::load_dir(dir)?,
        None => Templates::default(),
    };
    let sheets = sheets_of(corpus)?;
    create_dir(&out_dir.join(IMAGES_DIR))?;

    let pairs: Vec<(usize, Setting)> = (0..sheets.len())
        .flat_map(|i| opts.settings.iter().map(move |s| (i, *s)))
        .collect();
    let rendered: Vec<std::result::Result<Rendered, String>> = pairs
        .par_iter()
        .map(|&(i, setting)| {
            let s = &sheets[i];
            let t = apply_setting(s.sheet, setting);
            let (layout, png) = render(&t, &opts.render).map_err(|e| e.to_string())?;
            let v = validate_image(&png).map_err(|e| e.to_string())?;
            if !v.passed {
                return Err(format!(
                    "image fails model input limits: {}",
                    v.failures.join("; ")
                ));
            }
            Ok(Rendered {
                stem: image_stem(s.workbook, s.sheet_name, setting),
                png,
                layout_json: layout.to_json(),
                transformed: t.into_sheet(),
            })
        })
        .collect();

    let mut skipped = Vec::new();
    // Zero-shot instances keyed by (setting, task, format), in sheet order.
    let mut bases: Vec<Base> = Vec::new();
    for (&(i, setting), r) in pairs.iter().zip(&rendered) {
        let s = &sheets[i];
        let skip = |task, format, shot, reason: String| Skipped {
            workbook: s.workbook.to_string(),
            sheet: s.sheet_name.to_string(),
            setting,
            task,
            format,
            shot,
            reason,
        };
        let r = match r {
            Ok(r) => r,
            Err(reason) => {
                skipped.push(skip(None, None, None, reason.clone()));
                continue;
            }
        };
        let image_rel = format!("{IMAGES_DIR}/{}.png", r.stem);
        let layout_rel = format!("{IMAGES_DIR}/{}.layout.json", r.stem);
        write_file(&out_dir.join(&image_rel), &r.png)?;
        write_file(&out_dir.join(&layout_rel), r.layout_json.as_bytes())?;
        let (truths, reasons) = base_truths(s, setting, &r.transformed, &opts);
        for (task, reason) in reasons {
            skipped.push(skip(Some(task), None, None, reason));
        }
        for (task, format, gt) in truths {
            bases.push((
                i,
                setting,
                task,
                format,
                gt,
                image_rel.clone(),
                layout_rel.clone(),
            ));
        }
    }

    let make = |b: &Base, shot: Shot, exemplar: Option<&TaskInstance>| -> Result<TaskInstance> {
        let (i, setting, task, format, gt, image, layout) = b;
        let s = &sheets[*i];
        let prompt = build_prompt(*task, *setting, shot, gt, image, exemplar, &templates)?;
        Ok(TaskInstance {
            id: instance_id(s.workbook, s.sheet_name, *task, *format, *setting, shot),
            workbook: s.workbook.to_string(),
            sheet: s.sheet_name.to_string(),
            task: *task,
            setting: *setting,
            shot,
            format: *format,
            image_path: image.clone(),
            layout_path: layout.clone(),
            grammar: grammar_for(*task, *setting),
            prompt,
            ground_truth: gt.clone(),
        })
    };

    let zero: Vec<TaskInstance> = bases
        .iter()
        .map(|b| make(b, Shot::Zero, None))
        .collect::<Result<_>>()?;
    let mut groups: HashMap<(Setting, TaskKind, Option<FormatKind>), Vec<usize>> = HashMap::new();
    for (j, b) in bases.iter().enumerate() {
        groups.entry((b.1, b.2, b.3)).or_default().push(j);
    }

    let mut instances = Vec::new();
    for (j, b) in bases.iter().enumerate() {
        for &shot in &opts.shots {
            match shot {
                Shot::Zero => instances.push(zero[j].clone()),
                Shot::One => {
                    // The exemplar is the next sheet (cyclically) with the same
                    // setting, task and format, never the sheet under test.
                    let group = &groups[&(b.1, b.2, b.3)];
                    let pos = group
                        .iter()
                        .position(|&x| x == j)
                        .expect("member of own group");
                    if group.len() < 2 {
                        let s = &sheets[b.0];
                        skipped.push(Skipped {
                            workbook: s.workbook.to_string(),
                            sheet: s.sheet_name.to_string(),
                            setting: b.1,
                            task: Some(b.2),
                            format: b.3,
                            shot: Some(Shot::One),
                            reason: "no other sheet available as a one-shot exemplar".into(),
                        });
                        continue;
                    }
                    let ex = &zero[group[(pos + 1) % group.len()]];
                    instances.push(make(b, Shot::One, Some(ex))?);
                }
            }
        }
    }

    let mut ids = BTreeSet::new();
    for inst in &instances {
        if !ids.insert(inst.id.as_str()) {
            return Err(PipelineError::DuplicateInstance(inst.id.clone()));
        }
    }

    let mut per_setting: BTreeMap<Setting, usize> = opts.settings.iter().map(|s| (*s, 0)).collect();
    let mut per_task: BTreeMap<TaskKind, usize> = opts.tasks.iter().map(|t| (*t, 0)).collect();
    for inst in &instances {
        *per_setting.entry(inst.setting).or_default() += 1;
        *per_task.entry(inst.task).or_default() += 1;
    }
    let meta = GenMeta {
        toolkit_version: crate::TOOLKIT_VERSION.to_string(),
        options: opts.clone(),
        sheets: sheets.len(),
        instances: instances.len(),
        instances_per_setting: per_setting,
        instances_per_task: per_task,
        skipped,
    };
    write_jsonl(&out_dir.join(TASKS_FILE), &instances)?;
    write_json(&out_dir.join(GEN_META_FILE), &meta)?;
    for s in &meta.skipped {
        tracing::info!(workbook = %s.workbook, sheet = %s.sheet, setting = %s.setting, "skipped: {}", s.reason);
    }
    Ok(GenOutput { instances, meta })
}

/// Loads a corpus from disk and runs [`generate_tasks`].
pub fn cmd_gen(inputs: &[PathBuf], out_dir: &Path, opts: &GenOptions) -> Result<GenOutput> {
    let corpus: Vec<Workbook> = load_corpus(inputs)?
        .into_iter()
        .map(|(wb, warnings)| {
            for w in warnings {
                tracing::warn!(workbook = %wb.name, "{}", w.message);
            }
            wb
        })
        .collect();
    generate_tasks(&corpus, out_dir, opts)
}
