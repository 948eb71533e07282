//! The bundled synthetic corpus and the `demo` and `gen-corpus` commands.

use std::path::{Path, PathBuf};

use sheetprobe::ingest::save_json;
use sheetprobe::metrics::ScoreOptions;
use sheetprobe::synth::{generate, SynthSpec};
use sheetprobe::task::sanitize_name;
use sheetprobe::Workbook;

use crate::gen::{generate_tasks, GenOptions};
use crate::run::{cmd_run, RunOptions};
use crate::score::{cmd_score, RunReport};
use crate::{create_dir, Outcome, Result, RESPONSES_FILE, TASKS_FILE};

pub const CORPUS_DIR: &str = "corpus";

/// Generates `count` workbooks from `spec`, the i-th with seed `spec.seed + i`,
/// and writes each as canonical JSON. Returns the written paths.
pub fn cmd_gen_corpus(spec: &SynthSpec, count: u32, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    create_dir(out_dir)?;
    let mut paths = Vec::new();
    for i in 0..count {
        let mut s = spec.clone();
        s.seed = spec.seed.wrapping_add(i as u64);
        if count > 1 {
            s.name = format!("{}_{i:03}", spec.name);
        }
        let wb = generate(&s)?;
        let path = out_dir.join(format!("{}.json", sanitize_name(&wb.name)));
        save_json(&wb, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn demo_corpus() -> Result<Workbook> {
    Ok(generate(&SynthSpec::demo())?)
}

/// Oracle end-to-end over the demo corpus: corpus, gen, run, score, all
/// under `out_dir`.
pub fn cmd_demo(
    out_dir: &Path,
    gen: &GenOptions,
    run: &RunOptions,
    score: &ScoreOptions,
) -> Result<(RunReport, Outcome)> {
    let corpus_dir = out_dir.join(CORPUS_DIR);
    let paths = cmd_gen_corpus(&SynthSpec::demo(), 1, &corpus_dir)?;
    tracing::info!("demo corpus written to {}", paths[0].display());
    let wb = demo_corpus()?;
    let generated = generate_tasks(&[wb], out_dir, gen)?;
    tracing::info!(instances = generated.instances.len(), "tasks generated");
    let tasks = out_dir.join(TASKS_FILE);
    let (_, run_outcome) = cmd_run(&tasks, out_dir, run)?;
    let (report, score_outcome) = cmd_score(
        &tasks,
        &out_dir.join(RESPONSES_FILE),
        out_dir,
        Some(run.repetitions),
        score,
    )?;
    let outcome = if run_outcome == Outcome::Success && score_outcome == Outcome::Success {
        Outcome::Success
    } else {
        Outcome::Partial
    };
    Ok((report, outcome))
}
