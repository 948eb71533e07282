use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::Command;

use sheetprobe::client::{oracle_answer, ModelConfig, NoiseSpec};
use sheetprobe::metrics::ScoreOptions;
use sheetprobe::synth::SynthSpec;
use sheetprobe::task::{Shot, TaskKind};
use sheetprobe::transform::Setting;
use sheetprobe_cli::demo::cmd_gen_corpus;
use sheetprobe_cli::gen::{cmd_gen, GenOptions};
use sheetprobe_cli::ingest::{cmd_ingest, FILTER_REPORT_FILE};
use sheetprobe_cli::run::{
    cmd_run, load_tasks, ModelChoice, ResponseRecord, ResponseStatus, RunOptions,
};
use sheetprobe_cli::score::{cmd_score, ADDRESS_AUGMENT_WIDTHS};
use sheetprobe_cli::{Outcome, PipelineError, REPORT_CSV, RESPONSES_FILE, TASKS_FILE};

fn corpus(dir: &Path, sheets: u32) -> PathBuf {
    let spec = SynthSpec {
        seed: 77,
        name: "t".into(),
        sheet_count: sheets,
        ..SynthSpec::default()
    };
    let out = dir.join("corpus");
    cmd_gen_corpus(&spec, 1, &out).unwrap();
    out
}

fn read_responses(path: &Path) -> Vec<ResponseRecord> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn gen_opts(tasks: &[TaskKind], settings: &[Setting], shots: &[Shot]) -> GenOptions {
    GenOptions {
        tasks: tasks.to_vec(),
        settings: settings.to_vec(),
        shots: shots.to_vec(),
        ..GenOptions::default()
    }
}

#[test]
fn gen_is_a_cartesian_product() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let opts = gen_opts(
        &[TaskKind::Ocr],
        &[
            Setting::Vanilla,
            Setting::ColWidthAdjust,
            Setting::StyleChange,
        ],
        &[Shot::Zero],
    );
    let g = cmd_gen(&[c], &dir.path().join("run"), &opts).unwrap();
    assert_eq!(g.instances.len(), 6);
    assert_eq!(
        g.meta.instances_per_setting.values().sum::<usize>(),
        g.meta.instances
    );
    assert!(g.meta.skipped.is_empty());
    for inst in &g.instances {
        assert!(dir.path().join("run").join(&inst.image_path).is_file());
        assert!(dir.path().join("run").join(&inst.layout_path).is_file());
    }
}

#[test]
fn forbidden_combination_is_skipped_with_reason() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 1);
    let opts = gen_opts(&[TaskKind::Format], &[Setting::StyleChange], &[Shot::Zero]);
    let g = cmd_gen(&[c], &dir.path().join("run"), &opts).unwrap();
    assert!(g.instances.is_empty());
    assert_eq!(g.meta.skipped.len(), 1);
    assert_eq!(g.meta.skipped[0].task, Some(TaskKind::Format));
    assert!(g.meta.skipped[0].reason.contains("style_change"));
}

#[test]
fn one_shot_exemplar_comes_from_another_sheet() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 3);
    let opts = gen_opts(&[TaskKind::Spatial], &[Setting::Vanilla], &[Shot::One]);
    let g = cmd_gen(std::slice::from_ref(&c), &dir.path().join("run"), &opts).unwrap();
    assert_eq!(g.instances.len(), 3);
    for inst in &g.instances {
        let ex = inst.prompt.exemplar.as_ref().unwrap();
        assert_ne!(ex.image_ref, inst.image_path);
        assert!(inst.prompt.user_text.contains(&ex.answer_text));
    }

    let single = corpus(&dir.path().join("one"), 1);
    let g = cmd_gen(&[single], &dir.path().join("run1"), &opts).unwrap();
    assert!(g.instances.is_empty());
    assert!(g.meta.skipped[0].reason.contains("exemplar"));
}

#[test]
fn gen_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let opts = GenOptions {
        seed: 5,
        ..GenOptions::default()
    };
    cmd_gen(std::slice::from_ref(&c), &dir.path().join("a"), &opts).unwrap();
    cmd_gen(&[c], &dir.path().join("b"), &opts).unwrap();
    let a = std::fs::read(dir.path().join("a").join(TASKS_FILE)).unwrap();
    let b = std::fs::read(dir.path().join("b").join(TASKS_FILE)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn oracle_run_serializes_truth_and_resumes() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let run_dir = dir.path().join("run");
    cmd_gen(
        &[c],
        &run_dir,
        &gen_opts(&TaskKind::ALL, &[Setting::Vanilla], &[Shot::Zero]),
    )
    .unwrap();
    let tasks_path = run_dir.join(TASKS_FILE);
    let (meta, outcome) = cmd_run(&tasks_path, &run_dir, &RunOptions::default()).unwrap();
    assert_eq!(outcome, Outcome::Success);
    let tasks = load_tasks(&tasks_path).unwrap();
    assert_eq!(meta.ok, tasks.len() * 3);
    let responses = read_responses(&run_dir.join(RESPONSES_FILE));
    for r in &responses {
        let inst = tasks.iter().find(|t| t.id == r.instance_id).unwrap();
        assert_eq!(r.text.as_deref(), Some(oracle_answer(inst).as_str()));
    }

    let (again, _) = cmd_run(&tasks_path, &run_dir, &RunOptions::default()).unwrap();
    assert_eq!(again.resumed, tasks.len() * 3);
    assert_eq!(read_responses(&run_dir.join(RESPONSES_FILE)), responses);
}

#[test]
fn noisy_oracle_is_deterministic_and_degraded() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let run_dir = dir.path().join("run");
    cmd_gen(
        &[c],
        &run_dir,
        &gen_opts(&[TaskKind::Ocr], &[Setting::Vanilla], &[Shot::Zero]),
    )
    .unwrap();
    let tasks_path = run_dir.join(TASKS_FILE);
    let noise = NoiseSpec {
        drop_rate: 0.2,
        seed: 7,
        ..NoiseSpec::default()
    };
    let opts = RunOptions {
        noise: Some(noise),
        ..RunOptions::default()
    };
    cmd_run(&tasks_path, &dir.path().join("n1"), &opts).unwrap();
    cmd_run(&tasks_path, &dir.path().join("n2"), &opts).unwrap();
    let a = std::fs::read(dir.path().join("n1").join(RESPONSES_FILE)).unwrap();
    let b = std::fs::read(dir.path().join("n2").join(RESPONSES_FILE)).unwrap();
    assert_eq!(a, b);

    let (report, _) = cmd_score(
        &tasks_path,
        &dir.path().join("n1").join(RESPONSES_FILE),
        &dir.path().join("n1"),
        None,
        &ScoreOptions::default(),
    )
    .unwrap();
    assert!(report.meta.deviations.is_empty());
    let lcs: Vec<_> = report.rows.iter().filter(|r| r.metric == "lcs").collect();
    assert_eq!(lcs.len(), 3);
    for r in lcs {
        assert_eq!(r.score.precision, 1.0);
        assert!(r.score.recall < 1.0);
    }
}

#[test]
fn address_augment_reports_carry_the_width_flag() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let run_dir = dir.path().join("run");
    cmd_gen(
        &[c],
        &run_dir,
        &gen_opts(
            &[TaskKind::Spatial],
            &[Setting::Vanilla, Setting::AddressAugment],
            &[Shot::Zero],
        ),
    )
    .unwrap();
    let tasks_path = run_dir.join(TASKS_FILE);
    cmd_run(&tasks_path, &run_dir, &RunOptions::default()).unwrap();
    let (report, _) = cmd_score(
        &tasks_path,
        &run_dir.join(RESPONSES_FILE),
        &run_dir,
        None,
        &ScoreOptions::default(),
    )
    .unwrap();
    assert_eq!(report.meta.deviations, [ADDRESS_AUGMENT_WIDTHS]);
    let json: serde_json::Value =
        serde_json::from_slice(&std::fs::read(run_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["meta"]["deviations"][0], ADDRESS_AUGMENT_WIDTHS);
}

/// Answers every request with 401.
fn reject_all(n: usize) -> String {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!(
        "http://{}/v1/chat/completions",
        listener.local_addr().unwrap()
    );
    std::thread::spawn(move || {
        for _ in 0..n {
            let (stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line.trim().is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
            }
            let mut body = vec![0u8; len];
            reader.read_exact(&mut body).unwrap();
            let mut stream = stream;
            stream.write_all(b"HTTP/1.1 401 Unauthorized\r\nContent-Length: 2\r\nConnection: close\r\n\r\n{}").unwrap();
        }
    });
    url
}

#[test]
fn http_auth_failures_are_recorded_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let run_dir = dir.path().join("run");
    cmd_gen(
        &[c],
        &run_dir,
        &gen_opts(&[TaskKind::Ocr], &[Setting::Vanilla], &[Shot::Zero]),
    )
    .unwrap();
    let var = "SHEETPROBE_PIPELINE_TEST_KEY";
    std::env::set_var(var, "wrong-key-value");
    let cfg = ModelConfig {
        endpoint_url: reject_all(2),
        api_key_env_var_name: var.into(),
        max_concurrent_requests: 1,
        initial_backoff_ms: 1,
        ..ModelConfig::default()
    };
    let opts = RunOptions {
        model: ModelChoice::Http(cfg),
        repetitions: 1,
        ..RunOptions::default()
    };
    let (meta, outcome) = cmd_run(&run_dir.join(TASKS_FILE), &run_dir, &opts).unwrap();
    assert_eq!(outcome, Outcome::Partial);
    assert_eq!((meta.ok, meta.errors), (0, 2));
    let responses = read_responses(&run_dir.join(RESPONSES_FILE));
    assert!(responses
        .iter()
        .all(|r| r.status == ResponseStatus::Error && r.error_kind.as_deref() == Some("auth")));
    let run_meta = std::fs::read_to_string(run_dir.join("run_meta.json")).unwrap();
    let audit = std::fs::read_to_string(run_dir.join("audit.jsonl")).unwrap();
    assert!(!run_meta.contains("wrong-key-value") && !audit.contains("wrong-key-value"));
}

#[test]
fn score_flags_missing_and_rejects_unknown_ids() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 2);
    let run_dir = dir.path().join("run");
    cmd_gen(
        &[c],
        &run_dir,
        &gen_opts(&[TaskKind::Ocr], &[Setting::Vanilla], &[Shot::Zero]),
    )
    .unwrap();
    let tasks_path = run_dir.join(TASKS_FILE);
    cmd_run(
        &tasks_path,
        &run_dir,
        &RunOptions {
            repetitions: 1,
            ..RunOptions::default()
        },
    )
    .unwrap();
    let responses_path = run_dir.join(RESPONSES_FILE);
    let mut responses = read_responses(&responses_path);

    let partial = dir.path().join("partial.jsonl");
    let first = serde_json::to_string(&responses[0]).unwrap();
    std::fs::write(&partial, format!("{first}\n")).unwrap();
    let (report, outcome) = cmd_score(
        &tasks_path,
        &partial,
        dir.path(),
        Some(1),
        &ScoreOptions::default(),
    )
    .unwrap();
    assert_eq!(outcome, Outcome::Partial);
    assert_eq!(report.unanswered.len(), 1);
    assert_eq!(report.unanswered[0].cause, "missing");
    let metrics: Vec<&str> = report.rows.iter().map(|r| r.metric.as_str()).collect();
    assert_eq!(metrics, ["lcs", "strict"]);
    assert!(report
        .rows
        .iter()
        .all(|r| r.missing == 1 && r.score.recall < 1.0));
    let csv = std::fs::read_to_string(dir.path().join(REPORT_CSV)).unwrap();
    assert!(csv.starts_with("task,setting,shot,repetition,metric,precision,recall,f1,rejects\n"));
    assert!(csv.contains("ocr,vanilla,zero,mean,lcs,"));

    responses[0].instance_id = "nope__x__ocr__vanilla__zero".into();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(
        &bad,
        format!("{}\n", serde_json::to_string(&responses[0]).unwrap()),
    )
    .unwrap();
    match cmd_score(
        &tasks_path,
        &bad,
        dir.path(),
        Some(1),
        &ScoreOptions::default(),
    ) {
        Err(PipelineError::UnknownInstance(id)) => assert_eq!(id, "nope__x__ocr__vanilla__zero"),
        other => panic!(
            "expected unknown instance error, got {:?}",
            other.map(|(r, _)| r.rows.len())
        ),
    }
}

#[test]
fn ingest_reports_pass_counts_and_failures() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(dir.path(), 3);
    let out = dir.path().join("ingested");
    let cfg = sheetprobe::render::RenderConfig::default();
    let (report, outcome) = cmd_ingest(std::slice::from_ref(&c), &out, &cfg).unwrap();
    assert_eq!(outcome, Outcome::Success);
    assert_eq!(report.sheets.len(), 3);
    assert!(report.pass_counts.values().all(|&n| n == 3));
    assert!(out.join(FILTER_REPORT_FILE).is_file());
    assert_eq!(report.written, ["t.json"]);

    let broken = dir.path().join("broken.json");
    std::fs::write(&broken, "{not json").unwrap();
    let (report, outcome) = cmd_ingest(&[c, broken.clone()], &out, &cfg).unwrap();
    assert_eq!(outcome, Outcome::Partial);
    assert_eq!(report.failures.len(), 1);
    assert!(matches!(
        cmd_ingest(&[broken], &out, &cfg),
        Err(PipelineError::AllFailed(1))
    ));
    assert!(matches!(
        cmd_ingest(&[], &out, &cfg),
        Err(PipelineError::Usage(_))
    ));
}

#[test]
fn binary_exit_codes() {
    let exe = env!("CARGO_BIN_EXE_sheetprobe");
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(exe)
        .args(["ingest", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("at least one input"));

    let out = Command::new(exe)
        .args([
            "demo",
            "--repetitions",
            "1",
            "--tasks",
            "ocr,table",
            "--settings",
            "vanilla",
            "--out",
        ])
        .arg(dir.path().join("demo"))
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(
        stdout.contains(
            "table    vanilla          zero  exact             1.0000    1.0000    1.0000"
        ),
        "{stdout}"
    );
}
