use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sheetprobe::client::{ModelConfig, NoiseSpec, DEFAULT_API_KEY_ENV};
use sheetprobe::metrics::{ScoreOptions, TieBreak};
use sheetprobe::render::RenderConfig;
use sheetprobe::synth::SynthSpec;
use sheetprobe::task::{Shot, TaskKind};
use sheetprobe::transform::Setting;
use sheetprobe_cli::demo::{cmd_demo, cmd_gen_corpus};
use sheetprobe_cli::gen::{cmd_gen, GenOptions, DEFAULT_K_SPATIAL};
use sheetprobe_cli::ingest::cmd_ingest;
use sheetprobe_cli::run::{cmd_run, ModelChoice, RunOptions, DEFAULT_REPETITIONS};
use sheetprobe_cli::score::cmd_score;
use sheetprobe_cli::{Outcome, PipelineError, RESPONSES_FILE, TASKS_FILE};

#[derive(Parser)]
#[command(
    name = "sheetprobe",
    version,
    about = "Probe vision-language models on spreadsheet images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert .xlsx/.json workbooks to canonical JSON and report image-limit checks.
    Ingest {
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "ingested")]
        out: PathBuf,
    },
    /// Render sheets and write task instances to tasks.jsonl.
    Gen {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Answer every task instance with the oracle or an HTTP model.
    Run {
        /// Task file written by `gen`.
        #[arg(long, default_value = "run/tasks.jsonl")]
        tasks_file: PathBuf,
        #[command(flatten)]
        run: RunArgs,
        /// Output directory. Defaults to the task file's directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score responses and write report.json and report.csv.
    Score {
        #[arg(long, default_value = "run/tasks.jsonl")]
        tasks_file: PathBuf,
        /// Defaults to responses.jsonl next to the task file.
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<u32>,
        #[command(flatten)]
        score: ScoreArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full oracle pipeline over the bundled five-sheet synthetic corpus.
    Demo {
        #[arg(long, default_value = "demo")]
        out: PathBuf,
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        score: ScoreArgs,
    },
    /// Write synthetic workbooks as canonical JSON.
    GenCorpus {
        /// JSON file with generator settings; flags below override it.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        sheets: Option<u32>,
        #[arg(long)]
        name: Option<String>,
        /// Number of workbooks; the i-th uses seed + i.
        #[arg(long, default_value_t = 1)]
        count: u32,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_delimiter = ',', default_values = ["ocr", "spatial", "format", "table"])]
    tasks: Vec<TaskKind>,
    #[arg(long, value_delimiter = ',', default_values = ["vanilla", "colwidth_adjust", "style_change", "address_augment"])]
    settings: Vec<Setting>,
    #[arg(long, value_delimiter = ',', default_values = ["zero", "one"])]
    shots: Vec<Shot>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of values asked for in the spatial task, capped per sheet.
    #[arg(long, default_value_t = DEFAULT_K_SPATIAL)]
    k_spatial: usize,
    /// Directory of `<task>__<setting>__<shot>.txt` prompt templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    char_width_px: u32,
    #[arg(long, default_value_t = 20)]
    row_height_px: u32,
}

impl GenArgs {
    fn options(&self) -> GenOptions {
        GenOptions {
            tasks: self.tasks.clone(),
            settings: self.settings.clone(),
            shots: self.shots.clone(),
            seed: self.seed,
            k_spatial: self.k_spatial,
            render: RenderConfig {
                char_width_px: self.char_width_px,
                row_height_px: self.row_height_px,
                ..RenderConfig::default()
            },
            templates: self.templates.clone(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Oracle,
    Http,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum, default_value = "oracle")]
    model: ModelKind,
    /// JSON model configuration; the flags below override its fields.
    #[arg(long)]
    model_config: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model_name: Option<String>,
    /// Name of the environment variable holding the API key.
    #[arg(long, default_value = DEFAULT_API_KEY_ENV)]
    api_key_env: String,
    #[arg(long)]
    max_concurrent: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_REPETITIONS)]
    repetitions: u32,
    #[arg(long, default_value_t = 0.0)]
    noise_drop: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_insert: f64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    noise_row_offset: i64,
    #[arg(long, default_value_t = 0.0)]
    noise_corrupt: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
}

impl RunArgs {
    fn options(&self) -> anyhow::Result<RunOptions> {
        let model = match self.model {
            ModelKind::Oracle => ModelChoice::Oracle,
            ModelKind::Http => {
                let mut cfg: ModelConfig = match &self.model_config {
                    Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                    None => ModelConfig::default(),
                };
                if let Some(e) = &self.endpoint {
                    cfg.endpoint_url = e.clone();
                }
                if let Some(m) = &self.model_name {
                    cfg.model_name = m.clone();
                }
                if let Some(n) = self.max_concurrent {
                    cfg.max_concurrent_requests = n;
                }
                cfg.api_key_env_var_name = self.api_key_env.clone();
                ModelChoice::Http(cfg)
            }
        };
        let noise = NoiseSpec {
            drop_rate: self.noise_drop,
            insert_rate: self.noise_insert,
            row_offset: self.noise_row_offset,
            value_corrupt_rate: self.noise_corrupt,
            seed: self.noise_seed,
        };
        let noise = (!noise.is_identity()).then_some(noise);
        Ok(RunOptions {
            model,
            noise,
            repetitions: self.repetitions,
        })
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TieArg {
    Later,
    First,
}

#[derive(Args)]
struct ScoreArgs {
    /// Which of two equally good boundary matches wins.
    #[arg(long, value_enum, default_value = "later")]
    tie: TieArg,
    /// Also report OCR scores based on the longest contiguous run.
    #[arg(long)]
    ocr_substring: bool,
    /// Also report table detection with IoU matching at this threshold.
    #[arg(long)]
    table_iou: Option<f64>,
}

impl ScoreArgs {
    fn options(&self) -> ScoreOptions {
        ScoreOptions {
            tie: match self.tie {
                TieArg::Later => TieBreak::LaterWins,
                TieArg::First => TieBreak::FirstWins,
            },
            ocr_substring: self.ocr_substring,
            table_iou: self.table_iou,
        }
    }
}

fn dir_of(p: &std::path::Path) -> PathBuf {
    p.parent().map(|d| d.to_path_buf()).unwrap_or_default()
}

fn execute(cli: Cli) -> anyhow::Result<Outcome> {
    match cli.command {
        Command::Ingest { inputs, out } => {
            let (report, outcome) = cmd_ingest(&inputs, &out, &RenderConfig::default())?;
            for (setting, n) in &report.pass_counts {
                println!(
                    "{setting}: {n}/{} sheets within image limits",
                    report.sheets.len()
                );
            }
            Ok(outcome)
        }
        Command::Gen { inputs, gen, out } => {
            let g = cmd_gen(&inputs, &out, &gen.options())?;
            println!(
                "{} instances over {} sheets ({} skipped) in {}",
                g.meta.instances,
                g.meta.sheets,
                g.meta.skipped.len(),
                out.join(TASKS_FILE).display()
            );
            Ok(Outcome::Success)
        }
        Command::Run {
            tasks_file,
            run,
            out,
        } => {
            let out = out.unwrap_or_else(|| dir_of(&tasks_file));
            let (meta, outcome) = cmd_run(&tasks_file, &out, &run.options()?)?;
            println!(
                "{} ok, {} errors ({} resumed)",
                meta.ok, meta.errors, meta.resumed
            );
            Ok(outcome)
        }
        Command::Score {
            tasks_file,
            responses,
            repetitions,
            score,
            out,
        } => {
            let responses = responses.unwrap_or_else(|| dir_of(&tasks_file).join(RESPONSES_FILE));
            let out = out.unwrap_or_else(|| dir_of(&responses));
            let (report, outcome) =
                cmd_score(&tasks_file, &responses, &out, repetitions, &score.options())?;
            print_means(&report);
            Ok(outcome)
        }
        Command::Demo {
            out,
            gen,
            run,
            score,
        } => {
            let (report, outcome) =
                cmd_demo(&out, &gen.options(), &run.options()?, &score.options())?;
            print_means(&report);
            Ok(outcome)
        }
        Command::GenCorpus {
            spec,
            seed,
            sheets,
            name,
            count,
            out,
        } => {
            let mut s: SynthSpec = match spec {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SynthSpec::default(),
            };
            if let Some(x) = seed {
                s.seed = x;
            }
            if let Some(x) = sheets {
                s.sheet_count = x;
            }
            if let Some(x) = name {
                s.name = x;
            }
            for p in cmd_gen_corpus(&s, count, &out)? {
                println!("{}", p.display());
            }
            Ok(Outcome::Success)
        }
    }
}

fn print_means(report: &sheetprobe_cli::score::RunReport) {
    println!(
        "{:<8} {:<16} {:<5} {:<14} {:>9} {:>9} {:>9}",
        "task", "setting", "shot", "metric", "precision", "recall", "f1"
    );
    for m in &report.means {
        println!(
            "{:<8} {:<16} {:<5} {:<14} {:>9.4} {:>9.4} {:>9.4}",
            m.task.as_str(),
            m.setting.as_str(),
            m.shot.as_str(),
            m.metric,
            m.precision,
            m.recall,
            m.f1
        );
    }
    if !report.unanswered.is_empty() {
        println!(
            "{} instance/repetition pairs had no usable response",
            report.unanswered.len()
        );
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(outcome) => ExitCode::from(outcome.exit_code() as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(PipelineError::Usage(_)) = e.downcast_ref::<PipelineError>() {
                eprintln!("run `sheetprobe --help` for usage");
            }
            ExitCode::from(1)
        }
    }
}
