//! Prompt construction from plain-text templates.
//!
//! Each task has a built-in template with the placeholders `{QUERIES}`,
//! `{GRAMMAR}` and `{EXEMPLAR}`. A template directory may override any
//! (task, setting, shot) combination with a file named
//! `<task>__<setting>__<shot>.txt`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sheet::AddressForm;
use crate::task::{
    address_form_for, check_combination, grammar_for, ConfigError, Grammar, GroundTruth, Shot,
    TaskInstance, TaskKind,
};
use crate::transform::Setting;

pub const SYSTEM_TEXT: &str = "You are a careful assistant that reads spreadsheet images. Answer only in the requested output format.";

const OCR_TEMPLATE: &str = include_str!("../templates/ocr.txt");
const SPATIAL_TEMPLATE: &str = include_str!("../templates/spatial.txt");
const FORMAT_TEMPLATE: &str = include_str!("../templates/format.txt");
const TABLE_TEMPLATE: &str = include_str!("../templates/table.txt");

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("one-shot prompt needs an exemplar")]
    MissingExemplar,
    #[error("zero-shot prompt must not carry an exemplar")]
    UnexpectedExemplar,
    #[error("exemplar {id} is a {task}/{setting} instance, expected {want_task}/{want_setting}")]
    ExemplarMismatch {
        id: String,
        task: TaskKind,
        setting: Setting,
        want_task: TaskKind,
        want_setting: Setting,
    },
    #[error("ground truth is for the {found} task, not {expected}")]
    TruthMismatch { expected: TaskKind, found: TaskKind },
    #[error("cannot read template {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub image_ref: String,
    pub answer_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system_text: String,
    pub user_text: String,
    pub image_ref: String,
    pub expected_grammar: Grammar,
    pub shot: Shot,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exemplar: Option<Exemplar>,
}

#[derive(Debug, Clone, Default)]
pub struct Templates {
    overrides: BTreeMap<String, String>,
}

impl Templates {
    pub fn template_key(task: TaskKind, setting: Setting, shot: Shot) -> String {
        format!("{task}__{setting}__{shot}")
    }

    /// Loads every `*.txt` file in `dir` as an override keyed by its stem.
    pub fn load_dir(dir: &Path) -> Result<Self, PromptError> {
        let io = |e: std::io::Error| PromptError::Io {
            path: dir.display().to_string(),
            source: e,
        };
        let mut overrides = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(io)? {
            let path = entry.map_err(io)?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| PromptError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            overrides.insert(stem.to_string(), text);
        }
        Ok(Self { overrides })
    }

    pub fn with_override(
        mut self,
        task: TaskKind,
        setting: Setting,
        shot: Shot,
        text: impl Into<String>,
    ) -> Self {
        self.overrides
            .insert(Self::template_key(task, setting, shot), text.into());
        self
    }

    pub fn get(&self, task: TaskKind, setting: Setting, shot: Shot) -> &str {
        if let Some(t) = self.overrides.get(&Self::template_key(task, setting, shot)) {
            return t;
        }
        match task {
            TaskKind::Ocr => OCR_TEMPLATE,
            TaskKind::Spatial => SPATIAL_TEMPLATE,
            TaskKind::Format => FORMAT_TEMPLATE,
            TaskKind::Table => TABLE_TEMPLATE,
        }
    }
}

fn address_wording(form: AddressForm) -> &'static str {
    match form {
        AddressForm::Rc => {
            "a row,column pair such as 2,3 (row first, both counted from 1; the top-left cell of the image is 1,1)"
        }
        AddressForm::A1 => "an A1-style address such as C2 (column letters followed by the row number)",
    }
}

/// The machine-readable output contract appended to every prompt.
pub fn grammar_block(grammar: Grammar, form: AddressForm) -> String {
    let body = match grammar {
        Grammar::OcrLines => "Write one cell text per line, in reading order, and nothing else.".to_string(),
        Grammar::PairLines => format!(
            "Write one line per value in the form `value => address`, where address is {}. Write nothing else.",
            address_wording(form)
        ),
        Grammar::AddressLines => {
            format!("Write one address per line, where each address is {}. Write nothing else.", address_wording(form))
        }
        Grammar::FourBoundariesJson => "Write a JSON array with one object per table. Each object has the keys \
             \"top\", \"bottom\", \"left\" and \"right\"; each value is the list of non-empty cell texts along \
             that edge of the table, read left to right for top and bottom and top to bottom for left and right. \
             Write [] if there is no table."
            .to_string(),
        Grammar::RangeLines => "Write one range per table, one per line, in the form A4:D120 \
             (top-left cell, a colon, bottom-right cell). Write nothing else."
            .to_string(),
    };
    format!("Output format:\n{body}")
}

fn queries_text(truth: &GroundTruth) -> String {
    match truth {
        GroundTruth::Spatial(t) => t.queries.join("\n"),
        GroundTruth::Format { format, .. } => format.description().to_string(),
        _ => String::new(),
    }
}

fn exemplar_text(answer: &str) -> String {
    format!(
        "\nAn example spreadsheet image is attached before the one to analyse. Its correct answer is:\n{answer}\n\n\
         Now answer for the last image.\n"
    )
}

/// Expands a template for one instance. Deterministic for fixed inputs.
pub fn build_prompt(
    task: TaskKind,
    setting: Setting,
    shot: Shot,
    truth: &GroundTruth,
    image_ref: &str,
    exemplar_source: Option<&TaskInstance>,
    templates: &Templates,
) -> Result<PromptBundle, PromptError> {
    check_combination(task, setting)?;
    if truth.task() != task {
        return Err(PromptError::TruthMismatch {
            expected: task,
            found: truth.task(),
        });
    }
    let exemplar = match (shot, exemplar_source) {
        (Shot::Zero, None) => None,
        (Shot::Zero, Some(_)) => return Err(PromptError::UnexpectedExemplar),
        (Shot::One, None) => return Err(PromptError::MissingExemplar),
        (Shot::One, Some(ex)) => {
            if ex.task != task || ex.setting != setting {
                return Err(PromptError::ExemplarMismatch {
                    id: ex.id.clone(),
                    task: ex.task,
                    setting: ex.setting,
                    want_task: task,
                    want_setting: setting,
                });
            }
            Some(Exemplar {
                image_ref: ex.image_path.clone(),
                answer_text: crate::client::oracle_answer(ex),
            })
        }
    };
    let grammar = grammar_for(task, setting);
    let form = address_form_for(setting);
    let user_text = templates
        .get(task, setting, shot)
        .replace("{QUERIES}", &queries_text(truth))
        .replace("{GRAMMAR}", &grammar_block(grammar, form))
        .replace(
            "{EXEMPLAR}",
            &exemplar
                .as_ref()
                .map(|e| exemplar_text(&e.answer_text))
                .unwrap_or_default(),
        )
        .trim_end()
        .to_string();
    Ok(PromptBundle {
        system_text: SYSTEM_TEXT.to_string(),
        user_text,
        image_ref: image_ref.to_string(),
        expected_grammar: grammar,
        shot,
        exemplar,
    })
}
