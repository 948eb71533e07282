//! Lenient, deterministic parsers from raw model text to typed predictions,
//! and the matching serializers used by the oracle.
//!
//! The line grammars never fail: lines that cannot be understood are kept
//! as [`Reject`]s. Only malformed table JSON is an error.

use std::collections::BTreeSet;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::sheet::{AddressForm, CellAddress, TableRange};
use crate::task::Grammar;
use crate::truth::BorderContents;

/// Most addresses one region token may expand to.
pub const REGION_EXPANSION_CAP: usize = 10_000;

pub type BorderPrediction = BorderContents;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    /// 1-based line number in the raw response.
    pub line: usize,
    pub text: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parsed<T> {
    pub value: T,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "items", rename_all = "snake_case")]
pub enum ParsedPrediction {
    Ocr(Vec<String>),
    Spatial(Vec<(String, CellAddress)>),
    Format(BTreeSet<CellAddress>),
    TableFour(Vec<BorderPrediction>),
    TableRange(Vec<TableRange>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("table answer is not valid JSON: {0}")]
    TableJson(String),
}

/// Lines of `raw` with code-fence lines removed, each paired with its
/// 1-based line number.
fn content_lines(raw: &str) -> impl Iterator<Item = (usize, &str)> {
    raw.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim_start().starts_with("```"))
}

fn strip_bullet(line: &str) -> &str {
    let t = line.trim();
    for b in ["- ", "* ", "• "] {
        if let Some(rest) = t.strip_prefix(b) {
            return rest.trim();
        }
    }
    t
}

fn strip_fences(raw: &str) -> String {
    content_lines(raw)
        .map(|(_, l)| l)
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn parse_ocr(raw: &str) -> Vec<String> {
    content_lines(raw)
        .map(|(_, l)| strip_bullet(l))
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect()
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    for q in ['"', '\'', '`'] {
        if s.len() >= 2 && s.starts_with(q) && s.ends_with(q) {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn parse_address(s: &str, form: AddressForm) -> Option<CellAddress> {
    let s = unquote(s)
        .trim_matches(|c| c == '(' || c == ')' || c == '[' || c == ']')
        .trim();
    let s = s.trim_end_matches(['.', ';']);
    match form {
        AddressForm::A1 => CellAddress::from_a1(&s.replace('$', "")).ok(),
        AddressForm::Rc => CellAddress::from_rc(s).ok(),
    }
}

static COLUMN_SPLIT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\t+|\s*\|\s*|\s{2,}").expect("valid regex"));

fn split_pair(line: &str, form: AddressForm) -> Option<(String, CellAddress)> {
    let attempt = |value: &str, addr: &str| {
        let value = unquote(value).trim();
        if value.is_empty() {
            return None;
        }
        parse_address(addr, form).map(|a| (value.to_string(), a))
    };
    if let Some((v, a)) = line.rsplit_once("=>") {
        return attempt(v, a);
    }
    if let Some((v, a)) = line.rsplit_once(": ") {
        if let Some(p) = attempt(v, a) {
            return Some(p);
        }
    }
    let cols: Vec<&str> = COLUMN_SPLIT
        .split(line.trim_matches('|').trim())
        .filter(|c| !c.is_empty())
        .collect();
    if cols.len() >= 2 {
        let (addr, value) = cols.split_last().expect("two columns");
        if let Some(p) = attempt(&value.join(" "), addr) {
            return Some(p);
        }
    }
    line.rsplit_once(' ').and_then(|(v, a)| attempt(v, a))
}

/// Pairs of `value => address`, also accepting `value: address` and
/// two-column lines. The first pair for a value wins.
pub fn parse_spatial(raw: &str, form: AddressForm) -> Parsed<Vec<(String, CellAddress)>> {
    let mut value: Vec<(String, CellAddress)> = Vec::new();
    let mut rejects = Vec::new();
    for (n, line) in content_lines(raw) {
        let l = strip_bullet(line);
        if l.is_empty() {
            continue;
        }
        match split_pair(l, form) {
            Some((v, a)) => {
                if value.iter().any(|(seen, _)| *seen == v) {
                    rejects.push(Reject {
                        line: n,
                        text: l.to_string(),
                        reason: "duplicate value".into(),
                    });
                } else {
                    value.push((v, a));
                }
            }
            None => rejects.push(Reject {
                line: n,
                text: l.to_string(),
                reason: "no value/address pair".into(),
            }),
        }
    }
    Parsed { value, rejects }
}

static A1_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b\$?([A-Z]{1,3})\$?([0-9]+)(?:\s*:\s*\$?([A-Z]{1,3})\$?([0-9]+))?\b")
        .expect("valid regex")
});
static RC_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\(?\s*(\d+)\s*,\s*(\d+)\s*\)?(?:\s*:\s*\(?\s*(\d+)\s*,\s*(\d+)\s*\)?)?")
        .expect("valid regex")
});

fn token_addresses(
    caps: &regex::Captures<'_>,
    form: AddressForm,
) -> Option<(CellAddress, Option<CellAddress>)> {
    let one = |a: usize, b: usize| -> Option<CellAddress> {
        let (x, y) = (caps.get(a)?.as_str(), caps.get(b)?.as_str());
        match form {
            AddressForm::A1 => CellAddress::from_a1(&format!("{x}{y}")).ok(),
            AddressForm::Rc => CellAddress::from_rc(&format!("{x},{y}")).ok(),
        }
    };
    let first = one(1, 2)?;
    if caps.get(3).is_some() {
        return Some((first, Some(one(3, 4)?)));
    }
    Some((first, None))
}

/// Every address token in the answer; `X:Y` regions expand to their cells
/// (at most [`REGION_EXPANSION_CAP`] per token).
pub fn parse_format(raw: &str, form: AddressForm) -> Parsed<BTreeSet<CellAddress>> {
    let re = match form {
        AddressForm::A1 => &*A1_TOKEN,
        AddressForm::Rc => &*RC_TOKEN,
    };
    let mut value = BTreeSet::new();
    let mut rejects = Vec::new();
    for (n, line) in content_lines(raw) {
        let l = strip_bullet(line);
        if l.is_empty() {
            continue;
        }
        let mut found = false;
        for caps in re.captures_iter(l) {
            let text = caps.get(0).expect("match").as_str().trim().to_string();
            match token_addresses(&caps, form) {
                Some((a, None)) => {
                    value.insert(a);
                    found = true;
                }
                Some((a, Some(b))) => {
                    let region = TableRange::new(a, b);
                    if region.area() > REGION_EXPANSION_CAP as u64 {
                        rejects.push(Reject {
                            line: n,
                            text: text.clone(),
                            reason: format!("region truncated to {REGION_EXPANSION_CAP} cells"),
                        });
                    }
                    value.extend(region.cells().take(REGION_EXPANSION_CAP));
                    found = true;
                }
                None => rejects.push(Reject {
                    line: n,
                    text,
                    reason: "invalid address".into(),
                }),
            }
        }
        if !found && rejects.last().is_none_or(|r| r.line != n) {
            rejects.push(Reject {
                line: n,
                text: l.to_string(),
                reason: "no address found".into(),
            });
        }
    }
    Parsed { value, rejects }
}

fn json_candidates(text: &str) -> Vec<&str> {
    let mut out = vec![text.trim()];
    if let (Some(start), Some(end)) = (text.find(['[', '{']), text.rfind([']', '}'])) {
        if start < end {
            out.push(&text[start..=end]);
        }
    }
    out
}

const TOP_KEYS: [&str; 5] = ["top", "b_t", "bt", "top_border", "topborder"];
const BOTTOM_KEYS: [&str; 5] = ["bottom", "b_b", "bb", "bottom_border", "bottomborder"];
const LEFT_KEYS: [&str; 5] = ["left", "b_l", "bl", "left_border", "leftborder"];
const RIGHT_KEYS: [&str; 5] = ["right", "b_r", "br", "right_border", "rightborder"];

fn edge_list(v: &Value) -> Option<Vec<String>> {
    let item = |x: &Value| -> Option<String> {
        match x {
            Value::String(s) => Some(s.trim().to_string()),
            Value::Number(n) => Some(n.to_string()),
            Value::Bool(b) => Some(b.to_string().to_uppercase()),
            _ => None,
        }
    };
    match v {
        Value::Array(xs) => Some(
            xs.iter()
                .filter_map(item)
                .filter(|s| !s.is_empty())
                .collect(),
        ),
        Value::Null => Some(Vec::new()),
        other => item(other).map(|s| vec![s]),
    }
}

fn border_object(
    obj: &serde_json::Map<String, Value>,
    index: usize,
    rejects: &mut Vec<Reject>,
) -> BorderPrediction {
    let mut edge = |keys: &[&str], name: &str| -> Vec<String> {
        let hit = obj
            .iter()
            .find(|(k, _)| keys.contains(&k.to_ascii_lowercase().replace(' ', "_").as_str()));
        match hit.and_then(|(_, v)| edge_list(v)) {
            Some(list) => list,
            None => {
                rejects.push(Reject {
                    line: 0,
                    text: format!("table {}", index + 1),
                    reason: format!("missing or unusable {name} edge"),
                });
                Vec::new()
            }
        }
    };
    BorderPrediction {
        top: edge(&TOP_KEYS, "top"),
        bottom: edge(&BOTTOM_KEYS, "bottom"),
        left: edge(&LEFT_KEYS, "left"),
        right: edge(&RIGHT_KEYS, "right"),
    }
}

/// Four-boundary JSON: an array of objects (a lone object is accepted, as is
/// an object with a `tables` array). Key aliases such as `B_t` are accepted.
pub fn parse_table_four(raw: &str) -> Result<Parsed<Vec<BorderPrediction>>, ParseError> {
    let text = strip_fences(raw);
    if text.trim().is_empty() {
        return Ok(Parsed {
            value: Vec::new(),
            rejects: Vec::new(),
        });
    }
    let mut last_err = String::new();
    let mut parsed = None;
    for cand in json_candidates(&text) {
        match serde_json::from_str::<Value>(cand) {
            Ok(v) => {
                parsed = Some(v);
                break;
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    let v = parsed.ok_or(ParseError::TableJson(last_err))?;
    let items = match v {
        Value::Array(xs) => xs,
        Value::Object(ref o) => match o.get("tables") {
            Some(Value::Array(xs)) => xs.clone(),
            _ => vec![v],
        },
        other => {
            return Err(ParseError::TableJson(format!(
                "expected an array of tables, found {other}"
            )))
        }
    };
    let mut rejects = Vec::new();
    let mut value = Vec::new();
    for (i, item) in items.iter().enumerate() {
        match item {
            Value::Object(o) => value.push(border_object(o, i, &mut rejects)),
            other => rejects.push(Reject {
                line: 0,
                text: other.to_string(),
                reason: "table entry is not an object".into(),
            }),
        }
    }
    Ok(Parsed { value, rejects })
}

static RANGE_TOKEN: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\$?[A-Za-z]{1,3}\$?[0-9]+\s*:\s*\$?[A-Za-z]{1,3}\$?[0-9]+").expect("valid regex")
});

/// One `A4:D120` range per table.
pub fn parse_table_ranges(raw: &str) -> Parsed<Vec<TableRange>> {
    let mut value = Vec::new();
    let mut rejects = Vec::new();
    for (n, line) in content_lines(raw) {
        let l = strip_bullet(line);
        if l.is_empty() {
            continue;
        }
        let mut found = false;
        for m in RANGE_TOKEN.find_iter(l) {
            let token: String = m
                .as_str()
                .chars()
                .filter(|c| !c.is_whitespace() && *c != '$')
                .collect();
            match TableRange::from_a1(&token) {
                Ok(r) => {
                    value.push(r);
                    found = true;
                }
                Err(e) => rejects.push(Reject {
                    line: n,
                    text: m.as_str().into(),
                    reason: e.to_string(),
                }),
            }
        }
        if !found && rejects.last().is_none_or(|r| r.line != n) {
            rejects.push(Reject {
                line: n,
                text: l.to_string(),
                reason: "no range found".into(),
            });
        }
    }
    Parsed { value, rejects }
}

/// Parses an answer under the grammar its prompt requested.
pub fn parse_answer(
    raw: &str,
    grammar: Grammar,
    form: AddressForm,
) -> Result<Parsed<ParsedPrediction>, ParseError> {
    fn wrap<T>(p: Parsed<T>, f: fn(T) -> ParsedPrediction) -> Parsed<ParsedPrediction> {
        Parsed {
            value: f(p.value),
            rejects: p.rejects,
        }
    }
    Ok(match grammar {
        Grammar::OcrLines => Parsed {
            value: ParsedPrediction::Ocr(parse_ocr(raw)),
            rejects: Vec::new(),
        },
        Grammar::PairLines => wrap(parse_spatial(raw, form), ParsedPrediction::Spatial),
        Grammar::AddressLines => wrap(parse_format(raw, form), ParsedPrediction::Format),
        Grammar::FourBoundariesJson => wrap(parse_table_four(raw)?, ParsedPrediction::TableFour),
        Grammar::RangeLines => wrap(parse_table_ranges(raw), ParsedPrediction::TableRange),
    })
}

/// Writes a prediction in its grammar. `parse_answer` inverts this exactly
/// for texts without leading bullets or fence markers.
pub fn serialize(pred: &ParsedPrediction, form: AddressForm) -> String {
    match pred {
        ParsedPrediction::Ocr(lines) => lines.join("\n"),
        ParsedPrediction::Spatial(pairs) => pairs
            .iter()
            .map(|(v, a)| format!("{v} => {}", form.format(*a)))
            .collect::<Vec<_>>()
            .join("\n"),
        ParsedPrediction::Format(set) => set
            .iter()
            .map(|a| form.format(*a))
            .collect::<Vec<_>>()
            .join("\n"),
        ParsedPrediction::TableFour(tables) => {
            serde_json::to_string(tables).expect("borders serialize")
        }
        ParsedPrediction::TableRange(ranges) => ranges
            .iter()
            .map(TableRange::to_a1)
            .collect::<Vec<_>>()
            .join("\n"),
    }
}
