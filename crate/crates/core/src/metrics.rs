//! Scoring: sequence matching for OCR, set matching for spatial and format
//! answers, boundary-to-row mapping, and table detection.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parsing::{parse_answer, BorderPrediction, ParsedPrediction};
use crate::sheet::{CellAddress, Sheet, TableRange};
use crate::task::{GroundTruth, SheetLines, TaskInstance};
use crate::truth::{FormatKind, FormatTruth, OcrTruth, SpatialTruth};

/// Starting confidence a candidate line must reach to be accepted.
pub const MAPPING_THRESHOLD: f64 = 0.8;

/// Raw counts behind a precision/recall pair. Counts pool by addition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub matched: usize,
    pub pred: usize,
    pub truth: usize,
}

impl Counts {
    pub fn new(matched: usize, pred: usize, truth: usize) -> Self {
        Self {
            matched,
            pred,
            truth,
        }
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Counts) {
        self.matched += o.matched;
        self.pred += o.pred;
        self.truth += o.truth;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PRFScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub pred: usize,
    pub truth: usize,
    pub matched: usize,
}

impl PRFScore {
    /// Precision is 1 when nothing was predicted and nothing was expected,
    /// 0 when nothing was predicted but something was expected. Recall is
    /// symmetric. F1 is 0 when P + R = 0.
    pub fn from_counts(c: Counts) -> Self {
        let ratio = |num: usize, den: usize, other: usize| {
            if den == 0 {
                if other == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(c.matched, c.pred, c.truth);
        let recall = ratio(c.matched, c.truth, c.pred);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            precision,
            recall,
            f1,
            pred: c.pred,
            truth: c.truth,
            matched: c.matched,
        }
    }

    pub fn counts(&self) -> Counts {
        Counts::new(self.matched, self.pred, self.truth)
    }
}

/// Longest common subsequence length over exact-equal elements.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() || b.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Longest common contiguous run length.
pub fn longest_common_substring<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    let mut best = 0;
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { 0 };
            best = best.max(cur[j + 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    best
}

pub fn score_ocr_lcs(pred: &[String], truth: &OcrTruth) -> PRFScore {
    let t = truth.texts();
    PRFScore::from_counts(Counts::new(lcs_length(pred, &t), pred.len(), t.len()))
}

/// Contiguous-run variant of [`score_ocr_lcs`], for comparison only.
pub fn score_ocr_substring(pred: &[String], truth: &OcrTruth) -> PRFScore {
    let t = truth.texts();
    PRFScore::from_counts(Counts::new(
        longest_common_substring(pred, &t),
        pred.len(),
        t.len(),
    ))
}

/// Positional matching: position i counts when `pred[i] == truth[i]`.
pub fn score_ocr_strict(pred: &[String], truth: &OcrTruth) -> PRFScore {
    let matched = pred
        .iter()
        .zip(&truth.sequence)
        .filter(|(p, t)| **p == t.text)
        .count();
    PRFScore::from_counts(Counts::new(matched, pred.len(), truth.sequence.len()))
}

pub fn score_pairs(pred: &[(String, CellAddress)], truth: &SpatialTruth) -> PRFScore {
    let matched = pred
        .iter()
        .filter(|(v, a)| truth.answers.get(v) == Some(a))
        .count();
    PRFScore::from_counts(Counts::new(matched, pred.len(), truth.queries.len()))
}

pub fn set_counts(pred: &BTreeSet<CellAddress>, truth: &BTreeSet<CellAddress>) -> Counts {
    Counts::new(pred.intersection(truth).count(), pred.len(), truth.len())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormatScores {
    pub per_format: BTreeMap<FormatKind, PRFScore>,
    pub micro: PRFScore,
}

/// Per-format set scores plus a micro average pooling all six formats.
pub fn score_formats(
    pred: &BTreeMap<FormatKind, BTreeSet<CellAddress>>,
    truth: &FormatTruth,
) -> FormatScores {
    let mut per_format = BTreeMap::new();
    let mut pooled = Counts::default();
    for kind in FormatKind::ALL {
        let c = set_counts(
            &pred.get(&kind).cloned().unwrap_or_default(),
            &truth.get(kind),
        );
        pooled += c;
        per_format.insert(kind, PRFScore::from_counts(c));
    }
    FormatScores {
        per_format,
        micro: PRFScore::from_counts(pooled),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    /// Equal confidence replaces the current best, so the later line wins.
    #[default]
    LaterWins,
    /// Only a strictly higher confidence replaces the current best.
    FirstWins,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MappingResult {
    /// 1-based line index, or -1 when no line reached the threshold.
    pub res: i64,
    /// Confidence of `res`; when `res` is -1, the best confidence seen.
    pub confidence: f64,
}

fn norm(s: &str) -> &str {
    s.trim()
}

/// Maps predicted edge contents to the most likely line (row or column).
///
/// For every non-empty line, the shorter of (B, line) slides over the
/// longer at every offset; the fraction of aligned equal elements over the
/// shorter length is the candidate confidence. A candidate at or above the
/// running confidence (starting at 0.8) becomes the result.
pub fn map_border_to_index(b: &[String], lines: &[Vec<String>], tie: TieBreak) -> MappingResult {
    let mut conf = MAPPING_THRESHOLD;
    let mut res: i64 = -1;
    let mut seen: f64 = 0.0;
    if b.is_empty() {
        return MappingResult {
            res,
            confidence: 0.0,
        };
    }
    for (i, line) in lines.iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (t, s): (&[String], &[String]) = if line.len() >= b.len() {
            (line, b)
        } else {
            (b, line)
        };
        for j in 0..=(t.len() - s.len()) {
            let hits = s
                .iter()
                .zip(&t[j..])
                .filter(|(x, y)| norm(x) == norm(y))
                .count();
            let c = hits as f64 / s.len() as f64;
            seen = seen.max(c);
            let accept = match tie {
                TieBreak::LaterWins => c >= conf,
                TieBreak::FirstWins => c >= MAPPING_THRESHOLD && (res == -1 || c > conf),
            };
            if accept {
                res = i as i64 + 1;
                conf = c;
            }
        }
    }
    let confidence = if res == -1 { seen } else { conf };
    MappingResult { res, confidence }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    Top,
    Bottom,
    Left,
    Right,
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Edge::Top => "top",
            Edge::Bottom => "bottom",
            Edge::Left => "left",
            Edge::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("table cannot be mapped: no line matches its {edge} edge (best confidence {best_confidence:.2})")]
pub struct UnmappableTable {
    pub edge: Edge,
    pub best_confidence: f64,
}

/// Maps four predicted edges to a range: top and bottom over rows, left and
/// right over columns.
pub fn boundaries_to_range(
    t: &BorderPrediction,
    lines: &SheetLines,
    tie: TieBreak,
) -> Result<TableRange, UnmappableTable> {
    let map = |b: &[String], over: &[Vec<String>], edge: Edge| {
        let m = map_border_to_index(b, over, tie);
        if m.res < 1 {
            Err(UnmappableTable {
                edge,
                best_confidence: m.confidence,
            })
        } else {
            Ok(m.res as u32)
        }
    };
    let top = map(&t.top, &lines.rows, Edge::Top)?;
    let bottom = map(&t.bottom, &lines.rows, Edge::Bottom)?;
    let left = map(&t.left, &lines.cols, Edge::Left)?;
    let right = map(&t.right, &lines.cols, Edge::Right)?;
    Ok(TableRange::from_corners(top, left, bottom, right))
}

pub fn boundaries_to_range_in(
    t: &BorderPrediction,
    s: &Sheet,
    tie: TieBreak,
) -> Result<TableRange, UnmappableTable> {
    boundaries_to_range(t, &SheetLines::of(s), tie)
}

/// Exact-range matching, greedy one-to-one in prediction order.
pub fn score_table_detection(pred: &[TableRange], truth: &[TableRange]) -> PRFScore {
    score_table_matches(pred, truth, |p, t| p == t)
}

/// Like [`score_table_detection`] but a prediction matches the first free
/// truth range with IoU at least `tau`. For analysis only.
pub fn score_table_detection_iou(pred: &[TableRange], truth: &[TableRange], tau: f64) -> PRFScore {
    score_table_matches(pred, truth, |p, t| p.iou(t) >= tau)
}

fn score_table_matches(
    pred: &[TableRange],
    truth: &[TableRange],
    hit: impl Fn(&TableRange, &TableRange) -> bool,
) -> PRFScore {
    PRFScore::from_counts(table_counts(pred, truth, 0, hit))
}

fn table_counts(
    pred: &[TableRange],
    truth: &[TableRange],
    unmappable: usize,
    hit: impl Fn(&TableRange, &TableRange) -> bool,
) -> Counts {
    let mut used = vec![false; truth.len()];
    let mut matched = 0;
    for p in pred {
        if let Some(i) = (0..truth.len()).find(|&i| !used[i] && hit(p, &truth[i])) {
            used[i] = true;
            matched += 1;
        }
    }
    Counts::new(matched, pred.len() + unmappable, truth.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    pub tie: TieBreak,
    /// Also report the contiguous-run OCR variant.
    pub ocr_substring: bool,
    /// Also report IoU-based table matching at this threshold.
    pub table_iou: Option<f64>,
}

/// Scores of one response. Each named metric carries raw counts so that
/// corpus-level scores can pool them.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InstanceScore {
    pub metrics: BTreeMap<String, Counts>,
    pub rejects: usize,
    pub unmappable: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parse_error: Option<String>,
}

/// Parses and scores one raw response against its instance.
///
/// Table responses that fail to parse score as an empty prediction.
/// Unmappable predicted tables still count as predictions.
pub fn score_response(inst: &TaskInstance, raw: &str, opts: &ScoreOptions) -> InstanceScore {
    let form = crate::client::answer_form(inst);
    let mut out = InstanceScore::default();
    let parsed = match parse_answer(raw, inst.grammar, form) {
        Ok(p) => {
            out.rejects = p.rejects.len();
            Some(p.value)
        }
        Err(e) => {
            out.parse_error = Some(e.to_string());
            None
        }
    };
    let m = &mut out.metrics;
    match &inst.ground_truth {
        GroundTruth::Ocr(t) => {
            let pred = match parsed {
                Some(ParsedPrediction::Ocr(p)) => p,
                _ => Vec::new(),
            };
            m.insert("strict".into(), score_ocr_strict(&pred, t).counts());
            m.insert("lcs".into(), score_ocr_lcs(&pred, t).counts());
            if opts.ocr_substring {
                m.insert(
                    "lcs_substring".into(),
                    score_ocr_substring(&pred, t).counts(),
                );
            }
        }
        GroundTruth::Spatial(t) => {
            let pred = match parsed {
                Some(ParsedPrediction::Spatial(p)) => p,
                _ => Vec::new(),
            };
            m.insert("pairs".into(), score_pairs(&pred, t).counts());
        }
        GroundTruth::Format {
            format, addresses, ..
        } => {
            let pred = match parsed {
                Some(ParsedPrediction::Format(p)) => p,
                _ => BTreeSet::new(),
            };
            m.insert(format.as_str().into(), set_counts(&pred, addresses));
        }
        GroundTruth::Table { truth, lines } => {
            let mut ranges = Vec::new();
            match parsed {
                Some(ParsedPrediction::TableRange(r)) => ranges = r,
                Some(ParsedPrediction::TableFour(tables)) => {
                    for t in &tables {
                        match boundaries_to_range(t, lines, opts.tie) {
                            Ok(r) => ranges.push(r),
                            Err(_) => out.unmappable += 1,
                        }
                    }
                }
                _ => {}
            }
            m.insert(
                "exact".into(),
                table_counts(&ranges, &truth.ranges, out.unmappable, |p, t| p == t),
            );
            if let Some(tau) = opts.table_iou {
                m.insert(
                    format!("iou_{tau}"),
                    table_counts(&ranges, &truth.ranges, out.unmappable, |p, t| {
                        p.iou(t) >= tau
                    }),
                );
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::OcrCell;

    fn s(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|x| x.to_string()).collect()
    }

    fn ocr_truth(xs: &[&str]) -> OcrTruth {
        OcrTruth {
            sequence: xs
                .iter()
                .enumerate()
                .map(|(i, t)| OcrCell {
                    addr: CellAddress::new(i as u32 + 1, 1).unwrap(),
                    text: t.to_string(),
                })
                .collect(),
        }
    }

    fn range(a1: &str) -> TableRange {
        TableRange::from_a1(a1).unwrap()
    }

    /// Brute force: the longest subsequence of `a` (by bitmask) that is
    /// also a subsequence of `b`.
    fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
        let is_subseq = |sub: &[u8]| {
            let mut it = b.iter();
            sub.iter().all(|x| it.any(|y| y == x))
        };
        (0u32..1 << a.len())
            .filter_map(|mask| {
                let sub: Vec<u8> = (0..a.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| a[i])
                    .collect();
                is_subseq(&sub).then_some(sub.len())
            })
            .max()
            .unwrap_or(0)
    }

    #[test]
    fn prf_conventions() {
        let p = PRFScore::from_counts(Counts::new(0, 0, 0));
        assert_eq!((p.precision, p.recall, p.f1), (1.0, 1.0, 1.0));
        let p = PRFScore::from_counts(Counts::new(0, 0, 4));
        assert_eq!((p.precision, p.recall, p.f1), (0.0, 0.0, 0.0));
        let p = PRFScore::from_counts(Counts::new(0, 3, 0));
        assert_eq!((p.precision, p.recall), (0.0, 0.0));
        let p = PRFScore::from_counts(Counts::new(1, 2, 4));
        assert_eq!((p.precision, p.recall), (0.5, 0.25));
        assert!((p.f1 - 2.0 * 0.5 * 0.25 / 0.75).abs() < 1e-12);
    }

    #[test]
    fn lcs_examples() {
        assert_eq!(
            lcs_length(&s(&["a", "b", "c"]), &s(&["a", "x", "b", "c"])),
            3
        );
        let x = s(&["p", "q", "p"]);
        assert_eq!(lcs_length(&x, &x), 3);
        assert_eq!(lcs_length::<String>(&[], &x), 0);
        assert_eq!(
            longest_common_substring(&s(&["a", "b", "c"]), &s(&["a", "x", "b", "c"])),
            2
        );
    }

    #[test]
    fn lcs_matches_brute_force_small() {
        // Exhaustive over the 3-symbol alphabet up to length 4 each; the
        // acceptance suite covers longer sequences.
        let mut seqs: Vec<Vec<u8>> = vec![vec![]];
        for len in 1..=4 {
            let mut v = vec![0u8; len];
            loop {
                seqs.push(v.clone());
                let mut i = 0;
                while i < len && v[i] == 2 {
                    v[i] = 0;
                    i += 1;
                }
                if i == len {
                    break;
                }
                v[i] += 1;
            }
        }
        for a in &seqs {
            for b in &seqs {
                assert_eq!(lcs_length(a, b), brute_lcs(a, b), "{a:?} {b:?}");
            }
        }
    }

    #[test]
    fn ocr_scores() {
        let names: Vec<String> = (0..10).map(|i| format!("v{i}")).collect();
        let refs: Vec<&str> = names.iter().map(|x| x.as_str()).collect();
        let truth = ocr_truth(&refs);
        let perfect = score_ocr_lcs(&names, &truth);
        assert_eq!(
            (perfect.precision, perfect.recall, perfect.f1),
            (1.0, 1.0, 1.0)
        );
        assert_eq!(score_ocr_strict(&names, &truth).f1, 1.0);

        let mut dropped = names.clone();
        dropped.remove(3);
        dropped.remove(6);
        let l = score_ocr_lcs(&dropped, &truth);
        assert_eq!((l.precision, l.recall), (1.0, 0.8));

        let mut inserted = vec!["spurious".to_string()];
        inserted.extend(names.clone());
        let l = score_ocr_lcs(&inserted, &truth);
        assert_eq!((l.precision, l.recall), (10.0 / 11.0, 1.0));

        assert_eq!(score_ocr_strict(&names[1..], &truth).matched, 0);
        let mut corrupted = names.clone();
        corrupted[4] = "zz".into();
        assert_eq!(score_ocr_strict(&corrupted, &truth).matched, 9);
    }

    #[test]
    fn pair_scores() {
        let a = |r, c| CellAddress::new(r, c).unwrap();
        let truth = SpatialTruth {
            queries: s(&["x", "y"]),
            answers: [("x".to_string(), a(1, 1)), ("y".to_string(), a(2, 3))].into(),
            address_form: crate::AddressForm::Rc,
        };
        let oracle = vec![("x".to_string(), a(1, 1)), ("y".to_string(), a(2, 3))];
        assert_eq!(score_pairs(&oracle, &truth).f1, 1.0);
        let shifted = vec![("x".to_string(), a(2, 1)), ("y".to_string(), a(3, 3))];
        assert_eq!(score_pairs(&shifted, &truth).matched, 0);
        let half = score_pairs(&oracle[..1], &truth);
        assert_eq!((half.precision, half.recall), (1.0, 0.5));
    }

    #[test]
    fn format_scores() {
        let a = |r, c| CellAddress::new(r, c).unwrap();
        let mut truth = FormatTruth::default();
        truth
            .sets
            .insert(FormatKind::TopBorder, BTreeSet::from([a(2, 1), a(2, 2)]));
        truth
            .sets
            .insert(FormatKind::Bold, BTreeSet::from([a(1, 1)]));
        let oracle: BTreeMap<_, _> = truth.sets.clone();
        assert_eq!(score_formats(&oracle, &truth).micro.f1, 1.0);

        let mut wrong = BTreeMap::new();
        wrong.insert(FormatKind::BottomBorder, BTreeSet::from([a(2, 1), a(2, 2)]));
        let sc = score_formats(&wrong, &truth);
        assert_eq!(sc.per_format[&FormatKind::BottomBorder].precision, 0.0);

        let empty = score_formats(&BTreeMap::new(), &truth);
        let tb = empty.per_format[&FormatKind::TopBorder];
        assert_eq!((tb.precision, tb.recall), (0.0, 0.0));
        assert_eq!(empty.per_format[&FormatKind::Fill].f1, 1.0);
    }

    #[test]
    fn mapping_examples() {
        let rows = vec![vec![], s(&["day", "cost", "total"])];
        let m = map_border_to_index(&s(&["day", "cost"]), &rows, TieBreak::LaterWins);
        assert_eq!((m.res, m.confidence), (2, 1.0));

        let m = map_border_to_index(&s(&["nope", "cost", "x"]), &rows, TieBreak::LaterWins);
        assert_eq!(m.res, -1);

        let rows = vec![s(&["a", "b"]), s(&["a", "b"])];
        assert_eq!(
            map_border_to_index(&s(&["a", "b"]), &rows, TieBreak::LaterWins).res,
            2
        );
        assert_eq!(
            map_border_to_index(&s(&["a", "b"]), &rows, TieBreak::FirstWins).res,
            1
        );
    }

    #[test]
    fn mapping_slides_and_trims() {
        let rows = vec![s(&["note"]), s(&["x", "y", " day ", "cost", "z"])];
        let m = map_border_to_index(&s(&["day", "cost"]), &rows, TieBreak::LaterWins);
        assert_eq!((m.res, m.confidence), (2, 1.0));
        // 4 of 5 aligned tokens is exactly the threshold.
        let rows = vec![s(&["a", "b", "c", "d", "e"])];
        assert_eq!(
            map_border_to_index(&s(&["a", "b", "c", "d", "X"]), &rows, TieBreak::LaterWins).res,
            1
        );
        assert_eq!(
            map_border_to_index(&s(&["a", "b", "c", "X", "Y"]), &rows, TieBreak::LaterWins).res,
            -1
        );
        // A shorter line slides inside a longer prediction.
        let rows = vec![s(&["b", "c"])];
        assert_eq!(
            map_border_to_index(&s(&["a", "b", "c"]), &rows, TieBreak::LaterWins).res,
            1
        );
        assert_eq!(map_border_to_index(&[], &rows, TieBreak::LaterWins).res, -1);
    }

    #[test]
    fn range_assembly() {
        let sheet = Sheet::from_text_rows(&[
            vec!["title", "", "", ""],
            vec!["day", "cost", "qty", "note"],
            vec!["mon", "1", "2", "n1"],
            vec!["sum", "10", "20", "end"],
        ])
        .unwrap();
        let b = BorderPrediction {
            top: s(&["day", "cost", "qty", "note"]),
            bottom: s(&["sum", "10", "20", "end"]),
            left: s(&["day", "mon", "sum"]),
            right: s(&["note", "n1", "end"]),
        };
        let r = boundaries_to_range_in(&b, &sheet, TieBreak::LaterWins).unwrap();
        assert_eq!(r.to_a1(), "A2:D4");

        let bad = BorderPrediction {
            top: s(&["hallucinated", "header"]),
            ..b.clone()
        };
        let e = boundaries_to_range_in(&bad, &sheet, TieBreak::LaterWins).unwrap_err();
        assert_eq!(e.edge, Edge::Top);
    }

    #[test]
    fn table_detection() {
        let t = vec![range("A1:C5"), range("E1:F3")];
        assert_eq!(score_table_detection(&t, &t).f1, 1.0);
        let off = score_table_detection(&[range("A2:C5")], &t[..1]);
        assert_eq!(off.matched, 0);
        let one = score_table_detection(&[range("E1:F3")], &t);
        assert_eq!((one.precision, one.recall), (1.0, 0.5));
        // Duplicates only match once.
        assert_eq!(
            score_table_detection(&[range("A1:C5"), range("A1:C5")], &t).matched,
            1
        );
        let iou = score_table_detection_iou(&[range("A2:C5")], &t[..1], 0.5);
        assert_eq!(iou.matched, 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn seq() -> impl Strategy<Value = Vec<String>> {
            proptest::collection::vec(
                prop_oneof![Just("a"), Just("b"), Just("c"), Just("d")].prop_map(String::from),
                0..12,
            )
        }

        proptest! {
            #[test]
            fn lcs_symmetric_and_bounded(a in seq(), b in seq()) {
                let l = lcs_length(&a, &b);
                prop_assert_eq!(l, lcs_length(&b, &a));
                prop_assert!(l <= a.len().min(b.len()));
                prop_assert!(longest_common_substring(&a, &b) <= l);
            }

            #[test]
            fn lcs_dominates_strict(pred in seq(), truth in seq()) {
                let refs: Vec<&str> = truth.iter().map(|x| x.as_str()).collect();
                let t = ocr_truth(&refs);
                prop_assert!(score_ocr_lcs(&pred, &t).f1 >= score_ocr_strict(&pred, &t).f1);
            }

            #[test]
            fn scores_in_unit_interval(m in 0usize..20, extra_p in 0usize..20, extra_t in 0usize..20) {
                let p = PRFScore::from_counts(Counts::new(m, m + extra_p, m + extra_t));
                for v in [p.precision, p.recall, p.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                if p.precision + p.recall > 0.0 {
                    prop_assert!((p.f1 - 2.0 * p.precision * p.recall / (p.precision + p.recall)).abs() < 1e-12);
                }
            }

            #[test]
            fn exact_row_maps_with_full_confidence(n in 1usize..8, target in 0usize..6, len in 1usize..6) {
                // Rows of globally distinct tokens.
                let rows: Vec<Vec<String>> = (0..n.max(target + 1)).map(|r| (0..len).map(|c| format!("r{r}c{c}")).collect()).collect();
                let m = map_border_to_index(&rows[target], &rows, TieBreak::LaterWins);
                prop_assert_eq!(m.res, target as i64 + 1);
                prop_assert_eq!(m.confidence, 1.0);
            }
        }
    }
}
