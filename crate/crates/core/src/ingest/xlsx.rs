//! Direct OOXML reader: cell display text, the six tracked formats,
//! column widths and defined-table annotations.

use std::collections::HashMap;
use std::io::{Cursor, Read};
use std::path::Path;

use tracing::warn;
use zip::ZipArchive;

use super::numfmt::{builtin_code, format_number, general};
use super::xml::{self, Element};
use super::{IngestError, IngestWarning, NamedSheet, Workbook};
use crate::sheet::{CellAddress, CellData, CellFormat, Rgb, Sheet, TableRange, DEFAULT_COL_WIDTH};

/// Used when a color reference cannot be resolved to RGB.
pub const FALLBACK_FILL: Rgb = Rgb(0xCC, 0xCC, 0xCC);

/// Pixel width of the widest digit in the default font; OOXML stores
/// column widths including 5 px of padding at this scale.
const MAX_DIGIT_PX: f64 = 7.0;

pub struct XlsxLoad {
    pub workbook: Workbook,
    pub warnings: Vec<IngestWarning>,
}

pub fn load_xlsx(path: &Path) -> Result<XlsxLoad, IngestError> {
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("workbook")
        .to_string();
    load_xlsx_bytes(&name, &bytes)
}

struct Archive {
    zip: ZipArchive<Cursor<Vec<u8>>>,
}

impl Archive {
    fn read(&mut self, part: &str) -> Result<Option<String>, IngestError> {
        let mut file = match self.zip.by_name(part) {
            Ok(f) => f,
            Err(zip::result::ZipError::FileNotFound) => return Ok(None),
            Err(e) => return Err(IngestError::Archive(e.to_string())),
        };
        let mut text = String::new();
        file.read_to_string(&mut text)
            .map_err(|e| IngestError::Part {
                part: part.to_string(),
                message: e.to_string(),
            })?;
        Ok(Some(text))
    }

    fn parse(&mut self, part: &str) -> Result<Option<Element>, IngestError> {
        match self.read(part)? {
            None => Ok(None),
            Some(text) => xml::parse(&text)
                .map(Some)
                .map_err(|message| IngestError::Part {
                    part: part.to_string(),
                    message,
                }),
        }
    }

    fn require(&mut self, part: &str) -> Result<Element, IngestError> {
        self.parse(part)?.ok_or_else(|| IngestError::Part {
            part: part.to_string(),
            message: "missing".into(),
        })
    }
}

/// Resolves a relationship target against the directory of its source part.
fn resolve_target(base_dir: &str, target: &str) -> String {
    if let Some(abs) = target.strip_prefix('/') {
        return abs.to_string();
    }
    let mut parts: Vec<&str> = base_dir.split('/').filter(|p| !p.is_empty()).collect();
    for seg in target.split('/') {
        match seg {
            ".." => {
                parts.pop();
            }
            "." | "" => {}
            s => parts.push(s),
        }
    }
    parts.join("/")
}

struct Rel {
    target: String,
    kind: String,
}

fn read_rels(
    ar: &mut Archive,
    rels_part: &str,
    base_dir: &str,
) -> Result<HashMap<String, Rel>, IngestError> {
    let mut out = HashMap::new();
    if let Some(root) = ar.parse(rels_part)? {
        for r in root.children_named("Relationship") {
            if let (Some(id), Some(target)) = (r.attr("Id"), r.attr("Target")) {
                let kind = r
                    .attr("Type")
                    .unwrap_or("")
                    .rsplit('/')
                    .next()
                    .unwrap_or("")
                    .to_string();
                out.insert(
                    id.to_string(),
                    Rel {
                        target: resolve_target(base_dir, target),
                        kind,
                    },
                );
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default)]
struct Xf {
    num_fmt: u32,
    font: usize,
    fill: usize,
    border: usize,
}

#[derive(Default)]
struct Styles {
    num_fmts: HashMap<u32, String>,
    bold: Vec<bool>,
    fills: Vec<Option<Element>>,
    borders: Vec<[bool; 4]>,
    xfs: Vec<Xf>,
}

fn flag(el: &Element) -> bool {
    !matches!(el.attr("val"), Some("0") | Some("false"))
}

fn parse_styles(root: &Element) -> Styles {
    let mut st = Styles::default();
    if let Some(nf) = root.child("numFmts") {
        for f in nf.children_named("numFmt") {
            if let (Some(id), Some(code)) = (
                f.attr("numFmtId").and_then(|v| v.parse().ok()),
                f.attr("formatCode"),
            ) {
                st.num_fmts.insert(id, code.to_string());
            }
        }
    }
    if let Some(fonts) = root.child("fonts") {
        st.bold = fonts
            .children_named("font")
            .map(|f| f.child("b").is_some_and(flag))
            .collect();
    }
    if let Some(fills) = root.child("fills") {
        st.fills = fills
            .children_named("fill")
            .map(|f| f.child("patternFill").cloned())
            .collect();
    }
    if let Some(borders) = root.child("borders") {
        st.borders = borders
            .children_named("border")
            .map(|b| {
                let side = |name: &str| {
                    b.child(name)
                        .and_then(|s| s.attr("style"))
                        .is_some_and(|style| style != "none")
                };
                let left = side("left") || side("start");
                let right = side("right") || side("end");
                [side("top"), side("bottom"), left, right]
            })
            .collect();
    }
    if let Some(xfs) = root.child("cellXfs") {
        st.xfs = xfs
            .children_named("xf")
            .map(|x| {
                let num = |k: &str| x.attr(k).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
                Xf {
                    num_fmt: num("numFmtId") as u32,
                    font: num("fontId"),
                    fill: num("fillId"),
                    border: num("borderId"),
                }
            })
            .collect();
    }
    st
}

/// Theme color slots in the order referenced by `theme="n"` attributes.
fn parse_theme(root: &Element) -> Vec<Rgb> {
    let Some(scheme) = find_descendant(root, "clrScheme") else {
        return Vec::new();
    };
    let slot = |name: &str| -> Option<Rgb> {
        let el = scheme.child(name)?;
        if let Some(c) = el.child("srgbClr") {
            return c.attr("val")?.parse().ok();
        }
        if let Some(c) = el.child("sysClr") {
            return c.attr("lastClr")?.parse().ok();
        }
        None
    };
    // Index 0/1 and 2/3 are swapped relative to document order.
    [
        "lt1", "dk1", "lt2", "dk2", "accent1", "accent2", "accent3", "accent4", "accent5",
        "accent6", "hlink", "folHlink",
    ]
    .iter()
    .map(|n| slot(n).unwrap_or(FALLBACK_FILL))
    .collect()
}

fn find_descendant<'a>(el: &'a Element, name: &str) -> Option<&'a Element> {
    if el.name == name {
        return Some(el);
    }
    el.children.iter().find_map(|c| find_descendant(c, name))
}

const INDEXED: [u32; 64] = [
    0x000000, 0xFFFFFF, 0xFF0000, 0x00FF00, 0x0000FF, 0xFFFF00, 0xFF00FF, 0x00FFFF, 0x000000,
    0xFFFFFF, 0xFF0000, 0x00FF00, 0x0000FF, 0xFFFF00, 0xFF00FF, 0x00FFFF, 0x800000, 0x008000,
    0x000080, 0x808000, 0x800080, 0x008080, 0xC0C0C0, 0x808080, 0x9999FF, 0x993366, 0xFFFFCC,
    0xCCFFFF, 0x660066, 0xFF8080, 0x0066CC, 0xCCCCFF, 0x000080, 0xFF00FF, 0xFFFF00, 0x00FFFF,
    0x800080, 0x800000, 0x008080, 0x0000FF, 0x00CCFF, 0xCCFFFF, 0xCCFFCC, 0xFFFF99, 0x99CCFF,
    0xFF99CC, 0xCC99FF, 0xFFCC99, 0x3366FF, 0x33CCCC, 0x99CC00, 0xFFCC00, 0xFF9900, 0xFF6600,
    0x666699, 0x969696, 0x003366, 0x339966, 0x003300, 0x333300, 0x993300, 0x993366, 0x333399,
    0x333333,
];

fn rgb_from_u32(v: u32) -> Rgb {
    Rgb((v >> 16) as u8, (v >> 8) as u8, v as u8)
}

/// Applies an OOXML tint in HSL space.
fn apply_tint(c: Rgb, tint: f64) -> Rgb {
    if tint == 0.0 {
        return c;
    }
    let (r, g, b) = (c.0 as f64 / 255.0, c.1 as f64 / 255.0, c.2 as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let mut l = (max + min) / 2.0;
    let d = max - min;
    let (h, s) = if d == 0.0 {
        (0.0, 0.0)
    } else {
        let s = if l > 0.5 {
            d / (2.0 - max - min)
        } else {
            d / (max + min)
        };
        let h = if max == r {
            ((g - b) / d).rem_euclid(6.0)
        } else if max == g {
            (b - r) / d + 2.0
        } else {
            (r - g) / d + 4.0
        } / 6.0;
        (h, s)
    };
    l = if tint < 0.0 {
        l * (1.0 + tint)
    } else {
        l * (1.0 - tint) + tint
    };
    let q = if l < 0.5 {
        l * (1.0 + s)
    } else {
        l + s - l * s
    };
    let p = 2.0 * l - q;
    let hue = |mut t: f64| {
        t = t.rem_euclid(1.0);
        if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        }
    };
    let (r, g, b) = if s == 0.0 {
        (l, l, l)
    } else {
        (hue(h + 1.0 / 3.0), hue(h), hue(h - 1.0 / 3.0))
    };
    let to8 = |v: f64| (v * 255.0).round().clamp(0.0, 255.0) as u8;
    Rgb(to8(r), to8(g), to8(b))
}

fn resolve_color(el: &Element, theme: &[Rgb]) -> Option<Rgb> {
    let tint = el
        .attr("tint")
        .and_then(|t| t.parse::<f64>().ok())
        .unwrap_or(0.0);
    let base = if let Some(argb) = el.attr("rgb") {
        let hex = if argb.len() == 8 { &argb[2..] } else { argb };
        hex.parse::<Rgb>().ok()
    } else if let Some(t) = el.attr("theme") {
        t.parse::<usize>().ok().and_then(|i| theme.get(i).copied())
    } else if let Some(i) = el.attr("indexed") {
        i.parse::<usize>()
            .ok()
            .and_then(|i| INDEXED.get(i).map(|&v| rgb_from_u32(v)))
    } else {
        None
    }?;
    Some(apply_tint(base, tint))
}

struct StyleResolver<'a> {
    styles: &'a Styles,
    theme: &'a [Rgb],
    date1904: bool,
}

impl StyleResolver<'_> {
    fn format(&self, s: usize, warnings: &mut Vec<String>) -> CellFormat {
        let Some(xf) = self.styles.xfs.get(s) else {
            return CellFormat::default();
        };
        let mut f = CellFormat {
            bold: self.styles.bold.get(xf.font).copied().unwrap_or(false),
            ..Default::default()
        };
        if let Some([t, b, l, r]) = self.styles.borders.get(xf.border).copied() {
            f.border_top = t;
            f.border_bottom = b;
            f.border_left = l;
            f.border_right = r;
        }
        if let Some(Some(pf)) = self.styles.fills.get(xf.fill) {
            let pattern = pf.attr("patternType").unwrap_or("none");
            if pattern != "none" {
                let color = pf
                    .child("fgColor")
                    .or_else(|| pf.child("bgColor"))
                    .and_then(|c| resolve_color(c, self.theme));
                f.fill = Some(color.unwrap_or_else(|| {
                    warnings.push(format!(
                        "unresolvable fill color in fill #{}, using fallback gray",
                        xf.fill
                    ));
                    FALLBACK_FILL
                }));
            }
        }
        f
    }

    fn number(&self, s: usize, raw: &str) -> String {
        let Ok(v) = raw.trim().parse::<f64>() else {
            return raw.to_string();
        };
        let id = self.styles.xfs.get(s).map_or(0, |x| x.num_fmt);
        let code = self
            .styles
            .num_fmts
            .get(&id)
            .map(String::as_str)
            .or_else(|| builtin_code(id));
        match code {
            Some(code) => format_number(v, code, self.date1904).unwrap_or_else(|| raw.to_string()),
            None => general(v),
        }
    }
}

fn chars_from_ooxml_width(w: f64) -> f64 {
    let chars = ((w * MAX_DIGIT_PX - 5.0) / MAX_DIGIT_PX * 100.0).round() / 100.0;
    if chars > 0.0 {
        chars
    } else {
        0.1
    }
}

fn parse_cell_ref(r: &str) -> Option<CellAddress> {
    CellAddress::from_a1(r.trim_start_matches('$')).ok()
}

fn read_sheet(
    root: &Element,
    shared: &[String],
    res: &StyleResolver<'_>,
    warnings: &mut Vec<String>,
) -> Result<Sheet, String> {
    let mut cells: HashMap<(u32, u32), CellData> = HashMap::new();
    let (mut max_r, mut max_c) = (1u32, 1u32);
    if let Some(data) = root.child("sheetData") {
        let mut next_row = 1u32;
        for row in data.children_named("row") {
            let r = row
                .attr("r")
                .and_then(|v| v.parse().ok())
                .unwrap_or(next_row);
            next_row = r + 1;
            let mut next_col = 1u32;
            for c in row.children_named("c") {
                let addr = match c.attr("r") {
                    Some(a) => {
                        parse_cell_ref(a).ok_or_else(|| format!("bad cell reference {a:?}"))?
                    }
                    None => CellAddress::new(r, next_col).map_err(|e| e.to_string())?,
                };
                next_col = addr.col() + 1;
                let s = c
                    .attr("s")
                    .and_then(|v| v.parse::<usize>().ok())
                    .unwrap_or(0);
                let v = c.child("v").map(|v| v.text.as_str());
                let text = match c.attr("t").unwrap_or("n") {
                    "s" => v
                        .and_then(|i| i.trim().parse::<usize>().ok())
                        .and_then(|i| shared.get(i).cloned())
                        .unwrap_or_default(),
                    "inlineStr" => c
                        .child("is")
                        .map(|is| is.deep_text(&["rPh", "rPr"]))
                        .unwrap_or_default(),
                    "b" => match v.map(str::trim) {
                        Some("1") => "TRUE".into(),
                        Some("0") => "FALSE".into(),
                        other => other.unwrap_or("").to_string(),
                    },
                    "str" | "e" | "d" => v.unwrap_or("").to_string(),
                    _ => v.map(|raw| res.number(s, raw)).unwrap_or_default(),
                };
                let format = res.format(s, warnings);
                let cell = CellData::with_format(text, format);
                if cell.is_default() {
                    continue;
                }
                max_r = max_r.max(addr.row());
                max_c = max_c.max(addr.col());
                cells.insert((addr.row(), addr.col()), cell);
            }
        }
    }

    let default_width = root
        .child("sheetFormatPr")
        .and_then(|p| p.attr("defaultColWidth"))
        .and_then(|w| w.parse::<f64>().ok())
        .map(chars_from_ooxml_width)
        .unwrap_or(DEFAULT_COL_WIDTH);
    let mut widths = vec![default_width; max_c as usize];
    if let Some(cols) = root.child("cols") {
        for col in cols.children_named("col") {
            let min = col
                .attr("min")
                .and_then(|v| v.parse::<u32>().ok())
                .unwrap_or(1)
                .max(1);
            let max = col
                .attr("max")
                .and_then(|v| v.parse::<u32>().ok())
                .unwrap_or(min);
            let hidden = col.attr("hidden").is_some_and(|h| h == "1" || h == "true");
            let width = match col.attr("width").and_then(|w| w.parse::<f64>().ok()) {
                _ if hidden => 0.1,
                Some(w) => chars_from_ooxml_width(w),
                None => default_width,
            };
            for c in min..=max.min(max_c) {
                widths[c as usize - 1] = width;
            }
        }
    }

    let mut grid = vec![CellData::default(); max_r as usize * max_c as usize];
    for ((r, c), cell) in cells {
        grid[(r - 1) as usize * max_c as usize + (c - 1) as usize] = cell;
    }
    Sheet::from_parts(max_r, max_c, grid, widths, 1.0).map_err(|e| e.to_string())
}

pub fn load_xlsx_bytes(name: &str, bytes: &[u8]) -> Result<XlsxLoad, IngestError> {
    let zip = ZipArchive::new(Cursor::new(bytes.to_vec()))
        .map_err(|e| IngestError::Archive(e.to_string()))?;
    let mut ar = Archive { zip };
    let mut warnings = Vec::new();

    let wb_root = ar.require("xl/workbook.xml")?;
    let date1904 = wb_root
        .child("workbookPr")
        .and_then(|p| p.attr("date1904"))
        .is_some_and(|v| v == "1" || v == "true");
    let wb_rels = read_rels(&mut ar, "xl/_rels/workbook.xml.rels", "xl")?;

    let shared: Vec<String> = match ar.parse("xl/sharedStrings.xml")? {
        Some(root) => root
            .children_named("si")
            .map(|si| si.deep_text(&["rPh", "rPr"]))
            .collect(),
        None => Vec::new(),
    };
    let styles = ar
        .parse("xl/styles.xml")?
        .map(|r| parse_styles(&r))
        .unwrap_or_default();
    let theme_part = wb_rels
        .values()
        .find(|r| r.kind == "theme")
        .map(|r| r.target.clone());
    let theme = match theme_part {
        Some(p) => ar.parse(&p)?.map(|r| parse_theme(&r)).unwrap_or_default(),
        None => Vec::new(),
    };
    let res = StyleResolver {
        styles: &styles,
        theme: &theme,
        date1904,
    };

    let mut workbook = Workbook::new(name);
    let sheets_el = wb_root.child("sheets").cloned().unwrap_or_default();
    for sh in sheets_el.children_named("sheet") {
        let sheet_name = sh.attr("name").unwrap_or("Sheet").to_string();
        let Some(rel) = sh.attr("id").and_then(|id| wb_rels.get(id)) else {
            warnings.push(IngestWarning {
                sheet: Some(sheet_name),
                message: "sheet has no relationship target; skipped".into(),
            });
            continue;
        };
        if rel.kind != "worksheet" {
            warnings.push(IngestWarning {
                sheet: Some(sheet_name),
                message: format!("unsupported sheet type {:?}; skipped", rel.kind),
            });
            continue;
        }
        let part = rel.target.clone();
        let root = ar.require(&part)?;
        let mut sheet_warnings = Vec::new();
        let sheet = read_sheet(&root, &shared, &res, &mut sheet_warnings).map_err(|message| {
            IngestError::Part {
                part: part.clone(),
                message,
            }
        })?;
        sheet_warnings.sort();
        sheet_warnings.dedup();
        for message in sheet_warnings {
            warn!(sheet = %sheet_name, "{message}");
            warnings.push(IngestWarning {
                sheet: Some(sheet_name.clone()),
                message,
            });
        }

        let (dir, file) = part.rsplit_once('/').unwrap_or(("", part.as_str()));
        let sheet_rels = read_rels(&mut ar, &format!("{dir}/_rels/{file}.rels"), dir)?;
        let mut tables = Vec::new();
        if let Some(parts) = root.child("tableParts") {
            for tp in parts.children_named("tablePart") {
                let Some(trel) = tp.attr("id").and_then(|id| sheet_rels.get(id)) else {
                    continue;
                };
                let Some(troot) = ar.parse(&trel.target)? else {
                    continue;
                };
                match troot.attr("ref").map(TableRange::from_a1) {
                    Some(Ok(r)) => tables.push(r),
                    _ => warnings.push(IngestWarning {
                        sheet: Some(sheet_name.clone()),
                        message: format!("table part {} has no valid ref", trel.target),
                    }),
                }
            }
        }
        workbook.sheets.push(NamedSheet {
            name: sheet_name,
            sheet,
            tables,
        });
    }
    Ok(XlsxLoad {
        workbook: workbook.trimmed(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relationship_targets_resolve() {
        assert_eq!(
            resolve_target("xl", "worksheets/sheet1.xml"),
            "xl/worksheets/sheet1.xml"
        );
        assert_eq!(
            resolve_target("xl/worksheets", "../tables/table1.xml"),
            "xl/tables/table1.xml"
        );
        assert_eq!(
            resolve_target("xl", "/xl/worksheets/sheet2.xml"),
            "xl/worksheets/sheet2.xml"
        );
    }

    #[test]
    fn width_conversion_maps_default() {
        assert_eq!(chars_from_ooxml_width(9.140625), 8.43);
        assert_eq!(chars_from_ooxml_width(0.0), 0.1);
    }

    #[test]
    fn tint_lightens_and_darkens() {
        assert_eq!(apply_tint(Rgb(0, 0, 0), 0.5), Rgb(128, 128, 128));
        assert_eq!(apply_tint(Rgb(255, 255, 255), -0.5), Rgb(128, 128, 128));
        assert_eq!(apply_tint(Rgb(10, 20, 30), 0.0), Rgb(10, 20, 30));
    }

    #[test]
    fn garbage_bytes_are_an_archive_error() {
        assert!(matches!(
            load_xlsx_bytes("x", b"not a zip"),
            Err(IngestError::Archive(_))
        ));
    }
}
