use rust_xlsxwriter::{Color, Format, FormatBorder, Table, TableColumn};
use sheetprobe::ingest::{from_json_str, load_any, load_xlsx_bytes, to_json_string};
use sheetprobe::transform::{apply_setting, Setting};
use sheetprobe::truth::{extract_formats, extract_ocr, FormatKind};
use sheetprobe::{CellAddress, Rgb, TableRange};

/// A1 holds a bold, bottom-bordered, yellow title above a four-column
/// table at A2:D6.
fn fixture() -> Vec<u8> {
    let mut wb = rust_xlsxwriter::Workbook::new();
    let ws = wb.add_worksheet();
    ws.set_name("Budget").unwrap();
    let title = Format::new()
        .set_bold()
        .set_border_bottom(FormatBorder::Thin)
        .set_background_color(Color::RGB(0xFFFF00));
    ws.write_string_with_format(0, 0, "day", &title).unwrap();
    let headers = ["item", "cost", "qty", "note"];
    for (r, row) in [
        ["rent", "1200", "1", "monthly"],
        ["food", "310.5", "4", "weekly"],
        ["bus", "2.75", "20", ""],
        ["gym", "45", "1", "x"],
    ]
    .iter()
    .enumerate()
    {
        for (c, v) in row.iter().enumerate() {
            let (row, col) = (r as u32 + 2, c as u16);
            match v.parse::<f64>() {
                Ok(n) => ws.write_number(row, col, n).unwrap(),
                Err(_) if v.is_empty() => ws,
                Err(_) => ws.write_string(row, col, *v).unwrap(),
            };
        }
    }
    let columns: Vec<TableColumn> = headers
        .iter()
        .map(|h| TableColumn::new().set_header(*h))
        .collect();
    ws.add_table(1, 0, 5, 3, &Table::new().set_columns(&columns))
        .unwrap();
    ws.set_column_width(1, 20).unwrap();
    let pct = Format::new().set_num_format("0.0%");
    ws.write_number_with_format(7, 5, 0.25, &pct).unwrap();
    wb.save_to_buffer().unwrap()
}

#[test]
fn reads_text_styles_widths_and_tables() {
    let load = load_xlsx_bytes("fixture", &fixture()).unwrap();
    let wb = load.workbook;
    assert_eq!(wb.sheets.len(), 1);
    let ns = &wb.sheets[0];
    assert_eq!(ns.name, "Budget");
    assert_eq!(ns.tables, vec![TableRange::from_a1("A2:D6").unwrap()]);

    let s = &ns.sheet;
    let a1 = s.cell(1, 1);
    assert_eq!(a1.text, "day");
    assert!(a1.format.bold);
    assert!(a1.format.border_bottom);
    assert!(!a1.format.border_top);
    assert_eq!(a1.format.fill, Some(Rgb(0xFF, 0xFF, 0x00)));

    assert_eq!(s.cell(2, 1).text, "item");
    assert_eq!(s.cell(2, 4).text, "note");
    assert_eq!(s.cell(3, 2).text, "1200");
    assert_eq!(s.cell(4, 2).text, "310.5");
    assert_eq!(s.cell(8, 6).text, "25.0%");
    assert!(
        (s.col_widths()[1] - 20.0).abs() < 1.0,
        "width {}",
        s.col_widths()[1]
    );

    let formats = extract_formats(s);
    assert!(formats
        .get(FormatKind::Bold)
        .contains(&CellAddress::from_a1("A1").unwrap()));
    assert!(formats
        .get(FormatKind::Fill)
        .contains(&CellAddress::from_a1("A1").unwrap()));
}

#[test]
fn json_round_trip_preserves_the_workbook() {
    let wb = load_xlsx_bytes("fixture", &fixture()).unwrap().workbook;
    let text = to_json_string(&wb);
    let back = from_json_str(&text).unwrap();
    assert_eq!(back, wb);
    assert_eq!(to_json_string(&back), text);
}

#[test]
fn load_any_dispatches_on_extension() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fixture.xlsx");
    std::fs::write(&path, fixture()).unwrap();
    let (wb, _) = load_any(&path).unwrap();
    assert_eq!(wb.sheets[0].sheet.cell(1, 1).text, "day");
    assert!(load_any(&dir.path().join("notes.txt")).is_err());
}

#[test]
fn address_augment_on_real_workbook() {
    let wb = load_xlsx_bytes("fixture", &fixture()).unwrap().workbook;
    let s = &wb.sheets[0].sheet;
    let aug = apply_setting(s, Setting::AddressAugment);
    assert_eq!(aug.cell(1, 1).text, "A1, day");
    assert_eq!(
        extract_ocr(&aug).sequence.len(),
        extract_ocr(s).sequence.len()
    );
}
