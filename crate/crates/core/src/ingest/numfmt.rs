//! Number-format rendering for the common subset of spreadsheet format codes.
//!
//! Supports General, fixed decimals, thousands separators, percent,
//! scientific notation, literal prefixes/suffixes and date/time codes.
//! Anything else returns `None` and the caller falls back to the raw value.

/// Built-in format codes by id.
pub(crate) fn builtin_code(id: u32) -> Option<&'static str> {
    Some(match id {
        0 => "General",
        1 => "0",
        2 => "0.00",
        3 => "#,##0",
        4 => "#,##0.00",
        9 => "0%",
        10 => "0.00%",
        11 => "0.00E+00",
        12 => "# ?/?",
        13 => "# ??/??",
        14 => "m/d/yyyy",
        15 => "d-mmm-yy",
        16 => "d-mmm",
        17 => "mmm-yy",
        18 => "h:mm AM/PM",
        19 => "h:mm:ss AM/PM",
        20 => "h:mm",
        21 => "h:mm:ss",
        22 => "m/d/yyyy h:mm",
        37 => "#,##0 ;(#,##0)",
        38 => "#,##0 ;[Red](#,##0)",
        39 => "#,##0.00;(#,##0.00)",
        40 => "#,##0.00;[Red](#,##0.00)",
        45 => "mm:ss",
        46 => "[h]:mm:ss",
        47 => "mmss.0",
        48 => "##0.0E+0",
        49 => "@",
        _ => return None,
    })
}

/// Excel "General" rendering: integers without decimals, otherwise up to
/// ten significant digits with trailing zeros removed.
pub(crate) fn general(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == v.trunc() && v.abs() < 1e11 {
        return format!("{}", v as i64);
    }
    let abs = v.abs();
    if !(1e-9..1e11).contains(&abs) {
        let s = format!("{:.5E}", v);
        return tidy_exponent(&s);
    }
    let int_digits = if abs >= 1.0 {
        abs.log10().floor() as i32 + 1
    } else {
        1
    };
    let decimals = (10 - int_digits).max(0) as usize;
    let s = format!("{:.*}", decimals, v);
    trim_zeros(&s)
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn tidy_exponent(s: &str) -> String {
    // "1.23450E7" -> "1.2345E+07"
    let (mant, exp) = s.split_once('E').unwrap_or((s, "0"));
    let mant = trim_zeros(mant);
    let exp: i32 = exp.parse().unwrap_or(0);
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}E{sign}{:02}", exp.abs())
}

/// Renders `v` with `code`. `date1904` selects the 1904 date system.
pub(crate) fn format_number(v: f64, code: &str, date1904: bool) -> Option<String> {
    let sections = split_sections(code);
    let (section, negate_sign) = match sections.len() {
        0 => return None,
        1 => (sections[0].as_str(), false),
        _ if v < 0.0 => (sections[1].as_str(), true),
        _ if v == 0.0 && sections.len() >= 3 => (sections[2].as_str(), false),
        _ => (sections[0].as_str(), false),
    };
    let cleaned = strip_brackets(section);
    let trimmed = cleaned.trim();
    if trimmed.eq_ignore_ascii_case("general") || trimmed.is_empty() {
        return Some(general(v));
    }
    if trimmed == "@" {
        return Some(general(v));
    }
    if is_date_code(&cleaned) {
        return format_date(v, &cleaned, date1904);
    }
    let value = if negate_sign { v.abs() } else { v };
    format_numeric(value, &cleaned)
}

fn split_sections(code: &str) -> Vec<String> {
    let mut out = vec![String::new()];
    let mut in_quote = false;
    let mut chars = code.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => {
                in_quote = !in_quote;
                out.last_mut().unwrap().push(c);
            }
            '\\' => {
                out.last_mut().unwrap().push(c);
                if let Some(n) = chars.next() {
                    out.last_mut().unwrap().push(n);
                }
            }
            ';' if !in_quote => out.push(String::new()),
            _ => out.last_mut().unwrap().push(c),
        }
    }
    out
}

/// Removes `[Red]`, `[$-409]` style tokens but keeps `[h]` elapsed markers
/// as plain `h`. Currency tokens like `[$€-407]` keep their symbol.
fn strip_brackets(s: &str) -> String {
    let mut out = String::new();
    let mut rest = s;
    while let Some(start) = rest.find('[') {
        out.push_str(&rest[..start]);
        let Some(end) = rest[start..].find(']') else {
            rest = &rest[start..];
            break;
        };
        let inner = &rest[start + 1..start + end];
        if let Some(cur) = inner.strip_prefix('$') {
            let sym = cur.split('-').next().unwrap_or("");
            out.push_str(sym);
        } else if inner
            .chars()
            .all(|c| matches!(c, 'h' | 'H' | 'm' | 'M' | 's' | 'S'))
        {
            out.push_str(&inner.to_ascii_lowercase());
        }
        rest = &rest[start + end + 1..];
    }
    out.push_str(rest);
    out
}

fn unquoted(code: &str) -> String {
    let mut out = String::new();
    let mut in_quote = false;
    let mut chars = code.chars();
    while let Some(c) = chars.next() {
        match c {
            '"' => in_quote = !in_quote,
            '\\' => {
                chars.next();
            }
            _ if !in_quote => out.push(c),
            _ => {}
        }
    }
    out
}

fn is_date_code(code: &str) -> bool {
    unquoted(code)
        .chars()
        .any(|c| matches!(c.to_ascii_lowercase(), 'y' | 'd' | 'h' | 's'))
        || {
            let u = unquoted(code).to_ascii_lowercase();
            u.contains('m') && !u.contains('0') && !u.contains('#')
        }
}

fn format_numeric(v: f64, code: &str) -> Option<String> {
    // Split the code into literal prefix, numeric core, literal suffix.
    let mut prefix = String::new();
    let mut core = String::new();
    let mut suffix = String::new();
    let mut in_quote = false;
    let mut seen_core = false;
    let mut chars = code.chars().peekable();
    while let Some(c) = chars.next() {
        let literal = |ch: char, prefix: &mut String, suffix: &mut String, seen: bool| {
            if seen {
                suffix.push(ch)
            } else {
                prefix.push(ch)
            }
        };
        if in_quote {
            if c == '"' {
                in_quote = false;
            } else {
                literal(c, &mut prefix, &mut suffix, seen_core);
            }
            continue;
        }
        match c {
            '"' => in_quote = true,
            '\\' => {
                if let Some(n) = chars.next() {
                    literal(n, &mut prefix, &mut suffix, seen_core);
                }
            }
            '_' => {
                chars.next();
                literal(' ', &mut prefix, &mut suffix, seen_core);
            }
            '*' => {
                chars.next();
            }
            '0' | '#' | '?' | '.' | ',' | 'E' | 'e' | '+' | '-'
                if seen_core || matches!(c, '0' | '#' | '?' | '.') =>
            {
                if !suffix.is_empty() && !matches!(c, '+' | '-') {
                    return None;
                }
                if matches!(c, '+' | '-') && !core.ends_with(['E', 'e']) {
                    literal(c, &mut prefix, &mut suffix, seen_core);
                    continue;
                }
                seen_core = true;
                core.push(c);
            }
            '%' => {
                literal(c, &mut prefix, &mut suffix, seen_core);
            }
            '/' => return None,
            _ => literal(c, &mut prefix, &mut suffix, seen_core),
        }
    }
    if core.is_empty() {
        return Some(format!("{prefix}{suffix}"));
    }
    let percent = code.matches('%').count() as i32 - unquoted_literal_percent(code);
    let mut value = v * 100f64.powi(percent.max(0));

    if let Some(epos) = core.find(['E', 'e']) {
        let mant = &core[..epos];
        let decimals = mant.split_once('.').map_or(0, |(_, d)| d.len());
        if value == 0.0 {
            return Some(format!("{prefix}{:.*}E+00{suffix}", decimals, 0.0));
        }
        let exp = value.abs().log10().floor() as i32;
        let mut m = value / 10f64.powi(exp);
        let mut exp = exp;
        let rounded: f64 = format!("{:.*}", decimals, m).parse().ok()?;
        if rounded.abs() >= 10.0 {
            m /= 10.0;
            exp += 1;
        }
        let sign = if exp < 0 { '-' } else { '+' };
        return Some(format!(
            "{prefix}{:.*}E{sign}{:02}{suffix}",
            decimals,
            m,
            exp.abs()
        ));
    }

    // Trailing commas scale by 1000 each.
    let mut body = core.as_str();
    while body.ends_with(',') {
        value /= 1000.0;
        body = &body[..body.len() - 1];
    }
    let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
    let grouping = int_part.contains(',');
    let min_int = int_part.chars().filter(|&c| c == '0').count();
    let max_dec = frac_part
        .chars()
        .filter(|c| matches!(c, '0' | '#' | '?'))
        .count();
    let min_dec = frac_part.chars().filter(|&c| c == '0').count();

    let neg = value < 0.0;
    let s = format!("{:.*}", max_dec, value.abs());
    let (mut ip, mut fp) = match s.split_once('.') {
        Some((a, b)) => (a.to_string(), b.to_string()),
        None => (s.clone(), String::new()),
    };
    while fp.len() > min_dec && fp.ends_with('0') {
        fp.pop();
    }
    if ip == "0" && min_int == 0 {
        ip.clear();
    }
    while ip.len() < min_int {
        ip.insert(0, '0');
    }
    if grouping && ip.len() > 3 {
        let bytes: Vec<char> = ip.chars().collect();
        let mut g = String::new();
        for (i, ch) in bytes.iter().enumerate() {
            if i > 0 && (bytes.len() - i).is_multiple_of(3) {
                g.push(',');
            }
            g.push(*ch);
        }
        ip = g;
    }
    let mut num = ip;
    if !fp.is_empty() || (frac_part.contains('0') && max_dec > 0) {
        num.push('.');
        num.push_str(&fp);
    }
    let is_zero = num.chars().all(|c| !c.is_ascii_digit() || c == '0');
    let sign = if neg && !is_zero { "-" } else { "" };
    Some(format!("{sign}{prefix}{num}{suffix}"))
}

fn unquoted_literal_percent(code: &str) -> i32 {
    let all = code.matches('%').count();
    let bare = unquoted(code).matches('%').count();
    (all - bare) as i32
}

/// Civil date from days since 1970-01-01.
fn civil_from_days(z: i64) -> (i64, u32, u32) {
    let z = z + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z.rem_euclid(146_097);
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = (doy - (153 * mp + 2) / 5 + 1) as u32;
    let m = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
    (if m <= 2 { y + 1 } else { y }, m, d)
}

/// Converts a serial date to (year, month, day, seconds-of-day).
pub(crate) fn serial_to_datetime(serial: f64, date1904: bool) -> Option<(i64, u32, u32, u32)> {
    if !serial.is_finite() || !(0.0..=2_958_466.0).contains(&serial) {
        return None;
    }
    let mut days = serial.floor() as i64;
    let mut secs = ((serial - serial.floor()) * 86_400.0).round() as u32;
    if secs >= 86_400 {
        secs -= 86_400;
        days += 1;
    }
    if date1904 {
        // 1904-01-01 is day 0.
        let (y, m, d) = civil_from_days(days - 24_107);
        return Some((y, m, d, secs));
    }
    if days == 60 {
        // The fictitious 1900-02-29.
        return Some((1900, 2, 29, secs));
    }
    let offset = if days < 60 { 25_568 } else { 25_569 };
    let (y, m, d) = civil_from_days(days - offset);
    Some((y, m, d, secs))
}

const MONTHS: [&str; 12] = [
    "January",
    "February",
    "March",
    "April",
    "May",
    "June",
    "July",
    "August",
    "September",
    "October",
    "November",
    "December",
];

fn format_date(v: f64, code: &str, date1904: bool) -> Option<String> {
    let (y, mo, d, secs) = serial_to_datetime(v, date1904)?;
    let (hh, mm, ss) = (secs / 3600, (secs / 60) % 60, secs % 60);
    let lower = unquoted(code).to_ascii_lowercase();
    let ampm = lower.contains("am/pm") || lower.contains("a/p");

    // Tokenize.
    let chars: Vec<char> = code.chars().collect();
    let mut out = String::new();
    let mut i = 0;
    let mut last_was_hour = false;
    while i < chars.len() {
        let c = chars[i];
        let lc = c.to_ascii_lowercase();
        if c == '"' {
            i += 1;
            while i < chars.len() && chars[i] != '"' {
                out.push(chars[i]);
                i += 1;
            }
            i += 1;
            continue;
        }
        if c == '\\' {
            if i + 1 < chars.len() {
                out.push(chars[i + 1]);
            }
            i += 2;
            continue;
        }
        let run = chars[i..]
            .iter()
            .take_while(|x| x.to_ascii_lowercase() == lc)
            .count();
        if code[code.char_indices().nth(i).map_or(code.len(), |(b, _)| b)..]
            .to_ascii_lowercase()
            .starts_with("am/pm")
        {
            out.push_str(if hh < 12 { "AM" } else { "PM" });
            i += 5;
            continue;
        }
        match lc {
            'y' => {
                if run <= 2 {
                    out.push_str(&format!("{:02}", y.rem_euclid(100)));
                } else {
                    out.push_str(&format!("{:04}", y));
                }
                last_was_hour = false;
            }
            'm' => {
                // Minutes when following an hour or preceding seconds.
                let next_is_sec = chars[i + run..]
                    .iter()
                    .find(|x| x.is_ascii_alphabetic())
                    .is_some_and(|x| x.eq_ignore_ascii_case(&'s'));
                if (last_was_hour || next_is_sec) && run <= 2 {
                    out.push_str(&if run == 2 {
                        format!("{:02}", mm)
                    } else {
                        mm.to_string()
                    });
                } else {
                    let name = MONTHS[(mo - 1) as usize];
                    match run {
                        1 => out.push_str(&mo.to_string()),
                        2 => out.push_str(&format!("{:02}", mo)),
                        3 => out.push_str(&name[..3]),
                        5 => out.push_str(&name[..1]),
                        _ => out.push_str(name),
                    }
                }
                last_was_hour = false;
            }
            'd' => {
                match run {
                    1 => out.push_str(&d.to_string()),
                    2 => out.push_str(&format!("{:02}", d)),
                    _ => {
                        let (yy, mm_, dd) = (y, mo, d);
                        let wd = weekday(yy, mm_, dd);
                        let names = [
                            "Sunday",
                            "Monday",
                            "Tuesday",
                            "Wednesday",
                            "Thursday",
                            "Friday",
                            "Saturday",
                        ];
                        let name = names[wd];
                        out.push_str(if run == 3 { &name[..3] } else { name });
                    }
                }
                last_was_hour = false;
            }
            'h' => {
                let h = if ampm {
                    let h12 = hh % 12;
                    if h12 == 0 {
                        12
                    } else {
                        h12
                    }
                } else {
                    hh
                };
                out.push_str(&if run >= 2 {
                    format!("{:02}", h)
                } else {
                    h.to_string()
                });
                last_was_hour = true;
            }
            's' => {
                out.push_str(&if run >= 2 {
                    format!("{:02}", ss)
                } else {
                    ss.to_string()
                });
                last_was_hour = false;
            }
            _ => {
                for _ in 0..run {
                    out.push(c);
                }
            }
        }
        i += run;
    }
    Some(out)
}

fn weekday(y: i64, m: u32, d: u32) -> usize {
    // Days since 1970-01-01 (a Thursday).
    let y_adj = if m <= 2 { y - 1 } else { y };
    let era = y_adj.div_euclid(400);
    let yoe = y_adj.rem_euclid(400);
    let mp = (m as i64 + 9) % 12;
    let doy = (153 * mp + 2) / 5 + d as i64 - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    let days = era * 146_097 + doe - 719_468;
    ((days + 4).rem_euclid(7)) as usize
}
