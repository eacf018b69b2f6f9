//! Report emission: CSV (round-trippable) and an aligned text table.

use thiserror::Error;

use super::{MetricsRow, MetricsTable};

pub const CSV_HEADER: &str = "config,split,SR,PLWSR,GC,PLWGC,n";

#[derive(Debug, Error, PartialEq)]
pub enum CsvError {
    #[error("missing or wrong header (expected {CSV_HEADER:?})")]
    BadHeader,
    #[error("line {0}: wrong field count")]
    FieldCount(usize),
    #[error("line {0}: unparseable number")]
    BadNumber(usize),
}

pub fn emit_csv(table: &MetricsTable) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &table.rows {
        out.push_str(&format!(
            "{},{},{:.2},{:.2},{:.2},{:.2},{}\n",
            r.config, r.split, r.sr, r.plwsr, r.gc, r.plwgc, r.n
        ));
    }
    out
}

pub fn parse_csv(text: &str) -> Result<MetricsTable, CsvError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(CsvError::BadHeader),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CsvError::FieldCount(i + 1));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| CsvError::BadNumber(i + 1));
        rows.push(MetricsRow {
            config: fields[0].to_string(),
            split: fields[1].to_string(),
            sr: num(fields[2])?,
            plwsr: num(fields[3])?,
            gc: num(fields[4])?,
            plwgc: num(fields[5])?,
            n: fields[6].parse().map_err(|_| CsvError::BadNumber(i + 1))?,
        });
    }
    Ok(MetricsTable { rows })
}

pub fn emit_text(table: &MetricsTable) -> String {
    let headers = ["config", "split", "SR", "PLWSR", "GC", "PLWGC", "n"];
    let mut cells: Vec<[String; 7]> = vec![headers.map(|h| h.to_string())];
    for r in &table.rows {
        cells.push([
            r.config.clone(),
            r.split.clone(),
            format!("{:.2}", r.sr),
            format!("{:.2}", r.plwsr),
            format!("{:.2}", r.gc),
            format!("{:.2}", r.plwgc),
            r.n.to_string(),
        ]);
    }
    let mut widths = [0usize; 7];
    for row in &cells {
        for (k, c) in row.iter().enumerate() {
            widths[k] = widths[k].max(c.len());
        }
    }
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(k, c)| format!("{:>width$}", c, width = widths[k]))
            .collect();
        out.push_str(&line.join("  "));
        out.push('\n');
        if i == 0 {
            let total: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
            out.push_str(&"-".repeat(total));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> MetricsTable {
        MetricsTable {
            rows: vec![
                MetricsRow {
                    config: "full".into(),
                    split: "seen".into(),
                    sr: 95.0,
                    plwsr: 81.25,
                    gc: 96.5,
                    plwgc: 82.0,
                    n: 100,
                },
                MetricsRow {
                    config: "no-eam".into(),
                    split: "unseen".into(),
                    sr: 61.0,
                    plwsr: 50.75,
                    gc: 70.0,
                    plwgc: 55.5,
                    n: 100,
                },
            ],
        }
    }

    #[test]
    fn csv_round_trips() {
        let t = sample();
        let text = emit_csv(&t);
        let back = parse_csv(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn csv_rejects_bad_header() {
        assert_eq!(parse_csv("nope\n1,2,3"), Err(CsvError::BadHeader));
    }

    #[test]
    fn text_table_is_aligned() {
        let t = sample();
        let text = emit_text(&t);
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines.len() >= 4);
        assert_eq!(lines[1].chars().collect::<Vec<_>>()[0], '-');
    }
}
