//! Panel CSV input and output.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::CliError;

/// A `T × d` panel with asset names and optional dates.
#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub names: Vec<String>,
    pub dates: Option<Vec<String>>,
    pub values: DMatrix<f64>,
}

impl Panel {
    pub fn n_obs(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    /// True when every value lies strictly inside (0, 1).
    pub fn looks_like_pits(&self) -> bool {
        self.values.iter().all(|u| *u > 0.0 && *u < 1.0)
    }

    /// Row labels: dates when present, otherwise 1-based indices.
    pub fn row_label(&self, t: usize) -> String {
        match &self.dates {
            Some(d) => d[t].clone(),
            None => (t + 1).to_string(),
        }
    }
}

fn is_date_header(s: &str) -> bool {
    matches!(s.trim().to_ascii_lowercase().as_str(), "date" | "time" | "timestamp" | "day")
}

fn looks_like_date(s: &str) -> bool {
    let b = s.trim().as_bytes();
    b.len() >= 8 && b[0..4].iter().all(u8::is_ascii_digit) && b[4] == b'-' && s.parse::<f64>().is_err()
}

/// Reads a panel with a header row of asset names. A first column named
/// like a date, or holding ISO dates, is taken as the time index.
pub fn read_panel(path: &Path) -> Result<Panel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_panel(&text, &path.display().to_string())
}

pub fn parse_panel(text: &str, origin: &str) -> Result<Panel, CliError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("{origin}: header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Input(format!("{origin}: empty header row")));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Input(format!("{origin}: row {}: {e}", k + 2)))?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(CliError::Input(format!(
                "{origin}: row {} has {} fields, expected {}",
                k + 2,
                rec.len(),
                header.len()
            )));
        }
        rows.push(rec.iter().map(str::to_string).collect());
    }
    if rows.is_empty() {
        return Err(CliError::Input(format!("{origin}: no data rows")));
    }
    let has_dates = is_date_header(&header[0]) || looks_like_date(&rows[0][0]);
    let first = usize::from(has_dates);
    let names: Vec<String> = header[first..].to_vec();
    if names.is_empty() {
        return Err(CliError::Input(format!("{origin}: no asset columns")));
    }
    let (t, d) = (rows.len(), names.len());
    let mut values = DMatrix::zeros(t, d);
    for (r, row) in rows.iter().enumerate() {
        for j in 0..d {
            let cell = &row[first + j];
            let v: f64 = cell.parse().map_err(|_| {
                CliError::Input(format!("{origin}: row {}, column '{}': '{cell}' is not a number", r + 2, names[j]))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!("{origin}: row {}, column '{}': value is not finite", r + 2, names[j])));
            }
            values[(r, j)] = v;
        }
    }
    let dates = has_dates.then(|| rows.iter().map(|r| r[0].clone()).collect());
    Ok(Panel { names, dates, values })
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_panel(path: &Path, panel: &Panel) -> Result<(), CliError> {
    let mut out = String::with_capacity(panel.n_obs() * panel.dim() * 20);
    if panel.dates.is_some() {
        out.push_str("date,");
    }
    out.push_str(&panel.names.join(","));
    out.push('\n');
    for t in 0..panel.n_obs() {
        if let Some(d) = &panel.dates {
            out.push_str(&d[t]);
            out.push(',');
        }
        let row: Vec<String> = panel.values.row(t).iter().map(|v| fmt_num(*v)).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_detected_and_errors_located() {
        let p = parse_panel("date,A,B\n2020-01-02,0.1,0.2\n2020-01-03,0.3,0.4\n", "x").unwrap();
        assert_eq!(p.names, ["A", "B"]);
        assert_eq!(p.dates.as_ref().unwrap()[1], "2020-01-03");
        assert!(p.looks_like_pits());
        let q = parse_panel("A,B\n1.5,-2\n0.25,3\n", "x").unwrap();
        assert!(q.dates.is_none() && !q.looks_like_pits());
        let e = parse_panel("A,B\n1,2\n3\n", "x").unwrap_err().to_string();
        assert!(e.contains("row 3 has 1 fields"), "{e}");
        let e = parse_panel("A,B\n1,2\n3,zz\n", "x").unwrap_err().to_string();
        assert!(e.contains("row 3, column 'B'"), "{e}");
    }

    #[test]
    fn numbers_round_trip() {
        for v in [0.1, 1.0 / 3.0, 1e-300, -2.5e17, 0.999_999_999_999_999_9] {
            assert_eq!(fmt_num(v).parse::<f64>().unwrap(), v);
        }
    }
}
