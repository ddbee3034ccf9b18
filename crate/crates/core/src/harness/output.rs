//! Result files: `results.csv` (canonical), `summary.json` and a
//! whitespace-separated plot table.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use super::summary::SummaryCell;
use super::sweep::ResultRow;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "scenario,method,snr_db,trial,zeta_hat,valid,wall_ms";

fn fmt_snr(s: Option<f64>) -> String {
    s.map_or_else(|| "inf".to_string(), |v| v.to_string())
}

/// Renders rows as CSV. Floats use the shortest round-trip representation
/// so identical inputs give identical bytes.
pub fn rows_to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.scenario,
            r.method,
            fmt_snr(r.snr_db),
            r.trial,
            r.zeta_hat.map_or_else(String::new, |z| z.to_string()),
            r.valid(),
            r.wall_ms.map_or_else(String::new, |w| format!("{w:.3}")),
        );
    }
    out
}

/// Parses a CSV produced by [`rows_to_csv`].
pub fn csv_to_rows(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Config("results file has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 7 {
                return Err(Error::Config(format!("malformed results line '{line}'")));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad number '{s}' in '{line}'")))
            };
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            Ok(ResultRow {
                scenario: f[0].to_string(),
                method: f[1].parse()?,
                snr_db: if f[2] == "inf" { None } else { Some(num(f[2])?) },
                trial: f[3]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad trial in '{line}'")))?,
                zeta_hat: opt(f[4])?,
                wall_ms: opt(f[6])?,
            })
        })
        .collect()
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<()> {
    std::fs::write(path, rows_to_csv(rows))?;
    Ok(())
}

#[derive(Serialize)]
struct SummaryFile<'a> {
    format: &'static str,
    version: u32,
    cells: &'a [SummaryCell],
}

pub fn write_summary_json(path: &Path, cells: &[SummaryCell]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&SummaryFile {
        format: "envdamp-summary",
        version: 1,
        cells,
    })?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Columns: `scenario method snr median q1 q3 rmse_percent valid_fraction`,
/// `NaN` for absent values, one block per method separated by blank lines.
pub fn plot_table(cells: &[SummaryCell]) -> String {
    let mut out = String::from("# scenario method snr_db median q1 q3 rmse_percent valid_fraction\n");
    let f = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |x| x.to_string());
    let mut sorted: Vec<&SummaryCell> = cells.iter().collect();
    sorted.sort_by(|a, b| (&a.scenario, a.method).cmp(&(&b.scenario, b.method)));
    let mut last: Option<(&str, _)> = None;
    for c in sorted {
        let key = (c.scenario.as_str(), c.method);
        if last.is_some_and(|l| l != key) {
            out.push_str("\n\n");
        }
        last = Some(key);
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {}",
            c.scenario,
            c.method,
            fmt_snr(c.snr_db),
            f(c.median),
            f(c.q1),
            f(c.q3),
            f(c.rmse_percent),
            c.valid_fraction
        );
    }
    out
}

pub fn write_plot_table(path: &Path, cells: &[SummaryCell]) -> Result<()> {
    std::fs::write(path, plot_table(cells))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::scenario::Method;

    #[test]
    fn csv_roundtrip() {
        let rows = vec![
            ResultRow {
                scenario: "s1".into(),
                method: Method::Lsrf,
                snr_db: Some(-5.0),
                trial: 3,
                zeta_hat: Some(0.010_234_567_891_234_5),
                wall_ms: None,
            },
            ResultRow {
                scenario: "s1".into(),
                method: Method::Plscf,
                snr_db: None,
                trial: 0,
                zeta_hat: None,
                wall_ms: Some(1.5),
            },
        ];
        let text = rows_to_csv(&rows);
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.contains("s1,lsrf,-5,3,0.0102345678912345,true,\n"));
        assert!(text.contains("s1,plscf,inf,0,,false,1.500\n"));
        assert_eq!(csv_to_rows(&text).unwrap(), rows);
        assert!(csv_to_rows("bad\n").is_err());
    }
}
