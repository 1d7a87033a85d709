//! Report generation from a pipeline output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::manifest::{sha256_hex, Manifest};
use super::svg::{line_chart, scatter_chart, Series};
use super::MetricRecord;
use crate::corpus::MAX_EXACT_ATTRACTORS;
use crate::error::{Error, Result};

pub const AGREEMENT_TABLE_HEADER: &str = "method,attr=0,attr=1,attr=2,attr=3,attr=4,attr=5";
const TABLE_COLUMNS: usize = MAX_EXACT_ATTRACTORS + 1;

#[derive(Debug, Clone, Default)]
pub struct ReportOptions {
    /// `(from, to)` run ids for the delta row; defaults to the first and
    /// last run with agreement results.
    pub delta: Option<(String, String)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary {
    pub runs: Vec<String>,
    pub files: Vec<PathBuf>,
    pub warnings: Vec<String>,
}

/// One row of the agreement table: error percentages for attractor
/// counts 0..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct AgreementTableRow {
    pub method: String,
    pub values: Vec<Option<f64>>,
}

/// Formats a percentage with one decimal, never printing `-0.0`.
pub fn format_percent(x: f64) -> String {
    let s = format!("{x:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// `to - from` per column; missing on either side stays missing.
pub fn delta_row(from: &AgreementTableRow, to: &AgreementTableRow) -> Vec<Option<f64>> {
    from.values
        .iter()
        .zip(&to.values)
        .map(|(a, b)| Some((*b)? - (*a)?))
        .collect()
}

pub fn parse_agreement_table(text: &str) -> Result<Vec<AgreementTableRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(AGREEMENT_TABLE_HEADER) {
        return Err(Error::Format(format!(
            "agreement table must start with `{AGREEMENT_TABLE_HEADER}`"
        )));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != TABLE_COLUMNS + 1 {
                return Err(Error::Format(format!(
                    "agreement table row has {} fields: `{line}`",
                    f.len()
                )));
            }
            let values = f[1..]
                .iter()
                .map(|v| {
                    if v.is_empty() {
                        Ok(None)
                    } else {
                        v.parse().map(Some).map_err(|_| {
                            Error::Format(format!("bad number `{v}` in agreement table"))
                        })
                    }
                })
                .collect::<Result<_>>()?;
            Ok(AgreementTableRow {
                method: f[0].to_string(),
                values,
            })
        })
        .collect()
}

/// Renders the table, appending a `delta` row between two named rows.
pub fn agreement_table(rows: &[AgreementTableRow], delta: Option<(&str, &str)>) -> Result<String> {
    let fmt_row = |label: &str, values: &[Option<f64>]| {
        let cells: Vec<String> = values
            .iter()
            .map(|v| v.map(format_percent).unwrap_or_default())
            .collect();
        format!("{label},{}\n", cells.join(","))
    };
    let mut out = format!("{AGREEMENT_TABLE_HEADER}\n");
    for r in rows {
        out.push_str(&fmt_row(&r.method, &r.values));
    }
    if let Some((from, to)) = delta {
        let find = |name: &str| {
            rows.iter()
                .find(|r| r.method == name)
                .ok_or_else(|| Error::InvalidArgument(format!("no agreement row named `{name}`")))
        };
        let d = delta_row(find(from)?, find(to)?);
        out.push_str(&fmt_row(&format!("delta({to}-{from})"), &d));
    }
    Ok(out)
}

/// Error percentages for buckets 0..=5 from a per-run agreement CSV.
fn agreement_row_from_csv(run: &str, text: &str) -> Result<AgreementTableRow> {
    let mut values = vec![None; TABLE_COLUMNS];
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::Format(format!("bad agreement row `{line}`")));
        }
        if let Ok(k) = f[0].parse::<usize>() {
            if k < TABLE_COLUMNS && !f[3].is_empty() {
                let rate: f64 = f[3]
                    .parse()
                    .map_err(|_| Error::Format(format!("bad error rate `{}`", f[3])))?;
                values[k] = Some(100.0 * rate);
            }
        }
    }
    Ok(AgreementTableRow {
        method: run.to_string(),
        values,
    })
}

/// Reads a manifest-listed file, checking its recorded hash.
fn read_listed(
    dir: &Path,
    manifest: &Manifest,
    run: &str,
    kind: &str,
    warnings: &mut Vec<String>,
) -> Option<String> {
    let Some(entry) = manifest.file(Some(run), kind) else {
        warnings.push(format!("run {run}: no {kind} file in manifest"));
        return None;
    };
    let path = dir.join(&entry.path);
    match fs::read(&path) {
        Ok(bytes) if sha256_hex(&bytes) == entry.sha256 => match String::from_utf8(bytes) {
            Ok(s) => Some(s),
            Err(_) => {
                warnings.push(format!("run {run}: {} is not utf-8", entry.path));
                None
            }
        },
        Ok(_) => {
            warnings.push(format!(
                "run {run}: {} does not match its manifest hash",
                entry.path
            ));
            None
        }
        Err(e) => {
            warnings.push(format!("run {run}: cannot read {}: {e}", entry.path));
            None
        }
    }
}

/// Writes curves, scatter data, SVG charts, and the agreement table under
/// `<output_dir>/report`, using only files listed in the manifest. Runs
/// with missing or altered files are skipped with a warning.
pub fn emit_report(output_dir: &Path, options: &ReportOptions) -> Result<ReportSummary> {
    let manifest = Manifest::load(output_dir)?;
    let report_dir = output_dir.join("report");
    fs::create_dir_all(report_dir.join("curves")).map_err(|e| Error::io(&report_dir, e))?;
    let mut warnings = Vec::new();
    let mut files = Vec::new();
    let mut write = |rel: &str, text: String| -> Result<()> {
        let path = report_dir.join(rel);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        files.push(path);
        Ok(())
    };

    let mut curves: Vec<(String, f64, Vec<MetricRecord>)> = Vec::new();
    let mut agreement_rows = Vec::new();
    for run in &manifest.runs {
        let id = &run.run_id;
        if let Some(text) = read_listed(output_dir, &manifest, id, "metrics", &mut warnings) {
            match MetricRecord::parse_csv(&text) {
                Ok(records) if !records.is_empty() => {
                    write(&format!("curves/{id}.csv"), MetricRecord::to_csv(&records))?;
                    curves.push((id.clone(), run.alpha, records));
                }
                Ok(_) => warnings.push(format!("run {id}: metrics file is empty")),
                Err(e) => warnings.push(format!("run {id}: {e}")),
            }
        }
        if manifest.file(Some(id), "agreement_csv").is_some() {
            if let Some(text) =
                read_listed(output_dir, &manifest, id, "agreement_csv", &mut warnings)
            {
                match agreement_row_from_csv(id, &text) {
                    Ok(row) => agreement_rows.push(row),
                    Err(e) => warnings.push(format!("run {id}: {e}")),
                }
            }
        }
    }

    let mut scatter_csv = String::from("run_id,alpha,dev_ppl_pos,dev_ppl_neg\n");
    let mut scatter_points = Vec::new();
    for (id, alpha, records) in &curves {
        let last = records.last().expect("nonempty curves");
        writeln!(
            scatter_csv,
            "{id},{alpha},{:.6},{:.6}",
            last.dev_ppl_pos, last.dev_ppl_neg
        )
        .unwrap();
        scatter_points.push((id.clone(), last.dev_ppl_pos, last.dev_ppl_neg));
    }
    write("scatter.csv", scatter_csv)?;
    write(
        "scatter.svg",
        scatter_chart(
            "Final positive vs negative dev perplexity",
            "positive dev perplexity",
            "negative dev perplexity",
            &scatter_points,
        ),
    )?;

    let charts: [(&str, &str, fn(&MetricRecord) -> f64); 3] = [
        ("train_ppl.svg", "Train perplexity", |r| r.train_ppl),
        ("dev_ppl.svg", "Dev perplexity", |r| r.dev_ppl_pos),
        ("negative_dev_ppl.svg", "Negative dev perplexity", |r| {
            r.dev_ppl_neg
        }),
    ];
    for (file, title, metric) in charts {
        let series: Vec<Series> = curves
            .iter()
            .map(|(id, _, records)| Series {
                name: id.clone(),
                points: records
                    .iter()
                    .map(|r| (r.epoch as f64, metric(r)))
                    .collect(),
            })
            .collect();
        write(file, line_chart(title, "epoch", "perplexity", &series))?;
    }

    if !agreement_rows.is_empty() {
        let delta = match &options.delta {
            Some((a, b)) => {
                let known = |n: &str| agreement_rows.iter().any(|r| r.method == n);
                if known(a) && known(b) {
                    Some((a.clone(), b.clone()))
                } else {
                    warnings.push(format!(
                        "delta runs {a} / {b} not both available; delta row omitted"
                    ));
                    None
                }
            }
            None if agreement_rows.len() >= 2 => Some((
                agreement_rows[0].method.clone(),
                agreement_rows[agreement_rows.len() - 1].method.clone(),
            )),
            None => None,
        };
        let table = agreement_table(
            &agreement_rows,
            delta.as_ref().map(|(a, b)| (a.as_str(), b.as_str())),
        )?;
        write("agreement_table.csv", table)?;
    }

    for w in &warnings {
        log::warn!("{w}");
    }
    let summary = ReportSummary {
        runs: curves.iter().map(|(id, _, _)| id.clone()).collect(),
        files: Vec::new(),
        warnings,
    };
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Format(e.to_string()))?;
    write("report.json", json + "\n")?;
    Ok(ReportSummary { files, ..summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE_ONE: &str = "\
method,attr=0,attr=1,attr=2,attr=3,attr=4,attr=5
lstm-nll,0.7,2.8,4.7,7.3,8.9,12.9
lstm-nll-neg-8,1.2,1.8,2.8,4.1,6.2,7.0
gpt2,0.7,1.5,2.2,3.2,4.7,3.1
gpt2-neg,0.7,1.6,2.1,3.0,4.2,3.1
";

    fn delta_line(from: &str, to: &str) -> String {
        let rows = parse_agreement_table(TABLE_ONE).unwrap();
        let table = agreement_table(&rows, Some((from, to))).unwrap();
        let last = table.lines().last().unwrap();
        last.split_once(',').unwrap().1.to_string()
    }

    #[test]
    fn delta_row_reproduces_published_values() {
        assert_eq!(
            delta_line("lstm-nll", "lstm-nll-neg-8"),
            "0.5,-1.0,-1.9,-3.2,-2.7,-5.9"
        );
        assert_eq!(delta_line("gpt2", "gpt2-neg"), "0.0,0.1,-0.1,-0.2,-0.5,0.0");
    }

    #[test]
    fn table_golden_format() {
        let rows = parse_agreement_table(TABLE_ONE).unwrap();
        let table = agreement_table(&rows[..2], Some(("lstm-nll", "lstm-nll-neg-8"))).unwrap();
        assert_eq!(
            table,
            "method,attr=0,attr=1,attr=2,attr=3,attr=4,attr=5\n\
             lstm-nll,0.7,2.8,4.7,7.3,8.9,12.9\n\
             lstm-nll-neg-8,1.2,1.8,2.8,4.1,6.2,7.0\n\
             delta(lstm-nll-neg-8-lstm-nll),0.5,-1.0,-1.9,-3.2,-2.7,-5.9\n"
        );
        assert!(agreement_table(&rows, Some(("nope", "gpt2"))).is_err());
    }

    #[test]
    fn negative_zero_is_printed_as_zero() {
        assert_eq!(format_percent(-0.0), "0.0");
        assert_eq!(format_percent(-0.04), "0.0");
        assert_eq!(format_percent(-0.06), "-0.1");
    }

    #[test]
    fn rejects_malformed_tables() {
        assert!(parse_agreement_table("method,attr=0\nx,1\n").is_err());
        assert!(parse_agreement_table(&format!("{AGREEMENT_TABLE_HEADER}\nx,1,2\n")).is_err());
        assert!(
            parse_agreement_table(&format!("{AGREEMENT_TABLE_HEADER}\nx,1,2,3,4,5,z\n")).is_err()
        );
    }

    #[test]
    fn run_csv_becomes_percent_row() {
        let csv =
            "n_attractors,count,errors,error_rate\n0,10,1,0.100000\n1,0,0,\n6+,3,3,1.000000\n";
        let row = agreement_row_from_csv("r", csv).unwrap();
        assert_eq!(row.values[0], Some(10.0));
        assert_eq!(row.values[1], None);
        assert_eq!(row.values.len(), 6);
    }
}
