//! Markdown and CSV rendering of result tables.
//!
//! Four shapes are supported: a classifier × embedding grid with averages,
//! a list of TextCNN variants, a dimension sweep, and ensemble summaries
//! with Mean/Best/Voting and the two improvement columns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{improvement, Metric, MetricsReport};
use crate::error::{Error, Result};

/// Results keyed by (row, column), with the row and column order fixed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResultGrid {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    cells: BTreeMap<String, BTreeMap<String, MetricsReport>>,
}

impl ResultGrid {
    pub fn new<R, C>(rows: R, columns: C) -> Self
    where
        R: IntoIterator,
        R::Item: Into<String>,
        C: IntoIterator,
        C::Item: Into<String>,
    {
        ResultGrid {
            rows: rows.into_iter().map(Into::into).collect(),
            columns: columns.into_iter().map(Into::into).collect(),
            cells: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, row: &str, column: &str, report: MetricsReport) {
        self.cells
            .entry(row.to_string())
            .or_default()
            .insert(column.to_string(), report);
    }

    pub fn get(&self, row: &str, column: &str) -> Result<&MetricsReport> {
        self.cells
            .get(row)
            .and_then(|r| r.get(column))
            .ok_or_else(|| Error::MissingCell(format!("{row} × {column}")))
    }

    fn check_complete(&self) -> Result<()> {
        for r in &self.rows {
            for c in &self.columns {
                self.get(r, c)?;
            }
        }
        Ok(())
    }
}

/// One ensemble: its voters' individual results and the voting result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRow {
    pub name: String,
    pub individual: Vec<MetricsReport>,
    pub voting: Option<MetricsReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableBody {
    /// Classifier families × embeddings, with an Average row and column.
    Embeddings(ResultGrid),
    /// TextCNN variants; the grid has a single column.
    Variants(ResultGrid),
    /// Classifiers × embedding dimensions.
    Dimensions(ResultGrid),
    Ensembles(Vec<EnsembleRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRequest {
    pub number: u8,
    pub title: String,
    /// How the numbers were obtained, e.g. "fixed split 60/20/20, seed 42".
    pub mode: String,
    pub body: TableBody,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedTable {
    pub number: u8,
    pub markdown: String,
    pub csv: String,
}

impl RenderedTable {
    pub fn file_stem(&self, run_id: &str) -> String {
        format!("table{}_{}", self.number, run_id)
    }

    /// Writes `table{N}_{run_id}.md` and `.csv` into `dir`.
    pub fn write(&self, dir: &Path, run_id: &str) -> Result<(PathBuf, PathBuf)> {
        let stem = self.file_stem(run_id);
        let md = dir.join(format!("{stem}.md"));
        let csv = dir.join(format!("{stem}.csv"));
        fs::write(&md, &self.markdown).map_err(|e| Error::io(&md, e))?;
        fs::write(&csv, &self.csv).map_err(|e| Error::io(&csv, e))?;
        Ok((md, csv))
    }
}

/// One line of the long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRecord {
    pub row: String,
    pub column: String,
    pub metric: String,
    pub value: f64,
}

pub const AVERAGE: &str = "Average";

pub fn render_table(req: &TableRequest) -> Result<RenderedTable> {
    let mut md = String::new();
    let _ = writeln!(md, "### Table {}: {}", req.number, req.title);
    let _ = writeln!(md);
    let _ = writeln!(md, "Evaluation: {}", req.mode);
    let _ = writeln!(md);
    let mut records = Vec::new();
    match &req.body {
        TableBody::Embeddings(grid) => render_grid(grid, true, &mut md, &mut records)?,
        TableBody::Variants(grid) => render_grid(grid, true, &mut md, &mut records)?,
        TableBody::Dimensions(grid) => render_grid(grid, false, &mut md, &mut records)?,
        TableBody::Ensembles(rows) => render_ensembles(rows, &mut md, &mut records)?,
    }
    Ok(RenderedTable {
        number: req.number,
        markdown: md,
        csv: write_csv(&records)?,
    })
}

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

fn fmt3(v: f64) -> String {
    format!("{v:.3}")
}

fn render_grid(
    grid: &ResultGrid,
    with_average: bool,
    md: &mut String,
    records: &mut Vec<CsvRecord>,
) -> Result<()> {
    grid.check_complete()?;
    if grid.rows.is_empty() || grid.columns.is_empty() {
        return Err(Error::MissingCell("table has no rows or columns".into()));
    }
    let single = grid.columns.len() == 1;
    let mut columns = grid.columns.clone();
    let mut rows = grid.rows.clone();
    let show_avg_col = with_average && !single;
    if show_avg_col {
        columns.push(AVERAGE.into());
    }
    if with_average {
        rows.push(AVERAGE.into());
    }

    // values[metric][row][col], averages included
    let mut values: BTreeMap<Metric, Vec<Vec<f64>>> = BTreeMap::new();
    for m in Metric::ALL {
        let mut table: Vec<Vec<f64>> = grid
            .rows
            .iter()
            .map(|r| {
                grid.columns
                    .iter()
                    .map(|c| grid.get(r, c).map(|rep| rep.get(m)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        if show_avg_col {
            for row in &mut table {
                let avg = mean(row.iter().copied());
                row.push(avg);
            }
        }
        if with_average {
            let width = table[0].len();
            let avg_row = (0..width).map(|j| mean(table.iter().map(|r| r[j]))).collect();
            table.push(avg_row);
        }
        values.insert(m, table);
    }

    // header
    let mut header = vec!["Classifier".to_string()];
    for m in Metric::ALL {
        for c in &columns {
            header.push(if single { m.title().into() } else { format!("{} {}", m.title(), c) });
        }
    }
    push_row(md, &header);
    push_row(md, &vec!["---".to_string(); header.len()]);

    let body_rows = grid.rows.len();
    let body_cols = grid.columns.len();
    for (i, r) in rows.iter().enumerate() {
        let mut line = vec![r.clone()];
        for m in Metric::ALL {
            let t = &values[&m];
            for (j, c) in columns.iter().enumerate() {
                let v = t[i][j];
                records.push(CsvRecord {
                    row: r.clone(),
                    column: c.clone(),
                    metric: m.name().into(),
                    value: v,
                });
                let mut cell = fmt3(v);
                let in_body = i < body_rows && j < body_cols;
                if in_body {
                    let row_best = t[i][..body_cols].iter().copied().fold(f64::MIN, f64::max);
                    let col_best = (0..body_rows).map(|k| t[k][j]).fold(f64::MIN, f64::max);
                    if !single && v == row_best {
                        cell = format!("<u>{cell}</u>");
                    }
                    if body_rows > 1 && v == col_best {
                        cell = format!("**{cell}**");
                    }
                }
                line.push(cell);
            }
        }
        push_row(md, &line);
    }
    Ok(())
}

const ENSEMBLE_COLUMNS: [&str; 5] = ["Mean", "Best", "Voting", "Imp_M", "Imp_B"];

fn render_ensembles(
    rows: &[EnsembleRow],
    md: &mut String,
    records: &mut Vec<CsvRecord>,
) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::MissingCell("no ensemble rows".into()));
    }
    let mut header = vec!["Classifier".to_string()];
    for m in Metric::ALL {
        for c in ENSEMBLE_COLUMNS {
            header.push(format!("{} {}", m.title(), c));
        }
    }
    push_row(md, &header);
    push_row(md, &vec!["---".to_string(); header.len()]);

    for row in rows {
        if row.individual.is_empty() {
            return Err(Error::MissingCell(format!("{} × individual results", row.name)));
        }
        let voting = row
            .voting
            .ok_or_else(|| Error::MissingCell(format!("{} × Voting", row.name)))?;
        let mut line = vec![row.name.clone()];
        for m in Metric::ALL {
            let mean_v = mean(row.individual.iter().map(|r| r.get(m)));
            let best_v = row.individual.iter().map(|r| r.get(m)).fold(f64::MIN, f64::max);
            let vote_v = voting.get(m);
            let imp_m = improvement(vote_v, mean_v).ok();
            let imp_b = improvement(vote_v, best_v).ok();
            let cells = [
                (mean_v, fmt3(mean_v)),
                (best_v, fmt3(best_v)),
                (vote_v, fmt3(vote_v)),
                pct_cell(imp_m),
                pct_cell(imp_b),
            ];
            for (col, (value, text)) in ENSEMBLE_COLUMNS.iter().zip(cells) {
                records.push(CsvRecord {
                    row: row.name.clone(),
                    column: col.to_string(),
                    metric: m.name().into(),
                    value,
                });
                line.push(text);
            }
        }
        push_row(md, &line);
    }
    Ok(())
}

fn pct_cell(p: Option<super::Percent>) -> (f64, String) {
    match p {
        Some(p) => (p.value(), p.to_string()),
        None => (f64::NAN, "n/a".into()),
    }
}

fn push_row(md: &mut String, cells: &[String]) {
    let _ = writeln!(md, "| {} |", cells.join(" | "));
}

fn write_csv(records: &[CsvRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["row", "column", "metric", "value"])?;
    for r in records {
        // `{}` prints the shortest string that parses back to the same f64
        w.write_record([&r.row, &r.column, &r.metric, &format!("{}", r.value)])?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::Validation(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Validation(e.to_string()))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRecord>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}
