//! CSV ingestion.
//!
//! Cells that are empty or read `NA`/`NaN` count as missing and drop their
//! row with a warning; any other text that does not parse as a number is an
//! error naming the line and column.

use crate::error::{CliError, Result};
use crrr::Dataset;
use std::path::Path;

/// A CSV file held in memory as text cells.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Table> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => CliError::io(
                    format!("cannot open {}", path.display()),
                    std::io::Error::other(e.to_string()),
                ),
                _ => CliError::Csv(e),
            })?;
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Table { headers, rows })
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::MissingColumn(name.to_string()))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

/// Parsed numeric columns with rows containing missing cells removed.
#[derive(Debug, Clone)]
pub struct NumericColumns {
    pub columns: Vec<Vec<f64>>,
    /// Labels of the optional text column, aligned with the kept rows.
    pub labels: Option<Vec<String>>,
    /// Indices into the table of the rows that were kept.
    pub kept: Vec<usize>,
    /// File line numbers (header is line 1) of dropped rows.
    pub dropped_lines: Vec<usize>,
}

/// Reads `names` as numbers and `label` as text from `table`.
pub fn numeric_columns(table: &Table, names: &[String], label: Option<&str>) -> Result<NumericColumns> {
    let idx: Vec<usize> = names.iter().map(|n| table.index(n)).collect::<Result<_>>()?;
    let label_idx = label.map(|l| table.index(l)).transpose()?;
    let mut columns = vec![Vec::with_capacity(table.len()); names.len()];
    let mut labels = label_idx.map(|_| Vec::with_capacity(table.len()));
    let mut kept = Vec::with_capacity(table.len());
    let mut dropped_lines = Vec::new();
    for (r, row) in table.rows.iter().enumerate() {
        let line = r + 2;
        let mut values = Vec::with_capacity(idx.len());
        let mut missing = false;
        for (&j, name) in idx.iter().zip(names) {
            let cell = row.get(j).map(String::as_str).unwrap_or("");
            if is_missing(cell) {
                missing = true;
                continue;
            }
            let value: f64 = cell.parse().map_err(|_| CliError::Parse {
                line,
                column: name.clone(),
                value: cell.to_string(),
            })?;
            if !value.is_finite() {
                return Err(CliError::Parse {
                    line,
                    column: name.clone(),
                    value: cell.to_string(),
                });
            }
            values.push(value);
        }
        let text = label_idx.map(|j| row.get(j).cloned().unwrap_or_default());
        if text.as_deref().is_some_and(is_missing) {
            missing = true;
        }
        if missing {
            dropped_lines.push(line);
            continue;
        }
        for (col, v) in columns.iter_mut().zip(values) {
            col.push(v);
        }
        if let (Some(labels), Some(text)) = (labels.as_mut(), text) {
            labels.push(text);
        }
        kept.push(r);
    }
    if kept.is_empty() {
        return Err(CliError::EmptyAfterFiltering);
    }
    Ok(NumericColumns {
        columns,
        labels,
        kept,
        dropped_lines,
    })
}

/// Column roles for building a [`Dataset`].
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ColumnRoles {
    pub y: String,
    pub w: String,
    /// Numeric covariates; the intercept is added automatically.
    pub covariates: Vec<String>,
    /// Optional categorical column for subgroup estimates.
    pub group: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: Dataset,
    pub table: Table,
    pub kept: Vec<usize>,
    pub warnings: Vec<String>,
}

pub fn ingest_table(table: Table, roles: &ColumnRoles) -> Result<Ingested> {
    let mut names = vec![roles.y.clone(), roles.w.clone()];
    names.extend(roles.covariates.iter().cloned());
    let parsed = numeric_columns(&table, &names, roles.group.as_deref())?;
    let mut warnings = Vec::new();
    if !parsed.dropped_lines.is_empty() {
        warnings.push(format!(
            "dropped {} row(s) with missing values at line(s) {}",
            parsed.dropped_lines.len(),
            join_numbers(&parsed.dropped_lines)
        ));
    }
    let mut columns = parsed.columns.into_iter();
    let y = columns.next().unwrap();
    let w = columns.next().unwrap();
    let covariates = roles.covariates.iter().cloned().zip(columns).collect();
    let dataset = Dataset::new(y, w, covariates, parsed.labels)?;
    Ok(Ingested {
        dataset,
        table,
        kept: parsed.kept,
        warnings,
    })
}

/// Reads `path` and builds the dataset described by `roles`.
pub fn ingest_csv(path: &Path, roles: &ColumnRoles) -> Result<Ingested> {
    ingest_table(Table::read(path)?, roles)
}

fn join_numbers(v: &[usize]) -> String {
    const SHOWN: usize = 20;
    let mut s: Vec<String> = v.iter().take(SHOWN).map(|x| x.to_string()).collect();
    if v.len() > SHOWN {
        s.push(format!("… ({} more)", v.len() - SHOWN));
    }
    s.join(", ")
}
