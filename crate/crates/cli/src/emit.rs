//! CSV and JSON output with sidecar schemas. Nothing is written for a
//! table that holds a non-finite number.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Opt(Option<f64>),
    Int(u64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) | Cell::Opt(Some(x)) => format!("{x:?}"),
            Cell::Opt(None) => String::new(),
            Cell::Int(k) => k.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn value(&self) -> Option<f64> {
        match self {
            Cell::Num(x) | Cell::Opt(Some(x)) => Some(*x),
            _ => None,
        }
    }
}

/// A CSV table plus the description of each column.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    /// `(column, description)`
    pub columns: Vec<(String, String)>,
    pub rows: Vec<Vec<Cell>>,
    /// Module reported if a value is not finite.
    pub module: &'static str,
}

impl Table {
    pub fn new(name: impl Into<String>, module: &'static str, columns: Vec<(String, String)>) -> Self {
        Self {
            name: name.into(),
            columns,
            rows: Vec::new(),
            module,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn check_finite(&self) -> Result<(), CliError> {
        for (k, row) in self.rows.iter().enumerate() {
            for (cell, (col, _)) in row.iter().zip(&self.columns) {
                if let Some(x) = cell.value() {
                    if !x.is_finite() {
                        return Err(CliError::NonFinite {
                            module: self.module,
                            field: format!("{}.csv row {k} column {col}", self.name),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct Schema<'a> {
    file: String,
    columns: Vec<ColumnDoc<'a>>,
}

#[derive(Serialize)]
struct ColumnDoc<'a> {
    name: &'a str,
    description: &'a str,
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn col(name: impl Into<String>, description: impl Into<String>) -> (String, String) {
    (name.into(), description.into())
}

/// Writes `<name>.csv` and `<name>.schema.json`; returns both paths.
pub fn write_table(dir: &Path, table: &Table) -> Result<Vec<PathBuf>, CliError> {
    table.check_finite()?;
    ensure_dir(dir)?;
    let csv_path = dir.join(format!("{}.csv", table.name));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    w.write_record(table.columns.iter().map(|c| c.0.as_str()))
        .map_err(|e| CliError::io(&csv_path, e))?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render))
            .map_err(|e| CliError::io(&csv_path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&csv_path, e))?;
    let schema = Schema {
        file: format!("{}.csv", table.name),
        columns: table
            .columns
            .iter()
            .map(|(n, d)| ColumnDoc {
                name: n.as_str(),
                description: d,
            })
            .collect(),
    };
    let schema_path = dir.join(format!("{}.schema.json", table.name));
    write_json_unchecked(&schema_path, &schema)?;
    Ok(vec![csv_path, schema_path])
}

/// Writes `value` as pretty JSON after checking every listed number.
pub fn write_json<T: Serialize>(
    path: &Path,
    value: &T,
    module: &'static str,
    numbers: &[(String, f64)],
) -> Result<PathBuf, CliError> {
    if let Some((field, _)) = numbers.iter().find(|(_, x)| !x.is_finite()) {
        return Err(CliError::NonFinite {
            module,
            field: field.clone(),
        });
    }
    write_json_unchecked(path, value)?;
    Ok(path.to_path_buf())
}

fn write_json_unchecked<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        ensure_dir(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Labels each value of a slice for [`write_json`].
pub fn labelled(prefix: &str, values: &[f64]) -> Vec<(String, f64)> {
    values
        .iter()
        .enumerate()
        .map(|(k, x)| (format!("{prefix}[{k}]"), *x))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table() -> Table {
        Table::new("demo", "test", vec![col("a", "first"), col("b", "second")])
    }

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        write_table(dir.path(), &table()).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("demo.csv")).unwrap(), "a,b\n");
        let schema = std::fs::read_to_string(dir.path().join("demo.schema.json")).unwrap();
        assert!(schema.contains("\"second\""));
    }

    #[test]
    fn nan_aborts_with_module() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = table();
        t.push(vec![Cell::Num(1.0), Cell::Opt(Some(f64::NAN))]);
        let err = write_table(dir.path(), &t).unwrap_err().to_string();
        assert!(err.contains("test") && err.contains("column b"), "{err}");
        assert!(!dir.path().join("demo.csv").exists());
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1 + 0.2;
        let mut t = table();
        t.push(vec![Cell::Num(x), Cell::Opt(None)]);
        let dir = tempfile::tempdir().unwrap();
        write_table(dir.path(), &t).unwrap();
        let text = std::fs::read_to_string(dir.path().join("demo.csv")).unwrap();
        let back: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, x);
    }
}
