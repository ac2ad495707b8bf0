//! Machine-readable command output.
//!
//! A document is a flat record of named values, optionally followed by a
//! table. JSON renders it as one object (the table under `"rows"`); CSV
//! renders one header row and one data row per table row, with the record
//! fields appended as trailing columns. Reals carry 17 significant digits.

use std::io::Write;
use std::str::FromStr;

use clap::ValueEnum;
use serde_json::{Map, Number, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_owned())
    }
}

impl Cell {
    fn to_text(&self) -> String {
        match self {
            Cell::Real(v) => format_real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Real(v) if v.is_finite() => Value::Number(
                Number::from_str(&format_real(*v)).expect("formatted real is a JSON number"),
            ),
            Cell::Real(_) => Value::Null,
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

/// Formats a real with 17 significant digits: positional for exponents in
/// `[-5, 16]`, scientific otherwise.
pub fn format_real(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0" } else { "0.0" }.to_owned();
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').unwrap() + 1..].parse().unwrap();
    if (-5..=16).contains(&exp) {
        let decimals = (16 - exp) as usize;
        let s = format!("{v:.decimals$}");
        if decimals == 0 {
            format!("{s}.0")
        } else {
            s
        }
    } else {
        sci
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputDocument {
    pub fields: Vec<(String, Cell)>,
    pub table: Option<Table>,
}

impl OutputDocument {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn field(mut self, name: &str, value: impl Into<Cell>) -> Self {
        self.fields.push((name.to_owned(), value.into()));
        self
    }

    pub fn with_table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn get(&self, name: &str) -> Option<&Cell> {
        self.fields.iter().find(|(k, _)| k == name).map(|(_, v)| v)
    }

    pub fn to_json(&self) -> Value {
        let mut obj: Map<String, Value> = self
            .fields
            .iter()
            .map(|(k, v)| (k.clone(), v.to_json()))
            .collect();
        if let Some(table) = &self.table {
            let rows = table
                .rows
                .iter()
                .map(|row| {
                    Value::Object(
                        table
                            .columns
                            .iter()
                            .cloned()
                            .zip(row.iter().map(Cell::to_json))
                            .collect(),
                    )
                })
                .collect();
            obj.insert("rows".to_owned(), Value::Array(rows));
        }
        Value::Object(obj)
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> Result<(), CliError> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.to_json())?;
                out.write_all(b"\n")?;
            }
            Format::Csv => self.write_csv(out)?,
        }
        Ok(())
    }

    fn write_csv(&self, out: &mut impl Write) -> Result<(), CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let field_names = self.fields.iter().map(|(k, _)| k.as_str());
        let field_values: Vec<String> = self.fields.iter().map(|(_, v)| v.to_text()).collect();
        match &self.table {
            None => {
                writer.write_record(field_names)?;
                writer.write_record(&field_values)?;
            }
            Some(table) => {
                writer.write_record(table.columns.iter().map(String::as_str).chain(field_names))?;
                for row in &table.rows {
                    let cells = row
                        .iter()
                        .map(Cell::to_text)
                        .chain(field_values.iter().cloned());
                    writer.write_record(cells)?;
                }
            }
        }
        writer.flush()?;
        Ok(())
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        Ok(String::from_utf8(buf).expect("output is UTF-8"))
    }
}
