use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::PathBuf;

use crate::key::{parse_fixed_point, Key, ParseKeyError};

use super::{HarnessError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Runs of spaces and tabs.
    #[default]
    Whitespace,
    Comma,
    Tab,
}

/// How the value column is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ValueKind {
    /// Decimal text on the 7-digit fixed-point grid.
    #[default]
    Decimal,
    /// A plain integer used as the raw key (IDs).
    Integer,
}

/// Where and how to read a key sequence from a text file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetSpec {
    pub path: PathBuf,
    pub value_column: usize,
    pub timestamp_column: Option<usize>,
    pub delimiter: Delimiter,
    pub value_kind: ValueKind,
    /// Rows kept after ordering.
    pub max_rows: Option<usize>,
    /// Leading non-comment lines to skip, such as a header.
    pub skip_rows: usize,
}

impl DatasetSpec {
    pub fn new(path: impl Into<PathBuf>, value_column: usize) -> Self {
        DatasetSpec {
            path: path.into(),
            value_column,
            timestamp_column: None,
            delimiter: Delimiter::Whitespace,
            value_kind: ValueKind::Decimal,
            max_rows: None,
            skip_rows: 0,
        }
    }

    pub fn timestamp(mut self, column: usize) -> Self {
        self.timestamp_column = Some(column);
        self
    }

    pub fn delimiter(mut self, d: Delimiter) -> Self {
        self.delimiter = d;
        self
    }

    pub fn value_kind(mut self, kind: ValueKind) -> Self {
        self.value_kind = kind;
        self
    }

    pub fn max_rows(mut self, n: usize) -> Self {
        self.max_rows = Some(n);
        self
    }

    pub fn skip_rows(mut self, n: usize) -> Self {
        self.skip_rows = n;
        self
    }

    /// File stem, used as the dataset label.
    pub fn name(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    }
}

fn fields<'a>(line: &'a str, d: Delimiter) -> Box<dyn Iterator<Item = &'a str> + 'a> {
    match d {
        Delimiter::Whitespace => Box::new(line.split_whitespace()),
        Delimiter::Comma => Box::new(line.split(',').map(str::trim)),
        Delimiter::Tab => Box::new(line.split('\t').map(str::trim)),
    }
}

fn parse_value(text: &str, kind: ValueKind, line: usize) -> Result<i64, ParseKeyError> {
    match kind {
        ValueKind::Decimal => parse_fixed_point(text, line),
        ValueKind::Integer => text.parse::<i64>().map_err(|_| ParseKeyError::Malformed {
            line,
            text: text.to_string(),
        }),
    }
}

/// Reads the value column, ordered by the timestamp column if one is set
/// (stable, so equal timestamps keep file order), then truncated to
/// `max_rows`. Blank lines and lines starting with `#` are skipped.
/// Keys are numbered `0..` in the resulting order.
///
/// Timestamps compare numerically when every one parses as a number and
/// as text otherwise.
pub fn load_dataset(spec: &DatasetSpec) -> Result<Vec<Key>> {
    let path = spec.path.display().to_string();
    let file = File::open(&spec.path).map_err(|source| HarnessError::Io {
        path: path.clone(),
        source,
    })?;
    let reader = BufReader::new(file);
    let need = spec.value_column.max(spec.timestamp_column.unwrap_or(0));

    let mut rows: Vec<(i64, String)> = Vec::new();
    let mut skipped = 0;
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|source| HarnessError::Io {
            path: path.clone(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if skipped < spec.skip_rows {
            skipped += 1;
            continue;
        }
        if spec.timestamp_column.is_none() && spec.max_rows.is_some_and(|m| rows.len() >= m) {
            break;
        }
        let cols: Vec<&str> = fields(trimmed, spec.delimiter).collect();
        if cols.len() <= need {
            return Err(HarnessError::Data {
                path,
                line: lineno,
                message: format!(
                    "expected at least {} columns, found {}",
                    need + 1,
                    cols.len()
                ),
            });
        }
        let value =
            parse_value(cols[spec.value_column], spec.value_kind, lineno).map_err(|source| {
                HarnessError::Parse {
                    path: path.clone(),
                    source,
                }
            })?;
        let ts = spec
            .timestamp_column
            .map(|c| cols[c].to_string())
            .unwrap_or_default();
        rows.push((value, ts));
    }

    if spec.timestamp_column.is_some() {
        let numeric: Option<Vec<i64>> = rows
            .iter()
            .map(|(_, t)| parse_fixed_point(t, 0).ok())
            .collect();
        match numeric {
            Some(ts) => {
                let mut order: Vec<usize> = (0..rows.len()).collect();
                order.sort_by_key(|&i| ts[i]);
                rows = order
                    .into_iter()
                    .map(|i| std::mem::take(&mut rows[i]))
                    .collect();
            }
            None => rows.sort_by(|a, b| a.1.cmp(&b.1)),
        }
    }
    if let Some(m) = spec.max_rows {
        rows.truncate(m);
    }
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, (v, _))| Key::new(v, i as u64))
        .collect())
}
