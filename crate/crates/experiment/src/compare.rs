//! Merges the summaries of several runs into one ranked table.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::report::{align, csv_error, rank, value_header, Flag, FAILED};
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct CompareRow {
    pub run: String,
    pub cell: String,
    pub status: String,
    /// `None` marks a failed cell.
    pub values: Vec<Option<f64>>,
    pub flag: Flag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub checkpoints: Vec<usize>,
    pub rows: Vec<CompareRow>,
    pub notes: Vec<String>,
}

/// `(label, status, values)` for one row of a summary file.
type SummaryRow = (String, String, Vec<Option<f64>>);

fn read_summary(path: &Path) -> Result<(Vec<usize>, Vec<SummaryRow>), CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let headers = reader.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Usage(format!("{}: missing column {name}", path.display())))
    };
    let (strategy, lags, hidden, status) = (column("strategy")?, column("lags")?, column("hidden")?, column("status")?);
    let mut checkpoints = Vec::new();
    let mut value_columns = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        if let Some(c) = h.strip_prefix("log_capital_") {
            let c = c
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: bad column {h}", path.display())))?;
            checkpoints.push(c);
            value_columns.push(i);
        }
    }

    let mut rows = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let bad = |what: &str| CliError::Usage(format!("{}: row {}: {what}", path.display(), n + 2));
        let mut cell = record.get(strategy).ok_or_else(|| bad("short row"))?.to_string();
        if let (Some(l), Some(m)) = (record.get(lags), record.get(hidden)) {
            if !l.is_empty() && cell != "NNBP" {
                cell = format!("{cell} L={l} M={m}");
            }
        }
        let values = value_columns
            .iter()
            .map(|&i| match record.get(i) {
                Some(FAILED) => Ok(None),
                Some(v) => v.parse().map(Some).map_err(|_| bad("bad value")),
                None => Err(bad("short row")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((cell, record.get(status).unwrap_or_default().to_string(), values));
    }
    Ok((checkpoints, rows))
}

fn labels(dirs: &[PathBuf]) -> Vec<String> {
    let short: Vec<String> = dirs
        .iter()
        .map(|d| d.file_name().map_or_else(|| d.display().to_string(), |n| n.to_string_lossy().into_owned()))
        .collect();
    let distinct: HashSet<&String> = short.iter().collect();
    if distinct.len() == short.len() {
        short
    } else {
        dirs.iter().map(|d| d.display().to_string()).collect()
    }
}

/// Reads `summary.csv` from each run directory. Runs are ranked at the
/// final checkpoint; equal values go to the run listed first.
pub fn compare(dirs: &[PathBuf]) -> Result<Comparison, CliError> {
    if dirs.is_empty() {
        return Err(CliError::Usage("compare needs at least one run directory".into()));
    }
    let mut checkpoints: Option<Vec<usize>> = None;
    let mut rows = Vec::new();
    for (dir, run) in dirs.iter().zip(labels(dirs)) {
        let (cps, cells) = read_summary(&dir.join("summary.csv"))?;
        match &checkpoints {
            Some(expected) if *expected != cps => {
                return Err(CliError::Usage(format!(
                    "{} reports checkpoints {cps:?}, expected {expected:?}",
                    dir.display()
                )))
            }
            None if cps.is_empty() => {
                return Err(CliError::Usage(format!("{} has no checkpoint columns", dir.display())))
            }
            _ => checkpoints = Some(cps),
        }
        rows.extend(cells.into_iter().map(|(cell, status, values)| CompareRow {
            run: run.clone(),
            cell,
            status,
            values,
            flag: Flag::None,
        }));
    }

    let finals: Vec<Option<f64>> = rows.iter().map(|r| *r.values.last().expect("checkpoints")).collect();
    let (flags, ties) = rank(&finals);
    for (row, flag) in rows.iter_mut().zip(flags) {
        row.flag = flag;
    }
    let notes = ties
        .into_iter()
        .map(|(a, b)| {
            format!(
                "tie: {} {} and {} {} both reach {}; ranked by run order",
                rows[a].run,
                rows[a].cell,
                rows[b].run,
                rows[b].cell,
                finals[a].unwrap()
            )
        })
        .collect();
    Ok(Comparison {
        checkpoints: checkpoints.unwrap_or_default(),
        rows,
        notes,
    })
}

impl Comparison {
    fn cell_text(&self, row: &CompareRow, i: usize) -> String {
        match row.values[i] {
            Some(v) if i + 1 == self.checkpoints.len() => format!("{v:.3}{}", row.flag.marker()),
            Some(v) => format!("{v:.3}"),
            None => FAILED.into(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut table = vec![["run".to_string(), "cell".into()]
            .into_iter()
            .chain(self.checkpoints.iter().map(|c| c.to_string()))
            .collect::<Vec<_>>()];
        for row in &self.rows {
            let mut line = vec![row.run.clone(), row.cell.clone()];
            line.extend((0..self.checkpoints.len()).map(|i| self.cell_text(row, i)));
            table.push(line);
        }
        let mut out = align(&table);
        for note in &self.notes {
            out.push_str(note);
            out.push('\n');
        }
        out
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["run".to_string(), "cell".into(), "status".into()];
        header.extend(self.checkpoints.iter().map(|&c| value_header(c)));
        header.push("flag".into());
        w.write_record(&header).map_err(csv_error)?;
        for row in &self.rows {
            let mut record = vec![row.run.clone(), row.cell.clone(), row.status.clone()];
            record.extend(row.values.iter().map(|v| v.map_or(FAILED.to_string(), |v| v.to_string())));
            record.push(row.flag.marker().into());
            w.write_record(&record).map_err(csv_error)?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).expect("utf-8"))
    }
}
