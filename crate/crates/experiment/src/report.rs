//! Summary tables and artifact files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::runner::{Cell, CellRuns, RunOutput};
use crate::CliError;

pub const FAILED: &str = "---";
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

const METHODS: &str = "\
# markov: per-bucket log-optimal ratio by bisection on the derivative, clamped to [-0.999, 0.999]; empty buckets bet 0
# nnbp: constant learning rate, one step per training pair
# sosnn: annealed gradient ascent restarted each round, warm_start as configured
";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Flag {
    #[default]
    None,
    Best,
    Second,
}

impl Flag {
    pub fn marker(&self) -> &'static str {
        match self {
            Flag::None => "",
            Flag::Best => "*",
            Flag::Second => "**",
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "*" => Flag::Best,
            "**" => Flag::Second,
            _ => Flag::None,
        }
    }
}

/// Ranking of `values` (failed entries are `None`). Equal values keep their
/// input order. Returns the flags and the index pairs whose tie decided a
/// flag.
pub fn rank(values: &[Option<f64>]) -> (Vec<Flag>, Vec<(usize, usize)>) {
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| values[i].is_some()).collect();
    order.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).expect("finite values"));
    let mut flags = vec![Flag::None; values.len()];
    let mut ties = Vec::new();
    for (pos, flag) in [Flag::Best, Flag::Second].into_iter().enumerate() {
        let Some(&i) = order.get(pos) else { break };
        flags[i] = flag;
        if let Some(&j) = order.get(pos + 1) {
            if values[i] == values[j] {
                ties.push((i, j));
            }
        }
    }
    (flags, ties)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    Failed { reason: String, failed: usize, of: usize },
}

impl Status {
    pub fn code(&self) -> String {
        match self {
            Status::Ok => "ok".into(),
            Status::Failed { reason, failed, of } => format!("{reason} {failed}/{of}"),
        }
    }
}

/// Seed-averaged results of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: Cell,
    pub status: Status,
    /// Mean log capital at each checkpoint; empty for failed cells.
    pub values: Vec<f64>,
    pub flag: Flag,
    /// Mean gradient iterations per betting round.
    pub mean_iterations: Option<f64>,
    /// Rounds (over all replicates) that hit the iteration cap.
    pub capped_rounds: Option<usize>,
    pub training_error: Option<f64>,
}

impl CellSummary {
    pub fn final_value(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    sum / n as f64
}

fn summarize_cell(runs: &CellRuns, checkpoints: &[usize]) -> CellSummary {
    let of = runs.replicates.len();
    let failures: Vec<_> = runs.replicates.iter().filter_map(|r| r.outcome.as_ref().err()).collect();
    let training_error = runs
        .replicates
        .iter()
        .map(|r| r.training.as_ref().map(|t| t.final_error))
        .collect::<Option<Vec<f64>>>()
        .map(|e| mean(e.into_iter()));
    if let Some(first) = failures.first() {
        return CellSummary {
            cell: runs.cell,
            status: Status::Failed {
                reason: first.reason.into(),
                failed: failures.len(),
                of,
            },
            values: Vec::new(),
            flag: Flag::None,
            mean_iterations: None,
            capped_rounds: None,
            training_error,
        };
    }
    let results: Vec<_> = runs.replicates.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let values = checkpoints
        .iter()
        .map(|&c| mean(results.iter().map(|r| r.log_capital_at(c).expect("checkpoint within run"))))
        .collect();
    let diagnostics: Vec<_> = results.iter().flat_map(|r| r.diagnostics.iter().flatten()).collect();
    let (mean_iterations, capped_rounds) = if diagnostics.is_empty() {
        (None, None)
    } else {
        (
            Some(mean(diagnostics.iter().map(|d| d.iterations as f64))),
            Some(diagnostics.iter().filter(|d| !d.converged).count()),
        )
    };
    CellSummary {
        cell: runs.cell,
        status: Status::Ok,
        values,
        flag: Flag::None,
        mean_iterations,
        capped_rounds,
        training_error,
    }
}

/// Summaries in cell order, flagged at the final checkpoint within the
/// SOSNN grid and within the Markov strategies.
pub fn summarize(output: &RunOutput) -> Vec<CellSummary> {
    let mut rows: Vec<CellSummary> = output
        .cells
        .iter()
        .map(|c| summarize_cell(c, &output.config.run.checkpoints))
        .collect();
    for group in [
        (|c: &Cell| matches!(c, Cell::Sosnn { .. })) as fn(&Cell) -> bool,
        |c: &Cell| matches!(c, Cell::Markov(_)),
    ] {
        let members: Vec<usize> = (0..rows.len()).filter(|&i| group(&rows[i].cell)).collect();
        let values: Vec<Option<f64>> = members.iter().map(|&i| rows[i].final_value()).collect();
        let (flags, _) = rank(&values);
        for (&i, flag) in members.iter().zip(flags) {
            rows[i].flag = flag;
        }
    }
    rows
}

pub fn value_header(checkpoint: usize) -> String {
    format!("log_capital_{checkpoint}")
}

pub fn summary_csv(rows: &[CellSummary], checkpoints: &[usize]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["strategy".to_string(), "lags".into(), "hidden".into(), "status".into()];
    header.extend(checkpoints.iter().map(|&c| value_header(c)));
    header.extend(["flag", "mean_iterations", "capped_rounds", "training_error"].map(String::from));
    w.write_record(&header).map_err(csv_error)?;
    for row in rows {
        let (lags, hidden) = row
            .cell
            .network()
            .map_or((String::new(), String::new()), |(l, m)| (l.to_string(), m.to_string()));
        let mut record = vec![row.cell.strategy(), lags, hidden, row.status.code()];
        match row.status {
            Status::Ok => record.extend(row.values.iter().map(f64::to_string)),
            Status::Failed { .. } => record.extend(checkpoints.iter().map(|_| FAILED.to_string())),
        }
        record.push(row.flag.marker().into());
        record.push(row.mean_iterations.map_or(String::new(), |v| v.to_string()));
        record.push(row.capped_rounds.map_or(String::new(), |v| v.to_string()));
        record.push(row.training_error.map_or(String::new(), |v| v.to_string()));
        w.write_record(&record).map_err(csv_error)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?).expect("utf-8"))
}

pub(crate) fn csv_error(e: csv::Error) -> CliError {
    CliError::Runtime(format!("csv: {e}"))
}

/// Right-aligned columns, first column left-aligned.
pub fn align(rows: &[Vec<String>]) -> String {
    let width = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..width)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c == 0 {
                let _ = write!(line, "{cell:<w$}", w = widths[0]);
            } else {
                let _ = write!(line, "  {cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

pub fn format_value(row: &CellSummary, index: usize, last: bool) -> String {
    match row.status {
        Status::Ok => {
            let flag = if last { row.flag.marker() } else { "" };
            format!("{:.3}{flag}", row.values[index])
        }
        Status::Failed { .. } => FAILED.into(),
    }
}

pub fn summary_text(output: &RunOutput, rows: &[CellSummary]) -> String {
    let config = &output.config;
    let checkpoints = &config.run.checkpoints;
    let last = checkpoints.len() - 1;
    let mut out = format!(
        "{}: {} {}, {} replicate(s), seed {}, warmup {}, {} betting rounds ({VERSION})\n",
        config.run.name,
        output.command.name(),
        config.data.label(),
        config.run.replicates,
        config.run.seed,
        config.run.warmup,
        output.betting_rounds(),
    );

    if let Some(s) = &config.sosnn {
        out.push_str("\nSOSNN log capital\n");
        let mut table = vec![["L".to_string(), "round".into()]
            .into_iter()
            .chain(s.hidden.iter().map(|m| format!("M={m}")))
            .collect::<Vec<_>>()];
        for &l in &s.lags {
            for (i, c) in checkpoints.iter().enumerate() {
                let mut line = vec![if i == 0 { l.to_string() } else { String::new() }, c.to_string()];
                for &m in &s.hidden {
                    let row = rows
                        .iter()
                        .find(|r| r.cell == Cell::Sosnn { lags: l, hidden: m })
                        .expect("grid cell");
                    line.push(format_value(row, i, i == last));
                }
                table.push(line);
            }
        }
        out.push_str(&align(&table));
    }

    let others: Vec<&CellSummary> = rows.iter().filter(|r| !matches!(r.cell, Cell::Sosnn { .. })).collect();
    if !others.is_empty() {
        out.push('\n');
        let mut table = vec![std::iter::once("round".to_string())
            .chain(others.iter().map(|r| r.cell.label()))
            .collect::<Vec<_>>()];
        for (i, c) in checkpoints.iter().enumerate() {
            table.push(
                std::iter::once(c.to_string())
                    .chain(others.iter().map(|r| format_value(r, i, i == last)))
                    .collect(),
            );
        }
        if others.iter().any(|r| r.training_error.is_some()) {
            table.push(
                std::iter::once("error".to_string())
                    .chain(others.iter().map(|r| r.training_error.map_or(String::new(), |e| format!("({e:.2e})"))))
                    .collect(),
            );
        }
        out.push_str(&align(&table));
    }

    let failed: Vec<&CellSummary> = rows.iter().filter(|r| r.status != Status::Ok).collect();
    if !failed.is_empty() {
        out.push_str("\nFailed cells\n");
        for r in failed {
            if let Status::Failed { reason, failed, of } = &r.status {
                let _ = writeln!(out, "{}: {reason} in {failed} of {of} replicate(s)", r.cell.label());
            }
        }
    }

    let tracked: Vec<&CellSummary> = rows.iter().filter(|r| r.mean_iterations.is_some()).collect();
    if !tracked.is_empty() {
        out.push_str("\nConvergence\n");
        let mut table = vec![vec!["cell".to_string(), "mean iterations".into(), "capped rounds".into()]];
        for r in tracked {
            table.push(vec![
                r.cell.label(),
                format!("{:.1}", r.mean_iterations.unwrap()),
                r.capped_rounds.unwrap().to_string(),
            ]);
        }
        out.push_str(&align(&table));
    }
    out
}

fn series_csv(result: &sosnn_core::StrategyRunResult) -> String {
    let mut out = String::from("round,alpha,log_capital\n");
    for (n, (a, k)) in result.ratios.iter().zip(&result.log_capital_path).enumerate() {
        let _ = writeln!(out, "{},{a},{k}", n + 1);
    }
    out
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))
}

/// Writes the resolved config, per-run series, summaries and NNBP
/// diagnostics under `out`.
pub fn write_artifacts(output: &RunOutput, out: &Path) -> Result<Vec<CellSummary>, CliError> {
    let series_dir = out.join("series");
    create_dir(&series_dir)?;
    write(
        &out.join("config.toml"),
        &format!("# {VERSION} {}\n{METHODS}{}", output.command.name(), output.config.to_toml()),
    )?;

    for cell in &output.cells {
        for (r, run) in cell.replicates.iter().enumerate() {
            if let Ok(result) = &run.outcome {
                write(
                    &series_dir.join(format!("{}_r{}.csv", cell.cell.file_stem(), r + 1)),
                    &series_csv(result),
                )?;
            }
            if let Some(diag) = &run.training {
                let dir = out.join("nnbp");
                create_dir(&dir)?;
                let mut epochs = String::from("epoch,training_error\n");
                for (e, v) in diag.error_per_epoch.iter().enumerate() {
                    let _ = writeln!(epochs, "{e},{v}");
                }
                write(&dir.join(format!("training_error_r{}.csv", r + 1)), &epochs)?;
                let mut days = String::from("day,E_k\n");
                for (d, v) in diag.per_day_error.iter().enumerate() {
                    let _ = writeln!(days, "{},{v}", d + 1);
                }
                write(&dir.join(format!("per_day_error_r{}.csv", r + 1)), &days)?;
            }
        }
    }

    if let Some(dates) = &output.dates {
        write(
            &out.join("movements.csv"),
            &sosnn_core::data::format_dated_series(dates, output.data[0].investing.values()),
        )?;
    }

    let rows = summarize(output);
    write(&out.join("summary.csv"), &summary_csv(&rows, &output.config.run.checkpoints)?)?;
    write(&out.join("summary.txt"), &summary_text(output, &rows))?;
    Ok(rows)
}
