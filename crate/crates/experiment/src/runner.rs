//! Prepares data, fans strategy runs out over a worker pool and collects
//! the results in a fixed order.

use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rayon::prelude::*;
use sosnn_core::data::{dated_movements, gen_ar1, gen_arma21, load_prices, normalize, NoiseSpec, NormalizationRule};
use sosnn_core::markov::{run_mkv, MarkovOrder};
use sosnn_core::nnbp::{run_nnbp, train, TrainingDiagnostics};
use sosnn_core::sosnn::run_sosnn;
use sosnn_core::{run_game, ConstantRatio, Error, MovementSeries, StrategyRunResult};

use crate::config::{derive_seed, DataSection, DateRange, ExperimentConfig, SeedPurpose};
use crate::CliError;

/// One strategy setting; a row or grid entry of the summary table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Sosnn { lags: usize, hidden: usize },
    Nnbp { lags: usize, hidden: usize },
    Markov(u8),
    Epsilon,
}

impl Cell {
    pub fn strategy(&self) -> String {
        match self {
            Cell::Sosnn { .. } => "SOSNN".into(),
            Cell::Nnbp { .. } => "NNBP".into(),
            Cell::Markov(o) => format!("MKV{o}"),
            Cell::Epsilon => "EPS".into(),
        }
    }

    pub fn network(&self) -> Option<(usize, usize)> {
        match *self {
            Cell::Sosnn { lags, hidden } | Cell::Nnbp { lags, hidden } => Some((lags, hidden)),
            _ => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            Cell::Sosnn { lags, hidden } => format!("SOSNN L={lags} M={hidden}"),
            _ => self.strategy(),
        }
    }

    pub fn file_stem(&self) -> String {
        match self {
            Cell::Sosnn { lags, hidden } => format!("sosnn_l{lags}_m{hidden}"),
            _ => self.strategy().to_lowercase(),
        }
    }
}

/// Cells in table order: SOSNN grid by L then M, NNBP, Markov, baseline.
pub fn cells(config: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    if let Some(s) = &config.sosnn {
        for &lags in &s.lags {
            for &hidden in &s.hidden {
                out.push(Cell::Sosnn { lags, hidden });
            }
        }
    }
    if let Some(n) = &config.nnbp {
        out.push(Cell::Nnbp {
            lags: n.lags,
            hidden: n.hidden,
        });
    }
    if let Some(m) = &config.markov {
        out.extend(m.orders.iter().map(|&o| Cell::Markov(o)));
    }
    if config.epsilon.is_some() {
        out.push(Cell::Epsilon);
    }
    out
}

/// Movements seen by every strategy of one replicate.
#[derive(Debug, Clone)]
pub struct ReplicateData {
    /// Warmup rounds followed by the betting rounds.
    pub investing: MovementSeries,
    pub training: Option<MovementSeries>,
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub reason: &'static str,
    pub detail: String,
}

impl Failure {
    fn from_error(e: &Error) -> Self {
        let reason = match e {
            Error::Numeric { .. } => "nonfinite-gradient",
            Error::StrategyViolation { .. } => "ratio-bound",
            Error::DegenerateData(_) => "degenerate-data",
            _ => "error",
        };
        Self {
            reason,
            detail: e.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReplicateRun {
    pub outcome: Result<StrategyRunResult, Failure>,
    pub training: Option<TrainingDiagnostics>,
    /// Wall time; reported to the caller but never written to artifacts.
    pub elapsed: Duration,
}

#[derive(Debug, Clone)]
pub struct CellRuns {
    pub cell: Cell,
    pub replicates: Vec<ReplicateRun>,
}

impl CellRuns {
    pub fn elapsed(&self) -> Duration {
        self.replicates.iter().map(|r| r.elapsed).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Backtest,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Backtest => "backtest",
        }
    }
}

/// Everything a run produced, in deterministic order.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub command: Command,
    pub config: ExperimentConfig,
    pub data: Vec<ReplicateData>,
    /// Dates of the investing series (backtests only).
    pub dates: Option<Vec<NaiveDate>>,
    pub cells: Vec<CellRuns>,
}

impl RunOutput {
    pub fn betting_rounds(&self) -> usize {
        self.data[0].investing.len() - self.config.run.warmup
    }
}

pub fn simulate(config: &ExperimentConfig, jobs: usize) -> Result<RunOutput, CliError> {
    config.validate()?;
    let generate: fn(usize, &NoiseSpec) -> Vec<f64> = match config.data {
        DataSection::Ar1 => gen_ar1,
        DataSection::Arma21 => gen_arma21,
        DataSection::Prices { .. } => {
            return Err(CliError::Usage("simulate needs data.kind = \"ar1\" or \"arma21\"".into()))
        }
    };
    let run = &config.run;
    let len = run.warmup + run.rounds.expect("validated");
    let data = (0..run.replicates)
        .map(|r| {
            let raw = generate(len, &NoiseSpec::new(derive_seed(run.seed, r, SeedPurpose::Data)));
            let investing = normalize(&raw, &raw, format!("{} #{}", config.data.label(), r + 1)).map_err(runtime)?;
            let training = match &config.nnbp {
                Some(n) => {
                    let seed = derive_seed(run.seed, r, SeedPurpose::TrainingData);
                    let raw = generate(n.training_length, &NoiseSpec::new(seed));
                    Some(normalize(&raw, &raw, "training").map_err(runtime)?)
                }
                None => None,
            };
            Ok(ReplicateData { investing, training })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    execute(Command::Simulate, config, data, None, jobs)
}

pub fn backtest(config: &ExperimentConfig, jobs: usize) -> Result<RunOutput, CliError> {
    config.validate()?;
    let DataSection::Prices {
        normalization,
        investing,
        training,
        ..
    } = &config.data
    else {
        return Err(CliError::Usage("backtest needs data.kind = \"prices\"".into()));
    };
    let path = config.price_path().expect("price data");
    let prices = load_prices(&path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    let moves = dated_movements(&prices).map_err(runtime)?;
    let warmup = config.run.warmup;

    let window = |name: &str, range: &DateRange| -> Result<(usize, usize), CliError> {
        let first = moves.iter().position(|(d, _)| range.contains(*d));
        let last = moves.iter().rposition(|(d, _)| range.contains(*d));
        match (first, last) {
            (Some(a), Some(b)) => Ok((a, b + 1)),
            _ => Err(CliError::Usage(format!(
                "data.{name} ({} to {}) contains no price movements",
                range.start, range.end
            ))),
        }
    };
    let values = |(a, b): (usize, usize)| -> Vec<f64> { moves[a..b].iter().map(|m| m.1).collect() };

    let reference = values(window("normalization", normalization)?);
    let (start, end) = window("investing", investing)?;
    if start < warmup {
        return Err(CliError::Usage(format!(
            "data.investing starts {start} movements into the file; {warmup} earlier movements are needed for warmup"
        )));
    }
    let rounds = end - start;
    if let Some(&last) = config.run.checkpoints.last() {
        if last > rounds {
            return Err(CliError::Usage(format!(
                "checkpoint {last} exceeds the {rounds} betting rounds in data.investing"
            )));
        }
    }
    let invest_raw = values((start - warmup, end));
    let train_raw = training.as_ref().map(|t| window("training", t).map(values)).transpose()?;

    let rule = match NormalizationRule::from_reference(&reference) {
        Ok(rule) => rule,
        // constant prices: zero movements stay zero
        Err(Error::DegenerateData(_))
            if invest_raw.iter().chain(train_raw.iter().flatten()).all(|&x| x == 0.0) =>
        {
            NormalizationRule { reference_max: 1.0 }
        }
        Err(e) => return Err(runtime(e)),
    };
    let investing_series = MovementSeries::new(rule.apply(&invest_raw), "investing").map_err(runtime)?;
    let training_series = train_raw
        .map(|raw| MovementSeries::new(rule.apply(&raw), "training"))
        .transpose()
        .map_err(runtime)?;
    let dates = moves[start - warmup..end].iter().map(|m| m.0).collect();

    let data = vec![
        ReplicateData {
            investing: investing_series,
            training: training_series,
        };
        config.run.replicates
    ];
    execute(Command::Backtest, config, data, Some(dates), jobs)
}

fn execute(
    command: Command,
    config: &ExperimentConfig,
    data: Vec<ReplicateData>,
    dates: Option<Vec<NaiveDate>>,
    jobs: usize,
) -> Result<RunOutput, CliError> {
    if jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let cells = cells(config);
    let tasks: Vec<(usize, usize)> = (0..cells.len())
        .flat_map(|c| (0..data.len()).map(move |r| (c, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    let results: Vec<ReplicateRun> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, r)| run_cell(config, cells[c], r, &data[r]))
            .collect::<Result<_, CliError>>()
    })?;

    let mut results = results.into_iter();
    let cells = cells
        .into_iter()
        .map(|cell| CellRuns {
            cell,
            replicates: results.by_ref().take(data.len()).collect(),
        })
        .collect();
    Ok(RunOutput {
        command,
        config: config.clone(),
        data,
        dates,
        cells,
    })
}

fn run_cell(config: &ExperimentConfig, cell: Cell, replicate: usize, data: &ReplicateData) -> Result<ReplicateRun, CliError> {
    let started = Instant::now();
    let seed = config.run.seed;
    let warmup = config.run.warmup;
    let mut training = None;
    let outcome = match cell {
        Cell::Sosnn { lags, hidden } => {
            let c = config.sosnn_config(lags, hidden, derive_seed(seed, replicate, SeedPurpose::SosnnInit))?;
            run_sosnn(&data.investing, &c)
        }
        Cell::Nnbp { .. } => {
            let c = config.nnbp_config(derive_seed(seed, replicate, SeedPurpose::NnbpInit))?;
            let set = data.training.as_ref().expect("training data prepared for NNBP");
            train(set, &c).and_then(|(weights, diag)| {
                training = Some(diag);
                run_nnbp(&weights, &data.investing, warmup)
            })
        }
        Cell::Markov(o) => run_mkv(&data.investing, MarkovOrder::new(o).map_err(runtime)?, warmup),
        Cell::Epsilon => {
            let ratio = config.epsilon.as_ref().expect("epsilon section").ratio;
            run_game(&mut ConstantRatio(ratio), &data.investing, warmup)
        }
    };
    let outcome = match outcome {
        Ok(r) if !r.final_log_capital().is_finite() => Err(Failure {
            reason: "nonfinite-capital",
            detail: format!("log capital {}", r.final_log_capital()),
        }),
        Ok(r) => Ok(r),
        Err(e @ Error::Usage(_)) => return Err(CliError::Usage(e.to_string())),
        Err(e) => Err(Failure::from_error(&e)),
    };
    Ok(ReplicateRun {
        outcome,
        training,
        elapsed: started.elapsed(),
    })
}

fn runtime(e: Error) -> CliError {
    CliError::Runtime(e.to_string())
}
