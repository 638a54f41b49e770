//! Synthetic series, price files, movement extraction and normalization.

use std::fmt;
use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::MovementSeries;

/// Seeded standard normal innovations.
///
/// The stream is ChaCha8 seeded with `seed` via `seed_from_u64`, mapped
/// through the ziggurat sampler of `rand_distr::StandardNormal`. Both crates
/// are pinned by the lockfile, so a seed always yields the same draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn draws(&self) -> impl Iterator<Item = f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        std::iter::repeat_with(move || StandardNormal.sample(&mut rng))
    }
}

/// `x_n = 0.6 x_{n-1} + eps_n` from `x_0`, one value per innovation.
pub fn ar1_recursion(x0: f64, innovations: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut prev = x0;
    innovations
        .into_iter()
        .map(|eps| {
            prev = 0.6 * prev + eps;
            prev
        })
        .collect()
}

/// Initial conditions of the ARMA(2,1) recursion.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ArmaStart {
    /// `x_0`
    pub last: f64,
    /// `x_{-1}`
    pub before_last: f64,
    /// `eps_0`
    pub last_innovation: f64,
}

/// `x_n = 0.6 x_{n-1} + 0.3 x_{n-2} + eps_n - 0.5 eps_{n-1}`.
pub fn arma21_recursion(start: ArmaStart, innovations: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let ArmaStart {
        mut last,
        mut before_last,
        mut last_innovation,
    } = start;
    innovations
        .into_iter()
        .map(|eps| {
            let x = 0.6 * last + 0.3 * before_last + eps - 0.5 * last_innovation;
            before_last = last;
            last = x;
            last_innovation = eps;
            x
        })
        .collect()
}

/// `n` AR(1) values `x_1..x_n` with `x_0 = 0`.
pub fn gen_ar1(n: usize, noise: &NoiseSpec) -> Vec<f64> {
    ar1_recursion(0.0, noise.draws().take(n))
}

/// `n` ARMA(2,1) values with zero initial conditions.
pub fn gen_arma21(n: usize, noise: &NoiseSpec) -> Vec<f64> {
    arma21_recursion(ArmaStart::default(), noise.draws().take(n))
}

/// Divisor for mapping raw movements into [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRule {
    pub reference_max: f64,
}

impl NormalizationRule {
    /// Maximum absolute value over `reference`.
    pub fn from_reference(reference: &[f64]) -> Result<Self> {
        let reference_max = reference.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if !(reference_max > 0.0 && reference_max.is_finite()) {
            return Err(Error::DegenerateData(format!(
                "normalization reference of {} values has maximum absolute value {reference_max}",
                reference.len()
            )));
        }
        Ok(Self { reference_max })
    }

    /// Divides by the reference maximum and clamps to [-1, 1].
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .map(|x| (x / self.reference_max).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Normalizes `raw` by the maximum absolute value of `reference`. Passing
/// `raw` itself as the reference maps its extreme element to exactly +/-1.
pub fn normalize(raw: &[f64], reference: &[f64], label: impl Into<String>) -> Result<MovementSeries> {
    let rule = NormalizationRule::from_reference(reference)?;
    MovementSeries::new(rule.apply(raw), label)
}

/// Daily closing prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub dates: Vec<NaiveDate>,
    pub closes: Vec<f64>,
}

impl PriceSeries {
    pub fn new(dates: Vec<NaiveDate>, closes: Vec<f64>) -> Result<Self> {
        if dates.len() != closes.len() {
            return Err(Error::usage("dates and closes differ in length"));
        }
        for (i, &c) in closes.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::Validation {
                    line: i + 1,
                    detail: format!("close {c} is not a positive number"),
                });
            }
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::Validation {
                    line: i + 2,
                    detail: format!("date {} does not follow {}", pair[1], pair[0]),
                });
            }
        }
        Ok(Self { dates, closes })
    }

    pub fn len(&self) -> usize {
        self.closes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.closes.is_empty()
    }
}

/// First differences `close_n - close_{n-1}`.
pub fn movements_from_prices(prices: &PriceSeries) -> Result<Vec<f64>> {
    if prices.len() < 2 {
        return Err(Error::usage(format!(
            "need at least 2 closes to form a movement, got {}",
            prices.len()
        )));
    }
    Ok(prices.closes.windows(2).map(|w| w[1] - w[0]).collect())
}

/// Movements dated by the later day of each pair.
pub fn dated_movements(prices: &PriceSeries) -> Result<Vec<(NaiveDate, f64)>> {
    Ok(prices.dates[1..]
        .iter()
        .copied()
        .zip(movements_from_prices(prices)?)
        .collect())
}

fn parse_date(field: &str, line: usize) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(field.trim(), "%Y-%m-%d").map_err(|e| Error::Parse {
        line,
        detail: format!("bad date {:?}: {e}", field.trim()),
    })
}

/// Parses `date,close` lines. A first line whose second field is not a
/// number is taken as a header.
pub fn parse_prices(text: &str) -> Result<PriceSeries> {
    let mut dates = Vec::new();
    let mut closes = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                detail: format!("expected `date,close`, found {} fields", fields.len()),
            });
        }
        let close = match fields[1].parse::<f64>() {
            Ok(c) => c,
            Err(_) if dates.is_empty() && line_no == 1 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line: line_no,
                    detail: format!("bad close {:?}: {e}", fields[1]),
                })
            }
        };
        let date = parse_date(fields[0], line_no)?;
        if !(close.is_finite() && close > 0.0) {
            return Err(Error::Validation {
                line: line_no,
                detail: format!("close {close} is not a positive number"),
            });
        }
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::Validation {
                    line: line_no,
                    detail: format!("date {date} does not follow {prev}"),
                });
            }
        }
        dates.push(date);
        closes.push(close);
    }
    Ok(PriceSeries { dates, closes })
}

pub fn load_prices(path: impl AsRef<Path>) -> Result<PriceSeries> {
    parse_prices(&fs::read_to_string(path)?)
}

/// A `date,value` row for series output.
pub struct DatedValue<'a>(pub &'a NaiveDate, pub f64);

impl fmt::Display for DatedValue<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0.format("%Y-%m-%d"), self.1)
    }
}

/// Renders `date,value` lines with a header.
pub fn format_dated_series(dates: &[NaiveDate], values: &[f64]) -> String {
    let mut out = String::from("date,value\n");
    for (d, v) in dates.iter().zip(values) {
        out.push_str(&DatedValue(d, *v).to_string());
        out.push('\n');
    }
    out
}
