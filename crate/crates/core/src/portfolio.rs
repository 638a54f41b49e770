//! Multi-asset extension: one shared hidden layer feeding `P` tanh outputs,
//! one investing ratio per asset.
//!
//! Capital evolves as `K_n = K_{n-1} (1 + sum_h r_h x_{n,h})`. Independent
//! tanh outputs can have total exposure `sum_h |r_h|` of 1 or more, so bets
//! are rescaled to total exposure `MAX_RATIO` whenever they reach it. The
//! log-capital gradient follows the single-output chain rule with the shared
//! multiplier `x_{k,h} / (1 + sum_g f_g x_{k,g})` per asset.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{RoundDiagnostics, MAX_RATIO};
use crate::neural::{dot, NetworkConfig, NetworkWeights};
use crate::sosnn::{ascend, Objective, SosnnConfig};

/// Shared hidden weights (`M x L`, row-major) and `P x M` output weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioWeights {
    net: NetworkConfig,
    assets: usize,
    params: Vec<f64>,
}

impl PortfolioWeights {
    pub fn new(net: NetworkConfig, assets: usize, hidden: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        if hidden.len() != net.hidden_len() || output.len() != assets * net.hidden || assets == 0 {
            return Err(Error::usage(format!(
                "portfolio weights of shape ({}, {}) do not match L={} M={} P={assets}",
                hidden.len(),
                output.len(),
                net.inputs,
                net.hidden
            )));
        }
        let mut params = hidden;
        params.extend(output);
        Self::from_params(net, assets, params)
    }

    pub fn from_params(net: NetworkConfig, assets: usize, params: Vec<f64>) -> Result<Self> {
        if assets == 0 || params.len() != net.hidden_len() + assets * net.hidden {
            return Err(Error::usage("portfolio parameter count does not match its shape"));
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(Error::usage("portfolio weights must be finite"));
        }
        Ok(Self { net, assets, params })
    }

    pub fn zeros(net: NetworkConfig, assets: usize) -> Self {
        Self {
            net,
            assets,
            params: vec![0.0; net.hidden_len() + assets * net.hidden],
        }
    }

    /// Uniform in `[-scale, scale]`; hidden layer first, then output rows.
    pub fn random<R: rand::Rng + ?Sized>(net: NetworkConfig, assets: usize, scale: f64, rng: &mut R) -> Self {
        let params = (0..net.hidden_len() + assets * net.hidden)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self { net, assets, params }
    }

    /// The single-asset network seen as a one-asset portfolio.
    pub fn from_single(weights: &NetworkWeights) -> Self {
        Self {
            net: weights.config(),
            assets: 1,
            params: weights.params().to_vec(),
        }
    }

    pub fn net(&self) -> NetworkConfig {
        self.net
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn output_row(&self, asset: usize) -> &[f64] {
        let start = self.net.hidden_len() + asset * self.net.hidden;
        &self.params[start..start + self.net.hidden]
    }
}

fn portfolio_raw(net: NetworkConfig, params: &[f64], window: &[f64], y2: &mut [f64], out: &mut [f64]) {
    let (w12, w23) = params.split_at(net.hidden_len());
    for (y, row) in y2.iter_mut().zip(w12.chunks_exact(net.inputs)) {
        *y = dot(row, window).tanh();
    }
    for (o, row) in out.iter_mut().zip(w23.chunks_exact(net.hidden)) {
        *o = dot(row, y2).tanh();
    }
}

/// Raw outputs `y3_h = tanh(sum_i w23_hi y2_i)`, hidden layer computed once.
pub fn forward_portfolio(window: &[f64], weights: &PortfolioWeights) -> Result<Vec<f64>> {
    if window.len() != weights.net.inputs {
        return Err(Error::usage(format!(
            "window of length {} for a network with L={}",
            window.len(),
            weights.net.inputs
        )));
    }
    let mut y2 = vec![0.0; weights.net.hidden];
    let mut out = vec![0.0; weights.assets];
    portfolio_raw(weights.net, &weights.params, window, &mut y2, &mut out);
    Ok(out)
}

pub fn exposure(ratios: &[f64]) -> f64 {
    ratios.iter().map(|r| r.abs()).sum()
}

/// Scales `ratios` to total exposure `MAX_RATIO` if they reach it.
pub fn rescale_exposure(ratios: &mut [f64]) {
    let total = exposure(ratios);
    if total >= MAX_RATIO {
        for r in ratios.iter_mut() {
            *r = *r / total * MAX_RATIO;
        }
    }
}

/// `K_n = K_{n-1} (1 + sum_h r_h x_h)`; requires `sum_h |r_h| < 1`.
pub fn capital_step_portfolio(capital_prev: f64, ratios: &[f64], x: &[f64]) -> Result<f64> {
    if ratios.len() != x.len() {
        return Err(Error::usage(format!("{} ratios for {} assets", ratios.len(), x.len())));
    }
    if !(capital_prev.is_finite() && capital_prev > 0.0) {
        return Err(Error::Domain {
            name: "capital_prev",
            value: capital_prev,
            domain: "(0, inf)",
        });
    }
    if let Some(&bad) = x.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
        return Err(Error::Domain {
            name: "x",
            value: bad,
            domain: "[-1, 1]",
        });
    }
    let total = exposure(ratios);
    if !(total < 1.0) {
        return Err(Error::StrategyViolation {
            round: 0,
            detail: format!("total exposure {total} is not below 1"),
        });
    }
    Ok(capital_prev * (1.0 + dot(ratios, x)))
}

/// Movements of `P` assets, one row per day.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiAssetSeries {
    pub dates: Vec<NaiveDate>,
    assets: usize,
    values: Vec<f64>,
}

impl MultiAssetSeries {
    pub fn new(dates: Vec<NaiveDate>, assets: usize, values: Vec<f64>) -> Result<Self> {
        if assets == 0 || !values.len().is_multiple_of(assets) {
            return Err(Error::usage("multi-asset values do not form complete rows"));
        }
        if !dates.is_empty() && dates.len() * assets != values.len() {
            return Err(Error::usage("one date per row required"));
        }
        if let Some(&bad) = values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
            return Err(Error::Domain {
                name: "movement",
                value: bad,
                domain: "[-1, 1]",
            });
        }
        Ok(Self { dates, assets, values })
    }

    pub fn assets(&self) -> usize {
        self.assets
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.assets
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn row(&self, day: usize) -> &[f64] {
        &self.values[day * self.assets..(day + 1) * self.assets]
    }

    /// Movements of one asset across all days.
    pub fn asset(&self, asset: usize) -> Vec<f64> {
        self.values.iter().skip(asset).step_by(self.assets).copied().collect()
    }
}

/// Parses `date,value_1,...,value_P` lines; an optional header is detected
/// by a non-numeric second field on the first line.
pub fn parse_multi_movements(text: &str) -> Result<MultiAssetSeries> {
    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    let mut assets = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                detail: "expected `date,value_1,...`".into(),
            });
        }
        if line_no == 1 && fields[1].parse::<f64>().is_err() {
            continue;
        }
        let p = *assets.get_or_insert(fields.len() - 1);
        if fields.len() - 1 != p {
            return Err(Error::Parse {
                line: line_no,
                detail: format!("expected {p} values, found {}", fields.len() - 1),
            });
        }
        let date = NaiveDate::parse_from_str(fields[0], "%Y-%m-%d").map_err(|e| Error::Parse {
            line: line_no,
            detail: format!("bad date {:?}: {e}", fields[0]),
        })?;
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::Validation {
                    line: line_no,
                    detail: format!("date {date} does not follow {prev}"),
                });
            }
        }
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|e| Error::Parse {
                line: line_no,
                detail: format!("bad value {f:?}: {e}"),
            })?;
            if !(-1.0..=1.0).contains(&v) {
                return Err(Error::Validation {
                    line: line_no,
                    detail: format!("movement {v} outside [-1, 1]"),
                });
            }
            values.push(v);
        }
        dates.push(date);
    }
    MultiAssetSeries::new(dates, assets.unwrap_or(1), values)
}

pub fn load_multi_movements(path: impl AsRef<Path>) -> Result<MultiAssetSeries> {
    parse_multi_movements(&fs::read_to_string(path)?)
}

pub fn format_multi_movements(series: &MultiAssetSeries) -> String {
    let mut out = String::from("date");
    for h in 1..=series.assets {
        out.push_str(&format!(",value_{h}"));
    }
    out.push('\n');
    for (day, d) in series.dates.iter().enumerate() {
        out.push_str(&d.format("%Y-%m-%d").to_string());
        for v in series.row(day) {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Pairs of an input window and the `P` movements that followed it.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioHistory {
    inputs: usize,
    assets: usize,
    windows: Vec<f64>,
    movements: Vec<f64>,
}

impl PortfolioHistory {
    pub fn new(inputs: usize, assets: usize) -> Self {
        Self {
            inputs,
            assets,
            windows: Vec::new(),
            movements: Vec::new(),
        }
    }

    pub fn push(&mut self, window: &[f64], movements: &[f64]) -> Result<()> {
        if window.len() != self.inputs || movements.len() != self.assets {
            return Err(Error::usage("pair does not match the history shape"));
        }
        self.windows.extend_from_slice(window);
        self.movements.extend_from_slice(movements);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.movements.len() / self.assets.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.movements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.windows
            .chunks_exact(self.inputs.max(1))
            .zip(self.movements.chunks_exact(self.assets.max(1)))
    }

    fn check(&self, w: &PortfolioWeights) -> Result<()> {
        if self.inputs != w.net.inputs || self.assets != w.assets {
            return Err(Error::usage("history does not match the portfolio network"));
        }
        Ok(())
    }
}

struct PortfolioObjective<'a> {
    net: NetworkConfig,
    assets: usize,
    history: &'a PortfolioHistory,
    y2: Vec<f64>,
    out: Vec<f64>,
    delta1: Vec<f64>,
}

impl<'a> PortfolioObjective<'a> {
    fn new(net: NetworkConfig, assets: usize, history: &'a PortfolioHistory) -> Self {
        Self {
            net,
            assets,
            history,
            y2: vec![0.0; net.hidden],
            out: vec![0.0; assets],
            delta1: vec![0.0; assets],
        }
    }
}

impl Objective for PortfolioObjective<'_> {
    fn value(&mut self, params: &[f64]) -> f64 {
        let mut phi = 0.0;
        for (u, x) in self.history.iter() {
            portfolio_raw(self.net, params, u, &mut self.y2, &mut self.out);
            phi += dot(&self.out, x).ln_1p();
        }
        phi
    }

    fn gradient(&mut self, params: &[f64], grad: &mut [f64]) {
        grad.fill(0.0);
        let (l, m) = (self.net.inputs, self.net.hidden);
        let w23 = &params[self.net.hidden_len()..];
        let (g12, g23) = grad.split_at_mut(self.net.hidden_len());
        for (u, x) in self.history.iter() {
            portfolio_raw(self.net, params, u, &mut self.y2, &mut self.out);
            let denom = 1.0 + dot(&self.out, x);
            for h in 0..self.assets {
                let t = self.out[h];
                self.delta1[h] = x[h] / denom * (1.0 - t * t);
            }
            for i in 0..m {
                let yi = self.y2[i];
                let mut back = 0.0;
                for h in 0..self.assets {
                    g23[h * m + i] += self.delta1[h] * yi;
                    back += self.delta1[h] * w23[h * m + i];
                }
                let d = back * (1.0 - yi * yi);
                for (g, uj) in g12[i * l..(i + 1) * l].iter_mut().zip(u) {
                    *g += d * uj;
                }
            }
        }
    }
}

/// `phi = sum_k log(1 + sum_h f_h(u_{k-1}) x_{k,h})` with raw outputs.
pub fn portfolio_phi(weights: &PortfolioWeights, history: &PortfolioHistory) -> Result<f64> {
    history.check(weights)?;
    Ok(PortfolioObjective::new(weights.net, weights.assets, history).value(&weights.params))
}

pub fn portfolio_phi_gradient(weights: &PortfolioWeights, history: &PortfolioHistory) -> Result<PortfolioWeights> {
    history.check(weights)?;
    let mut grad = vec![0.0; weights.params.len()];
    PortfolioObjective::new(weights.net, weights.assets, history).gradient(&weights.params, &mut grad);
    Ok(PortfolioWeights {
        net: weights.net,
        assets: weights.assets,
        params: grad,
    })
}

/// Window of the last `lags` movements of every asset: asset-major, most
/// recent first within each asset.
fn fill_portfolio_window(series: &MultiAssetSeries, end: usize, lags: usize, window: &mut [f64]) {
    for h in 0..series.assets {
        for j in 0..lags {
            window[h * lags + j] = series.values[(end - 1 - j) * series.assets + h];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioRunResult {
    pub warmup: usize,
    /// Rescaled ratio vector per round.
    pub ratios: Vec<Vec<f64>>,
    pub log_capital_path: Vec<f64>,
    pub diagnostics: Vec<Option<RoundDiagnostics>>,
}

/// Sequential optimization with a `P`-output network. `config.net.inputs` is
/// the number of lags per asset; the network sees `lags * P` inputs.
pub fn run_portfolio_sosnn(series: &MultiAssetSeries, config: &SosnnConfig) -> Result<PortfolioRunResult> {
    config.validate()?;
    let lags = config.net.inputs;
    let p = series.assets;
    if config.warmup < lags || series.len() < config.warmup + 2 {
        return Err(Error::usage(format!(
            "portfolio run needs warmup >= L and at least warmup + 2 days (L={lags}, warmup={}, days={})",
            config.warmup,
            series.len()
        )));
    }
    let net = NetworkConfig::new(lags * p, config.net.hidden)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = PortfolioHistory::new(net.inputs, p);
    let mut weights: Option<Vec<f64>> = None;
    let mut window = vec![0.0; net.inputs];
    let mut y2 = vec![0.0; net.hidden];

    let mut log_capital = 0.0;
    let mut ratios = Vec::with_capacity(series.len());
    let mut path = Vec::with_capacity(series.len());
    let mut diagnostics = Vec::with_capacity(series.len());

    for idx in 0..series.len() {
        let round = idx + 1;
        let mut bet = vec![0.0; p];
        let mut diag = None;
        if round > config.warmup {
            for k in (lags + history.len())..idx {
                fill_portfolio_window(series, k, lags, &mut window);
                history.push(&window, series.row(k))?;
            }
            if !history.is_empty() {
                let mut params = match (&weights, config.warm_start) {
                    (Some(prev), true) => prev.clone(),
                    _ => PortfolioWeights::random(net, p, config.init_scale, &mut rng).params,
                };
                let mut objective = PortfolioObjective::new(net, p, &history);
                let report = ascend(&mut objective, &mut params, config.into(), round)?;
                fill_portfolio_window(series, idx, lags, &mut window);
                portfolio_raw(net, &params, &window, &mut y2, &mut bet);
                rescale_exposure(&mut bet);
                weights = Some(params);
                diag = Some(RoundDiagnostics {
                    iterations: report.iterations,
                    converged: report.converged,
                });
            }
        }
        let total = exposure(&bet);
        if !(total < 1.0) {
            return Err(Error::StrategyViolation {
                round,
                detail: format!("total exposure {total} is not below 1"),
            });
        }
        log_capital += dot(&bet, series.row(idx)).ln_1p();
        ratios.push(bet);
        path.push(log_capital);
        diagnostics.push(diag);
    }
    Ok(PortfolioRunResult {
        warmup: config.warmup,
        ratios,
        log_capital_path: path,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::forward;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_weights_give_zero_ratios() {
        let w = PortfolioWeights::zeros(NetworkConfig::new(2, 3).unwrap(), 4);
        assert_eq!(forward_portfolio(&[0.5, -0.2], &w).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn single_output_matches_single_network() {
        let net = NetworkConfig::new(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let single = NetworkWeights::random(net, 1.0, &mut rng);
        let u = [0.2, -0.7, 0.4];
        let p = forward_portfolio(&u, &PortfolioWeights::from_single(&single)).unwrap();
        assert_eq!(p, vec![forward(&u, &single).unwrap().output]);
    }

    #[test]
    fn identical_rows_give_identical_outputs() {
        let net = NetworkConfig::new(2, 3).unwrap();
        let row = vec![0.4, -0.9, 1.3];
        let w = PortfolioWeights::new(net, 2, vec![0.1, 0.5, -0.3, 0.2, 0.8, -0.6], [row.clone(), row].concat()).unwrap();
        let out = forward_portfolio(&[0.3, 0.6], &w).unwrap();
        assert_eq!(out[0], out[1]);
    }

    #[test]
    fn capital_step_examples() {
        assert_eq!(capital_step_portfolio(2.0, &[0.0, 0.0], &[0.4, -1.0]).unwrap(), 2.0);
        assert_abs_diff_eq!(
            capital_step_portfolio(1.0, &[0.3, -0.2], &[1.0, 1.0]).unwrap(),
            1.1,
            epsilon = 1e-15
        );
        assert!(matches!(
            capital_step_portfolio(1.0, &[0.5, 0.5], &[-1.0, -1.0]),
            Err(Error::StrategyViolation { .. })
        ));
        assert!(capital_step_portfolio(1.0, &[0.1], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn rescaling_caps_exposure() {
        let mut r = vec![0.9, -0.8, 0.3];
        rescale_exposure(&mut r);
        assert_abs_diff_eq!(exposure(&r), MAX_RATIO, epsilon = 1e-15);
        assert!(r[0] > 0.0 && r[1] < 0.0);
        let mut small = vec![0.2, -0.1];
        rescale_exposure(&mut small);
        assert_eq!(small, vec![0.2, -0.1]);
        let mut one = vec![-0.9995];
        rescale_exposure(&mut one);
        assert_eq!(one, vec![-MAX_RATIO]);
    }

    #[test]
    fn multi_movement_file_round_trip() {
        let text = "date,value_1,value_2\n2007-03-01,0.5,-0.25\n2007-03-02,0,1\n";
        let s = parse_multi_movements(text).unwrap();
        assert_eq!(s.assets(), 2);
        assert_eq!(s.len(), 2);
        assert_eq!(s.row(1), &[0.0, 1.0]);
        assert_eq!(s.asset(1), vec![-0.25, 1.0]);
        assert_eq!(parse_multi_movements(&format_multi_movements(&s)).unwrap(), s);
    }

    #[test]
    fn multi_movement_file_errors() {
        assert!(matches!(
            parse_multi_movements("2007-03-01,0.5,0.1\n2007-03-02,0.5\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_multi_movements("2007-03-01,1.5\n"),
            Err(Error::Validation { line: 1, .. })
        ));
        assert!(matches!(
            parse_multi_movements("2007-03-02,0.5\n2007-03-01,0.5\n"),
            Err(Error::Validation { line: 2, .. })
        ));
    }
}
