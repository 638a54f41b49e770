//! The bounded forecasting game.
//!
//! Each round Investor announces an investing ratio `alpha` in (-1, 1), Market
//! reveals a movement `x` in [-1, 1] and capital is multiplied by `1 + alpha * x`.
//! Capital is carried in log space; linear capital is derived on demand.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance kept from the open bound |alpha| < 1 wherever an optimizer could
/// drive a ratio onto +/-1.
pub const RATIO_MARGIN: f64 = 1e-3;

/// Largest ratio magnitude any optimizing strategy will announce.
pub const MAX_RATIO: f64 = 1.0 - RATIO_MARGIN;

/// Betting rounds (after warmup) at which the capital process is reported.
pub const DEFAULT_CHECKPOINTS: [usize; 3] = [100, 200, 300];

/// Clamps a ratio into `[-MAX_RATIO, MAX_RATIO]`.
pub fn clamp_ratio(ratio: f64) -> f64 {
    ratio.clamp(-MAX_RATIO, MAX_RATIO)
}

/// Market's moves, each inside [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MovementSeries {
    values: Vec<f64>,
    label: String,
}

impl MovementSeries {
    pub fn new(values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if let Some(&x) = values.iter().find(|x| !(-1.0..=1.0).contains(*x)) {
            return Err(Error::Domain {
                name: "movement",
                value: x,
                domain: "[-1, 1]",
            });
        }
        Ok(Self {
            values,
            label: label.into(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Investor's position after `round` rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GameState {
    pub round: usize,
    pub log_capital: f64,
}

impl Default for GameState {
    fn default() -> Self {
        Self::new()
    }
}

impl GameState {
    /// Round 0, capital exactly 1.
    pub fn new() -> Self {
        Self {
            round: 0,
            log_capital: 0.0,
        }
    }

    pub fn capital(&self) -> f64 {
        self.log_capital.exp()
    }

    /// Plays one round and returns the log increment `log(1 + alpha * x)`.
    pub fn play(&mut self, alpha: f64, x: f64) -> Result<f64> {
        check_ratio(alpha)?;
        check_movement(x)?;
        let increment = (alpha * x).ln_1p();
        self.round += 1;
        self.log_capital += increment;
        Ok(increment)
    }
}

fn check_ratio(alpha: f64) -> Result<()> {
    if alpha.is_finite() && alpha.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(-1, 1)",
        })
    }
}

fn check_movement(x: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::Domain {
            name: "x",
            value: x,
            domain: "[-1, 1]",
        })
    }
}

/// `K_n = K_{n-1} * (1 + alpha * x)`.
pub fn capital_step(capital_prev: f64, alpha: f64, x: f64) -> Result<f64> {
    if !(capital_prev.is_finite() && capital_prev > 0.0) {
        return Err(Error::Domain {
            name: "capital_prev",
            value: capital_prev,
            domain: "(0, inf)",
        });
    }
    check_ratio(alpha)?;
    check_movement(x)?;
    Ok(capital_prev * (1.0 + alpha * x))
}

/// `log K_n = sum_k log(1 + alpha_k * x_k)`.
pub fn log_capital(ratios: &[f64], movements: &MovementSeries) -> Result<f64> {
    if ratios.len() != movements.len() {
        return Err(Error::usage(format!(
            "{} ratios for {} movements",
            ratios.len(),
            movements.len()
        )));
    }
    let mut state = GameState::new();
    for (&alpha, &x) in ratios.iter().zip(movements.values()) {
        state.play(alpha, x)?;
    }
    Ok(state.log_capital)
}

/// Optimizer bookkeeping for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundDiagnostics {
    pub iterations: usize,
    pub converged: bool,
}

/// A ratio announced for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bet {
    pub ratio: f64,
    pub diagnostics: Option<RoundDiagnostics>,
}

impl Bet {
    pub fn plain(ratio: f64) -> Self {
        Self {
            ratio,
            diagnostics: None,
        }
    }
}

/// Investor's side of the protocol.
///
/// `bet` is called once per betting round with every movement revealed so far
/// (`past.len() == n - 1` at round `n`), and nothing else.
pub trait Strategy {
    fn bet(&mut self, past: &[f64]) -> Result<Bet>;
}

impl<F> Strategy for F
where
    F: FnMut(&[f64]) -> f64,
{
    fn bet(&mut self, past: &[f64]) -> Result<Bet> {
        Ok(Bet::plain(self(past)))
    }
}

/// The epsilon-strategy: the same ratio every round.
#[derive(Debug, Clone, Copy)]
pub struct ConstantRatio(pub f64);

impl Strategy for ConstantRatio {
    fn bet(&mut self, _past: &[f64]) -> Result<Bet> {
        Ok(Bet::plain(self.0))
    }
}

/// Log capital at a given betting round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub betting_round: usize,
    pub log_capital: f64,
}

/// Per-round ratios and the capital process of one run.
///
/// Index `i` of each vector is round `i + 1`. Warmup rounds carry ratio 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRunResult {
    pub warmup: usize,
    pub ratios: Vec<f64>,
    pub log_capital_path: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
    pub diagnostics: Vec<Option<RoundDiagnostics>>,
}

impl StrategyRunResult {
    pub fn betting_rounds(&self) -> usize {
        self.ratios.len() - self.warmup
    }

    pub fn final_log_capital(&self) -> f64 {
        self.log_capital_path.last().copied().unwrap_or(0.0)
    }

    /// Log capital after `betting_round` rounds of betting (warmup excluded).
    pub fn log_capital_at(&self, betting_round: usize) -> Option<f64> {
        if betting_round == 0 {
            return Some(0.0);
        }
        self.log_capital_path
            .get(self.warmup + betting_round - 1)
            .copied()
    }

    pub fn checkpoints_at(&self, rounds: &[usize]) -> Vec<Checkpoint> {
        rounds
            .iter()
            .filter_map(|&r| {
                self.log_capital_at(r).map(|log_capital| Checkpoint {
                    betting_round: r,
                    log_capital,
                })
            })
            .collect()
    }
}

/// Plays `strategy` against `movements`.
///
/// Rounds `1..=warmup` bet zero; afterwards the strategy sees `x_1..x_{n-1}`
/// and announces `alpha_n`, which must satisfy |alpha_n| < 1.
pub fn run_game<S: Strategy + ?Sized>(
    strategy: &mut S,
    movements: &MovementSeries,
    warmup: usize,
) -> Result<StrategyRunResult> {
    let xs = movements.values();
    if xs.len() <= warmup {
        return Err(Error::usage(format!(
            "series of length {} leaves no betting rounds after warmup {warmup}",
            xs.len()
        )));
    }

    let mut state = GameState::new();
    let mut ratios = Vec::with_capacity(xs.len());
    let mut path = Vec::with_capacity(xs.len());
    let mut diagnostics = Vec::with_capacity(xs.len());

    for (idx, &x) in xs.iter().enumerate() {
        let round = idx + 1;
        let bet = if round <= warmup {
            Bet::plain(0.0)
        } else {
            strategy.bet(&xs[..idx])?
        };
        if !(bet.ratio.is_finite() && bet.ratio.abs() < 1.0) {
            return Err(Error::StrategyViolation {
                round,
                detail: format!("ratio {} outside (-1, 1)", bet.ratio),
            });
        }
        state.play(bet.ratio, x)?;
        ratios.push(bet.ratio);
        path.push(state.log_capital);
        diagnostics.push(bet.diagnostics);
    }

    let mut result = StrategyRunResult {
        warmup,
        ratios,
        log_capital_path: path,
        checkpoints: Vec::new(),
        diagnostics,
    };
    result.checkpoints = result.checkpoints_at(&DEFAULT_CHECKPOINTS);
    Ok(result)
}
