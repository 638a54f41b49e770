//! Investing strategies for the bounded forecasting game.
//!
//! Investor bets a fraction `alpha_n` of current capital on Market's next
//! move `x_n` in [-1, 1]. This crate provides the game engine and three
//! families of strategies choosing `alpha_n` from past moves:
//!
//! - [`sosnn`]: a small tanh network refitted every round to maximize the log
//!   capital it would have earned so far;
//! - [`nnbp`]: the same network trained by back-propagation against the sign
//!   of each move on a separate training period, then frozen;
//! - [`markov`]: log-optimal constant ratios conditioned on the signs of the
//!   last zero, one or two moves.
//!
//! [`data`] generates AR(1)/ARMA(2,1) series and ingests price files, and
//! [`portfolio`] extends the network strategy to several assets.

pub mod data;
pub mod error;
pub mod game;
pub mod markov;
pub mod neural;
pub mod nnbp;
pub mod portfolio;
pub mod sosnn;

pub use error::{Error, Result};
pub use game::{
    capital_step, log_capital, run_game, Bet, ConstantRatio, GameState, MovementSeries, Strategy,
    StrategyRunResult, MAX_RATIO, RATIO_MARGIN,
};
