//! Markovian proportional betting (MKV0, MKV1, MKV2).
//!
//! Past rounds are split into buckets by the sign pattern of the preceding
//! `order` movements, a log-optimal constant ratio is fitted per bucket, and
//! the bet is the ratio of the current round's bucket. A zero movement counts
//! as "+".

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{run_game, Bet, MovementSeries, Strategy, StrategyRunResult, MAX_RATIO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MarkovOrder(u8);

impl MarkovOrder {
    pub const ZERO: Self = Self(0);
    pub const ONE: Self = Self(1);
    pub const TWO: Self = Self(2);

    pub fn new(order: u8) -> Result<Self> {
        if order > 2 {
            return Err(Error::usage(format!("Markov order must be 0, 1 or 2, got {order}")));
        }
        Ok(Self(order))
    }

    pub fn order(self) -> usize {
        usize::from(self.0)
    }

    pub fn bucket_count(self) -> usize {
        1 << self.0
    }

    pub fn name(self) -> &'static str {
        ["MKV0", "MKV1", "MKV2"][usize::from(self.0)]
    }
}

/// Ratios per bucket. Order 1: `(+, -)`; order 2: `(++, +-, -+, --)` with the
/// older movement's sign first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketRatios {
    pub order: MarkovOrder,
    pub ratios: Vec<f64>,
}

/// Bucket of a round whose preceding `order` movements are `window`
/// (chronological order, most recent last).
pub fn bucket_index(window: &[f64], order: MarkovOrder) -> Result<usize> {
    if window.len() != order.order() {
        return Err(Error::usage(format!(
            "{} needs a window of {} movements, got {}",
            order.name(),
            order.order(),
            window.len()
        )));
    }
    Ok(window
        .iter()
        .fold(0, |acc, &x| (acc << 1) | usize::from(x < 0.0)))
}

fn slope(movements: &[f64], alpha: f64) -> f64 {
    movements.iter().map(|&x| x / (1.0 + alpha * x)).sum()
}

/// `sum_k log(1 + alpha x_k)`.
pub fn bucket_objective(movements: &[f64], alpha: f64) -> f64 {
    movements.iter().map(|&x| (alpha * x).ln_1p()).sum()
}

/// Log-optimal constant ratio over `[-MAX_RATIO, MAX_RATIO]`.
///
/// The objective is strictly concave once any movement is nonzero, so the
/// maximizer is an endpoint when the slope there points outward and otherwise
/// the root of the decreasing slope, found by bisection.
pub fn optimize_bucket(movements: &[f64]) -> f64 {
    if movements.iter().all(|&x| x == 0.0) {
        return 0.0;
    }
    if slope(movements, MAX_RATIO) >= 0.0 {
        return MAX_RATIO;
    }
    if slope(movements, -MAX_RATIO) <= 0.0 {
        return -MAX_RATIO;
    }
    let (mut lo, mut hi) = (-MAX_RATIO, MAX_RATIO);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if slope(movements, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Splits rounds with a full sign context (`k > order`) of `past` into buckets.
pub fn partition(past: &[f64], order: MarkovOrder) -> Vec<Vec<f64>> {
    let p = order.order();
    let mut buckets = vec![Vec::new(); order.bucket_count()];
    for idx in p..past.len() {
        let b = bucket_index(&past[idx - p..idx], order).expect("window has order length");
        buckets[b].push(past[idx]);
    }
    buckets
}

/// Ratios fitted on `past`, one per bucket. Empty buckets get 0.
pub fn fit(past: &[f64], order: MarkovOrder) -> BucketRatios {
    BucketRatios {
        order,
        ratios: partition(past, order).iter().map(|b| optimize_bucket(b)).collect(),
    }
}

pub struct MarkovStrategy {
    order: MarkovOrder,
    buckets: Vec<Vec<f64>>,
    seen: usize,
}

impl MarkovStrategy {
    pub fn new(order: MarkovOrder) -> Self {
        Self {
            order,
            buckets: vec![Vec::new(); order.bucket_count()],
            seen: 0,
        }
    }
}

impl Strategy for MarkovStrategy {
    fn bet(&mut self, past: &[f64]) -> Result<Bet> {
        let p = self.order.order();
        if past.len() < p {
            return Err(Error::usage(format!(
                "{} has no sign context at round {}",
                self.order.name(),
                past.len() + 1
            )));
        }
        for idx in self.seen.max(p)..past.len() {
            let b = bucket_index(&past[idx - p..idx], self.order)?;
            self.buckets[b].push(past[idx]);
        }
        self.seen = past.len();
        let current = bucket_index(&past[past.len() - p..], self.order)?;
        Ok(Bet::plain(optimize_bucket(&self.buckets[current])))
    }
}

pub fn run_mkv(movements: &MovementSeries, order: MarkovOrder, warmup: usize) -> Result<StrategyRunResult> {
    if warmup < order.order() || movements.len() <= warmup {
        return Err(Error::usage(format!(
            "{} needs warmup >= {} and a longer series than the warmup (len {}, warmup {warmup})",
            order.name(),
            order.order(),
            movements.len()
        )));
    }
    run_game(&mut MarkovStrategy::new(order), movements, warmup)
}
