//! Sequential optimizing strategy with a neural network.
//!
//! Before round `n` the network weights are fitted by gradient ascent to the
//! log capital the network would have earned on rounds `L+1 ..= n-1`, and the
//! bet is the fitted network's output on the latest window.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{clamp_ratio, run_game, Bet, MovementSeries, RoundDiagnostics, Strategy, StrategyRunResult};
use crate::neural::{
    fill_window, output_raw, phi_gradient_raw, phi_raw, AnnealingSchedule, History, NetworkConfig,
    NetworkWeights, PhiScratch,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SosnnConfig {
    pub net: NetworkConfig,
    pub schedule: AnnealingSchedule,
    /// Stop once every weight increment is below this in absolute value.
    pub weight_tolerance: f64,
    pub max_iterations: usize,
    pub warmup: usize,
    /// Initial weights are uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
    /// Start each round from the previous round's optimum instead of a fresh
    /// random draw.
    pub warm_start: bool,
}

impl SosnnConfig {
    pub fn new(net: NetworkConfig, seed: u64) -> Self {
        Self {
            net,
            schedule: AnnealingSchedule::default(),
            weight_tolerance: 1e-4,
            max_iterations: 10_000,
            warmup: 20,
            init_scale: 0.1,
            seed,
            warm_start: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.weight_tolerance > 0.0) {
            return Err(Error::usage("weight_tolerance must be positive"));
        }
        if self.max_iterations == 0 {
            return Err(Error::usage("max_iterations must be at least 1"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::usage("init_scale must be positive"));
        }
        AnnealingSchedule::new(self.schedule.beta0, self.schedule.tau)?;
        NetworkConfig::new(self.net.inputs, self.net.hidden)?;
        Ok(())
    }
}

/// Outcome of one gradient-ascent run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub converged: bool,
    /// Euclidean norm of the last gradient evaluated.
    pub gradient_norm: f64,
    pub objective_start: f64,
    pub objective_end: f64,
    /// The final iterate scored below the start and was discarded.
    pub reverted: bool,
}

/// A differentiable objective over a flat parameter vector.
pub trait Objective {
    fn value(&mut self, params: &[f64]) -> f64;
    fn gradient(&mut self, params: &[f64], grad: &mut [f64]);
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct AscentSettings {
    pub schedule: AnnealingSchedule,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl From<&SosnnConfig> for AscentSettings {
    fn from(c: &SosnnConfig) -> Self {
        Self {
            schedule: c.schedule,
            tolerance: c.weight_tolerance,
            max_iterations: c.max_iterations,
        }
    }
}

/// Plain annealed gradient ascent `w <- w + beta(s) grad(w)`, `s` counted
/// from 0 within this call. Stops when the max-norm of the increment falls
/// below the tolerance. If the end point scores below the start, the start
/// is returned.
pub(crate) fn ascend<O: Objective>(
    objective: &mut O,
    params: &mut [f64],
    settings: AscentSettings,
    round: usize,
) -> Result<ConvergenceReport> {
    let start = objective.value(params);
    let init = params.to_vec();
    let mut grad = vec![0.0; params.len()];
    let mut iterations = 0;
    let mut converged = false;

    for step in 0..settings.max_iterations {
        objective.gradient(params, &mut grad);
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric {
                round,
                detail: format!("non-finite gradient at iteration {step}"),
            });
        }
        let beta = settings.schedule.beta(step);
        let mut largest = 0.0f64;
        for (w, g) in params.iter_mut().zip(&grad) {
            let delta = beta * g;
            *w += delta;
            largest = largest.max(delta.abs());
        }
        iterations = step + 1;
        if largest < settings.tolerance {
            converged = true;
            break;
        }
    }
    let gradient_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();

    if params.iter().any(|w| !w.is_finite()) {
        return Err(Error::Numeric {
            round,
            detail: "weights diverged".into(),
        });
    }
    let mut end = objective.value(params);
    let mut reverted = false;
    if end.is_nan() || end < start {
        params.copy_from_slice(&init);
        end = start;
        reverted = true;
    }
    if end.is_nan() {
        return Err(Error::Numeric {
            round,
            detail: "objective is NaN".into(),
        });
    }
    Ok(ConvergenceReport {
        iterations,
        converged,
        gradient_norm,
        objective_start: start,
        objective_end: end,
        reverted,
    })
}

/// The log-capital objective of a single-output network.
pub(crate) struct PhiObjective<'a> {
    config: NetworkConfig,
    history: &'a History,
    scratch: PhiScratch,
}

impl<'a> PhiObjective<'a> {
    pub(crate) fn new(config: NetworkConfig, history: &'a History) -> Self {
        Self {
            config,
            history,
            scratch: PhiScratch::new(config),
        }
    }
}

impl Objective for PhiObjective<'_> {
    fn value(&mut self, params: &[f64]) -> f64 {
        let mut y2 = vec![0.0; self.config.hidden];
        phi_raw(self.config, params, self.history, &mut y2)
    }

    fn gradient(&mut self, params: &[f64], grad: &mut [f64]) {
        phi_gradient_raw(self.config, params, self.history, grad, &mut self.scratch, |_, _| {});
    }
}

/// Fits the weights to `history` starting from `init`.
pub fn optimize_weights(
    history: &History,
    config: &SosnnConfig,
    init: &NetworkWeights,
) -> Result<(NetworkWeights, ConvergenceReport)> {
    config.validate()?;
    if history.is_empty() {
        return Err(Error::usage("cannot optimize over an empty history"));
    }
    if init.config() != config.net || history.inputs() != config.net.inputs {
        return Err(Error::usage("initial weights or history do not match the network shape"));
    }
    let mut params = init.params().to_vec();
    let mut objective = PhiObjective::new(config.net, history);
    let report = ascend(&mut objective, &mut params, config.into(), history.len())?;
    Ok((NetworkWeights::from_params(config.net, params)?, report))
}

/// Round-by-round state of the strategy.
pub struct SosnnStrategy {
    config: SosnnConfig,
    rng: ChaCha8Rng,
    history: History,
    weights: Option<Vec<f64>>,
    y2: Vec<f64>,
    window: Vec<f64>,
}

impl SosnnStrategy {
    pub fn new(config: SosnnConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            history: History::new(config.net.inputs),
            weights: None,
            y2: vec![0.0; config.net.hidden],
            window: vec![0.0; config.net.inputs],
            config,
        })
    }

    /// Weights used for the most recent bet.
    pub fn weights(&self) -> Option<NetworkWeights> {
        self.weights
            .as_ref()
            .map(|p| NetworkWeights::from_params(self.config.net, p.clone()).expect("shape is fixed"))
    }

    fn initial_params(&mut self) -> Vec<f64> {
        match (&self.weights, self.config.warm_start) {
            (Some(prev), true) => prev.clone(),
            _ => NetworkWeights::random(self.config.net, self.config.init_scale, &mut self.rng).into_params(),
        }
    }
}

impl Strategy for SosnnStrategy {
    fn bet(&mut self, past: &[f64]) -> Result<Bet> {
        let l = self.config.net.inputs;
        if past.len() < l {
            return Err(Error::usage(format!(
                "round {} has no full window of {l} movements",
                past.len() + 1
            )));
        }
        // pairs (u_{k-1}, x_k) for every k in L+1 ..= n-1
        let first_missing = l + self.history.len();
        for idx in first_missing..past.len() {
            self.history.push_from_past(past, idx);
        }
        if self.history.is_empty() {
            return Ok(Bet::plain(0.0));
        }

        let mut params = self.initial_params();
        let round = past.len() + 1;
        let mut objective = PhiObjective::new(self.config.net, &self.history);
        let report = ascend(&mut objective, &mut params, (&self.config).into(), round)?;

        fill_window(past, past.len(), &mut self.window);
        let out = output_raw(self.config.net, &params, &self.window, &mut self.y2);
        self.weights = Some(params);
        Ok(Bet {
            ratio: clamp_ratio(out),
            diagnostics: Some(RoundDiagnostics {
                iterations: report.iterations,
                converged: report.converged,
            }),
        })
    }
}

pub fn run_sosnn(movements: &MovementSeries, config: &SosnnConfig) -> Result<StrategyRunResult> {
    config.validate()?;
    if config.warmup < config.net.inputs {
        return Err(Error::usage(format!(
            "warmup {} is shorter than the input window L={}",
            config.warmup, config.net.inputs
        )));
    }
    if movements.len() < config.warmup + 2 {
        return Err(Error::usage(format!(
            "series of length {} is too short for warmup {}",
            movements.len(),
            config.warmup
        )));
    }
    let mut strategy = SosnnStrategy::new(*config)?;
    run_game(&mut strategy, movements, config.warmup)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(l: usize, m: usize) -> SosnnConfig {
        SosnnConfig::new(NetworkConfig::new(l, m).unwrap(), 7)
    }

    #[test]
    fn zero_movements_leave_init_unchanged() {
        let c = cfg(2, 3);
        let h = History::from_movements(&[0.0; 8], 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = NetworkWeights::random(c.net, 0.1, &mut rng);
        let (out, report) = optimize_weights(&h, &c, &init).unwrap();
        assert_eq!(out, init);
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn origin_stays_at_origin() {
        let c = cfg(2, 3);
        let h = History::from_movements(&[0.3, -0.5, 0.8, 0.1, -0.9, 0.4], 2);
        let init = NetworkWeights::zeros(c.net);
        let (out, report) = optimize_weights(&h, &c, &init).unwrap();
        assert_eq!(out, init);
        assert_eq!(report.iterations, 1);
        assert!(report.converged);
    }

    #[test]
    fn empty_history_is_rejected() {
        let c = cfg(1, 1);
        assert!(optimize_weights(&History::new(1), &c, &NetworkWeights::zeros(c.net)).is_err());
    }

    #[test]
    fn iteration_cap_respected() {
        let mut c = cfg(1, 2);
        c.max_iterations = 3;
        c.weight_tolerance = 1e-300;
        let h = History::from_movements(&[0.3, 0.5, 0.8, 0.1, 0.9, 0.4], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let init = NetworkWeights::random(c.net, 0.1, &mut rng);
        let (_, report) = optimize_weights(&h, &c, &init).unwrap();
        assert_eq!(report.iterations, 3);
        assert!(!report.converged);
    }

    #[test]
    fn short_series_rejected() {
        let c = cfg(1, 1);
        let xs = MovementSeries::new(vec![0.1; 21], "short").unwrap();
        assert!(matches!(run_sosnn(&xs, &c), Err(Error::Usage(_))));
        let mut c2 = cfg(3, 1);
        c2.warmup = 2;
        let xs = MovementSeries::new(vec![0.1; 30], "x").unwrap();
        assert!(run_sosnn(&xs, &c2).is_err());
    }

    #[test]
    fn all_zero_movements_give_flat_capital() {
        let xs = MovementSeries::new(vec![0.0; 40], "zeros").unwrap();
        let r = run_sosnn(&xs, &cfg(2, 3)).unwrap();
        assert!(r.log_capital_path.iter().all(|&v| v == 0.0));
    }
}
