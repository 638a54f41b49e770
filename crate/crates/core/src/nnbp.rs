//! Supervised back-propagation strategy.
//!
//! The network is trained online on a training period against the sign of
//! each day's movement, frozen, and then used unchanged to bet through a
//! separate investing period.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{clamp_ratio, run_game, Bet, MovementSeries, Strategy, StrategyRunResult};
use crate::neural::{bp_step, fill_window, output_raw, NetworkConfig, NetworkWeights};

/// Desired network output for a day with movement `x`: its sign.
pub fn target(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NnbpConfig {
    pub net: NetworkConfig,
    /// Constant learning rate of the online updates.
    pub learning_rate: f64,
    /// Training stops once the training error falls below this.
    pub error_threshold: f64,
    /// Cap on the number of single-sample updates.
    pub max_steps: usize,
    pub seed: u64,
    pub init_scale: f64,
}

impl NnbpConfig {
    pub fn new(net: NetworkConfig, learning_rate: f64, seed: u64) -> Self {
        Self {
            net,
            learning_rate,
            error_threshold: 1e-2,
            max_steps: 600_000,
            seed,
            init_scale: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        NetworkConfig::new(self.net.inputs, self.net.hidden)?;
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::usage("learning_rate must be positive"));
        }
        if !(self.error_threshold > 0.0) {
            return Err(Error::usage("error_threshold must be positive"));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::usage("init_scale must be positive"));
        }
        Ok(())
    }
}

/// Input windows paired with sign targets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    inputs: usize,
    windows: Vec<f64>,
    targets: Vec<f64>,
}

impl TrainingSet {
    pub fn new(inputs: usize) -> Self {
        Self {
            inputs,
            windows: Vec::new(),
            targets: Vec::new(),
        }
    }

    /// Pairs `(u_{k-1}, T_k)` for `k = L+1 ..= len`.
    pub fn from_movements(xs: &[f64], inputs: usize) -> Self {
        let mut set = Self::new(inputs);
        let mut window = vec![0.0; inputs];
        for idx in inputs..xs.len() {
            fill_window(xs, idx, &mut window);
            set.windows.extend_from_slice(&window);
            set.targets.push(f64::from(target(xs[idx])));
        }
        set
    }

    pub fn push(&mut self, window: &[f64], target: i8) -> Result<()> {
        if window.len() != self.inputs {
            return Err(Error::usage(format!(
                "window of length {} in a training set with L={}",
                window.len(),
                self.inputs
            )));
        }
        self.windows.extend_from_slice(window);
        self.targets.push(f64::from(target));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.windows
            .chunks_exact(self.inputs.max(1))
            .zip(self.targets.iter().copied())
    }
}

/// `E_k = 0.5 (T_k - y3_k)^2` for every pair.
pub fn per_day_error(weights: &NetworkWeights, training: &TrainingSet) -> Result<Vec<f64>> {
    check_shapes(weights.config(), training)?;
    let mut y2 = vec![0.0; weights.config().hidden];
    Ok(training
        .iter()
        .map(|(u, t)| {
            let diff = t - output_raw(weights.config(), weights.params(), u, &mut y2);
            0.5 * diff * diff
        })
        .collect())
}

/// `(1 / 2m) sum_k (T_k - y3_k)^2`.
pub fn training_error(weights: &NetworkWeights, training: &TrainingSet) -> Result<f64> {
    if training.is_empty() {
        return Err(Error::usage("training error over an empty training set"));
    }
    let errors = per_day_error(weights, training)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

fn check_shapes(net: NetworkConfig, training: &TrainingSet) -> Result<()> {
    if net.inputs != training.inputs {
        return Err(Error::usage(format!(
            "training set with L={} for a network with L={}",
            training.inputs, net.inputs
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingDiagnostics {
    /// Entry 0 is the error of the initial weights; entry `e` the error after
    /// the `e`-th pass through the training set.
    pub error_per_epoch: Vec<f64>,
    pub final_error: f64,
    /// `E_k` over the training set at the final weights.
    pub per_day_error: Vec<f64>,
    pub steps_used: usize,
    pub converged: bool,
}

/// Trains from weights drawn uniformly in `[-init_scale, init_scale]`.
pub fn train(training_movements: &MovementSeries, config: &NnbpConfig) -> Result<(NetworkWeights, TrainingDiagnostics)> {
    config.validate()?;
    let set = TrainingSet::from_movements(training_movements.values(), config.net.inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let init = NetworkWeights::random(config.net, config.init_scale, &mut rng);
    train_from(&set, config, init)
}

/// Online back-propagation cycling through the training set until the
/// training error drops below the threshold or the step cap is reached.
pub fn train_from(
    training: &TrainingSet,
    config: &NnbpConfig,
    init: NetworkWeights,
) -> Result<(NetworkWeights, TrainingDiagnostics)> {
    config.validate()?;
    if training.is_empty() {
        return Err(Error::usage("training period too short to form a single (window, target) pair"));
    }
    if init.config() != config.net {
        return Err(Error::usage("initial weights do not match the network shape"));
    }
    check_shapes(config.net, training)?;

    let net = config.net;
    let mut params = init.into_params();
    let mut y2 = vec![0.0; net.hidden];
    let mut steps = 0;
    let mut weights = NetworkWeights::from_params(net, params.clone())?;
    let mut error = training_error(&weights, training)?;
    let mut error_per_epoch = vec![error];
    let mut converged = error < config.error_threshold;

    while !converged && steps < config.max_steps {
        for (u, t) in training.iter() {
            if steps == config.max_steps {
                break;
            }
            bp_step(net, &mut params, u, t, config.learning_rate, &mut y2);
            steps += 1;
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric {
                round: steps,
                detail: "back-propagation weights diverged".into(),
            });
        }
        weights = NetworkWeights::from_params(net, params.clone())?;
        error = training_error(&weights, training)?;
        error_per_epoch.push(error);
        converged = error < config.error_threshold;
    }

    let per_day_error = per_day_error(&weights, training)?;
    Ok((
        weights,
        TrainingDiagnostics {
            error_per_epoch,
            final_error: error,
            per_day_error,
            steps_used: steps,
            converged,
        },
    ))
}

/// Bets the output of a frozen network.
pub struct FrozenNetwork {
    weights: NetworkWeights,
    y2: Vec<f64>,
    window: Vec<f64>,
}

impl FrozenNetwork {
    pub fn new(weights: NetworkWeights) -> Self {
        let net = weights.config();
        Self {
            weights,
            y2: vec![0.0; net.hidden],
            window: vec![0.0; net.inputs],
        }
    }
}

impl Strategy for FrozenNetwork {
    fn bet(&mut self, past: &[f64]) -> Result<Bet> {
        let l = self.window.len();
        if past.len() < l {
            return Err(Error::usage(format!(
                "round {} has no full window of {l} movements",
                past.len() + 1
            )));
        }
        fill_window(past, past.len(), &mut self.window);
        let out = output_raw(self.weights.config(), self.weights.params(), &self.window, &mut self.y2);
        Ok(Bet::plain(clamp_ratio(out)))
    }
}

/// Bets `f(u_{n-1}, w*)` with frozen weights for every round after warmup.
pub fn run_nnbp(weights: &NetworkWeights, movements: &MovementSeries, warmup: usize) -> Result<StrategyRunResult> {
    let l = weights.config().inputs;
    if warmup < l {
        return Err(Error::usage(format!(
            "warmup {warmup} leaves rounds without a full window of L={l}"
        )));
    }
    run_game(&mut FrozenNetwork::new(weights.clone()), movements, warmup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn target_examples() {
        assert_eq!(target(0.3), 1);
        assert_eq!(target(0.0), 0);
        assert_eq!(target(-0.001), -1);
    }

    #[test]
    fn training_error_examples() {
        let net = NetworkConfig::new(1, 1).unwrap();
        let mut set = TrainingSet::new(1);
        set.push(&[0.5], 1).unwrap();
        set.push(&[-0.5], -1).unwrap();
        assert_eq!(training_error(&NetworkWeights::zeros(net), &set).unwrap(), 0.5);

        let w = NetworkWeights::new(net, vec![10.0], vec![1.0]).unwrap();
        let mut one = TrainingSet::new(1);
        one.push(&[1.0], 1).unwrap();
        assert_abs_diff_eq!(training_error(&w, &one).unwrap(), 0.0284186736, epsilon = 1e-10);

        let mut zeros = TrainingSet::new(1);
        zeros.push(&[0.7], 0).unwrap();
        assert_eq!(training_error(&NetworkWeights::zeros(net), &zeros).unwrap(), 0.0);
    }

    #[test]
    fn training_error_rejects_empty_set() {
        let net = NetworkConfig::new(1, 1).unwrap();
        assert!(training_error(&NetworkWeights::zeros(net), &TrainingSet::new(1)).is_err());
    }

    #[test]
    fn zero_targets_converge_immediately() {
        let net = NetworkConfig::new(2, 3).unwrap();
        let set = TrainingSet::from_movements(&[0.0; 10], 2);
        let cfg = NnbpConfig::new(net, 0.1, 1);
        let (w, diag) = train_from(&set, &cfg, NetworkWeights::zeros(net)).unwrap();
        assert_eq!(w, NetworkWeights::zeros(net));
        assert!(diag.converged);
        assert_eq!(diag.steps_used, 0);
        assert_eq!(diag.final_error, 0.0);
        assert_eq!(diag.error_per_epoch, vec![0.0]);
    }

    #[test]
    fn step_cap_stops_mid_epoch() {
        let net = NetworkConfig::new(1, 2).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| if i % 3 == 0 { 0.4 } else { -0.6 }).collect();
        let set = TrainingSet::from_movements(&xs, 1);
        let mut cfg = NnbpConfig::new(net, 0.1, 1);
        cfg.max_steps = 25;
        cfg.error_threshold = 1e-12;
        let (_, diag) = train_from(&set, &cfg, NetworkWeights::zeros(net)).unwrap();
        assert_eq!(diag.steps_used, 25);
        assert!(!diag.converged);
        assert_eq!(diag.error_per_epoch.len(), 3);
        assert_eq!(diag.final_error, *diag.error_per_epoch.last().unwrap());
    }

    #[test]
    fn run_nnbp_needs_window() {
        let net = NetworkConfig::new(3, 1).unwrap();
        let xs = MovementSeries::new(vec![0.1; 10], "x").unwrap();
        assert!(run_nnbp(&NetworkWeights::zeros(net), &xs, 2).is_err());
        let r = run_nnbp(&NetworkWeights::zeros(net), &xs, 3).unwrap();
        assert!(r.log_capital_path.iter().all(|&v| v == 0.0));
    }
}
