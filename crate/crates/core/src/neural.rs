//! Three-layer tanh network without biases.
//!
//! `L` inputs feed `M` hidden tanh units, whose outputs feed a single tanh
//! output unit. The output lies strictly inside (-1, 1) and is used directly
//! as an investing ratio.
//!
//! Weights are stored in one flat parameter vector: the `M x L` hidden matrix
//! in row-major order, followed by the `M` output weights. Gradients use the
//! same layout.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of inputs `L`.
    pub inputs: usize,
    /// Number of hidden units `M`.
    pub hidden: usize,
}

impl NetworkConfig {
    pub fn new(inputs: usize, hidden: usize) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::usage(format!(
                "network needs L >= 1 and M >= 1, got L={inputs} M={hidden}"
            )));
        }
        Ok(Self { inputs, hidden })
    }

    pub fn hidden_len(&self) -> usize {
        self.inputs * self.hidden
    }

    pub fn param_count(&self) -> usize {
        self.hidden_len() + self.hidden
    }
}

/// Hidden weights `w12[i][j]` (unit `i`, input `j`) and output weights `w23[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkWeights {
    config: NetworkConfig,
    params: Vec<f64>,
}

impl NetworkWeights {
    pub fn new(config: NetworkConfig, hidden: Vec<f64>, output: Vec<f64>) -> Result<Self> {
        if hidden.len() != config.hidden_len() || output.len() != config.hidden {
            return Err(Error::usage(format!(
                "weights of shape ({}, {}) do not match L={} M={}",
                hidden.len(),
                output.len(),
                config.inputs,
                config.hidden
            )));
        }
        let mut params = hidden;
        params.extend(output);
        Self::from_params(config, params)
    }

    pub fn from_params(config: NetworkConfig, params: Vec<f64>) -> Result<Self> {
        if params.len() != config.param_count() {
            return Err(Error::usage(format!(
                "{} parameters for a network with {}",
                params.len(),
                config.param_count()
            )));
        }
        if params.iter().any(|w| !w.is_finite()) {
            return Err(Error::usage("network weights must be finite"));
        }
        Ok(Self { config, params })
    }

    pub fn zeros(config: NetworkConfig) -> Self {
        Self {
            config,
            params: vec![0.0; config.param_count()],
        }
    }

    /// Every weight drawn uniformly from `[-scale, scale]`, hidden layer first.
    pub fn random<R: Rng + ?Sized>(config: NetworkConfig, scale: f64, rng: &mut R) -> Self {
        let params = (0..config.param_count())
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self { config, params }
    }

    pub fn config(&self) -> NetworkConfig {
        self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn into_params(self) -> Vec<f64> {
        self.params
    }

    pub fn hidden_weights(&self) -> &[f64] {
        &self.params[..self.config.hidden_len()]
    }

    pub fn output_weights(&self) -> &[f64] {
        &self.params[self.config.hidden_len()..]
    }

    pub fn hidden_weight(&self, unit: usize, input: usize) -> f64 {
        self.params[unit * self.config.inputs + input]
    }

    pub fn output_weight(&self, unit: usize) -> f64 {
        self.params[self.config.hidden_len() + unit]
    }

    fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.config.inputs {
            return Err(Error::usage(format!(
                "window of length {} for a network with L={}",
                window.len(),
                self.config.inputs
            )));
        }
        Ok(())
    }
}

/// `u_{k-1} = (x_{k-1}, ..., x_{k-L})`, most recent movement first.
#[derive(Debug, Clone, PartialEq)]
pub struct InputWindow(Vec<f64>);

impl InputWindow {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    /// The window preceding the round after `past`, or `None` if fewer than
    /// `len` movements are known.
    pub fn from_past(past: &[f64], len: usize) -> Option<Self> {
        (past.len() >= len).then(|| Self(past.iter().rev().take(len).copied().collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for InputWindow {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Fills `window` with `(past[end-1], past[end-2], ..., past[end-L])`.
pub(crate) fn fill_window(past: &[f64], end: usize, window: &mut [f64]) {
    for (j, slot) in window.iter_mut().enumerate() {
        *slot = past[end - 1 - j];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub hidden_inputs: Vec<f64>,
    pub hidden_outputs: Vec<f64>,
    pub output_input: f64,
    pub output: f64,
}

pub fn forward(window: &[f64], weights: &NetworkWeights) -> Result<ForwardTrace> {
    weights.check_window(window)?;
    let NetworkConfig { inputs, hidden } = weights.config;
    let mut hidden_inputs = Vec::with_capacity(hidden);
    let mut hidden_outputs = Vec::with_capacity(hidden);
    for row in weights.hidden_weights().chunks_exact(inputs) {
        let i2 = dot(row, window);
        hidden_inputs.push(i2);
        hidden_outputs.push(i2.tanh());
    }
    let output_input = dot(weights.output_weights(), &hidden_outputs);
    Ok(ForwardTrace {
        hidden_inputs,
        hidden_outputs,
        output_input,
        output: output_input.tanh(),
    })
}

/// Network output `f(u, w)` only.
pub fn output(window: &[f64], weights: &NetworkWeights) -> Result<f64> {
    weights.check_window(window)?;
    let mut scratch = vec![0.0; weights.config.hidden];
    Ok(output_raw(weights.config, &weights.params, window, &mut scratch))
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc + x * y)
}

/// Forward pass on raw parameters; leaves the hidden outputs in `y2`.
#[inline]
pub(crate) fn output_raw(config: NetworkConfig, params: &[f64], window: &[f64], y2: &mut [f64]) -> f64 {
    let (w12, w23) = params.split_at(config.hidden_len());
    for (y, row) in y2.iter_mut().zip(w12.chunks_exact(config.inputs)) {
        *y = dot(row, window).tanh();
    }
    dot(w23, y2).tanh()
}

/// Pairs `(u_{k-1}, x_k)` over which the log-capital objective is summed.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct History {
    inputs: usize,
    windows: Vec<f64>,
    movements: Vec<f64>,
}

impl History {
    pub fn new(inputs: usize) -> Self {
        Self {
            inputs,
            windows: Vec::new(),
            movements: Vec::new(),
        }
    }

    /// All pairs with a full window: `k = L+1 ..= xs.len()` (1-based).
    pub fn from_movements(xs: &[f64], inputs: usize) -> Self {
        let mut h = Self::new(inputs);
        for k in inputs..xs.len() {
            h.push_from_past(xs, k);
        }
        h
    }

    pub fn push(&mut self, window: &[f64], movement: f64) -> Result<()> {
        if window.len() != self.inputs {
            return Err(Error::usage(format!(
                "window of length {} in a history with L={}",
                window.len(),
                self.inputs
            )));
        }
        self.windows.extend_from_slice(window);
        self.movements.push(movement);
        Ok(())
    }

    /// Appends `(u_{k-1}, x_k)` for the 0-based index `idx` of `x_k` in `xs`.
    pub(crate) fn push_from_past(&mut self, xs: &[f64], idx: usize) {
        let start = self.windows.len();
        self.windows.resize(start + self.inputs, 0.0);
        fill_window(xs, idx, &mut self.windows[start..]);
        self.movements.push(xs[idx]);
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn len(&self) -> usize {
        self.movements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.movements.is_empty()
    }

    pub fn movements(&self) -> &[f64] {
        &self.movements
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.windows
            .chunks_exact(self.inputs.max(1))
            .zip(self.movements.iter().copied())
    }

    fn check(&self, config: NetworkConfig) -> Result<()> {
        if self.inputs != config.inputs {
            return Err(Error::usage(format!(
                "history with L={} for a network with L={}",
                self.inputs, config.inputs
            )));
        }
        Ok(())
    }
}

/// `phi(w) = sum_k log(1 + f(u_{k-1}, w) x_k)`.
pub fn phi_objective(weights: &NetworkWeights, history: &History) -> Result<f64> {
    history.check(weights.config)?;
    let mut y2 = vec![0.0; weights.config.hidden];
    Ok(phi_raw(weights.config, &weights.params, history, &mut y2))
}

pub(crate) fn phi_raw(config: NetworkConfig, params: &[f64], history: &History, y2: &mut [f64]) -> f64 {
    history
        .iter()
        .map(|(u, x)| (output_raw(config, params, u, y2) * x).ln_1p())
        .sum()
}

/// Gradient of an objective with per-round diagnostics.
///
/// For the log-capital objective `delta1[k]` is the output-layer term and
/// `delta2[k][i]` the hidden-layer term of round `k`. For the squared error
/// they hold the single sample's `eps1` and `eps2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGradient {
    pub gradient: NetworkWeights,
    pub delta1: Vec<f64>,
    pub delta2: Vec<Vec<f64>>,
}

impl WeightGradient {
    pub fn max_abs(&self) -> f64 {
        self.gradient.params.iter().fold(0.0, |m, g| m.max(g.abs()))
    }
}

/// Analytic gradient of `phi`:
///
/// `delta1 = x_k / (1 + f x_k) * (1 - tanh^2 I3)`,
/// `dphi/dw23_i = sum_k delta1 y2_i`,
/// `delta2_i = delta1 w23_i (1 - tanh^2 I2_i)`,
/// `dphi/dw12_ij = sum_k delta2_i u_j`.
pub fn phi_gradient(weights: &NetworkWeights, history: &History) -> Result<WeightGradient> {
    history.check(weights.config)?;
    let config = weights.config;
    let mut grad = vec![0.0; config.param_count()];
    let mut scratch = PhiScratch::new(config);
    let mut delta1 = Vec::with_capacity(history.len());
    let mut delta2 = Vec::with_capacity(history.len());
    phi_gradient_raw(config, &weights.params, history, &mut grad, &mut scratch, |d1, d2| {
        delta1.push(d1);
        delta2.push(d2.to_vec());
    });
    Ok(WeightGradient {
        gradient: NetworkWeights { config, params: grad },
        delta1,
        delta2,
    })
}

pub(crate) struct PhiScratch {
    y2: Vec<f64>,
    d2: Vec<f64>,
}

impl PhiScratch {
    pub(crate) fn new(config: NetworkConfig) -> Self {
        Self {
            y2: vec![0.0; config.hidden],
            d2: vec![0.0; config.hidden],
        }
    }
}

/// Accumulation order is round order, fixed for reproducibility.
#[inline]
pub(crate) fn phi_gradient_raw(
    config: NetworkConfig,
    params: &[f64],
    history: &History,
    grad: &mut [f64],
    scratch: &mut PhiScratch,
    mut observe: impl FnMut(f64, &[f64]),
) {
    grad.fill(0.0);
    let l = config.inputs;
    let w23 = &params[config.hidden_len()..];
    let (g12, g23) = grad.split_at_mut(config.hidden_len());
    let PhiScratch { y2, d2 } = scratch;
    for (u, x) in history.iter() {
        let t = output_raw(config, params, u, y2);
        let delta1 = x / (1.0 + t * x) * (1.0 - t * t);
        for i in 0..config.hidden {
            let yi = y2[i];
            g23[i] += delta1 * yi;
            let d = delta1 * w23[i] * (1.0 - yi * yi);
            d2[i] = d;
            let row = &mut g12[i * l..(i + 1) * l];
            for (g, uj) in row.iter_mut().zip(u) {
                *g += d * uj;
            }
        }
        observe(delta1, d2);
    }
}

/// Gradient of `E = 0.5 (T - y3)^2` for one sample:
///
/// `eps1 = -(T - y3)(1 - tanh^2 I3)`, `dE/dw23_i = eps1 y2_i`,
/// `eps2_i = eps1 w23_i (1 - tanh^2 I2_i)`, `dE/dw12_ij = eps2_i u_j`.
pub fn bp_error_gradient(weights: &NetworkWeights, window: &[f64], target: f64) -> Result<WeightGradient> {
    weights.check_window(window)?;
    let config = weights.config;
    let trace = forward(window, weights)?;
    let t = trace.output;
    let eps1 = -(target - t) * (1.0 - t * t);
    let mut grad = vec![0.0; config.param_count()];
    let mut eps2 = vec![0.0; config.hidden];
    let (g12, g23) = grad.split_at_mut(config.hidden_len());
    for (i, &yi) in trace.hidden_outputs.iter().enumerate() {
        g23[i] = eps1 * yi;
        eps2[i] = eps1 * weights.output_weight(i) * (1.0 - yi * yi);
        for (j, &uj) in window.iter().enumerate() {
            g12[i * config.inputs + j] = eps2[i] * uj;
        }
    }
    Ok(WeightGradient {
        gradient: NetworkWeights { config, params: grad },
        delta1: vec![eps1],
        delta2: vec![eps2],
    })
}

/// One online back-propagation update `w <- w - beta dE/dw`, in place.
/// Uses the same arithmetic as [`bp_error_gradient`].
pub(crate) fn bp_step(config: NetworkConfig, params: &mut [f64], window: &[f64], target: f64, beta: f64, y2: &mut [f64]) {
    let t = output_raw(config, params, window, y2);
    let eps1 = -(target - t) * (1.0 - t * t);
    let l = config.inputs;
    let (w12, w23) = params.split_at_mut(config.hidden_len());
    for i in 0..config.hidden {
        let yi = y2[i];
        // eps2 uses the output weight before this step's update
        let eps2 = eps1 * w23[i] * (1.0 - yi * yi);
        w23[i] -= beta * (eps1 * yi);
        for (w, uj) in w12[i * l..(i + 1) * l].iter_mut().zip(window) {
            *w -= beta * (eps2 * uj);
        }
    }
}

/// Search-then-converge learning rate `beta(s) = beta0 / (1 + s / tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnealingSchedule {
    pub beta0: f64,
    pub tau: f64,
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        Self { beta0: 1.0, tau: 5.0 }
    }
}

impl AnnealingSchedule {
    pub fn new(beta0: f64, tau: f64) -> Result<Self> {
        if !(beta0 > 0.0 && tau > 0.0 && beta0.is_finite() && tau.is_finite()) {
            return Err(Error::usage(format!(
                "annealing needs beta0 > 0 and tau > 0, got {beta0} and {tau}"
            )));
        }
        Ok(Self { beta0, tau })
    }

    pub fn beta(&self, step: usize) -> f64 {
        self.beta0 / (1.0 + step as f64 / self.tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar_net(w1: f64, w2: f64) -> NetworkWeights {
        NetworkWeights::new(NetworkConfig::new(1, 1).unwrap(), vec![w1], vec![w2]).unwrap()
    }

    fn history(l: usize, pairs: &[(&[f64], f64)]) -> History {
        let mut h = History::new(l);
        for (u, x) in pairs {
            h.push(u, *x).unwrap();
        }
        h
    }

    #[test]
    fn forward_examples() {
        let cfg = NetworkConfig::new(3, 4).unwrap();
        let zero = NetworkWeights::zeros(cfg);
        assert_eq!(forward(&[0.3, -0.2, 0.9], &zero).unwrap().output, 0.0);
        assert_eq!(forward(&[0.0], &scalar_net(1.0, 1.0)).unwrap().output, 0.0);
        let t = forward(&[1.0], &scalar_net(10.0, 1.0)).unwrap();
        assert_abs_diff_eq!(t.output, 0.7615941542, epsilon = 1e-10);
        assert_eq!(t.output, 10f64.tanh().tanh());
        assert_eq!(t.hidden_outputs[0], t.hidden_inputs[0].tanh());
    }

    #[test]
    fn forward_rejects_wrong_window() {
        assert!(matches!(
            forward(&[0.1, 0.2], &scalar_net(1.0, 1.0)),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn weights_shape_checked() {
        let cfg = NetworkConfig::new(2, 3).unwrap();
        assert!(NetworkWeights::new(cfg, vec![0.0; 5], vec![0.0; 3]).is_err());
        assert!(NetworkWeights::new(cfg, vec![0.0; 6], vec![0.0; 2]).is_err());
        assert!(NetworkWeights::new(cfg, vec![f64::NAN; 6], vec![0.0; 3]).is_err());
        assert!(NetworkConfig::new(0, 1).is_err());
        let w = NetworkWeights::new(cfg, (0..6).map(f64::from).collect(), vec![7.0, 8.0, 9.0]).unwrap();
        assert_eq!(w.hidden_weight(1, 0), 2.0);
        assert_eq!(w.output_weight(2), 9.0);
    }

    #[test]
    fn window_is_most_recent_first() {
        let w = InputWindow::from_past(&[0.1, 0.2, 0.3], 2).unwrap();
        assert_eq!(w.values(), &[0.3, 0.2]);
        assert!(InputWindow::from_past(&[0.1], 2).is_none());
        let h = History::from_movements(&[0.1, 0.2, 0.3, 0.4], 2);
        let pairs: Vec<_> = h.iter().map(|(u, x)| (u.to_vec(), x)).collect();
        assert_eq!(pairs, vec![(vec![0.2, 0.1], 0.3), (vec![0.3, 0.2], 0.4)]);
    }

    #[test]
    fn phi_examples() {
        let cfg = NetworkConfig::new(2, 3).unwrap();
        let h = history(2, &[(&[0.4, -0.3], 0.5), (&[0.5, 0.4], -0.9)]);
        assert_eq!(phi_objective(&NetworkWeights::zeros(cfg), &h).unwrap(), 0.0);

        let one = history(1, &[(&[1.0], 1.0)]);
        assert_abs_diff_eq!(
            phi_objective(&scalar_net(10.0, 1.0), &one).unwrap(),
            0.5662191685,
            epsilon = 1e-10
        );

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = NetworkWeights::random(cfg, 2.0, &mut rng);
        let flat = history(2, &[(&[0.4, -0.3], 0.0), (&[0.5, 0.4], 0.0)]);
        assert_eq!(phi_objective(&w, &flat).unwrap(), 0.0);
    }

    #[test]
    fn origin_is_stationary_for_phi() {
        let cfg = NetworkConfig::new(3, 5).unwrap();
        let h = History::from_movements(&[0.3, -0.7, 0.2, 0.9, -0.1, 0.4], 3);
        let g = phi_gradient(&NetworkWeights::zeros(cfg), &h).unwrap();
        assert!(g.max_abs() < 1e-15);
        assert_eq!(g.delta1.len(), h.len());
    }

    #[test]
    fn zero_movements_give_zero_phi_gradient() {
        let cfg = NetworkConfig::new(2, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = NetworkWeights::random(cfg, 0.5, &mut rng);
        let h = history(2, &[(&[0.4, -0.3], 0.0), (&[0.5, 0.4], 0.0)]);
        assert_eq!(phi_gradient(&w, &h).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn bp_gradient_vanishes_at_target_and_origin() {
        let w = scalar_net(10.0, 1.0);
        let t = forward(&[1.0], &w).unwrap().output;
        assert_eq!(bp_error_gradient(&w, &[1.0], t).unwrap().max_abs(), 0.0);

        let origin = NetworkWeights::zeros(NetworkConfig::new(2, 2).unwrap());
        let g = bp_error_gradient(&origin, &[0.5, -0.5], 1.0).unwrap();
        assert_eq!(g.delta1, vec![-1.0]);
        assert!(g.max_abs() < 1e-15);
    }

    #[test]
    fn bp_step_matches_negative_gradient() {
        let cfg = NetworkConfig::new(3, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = NetworkWeights::random(cfg, 0.5, &mut rng);
        let u = [0.3, -0.8, 0.1];
        let g = bp_error_gradient(&w, &u, -1.0).unwrap();
        let mut params = w.params().to_vec();
        let mut y2 = vec![0.0; 4];
        bp_step(cfg, &mut params, &u, -1.0, 0.07, &mut y2);
        for ((after, before), gi) in params.iter().zip(w.params()).zip(g.gradient.params()) {
            assert_eq!(*after, before - 0.07 * gi);
        }
    }

    #[test]
    fn annealing_examples() {
        let s = AnnealingSchedule::new(1.0, 5.0).unwrap();
        assert_eq!(s.beta(0), 1.0);
        assert_eq!(s.beta(5), 0.5);
        assert_abs_diff_eq!(s.beta(45), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(s.beta(50) * 11.0, 1.0, epsilon = 1e-12);
        assert!(AnnealingSchedule::new(0.0, 5.0).is_err());
        assert!(AnnealingSchedule::new(1.0, -1.0).is_err());
    }

    #[test]
    fn annealing_is_strictly_decreasing() {
        let s = AnnealingSchedule::default();
        for step in 0..1000 {
            assert!(s.beta(step + 1) < s.beta(step));
        }
    }
}
