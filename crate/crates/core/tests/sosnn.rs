mod common;

use common::grid_argmax;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sosnn_core::data::{gen_ar1, normalize, NoiseSpec};
use sosnn_core::neural::{phi_objective, History, NetworkConfig, NetworkWeights};
use sosnn_core::sosnn::{optimize_weights, run_sosnn, SosnnConfig};
use sosnn_core::MovementSeries;

fn ar1(len: usize, seed: u64) -> MovementSeries {
    let raw = gen_ar1(len, &NoiseSpec::new(seed));
    normalize(&raw, &raw, format!("ar1/{seed}")).unwrap()
}

fn scalar_phi(h: &History, w1: f64, w2: f64) -> f64 {
    let net = NetworkConfig::new(1, 1).unwrap();
    phi_objective(&NetworkWeights::new(net, vec![w1], vec![w2]).unwrap(), h).unwrap()
}

#[test]
fn tiny_network_reaches_grid_optimum() {
    let xs = ar1(30, 3);
    let h = History::from_movements(xs.values(), 1);
    let net = NetworkConfig::new(1, 1).unwrap();
    let config = SosnnConfig::new(net, 0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let init = NetworkWeights::random(net, 0.1, &mut rng);
    let (out, report) = optimize_weights(&h, &config, &init).unwrap();
    let found = phi_objective(&out, &h).unwrap();

    // 101 x 101 grid over both weights in [-2, 2]
    let mut grid_best = f64::NEG_INFINITY;
    for i in 0..101 {
        let w1 = -2.0 + 4.0 * i as f64 / 100.0;
        let (_, v) = grid_argmax(|w2| scalar_phi(&h, w1, w2), -2.0, 2.0, 101);
        grid_best = grid_best.max(v);
    }
    assert!(found >= grid_best - 1e-3, "ascent {found} vs grid {grid_best}, {report:?}");
    assert!(report.objective_end >= report.objective_start - 1e-9);
}

#[test]
fn same_seed_is_bit_identical() {
    let xs = ar1(60, 1);
    let config = SosnnConfig::new(NetworkConfig::new(2, 3).unwrap(), 99);
    assert_eq!(run_sosnn(&xs, &config).unwrap(), run_sosnn(&xs, &config).unwrap());
}

#[test]
fn bets_depend_only_on_the_past() {
    let xs = ar1(70, 2);
    let config = SosnnConfig::new(NetworkConfig::new(2, 2).unwrap(), 5);
    let full = run_sosnn(&xs, &config).unwrap();
    for cut in [22, 35, 50] {
        let mut perturbed = xs.values().to_vec();
        for v in &mut perturbed[cut..] {
            *v = -*v * 0.5;
        }
        let other = run_sosnn(&MovementSeries::new(perturbed, "p").unwrap(), &config).unwrap();
        // alpha_n for n <= cut uses x_1..x_{n-1}, all untouched
        assert_eq!(full.ratios[..=cut], other.ratios[..=cut]);
    }
}

#[test]
fn cold_start_draws_fresh_weights_each_round() {
    let xs = ar1(40, 4);
    let mut config = SosnnConfig::new(NetworkConfig::new(1, 2).unwrap(), 12);
    config.warm_start = false;
    let cold = run_sosnn(&xs, &config).unwrap();
    assert_eq!(cold, run_sosnn(&xs, &config).unwrap());
    config.warm_start = true;
    let warm = run_sosnn(&xs, &config).unwrap();
    // the first betting round starts from the same draw in both modes
    assert_eq!(cold.ratios[20], warm.ratios[20]);
    assert_ne!(cold.ratios, warm.ratios);
}

#[test]
fn optimizer_never_loses_objective() {
    let mut checked = 0;
    for seed in 0..20 {
        let xs = ar1(60, 100 + seed);
        let h = History::from_movements(xs.values(), 2);
        let net = NetworkConfig::new(2, 4).unwrap();
        let mut config = SosnnConfig::new(net, seed);
        config.max_iterations = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = NetworkWeights::random(net, 0.8, &mut rng);
        // saturating overshoots surface as numeric errors, never as a silent loss
        let Ok((out, report)) = optimize_weights(&h, &config, &init) else {
            continue;
        };
        checked += 1;
        let before = phi_objective(&init, &h).unwrap();
        let after = phi_objective(&out, &h).unwrap();
        assert!(after >= before - 1e-9, "seed {seed}: {before} -> {after}");
        assert!(report.iterations <= 50);
    }
    assert!(checked >= 15, "only {checked} runs finished");
}

#[test]
fn ar1_capital_grows_on_average() {
    let config = |seed| SosnnConfig::new(NetworkConfig::new(1, 5).unwrap(), seed);
    let mean: f64 = (0..5)
        .map(|s| run_sosnn(&ar1(320, 1000 + s), &config(s)).unwrap().final_log_capital())
        .sum::<f64>()
        / 5.0;
    assert!(mean > 0.0, "mean final log capital {mean}");
}

#[test]
fn every_ratio_is_admissible() {
    let xs = ar1(120, 77);
    let r = run_sosnn(&xs, &SosnnConfig::new(NetworkConfig::new(3, 6).unwrap(), 1)).unwrap();
    assert!(r.ratios.iter().all(|a| a.abs() < 1.0));
    assert!(r.diagnostics[20..].iter().all(|d| d.is_some()));
    assert_eq!(r.checkpoints.len(), 1);
}
