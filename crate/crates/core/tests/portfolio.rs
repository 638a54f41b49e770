use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sosnn_core::data::{gen_ar1, normalize, NoiseSpec};
use sosnn_core::neural::NetworkConfig;
use sosnn_core::portfolio::{
    capital_step_portfolio, exposure, format_multi_movements, parse_multi_movements, rescale_exposure,
    run_portfolio_sosnn, MultiAssetSeries,
};
use sosnn_core::sosnn::{run_sosnn, SosnnConfig};
use sosnn_core::MAX_RATIO;

fn ar1_movements(len: usize, seed: u64) -> Vec<f64> {
    let raw = gen_ar1(len, &NoiseSpec::new(seed));
    normalize(&raw, &raw, "ar1").unwrap().values().to_vec()
}

#[test]
fn one_asset_portfolio_is_the_single_asset_run() {
    let xs = ar1_movements(90, 17);
    let multi = MultiAssetSeries::new(Vec::new(), 1, xs.clone()).unwrap();
    let series = sosnn_core::MovementSeries::new(xs, "ar1").unwrap();
    for (l, m) in [(1, 2), (2, 3)] {
        let config = SosnnConfig::new(NetworkConfig::new(l, m).unwrap(), 5);
        let single = run_sosnn(&series, &config).unwrap();
        let multi = run_portfolio_sosnn(&multi, &config).unwrap();
        let flat: Vec<f64> = multi.ratios.iter().map(|r| r[0]).collect();
        assert_eq!(flat, single.ratios, "L={l} M={m}");
        assert_eq!(multi.log_capital_path, single.log_capital_path);
    }
}

#[test]
fn two_assets_stay_solvent() {
    let a = ar1_movements(70, 1);
    let b = ar1_movements(70, 2);
    let values: Vec<f64> = a.iter().zip(&b).flat_map(|(x, y)| [*x, *y]).collect();
    let series = MultiAssetSeries::new(Vec::new(), 2, values).unwrap();
    let config = SosnnConfig::new(NetworkConfig::new(1, 3).unwrap(), 9);
    let run = run_portfolio_sosnn(&series, &config).unwrap();
    assert_eq!(run.ratios.len(), 70);
    assert!(run.ratios.iter().all(|r| exposure(r) < 1.0));
    assert!(run.log_capital_path.iter().all(|v| v.is_finite()));
    assert_eq!(series.asset(1), b);
}

#[test]
fn rescaling_under_random_stress_keeps_capital_positive() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut log_k = 0.0f64;
    for _ in 0..1_000_000 {
        let p = rng.random_range(1..=4);
        let mut r: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let x: Vec<f64> = (0..p).map(|_| if rng.random_bool(0.5) { 1.0 } else { rng.random_range(-1.0..=1.0) }).collect();
        rescale_exposure(&mut r);
        assert!(exposure(&r) < 1.0);
        let k = capital_step_portfolio(1.0, &r, &x).unwrap();
        assert!(k > 0.0);
        log_k += k.ln();
    }
    assert!(log_k.is_finite());
}

#[test]
fn multi_asset_file_round_trip() {
    let text = "date,a,b\n2021-03-01,0.5,-0.25\n2021-03-02,-1,1\n";
    let series = parse_multi_movements(text).unwrap();
    assert_eq!(series.assets(), 2);
    assert_eq!(series.row(1), &[-1.0, 1.0]);
    let again = parse_multi_movements(&format_multi_movements(&series)).unwrap();
    assert_eq!(again, series);
    assert!(parse_multi_movements("2021-03-01,0.5\n2021-03-02,0.1,0.2\n").is_err());
}

proptest! {
    #[test]
    fn rescaled_exposure_is_bounded(r in prop::collection::vec(-5.0f64..5.0, 1..8)) {
        let mut scaled = r.clone();
        rescale_exposure(&mut scaled);
        let total = exposure(&r);
        if total >= MAX_RATIO {
            prop_assert!((exposure(&scaled) - MAX_RATIO).abs() <= 1e-12);
            for (a, b) in r.iter().zip(&scaled) {
                prop_assert!(a.signum() == b.signum() || *a == 0.0);
            }
        } else {
            prop_assert_eq!(scaled, r);
        }
    }
}
