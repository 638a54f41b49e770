use proptest::prelude::*;
use sosnn_core::{capital_step, log_capital, run_game, Bet, ConstantRatio, GameState, MovementSeries};

fn movements() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..=1.0, 1..80)
}

fn ratios(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.999f64..=0.999, len)
}

struct Replay(Vec<f64>);

impl sosnn_core::Strategy for Replay {
    fn bet(&mut self, past: &[f64]) -> sosnn_core::Result<Bet> {
        Ok(Bet::plain(self.0[past.len()]))
    }
}

proptest! {
    #[test]
    fn capital_stays_positive((xs, alphas) in movements().prop_flat_map(|xs| {
        let n = xs.len();
        (Just(xs), ratios(n))
    })) {
        let mut capital = 1.0;
        let mut state = GameState::new();
        for (&a, &x) in alphas.iter().zip(&xs) {
            capital = capital_step(capital, a, x).unwrap();
            let inc = state.play(a, x).unwrap();
            prop_assert!(capital > 0.0);
            prop_assert!((inc - (1.0 + a * x).ln()).abs() <= 1e-12);
        }
        prop_assert!((state.log_capital - capital.ln()).abs() <= 1e-9);

        let series = MovementSeries::new(xs.clone(), "p").unwrap();
        let total = log_capital(&alphas, &series).unwrap();
        prop_assert!((total - state.log_capital).abs() <= 1e-12);

        let run = run_game(&mut Replay(alphas.clone()), &series, 0).unwrap();
        prop_assert_eq!(&run.ratios, &alphas);
        prop_assert!((run.final_log_capital() - state.log_capital).abs() <= 1e-12);
    }

    #[test]
    fn zero_strategy_keeps_unit_capital(xs in movements(), warmup in 0usize..5) {
        prop_assume!(xs.len() > warmup);
        let series = MovementSeries::new(xs, "z").unwrap();
        let run = run_game(&mut ConstantRatio(0.0), &series, warmup).unwrap();
        prop_assert!(run.log_capital_path.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn bets_depend_only_on_the_past(xs in movements(), cut in 0usize..80, warmup in 0usize..4) {
        prop_assume!(xs.len() > warmup);
        let cut = cut % xs.len();
        let mut altered = xs.clone();
        for x in &mut altered[cut..] {
            *x = -*x;
        }
        let strategy = |past: &[f64]| past.iter().sum::<f64>().tanh() * 0.9;
        let a = run_game(&mut { strategy }, &MovementSeries::new(xs, "a").unwrap(), warmup).unwrap();
        let b = run_game(&mut { strategy }, &MovementSeries::new(altered, "b").unwrap(), warmup).unwrap();
        prop_assert_eq!(&a.ratios[..=cut], &b.ratios[..=cut]);
        prop_assert_eq!(&a.log_capital_path[..cut], &b.log_capital_path[..cut]);
    }
}

#[test]
fn inadmissible_ratio_names_the_round() {
    let series = MovementSeries::new(vec![0.1; 10], "s").unwrap();
    let mut s = |past: &[f64]| if past.len() == 6 { 1.0 } else { 0.5 };
    match run_game(&mut s, &series, 2) {
        Err(sosnn_core::Error::StrategyViolation { round, .. }) => assert_eq!(round, 7),
        other => panic!("{other:?}"),
    }
    let mut nan = |_: &[f64]| f64::NAN;
    assert!(run_game(&mut nan, &series, 0).is_err());
}
