use proptest::prelude::*;

use cbs_core::bounds::{
    bound_gap, full_report, h_credit_bounds, j_credit_bounds, new_credit_bounds, service_curve, JMode,
};
use cbs_core::model::{parse_config, validate, ConfigFormat, Rat, ValidatedConfig};
use cbs_core::scenarios::{random_config, random_config_any, random_scenario};
use cbs_core::simulator::{check_bounds, check_structure, check_work_conservation, simulate};

fn scaled(cfg: &ValidatedConfig, k: &Rat) -> ValidatedConfig {
    let mut port = cfg.config().clone();
    port.line_rate = &port.line_rate * k;
    port.cdt_curve.rate = &port.cdt_curve.rate * k;
    for a in &mut port.avb {
        a.idle_slope = &a.idle_slope * k;
        a.send_slope = &a.send_slope * k;
    }
    validate(port).expect("scaling keeps a config valid")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validated_slopes_are_exact(seed in any::<u64>()) {
        let cfg = random_config_any(seed);
        let c = cfg.line_rate();
        let total: Rat = cfg.config().avb.iter().map(|a| a.idle_slope.clone()).sum();
        prop_assert!(total < *c);
        for a in &cfg.config().avb {
            prop_assert_eq!(&a.idle_slope - &a.send_slope, c.clone());
        }
    }

    #[test]
    fn validate_is_idempotent(seed in any::<u64>()) {
        let cfg = random_config_any(seed);
        let again = validate(cfg.config().clone()).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.lengths(), cfg.lengths());
    }

    #[test]
    fn config_text_round_trips(seed in any::<u64>()) {
        let cfg = random_config_any(seed);
        prop_assert_eq!(parse_config(&cfg.config().to_toml(), ConfigFormat::Toml).unwrap(), cfg.clone());
        prop_assert_eq!(parse_config(&cfg.config().to_json(), ConfigFormat::Json).unwrap(), cfg);
    }

    #[test]
    fn improved_bound_orders_against_h(seed in any::<u64>()) {
        let cfg = random_config_any(seed);
        let new = new_credit_bounds(&cfg);
        let h = h_credit_bounds(&cfg);
        prop_assert_eq!(&new[0], &h[0]);
        for i in 1..cfg.p() {
            prop_assert!(new[i] < h[i], "class {}: {} vs {}", i + 1, new[i], h[i]);
        }
        let gap = bound_gap(&cfg);
        for i in 0..cfg.p() {
            prop_assert_eq!(&gap[i], &(&h[i] - &new[i]));
        }
        prop_assert!(full_report(&cfg, JMode::FoldIntoBe).check().is_ok());
    }

    #[test]
    fn two_classes_order_against_j(seed in any::<u64>()) {
        let cfg = random_config(seed, 2);
        let new = new_credit_bounds(&cfg);
        let j = j_credit_bounds(&cfg, JMode::Strict).unwrap();
        let j2 = j.class2.unwrap();
        let small = cfg.avb(2).max_packet <= cfg.config().be_max_packet;
        prop_assert!(new[1] <= j2);
        prop_assert_eq!(new[1] == j2, small);
    }

    #[test]
    fn bounds_are_homogeneous_in_rates(seed in any::<u64>(), num in 1i64..50, den in 1i64..50) {
        let cfg = random_config_any(seed);
        let k = Rat::ratio(num, den);
        let other = scaled(&cfg, &k);
        prop_assert_eq!(new_credit_bounds(&other), new_credit_bounds(&cfg));
        prop_assert_eq!(h_credit_bounds(&other), h_credit_bounds(&cfg));
    }

    #[test]
    fn latency_grows_with_the_credit_bound(seed in any::<u64>(), a in 0i64..100_000, b in 1i64..100_000) {
        let cfg = random_config_any(seed);
        let lo = Rat::int(a);
        let hi = Rat::int(a + b);
        for i in 1..=cfg.p() {
            let l = service_curve(&cfg, i, &lo).unwrap().latency;
            let h = service_curve(&cfg, i, &hi).unwrap().latency;
            prop_assert!(l < h);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_traffic_respects_every_invariant(config_seed in any::<u64>(), seed in any::<u64>(), frames in 20i64..120) {
        let cfg = random_config_any(config_seed);
        let horizon = &cfg.lengths().l_n / cfg.line_rate() * Rat::int(frames);
        let scenario = random_scenario(&cfg, seed, &horizon);
        let result = simulate(&cfg, &scenario).unwrap();
        let bounds = check_bounds(&cfg, &result);
        prop_assert!(bounds.is_empty(), "{:?}", bounds);
        let structure = check_structure(&cfg, &result);
        prop_assert!(structure.is_empty(), "{:?}", structure);
        let idle = check_work_conservation(&cfg, &scenario, &result);
        prop_assert!(idle.is_empty(), "{:?}", idle);
        prop_assert_eq!(simulate(&cfg, &scenario).unwrap(), result);
    }
}
