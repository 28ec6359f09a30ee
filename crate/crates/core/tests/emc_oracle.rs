mod common;

use emct2::emc_sim::{full_train, ideal_exponential, simulate_emc, SequenceProtocol};
use proptest::prelude::*;

#[test]
fn epg_matches_isochromats_on_reference_grid() {
    let p = SequenceProtocol::default();
    let mut worst = 0.0f64;
    for t2 in [40.0, 80.0, 120.0, 160.0] {
        for b1 in [0.7, 0.85, 1.0, 1.15, 1.3] {
            let epg = full_train(t2, b1, &p).unwrap();
            let iso = common::isochromat_train(t2, b1, &p, 2048);
            for (a, b) in epg.iter().zip(&iso) {
                worst = worst.max((a - b).abs());
            }
        }
    }
    assert!(worst <= 1e-10, "worst deviation {worst:e}");
}

#[test]
fn cpmg_identity_over_t2_sweep() {
    let p = SequenceProtocol::default();
    for t2 in (40..=300).map(f64::from) {
        let emc = simulate_emc(t2, 1.0, &p).unwrap().values;
        let exp = ideal_exponential(t2, 1.0, &p).unwrap().values;
        for (a, b) in emc.iter().zip(&exp) {
            assert!(((a - b) / b).abs() <= 1e-9, "T2 {t2}: {a} vs {b}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn epg_matches_isochromats_for_random_protocols(
        t2 in 10.0f64..400.0,
        b1 in 0.5f64..1.5,
        te1 in 5.0f64..30.0,
        dte in 5.0f64..30.0,
        n in 1usize..14,
        nominal in 90.0f64..180.0,
    ) {
        let mut p = SequenceProtocol::new(te1, dte, n, 3000.0);
        p.nominal_refocus_deg = nominal;
        let epg = full_train(t2, b1, &p).unwrap();
        let iso = common::isochromat_train(t2, b1, &p, 1024);
        for (a, b) in epg.iter().zip(&iso) {
            prop_assert!((a - b).abs() <= 1e-9, "{} vs {}", a, b);
        }
    }

    #[test]
    fn magnitudes_are_bounded_by_free_decay(t2 in 10.0f64..400.0, b1 in 0.5f64..1.5) {
        let p = SequenceProtocol::default();
        let emc = full_train(t2, b1, &p).unwrap();
        for (k, v) in emc.iter().enumerate() {
            prop_assert!(*v >= 0.0);
            prop_assert!(*v <= 1.0 + 1e-12, "echo {} = {}", k + 1, v);
        }
    }
}
