//! Echo-modulation-curve simulation of a CPMG multi-echo spin-echo train.
//!
//! The train is modelled with an extended phase graph: an ideal 90°
//! excitation, then for every echo a crusher-pair refocusing period
//! (relax and dephase for half the echo spacing, refocus, relax and dephase
//! again) after which the echo amplitude is read from F₀. Refocusing is about
//! the axis of the excited magnetization (CPMG). With non-180° pulses the
//! stimulated and indirect pathways feed back into F₀, which is what bends
//! the curve away from a pure exponential.

mod epg;
mod protocol;

pub use epg::{EpgState, Rotation};
pub use protocol::{ProfileSample, PulseModel, SequenceProtocol};

use crate::error::{invalid, Result};

/// Signal magnitudes at the retained echoes for one (T2, B1) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EmcCurve {
    pub values: Vec<f64>,
    pub t2_ms: f64,
    pub b1_factor: f64,
}

fn check_t2_b1(t2_ms: f64, b1_factor: f64) -> Result<()> {
    if !(t2_ms > 0.0) || t2_ms.is_nan() {
        return Err(invalid(format!("T2 must be positive, got {t2_ms}")));
    }
    if !(b1_factor > 0.0 && b1_factor <= 2.0) {
        return Err(invalid(format!("B1 factor must lie in (0, 2], got {b1_factor}")));
    }
    Ok(())
}

/// Simulate the echo-modulation curve at the retained echoes of `protocol`.
pub fn simulate_emc(t2_ms: f64, b1_factor: f64, protocol: &SequenceProtocol) -> Result<EmcCurve> {
    simulate_emc_with_order(t2_ms, b1_factor, protocol, protocol.n_echoes)
}

/// As [`simulate_emc`] with an explicit bound on the tracked dephasing order.
///
/// Orders above `n_echoes` can never return to F₀ before the last echo, so
/// any `max_order >= n_echoes` gives the same curve.
pub fn simulate_emc_with_order(
    t2_ms: f64,
    b1_factor: f64,
    protocol: &SequenceProtocol,
    max_order: usize,
) -> Result<EmcCurve> {
    let full = full_train_with_order(t2_ms, b1_factor, protocol, max_order)?;
    Ok(EmcCurve {
        values: protocol.echo_selection.iter().map(|&k| full[k - 1]).collect(),
        t2_ms,
        b1_factor,
    })
}

/// Magnitudes at every echo of the train, ignoring `echo_selection`.
pub fn full_train(t2_ms: f64, b1_factor: f64, protocol: &SequenceProtocol) -> Result<Vec<f64>> {
    full_train_with_order(t2_ms, b1_factor, protocol, protocol.n_echoes)
}

fn full_train_with_order(
    t2_ms: f64,
    b1_factor: f64,
    protocol: &SequenceProtocol,
    max_order: usize,
) -> Result<Vec<f64>> {
    check_t2_b1(t2_ms, b1_factor)?;
    protocol.validate()?;
    if max_order < protocol.n_echoes {
        return Err(invalid(format!(
            "state order bound {max_order} is below the echo count {}",
            protocol.n_echoes
        )));
    }
    let angle = (b1_factor * protocol.nominal_refocus_deg).to_radians();
    match &protocol.pulse {
        PulseModel::Hard => Ok(hard_pulse_train(t2_ms, angle, protocol, max_order)),
        PulseModel::SliceProfile { samples } => {
            let total: f64 = samples.iter().map(|s| s.weight).sum();
            let mut acc = vec![0.0; protocol.n_echoes];
            for s in samples {
                let train = hard_pulse_train(t2_ms, angle * s.scale, protocol, max_order);
                for (a, v) in acc.iter_mut().zip(train) {
                    *a += s.weight * v;
                }
            }
            Ok(acc.into_iter().map(|v| v / total).collect())
        }
    }
}

fn hard_pulse_train(t2_ms: f64, angle: f64, protocol: &SequenceProtocol, max_order: usize) -> Vec<f64> {
    let refocus = Rotation::new(angle, 0.0);
    let mut state = EpgState::excited(max_order);
    let mut out = Vec::with_capacity(protocol.n_echoes);
    for k in 1..=protocol.n_echoes {
        let period = if k == 1 { protocol.te1 } else { protocol.delta_te };
        let half = period / 2.0;
        let e1 = (-half / protocol.t1_assumed).exp();
        let e2 = (-half / t2_ms).exp();
        state.relax(e1, e2);
        state.dephase();
        state.rotate(&refocus);
        state.relax(e1, e2);
        state.dephase();
        out.push(state.echo().norm());
    }
    out
}

/// Pure exponential decay `pd * exp(-t / T2)` at the retained echo times.
pub fn ideal_exponential(t2_ms: f64, pd: f64, protocol: &SequenceProtocol) -> Result<EmcCurve> {
    if !(t2_ms > 0.0) {
        return Err(invalid(format!("T2 must be positive, got {t2_ms}")));
    }
    if !(pd >= 0.0) || !pd.is_finite() {
        return Err(invalid(format!("PD must be non-negative, got {pd}")));
    }
    protocol.validate()?;
    Ok(EmcCurve {
        values: protocol
            .retained_echo_times()
            .into_iter()
            .map(|t| pd * (-t / t2_ms).exp())
            .collect(),
        t2_ms,
        b1_factor: 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn protocol() -> SequenceProtocol {
        SequenceProtocol::default()
    }

    #[test]
    fn perfect_refocusing_gives_exponential() {
        let c = simulate_emc(100.0, 1.0, &protocol()).unwrap();
        assert_eq!(c.values.len(), 10);
        assert!((c.values[0] - 0.860708).abs() < 1e-6);
        for (k, v) in c.values.iter().enumerate() {
            let want = (-(15.0 * (k + 1) as f64) / 100.0).exp();
            assert!(((v - want) / want).abs() < 1e-12);
        }
    }

    #[test]
    fn selection_subsamples_full_curve() {
        let full = simulate_emc(80.0, 0.8, &protocol()).unwrap();
        let p = protocol().with_selection(vec![1, 3, 5]).unwrap();
        let sel = simulate_emc(80.0, 0.8, &p).unwrap();
        assert_eq!(sel.values, vec![full.values[0], full.values[2], full.values[4]]);
    }

    #[test]
    fn values_are_finite_and_non_negative() {
        for &b1 in &[0.3, 0.7, 1.0, 1.3, 2.0] {
            let c = simulate_emc(45.0, b1, &protocol()).unwrap();
            assert!(c.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        }
    }

    #[test]
    fn monotone_in_t2_at_nominal_b1() {
        let p = protocol();
        let mut prev = simulate_emc(10.0, 1.0, &p).unwrap().values;
        for t2 in (11..=300).map(f64::from) {
            let cur = simulate_emc(t2, 1.0, &p).unwrap().values;
            assert!(cur.iter().zip(&prev).all(|(c, p)| c >= p));
            prev = cur;
        }
    }

    #[test]
    fn doubling_state_order_changes_nothing() {
        let p = protocol();
        for &b1 in &[0.7, 0.9, 1.2] {
            let a = simulate_emc_with_order(60.0, b1, &p, 10).unwrap().values;
            let b = simulate_emc_with_order(60.0, b1, &p, 20).unwrap().values;
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn order_bound_below_echo_count_is_rejected() {
        assert!(simulate_emc_with_order(60.0, 1.0, &protocol(), 9).is_err());
    }

    // A hard refocusing pulse of angle α and one of 360° − α are mirror images
    // of each other, so B1 = 1 ± δ give the same magnitudes under the hard
    // pulse model. A non-trivial slice profile breaks that symmetry.
    #[test]
    fn b1_mirror_symmetry_of_hard_pulses() {
        let p = protocol();
        let lo = simulate_emc(80.0, 0.8, &p).unwrap().values;
        let hi = simulate_emc(80.0, 1.2, &p).unwrap().values;
        for (a, b) in lo.iter().zip(&hi) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn slice_profile_breaks_b1_mirror_symmetry() {
        let samples = (0..8)
            .map(|i| ProfileSample { scale: 0.3 + 0.1 * i as f64, weight: 1.0 })
            .collect();
        let p = protocol().with_pulse(PulseModel::SliceProfile { samples });
        let lo = simulate_emc(80.0, 0.8, &p).unwrap().values;
        let hi = simulate_emc(80.0, 1.2, &p).unwrap().values;
        assert_ne!(lo[1], hi[1]);
        assert!((lo[1] - hi[1]).abs() > 1e-6);
    }

    #[test]
    fn single_sample_profile_matches_hard_pulse() {
        let samples = vec![ProfileSample { scale: 1.0, weight: 3.0 }];
        let p = protocol().with_pulse(PulseModel::SliceProfile { samples });
        let a = simulate_emc(70.0, 0.9, &p).unwrap().values;
        let b = simulate_emc(70.0, 0.9, &protocol()).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn reduced_refocusing_raises_late_echoes_relative_to_first() {
        let p = protocol();
        let ideal = simulate_emc(80.0, 1.0, &p).unwrap().values;
        let low = simulate_emc(80.0, 0.7, &p).unwrap().values;
        assert!(low[9] / low[0] > ideal[9] / ideal[0]);
    }

    #[test]
    fn rejects_bad_arguments() {
        let p = protocol();
        assert!(simulate_emc(0.0, 1.0, &p).is_err());
        assert!(simulate_emc(-5.0, 1.0, &p).is_err());
        assert!(simulate_emc(50.0, 0.0, &p).is_err());
        assert!(simulate_emc(50.0, 2.5, &p).is_err());
        let mut bad = p.clone();
        bad.tr = 10.0;
        assert!(simulate_emc(50.0, 1.0, &bad).is_err());
    }

    #[test]
    fn ideal_exponential_cases() {
        let p = protocol();
        let flat = ideal_exponential(1e12, 1.0, &p).unwrap();
        assert!(flat.values.iter().all(|v| (v - 1.0).abs() < 1e-9));
        let two = ideal_exponential(100.0, 2.0, &p).unwrap();
        assert!((two.values[0] - 1.721416).abs() < 1e-6);
        let zero = ideal_exponential(100.0, 0.0, &p).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        assert!(ideal_exponential(0.0, 1.0, &p).is_err());
        assert!(ideal_exponential(10.0, -1.0, &p).is_err());
    }
}
