use proptest::prelude::*;

use cps_ids::control::{pid_step, PidConfig, PidState};
use cps_ids::estimation::{chi2_cdf, chi2_quantile, residual_power, InitialEstimate, KalmanFilter};
use cps_ids::ids::{adaptive_b, classify_flags, Debouncer, DetectorConfig, FlagVector, Label, CHARACTERIZATION};
use cps_ids::netsim::{ActuatorPolicy, BusSchedule, Quantizer};
use cps_ids::runner::format_sig;
use cps_ids::statespace::{rescale_period, LtiModel, Mat};

fn flags() -> impl Strategy<Value = FlagVector> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(a, b, c, d)| FlagVector::new(a, b, c, d))
}

proptest! {
    #[test]
    fn chi2_quantile_inverts_cdf(prob in 0.01f64..0.999_999, dof in 1u32..5) {
        let q = chi2_quantile(prob, dof).unwrap();
        prop_assert!((chi2_cdf(q, dof) - prob).abs() < 1e-10);
    }

    #[test]
    fn chi2_quantile_is_monotone(p1 in 0.01f64..0.99, dp in 1e-4f64..0.009, dof in 1u32..5) {
        prop_assert!(chi2_quantile(p1 + dp, dof).unwrap() > chi2_quantile(p1, dof).unwrap());
    }

    #[test]
    fn residual_power_is_nonnegative(r0 in -10.0f64..10.0, r1 in -10.0f64..10.0, s in 0.01f64..5.0, c in -0.9f64..0.9) {
        let sigma = Mat::from_rows(&[&[s, c * s], &[c * s, s]]).unwrap();
        prop_assert!(residual_power(&Mat::col(&[r0, r1]), &sigma).unwrap() >= 0.0);
    }

    #[test]
    fn kalman_covariance_stays_symmetric_psd(
        a in -0.99f64..0.99, b in -2.0f64..2.0, q in 1e-4f64..1.0, r in 1e-4f64..1.0,
        ys in proptest::collection::vec(-5.0f64..5.0, 1..60),
    ) {
        let model = LtiModel::scalar(a, b, 1.0, 0.0, q, r, 0.1).unwrap();
        let mut kf = KalmanFilter::new(model, InitialEstimate::Unknown).unwrap();
        for y in ys {
            kf.predict(&Mat::scalar(1.0)).unwrap();
            kf.update(&Mat::scalar(y)).unwrap();
            let p = kf.covariance()[0];
            prop_assert!(p > 0.0 && p.is_finite());
            prop_assert!(kf.last_sigma()[0] >= r);
        }
    }

    #[test]
    fn pid_output_respects_limits(errors in proptest::collection::vec(-1e4f64..1e4, 1..100)) {
        let cfg = PidConfig::dc_motor();
        let mut state = PidState::default();
        for e in errors {
            let (u, next) = pid_step(&cfg, &state, e);
            prop_assert!((cfg.u_min..=cfg.u_max).contains(&u));
            state = next;
        }
    }

    #[test]
    fn unsaturated_pid_is_linear(e1 in -100.0f64..100.0, e2 in -100.0f64..100.0) {
        let cfg = PidConfig::dc_motor().unsaturated();
        let s = PidState::default();
        let (u1, _) = pid_step(&cfg, &s, e1);
        let (u2, _) = pid_step(&cfg, &s, e2);
        let (u12, _) = pid_step(&cfg, &s, e1 + e2);
        prop_assert!((u12 - u1 - u2).abs() < 1e-9 * (1.0 + u12.abs()));
    }

    #[test]
    fn quantizer_lands_on_pwm_grid(v in -1e3f64..1e3) {
        let q = Quantizer::PWM8.apply(v);
        prop_assert!((0.0..=255.0).contains(&q));
        prop_assert_eq!(q, q.round());
    }

    #[test]
    fn actuator_policy_enforces_spacing(last in 0u64..1000, gap in 0u64..40) {
        let schedule = BusSchedule::with_period(0.05);
        let policy = ActuatorPolicy::for_period(0.05);
        let ok = policy.accepts(&schedule, Some(last), last + gap);
        prop_assert_eq!(ok, gap as f64 * schedule.tick_len() >= 0.005 - 1e-12);
    }

    #[test]
    fn debouncer_counts_recent_windows(seq in proptest::collection::vec(any::<bool>(), 1..50), k in 1usize..5) {
        let mut d = Debouncer::new(k, 5).unwrap();
        for i in 0..seq.len() {
            let got = d.push(seq[i]);
            let lo = i.saturating_sub(4);
            let want = seq[lo..=i].iter().filter(|&&b| b).count() >= k;
            prop_assert_eq!(got, want);
        }
    }

    #[test]
    fn classification_is_total_and_consistent(f in flags()) {
        let label = classify_flags(f);
        match CHARACTERIZATION.iter().find(|(g, _)| *g == f) {
            Some((_, l)) => prop_assert_eq!(label, *l),
            None => prop_assert_eq!(label, Label::Unclassified),
        }
    }

    #[test]
    fn adaptive_gain_stays_in_range(i in -5.0f64..50.0) {
        let cfg = DetectorConfig::dc_motor();
        let b = adaptive_b(&cfg, i, 0.095);
        prop_assert!(b > 0.0 && b <= 0.095);
    }

    #[test]
    fn adaptive_gain_falls_with_current(i1 in 0.0f64..20.0, di in 0.0f64..5.0) {
        let cfg = DetectorConfig::dc_motor();
        prop_assert!(adaptive_b(&cfg, i1 + di, 0.095) <= adaptive_b(&cfg, i1, 0.095));
    }

    #[test]
    fn sig_format_round_trips(x in -1e12f64..1e12) {
        let s = format_sig(x, 9);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-8 * x.abs().max(1e-300));
    }

    #[test]
    fn rescaled_substeps_rebuild_period(a in 0.05f64..0.99, b in -1.0f64..1.0, n in 1usize..30) {
        let (a_s, b_s) = rescale_period(&Mat::scalar(a), &Mat::scalar(b), n).unwrap();
        let (mut x, u) = (1.0, 2.0);
        for _ in 0..n {
            x = a_s[0] * x + b_s[0] * u;
        }
        prop_assert!((x - (a + b * u)).abs() < 1e-10);
    }
}
