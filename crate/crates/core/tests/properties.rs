use bssim::analysis::{phase_ledger, RfInterval};
use bssim::dsl::parse;
use proptest::prelude::*;

fn value() -> impl Strategy<Value = f64> {
    prop_oneof![(0u32..2000).prop_map(|k| k as f64 / 8.0), 0.001f64..500.0]
}

fn phase() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("x".to_string()),
        Just("-y".to_string()),
        Just("pi/2".to_string()),
        (-3.0f64..3.0).prop_map(|p| format!("({p})")),
    ]
}

fn event() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("laser".to_string()),
        value().prop_map(|d| format!("laser dur={d}")),
        value().prop_map(|d| format!("delay dur={d}")),
        (phase(), 0.1f64..6.3, any::<bool>()).prop_map(|(p, f, s)| {
            format!("mw flip={f} phase={p}{}", if s { " selective" } else { "" })
        }),
        (phase(), 1.0f64..50.0).prop_map(|(p, r)| format!("mw flip=pi phase={p} rabi={r}")),
        (phase(), 1.0f64..50.0).prop_map(|(p, r)| format!("dd flip=pi phase={p} rabi={r}")),
        (0.5f64..20.0, value(), value(), phase())
            .prop_map(|(f, p, d, ph)| format!("rf freq={f} power={p} dur={d} phase={ph}")),
        (0.5f64..20.0, value()).prop_map(|(f, d)| format!("rf freq={f} power=p0/2 dur=t+{d}")),
        Just("measure".to_string()),
    ]
}

fn source() -> impl Strategy<Value = String> {
    (value(), value(), prop::collection::vec(event(), 0..14)).prop_map(|(t, p0, events)| {
        let mut s = format!("param t = {t}\nparam p0 = {p0}  # mW\n");
        for e in events {
            s.push_str(&e);
            s.push('\n');
        }
        s
    })
}

/// DD times and disjoint RF windows on [0, 1000] µs.
fn timeline() -> impl Strategy<Value = (Vec<f64>, Vec<RfInterval>)> {
    (
        prop::collection::vec(0.0f64..1000.0, 0..6),
        prop::collection::vec((0.0f64..1000.0, 0.0f64..1000.0, -30.0f64..30.0), 0..5),
    )
        .prop_map(|(dd, raw)| {
            let mut edges: Vec<f64> = raw.iter().flat_map(|r| [r.0, r.1]).collect();
            edges.sort_by(f64::total_cmp);
            let rf = edges
                .chunks(2)
                .zip(&raw)
                .map(|(e, r)| RfInterval { start: e[0], end: e[1], omega_bs_khz: r.2 })
                .collect();
            (dd, rf)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printed_sequences_reparse_identically(src in source()) {
        let first = parse(&src).unwrap();
        let printed = first.to_source();
        let second = parse(&printed).unwrap();
        prop_assert_eq!(&second, &first);
        prop_assert_eq!(second.to_source(), printed);
    }

    #[test]
    fn ledger_is_linear_in_shift((dd, rf) in timeline(), c in -4.0f64..4.0) {
        let base = phase_ledger(&dd, &rf).unwrap().net_phase;
        let scaled: Vec<_> = rf.iter().map(|r| RfInterval { omega_bs_khz: c * r.omega_bs_khz, ..*r }).collect();
        let got = phase_ledger(&dd, &scaled).unwrap().net_phase;
        prop_assert!((got - c * base).abs() <= 1e-9 * (1.0 + base.abs()), "{} vs {}", got, c * base);
    }

    #[test]
    fn ledger_ignores_a_common_time_offset((dd, rf) in timeline(), s in 0.0f64..500.0) {
        let base = phase_ledger(&dd, &rf).unwrap().net_phase;
        let dd2: Vec<f64> = dd.iter().map(|t| t + s).collect();
        let rf2: Vec<_> = rf.iter().map(|r| RfInterval { start: r.start + s, end: r.end + s, ..*r }).collect();
        let got = phase_ledger(&dd2, &rf2).unwrap().net_phase;
        prop_assert!((got - base).abs() <= 1e-6 * (1.0 + base.abs()), "{} vs {}", got, base);
    }

    #[test]
    fn a_refocusing_pulse_after_the_last_rf_window_changes_nothing((dd, rf) in timeline()) {
        let base = phase_ledger(&dd, &rf).unwrap().net_phase;
        let mut dd2 = dd.clone();
        dd2.push(2000.0);
        let got = phase_ledger(&dd2, &rf).unwrap().net_phase;
        prop_assert!((got - base).abs() <= 1e-12 * (1.0 + base.abs()));
    }
}
