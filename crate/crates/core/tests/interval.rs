mod common;

use common::{any_expr, names, point_in, poly_exp, sub_box};
use proptest::prelude::*;
use splitbound::expr::Model;
use splitbound::interval::{propagate, BoundsStore, Interval, PropagationSettings, Rounding};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn enclosures_contain_every_sampled_value(
        e in any_expr(3, 5),
        b in sub_box(3, 4.0, 1e-6),
        seed in any::<u64>(),
    ) {
        let enc = e.eval_interval(&b, Rounding::Outward);
        let mut s = seed | 1;
        let mut u = || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..10_000 {
            let x = point_in(&b, &[u(), u(), u()]);
            if let Ok(v) = e.eval_point(&x) {
                if !v.is_nan() {
                    prop_assert!(enc.contains(v), "{} not in {:?} at {:?}", v, enc, x);
                }
            }
        }
    }
}

#[test]
fn endpoint_arithmetic() {
    let r = Rounding::Outward;
    let sum = Interval::new(1.0, 2.0).add(Interval::new(3.0, 4.0), r);
    assert_eq!(sum, Interval::new(4.0, 6.0));
    assert_eq!(Interval::new(0.0, 2.0).mul(Interval::new(0.0, 2.0), r), Interval::new(0.0, 4.0));
    assert_eq!(Interval::new(1.0, 2.0).div(Interval::new(-1.0, 1.0), r), Interval::ENTIRE);
}

/// A two-input model with two derived variables, each optionally clipped.
fn model_text() -> impl Strategy<Value = String> {
    (
        poly_exp(2, 3),
        poly_exp(3, 3),
        proptest::option::of((-2.0f64..0.0, 0.0f64..2.0)),
        sub_box(2, 2.0, 0.1),
    )
        .prop_map(|(e1, e2, clip, b)| {
            let xy = names(2);
            let xyu = vec!["x".to_string(), "y".to_string(), "u".to_string()];
            let clip = clip.map(|(lo, hi)| format!(" in [{lo:?}, {hi:?}]")).unwrap_or_default();
            format!(
                "input x in [{:?}, {:?}]\ninput y in [{:?}, {:?}]\nu = {}{clip}\nv = {}\n",
                b[0].lo(),
                b[0].hi(),
                b[1].lo(),
                b[1].hi(),
                e1.display(&xy),
                e2.display(&xyu)
            )
        })
}

fn moved_more_than(a: f64, b: f64, s: &PropagationSettings) -> bool {
    a != b && (a.is_infinite() || (a - b).abs() > s.abs_tol.max(s.rel_tol * a.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn propagation_contracts_soundly_to_a_fixpoint(
        text in model_text(),
        known in proptest::option::of((-3.0f64..3.0, 0.0f64..3.0)),
        pts in proptest::collection::vec((0.0f64..=1.0, 0.0f64..=1.0), 300),
    ) {
        let m = Model::parse(&text).unwrap();
        let v = m.index_of("v").unwrap();
        let settings = PropagationSettings::default();
        let mut store = BoundsStore::new(&m, m.input_ranges());
        if let Some((lo, w)) = known {
            store.set(v, Interval::new(lo, lo + w));
        }
        let consistent = |vals: &[f64]| vals.iter().zip(store.values()).all(|(x, iv)| iv.contains(*x));
        match propagate(&m, &store, &settings) {
            Ok(out) => {
                for (o, i) in out.values().iter().zip(store.values()) {
                    prop_assert!(o.is_subset_of(*i), "{:?} not within {:?}", o, i);
                }
                for &(a, b) in &pts {
                    let x = point_in(m.input_ranges(), &[a, b]);
                    if let Ok(vals) = m.eval_point(&x) {
                        if vals.iter().all(|x| x.is_finite()) && consistent(&vals) {
                            for (k, x) in vals.iter().enumerate() {
                                prop_assert!(out.get(k).contains(*x), "{} = {} outside {:?}", m.names()[k], x, out.get(k));
                            }
                        }
                    }
                }
                let again = propagate(&m, &out, &settings).map_err(|e| TestCaseError::fail(format!("{e} on rerun of {text:?} {:?} -> {:?}", store.values(), out.values())))?;
                for (a, b) in out.values().iter().zip(again.values()) {
                    prop_assert!(!moved_more_than(a.lo(), b.lo(), &settings) && !moved_more_than(a.hi(), b.hi(), &settings),
                        "{:?} -> {:?}", a, b);
                }
            }
            Err(_) => {
                for &(a, b) in &pts {
                    let x = point_in(m.input_ranges(), &[a, b]);
                    if let Ok(vals) = m.eval_point(&x) {
                        prop_assert!(!consistent(&vals), "contradiction, but {:?} is consistent", x);
                    }
                }
            }
        }
    }
}

#[test]
fn backward_rule_matches_a_grid_search() {
    let m = Model::parse("input a in [0, 1]\ninput b in [0, 2]\ns = a + b").unwrap();
    let mut st = BoundsStore::new(&m, m.input_ranges());
    st.set(2, Interval::new(1.5, 3.0));
    let out = propagate(&m, &st, &PropagationSettings::default()).unwrap();

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..=1000 {
        for j in 0..=2000 {
            let (a, b) = (i as f64 * 1e-3, j as f64 * 1e-3);
            if (1.5..=3.0).contains(&(a + b)) {
                lo = lo.min(b);
                hi = hi.max(b);
            }
        }
    }
    let b = out.get(1);
    assert!(b.lo() <= lo && hi <= b.hi(), "{b:?} vs grid [{lo}, {hi}]");
    assert!((b.lo() - lo).abs() < 2e-3 && (b.hi() - hi).abs() < 2e-3, "{b:?}");
}

#[test]
fn slow_geometric_narrowing_still_terminates() {
    // each pass halves the feasible range; only the change threshold stops it
    let m = Model::parse("input x in [0, 1]\ninput y in [0, 1]\na = x - y\nb = x - 2*y").unwrap();
    let mut st = BoundsStore::new(&m, m.input_ranges());
    st.set(2, Interval::point(0.0));
    st.set(3, Interval::point(0.0));
    let settings = PropagationSettings {
        max_revisions: usize::MAX,
        ..Default::default()
    };
    let out = propagate(&m, &st, &settings).unwrap();
    assert!(out.get(0).contains(0.0) && out.get(1).contains(0.0));
    assert!(out.get(0).hi() < 1e-6, "{:?}", out.get(0));
}

#[test]
fn pvr_bounds_on_the_full_and_marked_boxes() {
    let m = Model::parse(
        "input PAP in [1.0, 88.0]\ninput LAP in [1.0, 88.0]\ninput CO in [1.0, 100]\nPVR = (PAP - LAP)/CO in [0, inf]\n",
    )
    .unwrap();
    let s = PropagationSettings::default();
    let full = propagate(&m, &BoundsStore::new(&m, m.input_ranges()), &s).unwrap();
    assert_eq!(full.get(3), Interval::new(0.0, 87.0));
    let marked = [Interval::new(20.75, 25.47), Interval::new(15.95, 17.32), Interval::new(6.41, 7.19)];
    let out = propagate(&m, &BoundsStore::new(&m, &marked), &s).unwrap();
    // the exact range, from the extreme corners; the forward rule is tight
    // here up to rounding
    let exact = Interval::new((20.75 - 17.32) / 7.19, (25.47 - 15.95) / 6.41);
    let got = out.get(3);
    assert!(exact.is_subset_of(got), "{got:?}");
    assert!(got.lo() > exact.lo() - 1e-12 && got.hi() < exact.hi() + 1e-12, "{got:?}");
    assert!(got.hi() < 1.4852 && got.hi() < 1.62);
}
