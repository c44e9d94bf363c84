use proptest::prelude::*;
use treeval::intervals::{
    intersect_all, solve_quadratic, union_all, Interval, QuadraticConstraint,
};
use treeval::IntervalSet;

fn raw_interval() -> impl Strategy<Value = (f64, f64, bool, bool)> {
    let end = prop_oneof![
        8 => (-5i32..=5).prop_map(f64::from),
        1 => Just(f64::NEG_INFINITY),
        1 => Just(f64::INFINITY),
    ];
    (end.clone(), end, any::<bool>(), any::<bool>())
}

fn raw_set() -> impl Strategy<Value = Vec<(f64, f64, bool, bool)>> {
    prop::collection::vec(raw_interval(), 0..5)
}

fn raw_member(ivs: &[(f64, f64, bool, bool)], x: f64) -> bool {
    ivs.iter().any(|&(lo, hi, lc, hc)| {
        let above = lo < x || (lc && lo.is_finite() && x == lo);
        let below = x < hi || (hc && hi.is_finite() && x == hi);
        above && below
    })
}

fn build(ivs: &[(f64, f64, bool, bool)]) -> IntervalSet {
    IntervalSet::from_intervals(
        ivs.iter()
            .map(|&(lo, hi, lc, hc)| Interval::new(lo, hi, lc, hc))
            .collect(),
    )
}

fn probes() -> Vec<f64> {
    let mut v: Vec<f64> = (-14..=14).map(|k| f64::from(k) * 0.5).collect();
    v.extend([-1e12, 1e12]);
    v
}

fn canonical(s: &IntervalSet) -> bool {
    s.pieces().windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        a.hi < b.lo || (a.hi == b.lo && !a.hi_closed && !b.lo_closed)
    }) && s.pieces().iter().all(|iv| !iv.is_empty())
}

proptest! {
    #[test]
    fn construction_matches_pointwise_union(raw in raw_set()) {
        let s = build(&raw);
        prop_assert!(canonical(&s));
        for x in probes() {
            prop_assert_eq!(s.contains(x), raw_member(&raw, x), "x = {}", x);
        }
    }

    #[test]
    fn binary_operations_match_pointwise_logic(a in raw_set(), b in raw_set()) {
        let (sa, sb) = (build(&a), build(&b));
        let (i, u, c) = (sa.intersect(&sb), sa.union(&sb), sa.complement());
        prop_assert!(canonical(&i) && canonical(&u) && canonical(&c));
        for x in probes() {
            let (ma, mb) = (raw_member(&a, x), raw_member(&b, x));
            prop_assert_eq!(i.contains(x), ma && mb);
            prop_assert_eq!(u.contains(x), ma || mb);
            prop_assert_eq!(c.contains(x), !ma);
        }
    }

    #[test]
    fn sweeps_equal_pairwise_folds(family in prop::collection::vec(raw_set(), 0..5)) {
        let sets: Vec<IntervalSet> = family.iter().map(|r| build(r)).collect();
        let folded_i = sets.iter().fold(IntervalSet::real_line(), |acc, s| acc.intersect(s));
        let folded_u = sets.iter().fold(IntervalSet::empty(), |acc, s| acc.union(s));
        prop_assert_eq!(intersect_all(&sets), folded_i);
        prop_assert_eq!(union_all(&sets), folded_u);
    }

    #[test]
    fn complement_is_an_involution(raw in raw_set()) {
        let s = build(&raw);
        prop_assert_eq!(s.complement().complement(), s);
    }

    #[test]
    fn quadratic_solution_matches_sign_evaluation(
        a in -3.0f64..3.0,
        b in -6.0f64..6.0,
        c in -6.0f64..6.0,
        ge in any::<bool>(),
    ) {
        let q = if ge { QuadraticConstraint::ge(a, b, c) } else { QuadraticConstraint::le(a, b, c) };
        let s = solve_quadratic(&q, 1e-12);
        for k in -400..=400 {
            let phi = f64::from(k) * 0.025;
            if s.distance_to_boundary(phi) < 1e-6 {
                continue;
            }
            let v = q.eval(phi);
            let holds = if ge { v >= 0.0 } else { v <= 0.0 };
            // values this close to zero may sit on either side after rounding
            if v.abs() < 1e-9 {
                continue;
            }
            prop_assert_eq!(s.contains(phi), holds, "phi = {}, value = {}", phi, v);
        }
    }
}

#[test]
fn degenerate_quadratics() {
    assert!(solve_quadratic(&QuadraticConstraint::le(0.0, 0.0, 0.0), 1e-9).is_real_line());
    assert!(solve_quadratic(&QuadraticConstraint::le(0.0, 0.0, 1.0), 1e-9).is_empty());
    let point = solve_quadratic(&QuadraticConstraint::le(1.0, -2.0, 1.0), 1e-9);
    assert!(point.contains(1.0) && !point.contains(1.0 + 1e-6));
    let outside = solve_quadratic(&QuadraticConstraint::ge(1.0, 0.0, -4.0), 1e-9);
    assert!(outside.contains(-2.0) && outside.contains(2.0) && !outside.contains(0.0));
    let ray = solve_quadratic(&QuadraticConstraint::le(0.0, 2.0, -4.0), 1e-9);
    assert_eq!(ray, IntervalSet::from_interval(Interval::below(2.0, true)));
}

#[test]
fn json_round_trip_keeps_infinite_ends() {
    let s = IntervalSet::from_intervals(vec![
        Interval::below(-1.0, true),
        Interval::new(0.5, 2.0, false, true),
    ]);
    let text = serde_json::to_string(&s).unwrap();
    assert!(text.contains("-inf"));
    let back: IntervalSet = serde_json::from_str(&text).unwrap();
    assert_eq!(back, s);
}
